import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hartreelab.tensorlab import (
    LabeledTensor, MAX_ENTRIES, chain_sets, check_chain_merge, check_matrix_merge, check_pair_merge,
    contraction_denominator, contraction_family, gaussian_contraction_check, matrix_op_norm,
    partition_norm, random_instance, run_merging_trials, run_weighted_trials, semi_product,
    semi_products, verify_merging, weighted_merge_check,
)


def T(axes, values):
    return LabeledTensor.from_array(axes, values)


def cplx(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def test_partition_norm_basics(rng):
    assert partition_norm(T("ab", np.eye(4)), "a", "b") == pytest.approx(1.0)
    u, v = cplx(rng, 3), cplx(rng, 5)
    r1 = T("ab", np.outer(u, v))
    assert partition_norm(r1, "a", "b") == pytest.approx(np.linalg.norm(u) * np.linalg.norm(v))
    h = T("abc", cplx(rng, 3, 4, 2))
    assert partition_norm(h, "ab", "c") == pytest.approx(partition_norm(h, "c", "ab"), rel=1e-12)
    assert partition_norm(h, "", "abc") == pytest.approx(h.frobenius(), rel=1e-12)
    for B, C in (("a", "bc"), ("ac", "b"), ("b", "ac")):
        assert partition_norm(h, B, C) <= h.frobenius() * (1 + 1e-12)
    with pytest.raises(ValueError):
        partition_norm(h, "a", "b")


def test_power_iteration_matches_svd(rng):
    A = cplx(rng, 30, 20)
    assert matrix_op_norm(A, "power") == pytest.approx(matrix_op_norm(A, "svd"), rel=1e-10)
    assert matrix_op_norm(np.zeros((3, 3)), "power") == 0.0
    with pytest.raises(ValueError):
        matrix_op_norm(A, "qr")


def test_tensor_validation():
    with pytest.raises(ValueError):
        T("aa", np.eye(2))
    with pytest.raises(ValueError):
        LabeledTensor(("a",), {"a": np.arange(3)[:, None]}, np.zeros(4))
    assert MAX_ENTRIES == 10 ** 7


def test_semi_product_against_loops(rng):
    h1, h2 = T("abc", cplx(rng, 2, 3, 4)), T("cd", cplx(rng, 4, 5))
    H = semi_product(h1, h2)
    assert H.axes == ("a", "b", "d")
    ref = np.zeros((2, 3, 5), complex)
    for a, b, c, d in np.ndindex(2, 3, 4, 5):
        ref[a, b, d] += h1.values[a, b, c] * h2.values[c, d]
    assert np.allclose(H.values, ref, rtol=1e-13)
    M1, M2 = cplx(rng, 3, 4), cplx(rng, 4, 2)
    assert np.allclose(semi_product(T("ab", M1), T("bc", M2)).values, M1 @ M2)
    eye = semi_product(T("ab", np.eye(3)), T("bc", M1))
    assert np.allclose(eye.values, M1)


def test_semi_products_associative_and_rejects(rng):
    a, b, c = T("xy", cplx(rng, 2, 3)), T("yz", cplx(rng, 3, 4)), T("zw", cplx(rng, 4, 2))
    left = semi_product(semi_product(a, b), c)
    assert np.allclose(semi_products([a, b, c]).values, left.values, rtol=1e-12)
    with pytest.raises(ValueError):
        semi_products([a, a.relabel({"x": "q"}), a.relabel({"x": "r"})])
    bad = LabeledTensor(("y", "u"), {"y": np.arange(3)[:, None] + 1, "u": np.arange(2)[:, None]},
                        np.ones((3, 2)))
    with pytest.raises(ValueError):
        semi_product(a, bad)


def test_merging_with_identity_is_equality(rng):
    h = T("ab", cplx(rng, 4, 5))
    rep = check_pair_merge(h, T("bc", np.eye(5)), "c", "a")
    assert rep.holds and rep.lhs == pytest.approx(rep.rhs, rel=1e-12)
    rep = check_matrix_merge(T("ab", cplx(rng, 3, 3)), [T("aA", np.eye(3))], {"a"})
    assert rep.holds and rep.ratio == pytest.approx(1.0, rel=1e-12)


def test_chain_sets():
    Bs, Cs = chain_sets([{"a", "b"}, {"b", "c"}, {"c", "d"}])
    assert Bs == [{"b"}, {"c"}, set()] and Cs == [set(), {"b"}, {"c"}]


def test_invalid_partitions_flagged(rng):
    h1, h2 = T("ab", cplx(rng, 2, 2)), T("bc", cplx(rng, 2, 2))
    assert not check_pair_merge(h1, h2, "a", "b").hypothesis_ok
    assert not check_chain_merge([h1, h2, h2.relabel({"c": "d"})], "a", "cd").hypothesis_ok
    assert not check_matrix_merge(h1, [T("zZ", np.eye(2))], {"a"}).hypothesis_ok


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.sampled_from(["pair", "chain", "matrices"]))
def test_random_instances_hold(seed, kind):
    args = random_instance(kind, np.random.default_rng(seed))
    rep = verify_merging(kind, *args)
    assert rep.hypothesis_ok and rep.holds


def test_trial_runners_deterministic():
    a = run_merging_trials("chain", 50, 3)
    assert a.violations == 0 and a.to_dict() == run_merging_trials("chain", 50, 3).to_dict()
    w = run_weighted_trials(50, 3)
    assert w.violations == 0 and "constant_one_violations" in w.extra


def test_weighted_check():
    k = np.array([[0, 0, 0], [1, 0, 0]])
    h1 = LabeledTensor(("k", "k1"), {"k": k, "k1": k}, np.eye(2))
    h2 = LabeledTensor(("k1", "k2"), {"k1": k, "k2": k}, np.array([[1.0, 2.0], [0.5, 1.0]]))
    rep = weighted_merge_check(h1, h2, 1.0, 2.0)
    assert rep.lhs == pytest.approx(rep.rhs) and rep.holds
    zero = LabeledTensor(("k1", "k2"), {"k1": k, "k2": k}, np.zeros((2, 2)))
    assert weighted_merge_check(h1, zero, 1.0, 2.0).lhs == 0.0
    far = LabeledTensor(("k", "k1"), {"k": k, "k1": k + 5}, np.ones((2, 2)))
    with pytest.raises(ValueError):
        weighted_merge_check(far, h2.relabel({}), 1.0, 2.0)
    with pytest.raises(ValueError):
        weighted_merge_check(h1, h2, 1.0, 9.0)


def test_contraction_zero_and_single_index(rng):
    h, signs = contraction_family(3, "gaussian", rng)
    zero = LabeledTensor(h.axes, h.ranges, np.zeros_like(h.values))
    assert gaussian_contraction_check(zero, signs, 5, 0).max_ratio == 0.0
    # one contracted index: sum_k h_{bck} eta_k has norm at most the (b k -> c) norm times |eta|
    pts = h.ranges["b"]
    g = LabeledTensor(("b", "c", "k1"), {a: pts for a in ("b", "c", "k1")},
                      cplx(rng, *(len(pts),) * 3))
    assert contraction_denominator(g) >= partition_norm(g, ["b", "k1"], ["c"])
    rep = gaussian_contraction_check(g, (1,), 200, 1)
    assert rep.quantiles[0.5] < 3.0
    with pytest.raises(ValueError):
        gaussian_contraction_check(g, (1, -1), 5, 0)


def test_contraction_family_support(rng):
    h, _ = contraction_family(2, "convolution", rng)
    v = h.values
    n = v.shape[0]
    for b, c, k1, k2 in np.ndindex(n, n, n, n):
        if v[b, c, k1, k2] != 0:
            assert k1 != k2 and b - c == k1 - k2
    with pytest.raises(ValueError):
        contraction_family(2, "uniform", rng)
