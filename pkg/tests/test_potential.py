import csv

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hartreelab.lattice import FourierState, mode_set
from hartreelab.params import ParamSet
from hartreelab.potential import (
    ETA, Potential, hartree_vector_field, make_bessel_potential, multilinear_apply,
    multilinear_array, multilinear_direct, reality_defect, window_weight,
)
from hartreelab.renorm import renorm_constants


def rand(rng, N):
    n = mode_set(N).size
    return rng.standard_normal(n) + 1j * rng.standard_normal(n)


def test_vhat_examples():
    for beta in (0.3, 0.99, 1.0):
        P = make_bessel_potential(beta, 4)
        assert P.vhat((0, 0, 0)) == 1.0
        assert P.vhat((1, 0, 0)) == pytest.approx(2 ** (-beta / 2), abs=1e-15)


@given(st.lists(st.tuples(*(st.integers(-16, 16),) * 3), min_size=1, max_size=100))
def test_vhat_even_and_bounded(ks):
    P = make_bessel_potential(0.99, 8)
    k = np.array(ks)
    assert np.array_equal(P.vhat(k), P.vhat(-k))
    assert np.all(np.abs(P.vhat(k)) <= (1 + np.sum(k * k, axis=1)) ** (-0.99 / 2) + 1e-15)


@pytest.mark.parametrize("beta", [0.0, -0.5, 1.5])
def test_beta_out_of_range(beta):
    with pytest.raises(ValueError):
        make_bessel_potential(beta, 2)


@pytest.mark.parametrize("M", [2, 4, 8, 16])
def test_fejer_samples_nonnegative(M):
    assert make_bessel_potential(0.99, 8).fejer_samples(M).min() >= -1e-9


def test_cutoff_profile():
    t = np.linspace(0, 4, 4001)
    v = ETA(t)
    assert ETA(0.5) == 1.0 and ETA(3.0) == 0.0
    assert np.all(v[t <= 1] == 1) and np.all(v[t >= 2] == 0)
    assert np.all(np.diff(v) <= 0)
    d = np.diff(v) / np.diff(t)
    assert np.max(np.abs(np.diff(d))) < 1e-2


def test_potential_csv(tmp_path):
    P = make_bessel_potential(0.99, 1)
    P.to_csv(tmp_path / "v.csv")
    rows = list(csv.reader(open(tmp_path / "v.csv")))
    assert rows[0] == ["kx", "ky", "kz", "vhat"]
    assert len(rows) == 1 + mode_set(2).size


def test_single_mode_gives_zero(P):
    u = FourierState.single_mode(4, (1, 2, 0), 0.7 - 0.2j)
    for w in ("full", "low", "high", "tiny"):
        assert np.max(np.abs(multilinear_apply(u, u, u, w, P).coeffs)) <= 1e-15


def test_two_mode_hand_expansion():
    beta = 0.7
    P = make_bessel_potential(beta, 4)
    ms = mode_set(4)
    c = np.zeros(ms.size, complex)
    c[ms.position((1, 0, 0))] = 1
    c[ms.position((0, 0, 0))] = 1
    u = FourierState(ms, c)
    out = multilinear_apply(u, u, u, "full", P)
    assert out.get((2, 0, 0)) == pytest.approx(2 ** (-beta / 2), abs=1e-12)


def test_low_plus_high_is_full(P, rng):
    u, v, w = (FourierState(mode_set(4), rand(rng, 4)) for _ in range(3))
    full = multilinear_apply(u, v, w, "full", P).coeffs
    split = multilinear_apply(u, v, w, "low", P).coeffs + multilinear_apply(u, v, w, "high", P).coeffs
    assert np.max(np.abs(full - split)) <= 1e-12 * max(1, np.max(np.abs(full)))


@pytest.mark.parametrize("window", ["full", "low", "high", "tiny"])
@pytest.mark.parametrize("phased,s", [(False, 0.0), (True, 0.37)])
def test_fft_matches_direct_sum(P, rng, window, phased, s):
    params = ParamSet()
    u, v, w = rand(rng, 2), rand(rng, 2), rand(rng, 2)
    weight = lambda m: P.vhat(m) * window_weight(window, np.sqrt(np.sum(m * m, axis=-1)), 2, params)
    ref = multilinear_direct(u, v, w, weight, 2, s, phased)
    got = multilinear_array(u, v, w, window, P, 2, s, phased)
    assert np.max(np.abs(got - ref)) <= 1e-12 * np.max(np.abs(ref))


def test_delta_output_projection(P, rng):
    u = rand(rng, 4)
    out = multilinear_array(u, u, u, "full", P, 4, output="delta")
    assert np.all(out[~mode_set(4).mask(4, "delta")] == 0)


def test_mismatched_mode_sets(P):
    with pytest.raises(ValueError):
        multilinear_apply(FourierState.zeros(2), FourierState.zeros(4), FourierState.zeros(2),
                          "full", P)


def test_tiny_equals_low_when_windows_coincide(P, rng):
    params = ParamSet(epsilon=1 - 0.002, delta=0.002)
    u = rand(rng, 4)
    a = multilinear_array(u, u, u, "tiny", P, 4, params=params)
    b = multilinear_array(u, u, u, "low", P, 4, params=params)
    assert np.array_equal(a, b)


def test_gauge_covariance(P, rng):
    u = rand(rng, 4)
    c = np.exp(0.83j)
    a = multilinear_array(c * u, c * u, c * u, "full", P, 4)
    b = c * abs(c) ** 2 * multilinear_array(u, u, u, "full", P, 4)
    assert np.max(np.abs(a - b)) <= 1e-12 * np.max(np.abs(b))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_quadratic_form_real(seed):
    P = make_bessel_potential(0.99, 4)
    u = rand(np.random.default_rng(seed), 4)
    s = np.vdot(u, multilinear_array(u, u, u, "full", P, 4))
    assert abs(s.imag) <= 1e-12 * np.sum(np.abs(u) ** 2) ** 2


def test_reality_of_hartree_potential(P, rng):
    u = FourierState(mode_set(4), rand(rng, 4))
    assert reality_defect(u, P) <= 1e-12 * u.mass()


def test_hartree_zero_and_single_mode(P):
    R = renorm_constants(4, P)
    assert np.all(hartree_vector_field(FourierState.zeros(4), P, R).coeffs == 0)
    c, k0 = 0.6 + 0.3j, (1, -1, 0)
    u = FourierState.single_mode(4, k0, c)
    out = hartree_vector_field(u, P, R)
    j = mode_set(4).position(k0)
    expected = (abs(c) ** 2 - R.sigma - R.c_multiplier[j]) * c
    assert out.coeffs[j] == pytest.approx(expected, abs=1e-12)
    assert np.max(np.abs(np.delete(out.coeffs, j))) <= 1e-12


def test_hartree_matches_term_assembly(P, rng):
    """M(u,u,u) plus the diagonal terms assembled by direct sums."""
    N = 2
    R = renorm_constants(N, P)
    ms = mode_set(N)
    u = rand(rng, N)
    a2 = np.abs(u) ** 2
    cross = np.array([np.sum(P.vhat(k - ms.modes) * a2) for k in ms.modes])
    full = (multilinear_direct(u, u, u, P.vhat, N) + u * np.sum(a2) + u * cross - a2 * u)
    expected = full - R.sigma * u - R.c_multiplier * u
    got = hartree_vector_field(FourierState(ms, u), P, R).coeffs
    assert np.max(np.abs(got - expected)) <= 1e-12 * np.max(np.abs(expected))


def test_zero_potential_stub():
    P0 = Potential.zero()
    assert P0.vhat((0, 0, 0)) == 0.0
