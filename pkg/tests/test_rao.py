import numpy as np
import pytest
from scipy.integrate import solve_ivp

from hartreelab.dynamics import build_profiles
from hartreelab.lattice import FourierState, mode_set
from hartreelab.potential import multilinear_array
from hartreelab.rao import (
    MAX_RAO_N, RAOMatrices, annulus_positions, apply_matrices, build_ansatz, build_H, build_M,
    dyadic_matrix_difference, identity_matrices, paraproduct_apply, propagate_H, propagate_M,
    remainder, unitarity_defect,
)
from hartreelab.sampling import GaussianDraw

T, DT = 0.1, 0.005


@pytest.fixture(scope="module")
def hier(P):
    return build_profiles(GaussianDraw(17), 4, T, DT, P)


@pytest.fixture(scope="module")
def mats(hier, P):
    return {1: build_H(4, 1, hier.profiles[1], P=P), 2: build_H(4, 2, hier.profiles[2], P=P),
            "xi": build_M(4, hier.profiles[2], hier.profiles[4], P=P)}


def annulus_data(N, seed):
    ms = mode_set(N)
    g = np.random.default_rng(seed).standard_normal((ms.size, 2)) @ [1, 1j]
    return FourierState(ms, np.where(ms.mask(N, "delta"), g, 0))


def test_identity_at_zero_and_unitary(mats):
    for X in mats.values():
        n = annulus_positions(4).size
        assert np.array_equal(X.mats[0], np.eye(n))
        assert X.times[1] == pytest.approx(DT)
        assert unitarity_defect(X) <= 1e-6


def test_propagator_against_ode_solver(hier, P):
    """Frozen-in-time profile: the generator still rotates through its phase."""
    v = hier.profiles[2]
    frozen = v.with_frames(np.broadcast_to(v.frames[3], v.frames.shape).copy())
    a = frozen.lift(4).frames[0]
    F = annulus_data(4, 5)

    def rhs(t, x):
        return -1j * multilinear_array(a, a, x, "low", P, 4, s=t, phased=True, output="delta")

    ref = solve_ivp(rhs, (0, T), F.coeffs.astype(complex), rtol=1e-11, atol=1e-13).y[:, -1]
    errs = []
    for dt in (2 * DT, DT):
        got = propagate_H(4, 2, frozen, F, dt=dt, P=P)
        assert got.times[-1] == pytest.approx(T)
        errs.append(np.max(np.abs(got.frames[-1] - ref)))
    assert errs[1] <= 1e-6 and errs[0] / errs[1] > 10


def test_zero_profile_gives_identity(hier, P):
    v = hier.profiles[2]
    X = build_H(4, 2, v.with_frames(np.zeros_like(v.frames)), P=P)
    assert np.all(X.mats == np.eye(X.size))


def test_h_depends_only_on_low_draw(P):
    class HighPerturbed(GaussianDraw):
        def on(self, N):
            g = super().on(N).copy()
            if N > 2:
                keep = np.zeros(g.size, bool)
                keep[mode_set(2).embed_positions(mode_set(N))] = True
                g[~keep] *= 1j
            return g

    a = build_profiles(GaussianDraw(3), 4, T, DT, P)
    b = build_profiles(HighPerturbed(3), 4, T, DT, P)
    assert not np.array_equal(a.profiles[4].frames, b.profiles[4].frames)
    Ha, Hb = (build_H(4, 2, h.profiles[2], P=P) for h in (a, b))
    assert np.array_equal(Ha.mats, Hb.mats)


def test_m_reduces_to_h_when_top_profile_is_lifted(hier, P):
    vHalf = hier.profiles[2]
    M = build_M(4, vHalf, vHalf.lift(4), P=P)
    H = build_H(4, 2, vHalf, P=P)
    assert np.max(np.abs(M.mats - H.mats)) <= 1e-13
    F = annulus_data(4, 1)
    rho = propagate_M(4, vHalf, vHalf.lift(4), F, P=P) - propagate_H(4, 2, vHalf, F, P=P)
    assert np.max(np.abs(rho.frames)) <= 1e-13


def test_telescoping_and_differences(mats):
    h1 = dyadic_matrix_difference(mats[1], None)
    h2 = dyadic_matrix_difference(mats[2], mats[1])
    I = identity_matrices(4, mats[1].times)
    assert np.max(np.abs(I.mats + h1.mats + h2.mats - mats[2].mats)) <= 1e-12
    assert np.all(h1.mats[0] == 0)
    with pytest.raises(ValueError):
        dyadic_matrix_difference(mats[2], identity_matrices(4, mats[1].times[:3]))


def test_apply_matrices(mats):
    F = annulus_data(4, 2)
    const = apply_matrices(identity_matrices(4, mats[2].times), F)
    assert np.all(const.frames == F.coeffs)
    psi = apply_matrices(mats[2], F)
    norms = np.linalg.norm(psi.frames, axis=1)
    assert np.max(np.abs(norms - np.linalg.norm(F.coeffs))) <= 1e-6
    with pytest.raises(ValueError):
        apply_matrices(mats[2], FourierState.single_mode(4, (0, 0, 0), 1.0))


def test_vector_matches_dense(hier, mats, P):
    F = annulus_data(4, 3)
    a = propagate_H(4, 2, hier.profiles[2], F, P=P)
    b = apply_matrices(mats[2], F)
    assert np.max(np.abs(a.frames - b.frames)) <= 1e-12
    c = propagate_M(4, hier.profiles[2], hier.profiles[4], F, P=P)
    assert np.max(np.abs(c.frames - apply_matrices(mats["xi"], F).frames)) <= 1e-12


def test_scale_limits(hier, P):
    assert MAX_RAO_N == 8
    with pytest.raises(ValueError):
        build_H(16, 2, hier.profiles[2], P=P)
    with pytest.raises(ValueError):
        build_H(4, 4, hier.profiles[4], P=P)
    with pytest.raises(ValueError):
        build_H(4, 2, hier.profiles[2], dt=0.007, P=P)
    with pytest.raises(ValueError):
        build_H(4, 2, hier.profiles[2])


def test_dump_load(mats, tmp_path):
    mats[2].dump(tmp_path / "h.bin")
    back = RAOMatrices.load(tmp_path / "h.bin")
    assert back.N == 4 and back.label == 2
    assert np.array_equal(back.mats, mats[2].mats) and np.array_equal(back.times, mats[2].times)


def test_ansatz_identities(hier, P):
    b = build_ansatz(hier, 4, P)
    d = b.identity_defects()
    assert d["xi_psi_rho"] <= 1e-12 and d["z_y_xi"] <= 1e-12
    assert np.max(np.abs(b.z.frames[0])) <= 1e-15
    assert np.max(np.abs(b.rho.frames[0])) == 0
    ms = mode_set(4)
    outside = ~ms.mask(4, "delta")
    for L, zeta in b.zeta.items():
        assert np.all(zeta.frames[:, outside] == 0)
        assert np.all(zeta.frames[0] == 0)
    total = b.F.coeffs + sum(z.frames for z in b.zeta.values())
    assert np.max(np.abs(total - b.psi.frames)) <= 1e-12
    vec = build_ansatz(hier, 4, P, dense=False)
    assert np.max(np.abs(vec.xi.frames - b.xi.frames)) <= 1e-12


def test_remainder_grid_check(hier, P):
    b = build_ansatz(hier, 4, P)
    with pytest.raises(ValueError):
        remainder(hier.y(4), b.xi)


def test_paraproduct(hier, P):
    y1, y2 = hier.y(1).subsample(2), hier.y(2).subsample(2)
    z = hier.y(4).subsample(2)
    zero = paraproduct_apply(y1, y2, z.with_frames(np.zeros_like(z.frames)), 4, P)
    assert np.all(zero.frames == 0)
    Lz = paraproduct_apply(y1, y2, z, 4, P)
    assert np.all(Lz.frames[0] == 0)
    two = paraproduct_apply(y1, y2, z.with_frames(2j * z.frames), 4, P)
    assert np.max(np.abs(two.frames - 2j * Lz.frames)) <= 1e-13 * max(1, np.max(np.abs(Lz.frames)))
