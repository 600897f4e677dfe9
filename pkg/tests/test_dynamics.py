import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hartreelab.dynamics import (
    Trajectory, build_profiles, conservation_report, dyadic_difference, evolve, evolve_array,
    from_profile, integral_equation_residual, integral_equation_rhs, to_profile,
)
from hartreelab.lattice import FourierState, mode_set
from hartreelab.potential import Potential, make_bessel_potential
from hartreelab.renorm import RenormConstants, renorm_constants
from hartreelab.sampling import GaussianDraw, draw_gff

P0 = Potential.zero()


def test_linear_stub_flow():
    u0 = draw_gff(4, 3)
    R0 = RenormConstants.zero(4)
    exact = np.exp(-1j * 0.5 * mode_set(4).norm2) * u0.coeffs
    for method, tol in (("rk4", 1e-8), ("strang", 1e-12)):
        tr = evolve(u0, 0.5, 1e-3, R0, P0, method)
        assert np.max(np.abs(tr.final().coeffs - exact)) <= tol
    rep = conservation_report(evolve(u0, 0.5, 1e-3, R0, P0, "strang"), R0, P0)
    assert rep.mass_drift <= 1e-12 and rep.hamiltonian_drift <= 1e-12
    R2 = RenormConstants.zero(2)
    rep = conservation_report(evolve(draw_gff(2, 3), 0.5, 1e-3, R2, P0), R2, P0)
    assert rep.mass_drift <= 1e-12 and rep.hamiltonian_drift <= 1e-12


def test_single_zero_mode_closed_form(P):
    R = renorm_constants(2, P)
    c = 0.8 + 0.5j
    j = mode_set(2).position((0, 0, 0))
    rate = abs(c) ** 2 - R.sigma - R.c_multiplier[j]
    u0 = FourierState.single_mode(2, (0, 0, 0), c)
    errs = []
    for dt in (0.004, 0.002):
        fin = evolve(u0, 1.0, dt, R, P).final()
        errs.append(abs(fin.get((0, 0, 0)) - c * np.exp(-1j * rate)))
        assert abs(abs(fin.get((0, 0, 0))) - abs(c)) < 1e-6
    assert 12 < errs[0] / errs[1] < 20


def test_rk4_richardson_order(P):
    R = renorm_constants(2, P)
    u0 = draw_gff(2, 8).coeffs
    ref = evolve_array(u0, 0.5, 0.025 / 4, R, P, frames="end")
    e = [np.max(np.abs(evolve_array(u0, 0.5, dt, R, P, frames="end") - ref))
         for dt in (0.05, 0.025)]
    assert 12 < e[0] / e[1] < 20


def test_conservation_short_run_and_order(P):
    R = renorm_constants(2, P)
    u0 = draw_gff(2, 4)
    rep = conservation_report(evolve(u0, 0.25, 1e-3, R, P), R, P)
    assert rep.mass_drift <= 1e-6 and rep.hamiltonian_drift <= 1e-5
    d = [conservation_report(evolve(u0, 0.4, dt, R, P), R, P).mass_drift for dt in (0.04, 0.02)]
    assert d[0] / d[1] > 10


@settings(max_examples=10, deadline=None)
@given(st.floats(0, 2 * np.pi))
def test_phase_equivariance(theta):
    P = make_bessel_potential(0.99, 2)
    R = renorm_constants(2, P)
    u0 = draw_gff(2, 1)
    rot = FourierState(u0.mode_set, np.exp(1j * theta) * u0.coeffs)
    a = evolve(rot, 0.1, 0.01, R, P).frames
    b = np.exp(1j * theta) * evolve(u0, 0.1, 0.01, R, P).frames
    assert np.max(np.abs(a - b)) <= 1e-12


def test_evolve_errors(P):
    R = renorm_constants(2, P)
    with pytest.raises(ValueError):
        evolve(draw_gff(2, 1), 1.0, 0.0, R, P)
    with pytest.raises(ValueError):
        evolve(draw_gff(4, 1), 1.0, 0.1, R, P)
    with pytest.raises(ValueError):
        evolve(draw_gff(2, 1), 1.0, 0.1, R, P, method="euler")


def test_profile_transform():
    tr = evolve(draw_gff(4, 2), 0.2, 0.01, RenormConstants.zero(4), P0)
    v = to_profile(tr, 1.7)
    assert v.kind == "profile"
    assert np.array_equal(v.frames[0], tr.frames[0])
    assert np.allclose(np.abs(v.frames), np.abs(tr.frames), rtol=1e-14, atol=0)
    back = from_profile(v, 1.7)
    assert np.max(np.abs(back.frames - tr.frames)) <= 1e-14
    with pytest.raises(ValueError):
        to_profile(v, 0.0)


def test_linear_profile_is_constant():
    tr = evolve(draw_gff(4, 2), 0.2, 0.01, RenormConstants.zero(4), P0, method="strang")
    v = to_profile(tr, 0.0)
    assert np.max(np.abs(v.frames - v.frames[0])) <= 1e-13


def test_dyadic_difference(P):
    draw = GaussianDraw(31)
    hier = build_profiles(draw, 4, 0.1, 0.01, P)
    y = dyadic_difference(hier.profiles[4], hier.profiles[2])
    assert np.max(np.abs(y.frames[0] - draw.annulus_field(4).coeffs)) <= 1e-15
    assert np.max(np.abs((y + hier.profiles[2].lift(4)).frames - hier.profiles[4].frames)) <= 1e-15
    with pytest.raises(ValueError):
        dyadic_difference(hier.profiles[4], hier.profiles[1])
    other = build_profiles(draw, 2, 0.2, 0.01, P).profiles[2]
    with pytest.raises(ValueError):
        dyadic_difference(hier.profiles[4], other)


def test_residual_linear_stub():
    N = 4
    draw = GaussianDraw(5)
    prof = {L: to_profile(evolve(draw.field(L), 0.3, 0.01, RenormConstants.zero(L), P0, "strang"),
                          0.0)
            for L in (2, 4)}
    y = dyadic_difference(prof[4], prof[2])
    assert integral_equation_residual(y, prof[4], prof[2], RenormConstants.zero(N), P0) <= 1e-12


def test_residual_zero_at_t0_and_converges(P):
    draw = GaussianDraw(6)
    res = []
    for dt in (0.01, 0.005):
        hier = build_profiles(draw, 2, 0.3, dt, P)
        y, vN, vH = hier.y(2), hier.profiles[2], hier.profiles[1]
        rhs = integral_equation_rhs(y, vN, vH, P)
        assert np.max(np.abs(rhs[0] - y.frames[0])) == 0
        res.append(integral_equation_residual(y, vN, vH, None, P))
    assert res[0] / res[1] > 3


def test_residual_levels_match_collapsed(P):
    hier = build_profiles(GaussianDraw(2), 4, 0.1, 0.01, P)
    a = integral_equation_residual(hier.y(4), hier.profiles[4], hier.profiles[2], None, P)
    b = integral_equation_residual(hier.y(4), hier.profiles[4], hier.profiles[2], None, P,
                                   levels=hier.profiles)
    assert abs(a - b) <= 1e-12


def test_trajectory_io_and_subsample(tmp_path):
    tr = evolve(draw_gff(2, 2), 0.1, 0.01, RenormConstants.zero(2), P0)
    tr.dump(tmp_path / "t.bin")
    back = Trajectory.load(tmp_path / "t.bin")
    assert np.array_equal(back.frames, tr.frames) and back.dt == tr.dt and back.kind == tr.kind
    sub = tr.subsample(2)
    assert np.allclose(sub.times, tr.times[::2]) and sub.dt == 0.02
    with pytest.raises(ValueError):
        Trajectory(2, 0.0, 0.1, np.zeros((3, 5)))
