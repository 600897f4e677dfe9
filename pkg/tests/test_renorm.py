import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hartreelab.lattice import FourierState, mode_set
from hartreelab.potential import make_bessel_potential
from hartreelab.renorm import (
    RenormConstants, gauge_constant, gaussian_expectation_oracle, hamiltonian, kinetic_energy,
    mass, potential_energy, renorm_constants, sigma_conv_term, wick_nonlinearity,
)
from hartreelab.sampling import GaussianDraw, draw_gff


def rand_state(rng, N):
    n = mode_set(N).size
    return FourierState(mode_set(N), rng.standard_normal(n) + 1j * rng.standard_normal(n))


def test_constants_small_scales():
    P = make_bessel_potential(0.7, 4)
    R1 = renorm_constants(1, P)
    assert R1.sigma == 1 and R1.gamma == 1
    assert np.allclose(R1.c_multiplier, P.vhat(mode_set(1).modes))
    assert renorm_constants(2, P).sigma == 10
    R0 = renorm_constants(0, P)
    assert R0.sigma == 0 and R0.gamma == 0 and R0.c_multiplier.size == 0


@pytest.mark.parametrize("N", [1, 2, 4])
def test_sigma_rational(N):
    exact = sum(Fraction(1, 1 + int(n)) for n in mode_set(N).norm2)
    assert renorm_constants(N, make_bessel_potential(0.99, 4)).sigma == pytest.approx(
        float(exact), rel=1e-15)


def test_multiplier_and_gamma_by_definition():
    P = make_bessel_potential(0.99, 4)
    R = renorm_constants(4, P)
    ms = mode_set(4)
    w = 1 / (1 + ms.norm2)
    c = np.array([np.sum(P.vhat(k - ms.modes) * w) for k in ms.modes])
    assert np.allclose(R.c_multiplier, c, rtol=1e-13)
    assert R.gamma == pytest.approx(np.sum(c * w), rel=1e-13)


def test_monotone_and_crude_bound():
    P = make_bessel_potential(0.99, 8)
    Rs = [renorm_constants(N, P) for N in (1, 2, 4, 8)]
    assert all(a.sigma < b.sigma and a.gamma < b.gamma for a, b in zip(Rs, Rs[1:]))
    for a, b in zip(Rs, Rs[1:]):
        pos = mode_set(a.N).embed_positions(mode_set(b.N))
        assert np.all(b.c_multiplier[pos] >= a.c_multiplier)
    assert all(np.all(R.c_multiplier <= R.sigma) for R in Rs)


def test_hamiltonian_constants_only(P):
    R = renorm_constants(2, P)
    zero = FourierState.zeros(2)
    const = 0.5 * R.sigma ** 2 - 0.5 * R.gamma
    assert hamiltonian(zero, R, P) == pytest.approx(const)
    assert potential_energy(zero, R, P) == pytest.approx(const)
    assert wick_nonlinearity(zero, R, P).integral == pytest.approx(R.sigma ** 2 - R.gamma)


def test_hamiltonian_single_zero_mode(P):
    R = renorm_constants(4, P)
    c = 1.3 - 0.4j
    u = FourierState.single_mode(4, (0, 0, 0), c)
    a = abs(c) ** 2
    j = mode_set(4).position((0, 0, 0))
    expected = 0.5 * a ** 2 - R.sigma * a - R.c_multiplier[j] * a + 0.5 * R.sigma ** 2 - 0.5 * R.gamma
    assert hamiltonian(u, R, P) == pytest.approx(expected, rel=1e-13)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.floats(0, 2 * np.pi))
def test_hamiltonian_phase_invariant(seed, theta):
    P = make_bessel_potential(0.99, 4)
    R = renorm_constants(4, P)
    u = rand_state(np.random.default_rng(seed), 4)
    v = FourierState(u.mode_set, np.exp(1j * theta) * u.coeffs)
    assert hamiltonian(v, R, P) == pytest.approx(hamiltonian(u, R, P), rel=1e-12, abs=1e-9)


def test_energy_split_and_wick_identities(P, rng):
    R = renorm_constants(4, P)
    for _ in range(5):
        u = rand_state(rng, 4)
        kin = np.sum(mode_set(4).norm2 * np.abs(u.coeffs) ** 2)
        H, Hp = hamiltonian(u, R, P), potential_energy(u, R, P)
        assert H - Hp == pytest.approx(kin, rel=1e-10)
        assert kinetic_energy(u, 4) == pytest.approx(kin, rel=1e-14)
        wick = wick_nonlinearity(u, R, P).integral
        assert Hp == pytest.approx(0.5 * wick, rel=1e-10)
        assert wick == pytest.approx(2 * (Hp - 0.5 * R.sigma ** 2 + 0.5 * R.gamma)
                                     + R.sigma ** 2 - R.gamma, rel=1e-10)
        assert sigma_conv_term(u, P, 4) == pytest.approx(mass(u), rel=1e-12)


def test_scale_mismatch_rejected(P):
    with pytest.raises(ValueError):
        hamiltonian(FourierState.zeros(2), renorm_constants(4, P), P)


def test_gauge_constant_examples():
    assert gauge_constant(np.exp(1j * np.arange(27)), 2) == pytest.approx(0, abs=1e-14)
    assert gauge_constant(np.array([np.sqrt(2)]), 1) == pytest.approx(1.0)
    draw = GaussianDraw(77)
    f = draw.field(4)
    R = renorm_constants(4, make_bessel_potential(0.99, 4))
    assert gauge_constant(draw, 4) == pytest.approx(f.mass() - R.sigma, rel=1e-13, abs=1e-12)


@pytest.mark.parametrize("N", [1, 2, 4])
def test_oracle_values(N, P):
    R = renorm_constants(N, P)
    m = gaussian_expectation_oracle(N, P)
    assert m.mass == pytest.approx(R.sigma, rel=1e-13)
    assert m.multiplier_term == pytest.approx(R.gamma, rel=1e-13)
    assert m.quartic == pytest.approx(R.sigma ** 2 + R.gamma, rel=1e-13)


def test_oracle_quartic_by_pairing_enumeration():
    """Two-pairing value against a literal sum over k1-k2+k3-k4=0 at N=2."""
    P = make_bessel_potential(0.8, 2)
    ms = mode_set(2)
    cov = 1 / (1 + ms.norm2)
    total = 0.0
    for i1, k1 in enumerate(ms.modes):
        for i3, k3 in enumerate(ms.modes):
            # pairing (1,2)(3,4): k2=k1, k4=k3; pairing (1,4)(3,2): k4=k1, k2=k3
            total += P.vhat(np.zeros(3, int)) * cov[i1] * cov[i3]
            total += P.vhat(k1 - k3) * cov[i1] * cov[i3]
    assert gaussian_expectation_oracle(2, P).quartic == pytest.approx(total, rel=1e-13)


def test_json_export(P):
    R = renorm_constants(2, P)
    d = json.loads(R.to_json(beta=0.99))
    assert d["N"] == 2 and d["sigma"] == 10 and len(d["c_multiplier"]) == 27


def test_zero_stub():
    R = RenormConstants.zero(2)
    assert R.sigma == 0 and not np.any(R.c_multiplier)


def test_potential_energy_batched(P, rng):
    R = renorm_constants(2, P)
    x = np.stack([draw_gff(2, s).coeffs for s in range(4)])
    batch = potential_energy(x, R, P)
    single = [potential_energy(FourierState(mode_set(2), r), R, P) for r in x]
    assert np.allclose(batch, single, rtol=1e-13)
