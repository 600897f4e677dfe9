"""Counterterms, Hamiltonian, renormalized potential energy and exact Gaussian moments.

Conventions: {e^{ik.x}} is orthonormal on the torus, so integrals of products
are Parseval sums without volume factors, and the Gaussian reference measure
has E u_k conj(u_l) = delta_kl / <k>^2, E u_k u_l = 0.

The multiplier term enters the Hamiltonian as -int C_N u conj(u), i.e. with the
coefficient that makes the truncated flow (i u_t + Lap u = Pi_N[(|u|^2*V)u]
- sigma_N u - C_N u) Hamiltonian. The Wick-ordered density carries -2 C_N u
conj(u) accordingly, so that int :|u|^2 (V*|u|^2): = 2 (H_pot - const).
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .lattice import FourierState, check_dyadic, mode_set
from .params import DEFAULT_PARAMS, ParamSet, ParameterError  # noqa: F401  (re-export)
from .potential import Potential, convolve_potential
from .spectral import spectral_grid


@dataclass(frozen=True, eq=False)
class RenormConstants:
    N: int
    sigma: float
    c_multiplier: np.ndarray
    gamma: float

    def to_json(self, beta: float | None = None) -> str:
        ms = mode_set(self.N)
        return json.dumps({
            "N": self.N,
            "beta": beta,
            "sigma": self.sigma,
            "gamma": self.gamma,
            "c_multiplier": [[[int(c) for c in k], float(v)]
                             for k, v in zip(ms.modes, self.c_multiplier)],
        })

    @classmethod
    def zero(cls, N: int) -> "RenormConstants":
        """Stub with every counterterm switched off."""
        return cls(N, 0.0, np.zeros(mode_set(N).size), 0.0)


def renorm_constants(N: int, P: Potential) -> RenormConstants:
    """sigma_N, the multiplier (C_N)_k on <k> <= N, and gamma_N by direct lattice sums."""
    key = ("renorm", check_dyadic(N))
    R = P._cache.get(key)
    if R is None:
        R = _renorm_constants(N, P)
        P._cache[key] = R
    return R


def _renorm_constants(N: int, P: Potential) -> RenormConstants:
    ms = mode_set(N)
    w = 1.0 / (1.0 + ms.norm2)
    sigma = float(np.sum(w))
    c = np.zeros(ms.size)
    for start in range(0, ms.size, 512):
        rows = ms.modes[start:start + 512]
        vk = P.vhat(rows[:, None, :] - ms.modes[None, :, :])
        c[start:start + 512] = vk @ w
    c.setflags(write=False)
    gamma = float(np.dot(c, w))
    return RenormConstants(N, sigma, c, gamma)


def _coeffs(u) -> np.ndarray:
    return u.coeffs if isinstance(u, FourierState) else np.asarray(u)


def _check_scale(u, R: RenormConstants) -> None:
    if isinstance(u, FourierState) and u.mode_set.N != R.N:
        raise ValueError(f"state on scale {u.mode_set.N} but constants on scale {R.N}")


def quartic_energy(u, P: Potential, N: int) -> np.ndarray | float:
    """int |u|^2 (V * |u|^2) = sum_m V_m |p_m|^2 with p = coefficients of |u|^2."""
    g = spectral_grid(N)
    key = ("vgrid", N)
    vg = P._cache.get(key)
    if vg is None:
        vg = P.vhat(g.freqs)
        P._cache[key] = vg
    p = g.fft(np.abs(g.to_physical(_coeffs(u))) ** 2)
    out = np.sum(vg * np.abs(p) ** 2, axis=(-3, -2, -1))
    return float(out) if np.ndim(out) == 0 else out


def mass(u):
    out = np.sum(np.abs(_coeffs(u)) ** 2, axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def kinetic_energy(u, N: int):
    out = np.abs(_coeffs(u)) ** 2 @ mode_set(N).norm2.astype(float)
    return float(out) if np.ndim(out) == 0 else out


def potential_energy(u, R: RenormConstants, P: Potential):
    """H_N^pot = int (1/2 |u|^2 (V*|u|^2) - sigma |u|^2 - C u conj(u)) + sigma^2/2 - gamma/2."""
    _check_scale(u, R)
    c = _coeffs(u)
    a2 = np.abs(c) ** 2
    out = (0.5 * quartic_energy(c, P, R.N) - R.sigma * np.sum(a2, axis=-1)
           - a2 @ R.c_multiplier + 0.5 * R.sigma ** 2 - 0.5 * R.gamma)
    return float(out) if np.ndim(out) == 0 else out


def hamiltonian(u, R: RenormConstants, P: Potential):
    """H_N = int |grad u|^2 + H_N^pot."""
    _check_scale(u, R)
    return kinetic_energy(u, R.N) + potential_energy(u, R, P)


@dataclass(frozen=True)
class WickDensity:
    samples: np.ndarray
    integral: float


def wick_nonlinearity(u, R: RenormConstants, P: Potential) -> WickDensity:
    """Grid samples and integral of the Wick-ordered quartic density.

    :|u|^2 (V*|u|^2): = |u|^2 (V*|u|^2) - sigma (V*|u|^2) - sigma |u|^2 - 2 (C u) conj(u)
                        + sigma^2 - gamma
    """
    _check_scale(u, R)
    c = _coeffs(u)
    g = spectral_grid(R.N)
    U = g.to_physical(c)
    rho = np.abs(U) ** 2
    conv = g.ifft(g.fft(rho) * P.vhat(g.freqs)).real
    CU = g.to_physical(R.c_multiplier * c)
    samples = (rho * conv - R.sigma * conv - R.sigma * rho - 2.0 * CU * np.conj(U)
               + R.sigma ** 2 - R.gamma)
    return WickDensity(samples, float(np.mean(samples).real))


def gauge_constant(g, N: int) -> float:
    """B_N = sum_{<l> <= N} (|g_l|^2 - 1) / <l>^2 for a draw or an array over ModeSet(N)."""
    ms = mode_set(check_dyadic(N))
    gk = g.on(N) if hasattr(g, "on") else np.asarray(g)
    if gk.shape[-1] != ms.size:
        raise ValueError("draw does not cover the mode set")
    return float(np.sum((np.abs(gk) ** 2 - 1.0) / (1.0 + ms.norm2)))


@dataclass(frozen=True)
class GaussianMoments:
    N: int
    mass: float
    multiplier_term: float
    quartic: float
    potential_energy: float

    def as_dict(self) -> dict:
        return dict(N=self.N, mass=self.mass, multiplier_term=self.multiplier_term,
                    quartic=self.quartic, potential_energy=self.potential_energy)


def gaussian_expectation_oracle(N: int, P: Potential) -> GaussianMoments:
    """Exact expectations under rho_N by enumerating Wick pairings over the lattice.

    Every sum is formed directly from E u_k conj(u_l) = delta_kl <k>^-2 and
    does not reuse the counterterm routines.
    """
    ms = mode_set(check_dyadic(N))
    modes = ms.modes
    cov = 1.0 / (1.0 + np.sum(modes ** 2, axis=1))
    e_mass = float(np.sum(cov))
    # int (C u) conj(u) = sum_{k,l} V_{k-l} <l>^-2 u_k conj(u_k): one pairing (k, k).
    # int |u|^2 (V*|u|^2) = sum_{k1-k2+k3-k4=0} V_{k1-k2} u1 conj(u2) u3 conj(u4):
    #   pairing (1,2)(3,4) forces k1=k2, k3=k4 -> V_0 (sum cov)^2
    #   pairing (1,4)(3,2) forces k1=k4, k3=k2 -> sum_{k1,k3} V_{k1-k3} cov1 cov3
    # both reduce to the same double sum over (k, l)
    pair_sum = 0.0
    for start in range(0, ms.size, 512):
        blk = modes[start:start + 512]
        vk = P.vhat(blk[:, None, :] - modes[None, :, :])
        pair_sum += float(np.sum(vk * cov[start:start + 512, None] * cov[None, :]))
    e_mult = cross = pair_sum
    v0 = float(P.vhat(np.zeros(3, dtype=np.int64)))
    e_quartic = v0 * e_mass ** 2 + cross
    sigma, gamma = e_mass, e_mult
    e_pot = 0.5 * e_quartic - sigma * e_mass - e_mult + 0.5 * sigma ** 2 - 0.5 * gamma
    return GaussianMoments(N, e_mass, e_mult, e_quartic, e_pot)


def multiplier_term(u, R: RenormConstants):
    """int (C_N u) conj(u) = sum_k (C_N)_k |u_k|^2."""
    out = np.abs(_coeffs(u)) ** 2 @ R.c_multiplier
    return float(out) if np.ndim(out) == 0 else out


def sigma_conv_term(u, P: Potential, N: int):
    """int (V * |u|^2), evaluated on the grid (equals int |u|^2 since V_0 = 1)."""
    g = spectral_grid(N)
    rho = np.abs(g.to_physical(_coeffs(u))) ** 2
    conv = g.ifft(g.fft(rho) * P.vhat(g.freqs)).real
    out = np.mean(conv, axis=(-3, -2, -1))
    return float(out) if np.ndim(out) == 0 else out


__all__ = [
    "RenormConstants", "renorm_constants", "ParamSet", "DEFAULT_PARAMS", "hamiltonian",
    "potential_energy", "kinetic_energy", "quartic_energy", "mass", "wick_nonlinearity",
    "gauge_constant", "gaussian_expectation_oracle", "GaussianMoments", "multiplier_term",
    "convolve_potential",
]
