"""Sobolev norms, time-Fourier space-time norms on grids, and scaling fits.

The space-time norms use the convention  u^(lambda) = int u(t) e^{-i lambda t} dt.
A trajectory is read on J = [0, 2 tau] (centre tau), extended by its end values
outside J, multiplied by chi_tau(t) = eta(|t - tau| / tau) and transformed. The
infimum over all extensions is not computable, so every value here is an
upper-bound surrogate for the localized norm.
"""
from __future__ import annotations

import csv
from dataclasses import asdict, dataclass

import numpy as np
from scipy import stats
from scipy.special import logsumexp

from .lattice import FourierState, mode_set
from .params import DEFAULT_PARAMS, ParamSet
from .potential import ETA, CutoffProfile

NORM_KINDS = ("H^s", "X^c", "Y^c", "Z^c", "LinfL2")


@dataclass(frozen=True)
class NormReport:
    label: str
    N: int
    kind: str
    s_or_c: float
    value: float
    L: int | None = None
    seed: int | None = None

    def __post_init__(self):
        if self.kind not in NORM_KINDS:
            raise ValueError(f"unknown norm kind {self.kind!r}")
        if not self.value >= 0:
            raise ValueError("norm values are nonnegative")


CSV_FIELDS = ("label", "N", "L", "kind", "s_or_c", "value", "seed")


def write_norm_reports(path, reports) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_FIELDS)
        w.writeheader()
        for r in reports:
            w.writerow({k: ("" if v is None else v) for k, v in asdict(r).items()})


# ---------------------------------------------------------------- Sobolev

def sobolev_norm(u, s: float, N: int | None = None):
    """(sum_k <k>^{2s} |u_k|^2)^{1/2}; arrays (..., n) need the scale N."""
    if isinstance(u, FourierState):
        c, ms = u.coeffs, u.mode_set
    else:
        if N is None:
            raise ValueError("array input needs its scale N")
        c, ms = np.asarray(u), mode_set(N)
    out = np.sqrt(np.abs(c) ** 2 @ (1.0 + ms.norm2.astype(float)) ** s)
    return float(out) if np.ndim(out) == 0 else out


def expected_sobolev_sq(N: int, s: float) -> float:
    """E ||F_N||_{H^s}^2 = sum over N/2 < <k> <= N of <k>^{2s-2}."""
    ms = mode_set(N)
    b2 = 1.0 + ms.norm2[ms.mask(N, "delta")].astype(float)
    return float(np.sum(b2 ** (s - 1.0)))


def linf_l2(frames) -> float:
    return float(np.max(np.sqrt(np.sum(np.abs(frames) ** 2, axis=-1))))


# ---------------------------------------------------------------- time transforms

def _next_pow2(n: int) -> int:
    return 1 << (int(n) - 1).bit_length()


def _windowed_samples(frames: np.ndarray, h: float, tau: float, window: CutoffProfile):
    """chi_tau * (constant extension) sampled with step h on [-tau, 3 tau]."""
    n_tau = int(round(tau / h))
    if n_tau < 1 or abs(n_tau * h - tau) > 1e-9 * tau:
        raise ValueError("tau must be a positive multiple of the frame spacing")
    if frames.shape[0] < 2 * n_tau + 1:
        raise ValueError("trajectory does not cover [0, 2 tau]")
    idx = np.clip(np.arange(-n_tau, 3 * n_tau + 1), 0, 2 * n_tau)
    t = h * np.arange(-n_tau, 3 * n_tau + 1)
    chi = window(np.abs(t - tau) / tau)
    return frames[idx], chi, t


def _lambda_grid(n_fft: int, h: float) -> np.ndarray:
    return 2 * np.pi * np.fft.fftfreq(n_fft, h)


def _padding(n_samples: int, oversample: int) -> int:
    return _next_pow2(max(oversample, 8) * n_samples)


def xc_norm(traj, c: float, window: CutoffProfile = ETA, tau: float = 0.1,
            oversample: int = 8) -> float:
    """Surrogate X^c norm of a trajectory on J = [0, 2 tau]."""
    frames = np.asarray(traj.frames)
    if frames.shape[0] < 4:
        raise ValueError("need at least 4 frames")
    h = 0.5 * traj.dt
    g, chi, _ = _windowed_samples(frames, h, tau, window)
    n_fft = _padding(g.shape[0], oversample)
    lam = _lambda_grid(n_fft, h)
    weight = (1.0 + lam ** 2) ** c
    total = 0.0
    for start in range(0, g.shape[1], 256):
        block = g[:, start:start + 256] * chi[:, None]
        uh = h * np.fft.fft(block, n=n_fft, axis=0)
        total += float(weight @ np.sum(np.abs(uh) ** 2, axis=1))
    dlam = 2 * np.pi / (n_fft * h)
    return float(np.sqrt(total * dlam))


def window_norm_oracle(c: float, window: CutoffProfile = ETA, tau: float = 0.1,
                       n_t: int = 2001, lam_max: float | None = None, n_lam: int = 20001) -> float:
    """||<lambda>^c chi_tau^(lambda)||_{L^2} by dense quadrature in t and lambda."""
    t = np.linspace(-tau, 3 * tau, n_t)
    w = np.full(n_t, t[1] - t[0])
    w[[0, -1]] *= 0.5
    chi = window(np.abs(t - tau) / tau) * w
    lam_max = lam_max or 400.0 / tau
    lam = np.linspace(-lam_max, lam_max, n_lam)
    total = 0.0
    for start in range(0, n_lam, 2000):
        l = lam[start:start + 2000]
        ft = np.exp(-1j * np.outer(l, t)) @ chi
        total += np.sum((1.0 + l ** 2) ** c * np.abs(ft) ** 2)
    return float(np.sqrt(total * (lam[1] - lam[0])))


def matrix_norms(mats, c: float, kind: str, window: CutoffProfile = ETA, tau: float = 0.1,
                 oversample: int = 8, lam_chunk: int = 64) -> float:
    """Surrogate Y^c (operator norm per lambda) or Z^c (Frobenius) of matrix samples."""
    if kind not in ("Y", "Z"):
        raise ValueError("kind must be 'Y' or 'Z'")
    X = np.asarray(mats.mats)
    if X.shape[0] < 4:
        raise ValueError("need at least 4 frames")
    h = float(mats.times[1] - mats.times[0])
    g, chi, t = _windowed_samples(X, h, tau, window)
    n_fft = _padding(g.shape[0], oversample)
    lam = _lambda_grid(n_fft, h)
    gw = (g * chi[:, None, None]).reshape(g.shape[0], -1)
    tt = t - t[0]
    vals = np.empty(n_fft)
    for start in range(0, n_fft, lam_chunk):
        l = lam[start:start + lam_chunk]
        kern = h * np.exp(-1j * np.outer(l, tt))
        block = (kern @ gw).reshape(-1, X.shape[1], X.shape[2])
        if kind == "Z":
            vals[start:start + l.size] = np.sum(np.abs(block) ** 2, axis=(1, 2))
        else:
            vals[start:start + l.size] = np.linalg.norm(block, ord=2, axis=(1, 2)) ** 2
    dlam = 2 * np.pi / (n_fft * h)
    return float(np.sqrt(np.sum((1.0 + lam ** 2) ** c * vals) * dlam))


def log_weighted_frobenius(mats, L: int, params: ParamSet = DEFAULT_PARAMS) -> np.ndarray:
    """log of ||(1 + |k-k'| / min(L, N^{1-delta}))^kappa h_kk'(t)||_F per stored time.

    The weight overflows any float format at kappa ~ 10^3, so only logs are formed.
    """
    ms = mode_set(mats.N)
    ann = mats.annulus
    k = ms.modes[ann]
    dist = np.sqrt(np.sum((k[:, None, :] - k[None, :, :]) ** 2, axis=-1))
    scale = min(float(L), float(mats.N) ** (1.0 - params.delta))
    logw = 2.0 * params.kappa * np.log1p(dist / scale)
    out = np.empty(len(mats.mats))
    for j, X in enumerate(mats.mats):
        a2 = np.abs(X) ** 2
        nz = a2 > 0
        out[j] = 0.5 * logsumexp(logw[nz] + np.log(a2[nz])) if nz.any() else -np.inf
    return out


# ---------------------------------------------------------------- fits

@dataclass(frozen=True)
class ExponentFit:
    slope: float
    intercept: float
    stderr: float
    band: tuple
    n: int

    def contains(self, value: float) -> bool:
        return self.band[0] <= value <= self.band[1]


def exponent_fit(points, confidence: float = 0.95) -> ExponentFit:
    """Least-squares slope of log(value) against log(scale) with a t-band."""
    pts = np.asarray(list(points), dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("points must be (scale, value) pairs")
    if np.unique(pts[:, 0]).size < 3:
        raise ValueError("need at least 3 distinct scales")
    if np.any(pts <= 0):
        raise ValueError("scales and values must be positive")
    x, y = np.log(pts[:, 0]), np.log(pts[:, 1])
    res = stats.linregress(x, y)
    half_width = stats.t.ppf(0.5 + confidence / 2, pts.shape[0] - 2) * res.stderr
    return ExponentFit(float(res.slope), float(res.intercept), float(res.stderr),
                       (float(res.slope - half_width), float(res.slope + half_width)), len(pts))
