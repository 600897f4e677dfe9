"""Convolution potential, frequency cutoffs and the cubic multilinear forms.

The four forms share one sum over k1 - k2 + k3 = k with k2 not in {k1, k3};
they differ only by a multiplier in the transfer frequency m = k1 - k2:

    full   1
    low    eta(|m| / N^(1-delta))
    high   1 - eta(|m| / N^(1-delta))
    tiny   eta(|m| / N^epsilon)

Sums are evaluated as bilinear Fourier multipliers on a zero-padded grid.
The excluded diagonals are handled in closed form: k2 = k1 is exactly m = 0,
which the multiplier drops, and k2 = k3 (with m != 0) is a convolution of the
multiplier with conj(v) * w, removed afterwards.

The interaction-picture phase attached to a triple is exp(-i s Omega) with
Omega = |k1|^2 - |k2|^2 + |k3|^2 - |k|^2, the sign generated by the flow
i u_t + Laplacian u = (nonlinearity).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .lattice import FourierState, bracket, check_dyadic, mode_set
from .params import DEFAULT_PARAMS, ParamSet
from .spectral import SpectralGrid, spectral_grid

WINDOWS = ("full", "low", "high", "tiny")


def smoothstep_cutoff(t) -> np.ndarray:
    """Equals 1 on [0, 1], 0 on [2, inf), quintic smoothstep in between."""
    t = np.abs(np.asarray(t, dtype=float))
    x = np.clip(t - 1.0, 0.0, 1.0)
    return 1.0 - x * x * x * (10.0 - 15.0 * x + 6.0 * x * x)


@dataclass(frozen=True)
class CutoffProfile:
    fn: Callable = smoothstep_cutoff

    def __call__(self, t):
        return self.fn(t)


ETA = CutoffProfile()


@dataclass(frozen=True, eq=False)
class Potential:
    """Even real Fourier multiplier V_k of a convolution potential."""

    beta: float
    vhat_fn: Callable | None = None
    n_max: int = 8
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.vhat_fn is None and not 0 < self.beta <= 1:
            raise ValueError(f"beta must lie in (0, 1], got {self.beta}")

    def vhat(self, k) -> np.ndarray:
        k = np.asarray(k, dtype=np.int64)
        if self.vhat_fn is not None:
            return np.asarray(self.vhat_fn(k), dtype=float)
        return (1.0 + np.sum(k * k, axis=-1)) ** (-self.beta / 2.0)

    def table(self) -> tuple[np.ndarray, np.ndarray]:
        """Modes with <k> <= 2 n_max and their multipliers."""
        ms = mode_set(2 * self.n_max)
        return ms.modes, self.vhat(ms.modes)

    def to_csv(self, path) -> None:
        modes, vals = self.table()
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["kx", "ky", "kz", "vhat"])
            for k, v in zip(modes, vals):
                wr.writerow([int(k[0]), int(k[1]), int(k[2]), repr(float(v))])

    def fejer_samples(self, M: int, G: int | None = None) -> np.ndarray:
        """Physical samples of the Fejer (Cesaro) mean of V over |k_i| <= M.

        The Fejer kernel is nonnegative, so these samples are nonnegative
        whenever V is; a sharp truncation of V's Fourier series is not.
        """
        G = G or 2 * M + 2
        f = np.rint(np.fft.fftfreq(G, 1.0 / G)).astype(np.int64)
        k = np.stack(np.meshgrid(f, f, f, indexing="ij"), axis=-1)
        w = np.prod(np.clip(1.0 - np.abs(k) / (M + 1.0), 0.0, None), axis=-1)
        return np.fft.ifftn(w * self.vhat(k)).real * G ** 3

    @classmethod
    def zero(cls) -> "Potential":
        """Stub with V == 0 (switches the quartic interaction off)."""
        return cls(beta=1.0, vhat_fn=lambda k: np.zeros(np.shape(k)[:-1]))


def make_bessel_potential(beta: float, N_max: int = 8) -> Potential:
    """V_k = <k>^(-beta), tabulated for <k> <= 2 N_max."""
    check_dyadic(N_max)
    return Potential(beta=beta, n_max=N_max)


def window_weight(window: str, m_norm: np.ndarray, N: int, params: ParamSet) -> np.ndarray:
    """Window multiplier as a function of |k1 - k2|."""
    if window == "full":
        return np.ones_like(m_norm, dtype=float)
    if window in ("low", "high"):
        w = ETA(m_norm / float(N) ** (1.0 - params.delta))
        return w if window == "low" else 1.0 - w
    if window == "tiny":
        return ETA(m_norm / float(N) ** params.epsilon)
    raise ValueError(f"unknown window {window!r}; expected one of {WINDOWS}")


class MultilinearForm:
    """Evaluator of one windowed form on the grid of a mode set."""

    def __init__(self, grid: SpectralGrid, P: Potential, window: str, N: int,
                 params: ParamSet = DEFAULT_PARAMS):
        self.grid = grid
        mult = P.vhat(grid.freqs) * window_weight(window, np.sqrt(grid.freq_norm2), N, params)
        mult[0, 0, 0] = 0.0
        self.mult = mult
        self.mult_phys = grid.ifft(mult.astype(np.complex128))
        self._diff = None

    def unphased(self, u, v, w, u_phys=None, v_phys=None):
        """sum over k1-k2+k3=k, k2 not in {k1,k3}, of mult(k1-k2) u_k1 conj(v_k2) w_k3."""
        g = self.grid
        U = g.to_physical(u) if u_phys is None else u_phys
        if v_phys is None:
            v_phys = U if v is u else g.to_physical(v)
        W = g.to_physical(w)
        q = g.fft(U * np.conj(v_phys)) * self.mult
        out = g.to_coeffs(g.ifft(q) * W)
        s = g.to_physical(np.conj(v) * w)
        out -= u * g.to_coeffs(self.mult_phys * s)
        return out

    def autocorrelation(self, a) -> np.ndarray:
        """Grid coefficients q_m = sum_k a_k conj(a_{k-m})."""
        A = self.grid.to_physical(a)
        return self.grid.fft(A * np.conj(A))

    def operator_matrix(self, a, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
        """Dense matrix of w -> unphased(a, a, w) restricted to rows x cols (positions)."""
        g = self.grid
        q = self.autocorrelation(a).reshape(-1)
        d = self._diff_index(rows, cols)
        mult = self.mult.reshape(-1)[d]
        return mult * (q[d] - np.outer(a[rows], np.conj(a[cols])))

    def _diff_index(self, rows, cols):
        key = (rows.tobytes(), cols.tobytes())
        if self._diff is None or self._diff[0] != key:
            G = self.grid.G
            modes = self.grid.mode_set.modes
            dm = (modes[rows][:, None, :] - modes[cols][None, :, :]) % G
            self._diff = (key, (dm[..., 0] * G + dm[..., 1]) * G + dm[..., 2])
        return self._diff[1]


def phase_rotation(N: int, s: float) -> np.ndarray:
    """exp(-i s |k|^2) on the mode set of scale N."""
    return np.exp(-1j * s * mode_set(N).norm2)


def _form(P: Potential, window: str, N: int, grid_N: int, params: ParamSet) -> MultilinearForm:
    key = ("form", window, N, grid_N, params)
    form = P._cache.get(key)
    if form is None:
        form = MultilinearForm(spectral_grid(grid_N), P, window, N, params)
        P._cache[key] = form
    return form


def multilinear_array(u, v, w, window: str, P: Potential, N: int, s: float = 0.0,
                      phased: bool = False, output: str = "pi", grid_N: int | None = None,
                      params: ParamSet = DEFAULT_PARAMS) -> np.ndarray:
    """Array version of :func:`multilinear_apply`; inputs are (..., n) on ModeSet(grid_N)."""
    grid_N = N if grid_N is None else grid_N
    form = _form(P, window, N, grid_N, params)
    if phased:
        r = phase_rotation(grid_N, s)
        same = v is u
        u = u * r
        v = u if same else v * r
        w = w * r
        out = form.unphased(u, v, w) * np.conj(r)
    else:
        out = form.unphased(u, v, w)
    ms = mode_set(grid_N)
    if output == "pi" and N == grid_N:
        return out
    return out * ms.mask(N, output)


def multilinear_apply(u: FourierState, v: FourierState, w: FourierState, window: str,
                      P: Potential, N: int | None = None, s: float = 0.0, phased: bool = False,
                      output: str = "pi", params: ParamSet = DEFAULT_PARAMS) -> FourierState:
    """Windowed cubic form of three states sharing a mode set.

    ``output`` selects the projection applied to the result: ``'pi'`` for
    Pi_N, ``'delta'`` for Delta_N.
    """
    if not (u.mode_set.N == v.mode_set.N == w.mode_set.N):
        raise ValueError("multilinear_apply: inputs must share a mode set")
    grid_N = u.mode_set.N
    N = grid_N if N is None else check_dyadic(N)
    out = multilinear_array(u.coeffs, v.coeffs, w.coeffs, window, P, N, s, phased, output,
                            grid_N, params)
    return FourierState(u.mode_set, out)


def multilinear_direct(u: np.ndarray, v: np.ndarray, w: np.ndarray, weight: Callable,
                       grid_N: int, s: float = 0.0, phased: bool = False) -> np.ndarray:
    """Literal triple sum over the mode set; reference for small scales only."""
    ms = mode_set(grid_N)
    if ms.size > 300:
        raise ValueError("direct triple sum is restricted to small mode sets")
    modes = ms.modes
    K = ms.kmax
    box = 2 * (3 * K) + 1
    lookup = -np.ones((box,) * 3, dtype=np.int64)
    lookup[tuple((modes + 3 * K).T)] = np.arange(ms.size)
    i1, i2, i3 = np.meshgrid(*(np.arange(ms.size),) * 3, indexing="ij")
    i1, i2, i3 = i1.ravel(), i2.ravel(), i3.ravel()
    k = modes[i1] - modes[i2] + modes[i3]
    pos = lookup[tuple((k + 3 * K).T)]
    keep = (pos >= 0) & (i2 != i1) & (i2 != i3)
    i1, i2, i3, pos = i1[keep], i2[keep], i3[keep], pos[keep]
    terms = weight(modes[i1] - modes[i2]) * u[i1] * np.conj(v[i2]) * w[i3]
    if phased:
        n2 = ms.norm2
        omega = n2[i1] - n2[i2] + n2[i3] - n2[pos]
        terms = terms * np.exp(-1j * s * omega)
    out = np.zeros(ms.size, dtype=np.complex128)
    np.add.at(out, pos, terms)
    return out


def full_nonlinearity(u, P: Potential, grid_N: int) -> np.ndarray:
    """Pi_N[(|u|^2 * V) u] with all diagonal terms kept; u has shape (..., n)."""
    g = spectral_grid(grid_N)
    key = ("vgrid", grid_N)
    vg = P._cache.get(key)
    if vg is None:
        vg = P.vhat(g.freqs)
        P._cache[key] = vg
    U = g.to_physical(u)
    p = g.fft(np.abs(U) ** 2) * vg
    return g.to_coeffs(g.ifft(p) * U)


def convolve_potential(P: Potential, grid_N: int, s) -> np.ndarray:
    """sum_l V_{k-l} s_l for coefficient sequences s (..., n) on ModeSet(grid_N)."""
    g = spectral_grid(grid_N)
    key = ("vphys", grid_N)
    vp = P._cache.get(key)
    if vp is None:
        vp = g.ifft(P.vhat(g.freqs).astype(np.complex128))
        P._cache[key] = vp
    return g.to_coeffs(vp * g.to_physical(s))


def hartree_vector_field(u: FourierState, P: Potential, R) -> FourierState:
    """Pi_N[(|u|^2 * V) u] - sigma_N u - C_N u for u supported in <k> <= N."""
    return FourierState(u.mode_set, hartree_array(u.coeffs, P, R, u.mode_set.N))


def hartree_array(u, P: Potential, R, grid_N: int) -> np.ndarray:
    if R.N != grid_N:
        raise ValueError(f"renormalization constants at N={R.N} used on scale {grid_N}")
    return full_nonlinearity(u, P, grid_N) - (R.sigma + R.c_multiplier) * u


def reality_defect(u: FourierState, P: Potential) -> float:
    """Largest |Im| of the physical samples of |u|^2 * V."""
    g = spectral_grid(u.mode_set.N)
    U = g.to_physical(u.coeffs)
    conv = g.ifft(g.fft(np.abs(U) ** 2) * P.vhat(g.freqs))
    return float(np.max(np.abs(conv.imag)))


__all__ = [
    "CutoffProfile", "ETA", "Potential", "WINDOWS", "make_bessel_potential", "smoothstep_cutoff",
    "window_weight", "MultilinearForm", "multilinear_apply", "multilinear_array",
    "multilinear_direct", "full_nonlinearity", "convolve_potential", "hartree_vector_field",
    "hartree_array", "phase_rotation", "reality_defect", "bracket",
]
