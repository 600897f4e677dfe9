"""Frequency lattice Z^3: brackets, dyadic mode sets, projections and the resonance factor.

All modes are stored in lexicographic order of (kx, ky, kz). Membership
``<k> <= N`` is tested in integer arithmetic as ``1 + |k|^2 <= N^2``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np


def is_dyadic(N) -> bool:
    """True for 0 and positive integer powers of two (1, 2, 4, ...)."""
    if isinstance(N, (bool, np.bool_)):
        return False
    try:
        n = int(N)
    except (TypeError, ValueError):
        return False
    if n != N:
        return False
    return n == 0 or (n > 0 and n & (n - 1) == 0)


def check_dyadic(N) -> int:
    if not is_dyadic(N):
        raise ValueError(f"scale must be 0 or a power of two, got {N!r}")
    return int(N)


def dyadic_scales(N: int) -> list[int]:
    """Dyadic L with 1 <= L <= N, ascending."""
    N = check_dyadic(N)
    out, L = [], 1
    while L <= N:
        out.append(L)
        L *= 2
    return out


def half(N: int) -> int:
    """N/2 on dyadic scales, with 1/2 read as 0."""
    return N // 2


def bracket(k) -> float | np.ndarray:
    """Japanese bracket (1 + |k|^2)^(1/2); ``k`` has trailing axis of length 3."""
    k = np.asarray(k)
    out = np.sqrt(1.0 + np.sum(k.astype(np.int64) ** 2, axis=-1))
    return float(out) if out.ndim == 0 else out


def resonance(k, k1, k2, k3):
    """|k1|^2 - |k2|^2 + |k3|^2 - |k|^2 (integer; broadcasts over leading axes)."""
    sq = lambda v: np.sum(np.asarray(v, dtype=np.int64) ** 2, axis=-1)
    out = sq(k1) - sq(k2) + sq(k3) - sq(k)
    return int(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True, eq=False)
class ModeSet:
    """All k in Z^3 with <k> <= N, lexicographically ordered."""

    N: int
    modes: np.ndarray = field(repr=False)
    index: dict = field(repr=False)

    @property
    def size(self) -> int:
        return len(self.modes)

    def __len__(self) -> int:
        return len(self.modes)

    @property
    def norm2(self) -> np.ndarray:
        return _norm2(self.N)

    @property
    def brackets(self) -> np.ndarray:
        return np.sqrt(1.0 + self.norm2)

    @property
    def kmax(self) -> int:
        """Largest |k_i| over the set (0 for N <= 1)."""
        return int(np.abs(self.modes).max()) if self.size else 0

    def position(self, k) -> int:
        return self.index[tuple(int(c) for c in k)]

    def mask(self, N: int, kind: str = "pi") -> np.ndarray:
        """Boolean mask of modes kept by Pi_N (``kind='pi'``) or Delta_N (``kind='delta'``)."""
        check_dyadic(N)
        s = 1 + self.norm2
        inside = s <= N * N
        if kind == "pi":
            return inside
        if kind == "delta":
            h = half(N)
            return inside & (s > h * h)
        raise ValueError(f"unknown projection kind {kind!r}")

    def annulus(self) -> np.ndarray:
        """Positions of the dyadic annulus N/2 < <k> <= N."""
        return np.flatnonzero(self.mask(self.N, "delta"))

    def embed_positions(self, other: "ModeSet") -> np.ndarray:
        """Positions in ``other`` of every mode of ``self`` (requires self.N <= other.N)."""
        if self.N > other.N:
            raise ValueError("cannot embed a larger mode set into a smaller one")
        return _embed(self.N, other.N)


@lru_cache(maxsize=None)
def mode_set(N: int) -> ModeSet:
    """The mode set {k : <k> <= N} for a dyadic scale N."""
    N = check_dyadic(N)
    if N == 0:
        modes = np.zeros((0, 3), dtype=np.int64)
    else:
        K = int(np.floor(np.sqrt(N * N - 1)))
        r = np.arange(-K, K + 1)
        grid = np.stack(np.meshgrid(r, r, r, indexing="ij"), axis=-1).reshape(-1, 3)
        keep = 1 + np.sum(grid ** 2, axis=1) <= N * N
        modes = grid[keep].astype(np.int64)
    modes.setflags(write=False)
    index = {tuple(int(c) for c in k): j for j, k in enumerate(modes)}
    return ModeSet(N, modes, index)


@lru_cache(maxsize=None)
def _norm2(N: int) -> np.ndarray:
    out = np.sum(mode_set(N).modes ** 2, axis=1)
    out.setflags(write=False)
    return out


@lru_cache(maxsize=None)
def _embed(n_small: int, n_big: int) -> np.ndarray:
    big = mode_set(n_big)
    pos = np.array([big.index[tuple(int(c) for c in k)] for k in mode_set(n_small).modes],
                   dtype=np.int64)
    pos.setflags(write=False)
    return pos


@dataclass(frozen=True, eq=False)
class FourierState:
    """Fourier coefficients u_k over a mode set."""

    mode_set: ModeSet
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=np.complex128)
        if c.shape != (self.mode_set.size,):
            raise ValueError(
                f"coefficient vector of shape {c.shape} does not match {self.mode_set.size} modes")
        object.__setattr__(self, "coeffs", c)

    @property
    def N(self) -> int:
        return self.mode_set.N

    @classmethod
    def zeros(cls, N: int) -> "FourierState":
        ms = mode_set(N)
        return cls(ms, np.zeros(ms.size, dtype=np.complex128))

    @classmethod
    def single_mode(cls, N: int, k, c: complex = 1.0) -> "FourierState":
        ms = mode_set(N)
        coeffs = np.zeros(ms.size, dtype=np.complex128)
        coeffs[ms.position(k)] = c
        return cls(ms, coeffs)

    def get(self, k) -> complex:
        return complex(self.coeffs[self.mode_set.position(k)])

    def mass(self) -> float:
        return float(np.sum(np.abs(self.coeffs) ** 2))

    def supported_in(self, N: int, kind: str = "pi") -> bool:
        return not np.any(self.coeffs[~self.mode_set.mask(N, kind)])

    def lift(self, N: int) -> "FourierState":
        """The same function viewed on the larger mode set of scale N."""
        target = mode_set(N)
        out = np.zeros(target.size, dtype=np.complex128)
        out[self.mode_set.embed_positions(target)] = self.coeffs
        return FourierState(target, out)

    def restrict(self, N: int) -> "FourierState":
        """Coefficients on the smaller mode set of scale N (equals Pi_N followed by dropping zeros)."""
        small = mode_set(N)
        return FourierState(small, self.coeffs[small.embed_positions(self.mode_set)])

    def __add__(self, other: "FourierState") -> "FourierState":
        _same(self, other)
        return FourierState(self.mode_set, self.coeffs + other.coeffs)

    def __sub__(self, other: "FourierState") -> "FourierState":
        _same(self, other)
        return FourierState(self.mode_set, self.coeffs - other.coeffs)

    def __mul__(self, c) -> "FourierState":
        return FourierState(self.mode_set, self.coeffs * c)

    __rmul__ = __mul__


def _same(a: FourierState, b: FourierState) -> None:
    if a.mode_set.N != b.mode_set.N:
        raise ValueError(f"mode sets differ: N={a.mode_set.N} vs N={b.mode_set.N}")


def project(u: FourierState, N: int, kind: str = "pi") -> FourierState:
    """Pi_N (keep <k> <= N) or Delta_N (keep N/2 < <k> <= N), on u's own mode set."""
    N = check_dyadic(N)
    if kind == "pi" and N > u.mode_set.N:
        raise ValueError("Pi_N requires N <= the state's scale")
    return FourierState(u.mode_set, np.where(u.mode_set.mask(N, kind), u.coeffs, 0))
