"""Exhaustive counts of the resonance sets and of divisor pairs in boxes.

The set S^R collects (k, k1, k2, k3) with k = k1 - k2 + k3, k2 not in {k1, k3},
|k| <= N, N_j/2 < |k_j| <= N_j, R/2 < <k1 - k2> <= R and
|k|^2 - |k1|^2 + |k2|^2 - |k3|^2 = Omega0. Writing a = k1 - k2, c = k3 - k2 the
last constraint is 2 a.c = Omega0, so odd Omega0 always gives the empty set.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import kernels
from .lattice import check_dyadic, is_dyadic

ROLES = ("k", "k1", "k2", "k3")
_SIGN = (1, -1, 1, -1)        # k - k1 + k2 - k3 = 0

SINGLE_FAMILIES = ("k", "k3", "k2")
PAIR_FAMILIES = (("k", "k1"), ("k2", "k3"), ("k", "k2"), ("k1", "k3"), ("k", "k3"), ("k1", "k2"))
BOUND_IDS = ("S", "S_k", "S_k3", "S_k2", "S_kk1", "S_k2k3", "S_kk2", "S_k1k3", "S_kk3", "S_k1k2")
# Pinning (k, k3) or (k1, k2) fixes a = k1 - k2, so those slices are lattice planes whose
# size is governed by the free shells and not by R; these R-free forms are reported too.
PLANAR_IDS = ("S_kk3_planar", "S_k1k2_planar")


class BudgetExceeded(RuntimeError):
    """The enumeration would exceed the desk-scale budget."""


# ---------------------------------------------------------------- divisor pairs

def divisor_box_count(m, a0, b0, M, N, ring: str = "Z") -> int:
    """Number of (a, b) with a b = m, |a - a0| <= M, |b - b0| <= N.

    ``ring`` is ``'Z'`` or ``'Z[i]'``; in the Gaussian integers |.| is the
    complex modulus and m, a0, b0 may be complex.
    """
    if ring == "Z":
        m = int(m)
        if m == 0:
            raise ValueError("m must be nonzero")
        lo, hi = math.ceil(a0 - M), math.floor(a0 + M)
        count = 0
        for a in range(lo, hi + 1):
            if a != 0 and m % a == 0 and abs(m // a - b0) <= N:
                count += 1
        return count
    if ring in ("Z[i]", "Zi", "gaussian"):
        m = complex(m)
        mr, mi = int(round(m.real)), int(round(m.imag))
        if mr == 0 and mi == 0:
            raise ValueError("m must be nonzero")
        a0, b0 = complex(a0), complex(b0)
        count = 0
        for x in range(math.ceil(a0.real - M), math.floor(a0.real + M) + 1):
            for y in range(math.ceil(a0.imag - M), math.floor(a0.imag + M) + 1):
                n = x * x + y * y
                if n == 0 or abs(complex(x, y) - a0) > M:
                    continue
                # m / a = m conj(a) / |a|^2
                re, im = mr * x + mi * y, mi * x - mr * y
                if re % n or im % n:
                    continue
                if abs(complex(re // n, im // n) - b0) <= N:
                    count += 1
        return count
    raise ValueError(f"unknown ring {ring!r}")


# ---------------------------------------------------------------- single queries

@dataclass(frozen=True)
class ResonanceQuery:
    N: int
    N1: int
    N2: int
    N3: int
    R: int
    Omega0: int
    fixed: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("N", "N1", "N2", "N3", "R"):
            v = getattr(self, name)
            if not (is_dyadic(v) and v >= 1):
                raise ValueError(f"{name}={v} must be a power of two")
        fixed = {}
        for role, vec in dict(self.fixed).items():
            if role not in ROLES:
                raise ValueError(f"unknown variable {role!r}")
            vec = tuple(int(c) for c in vec)
            if not _in_shell(role, sum(c * c for c in vec), self):
                raise ValueError(f"pinned {role}={vec} lies outside its shell")
            fixed[role] = vec
        if len(fixed) > 3:
            raise ValueError("at most three variables may be pinned")
        object.__setattr__(self, "fixed", fixed)

    def scale(self, role: str) -> int:
        return {"k": self.N, "k1": self.N1, "k2": self.N2, "k3": self.N3}[role]


def _in_shell(role: str, n2: int, q) -> bool:
    if role == "k":
        return n2 <= q.N * q.N
    Nj = q.scale(role)
    return Nj * Nj < 4 * n2 <= 4 * Nj * Nj


@lru_cache(maxsize=None)
def ball_points(N: int) -> np.ndarray:
    """All x in Z^3 with |x| <= N, lexicographic."""
    r = np.arange(-N, N + 1)
    pts = np.stack(np.meshgrid(r, r, r, indexing="ij"), axis=-1).reshape(-1, 3)
    pts = pts[np.sum(pts ** 2, axis=1) <= N * N].astype(np.int64)
    pts.setflags(write=False)
    return pts


def _candidates(role: str, q: ResonanceQuery) -> np.ndarray:
    if role in q.fixed:
        return np.array([q.fixed[role]], dtype=np.int64)
    pts = ball_points(q.scale(role))
    n2 = np.sum(pts ** 2, axis=1)
    if role == "k":
        return pts
    Nj = q.scale(role)
    return pts[Nj * Nj < 4 * n2]


def _plan(q: ResonanceQuery):
    order = [r for r in ROLES if r in q.fixed] + [r for r in ROLES if r not in q.fixed]
    loops, derived = order[:3], order[3]
    rd = ROLES.index(derived)
    coeffs = [-_SIGN[rd] * _SIGN[ROLES.index(r)] for r in loops]
    nmax = (3 * max(q.N, q.N1, q.N2, q.N3, q.R)) ** 2 + 1
    n = np.arange(nmax)
    ok = np.zeros((5, nmax), dtype=np.uint8)
    for i, role in enumerate(ROLES):
        ok[i] = [_in_shell(role, int(v), q) for v in n]
    ok[4] = (4 * (1 + n) > q.R * q.R) & (1 + n <= q.R * q.R)
    return loops, derived, coeffs, ok


PURE_BUDGET = 5 * 10 ** 7
COMPILED_BUDGET = 4 * 10 ** 10


def enumerate_resonance_set(q: ResonanceQuery, N_cap: int = 16, elements: bool = False):
    """Exact |S^R| (or of the slice with the pinned variables of ``q``).

    With ``elements`` the members are returned as an (n, 4, 3) array of
    (k, k1, k2, k3) as well; that path is numpy-only and for small sets.
    """
    if N_cap > 16 or max(q.N, q.N1, q.N2, q.N3) > N_cap:
        raise BudgetExceeded(f"scales above the enumeration cap {min(N_cap, 16)}")
    if q.Omega0 % 2:
        return (0, np.zeros((0, 4, 3), dtype=np.int64)) if elements else 0
    loops, derived, coeffs, ok = _plan(q)
    sets = [_candidates(r, q) for r in loops]
    work = math.prod(len(s) for s in sets)
    if elements:
        if work > PURE_BUDGET:
            raise BudgetExceeded(f"element listing needs {work} iterations")
        return _list_elements(q, loops, derived, coeffs, ok, sets)
    budget = COMPILED_BUDGET if kernels.backend == "compiled" else PURE_BUDGET
    if work > budget:
        raise BudgetExceeded(f"enumeration needs {work} iterations (budget {budget})")
    idx = [ROLES.index(r) for r in loops]
    return int(kernels.count_product(sets[0], sets[1], sets[2], *coeffs, *idx,
                                     ROLES.index(derived), ok, q.N, q.Omega0))


def _list_elements(q, loops, derived, coeffs, ok, sets):
    A, B, C = sets
    grid = np.stack(np.meshgrid(np.arange(len(A)), np.arange(len(B)), np.arange(len(C)),
                                indexing="ij"), axis=-1).reshape(-1, 3)
    v = [None] * 4
    for j, r in enumerate(loops):
        v[ROLES.index(r)] = sets[j][grid[:, j]]
    rd = ROLES.index(derived)
    v[rd] = sum(c * v[ROLES.index(r)] for c, r in zip(coeffs, loops))
    nmax = ok.shape[1]
    nd = np.sum(v[rd] ** 2, axis=1)
    a, c = v[1] - v[2], v[3] - v[2]
    na, nc = np.sum(a ** 2, axis=1), np.sum(c ** 2, axis=1)
    good = (nd < nmax) & (na < nmax) & (na > 0) & (nc > 0)
    good[good] &= ok[rd, nd[good]].astype(bool) & ok[4, na[good]].astype(bool)
    good &= 2 * np.sum(a * c, axis=1) == q.Omega0
    el = np.stack(v, axis=1)[good]
    return len(el), el


# ---------------------------------------------------------------- full sweep

@dataclass
class SweepCounts:
    """Counts for every query at one N, arrays indexed [j1, j2, j3, r, w].

    Shell index j means N_j = 2^j, r means R = 2^r, and w = Omega0/2 + H.
    """
    N: int
    H: int
    total: np.ndarray
    single: dict
    pair: dict

    @property
    def shells(self) -> list[int]:
        return [2 ** j for j in range(self.total.shape[0])]

    @property
    def radii(self) -> list[int]:
        return [2 ** r for r in range(self.total.shape[3])]

    def family(self, bound_id: str) -> np.ndarray:
        if bound_id == "S":
            return self.total
        name = bound_id[2:].removesuffix("_planar")
        if name in self.single:
            return self.single[name]
        for (x, y), arr in self.pair.items():
            if name == x + y:
                return arr
        raise KeyError(bound_id)


def _tables(N: int, H: int):
    pts = ball_points(N)
    nS = int(math.log2(N)) + 1
    nR = int(math.log2(2 * N)) + 1
    n = np.arange(N * N + 1)
    shell = np.full(N * N + 1, -1, dtype=np.int32)
    for j in range(nS):
        Nj = 2 ** j
        shell[(Nj * Nj < 4 * n) & (n <= Nj * Nj)] = j
    na = np.arange(4 * N * N + 1)
    rtab = np.full(4 * N * N + 1, -1, dtype=np.int32)
    for r in range(nR):
        R = 2 ** r
        rtab[(4 * (1 + na) > R * R) & (1 + na <= R * R)] = r
    return pts, shell, rtab, nS, nR


def resonance_sweep(N: int, H: int = 32) -> SweepCounts:
    """All shell/R/Omega0 counts at scale N with |Omega0| <= 2H, every N_j <= N and R <= 2N."""
    N = check_dyadic(N)
    if N > 16:
        raise BudgetExceeded("sweep restricted to N <= 16")
    if kernels.backend != "compiled" and N > 4:
        raise BudgetExceeded("the numpy fallback sweeps only up to N = 4")
    pts, shell, rtab, nS, nR = _tables(N, H)
    totals, singles, pairs = kernels.sweep_counts(N, pts, shell, rtab, nS, nR, H)
    if not all(np.array_equal(totals[0], t) for t in totals[1:]):
        raise RuntimeError("enumeration passes disagree on |S^R|")
    shape = (nS, nS, nS, nR, 2 * H + 1)
    r = lambda a: np.asarray(a).reshape(shape)
    # pass order: (k,k1) (k2,k3) (k3,k) (k,k2) (k1,k3) (k1,k2)
    single = {"k": r(singles[0]), "k2": r(singles[1]), "k3": r(singles[2])}
    pair = {("k", "k1"): r(pairs[0]), ("k2", "k3"): r(pairs[1]), ("k", "k3"): r(pairs[2]),
            ("k", "k2"): r(pairs[3]), ("k1", "k3"): r(pairs[4]), ("k1", "k2"): r(pairs[5])}
    return SweepCounts(N, H, r(totals[0]), single, pair)


def bound_value(bound_id: str, N, N1, N2, N3, R, theta: float = 0.1) -> float:
    """Right-hand side (without the implicit constant) of each counting estimate."""
    t = theta
    mn = min
    if bound_id == "S":
        return mn(N1 ** 3 * N3 ** 3 * mn(N2, N) ** (1 + t), N ** 3 * N2 ** 3 * mn(N1, N3) ** (1 + t),
                  N2 ** 3 * (R * N3) ** (2 + t), N ** 3 * (R * N1) ** (2 + t))
    if bound_id == "S_k":
        return mn(N2 ** 3 * mn(N1, N3) ** (1 + t), (N1 * N3) ** (2 + t), (R * N1) ** (2 + t))
    if bound_id == "S_k3":
        return mn(N1 ** 3 * mn(N2, N) ** (1 + t), (N2 * N) ** (2 + t), (R * N2) ** (2 + t))
    if bound_id == "S_k2":
        return mn(N ** 3 * mn(N1, N3) ** (1 + t), (N1 * N3) ** (2 + t), (R * N3) ** (2 + t))
    pair = {"S_kk1": ((N2, N3, R), 2), "S_k2k3": ((N, N1, R), 2),
            "S_kk2": ((N1, N3, R), 1), "S_k1k3": ((N2, N, R), 1),
            "S_kk3": ((N1, N2, R), 2), "S_k1k2": ((N, N3, R), 2)}
    if bound_id in pair:
        args, p = pair[bound_id]
        return float(mn(args)) ** (p + t)
    if bound_id == "S_kk3_planar":
        return float(mn(N1, N2)) ** (2 + t)
    if bound_id == "S_k1k2_planar":
        return float(mn(N, N3)) ** (2 + t)
    raise KeyError(bound_id)


@dataclass
class CountingReport:
    theta: float
    scales: list
    max_ratio: dict                 # bound_id -> {N: max ratio}
    max_ratio_theta: dict           # theta -> bound_id -> {N: max ratio}
    uniform: dict                   # bound_id -> bool
    rows: list = field(repr=False, default_factory=list)
    budget_factor: float = 4.0

    @property
    def uniform_all(self) -> bool:
        return all(self.uniform[b] for b in BOUND_IDS)

    @property
    def failing(self) -> list[str]:
        return [b for b in BOUND_IDS if not self.uniform[b]]

    @property
    def finite(self) -> bool:
        return all(np.isfinite(v) for d in self.max_ratio.values() for v in d.values())

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["bound_id", "N", "N1", "N2", "N3", "R", "Omega0", "count",
                         "bound_value", "ratio"])
            wr.writerows(self.rows)

    def to_dict(self) -> dict:
        return {"theta": self.theta, "scales": self.scales, "max_ratio": self.max_ratio,
                "failing": self.failing,
                "max_ratio_theta": {str(k): v for k, v in self.max_ratio_theta.items()},
                "uniform": self.uniform, "uniform_all": self.uniform_all,
                "budget_factor": self.budget_factor}


def verify_counting_bounds(scales=(2, 4, 8), theta: float = 0.1, H: int = 32,
                           thetas=(0.05, 0.1, 0.2), budget_factor: float = 4.0,
                           keep_rows: str = "nonzero", sweeps: dict | None = None) -> CountingReport:
    """Ratios count / bound over the full sweep, with the uniform-constant flag.

    The flag for a bound holds when its maximal ratio at the largest scale is at
    most ``budget_factor`` times the maximal ratio at the smallest scale.
    """
    scales = sorted(check_dyadic(N) for N in scales)
    for N in scales:
        if N > 16:
            raise BudgetExceeded("counting sweep restricted to N <= 16")
    all_thetas = sorted(set(thetas) | {theta})
    ids = BOUND_IDS + PLANAR_IDS
    ratios = {t: {b: {} for b in ids} for t in all_thetas}
    rows = []
    for N in scales:
        sw = sweeps[N] if sweeps and N in sweeps else resonance_sweep(N, H)
        shells, radii = sw.shells, sw.radii
        for b in ids:
            counts = sw.family(b)
            for t in all_thetas:
                bounds = np.empty(counts.shape[:4])
                for j1, N1 in enumerate(shells):
                    for j2, N2 in enumerate(shells):
                        for j3, N3 in enumerate(shells):
                            for r, R in enumerate(radii):
                                bounds[j1, j2, j3, r] = bound_value(b, N, N1, N2, N3, R, t)
                ratio = counts / bounds[..., None]
                ratios[t][b][N] = float(ratio.max()) if ratio.size else 0.0
                if t != theta:
                    continue
                sel = np.argwhere(counts > 0) if keep_rows == "nonzero" else \
                    np.argwhere(np.ones_like(counts, dtype=bool))
                for j1, j2, j3, r, w in sel:
                    rows.append([b, N, shells[j1], shells[j2], shells[j3], radii[r],
                                 int(2 * (w - sw.H)), int(counts[j1, j2, j3, r, w]),
                                 float(bounds[j1, j2, j3, r]), float(ratio[j1, j2, j3, r, w])])
    main = ratios[theta]
    uniform = {}
    for b in ids:
        lo, hi = main[b][scales[0]], main[b][scales[-1]]
        uniform[b] = bool(hi <= budget_factor * lo) if len(scales) > 1 else True
    return CountingReport(theta, scales, main, ratios, uniform, rows, budget_factor)
