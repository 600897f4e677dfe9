"""Labeled tensors, partition operator norms and checks of the merging estimates.

A tensor h_{k_A} carries one axis per name in A; each axis is indexed by a list
of integer vectors. ||h||_{k_B -> k_C} is the operator norm of h viewed as a
map from l^2(k_B) to l^2(k_C).
"""
from __future__ import annotations

import itertools
import json
import string
from dataclasses import asdict, dataclass, field

import numpy as np

MAX_ENTRIES = 10 ** 7
SLACK = 1e-10


@dataclass(frozen=True, eq=False)
class LabeledTensor:
    axes: tuple
    ranges: dict = field(repr=False)
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        axes = tuple(self.axes)
        if len(set(axes)) != len(axes):
            raise ValueError("axis names must be unique")
        ranges = {a: np.atleast_2d(np.asarray(self.ranges[a], dtype=np.int64)) for a in axes}
        shape = tuple(len(ranges[a]) for a in axes)
        vals = np.asarray(self.values, dtype=np.complex128)
        if vals.shape != shape:
            raise ValueError(f"values of shape {vals.shape} do not match axis ranges {shape}")
        if vals.size > MAX_ENTRIES:
            raise ValueError("tensor exceeds the dense storage cap")
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "ranges", ranges)
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_array(cls, axes, values) -> "LabeledTensor":
        """Axes indexed by 0..n-1 (as one-dimensional vectors)."""
        values = np.asarray(values)
        return cls(tuple(axes), {a: np.arange(n)[:, None] for a, n in zip(axes, values.shape)},
                   values)

    def relabel(self, mapping: dict) -> "LabeledTensor":
        axes = tuple(mapping.get(a, a) for a in self.axes)
        return LabeledTensor(axes, {mapping.get(a, a): r for a, r in self.ranges.items()},
                             self.values)

    def conj(self) -> "LabeledTensor":
        return LabeledTensor(self.axes, self.ranges, np.conj(self.values))

    def frobenius(self) -> float:
        return float(np.linalg.norm(self.values.ravel()))

    def matricize(self, B, C) -> np.ndarray:
        """Matrix with rows indexed by k_C and columns by k_B."""
        B, C = tuple(B), tuple(C)
        if set(B) & set(C) or set(B) | set(C) != set(self.axes) or \
                len(B) + len(C) != len(self.axes):
            raise ValueError("(B, C) must partition the axes")
        order = [self.axes.index(a) for a in C + B]
        t = np.transpose(self.values, order)
        n_c = int(np.prod([len(self.ranges[a]) for a in C], dtype=np.int64))
        return t.reshape(n_c, -1)


# ---------------------------------------------------------------- norms

def _power_norm(A: np.ndarray, tol: float = 1e-14, maxiter: int = 20000) -> float:
    """Largest singular value by power iteration on A^* A from a fixed start."""
    n = A.shape[1]
    x = np.ones(n, dtype=np.complex128) + 1e-3 * np.cos(np.arange(n))
    x /= np.linalg.norm(x)
    prev = 0.0
    for _ in range(maxiter):
        y = A.conj().T @ (A @ x)
        lam = float(np.linalg.norm(y))
        if lam == 0.0:
            return 0.0
        x = y / lam
        if abs(lam - prev) <= tol * lam:
            break
        prev = lam
    return float(np.linalg.norm(A @ x))


def matrix_op_norm(A: np.ndarray, method: str = "auto") -> float:
    if A.size == 0:
        return 0.0
    if method == "svd" or (method == "auto" and min(A.shape) <= 256):
        return float(np.linalg.svd(A, compute_uv=False)[0])
    if method in ("power", "auto"):
        return _power_norm(A)
    raise ValueError(f"unknown method {method!r}")


def partition_norm(h: LabeledTensor, B, C, method: str = "auto") -> float:
    """||h||_{k_B -> k_C}; an empty side gives the Frobenius norm."""
    return matrix_op_norm(h.matricize(B, C), method)


# ---------------------------------------------------------------- products

def _einsum_letters(names):
    letters = iter(string.ascii_letters)
    return {n: next(letters) for n in names}


def semi_products(tensors) -> LabeledTensor:
    """Contract every axis shared by two factors; keep axes occurring once."""
    tensors = list(tensors)
    count: dict = {}
    for t in tensors:
        for a in t.axes:
            count[a] = count.get(a, 0) + 1
    if any(c > 2 for c in count.values()):
        raise ValueError("an axis appears in more than two factors")
    ranges = {}
    for t in tensors:
        for a in t.axes:
            r = t.ranges[a]
            if a in ranges and not np.array_equal(ranges[a], r):
                raise ValueError(f"incompatible ranges on shared axis {a!r}")
            ranges[a] = r
    keep = tuple(a for a in count if count[a] == 1)
    sym = _einsum_letters(count)
    spec = ",".join("".join(sym[a] for a in t.axes) for t in tensors)
    out = np.einsum(spec + "->" + "".join(sym[a] for a in keep),
                    *[t.values for t in tensors], optimize=True)
    return LabeledTensor(keep, {a: ranges[a] for a in keep}, out)


def semi_product(h1: LabeledTensor, h2: LabeledTensor) -> LabeledTensor:
    """Sum over k_C of h1 h2 with C the shared axes."""
    return semi_products([h1, h2])


# ---------------------------------------------------------------- merging checks

@dataclass
class MergeReport:
    prop: str
    lhs: float
    rhs: float
    holds: bool
    hypothesis_ok: bool = True
    note: str = ""

    @property
    def ratio(self) -> float:
        return self.lhs / self.rhs if self.rhs > 0 else (0.0 if self.lhs == 0 else np.inf)


def _report(prop, lhs, rhs, ok=True, note="") -> MergeReport:
    holds = bool(lhs <= rhs * (1 + SLACK) + 1e-300) if ok else True
    return MergeReport(prop, float(lhs), float(rhs), holds, ok, note)


def check_pair_merge(h1: LabeledTensor, h2: LabeledTensor, X, Y) -> MergeReport:
    """||H||_{X->Y} <= ||h1||_{X1 u C -> Y1} ||h2||_{X2 -> C u Y2}."""
    A1, A2 = set(h1.axes), set(h2.axes)
    C = A1 & A2
    A = A1 ^ A2
    X, Y = tuple(X), tuple(Y)
    if set(X) | set(Y) != A or set(X) & set(Y):
        return _report("pair", np.nan, np.nan, False, "(X, Y) is not a partition of A1 ^ A2")
    H = semi_product(h1, h2)
    order = lambda s, t: tuple(a for a in t.axes if a in s)
    lhs = partition_norm(H, X, Y)
    r1 = partition_norm(h1, order(set(X) & A1 | C, h1), order(set(Y) & A1, h1))
    r2 = partition_norm(h2, order(set(X) & A2, h2), order(set(Y) & A2 | C, h2))
    return _report("pair", lhs, r1 * r2)


def chain_sets(axis_sets):
    """B_j (indices shared with later factors) and C_j (shared with earlier ones)."""
    Bs, Cs = [], []
    for j, Aj in enumerate(axis_sets):
        Bs.append(set().union(*[Aj & Al for Al in axis_sets[j + 1:]]) if j + 1 < len(axis_sets)
                  else set())
        Cs.append(set().union(*[Aj & Al for Al in axis_sets[:j]]) if j else set())
    return Bs, Cs


def check_chain_merge(tensors, X, Y) -> MergeReport:
    """||H||_{X->Y} <= prod_j ||h_j||_{X_j u B_j -> Y_j u C_j}."""
    sets = [set(t.axes) for t in tensors]
    count: dict = {}
    for s in sets:
        for a in s:
            count[a] = count.get(a, 0) + 1
    if any(c > 2 for c in count.values()):
        return _report("chain", np.nan, np.nan, False, "an index appears in more than two factors")
    A = {a for a, c in count.items() if c == 1}
    if set(X) | set(Y) != A or set(X) & set(Y):
        return _report("chain", np.nan, np.nan, False, "(X, Y) is not a partition of A")
    H = semi_products(tensors)
    lhs = partition_norm(H, X, Y)
    Bs, Cs = chain_sets(sets)
    rhs = 1.0
    for t, s, Bj, Cj in zip(tensors, sets, Bs, Cs):
        src = [a for a in t.axes if a in (set(X) & s) | Bj]
        dst = [a for a in t.axes if a in (set(Y) & s) | Cj]
        rhs *= partition_norm(t, src, dst)
    return _report("chain", lhs, rhs)


def check_matrix_merge(H: LabeledTensor, mats, src) -> MergeReport:
    """Contract H_{k_1..k_r} with matrices h_j(k_j, k'_j), j <= q, and compare
    ||.||_{A'->B'} with ||H||_{A->B} prod ||h_j||_{k_j -> k'_j}.

    ``mats`` lists LabeledTensors with axes (k_j, k'_j) whose first axis is an
    axis of H; ``src`` is the set A (the rest of H's axes form B).
    """
    src = set(src)
    if not src <= set(H.axes):
        return _report("matrices", np.nan, np.nan, False, "A must be a subset of H's axes")
    firsts = [m.axes[0] for m in mats]
    if len(set(firsts)) != len(firsts) or not set(firsts) <= set(H.axes) or \
            any(len(m.axes) != 2 or m.axes[1] in H.axes for m in mats):
        return _report("matrices", np.nan, np.nan, False, "matrices must pair distinct axes of H")
    out = semi_products([H] + list(mats))
    rename = {m.axes[0]: m.axes[1] for m in mats}
    A2 = [rename.get(a, a) for a in H.axes if a in src]
    B2 = [rename.get(a, a) for a in H.axes if a not in src]
    lhs = partition_norm(out, A2, B2)
    rhs = partition_norm(H, [a for a in H.axes if a in src], [a for a in H.axes if a not in src])
    for m in mats:
        rhs *= partition_norm(m, [m.axes[0]], [m.axes[1]])
    return _report("matrices", lhs, rhs)


def verify_merging(kind: str, *args) -> MergeReport:
    """Dispatch to the pair, chain or matrices merging check."""
    table = {"pair": check_pair_merge, "chain": check_chain_merge, "matrices": check_matrix_merge}
    if kind not in table:
        raise ValueError(f"unknown merging estimate {kind!r}")
    return table[kind](*args)


# ---------------------------------------------------------------- weighted bound

@dataclass
class WeightedReport:
    lhs: float
    rhs: float
    constant: float
    holds: bool

    @property
    def raw_ratio(self) -> float:
        return self.lhs / self.rhs if self.rhs > 0 else (0.0 if self.lhs == 0 else np.inf)


def _dist(P, Q):
    return np.sqrt(np.sum((P[:, None, :].astype(float) - Q[None, :, :]) ** 2, axis=-1))


def weighted_merge_check(h1: LabeledTensor, h2: LabeledTensor, L: float,
                         kappa_eff: float) -> WeightedReport:
    """||w(k-k'') h||_F against ||h1||_op ||w(k'-k'') h2||_F for h = h1 h2.

    Splitting each column of h2 into dyadic pieces of |k'-k''|/L gives the
    exact constant 3^kappa sqrt(J), J the number of pieces met by the ranges.
    """
    if kappa_eff > 8:
        raise ValueError("kappa_eff above 8 leaves the safe floating range")
    k, kp = h1.ranges[h1.axes[0]], h1.ranges[h1.axes[1]]
    if h2.axes[0] != h1.axes[1] or not np.array_equal(h2.ranges[h2.axes[0]], kp):
        raise ValueError("h2 must start on the second axis of h1")
    kpp = h2.ranges[h2.axes[1]]
    d1 = _dist(k, kp)
    if np.any((h1.values != 0) & (d1 > L)):
        raise ValueError("h1 is not supported in |k - k'| <= L")
    h = h1.values @ h2.values
    w = (1.0 + _dist(k, kpp) / L) ** kappa_eff
    w2 = (1.0 + _dist(kp, kpp) / L) ** kappa_eff
    lhs = float(np.linalg.norm(w * h))
    rhs = matrix_op_norm(h1.values) * float(np.linalg.norm(w2 * h2.values))
    dmax = float(_dist(kp, kpp).max()) if kp.size and kpp.size else 0.0
    J = 1 + (int(np.ceil(np.log2(dmax / L))) if dmax > L else 0)
    C = 3.0 ** kappa_eff * np.sqrt(J)
    return WeightedReport(lhs, rhs, float(C), bool(lhs <= C * rhs * (1 + SLACK) + 1e-300))


# ---------------------------------------------------------------- random instances

def _ranges(rng, n, box=3, dim=3):
    """n distinct integer vectors in [-box, box]^dim."""
    side = 2 * box + 1
    flat = rng.choice(side ** dim, size=n, replace=False)
    return np.stack(np.unravel_index(flat, (side,) * dim), axis=-1) - box


def _gaussian(rng, shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def _random_tensor(rng, axes, sizes, ranges):
    return LabeledTensor(tuple(axes), {a: ranges[a] for a in axes},
                         _gaussian(rng, tuple(sizes[a] for a in axes)))


def _split(rng, names):
    names = list(names)
    mask = rng.random(len(names)) < 0.5
    return [a for a, m in zip(names, mask) if m], [a for a, m in zip(names, mask) if not m]


def random_instance(kind: str, rng, max_size: int = 6):
    """Arguments for ``verify_merging(kind, ...)`` with Gaussian entries."""
    names = list("abcdef")
    sizes = {a: int(rng.integers(1, max_size + 1)) for a in names}
    ranges = {a: _ranges(rng, sizes[a]) for a in names}
    if kind == "pair":
        while True:
            A1 = [a for a in names[:5] if rng.random() < 0.55]
            A2 = [a for a in names[:5] if rng.random() < 0.55]
            if A1 and A2 and np.prod([sizes[a] for a in set(A1) | set(A2)]) <= 20000:
                break
        h1 = _random_tensor(rng, A1, sizes, ranges)
        h2 = _random_tensor(rng, A2, sizes, ranges)
        X, Y = _split(rng, [a for a in names if (a in A1) != (a in A2)])
        return h1, h2, X, Y
    if kind == "chain":
        m = int(rng.integers(2, 5))
        while True:
            sets = [[] for _ in range(m)]
            for a in names:
                owners = rng.choice(m, size=int(rng.integers(1, 3)), replace=False)
                for o in owners:
                    sets[o].append(a)
            if all(sets) and max(np.prod([sizes[a] for a in s]) for s in sets) <= 20000:
                break
        tensors = [_random_tensor(rng, s, sizes, ranges) for s in sets]
        free = [a for a in names if sum(a in s for s in sets) == 1]
        X, Y = _split(rng, free)
        return tensors, X, Y
    if kind == "matrices":
        r = int(rng.integers(1, 4))
        q = int(rng.integers(1, r + 1))
        ks = names[:r]
        H = _random_tensor(rng, ks, sizes, ranges)
        mats = []
        for j in range(q):
            prime = ks[j].upper()
            n = int(rng.integers(1, max_size + 1))
            rp = {ks[j]: ranges[ks[j]], prime: _ranges(rng, n)}
            mats.append(LabeledTensor((ks[j], prime), rp, _gaussian(rng, (sizes[ks[j]], n))))
        src, _ = _split(rng, ks)
        return H, mats, src
    raise ValueError(f"unknown merging estimate {kind!r}")


def random_weighted_instance(rng, max_size: int = 16):
    L = float(rng.integers(1, 4))
    kappa = float(rng.choice([1, 2, 4]))
    n, m, p = (int(x) for x in rng.integers(2, max_size + 1, size=3))
    k, kp, kpp = _ranges(rng, n), _ranges(rng, m), _ranges(rng, p)
    v1 = _gaussian(rng, (n, m)) * (_dist(k, kp) <= L)
    h1 = LabeledTensor(("k", "k1"), {"k": k, "k1": kp}, v1)
    h2 = LabeledTensor(("k1", "k2"), {"k1": kp, "k2": kpp}, _gaussian(rng, (m, p)))
    return h1, h2, L, kappa


@dataclass
class CheckSummary:
    prop: str
    trials: int
    violations: int
    max_ratio: float
    quantiles: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def run_merging_trials(kind: str, trials: int, seed: int) -> CheckSummary:
    rng = np.random.Generator(np.random.Philox(key=seed))
    ratios, bad = [], 0
    for _ in range(trials):
        rep = verify_merging(kind, *random_instance(kind, rng))
        if not rep.hypothesis_ok:
            raise RuntimeError(f"generator produced an invalid {kind} instance: {rep.note}")
        bad += not rep.holds
        ratios.append(rep.ratio)
    r = np.array(ratios)
    return CheckSummary(kind, trials, bad, float(np.max(r)),
                        {q: float(np.quantile(r, q)) for q in (0.5, 0.99)})


def run_weighted_trials(trials: int, seed: int) -> CheckSummary:
    rng = np.random.Generator(np.random.Philox(key=seed))
    raw, bad, raw_bad = [], 0, 0
    for _ in range(trials):
        rep = weighted_merge_check(*random_weighted_instance(rng))
        bad += not rep.holds
        raw_bad += rep.lhs > rep.rhs * (1 + SLACK)
        raw.append(rep.raw_ratio)
    r = np.array(raw)
    return CheckSummary("weighted", trials, bad, float(np.max(r)),
                        {q: float(np.quantile(r, q)) for q in (0.5, 0.99)},
                        {"constant_one_violations": int(raw_bad)})


# ---------------------------------------------------------------- Gaussian contraction

def _line(M: int) -> np.ndarray:
    x = np.arange(-M, M + 1)
    return np.stack([x, np.zeros_like(x), np.zeros_like(x)], axis=-1)


def contraction_family(M: int, family: str, rng) -> tuple[LabeledTensor, tuple]:
    """Test tensor h_{b c k1 k2} on lines of length 2M+1 with signs (+, -).

    The support avoids k1 = k2, so no pairing occurs in k_A. ``gaussian``
    fills it with i.i.d. entries, ``convolution`` keeps only b - c = k1 - k2.
    """
    pts = _line(M)
    n = len(pts)
    vals = _gaussian(rng, (n, n, n, n)) / np.sqrt(2.0)
    idx = np.arange(n)
    vals[:, :, idx, idx] = 0.0
    if family == "convolution":
        b, c, k1, k2 = np.meshgrid(idx, idx, idx, idx, indexing="ij", sparse=True)
        vals = np.where(b - c == k1 - k2, vals, 0.0)
    elif family != "gaussian":
        raise ValueError(f"unknown family {family!r}")
    h = LabeledTensor(("b", "c", "k1", "k2"), {a: pts for a in ("b", "c", "k1", "k2")}, vals)
    return h, (1, -1)


def contraction_denominator(h: LabeledTensor, b="b", c="c") -> float:
    """max over partitions (B, C) of k_A of ||h||_{b k_B -> c k_C}."""
    kA = [a for a in h.axes if a not in (b, c)]
    best = 0.0
    for r in range(len(kA) + 1):
        for B in itertools.combinations(kA, r):
            C = [a for a in kA if a not in B]
            best = max(best, partition_norm(h, [b, *B], [c, *C]))
    return best


def gaussian_contraction_check(h: LabeledTensor, signs, trials: int, seed: int,
                               b: str = "b", c: str = "c") -> CheckSummary:
    """Ratios ||sum_{k_A} h prod eta^{+-}||_{b->c} / max_(B,C) ||h||_{b k_B -> c k_C}."""
    kA = [a for a in h.axes if a not in (b, c)]
    if len(signs) != len(kA):
        raise ValueError("one sign per contracted axis")
    ranges = [h.ranges[a] for a in kA]
    union = np.unique(np.concatenate(ranges), axis=0)
    pos = [np.array([np.flatnonzero((union == v).all(1))[0] for v in r]) for r in ranges]
    denom = contraction_denominator(h, b, c)
    rng = np.random.Generator(np.random.Philox(key=seed))
    ratios = np.zeros(trials)
    mat = np.moveaxis(h.values, [h.axes.index(b), h.axes.index(c)], [0, 1])
    for t in range(trials):
        eta = _gaussian(rng, len(union)) / np.sqrt(2.0)
        H = mat
        for p, s in zip(pos, signs):
            e = eta[p] if s > 0 else np.conj(eta[p])
            H = np.tensordot(H, e, axes=([2], [0]))
        ratios[t] = matrix_op_norm(H.T) / denom if denom > 0 else 0.0
    return CheckSummary("contraction", trials, 0, float(ratios.max()),
                        {q: float(np.quantile(ratios, q)) for q in (0.5, 0.9, 0.99)},
                        {"denominator": denom})


def contraction_growth(scales=(8, 16), trials: int = 500, seed: int = 0,
                       family: str = "gaussian", q: float = 0.99) -> dict:
    """Quantile of the Gaussian contraction ratio at two scales and its growth."""
    out = {}
    for j, M in enumerate(scales):
        rng = np.random.Generator(np.random.Philox(key=[seed, M]))
        h, signs = contraction_family(M, family, rng)
        rep = gaussian_contraction_check(h, signs, trials, seed + 1000 * (j + 1))
        out[M] = rep.quantiles[q]
    M0, M1 = scales
    growth = out[M1] / out[M0]
    return {"quantiles": out, "growth": growth, "limit": (M1 / M0) ** 0.5,
            "holds": bool(growth < (M1 / M0) ** 0.5)}
