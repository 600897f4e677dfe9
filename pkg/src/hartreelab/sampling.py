"""Gaussian free field draws and a pCN Markov chain for the truncated Gibbs measure.

A single draw g(seed) is one realisation of the whole field: complex
normals are generated layer by layer in |k|_inf (lexicographic inside a
layer), so the coefficient g_k depends only on (seed, k) and the field at
scale L is exactly the truncation of the field at any N >= L.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable

import numpy as np

from .lattice import FourierState, check_dyadic, mode_set
from .potential import Potential
from .renorm import RenormConstants, potential_energy


@lru_cache(maxsize=None)
def _layer_order(radius: int) -> dict:
    """Position in the layered stream of every k with |k|_inf <= radius."""
    r = np.arange(-radius, radius + 1)
    pts = np.stack(np.meshgrid(r, r, r, indexing="ij"), axis=-1).reshape(-1, 3)
    layer = np.abs(pts).max(axis=1)
    order = np.lexsort((pts[:, 2], pts[:, 1], pts[:, 0], layer))
    pts = pts[order]
    return {tuple(int(c) for c in p): j for j, p in enumerate(pts)}


@lru_cache(maxsize=None)
def _stream_positions(N: int) -> np.ndarray:
    ms = mode_set(N)
    table = _layer_order(ms.kmax)
    return np.array([table[tuple(int(c) for c in k)] for k in ms.modes], dtype=np.int64)


def _stream_length(N: int) -> int:
    return (2 * mode_set(N).kmax + 1) ** 3


@dataclass(frozen=True)
class GaussianDraw:
    """i.i.d. complex normals g_k (E g = 0, E|g|^2 = 1, E g^2 = 0) keyed by (seed, k)."""

    seed: int

    def on(self, N: int) -> np.ndarray:
        N = check_dyadic(N)
        if N == 0:
            return np.zeros(0, dtype=np.complex128)
        n = _stream_length(N)
        z = np.random.Generator(np.random.Philox(key=self.seed)).standard_normal(2 * n)
        g = (z[0::2] + 1j * z[1::2]) / np.sqrt(2.0)
        return g[_stream_positions(N)]

    def field(self, N: int) -> FourierState:
        """f_N with coefficients g_k / <k>."""
        ms = mode_set(N)
        return FourierState(ms, self.on(N) / ms.brackets)

    def annulus_field(self, N: int) -> FourierState:
        """F_N = Delta_N f = f_N - f_{N/2}."""
        f = self.field(N)
        return FourierState(f.mode_set, np.where(f.mode_set.mask(N, "delta"), f.coeffs, 0))


def draw_gff(N: int, seed: int) -> FourierState:
    """One draw of f_N (law rho_N)."""
    return GaussianDraw(seed).field(N)


def gff_ensemble(N: int, n: int, rng) -> np.ndarray:
    """n independent rho_N draws as an (n, modes) array from a Generator or seed."""
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    ms = mode_set(N)
    z = rng.standard_normal((n, ms.size, 2))
    return (z[..., 0] + 1j * z[..., 1]) / np.sqrt(2.0) / ms.brackets


EnergyFn = Callable[[np.ndarray], np.ndarray]


def gibbs_energy(R: RenormConstants, P: Potential) -> EnergyFn:
    return lambda x: np.asarray(potential_energy(x, R, P))


@dataclass
class GibbsChain:
    """State of one pCN chain; ``rng`` is advanced in place by each step."""

    current: FourierState
    step: float
    energy: float
    accept_count: int = 0
    total_count: int = 0
    rng: np.random.Generator = field(default_factory=np.random.default_rng, repr=False)
    energy_fn: EnergyFn | None = field(default=None, repr=False)

    @property
    def acceptance_rate(self) -> float:
        return self.accept_count / self.total_count if self.total_count else float("nan")


def start_chain(u0: FourierState, step: float, seed: int, R: RenormConstants, P: Potential,
                energy_fn: EnergyFn | None = None) -> GibbsChain:
    fn = energy_fn or gibbs_energy(R, P)
    return GibbsChain(u0, step, float(fn(u0.coeffs)), rng=np.random.default_rng(seed),
                      energy_fn=energy_fn)


def _pcn_batch(x, energy, s, rng, energy_fn, brackets):
    """One pCN move for a batch of chains; returns (x, energy, accepted)."""
    z = rng.standard_normal(x.shape + (2,))
    xi = (z[..., 0] + 1j * z[..., 1]) / np.sqrt(2.0) / brackets
    prop = np.sqrt(1.0 - s * s) * x + s * xi
    e_prop = np.asarray(energy_fn(prop), dtype=float)
    log_u = np.log(rng.random(np.shape(energy)))
    accept = log_u < (energy - e_prop)
    x = np.where(accept[..., None], prop, x)
    energy = np.where(accept, e_prop, energy)
    return x, energy, accept


def pcn_step(chain: GibbsChain, R: RenormConstants, P: Potential) -> GibbsChain:
    """Preconditioned Crank-Nicolson move targeting exp(-H_pot) d rho_N."""
    if not 0 < chain.step <= 1:
        raise ValueError("pCN step must lie in (0, 1]")
    fn = chain.energy_fn or gibbs_energy(R, P)
    ms = chain.current.mode_set
    x, e, acc = _pcn_batch(chain.current.coeffs[None], np.array([chain.energy]), chain.step,
                           chain.rng, fn, ms.brackets)
    return replace(chain, current=FourierState(ms, x[0]), energy=float(e[0]),
                   accept_count=chain.accept_count + int(acc[0]),
                   total_count=chain.total_count + 1)


@dataclass
class GibbsEnsemble:
    N: int
    seed: int
    states: np.ndarray            # (n_samples, modes), chain-major
    n_chains: int
    acceptance_rate: float
    energy_trace: np.ndarray      # (steps, chains), post burn-in
    step: float

    def to_jsonl(self, path) -> None:
        write_ensemble(path, self.N, self.seed, self.states)


def sample_gibbs(N: int, n_samples: int, burn_in: int = 0, thinning: int = 1, s: float = 0.3,
                 seed: int = 0, P: Potential | None = None, R: RenormConstants | None = None,
                 n_chains: int = 1, energy_fn: EnergyFn | None = None,
                 tune: bool = False, target=(0.2, 0.5)) -> GibbsEnsemble:
    """Thinned post-burn-in states of ``n_chains`` independent pCN chains.

    Chains start from independent rho_N draws. With ``tune`` the step is
    adapted during burn-in only (every 50 steps, towards the ``target``
    acceptance band) and then frozen.
    """
    from .renorm import renorm_constants

    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    if not 0 < s <= 1:
        raise ValueError("pCN step must lie in (0, 1]")
    if energy_fn is None:
        if P is None:
            raise ValueError("either a potential or an energy function is required")
        R = R or renorm_constants(N, P)
        energy_fn = gibbs_energy(R, P)
    ms = mode_set(N)
    rng = np.random.Generator(np.random.Philox(key=seed))
    x = gff_ensemble(N, n_chains, rng)
    e = np.asarray(energy_fn(x), dtype=float)

    window_acc, window_len = 0, 0
    for it in range(burn_in):
        x, e, acc = _pcn_batch(x, e, s, rng, energy_fn, ms.brackets)
        if tune:
            window_acc += int(acc.sum())
            window_len += acc.size
            if window_len >= 50 * n_chains:
                rate = window_acc / window_len
                if rate < target[0]:
                    s = max(s * 0.7, 1e-4)
                elif rate > target[1]:
                    s = min(s * 1.3, 1.0)
                window_acc, window_len = 0, 0

    per_chain = -(-n_samples // n_chains)
    out = np.empty((n_chains, per_chain, ms.size), dtype=np.complex128)
    trace = np.empty((per_chain * thinning, n_chains))
    accepted = 0
    step_no = 0
    for j in range(per_chain):
        for _ in range(thinning):
            x, e, acc = _pcn_batch(x, e, s, rng, energy_fn, ms.brackets)
            accepted += int(acc.sum())
            trace[step_no] = e
            step_no += 1
        out[:, j] = x
    states = out.reshape(-1, ms.size)[:n_samples]
    rate = accepted / (step_no * n_chains)
    return GibbsEnsemble(N, seed, states, n_chains, rate, trace, s)


def write_ensemble(path, N: int, seed, states) -> None:
    """One JSON line per state; ``seed`` is shared or given per state."""
    ms = mode_set(N)
    states = np.atleast_2d(states)
    seeds = [seed] * len(states) if np.isscalar(seed) else list(seed)
    with open(path, "w") as fh:
        for seed, x in zip(seeds, states):
            coeffs = [[int(k[0]), int(k[1]), int(k[2]), float(c.real), float(c.imag)]
                      for k, c in zip(ms.modes, x)]
            fh.write(json.dumps({"N": N, "seed": seed, "coeffs": coeffs}) + "\n")


def read_ensemble(path) -> tuple[int, list[int], np.ndarray]:
    Ns, seeds, rows = set(), [], []
    with open(path) as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            ms = mode_set(rec["N"])
            x = np.zeros(ms.size, dtype=np.complex128)
            for kx, ky, kz, re, im in rec["coeffs"]:
                x[ms.position((kx, ky, kz))] = re + 1j * im
            Ns.add(rec["N"])
            seeds.append(rec["seed"])
            rows.append(x)
    if len(Ns) != 1:
        raise ValueError("ensemble file mixes scales")
    return Ns.pop(), seeds, np.array(rows)
