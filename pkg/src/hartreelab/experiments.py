"""Experiment drivers shared by the command line and the acceptance suite.

Every random stream is derived from one master seed along a named path
(experiment -> role -> index), so any piece can be re-run on its own.
"""
from __future__ import annotations

import platform
import time
import zlib
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .analysis import NormReport, exponent_fit, expected_sobolev_sq, sobolev_norm
from .dynamics import build_profiles, evolve, evolve_array, integral_equation_residual
from .kernels import backend
from .lattice import mode_set
from .params import ParamSet
from .potential import Potential, make_bessel_potential
from .rao import build_H, build_M, build_ansatz, dyadic_matrix_difference, unitarity_defect
from .renorm import (gaussian_expectation_oracle, mass, multiplier_term, potential_energy,
                     quartic_energy, renorm_constants)
from .sampling import GaussianDraw, gff_ensemble, sample_gibbs


def derive_seed(master: int, *path) -> int:
    """64-bit seed for a node of the derivation tree below ``master``."""
    key = tuple(zlib.crc32(p.encode()) if isinstance(p, str) else int(p) for p in path)
    ss = np.random.SeedSequence(int(master), spawn_key=key)
    return int(ss.generate_state(1, np.uint64)[0])


def versions() -> dict:
    import scipy
    return {"hartreelab": __version__, "python": platform.python_version(),
            "numpy": np.__version__, "scipy": scipy.__version__, "kernels": backend}


def manifest(command: str, config: dict, master_seed: int, seeds: dict | None = None) -> dict:
    return {"command": command, "config": config, "master_seed": master_seed,
            "seeds": seeds or {}, "versions": versions()}


# ---------------------------------------------------------------- invariance

def shell_masses(x: np.ndarray, N: int, shells) -> np.ndarray:
    """sum over |k|^2 = s of |u_k|^2 for each s in ``shells``; x is (..., n)."""
    n2 = mode_set(N).norm2
    a2 = np.abs(x) ** 2
    return np.stack([a2[..., n2 == s].sum(axis=-1) for s in shells], axis=-1)


def observables(x, N: int, R, P, shells) -> dict:
    obs = {"mass": np.asarray(mass(x)), "H_pot": np.asarray(potential_energy(x, R, P))}
    sm = shell_masses(x, N, shells)
    for j, s in enumerate(shells):
        obs[f"shell_{s}"] = sm[..., j]
    return obs


def _chain_z(before: np.ndarray, after: np.ndarray, n_chains: int) -> float:
    """Unpaired z of the mean change, with errors from independent chain means."""
    diff = float(np.mean(after) - np.mean(before))
    if diff == 0.0:
        return 0.0
    b = before.reshape(n_chains, -1).mean(axis=1)
    a = after.reshape(n_chains, -1).mean(axis=1)
    se = np.sqrt(np.var(b, ddof=1) / n_chains + np.var(a, ddof=1) / n_chains)
    return diff / se


@dataclass
class InvarianceReport:
    N: int
    T: float
    n_samples: int
    acceptance_rate: float
    z_scores: dict
    means_before: dict
    means_after: dict
    max_abs_z: float
    passed: bool
    seconds: float

    def to_dict(self) -> dict:
        return asdict(self)


def run_invariance_test(N: int = 2, T: float = 1.0, dt: float = 1e-3, n_samples: int = 2000,
                        n_chains: int = 100, burn_in: int = 200, thinning: int = 10,
                        s: float = 0.3, master_seed: int = 0, beta: float = 0.99,
                        shells=(1, 2, 3), P: Potential | None = None, R=None,
                        energy_fn=None, z_max: float = 3.0) -> InvarianceReport:
    """Sample the truncated Gibbs measure, flow every sample to T and compare means."""
    t0 = time.perf_counter()
    P = P or make_bessel_potential(beta, max(N, 1))
    R = R or renorm_constants(N, P)
    if n_samples % n_chains:
        raise ValueError("n_samples must be a multiple of n_chains")
    ens = sample_gibbs(N, n_samples, burn_in, thinning, s, derive_seed(master_seed, "invariance",
                       "chains"), P, R, n_chains, energy_fn=energy_fn)
    x0 = ens.states
    if not np.all(np.isfinite(ens.energy_trace)):
        raise FloatingPointError("non-finite energy in the Gibbs chain")
    xT = x0 if T == 0 else evolve_array(x0, T, dt, R, P, frames="end")
    ob0 = observables(x0, N, R, P, shells)
    obT = observables(xT, N, R, P, shells)
    z = {k: _chain_z(ob0[k], obT[k], n_chains) for k in ob0}
    mz = max(abs(v) for v in z.values())
    return InvarianceReport(N, T, n_samples, ens.acceptance_rate, z,
                            {k: float(np.mean(v)) for k, v in ob0.items()},
                            {k: float(np.mean(v)) for k, v in obT.items()},
                            float(mz), bool(mz <= z_max), time.perf_counter() - t0)


# ---------------------------------------------------------------- Wick oracle

def run_wick_check(N: int, n_draws: int = 100_000, master_seed: int = 0, beta: float = 0.99,
                   chunk: int = 5000, n_se: float = 3.0) -> dict:
    """Monte Carlo means of the three Gaussian moments against the pairing oracle."""
    P = make_bessel_potential(beta, max(N, 1))
    R = renorm_constants(N, P)
    rng = np.random.Generator(np.random.Philox(key=derive_seed(master_seed, "wick", N)))
    sums = {k: [0.0, 0.0] for k in ("mass", "multiplier_term", "quartic")}
    done = 0
    while done < n_draws:
        x = gff_ensemble(N, min(chunk, n_draws - done), rng)
        for key, vals in (("mass", mass(x)), ("multiplier_term", multiplier_term(x, R)),
                          ("quartic", quartic_energy(x, P, N))):
            vals = np.atleast_1d(vals)
            sums[key][0] += float(np.sum(vals))
            sums[key][1] += float(np.sum(vals ** 2))
        done += x.shape[0]
    exact = gaussian_expectation_oracle(N, P).as_dict()
    out = {"N": N, "n_draws": n_draws, "moments": {}}
    for key, (s1, s2) in sums.items():
        mean = s1 / n_draws
        se = np.sqrt(max(s2 / n_draws - mean ** 2, 0.0) / (n_draws - 1))
        z = (mean - exact[key]) / se if se > 0 else 0.0
        out["moments"][key] = {"mc": mean, "exact": exact[key], "se": float(se), "z": float(z)}
    out["passed"] = all(abs(m["z"]) <= n_se for m in out["moments"].values())
    return out


# ---------------------------------------------------------------- unitarity

def _profiles_for(N, T, dt, master_seed, beta, tag):
    P = make_bessel_potential(beta, max(N, 1))
    hier = build_profiles(GaussianDraw(derive_seed(master_seed, tag, N)), N, T, dt, P)
    return P, hier


def run_unitarity(N: int, T: float = 0.5, dt: float = 1e-3, master_seed: int = 0,
                  beta: float = 0.99) -> dict:
    """Defects of H^{N,L} for every L <= N/2 and of M^N at step dt."""
    P, hier = _profiles_for(N, T, dt, master_seed, beta, "unitarity")
    out = {}
    L = 1
    while L <= N // 2:
        out[f"H_{L}"] = unitarity_defect(build_H(N, L, hier.profiles[L], dt, P))
        L *= 2
    out["M"] = unitarity_defect(build_M(N, hier.profiles[N // 2], hier.profiles[N], dt, P))
    return {"N": N, "T": T, "dt": dt, "defects": out, "max": max(out.values())}


def run_unitarity_order(N: int = 2, T: float = 0.5, steps=(0.05, 0.025, 0.0125),
                        master_seed: int = 0, beta: float = 0.99, floor: float = 1e-13) -> dict:
    """Defect against step size, all steps reading one profile grid of spacing min(steps).

    Operators whose defect stays below ``floor`` (H^{N,1} is exactly the identity)
    carry no order information and are left out of the ratios.
    """
    P, hier = _profiles_for(N, T, min(steps), master_seed, beta, "unitarity-order")
    vL, vHalf, vN = hier.profiles[N // 2], hier.profiles[N // 2], hier.profiles[N]
    rows = {"H": [], "M": []}
    for h in steps:
        rows["H"].append(unitarity_defect(build_H(N, N // 2, vL, h, P)))
        rows["M"].append(unitarity_defect(build_M(N, vHalf, vN, h, P)))
    ratios = {k: [a / b for a, b in zip(v, v[1:])] for k, v in rows.items()
              if max(v) > floor}
    return {"N": N, "steps": list(steps), "defects": rows, "ratios": ratios,
            "min_ratio": min(min(r) for r in ratios.values())}


# ---------------------------------------------------------------- residual order

def run_residual_order(N: int = 2, T: float = 0.5, steps=(0.01, 0.005, 0.0025),
                       master_seed: int = 0, beta: float = 0.99) -> dict:
    """Residual of the integral equation for y_N under dt refinement, both quadratures."""
    P = make_bessel_potential(beta, max(N, 1))
    draw = GaussianDraw(derive_seed(master_seed, "residual", N))
    res = {"trapezoid": [], "simpson": []}
    for dt in steps:
        hier = build_profiles(draw, N, T, dt, P)
        for q in res:
            res[q].append(integral_equation_residual(hier.y(N), hier.profiles[N],
                                                     hier.profiles[N // 2], None, P, quadrature=q))
    orders = {q: [float(np.log2(a / b)) for a, b in zip(v, v[1:])] for q, v in res.items()}
    return {"N": N, "T": T, "steps": list(steps), "residuals": res, "orders": orders}


# ---------------------------------------------------------------- conservation

def run_conservation(N: int = 2, T: float = 1.0, dt: float = 1e-3, n_seeds: int = 20,
                     master_seed: int = 0, beta: float = 0.99, method: str = "rk4") -> dict:
    P = make_bessel_potential(beta, max(N, 1))
    R = renorm_constants(N, P)
    from .dynamics import conservation_report

    rows = []
    for j in range(n_seeds):
        draw = GaussianDraw(derive_seed(master_seed, "conservation", j))
        rep = conservation_report(evolve(draw.field(N), T, dt, R, P, method), R, P)
        rows.append(rep.to_dict())
    return {"N": N, "T": T, "dt": dt, "runs": rows,
            "max_mass_drift": max(r["mass_drift"] for r in rows),
            "max_hamiltonian_drift": max(r["hamiltonian_drift"] for r in rows)}


# ---------------------------------------------------------------- ansatz

def run_ansatz_build(N: int = 2, T: float = 0.5, dt: float = 1e-3, master_seed: int = 0,
                     beta: float = 0.99, s: float = 0.4, params: ParamSet | None = None,
                     dense: bool | None = None) -> dict:
    """One-seed build of the profile hierarchy, the operators and the ansatz pieces."""
    params = params or ParamSet(beta=beta)
    P = make_bessel_potential(beta, max(N, 1))
    seed = derive_seed(master_seed, "ansatz", N)
    hier = build_profiles(GaussianDraw(seed), N, T, dt, P)
    bundle = build_ansatz(hier, N, P, params=params, dense=dense)
    out = {"N": N, "T": T, "dt": dt, "seed": seed, "identities": bundle.identity_defects()}
    if bundle.matrices:
        out["unitarity"] = {str(k): unitarity_defect(m) for k, m in bundle.matrices.items()}
        levels = sorted(k for k in bundle.matrices if k != "xi")
        total = None
        for L in levels:
            h = dyadic_matrix_difference(bundle.matrices[L],
                                         bundle.matrices[L // 2] if L > 1 else None)
            total = h.mats if total is None else total + h.mats
        eye = np.eye(total.shape[-1])
        out["telescoping"] = float(np.max(np.abs(total + eye - bundle.matrices[levels[-1]].mats)))
    out["residual"] = integral_equation_residual(hier.y(N), hier.profiles[N],
                                                 hier.profiles[N // 2], None, P)
    reports = [
        NormReport("F", N, "H^s", s, sobolev_norm(bundle.F, s), seed=seed),
        NormReport("psi", N, "H^s", s, float(np.max(sobolev_norm(bundle.psi.frames, s, N))),
                   L=N // 2, seed=seed),
        NormReport("rho", N, "H^s", s, float(np.max(sobolev_norm(bundle.rho.frames, s, N))),
                   seed=seed),
        NormReport("z", N, "H^s", s, float(np.max(sobolev_norm(bundle.z.frames, s, N))),
                   seed=seed),
    ]
    out["norms"] = [asdict(r) for r in reports]
    out["bundle"] = bundle
    return out


# ---------------------------------------------------------------- scaling

@dataclass
class ScalingReport:
    scales: tuple
    s: float
    medians: dict = field(default_factory=dict)
    ratio: dict = field(default_factory=dict)
    ratio_decreasing: bool = False
    F_fit: dict = field(default_factory=dict)
    F_oracle_fit: dict = field(default_factory=dict)
    rows: list = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("rows")
        return d


def run_scaling(scales=(2, 4, 8), n_seeds: int = 50, T: float = 0.25, dt: float = 0.005,
                s: float = 0.4, master_seed: int = 0, beta: float = 0.99,
                band=(0.6, 1.2)) -> ScalingReport:
    """Medians of sup_t ||psi^N||_{H^s}, sup_t ||rho^N||_{H^s} and ||F_N||_{H^s} over seeds."""
    P = make_bessel_potential(beta, max(scales))
    rows = []
    for j in range(n_seeds):
        draw = GaussianDraw(derive_seed(master_seed, "scaling", j))
        for N in scales:
            hier = build_profiles(draw, N, T, dt, P)
            b = build_ansatz(hier, N, P, dense=False)
            rows.append(NormReport("F", N, "H^s", s, sobolev_norm(b.F, s), seed=j))
            rows.append(NormReport("psi", N, "H^s", s,
                                   float(np.max(sobolev_norm(b.psi.frames, s, N))), seed=j))
            rows.append(NormReport("rho", N, "H^s", s,
                                   float(np.max(sobolev_norm(b.rho.frames, s, N))), seed=j))
    rep = ScalingReport(tuple(scales), s, rows=rows)
    for lab in ("F", "psi", "rho"):
        rep.medians[lab] = {N: float(np.median([r.value for r in rows
                                                if r.label == lab and r.N == N])) for N in scales}
    rep.ratio = {N: rep.medians["rho"][N] / rep.medians["psi"][N] for N in scales}
    vals = [rep.ratio[N] for N in scales]
    rep.ratio_decreasing = bool(all(b < a for a, b in zip(vals, vals[1:])))
    fit = exponent_fit([(N, rep.medians["F"][N]) for N in scales])
    oracle = exponent_fit([(N, np.sqrt(expected_sobolev_sq(N, s))) for N in scales])
    rep.F_fit = {"slope": fit.slope, "band": list(fit.band),
                 "within": bool(band[0] <= fit.slope <= band[1])}
    rep.F_oracle_fit = {"slope": oracle.slope, "within": bool(band[0] <= oracle.slope <= band[1])}
    return rep
