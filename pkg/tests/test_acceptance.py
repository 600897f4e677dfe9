"""Acceptance suite: one pass/fail line per criterion at pinned tolerances.

Run with ``pytest -m slow tests/test_acceptance.py -s``; the lines are printed in
the terminal summary.
"""
import json
import time

import numpy as np
import pytest

from conftest import record
from hartreelab.counting import BOUND_IDS, verify_counting_bounds
from hartreelab.experiments import (
    run_ansatz_build, run_conservation, run_invariance_test, run_residual_order, run_scaling,
    run_unitarity, run_unitarity_order, run_wick_check,
)
from hartreelab.tensorlab import contraction_growth, run_merging_trials, run_weighted_trials

pytestmark = pytest.mark.slow

SEED = 0


# ---------------------------------------------------------------- 1 unitarity

def test_criterion_1_unitarity():
    t0 = time.perf_counter()
    res = {N: run_unitarity(N, T=0.5, dt=1e-3, master_seed=SEED) for N in (2, 4)}
    orders = {N: run_unitarity_order(N, master_seed=SEED) for N in (2, 4)}
    worst = max(r["max"] for r in res.values())
    min_ratio = min(o["min_ratio"] for o in orders.values())
    ok = worst <= 1e-6 and min_ratio >= 12
    record(1, ok, f"max defect {worst:.2e} (<= 1e-6), min halving ratio {min_ratio:.1f} "
                  f"(>= 12, rk4 expects 16-32), {time.perf_counter() - t0:.0f}s")
    assert ok


# ---------------------------------------------------------------- 2 conservation

def test_criterion_2_conservation():
    r = run_conservation(N=2, T=1.0, dt=1e-3, n_seeds=20, master_seed=SEED)
    ok = r["max_mass_drift"] <= 1e-6 and r["max_hamiltonian_drift"] <= 1e-5
    record(2, ok, f"mass drift {r['max_mass_drift']:.2e} (<= 1e-6), "
                  f"H drift {r['max_hamiltonian_drift']:.2e} (<= 1e-5), 20 seeds")
    assert ok


# ---------------------------------------------------------------- 3 invariance

def test_criterion_3_gibbs_invariance():
    rep = run_invariance_test(N=2, T=1.0, n_samples=2000, master_seed=SEED)
    control = run_invariance_test(N=2, T=0.0, n_samples=2000, master_seed=SEED)
    zeros = all(v == 0.0 for v in control.z_scores.values())
    ok = rep.max_abs_z <= 3.0 and zeros and len(rep.z_scores) == 5
    record(3, ok, f"max |z| {rep.max_abs_z:.2f} (<= 3) over {sorted(rep.z_scores)}, "
                  f"T=0 control exact zeros: {zeros}, {rep.seconds:.0f}s")
    assert ok


# ---------------------------------------------------------------- 4 Wick oracle

def test_criterion_4_wick_oracle():
    reps = {N: run_wick_check(N, 100_000, master_seed=SEED) for N in (1, 2, 4)}
    zmax = max(abs(m["z"]) for r in reps.values() for m in r["moments"].values())
    ok = all(r["passed"] for r in reps.values())
    record(4, ok, f"max |z| {zmax:.2f} (<= 3) for mass, multiplier, quartic at N=1,2,4")
    assert ok


# ---------------------------------------------------------------- 5 ansatz

def test_criterion_5_ansatz():
    builds = {N: run_ansatz_build(N, T=0.25, dt=1e-3, master_seed=SEED) for N in (2, 4)}
    ident = max(max(b["identities"].values()) for b in builds.values())
    tele = max(b["telescoping"] for b in builds.values())
    order = run_residual_order(2, master_seed=SEED)
    simpson, trap = order["orders"]["simpson"], order["orders"]["trapezoid"]
    ok = ident <= 1e-12 and tele <= 1e-10 and min(simpson) >= 2
    record(5, ok, f"identities {ident:.1e} (<= 1e-12), telescoping {tele:.1e} (<= 1e-10), "
                  f"residual order {min(simpson):.2f} simpson / {min(trap):.2f} trapezoid (>= 2)")
    assert ok


# ---------------------------------------------------------------- 6 counting

@pytest.fixture(scope="module")
def counting():
    t0 = time.perf_counter()
    rep = verify_counting_bounds(scales=(2, 4, 8), H=32)
    return rep, time.perf_counter() - t0


def test_criterion_6_counting_other_families(counting):
    rep, secs = counting
    growth = {b: rep.max_ratio[b][8] / rep.max_ratio[b][2] for b in BOUND_IDS}
    record(6, rep.uniform_all,
           f"failing {rep.failing or 'none'}; growth N=8/N=2 "
           + ", ".join(f"{b} {g:.1f}" for b, g in growth.items()) + f" (<= 4), {secs:.0f}s")
    assert rep.finite
    assert set(rep.failing) <= {"S_kk3", "S_k1k2"}
    assert rep.uniform["S_kk3_planar"] and rep.uniform["S_k1k2_planar"]


@pytest.mark.xfail(strict=True, reason="pinned (k, k3) and (k1, k2) slices are lattice planes "
                                       "whose size grows like the free shell squared")
def test_criterion_6_uniform_all(counting):
    assert counting[0].uniform_all


# ---------------------------------------------------------------- 7 tensors

def test_criterion_7_tensor_inequalities():
    merges = {k: run_merging_trials(k, 10_000, SEED) for k in ("pair", "chain", "matrices")}
    weighted = run_weighted_trials(10_000, SEED)
    growth = {f: contraction_growth((8, 16), 500, SEED, family=f)
              for f in ("gaussian", "convolution")}
    bad = sum(m.violations for m in merges.values()) + weighted.violations
    ok = bad == 0 and all(g["holds"] for g in growth.values())
    record(7, ok, f"violations {bad} over 4 x 1e4 instances; contraction growth "
                  + ", ".join(f"{f} {g['growth']:.2f}" for f, g in growth.items())
                  + f" (< {2 ** 0.5:.3f})")
    assert ok


# ---------------------------------------------------------------- 8 scaling

@pytest.fixture(scope="module")
def scaling():
    return run_scaling((2, 4, 8), n_seeds=50, master_seed=SEED)


def test_criterion_8_F_slope(scaling):
    rep = scaling
    ok = rep.F_fit["within"] and rep.ratio_decreasing
    ratios = ", ".join(f"N={N} {r:.3f}" for N, r in rep.ratio.items())
    record(8, ok, f"rho/psi median ratio {ratios} (strictly decreasing: "
                  f"{rep.ratio_decreasing}); F slope {rep.F_fit['slope']:.3f} in [0.6, 1.2]")
    assert rep.F_fit["within"] and rep.F_oracle_fit["within"]


@pytest.mark.xfail(strict=True, reason="rho^N does not shrink relative to psi^N at the "
                                       "reachable scales N <= 8")
def test_criterion_8_ratio_decreasing(scaling):
    assert scaling.ratio_decreasing


# ---------------------------------------------------------------- 9 determinism

def _strip(obj):
    if isinstance(obj, dict):
        return {k: _strip(v) for k, v in obj.items() if k not in ("seconds", "bundle")}
    if isinstance(obj, (list, tuple)):
        return [_strip(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tobytes().hex()
    return obj


def _reduced_suites():
    out = {
        "unitarity": run_unitarity(2, T=0.05, dt=1e-2, master_seed=SEED),
        "conservation": run_conservation(2, T=0.05, dt=1e-2, n_seeds=2, master_seed=SEED),
        "invariance": run_invariance_test(2, T=0.05, dt=1e-2, n_samples=100, n_chains=10,
                                          burn_in=10, thinning=2, master_seed=SEED).to_dict(),
        "wick": run_wick_check(2, 2000, master_seed=SEED),
        "ansatz": run_ansatz_build(2, T=0.05, dt=1e-2, master_seed=SEED),
        "counting": verify_counting_bounds(scales=(2, 4), H=8).to_dict(),
        "tensors": [run_merging_trials(k, 30, SEED).to_dict() for k in ("pair", "chain", "matrices")]
                   + [run_weighted_trials(30, SEED).to_dict(),
                      contraction_growth((4, 8), 20, SEED)],
        "scaling": run_scaling((2, 4, 8), n_seeds=2, T=0.02, dt=0.01, master_seed=SEED).to_dict(),
    }
    return json.dumps(_strip(out), sort_keys=True, default=repr)


def test_criterion_9_determinism():
    a, b = _reduced_suites(), _reduced_suites()
    ok = a == b
    record(9, ok, f"reduced suites 1-8 run twice, {len(a)} bytes of output, identical: {ok}")
    assert ok
