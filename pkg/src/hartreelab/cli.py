"""Command line entry point: ``hartreelab <command> [--config FILE] [flags]``.

A YAML config holds top-level ``seed``, ``beta``, ``out``, an optional
``params`` record and one section per command. Flags win over the file.
Exit codes: 0 pass, 1 property violation, 2 config error, 3 budget exceeded.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np
import yaml

from .params import ParameterError, ParamSet

EXIT_OK, EXIT_VIOLATION, EXIT_CONFIG, EXIT_BUDGET = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


def _ints(text):
    return [int(x) for x in str(text).split(",") if x != ""]


# command -> {key: (type, default, help)}
COMMANDS = {
    "gff": {"N": (int, 2, "dyadic scale"), "n": (int, 1, "number of draws")},
    "gibbs": {"N": (int, 2, "dyadic scale"), "samples": (int, 2000, "retained samples"),
              "burn_in": (int, 200, "burn-in moves per chain"),
              "thinning": (int, 10, "moves between retained samples"),
              "step": (float, 0.3, "pCN step s"), "chains": (int, 100, "independent chains"),
              "tune": (bool, False, "adapt the step during burn-in")},
    "evolve": {"N": (int, 2, "dyadic scale"), "T": (float, 1.0, "final time"),
               "dt": (float, 1e-3, "time step"), "method": (str, "rk4", "rk4 or strang"),
               "dump_traj": (str, None, "binary trajectory dump path")},
    "invariance": {"N": (int, 2, "dyadic scale"), "T": (float, 1.0, "final time"),
                   "dt": (float, 1e-3, "time step"), "samples": (int, 2000, "Gibbs samples"),
                   "chains": (int, 100, "independent chains"),
                   "burn_in": (int, 200, "burn-in moves per chain"),
                   "thinning": (int, 10, "moves between retained samples"),
                   "step": (float, 0.3, "pCN step s"), "z_max": (float, 3.0, "z-score tolerance")},
    "ansatz": {"N": (int, 2, "dyadic scale"), "T": (float, 0.5, "final time"),
               "dt": (float, 1e-3, "time step"), "s": (float, 0.4, "Sobolev index"),
               "unitarity_tol": (float, 1e-6, "unitarity defect tolerance"),
               "dump_rao": (str, None, "directory for matrix dumps")},
    "verify-tensors": {"trials": (int, 10000, "instances per merging estimate"),
                       "weighted_trials": (int, 1000, "weighted-bound instances"),
                       "contraction_trials": (int, 500, "Gaussian contraction trials")},
    "verify-counting": {"scales": (_ints, [2, 4, 8], "comma separated dyadic scales"),
                        "theta": (float, 0.1, "exponent slack"),
                        "budget_factor": (float, 4.0, "uniform-constant factor")},
    "norms": {"scales": (_ints, [2, 4, 8], "comma separated dyadic scales"),
              "seeds": (int, 50, "ensemble size"), "T": (float, 0.25, "final time"),
              "dt": (float, 0.005, "time step"), "s": (float, 0.4, "Sobolev index")},
}


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hartreelab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name, spec in COMMANDS.items():
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="YAML config file")
        sp.add_argument("--seed", type=int, help="master seed")
        sp.add_argument("--beta", type=float, help="potential exponent")
        sp.add_argument("--out", help="output directory")
        for key, (typ, _, hlp) in spec.items():
            flag = "--" + key.replace("_", "-")
            if typ is bool:
                sp.add_argument(flag, dest=key, action="store_const", const=True, help=hlp)
            else:
                sp.add_argument(flag, dest=key, type=typ, help=hlp)
    return p


def resolve_config(command: str, args: argparse.Namespace) -> dict:
    """Defaults, then the config file, then flags."""
    file_cfg = {}
    if args.config:
        try:
            file_cfg = yaml.safe_load(Path(args.config).read_text()) or {}
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        if not isinstance(file_cfg, dict):
            raise ConfigError("config root must be a mapping")
    spec = COMMANDS[command]
    cfg = {"seed": 0, "beta": 0.99, "out": "."}
    cfg.update({k: d for k, (_, d, _) in spec.items()})
    for key in ("seed", "beta", "out"):
        if key in file_cfg:
            cfg[key] = file_cfg[key]
    section = file_cfg.get(command, {}) or {}
    unknown = set(section) - set(spec)
    if unknown:
        raise ConfigError(f"unknown keys for {command}: {sorted(unknown)}")
    for key, val in section.items():
        typ = spec[key][0]
        try:
            cfg[key] = typ(val) if typ is not _ints or not isinstance(val, list) else \
                [int(v) for v in val]
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {key}: {val!r}") from exc
    for key in ("seed", "beta", "out", *spec):
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    params = dict(file_cfg.get("params", {}) or {})
    params["beta"] = cfg["beta"]
    try:
        cfg["params"] = ParamSet(**params).to_dict()
    except (ParameterError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n")


def _jsonable(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serializable: {type(o).__name__}")


# ---------------------------------------------------------------- commands

def cmd_gff(cfg, out: Path):
    from .experiments import derive_seed
    from .sampling import GaussianDraw, write_ensemble

    seeds = [derive_seed(cfg["seed"], "gff", j) for j in range(cfg["n"])]
    states = np.array([GaussianDraw(s).field(cfg["N"]).coeffs for s in seeds])
    write_ensemble(out / "gff.jsonl", cfg["N"], seeds, states)
    return EXIT_OK, {"draws": seeds}


def cmd_gibbs(cfg, out: Path):
    from .experiments import derive_seed
    from .potential import make_bessel_potential
    from .sampling import sample_gibbs

    seed = derive_seed(cfg["seed"], "gibbs", "chains")
    P = make_bessel_potential(cfg["beta"], max(cfg["N"], 1))
    ens = sample_gibbs(cfg["N"], cfg["samples"], cfg["burn_in"], cfg["thinning"], cfg["step"],
                       seed, P, n_chains=cfg["chains"], tune=bool(cfg["tune"]))
    ens.to_jsonl(out / "gibbs.jsonl")
    ok = bool(np.all(np.isfinite(ens.energy_trace)))
    _write_json(out / "gibbs_report.json", {"acceptance_rate": ens.acceptance_rate,
                                            "step": ens.step, "finite": ok})
    return (EXIT_OK if ok else EXIT_VIOLATION), {"chains": seed}


def cmd_evolve(cfg, out: Path):
    from .dynamics import conservation_report, evolve
    from .experiments import derive_seed
    from .potential import make_bessel_potential
    from .renorm import renorm_constants
    from .sampling import GaussianDraw

    seed = derive_seed(cfg["seed"], "evolve", "data")
    N = cfg["N"]
    P = make_bessel_potential(cfg["beta"], max(N, 1))
    R = renorm_constants(N, P)
    traj = evolve(GaussianDraw(seed).field(N), cfg["T"], cfg["dt"], R, P, cfg["method"])
    if cfg["dump_traj"]:
        traj.dump(cfg["dump_traj"])
    rep = conservation_report(traj, R, P).to_dict()
    _write_json(out / "evolve_report.json", rep)
    return EXIT_OK, {"data": seed}


def cmd_invariance(cfg, out: Path):
    from .experiments import derive_seed, run_invariance_test

    rep = run_invariance_test(cfg["N"], cfg["T"], cfg["dt"], cfg["samples"], cfg["chains"],
                              cfg["burn_in"], cfg["thinning"], cfg["step"], cfg["seed"],
                              cfg["beta"], z_max=cfg["z_max"])
    _write_json(out / "invariance.json", rep.to_dict())
    return (EXIT_OK if rep.passed else EXIT_VIOLATION), \
        {"chains": derive_seed(cfg["seed"], "invariance", "chains")}


def cmd_ansatz(cfg, out: Path):
    from .analysis import NormReport, write_norm_reports
    from .experiments import run_ansatz_build
    from .rao import MAX_RAO_N

    if cfg["N"] > MAX_RAO_N:
        raise BudgetError(f"ansatz build restricted to N <= {MAX_RAO_N}")
    res = run_ansatz_build(cfg["N"], cfg["T"], cfg["dt"], cfg["seed"], cfg["beta"], cfg["s"],
                           ParamSet(**cfg["params"]))
    bundle = res.pop("bundle")
    if cfg["dump_rao"]:
        d = Path(cfg["dump_rao"])
        d.mkdir(parents=True, exist_ok=True)
        for key, mats in bundle.matrices.items():
            mats.dump(d / f"rao_N{cfg['N']}_{key}.bin")
    write_norm_reports(out / "norms.csv", [NormReport(**r) for r in res["norms"]])
    _write_json(out / "ansatz.json", res)
    ok = all(v <= 1e-12 for v in res["identities"].values())
    ok &= all(v <= cfg["unitarity_tol"] for v in res.get("unitarity", {}).values())
    ok &= res.get("telescoping", 0.0) <= 1e-10
    return (EXIT_OK if ok else EXIT_VIOLATION), {"data": res["seed"]}


def cmd_verify_tensors(cfg, out: Path):
    from .experiments import derive_seed
    from .tensorlab import contraction_growth, run_merging_trials, run_weighted_trials

    seeds = {k: derive_seed(cfg["seed"], "tensors", k) for k in ("pair", "chain", "matrices",
                                                                  "weighted", "contraction")}
    reports = [run_merging_trials(k, cfg["trials"], seeds[k]).to_dict()
               for k in ("pair", "chain", "matrices")] if cfg["trials"] > 0 else []
    if cfg["weighted_trials"] > 0:
        reports.append(run_weighted_trials(cfg["weighted_trials"], seeds["weighted"]).to_dict())
    growth = contraction_growth(trials=cfg["contraction_trials"], seed=seeds["contraction"] % 2 ** 32) \
        if cfg["contraction_trials"] > 0 else None
    _write_json(out / "tensors.json", {"reports": reports, "contraction": growth})
    bad = sum(r["violations"] for r in reports)
    return (EXIT_OK if bad == 0 else EXIT_VIOLATION), seeds


def cmd_verify_counting(cfg, out: Path):
    from .counting import verify_counting_bounds

    if not cfg["scales"]:
        _write_json(out / "counting.json", {})
        return EXIT_OK, {}
    rep = verify_counting_bounds(tuple(cfg["scales"]), cfg["theta"],
                                 budget_factor=cfg["budget_factor"])
    rep.to_csv(out / "counting.csv")
    _write_json(out / "counting.json", rep.to_dict())
    return (EXIT_OK if rep.uniform_all else EXIT_VIOLATION), {}


def cmd_norms(cfg, out: Path):
    from .analysis import write_norm_reports
    from .experiments import run_scaling

    rep = run_scaling(tuple(cfg["scales"]), cfg["seeds"], cfg["T"], cfg["dt"], cfg["s"],
                      cfg["seed"], cfg["beta"])
    write_norm_reports(out / "norms.csv", rep.rows)
    _write_json(out / "scaling.json", rep.to_dict())
    ok = rep.ratio_decreasing and rep.F_fit["within"]
    return (EXIT_OK if ok else EXIT_VIOLATION), {}


class BudgetError(RuntimeError):
    pass


HANDLERS = {"gff": cmd_gff, "gibbs": cmd_gibbs, "evolve": cmd_evolve,
            "invariance": cmd_invariance, "ansatz": cmd_ansatz,
            "verify-tensors": cmd_verify_tensors, "verify-counting": cmd_verify_counting,
            "norms": cmd_norms}


def main(argv=None) -> int:
    from .counting import BudgetExceeded
    from .experiments import manifest

    args = _parser().parse_args(argv)
    try:
        cfg = resolve_config(args.command, args)
        out = Path(cfg["out"])
        out.mkdir(parents=True, exist_ok=True)
        code, seeds = HANDLERS[args.command](cfg, out)
    except ConfigError as exc:
        print(json.dumps({"error": "config", "message": str(exc)}), file=sys.stderr)
        return EXIT_CONFIG
    except (BudgetExceeded, BudgetError) as exc:
        print(json.dumps({"error": "budget", "message": str(exc)}), file=sys.stderr)
        return EXIT_BUDGET
    except ValueError as exc:
        print(json.dumps({"error": "config", "message": str(exc)}), file=sys.stderr)
        return EXIT_CONFIG
    _write_json(out / "manifest.json", manifest(args.command, cfg, cfg["seed"], seeds))
    print(json.dumps({"command": args.command, "exit": code}))
    return code


if __name__ == "__main__":
    sys.exit(main())
