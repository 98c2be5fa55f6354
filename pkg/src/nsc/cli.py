"""Command-line entry point: ``nsc {sysid,control,regret-sweep,verify,known-gpc}``.

Outputs are pure functions of (config, seed): CSVs use ``%.17g`` floats
with a ``.`` decimal point, and wall-clock timings are written only with
``--timing``. Exit codes: 0 success, 1 numerical failure, 2 config error.
"""

import argparse
import csv
import json
import logging
import math
import os
import sys

import numpy as np

from . import config as config_mod
from . import gpc, lds, pipeline, sysid, verify
from .config import ConfigError, parse_config  # noqa: F401  (re-exported)
from .numerics import InvalidInputError

log = logging.getLogger("nsc")

DEFAULT_CONFIG = {"dims": [3, 2], "kappa": 2, "gamma": 0.3, "k": 3, "T": 4096, "W": 1,
                  "G": 2, "delta": 0.1, "seed": 0}
TRACE_COLUMNS = ("t", "phase", "cost", "state_norm", "control_norm", "dist_err")
LOG_LEVELS = {"quiet": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}


class NumericalFailure(RuntimeError):
    """Raised by a command when its result is numerically unacceptable."""


def fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % float(v)
    return str(v)


def write_csv(path, columns, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([fmt(r[c]) for c in columns])


def read_csv(path):
    """Rows as dicts of strings (inverse of :func:`write_csv` up to typing)."""
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj) if math.isfinite(obj) else None
    return obj


def write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_jsonable(obj), fh, indent=2)
        fh.write("\n")


def trace_rows(traj, dist_err):
    s = np.linalg.norm(traj.states[:-1], axis=1)
    u = np.linalg.norm(traj.controls, axis=1)
    return [{"t": t, "phase": int(traj.phase[t]) if traj.phase is not None else 0,
             "cost": traj.costs[t], "state_norm": s[t], "control_norm": u[t],
             "dist_err": dist_err[t]} for t in range(traj.T)]


def load_config(args):
    if args.config is None:
        cfg = config_mod.from_dict(dict(DEFAULT_CONFIG))
    else:
        cfg = parse_config(args.config)
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError("--seed", "must be nonnegative")
        cfg = cfg.with_T(cfg.T, seed=args.seed)
    return cfg


# -- commands ---------------------------------------------------------------

def cmd_sysid(cfg, args):
    sys_, cert = cfg.make_instance()
    dist, costs = cfg.make_disturbance(), cfg.make_costs()
    est, traj, _ = sysid.identify(sys_, cert.K, cfg.T0, cfg.k, dist, cfg.seed,
                                  cfg.explore_scale, costs)
    w_hat = sysid.estimate_disturbance(traj.states[1:], traj.states[:-1], traj.controls,
                                       est.A_hat, est.B_hat)
    err = np.linalg.norm(traj.disturbances - w_hat, axis=1)
    write_csv(os.path.join(args.out, "trace.csv"), TRACE_COLUMNS, trace_rows(traj, err))
    write_json(os.path.join(args.out, "report.json"), {
        "command": "sysid", "eps_A": est.eps_report["eps_A"], "eps_B": est.eps_report["eps_B"],
        "A_hat": est.A_hat, "B_hat": est.B_hat, "A": sys_.A, "B": sys_.B, "K": cert.K,
        "config": cfg.echo()})
    log.info("sysid: eps_A=%.3e eps_B=%.3e", est.eps_report["eps_A"], est.eps_report["eps_B"])
    return 0


def cmd_control(cfg, args):
    report, traj, _ = pipeline.run_algorithm1(cfg)
    err = np.linalg.norm(traj.disturbances - traj.w_hat, axis=1)
    err[traj.phase == 1] = np.nan            # no estimate is formed during exploration
    write_csv(os.path.join(args.out, "trace.csv"), TRACE_COLUMNS, trace_rows(traj, err))
    out = report.to_dict()
    out["command"] = "control"
    out["phase1_within_bound"] = bool(report.phase1_max_cost <= report.phase1_bound)
    write_json(os.path.join(args.out, "report.json"), out)
    log.info("control: J_alg=%.6g J_star=%.6g regret=%.6g", report.J_alg, report.J_star,
             report.regret)
    return 0


def cmd_regret_sweep(cfg, args):
    sw = cfg.sweep
    T_grid = sw.get("T", [2**p for p in range(10, 14)])
    seeds = sw.get("seeds", [cfg.seed])
    T0_grid = sw.get("T0")
    if T0_grid is not None and len(T0_grid) != len(T_grid):
        raise ConfigError("sweep.T0", "must have one entry per sweep.T entry")
    rows = pipeline.sweep(cfg, T_grid, seeds, jobs=args.jobs, timing=args.timing,
                          T0_grid=T0_grid)
    write_csv(os.path.join(args.out, "sweep.csv"), pipeline.SWEEP_COLUMNS, rows)
    summary = {"command": "regret-sweep", "T": T_grid, "seeds": seeds, "config": cfg.echo()}
    try:
        slope, Ts, med = pipeline.sweep_slope(rows)
        summary.update(slope=slope, median_regret=med)
    except ValueError:
        summary.update(slope=None, note="non-positive median regret; slope undefined")
    write_json(os.path.join(args.out, "report.json"), summary)
    return 0


def cmd_verify(cfg, args):
    results = verify.run_all(cfg)
    rows = []
    for r in results:
        row = r.row()
        row["detail"] = row["detail"].replace(",", ";")
        rows.append(row)
    write_csv(os.path.join(args.out, "verify.csv"), verify.CSV_COLUMNS, rows)
    n_fail = sum(r.status == "fail" for r in results)
    n_skip = sum(r.skipped for r in results)
    write_json(os.path.join(args.out, "report.json"), {
        "command": "verify", "checks": len(results), "failures": n_fail, "skips": n_skip,
        "config": cfg.echo()})
    log.info("verify: %d checks, %d failures, %d skips", len(results), n_fail, n_skip)
    if n_fail:
        raise NumericalFailure(f"{n_fail} verification checks failed")
    return 0


def cmd_known_gpc(cfg, args):
    sys_, cert = cfg.make_instance()
    dist, costs = cfg.make_disturbance(), cfg.make_costs()
    eta = None if "eta" in cfg.auto else cfg.eta
    res = gpc.run_known_system(sys_, cert, dist, costs, cfg.T, H=cfg.H, eta=eta, G=cfg.G,
                               W=cfg.W)
    K_star, J_star, info = pipeline.best_linear_comparator(
        sys_, dist, costs, cfg.T, cert.K, cfg.gamma, cfg.comparator["restarts"],
        cfg.comparator["max_sweeps"], seed=cfg.seed)
    traj = res.trajectory
    err = np.linalg.norm(traj.disturbances - traj.w_hat, axis=1)
    write_csv(os.path.join(args.out, "trace.csv"), TRACE_COLUMNS, trace_rows(traj, err))
    write_json(os.path.join(args.out, "report.json"), {
        "command": "known-gpc", "J_alg": res.total_cost, "J_star": J_star,
        "regret": res.total_cost - J_star, "ratio": res.total_cost / J_star,
        "H": res.H, "eta": res.eta, "K_star": K_star, "comparator": info,
        "config": cfg.echo()})
    return 0


COMMANDS = {"sysid": cmd_sysid, "control": cmd_control, "regret-sweep": cmd_regret_sweep,
            "verify": cmd_verify, "known-gpc": cmd_known_gpc}


def build_parser():
    p = argparse.ArgumentParser(prog="nsc", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", metavar="PATH", help="JSON config (defaults if omitted)")
    p.add_argument("--out", metavar="DIR", default=".", help="output directory")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--jobs", type=int, default=1, help="worker threads for sweeps")
    p.add_argument("--timing", action="store_true", help="record wall-clock runtime_ms")
    return p


def _setup_logging():
    level = os.environ.get("NSC_LOG", "info").lower()
    if level not in LOG_LEVELS:
        raise ConfigError("NSC_LOG", f"must be one of {sorted(LOG_LEVELS)}")
    logging.basicConfig(level=LOG_LEVELS[level], format="%(name)s: %(message)s",
                        stream=sys.stderr)


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        _setup_logging()
        if args.jobs < 1:
            raise ConfigError("--jobs", "must be >= 1")
        cfg = load_config(args)
        os.makedirs(args.out, exist_ok=True)
        return COMMANDS[args.command](cfg, args)
    except (ConfigError, lds.ConfigError, lds.PreconditionError, InvalidInputError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (NumericalFailure, pipeline.PhaseError, pipeline.SearchError,
            pipeline.UnstableControllerError, lds.GenerationError,
            np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
