"""Command-line entry point.

    recoil simulate CONFIG [--out-dir DIR] [--seed N] [--threads N]
    recoil scan CONFIG
    recoil trajectories CONFIG
    recoil wigner CONFIG
    recoil slh reduce CONFIG

Exit codes: 0 success, 2 configuration error, 3 no convergence,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from . import experiments as ex
from .config import ConfigError, ExperimentConfig, ScanConfig, TrajectoryConfig, load_json
from .hilbert import InvalidArgument
from .integrate import IntegrationFailure
from .lindblad import NotConverged
from .slh import FeedbackSingularity, ResonantSingularity

EXIT_OK, EXIT_CONFIG, EXIT_NOT_CONVERGED, EXIT_NUMERICAL = 0, 2, 3, 4

log = logging.getLogger("recoil")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("config", help="JSON configuration file")
    common.add_argument("--out-dir", default="results", help="output directory (default: results)")
    common.add_argument("--seed", type=int, default=None, help="override the config seed")
    common.add_argument("--threads", type=int, default=None,
                        help="worker processes for scans and trajectories (default: $RECOIL_THREADS or 1)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="recoil", description="Simulate recoil-induced motional states of trapped emitters.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="long-time motional state and its metrics")
    sub.add_parser("scan", parents=[common], help="sweep one or two parameters into a CSV table")
    sub.add_parser("trajectories", parents=[common], help="photon-counting trajectories")
    sub.add_parser("wigner", parents=[common], help="Wigner grid from a dumped state")
    slh_p = sub.add_parser("slh", help="SLH network tools")
    slh_sub = slh_p.add_subparsers(dest="slh_command", required=True)
    slh_sub.add_parser("reduce", parents=[common], help="eliminate internal links of a network")
    return parser


def _with_seed(doc: dict, seed, key=None) -> dict:
    if seed is None:
        return doc
    doc = dict(doc)
    if key is None:
        doc["seed"] = seed
    else:
        doc[key] = dict(doc[key], seed=seed)
    return doc


def run(args) -> int:
    doc = load_json(args.config)
    threads = ex.default_threads(args.threads)
    log.info("%s %s with %d worker(s)", args.command, args.config, threads)
    if args.command == "simulate":
        cfg = ExperimentConfig.from_dict(_with_seed(doc, args.seed))
        res = ex.run_experiment(cfg, args.out_dir)
        m = res["metrics"]
        print(f"{cfg.name}: purity={m['purity']:.6f} entropy={m['entropy']:.6f} "
              f"W-={m['integrated_negativity']:.6f} t*={m['stop_time']:.3f}")
    elif args.command == "scan":
        scan = ScanConfig.from_dict(_with_seed(doc, args.seed, "base"))
        rows = ex.run_scan(scan, args.out_dir, threads)
        bad = sum(r["status"] != "ok" for r in rows)
        print(f"{scan.base.name}: {len(rows)} points, {bad} failed")
    elif args.command == "trajectories":
        tc = TrajectoryConfig.from_dict(_with_seed(doc, args.seed, "base"))
        s = ex.run_trajectories(tc, args.out_dir, threads)["summary"]
        print(f"{tc.base.name}: {s['n_clicked']}/{s['n_traj']} clicked, "
              f"mean conditional purity {s['mean_conditional_purity']}")
    elif args.command == "wigner":
        r = ex.run_wigner(doc, args.out_dir)
        print(f"W-={r['integrated_negativity']:.6f} integral={r['wigner_integral']:.6f}")
    elif args.command == "slh":
        r = ex.run_slh_reduce(doc, args.out_dir)
        print(f"reduced to {r['triple']['n_ports']} ports via steps {r['steps']}"
              + (f"; closed form match: {r['closed_form_match']}" if "closed_form_match" in r else ""))
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return run(args)
    except (ConfigError, InvalidArgument) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NotConverged as exc:
        print(f"not converged at t={exc.time:g}: {exc}; residuals {exc.residuals}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    except (IntegrationFailure, FeedbackSingularity, ResonantSingularity, ArithmeticError,
            np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    raise SystemExit(main())
