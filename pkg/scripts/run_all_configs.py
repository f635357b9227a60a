"""Run every bundled configuration through the command line and tabulate exit codes.

    python scripts/run_all_configs.py [--configs configs] [--out-dir results] [--threads N]

The state dump written by ``toroid_delta3`` is needed by ``wigner_from_dump``,
so configurations run in a fixed order. ``fp_fifty_fifty`` is expected to
exit with code 2 (the triple is refused for simulation).
"""

import argparse
import json
import sys
import time
from pathlib import Path

from recoil import cli

EXPECTED_EXIT = {"fp_fifty_fifty": cli.EXIT_CONFIG}
FIRST = ["toroid_delta3"]
LAST = ["wigner_from_dump"]


def subcommand(doc: dict) -> list:
    if "state" in doc:
        return ["wigner"]
    if "components" in doc:
        return ["slh", "reduce"]
    if "sweep" in doc:
        return ["scan"]
    if "n_traj" in doc:
        return ["trajectories"]
    return ["simulate"]


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--configs", default="configs")
    parser.add_argument("--out-dir", default="results")
    parser.add_argument("--threads", type=int, default=None)
    args = parser.parse_args(argv)

    paths = {p.stem: p for p in sorted(Path(args.configs).glob("*.json"))}
    order = [n for n in FIRST if n in paths] + [n for n in paths if n not in FIRST + LAST] \
        + [n for n in LAST if n in paths]
    summary, bad = [], 0
    for name in order:
        path = paths[name]
        doc = json.loads(path.read_text())
        cmd = subcommand(doc)
        if "state" in doc:
            # read the dump from this run's output directory
            doc["state"] = str(Path(args.out_dir) / Path(doc["state"]).name)
            path = Path(args.out_dir) / f"{name}.resolved.json"
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(json.dumps(doc))
        extra = ["--threads", str(args.threads)] if args.threads else []
        t0 = time.perf_counter()
        code = cli.main(cmd + [str(path), "--out-dir", args.out_dir] + extra)
        secs = time.perf_counter() - t0
        expected = EXPECTED_EXIT.get(name, cli.EXIT_OK)
        ok = code == expected
        bad += not ok
        summary.append({"config": name, "command": " ".join(cmd), "exit": code, "expected": expected,
                        "seconds": round(secs, 2)})
        print(f"{'ok ' if ok else 'BAD'} {name:28s} {' '.join(cmd):13s} exit {code} ({secs:.1f} s)", flush=True)
    Path(args.out_dir).mkdir(parents=True, exist_ok=True)
    (Path(args.out_dir) / "run_all_configs.json").write_text(json.dumps(summary, indent=2))
    return 1 if bad else 0


if __name__ == "__main__":
    sys.exit(main())
