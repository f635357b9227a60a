"""Check that long-time diagnostics are converged in the motional cutoff.

    python scripts/cutoff_convergence.py [--cutoffs 30 40] [--out results/cutoff_convergence.csv]

Each scenario is recomputed at every cutoff; the table lists purity, entropy,
W-, p0 and off_diagonal_mass so that the change between cutoffs can be read
off directly.
"""

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from recoil import lindblad as lb
from recoil import observables as ob
from recoil.models import ModelParams, build_model

SCENARIOS = {
    "waveguide_gamma50_eta2": ("waveguide", dict(gamma=50.0, eta=2.0)),
    "waveguide_gamma8_eta3": ("waveguide", dict(gamma=8.0, eta=3.0)),
    "mirror_phi_pi4_eta2": ("mirror", dict(gamma=0.25, eta=2.0, phi=np.pi / 4)),
    "mirror_phi_pi2_eta0.25": ("mirror", dict(gamma=0.25, eta=0.25, phi=np.pi / 2)),
    "toroid_delta3": ("toroid", dict(g=0.25, kappa=2.0, eta=2.0, delta=3.0)),
}
COLUMNS = ["scenario", "cutoff", "purity", "entropy", "integrated_negativity", "p0", "off_diagonal_mass",
           "stop_time"]


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--cutoffs", type=int, nargs="+", default=[30, 40])
    parser.add_argument("--out", default="results/cutoff_convergence.csv")
    args = parser.parse_args(argv)

    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(COLUMNS)
        for name, (kind, params) in SCENARIOS.items():
            for cutoff in args.cutoffs:
                model = build_model(kind, ModelParams(**params), cutoff)
                res = lb.run_to_long_time(model, lb.excited_initial_state(model.space))
                rho = lb.motional_state(res.state)
                row = [name, cutoff, ob.purity(rho), ob.von_neumann_entropy(rho), ob.wigner_negativity(rho),
                       ob.number_distribution(rho)[0], ob.off_diagonal_mass(rho), res.time]
                w.writerow([row[0], row[1]] + [repr(float(v)) for v in row[2:]])
                print(f"{name:24s} cutoff {cutoff:3d}: " + " ".join(
                    f"{c}={v:.6g}" for c, v in zip(COLUMNS[2:], row[2:])), flush=True)
    return 0


if __name__ == "__main__":
    sys.exit(main())
