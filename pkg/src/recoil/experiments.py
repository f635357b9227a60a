"""Config-driven runners shared by the command line and the scripts."""

from __future__ import annotations

import csv
import json
import os
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from . import hilbert as hs
from . import io as rio
from . import lindblad as lb
from . import observables as ob
from . import slh
from . import trajectories as tr
from .config import FP_FIFTY_FIFTY, ConfigError, ExperimentConfig, ScanConfig, TrajectoryConfig, parse_reference
from .models import build_model


def provenance(config: dict, wall_time: float, seeds=None) -> dict:
    return {
        "config": config,
        "code_version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "seeds": seeds,
        "wall_time_s": wall_time,
    }


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serialisable: {type(o)}")


def write_json(doc, path):
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, default=_json_default)


def build(config: ExperimentConfig):
    """Model and initial state (excited emitter, thermal or ground motion, empty cavities)."""
    if config.model == FP_FIFTY_FIFTY:
        raise ConfigError(slh.VALIDITY_CAVEAT)
    model = build_model(config.model, config.params, config.motional_cutoff, config.cavity_cutoff)
    motional = None
    if config.params.nbar > 0:
        motional = ob.thermal_state(config.params.nbar, config.motional_cutoff)
    return model, lb.excited_initial_state(model.space, motional)


def reference_state(ref: str, cutoff: int) -> lb.DensityMatrix:
    kind, value = parse_reference(ref)
    if kind == "fock":
        if value > cutoff:
            raise ConfigError(f"reference Fock level {value} exceeds the cutoff {cutoff}")
        return ob.fock_state(value, cutoff)
    return ob.thermal_state(value, cutoff)


def simulate(config: ExperimentConfig):
    """Long-time motional state and its metrics. Returns (metrics, rho_m, grid, result)."""
    model, rho0 = build(config)
    res = lb.run_to_long_time(model, rho0, config.eps_stop, config.max_time, rtol=config.rtol,
                              atol=config.atol, method=config.method)
    rho_m = lb.motional_state(res.state)
    wspec = config.wigner
    kwargs = {} if wspec is None else {"extent": wspec.extent, "points": wspec.points}
    grid = ob.wigner(rho_m, **kwargs)
    metrics = ob.motional_metrics(rho_m, grid)
    metrics["p0"] = metrics["number_distribution"][0]
    metrics["stop_time"] = res.time
    metrics["residual_populations"] = res.residuals
    metrics["ground_weight"] = 1.0 - sum(res.residuals.values())
    if config.reference is not None:
        metrics["reference"] = config.reference
        metrics["trace_distance"] = ob.trace_distance(rho_m, reference_state(config.reference, config.motional_cutoff))
        if config.reference == "fock1":
            metrics["trace_distance_to_fock1"] = metrics["trace_distance"]
    metrics["diagnostics"] = res.record.diagnostics
    return metrics, rho_m, grid, res


def run_experiment(config: ExperimentConfig, out_dir) -> dict:
    """Write metrics.json (with provenance), optional Wigner grid and state dump."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    metrics, rho_m, grid, res = simulate(config)
    files = {"metrics": str(out / f"{config.name}_metrics.json")}
    if config.wigner is not None and config.wigner.csv:
        files["wigner_csv"] = str(out / f"{config.name}_wigner.csv")
        grid.to_csv(files["wigner_csv"])
    if config.wigner is not None and config.wigner.json:
        files["wigner_json"] = str(out / f"{config.name}_wigner.json")
        grid.to_json(files["wigner_json"])
    if config.dump_state:
        files["state"] = str(out / f"{config.name}_state.json")
        rio.dump_state(rho_m, files["state"])
    doc = {"metrics": metrics, "files": files,
           "provenance": provenance(config.to_dict(), time.perf_counter() - t0, [config.seed])}
    write_json(doc, files["metrics"])
    return doc


def _scan_point(args):
    config, overrides, observables = args
    cfg = config.to_dict()
    params = dict(cfg["params"])
    for k, v in overrides.items():
        if k == "motional_cutoff":
            cfg["motional_cutoff"] = int(v)
        else:
            params[k] = v
    cfg["params"] = params
    row = dict(overrides)
    try:
        metrics = simulate(ExperimentConfig.from_dict(cfg))[0]
        row.update({k: metrics.get(k, float("nan")) for k in observables})
        row["status"] = "ok"
    except lb.NotConverged as exc:
        row.update({k: float("nan") for k in observables})
        row["status"] = f"not_converged: {exc}"
    except (hs.InvalidArgument, ArithmeticError, np.linalg.LinAlgError, RuntimeError) as exc:
        row.update({k: float("nan") for k in observables})
        row["status"] = f"failed: {type(exc).__name__}: {exc}"
    return row


def run_scan(scan: ScanConfig, out_dir, threads: int = 1) -> list:
    """One CSV row per grid point in raster order; failures are recorded in-row."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    base = scan.base
    if base.model == FP_FIFTY_FIFTY:
        raise ConfigError(slh.VALIDITY_CAVEAT)
    jobs = [(base, p, scan.observables) for p in scan.points()]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(_scan_point, jobs))
    else:
        rows = [_scan_point(j) for j in jobs]
    names = [n for n, _ in scan.axes]
    path = out / f"{base.name}_scan.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names + list(scan.observables) + ["status"])
        for r in rows:
            w.writerow([repr(float(r[n])) for n in names]
                       + [repr(float(r[o])) for o in scan.observables] + [r["status"]])
    write_json(provenance(scan.to_dict(), time.perf_counter() - t0, [base.seed]), out / f"{base.name}_scan_provenance.json")
    return rows


def run_trajectories(tc: TrajectoryConfig, out_dir, threads: int = 1) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    model, rho0 = build(tc.base)
    if tc.base.params.nbar > 0:
        raise ConfigError("trajectories start from a pure state; set nbar = 0")
    psi0 = hs.basis_state(model.space, {"emitter": 1})
    horizon = tc.horizon()
    results = tr.sample_ensemble(model, psi0, tc.n_traj, tc.base.seed, horizon, threads)
    eta = tc.base.params.eta
    records = []
    for r in results:
        rec = {"index": r.index, "clicks": [[t, c] for t, c in r.clicks]}
        if r.clicks:
            rho_c = tr.conditional_motional_state(r)
            rec["purity"] = ob.purity(rho_c)
            if model.kind == "beamsplitter_mixed":
                rec["cat_fidelity"] = tr.cat_fidelity(r, eta, model.params.omega_m)
        records.append(rec)
    clicked = [r for r in records if r["clicks"]]
    summary = {
        "n_traj": tc.n_traj,
        "t_final": horizon,
        "n_clicked": len(clicked),
        "mean_conditional_purity": float(np.mean([r["purity"] for r in clicked])) if clicked else None,
        "min_conditional_purity": float(np.min([r["purity"] for r in clicked])) if clicked else None,
    }
    if clicked and model.kind == "beamsplitter_mixed":
        summary["min_cat_fidelity"] = float(np.min([r["cat_fidelity"] for r in clicked]))
    channels = [c for r in clicked for _, c in r["clicks"]]
    summary["channel_counts"] = {lab: channels.count(lab) for lab in model.labels}
    if tc.compare_master_equation:
        avg = tr.average_projector(results)
        me = lb.SectorPropagator(model, rho0).state(horizon)
        summary["trace_distance_to_master_equation"] = ob.trace_distance(avg, me)
    doc = {"summary": summary, "trajectories": records,
           "provenance": provenance(tc.to_dict(), time.perf_counter() - t0,
                                    {"seed": tc.base.seed, "streams": "SeedSequence(seed, spawn_key=(index,))"})}
    write_json(doc, out / f"{tc.base.name}_trajectories.json")
    return doc


def run_wigner(doc: dict, out_dir) -> dict:
    """Recompute a Wigner grid from a dumped motional state."""
    if "state" not in doc:
        raise ConfigError("wigner config needs 'state' (path to a state dump)")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    try:
        rho = rio.load_state(doc["state"])
    except (OSError, KeyError, ValueError) as exc:
        raise ConfigError(f"cannot load state {doc['state']}: {exc}") from exc
    grid = ob.wigner(rho, float(doc.get("extent", ob.DEFAULT_EXTENT)), int(doc.get("points", ob.DEFAULT_POINTS)))
    name = doc.get("name", Path(doc["state"]).stem)
    grid.to_csv(out / f"{name}_wigner.csv")
    if doc.get("json", False):
        grid.to_json(out / f"{name}_wigner.json")
    result = {"integrated_negativity": ob.wigner_negativity(rho),
              "grid_negativity": ob.integrated_negativity(grid),
              "negativity_noise_bound": ob.negativity_noise_bound(grid),
              "wigner_integral": grid.integral(),
              "provenance": provenance(doc, time.perf_counter() - t0)}
    write_json(result, out / f"{name}_wigner_summary.json")
    return result


def run_slh_reduce(doc: dict, out_dir) -> dict:
    """Reduce a network description; optionally compare with the FP closed form."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    network, links = slh.network_from_dict(doc)
    reduced, steps = slh.reduce_links(network, links, check_unitary=network.is_scalar)
    result = {"steps": steps, "triple": slh.triple_to_dict(reduced)}
    comp = doc.get("components", [])
    if doc.get("compare_closed_form") and len(comp) == 1 and comp[0]["kind"] == "fp_network":
        c = comp[0]
        if c["phi1"] != c["phi2"]:
            raise ConfigError("the closed form assumes phi1 == phi2")
        closed = slh.general_fp_triple(c["alpha"], c["beta"], c["phi1"], c["gamma"], c.get("eta", 0.0),
                                       reduced.space, float(doc.get("omega_m", 1.0)))
        ok, report = slh.triples_equal(reduced, closed, float(doc.get("tol", 1e-10)))
        result["closed_form_match"] = ok
        result["closed_form_report"] = report
    result["provenance"] = provenance(doc, time.perf_counter() - t0)
    write_json(result, out / f"{doc.get('name', 'network')}_reduced.json")
    return result


def default_threads(flag: int | None) -> int:
    if flag is not None:
        return max(1, flag)
    try:
        return max(1, int(os.environ.get("RECOIL_THREADS", "1")))
    except ValueError as exc:
        raise ConfigError("RECOIL_THREADS must be an integer") from exc
