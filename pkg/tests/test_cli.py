import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from recoil import cli
from recoil import io as rio
from recoil import observables as ob

WAVEGUIDE = {"name": "wg", "model": "waveguide", "params": {"gamma": 1.0, "eta": 0.5}, "motional_cutoff": 10,
             "wigner": {"extent": 6, "points": 61}}


def write(tmp_path, name, doc):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def run(*argv):
    return cli.main([str(a) for a in argv])


def test_simulate_writes_metrics_and_provenance(tmp_path, capsys):
    cfg = write(tmp_path, "wg.json", dict(WAVEGUIDE, dump_state=True, reference="vacuum"))
    out = tmp_path / "out"
    assert run("simulate", cfg, "--out-dir", out) == cli.EXIT_OK
    assert "purity=" in capsys.readouterr().out
    doc = json.loads((out / "wg_metrics.json").read_text())
    m = doc["metrics"]
    assert 0 < m["purity"] <= 1
    assert m["stop_time"] > 0 and m["ground_weight"] == pytest.approx(1.0, abs=2e-6)
    assert "trace_distance" in m
    prov = doc["provenance"]
    assert prov["config"]["params"]["eta"] == 0.5
    assert {"code_version", "numpy", "scipy", "seeds", "wall_time_s"} <= set(prov)
    with open(out / "wg_wigner.csv") as fh:
        assert len(list(csv.reader(fh))) == 61 * 61 + 1
    rho = rio.load_state(out / "wg_state.json")
    assert ob.purity(rho) == pytest.approx(m["purity"], rel=1e-12)


def test_simulate_is_deterministic(tmp_path):
    cfg = write(tmp_path, "wg.json", WAVEGUIDE)
    run("simulate", cfg, "--out-dir", tmp_path / "a")
    run("simulate", cfg, "--out-dir", tmp_path / "b")
    a = json.loads((tmp_path / "a" / "wg_metrics.json").read_text())["metrics"]
    b = json.loads((tmp_path / "b" / "wg_metrics.json").read_text())["metrics"]
    assert a == b


def test_wigner_from_dump(tmp_path):
    cfg = write(tmp_path, "wg.json", dict(WAVEGUIDE, dump_state=True))
    run("simulate", cfg, "--out-dir", tmp_path)
    wcfg = write(tmp_path, "w.json", {"state": str(tmp_path / "wg_state.json"), "name": "again",
                                      "extent": 6, "points": 61})
    assert run("wigner", wcfg, "--out-dir", tmp_path) == cli.EXIT_OK
    with open(tmp_path / "again_wigner.csv") as fh:
        again = list(csv.reader(fh))
    with open(tmp_path / "wg_wigner.csv") as fh:
        first = list(csv.reader(fh))
    assert again == first


def test_scan_rows_in_raster_order(tmp_path):
    cfg = write(tmp_path, "scan.json", {"base": dict(WAVEGUIDE, wigner={"csv": False}),
                                        "sweep": {"eta": [0.2, 0.4], "gamma": [1.0, 2.0]},
                                        "observables": ["purity", "integrated_negativity"]})
    assert run("scan", cfg, "--out-dir", tmp_path, "--threads", 2) == cli.EXIT_OK
    with open(tmp_path / "wg_scan.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert [(float(r["eta"]), float(r["gamma"])) for r in rows] == [(0.2, 1.0), (0.2, 2.0), (0.4, 1.0), (0.4, 2.0)]
    assert all(r["status"] == "ok" for r in rows)
    assert (tmp_path / "wg_scan_provenance.json").exists()


def test_scan_records_failures_in_row(tmp_path):
    # eta = 0 at phi = pi/2 puts the emitter on a node of the standing wave
    base = {"name": "node", "model": "mirror", "params": {"gamma": 0.25}, "motional_cutoff": 4,
            "max_time": 200.0, "wigner": {"csv": False}}
    cfg = write(tmp_path, "scan.json", {"base": base, "sweep": {"phi": [np.pi / 2, 0.0]}})
    assert run("scan", cfg, "--out-dir", tmp_path) == cli.EXIT_OK
    with open(tmp_path / "node_scan.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert rows[0]["status"].startswith("not_converged")
    assert rows[1]["status"] == "ok"


def test_trajectories_seed_override(tmp_path):
    doc = {"base": {"name": "bs", "model": "beamsplitter_mixed", "params": {"gamma": 8, "eta": 2}, "seed": 1},
           "n_traj": 5}
    cfg = write(tmp_path, "t.json", doc)
    run("trajectories", cfg, "--out-dir", tmp_path / "a")
    run("trajectories", cfg, "--out-dir", tmp_path / "b")
    run("trajectories", cfg, "--out-dir", tmp_path / "c", "--seed", 2)
    load = lambda d: json.loads((tmp_path / d / "bs_trajectories.json").read_text())  # noqa: E731
    a, b, c = load("a"), load("b"), load("c")
    assert a["trajectories"] == b["trajectories"]
    assert a["trajectories"] != c["trajectories"]
    assert c["provenance"]["seeds"]["seed"] == 2
    s = a["summary"]
    assert s["n_traj"] == 5 and s["min_conditional_purity"] > 0.999
    assert "trace_distance_to_master_equation" in s


def test_slh_reduce_checks_closed_form(tmp_path):
    doc = {"name": "fp", "motional_cutoff": 5, "compare_closed_form": True,
           "components": [{"kind": "fp_network", "alpha": 0.9, "beta": 0.4, "phi1": 0.3, "phi2": 0.3,
                           "gamma": 0.25, "eta": 0.5}],
           "links": [[1, 6], [6, 3], [4, 5], [5, 2]]}
    assert run("slh", "reduce", write(tmp_path, "fp.json", doc), "--out-dir", tmp_path) == cli.EXIT_OK
    res = json.loads((tmp_path / "fp_reduced.json").read_text())
    assert res["closed_form_match"] is True
    assert res["steps"] == [[1, 6], [5, 3], [3, 4], [3, 2]]


@pytest.mark.parametrize("doc", [
    {"model": "fp_fifty_fifty", "params": {"gamma": 1.0}},
    {"model": "waveguide", "params": {"gamma": -1.0}},
    {"model": "waveguide", "unknown_key": 1},
])
def test_config_errors_exit_2(tmp_path, doc, capsys):
    assert run("simulate", write(tmp_path, "bad.json", doc)) == cli.EXIT_CONFIG
    assert "configuration error" in capsys.readouterr().err


def test_fifty_fifty_refusal_explains_why(tmp_path, capsys):
    run("simulate", write(tmp_path, "ff.json", {"model": "fp_fifty_fifty"}))
    assert "not a valid description" in capsys.readouterr().err


def test_missing_file_exit_2(tmp_path):
    assert run("simulate", tmp_path / "nope.json") == cli.EXIT_CONFIG


def test_not_converged_exit_3(tmp_path):
    doc = {"model": "mirror", "params": {"gamma": 0.25, "eta": 0.0, "phi": np.pi / 2}, "motional_cutoff": 4,
           "max_time": 20.0}
    assert run("simulate", write(tmp_path, "node.json", doc), "--out-dir", tmp_path) == cli.EXIT_NOT_CONVERGED


def test_feedback_singularity_exit_4(tmp_path):
    doc = {"motional_cutoff": 3, "links": [[1, 6], [6, 3], [4, 5], [5, 2]],
           "components": [{"kind": "fp_network", "alpha": np.pi / 2, "beta": np.pi / 2, "phi1": 0, "phi2": 0,
                           "gamma": 1, "eta": 0.3}]}
    assert run("slh", "reduce", write(tmp_path, "s.json", doc), "--out-dir", tmp_path) == cli.EXIT_NUMERICAL


def test_bad_threads_env(tmp_path, monkeypatch):
    monkeypatch.setenv("RECOIL_THREADS", "many")
    assert run("simulate", write(tmp_path, "wg.json", WAVEGUIDE), "--out-dir", tmp_path) == cli.EXIT_CONFIG


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "recoil", "--help"], capture_output=True, text=True)
    assert out.returncode == 0
    for cmd in ("simulate", "scan", "trajectories", "wigner", "slh"):
        assert cmd in out.stdout


def test_missing_subcommand_is_usage_error():
    with pytest.raises(SystemExit) as exc:
        cli.main([])
    assert exc.value.code == 2
