import json

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from recoil import config as C
from recoil import io as rio
from recoil import observables as ob
from recoil.hilbert import InvalidArgument

finite = st.floats(-1e6, 1e6, allow_nan=False)


@given(re=arrays(float, (4, 3), elements=finite), im=arrays(float, (4, 3), elements=finite))
def test_matrix_round_trip_is_exact(re, im):
    m = re + 1j * im
    back = rio.matrix_from_json(json.loads(json.dumps(rio.matrix_to_json(m))))
    np.testing.assert_array_equal(back, m)


def test_state_dump_round_trip(tmp_path):
    rho = ob.coherent_state(0.4 + 1.1j, 12)
    rio.dump_state(rho, tmp_path / "s.json")
    back = rio.load_state(tmp_path / "s.json")
    assert back.space == rho.space
    np.testing.assert_array_equal(back.matrix, rho.matrix)


def test_malformed_matrix_records():
    with pytest.raises(InvalidArgument):
        rio.matrix_from_json({"shape": [2, 2], "data": [1.0, 0.0]})
    with pytest.raises(InvalidArgument):
        rio.matrix_from_json({"data": [1.0, 0.0]})


# -- configuration parsing -------------------------------------------------

def test_experiment_config_round_trip():
    d = {"model": "toroid", "params": {"g": 0.25, "kappa": 2, "eta": 2, "delta": 3}, "name": "t"}
    cfg = C.ExperimentConfig.from_dict(d)
    again = C.ExperimentConfig.from_dict(cfg.to_dict())
    assert again == cfg
    assert cfg.wigner == C.WignerSpec()


@pytest.mark.parametrize("doc", [
    {"params": {"gamma": 1}},
    {"model": "laser"},
    {"model": "waveguide", "params": {"gamma": 0}},
    {"model": "waveguide", "params": {"gamma": -1}},
    {"model": "waveguide", "params": {"speed": 1}},
    {"model": "waveguide", "typo": 1},
    {"model": "toroid", "params": {"g": 0.2}},
    {"model": "waveguide", "method": "euler"},
    {"model": "waveguide", "eps_stop": 2},
    {"model": "waveguide", "reference": "squeezed"},
    {"model": "waveguide", "wigner": {"points": 1}},
])
def test_bad_experiment_configs(doc):
    with pytest.raises(C.ConfigError):
        C.ExperimentConfig.from_dict(doc)


@pytest.mark.parametrize("ref,parsed", [("vacuum", ("fock", 0)), ("fock1", ("fock", 1)), ("fock12", ("fock", 12)),
                                        ("thermal:0.3", ("thermal", 0.3))])
def test_reference_parsing(ref, parsed):
    assert C.parse_reference(ref) == parsed


def test_scan_points_in_raster_order():
    scan = C.ScanConfig.from_dict({"base": {"model": "waveguide"},
                                   "sweep": {"eta": [1, 2], "gamma": {"start": 0.5, "stop": 1.5, "num": 3}}})
    pts = scan.points()
    assert pts[0] == {"eta": 1.0, "gamma": 0.5}
    assert pts[1] == {"eta": 1.0, "gamma": 1.0}
    assert pts[3] == {"eta": 2.0, "gamma": 0.5}
    assert len(pts) == 6


@pytest.mark.parametrize("doc", [
    {"base": {"model": "waveguide"}},
    {"base": {"model": "waveguide"}, "sweep": {}},
    {"base": {"model": "waveguide"}, "sweep": {"colour": [1]}},
    {"base": {"model": "waveguide"}, "sweep": {"eta": []}},
    {"base": {"model": "waveguide"}, "sweep": {"eta": [1], "gamma": [1], "phi": [1]}},
    {"base": {"model": "waveguide"}, "sweep": {"eta": [1]}, "observables": ["beauty"]},
    {"base": {"model": "waveguide"}, "sweep": {"eta": {"start": 0, "stop": 1}}},
])
def test_bad_scan_configs(doc):
    with pytest.raises(C.ConfigError):
        C.ScanConfig.from_dict(doc)


def test_trajectory_config_horizon():
    tc = C.TrajectoryConfig.from_dict({"base": {"model": "beamsplitter_mixed", "params": {"gamma": 8}}})
    assert tc.horizon() == pytest.approx(25 / 8 + 2 * np.pi)
    with pytest.raises(C.ConfigError):
        C.TrajectoryConfig.from_dict({"base": {"model": "toroid", "params": {"g": 1, "kappa": 1}}})
    with pytest.raises(C.ConfigError):
        C.TrajectoryConfig.from_dict({"base": {"model": "waveguide"}, "n_traj": 0})


def test_load_json_errors(tmp_path):
    with pytest.raises(C.ConfigError):
        C.load_json(tmp_path / "missing.json")
    (tmp_path / "bad.json").write_text("{not json")
    with pytest.raises(C.ConfigError):
        C.load_json(tmp_path / "bad.json")
    (tmp_path / "list.json").write_text("[1, 2]")
    with pytest.raises(C.ConfigError):
        C.load_json(tmp_path / "list.json")
