"""Run configurations: one JSON document per experiment, scan or trajectory batch."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .hilbert import InvalidArgument
from .models import KINDS, ModelParams

# the 50/50 Fabry-Perot triple is accepted by the parser only so that it can be
# refused with an explanation
FP_FIFTY_FIFTY = "fp_fifty_fifty"
SCAN_PARAMETERS = tuple(f.name for f in fields(ModelParams)) + ("motional_cutoff",)
METRICS = ("purity", "entropy", "integrated_negativity", "grid_negativity", "negativity_noise_bound", "mean_number",
           "off_diagonal_mass", "p0", "trace_distance", "stop_time", "wigner_integral")


class ConfigError(InvalidArgument):
    pass


def _require(cond, msg):
    if not cond:
        raise ConfigError(msg)


@dataclass
class WignerSpec:
    extent: float = 8.0
    points: int = 201
    csv: bool = True
    json: bool = False

    def __post_init__(self):
        _require(self.extent > 0 and math.isfinite(self.extent), "wigner.extent must be positive")
        _require(int(self.points) >= 3, "wigner.points must be at least 3")
        self.points = int(self.points)


@dataclass
class ExperimentConfig:
    model: str
    params: ModelParams = field(default_factory=ModelParams)
    name: str = "run"
    motional_cutoff: int = 30
    cavity_cutoff: int = 2
    eps_stop: float = 1e-6
    max_time: float | None = None
    method: str = "auto"
    rtol: float = 1e-8
    atol: float = 1e-10
    reference: str | None = None
    wigner: WignerSpec | None = field(default_factory=WignerSpec)
    dump_state: bool = False
    seed: int = 0

    def __post_init__(self):
        _require(self.model in KINDS + (FP_FIFTY_FIFTY,),
                 f"unknown model {self.model!r}; expected one of {KINDS}")
        _require(int(self.motional_cutoff) >= 1, "motional_cutoff must be >= 1")
        _require(int(self.cavity_cutoff) >= 1, "cavity_cutoff must be >= 1")
        _require(0 < self.eps_stop < 1, "eps_stop must lie in (0, 1)")
        _require(self.max_time is None or self.max_time > 0, "max_time must be positive")
        _require(self.method in ("auto", "rk", "spectral"), f"unknown method {self.method!r}")
        _require(0 < self.rtol < 1 and 0 < self.atol < 1, "tolerances must lie in (0, 1)")
        if self.reference is not None:
            parse_reference(self.reference)
        if self.model == "toroid":
            _require(self.params.g > 0 and self.params.kappa > 0, "toroid needs g > 0 and kappa > 0")
        elif self.model in KINDS:
            _require(self.params.gamma > 0, f"{self.model} needs gamma > 0")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        _require(not unknown, f"unknown config keys: {sorted(unknown)}")
        _require("model" in d, "config needs a 'model' entry")
        try:
            d["params"] = ModelParams(**d.get("params", {}))
            if d.get("wigner", {}) is not None:
                d["wigner"] = WignerSpec(**d.get("wigner", {}))
            return cls(**d)
        except ConfigError:
            raise
        except (TypeError, InvalidArgument) as exc:
            raise ConfigError(str(exc)) from exc

    def to_dict(self) -> dict:
        return asdict(self)


def parse_reference(ref: str):
    """'fock<n>' or 'vacuum' -> Fock level, 'thermal:<nbar>' -> ('thermal', nbar)."""
    if ref == "vacuum":
        return ("fock", 0)
    if ref.startswith("fock") and ref[4:].isdigit():
        return ("fock", int(ref[4:]))
    if ref.startswith("thermal:"):
        try:
            return ("thermal", float(ref.split(":", 1)[1]))
        except ValueError:
            pass
    raise ConfigError(f"unknown reference state {ref!r}; use vacuum, fock<n> or thermal:<nbar>")


def _axis_values(spec) -> list:
    if isinstance(spec, dict):
        _require({"start", "stop", "num"} <= set(spec), "range axes need start, stop and num")
        vals = np.linspace(float(spec["start"]), float(spec["stop"]), int(spec["num"])).tolist()
    else:
        vals = [float(v) for v in spec]
    _require(len(vals) > 0, "scan axis is empty")
    _require(all(math.isfinite(v) for v in vals), "scan axis contains non-finite values")
    return vals


@dataclass
class ScanConfig:
    base: ExperimentConfig
    axes: list
    observables: tuple = ("purity", "entropy", "integrated_negativity")

    def __post_init__(self):
        _require(1 <= len(self.axes) <= 2, "a scan sweeps one or two parameters")
        for name, _ in self.axes:
            _require(name in SCAN_PARAMETERS, f"cannot sweep {name!r}")
        for obs in self.observables:
            _require(obs in METRICS, f"unknown observable {obs!r}; expected one of {METRICS}")

    @classmethod
    def from_dict(cls, d: dict) -> "ScanConfig":
        _require("base" in d and "sweep" in d, "scan config needs 'base' and 'sweep'")
        base = ExperimentConfig.from_dict(d["base"])
        sweep = d["sweep"]
        _require(isinstance(sweep, dict) and sweep, "'sweep' maps parameter names to values")
        axes = [(name, _axis_values(spec)) for name, spec in sweep.items()]
        return cls(base, axes, tuple(d.get("observables", cls.observables)))

    def points(self):
        """Parameter dictionaries in raster order (first axis outermost)."""
        if len(self.axes) == 1:
            (n1, v1), = self.axes
            return [{n1: a} for a in v1]
        (n1, v1), (n2, v2) = self.axes
        return [{n1: a, n2: b} for a in v1 for b in v2]

    def to_dict(self) -> dict:
        return {"base": self.base.to_dict(), "sweep": {n: v for n, v in self.axes},
                "observables": list(self.observables)}


@dataclass
class TrajectoryConfig:
    base: ExperimentConfig
    n_traj: int = 500
    t_final: float | None = None
    compare_master_equation: bool = True

    def __post_init__(self):
        _require(self.base.model in ("beamsplitter_mixed", "waveguide"),
                 "trajectories support the beamsplitter_mixed and waveguide models")
        _require(int(self.n_traj) >= 1, "n_traj must be >= 1")
        _require(self.t_final is None or self.t_final > 0, "t_final must be positive")

    @classmethod
    def from_dict(cls, d: dict) -> "TrajectoryConfig":
        d = dict(d)
        _require("base" in d, "trajectory config needs 'base'")
        base = ExperimentConfig.from_dict(d.pop("base"))
        try:
            return cls(base, **d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def horizon(self) -> float:
        """Default run length: 25 decay times plus one trap period."""
        return self.t_final if self.t_final is not None else 25.0 / self.base.params.gamma + 2 * np.pi

    def to_dict(self) -> dict:
        return {"base": self.base.to_dict(), "n_traj": self.n_traj, "t_final": self.t_final,
                "compare_master_equation": self.compare_master_equation}


def load_json(path) -> dict:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from exc
    _require(isinstance(doc, dict), f"{path} must hold a JSON object")
    return doc
