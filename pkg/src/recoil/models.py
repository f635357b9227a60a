"""Hamiltonians and jump operators for the emitter architectures.

All rates and energies are in units of the trap frequency (omega_m = 1 by
default). Each builder returns an immutable :class:`Model`.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

import numpy as np

from . import hilbert as hs
from .hilbert import InvalidArgument, Operator, Space

KINDS = ("waveguide", "mirror", "toroid", "beamsplitter_mixed")


@dataclass(frozen=True)
class ModelParams:
    gamma: float = 1.0
    eta: float = 0.0
    phi: float = 0.0
    g: float = 0.0
    delta: float = 0.0
    kappa: float = 0.0
    nbar: float = 0.0
    omega_m: float = 1.0

    def __post_init__(self):
        for name in ("gamma", "eta", "g", "kappa", "nbar"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise InvalidArgument(f"{name} must be finite and nonnegative, got {v}")
        for name in ("phi", "delta", "omega_m"):
            if not np.isfinite(getattr(self, name)):
                raise InvalidArgument(f"{name} must be finite")

    def replace(self, **changes) -> "ModelParams":
        return ModelParams(**{**asdict(self), **changes})


@dataclass(frozen=True, eq=False)
class Model:
    kind: str
    params: ModelParams
    space: Space
    hamiltonian: Operator
    jumps: tuple[Operator, ...]
    labels: tuple[str, ...]
    # slowest characteristic time, sets the default integration horizon
    timescale: float = field(default=1.0)

    def __post_init__(self):
        if len(self.jumps) != len(self.labels):
            raise InvalidArgument("one label per jump operator required")
        for op in (self.hamiltonian, *self.jumps):
            if op.space != self.space:
                raise InvalidArgument("all operators must share the model space")
        if not self.hamiltonian.is_hermitian(1e-12):
            raise InvalidArgument("Hamiltonian is not Hermitian")

    def decay_operator(self) -> Operator:
        """sum_i L_i^dagger L_i."""
        out = hs.zero(self.space)
        for L in self.jumps:
            out = out + L.dag() @ L
        return out

    def effective_hamiltonian(self) -> np.ndarray:
        """Non-Hermitian no-jump generator H - (i/2) sum L^dagger L."""
        return self.hamiltonian.matrix - 0.5j * self.decay_operator().matrix

    def initial_excitation_observables(self) -> dict[str, Operator]:
        """Populations that must vanish in the long-time limit."""
        obs = {"excited": hs.excited_projector(self.space)}
        for slot in self.space.cavity_slots:
            obs[self.space.labels[slot]] = hs.number(self.space, slot)
        return obs


def _trap(space: Space, omega_m: float) -> Operator:
    return omega_m * hs.number(space, space.motion_slot)


def _require(cond: bool, msg: str):
    if not cond:
        raise InvalidArgument(msg)


def waveguide_model(params: ModelParams, cutoff: int = 30) -> Model:
    """Emitter decaying symmetrically into a bidirectional waveguide."""
    _require(params.gamma > 0, "waveguide model needs gamma > 0")
    space = hs.make_space(True, cutoff)
    sm = hs.sigma_minus(space)
    amp = np.sqrt(params.gamma / 2)
    L_left = amp * (sm @ hs.recoil(space, params.eta, +1))
    L_right = amp * (sm @ hs.recoil(space, params.eta, -1))
    return Model("waveguide", params, space, _trap(space, params.omega_m),
                 (L_left, L_right), ("left", "right"),
                 timescale=max(1 / params.gamma, 1 / abs(params.omega_m)))


def beamsplitter_mixed_model(params: ModelParams, cutoff: int = 30) -> Model:
    """Waveguide outputs recombined on a symmetric 50/50 beamsplitter.

    L_plus = sqrt(gamma) sm cos(eta x), L_minus = i sqrt(gamma) sm sin(eta x).
    """
    _require(params.gamma > 0, "beamsplitter model needs gamma > 0")
    space = hs.make_space(True, cutoff)
    sm = hs.sigma_minus(space)
    amp = np.sqrt(params.gamma)
    cos = hs.position_function(space, lambda w: np.cos(params.eta * w))
    sin = hs.position_function(space, lambda w: np.sin(params.eta * w))
    return Model("beamsplitter_mixed", params, space, _trap(space, params.omega_m),
                 (amp * (sm @ cos), 1j * amp * (sm @ sin)), ("plus", "minus"),
                 timescale=max(1 / params.gamma, 1 / abs(params.omega_m)))


def mirror_model(params: ModelParams, cutoff: int = 30) -> Model:
    """Emitter in front of a perfect mirror at propagation phase ``phi``.

    Only the left channel is kept; the right-going field is fully reflected.
    """
    _require(params.gamma > 0, "mirror model needs gamma > 0")
    space = hs.make_space(True, cutoff)
    sm = hs.sigma_minus(space)
    eta, phi = params.eta, params.phi
    cos = hs.position_function(space, lambda w: np.cos(eta * w - phi))
    shift = hs.position_function(space, lambda w: np.sin(2 * phi - 2 * eta * w))
    H = _trap(space, params.omega_m) + (params.gamma / 2) * (hs.excited_projector(space) @ shift)
    return Model("mirror", params, space, H, (np.sqrt(2 * params.gamma) * (sm @ cos),),
                 ("left",), timescale=max(1 / params.gamma, 1 / abs(params.omega_m)))


def toroid_model(params: ModelParams, motional_cutoff: int = 30, cavity_cutoff: int = 2) -> Model:
    """Emitter coupled to the two counter-propagating modes of a ring resonator."""
    _require(params.kappa > 0, "toroid model needs kappa > 0")
    _require(params.g > 0, "toroid model needs g > 0")
    space = hs.make_space(True, motional_cutoff, [cavity_cutoff, cavity_cutoff])
    c1, c2 = space.cavity_slots
    sm = hs.sigma_minus(space)
    a1, a2 = hs.annihilation(space, c1), hs.annihilation(space, c2)
    emit = sm @ (a1.dag() @ hs.recoil(space, params.eta, +1) + a2.dag() @ hs.recoil(space, params.eta, -1))
    # delta = omega_R - omega_0 enters as -(delta/2) sigma_z with sigma_z = |g><g| - |e><e|
    # (spin-down = excited), i.e. |e> sits delta above the resonator in this frame
    # and emission into the ring deposits about delta/omega_m phonons.
    H = (params.delta / 2) * hs.sigma_z(space) + _trap(space, params.omega_m) + params.g * (emit + emit.dag())
    # symmetrise to remove rounding asymmetry from the recoil exponentials
    H = Operator(space, 0.5 * (H.matrix + H.matrix.conj().T))
    kappa = params.kappa
    purcell = params.g**2 * kappa / (kappa**2 / 4 + params.delta**2)
    return Model("toroid", params, space, H, (np.sqrt(kappa) * a1, np.sqrt(kappa) * a2),
                 ("left", "right"),
                 timescale=max(1 / kappa, 1 / abs(params.omega_m), 1 / purcell))


def total_excitation(space: Space) -> Operator:
    """sigma_+ sigma_- plus the photon number in every cavity mode."""
    out = hs.excited_projector(space)
    for slot in space.cavity_slots:
        out = out + hs.number(space, slot)
    return out


def build_model(kind: str, params: ModelParams, motional_cutoff: int = 30, cavity_cutoff: int = 2) -> Model:
    if kind == "waveguide":
        return waveguide_model(params, motional_cutoff)
    if kind == "mirror":
        return mirror_model(params, motional_cutoff)
    if kind == "toroid":
        return toroid_model(params, motional_cutoff, cavity_cutoff)
    if kind == "beamsplitter_mixed":
        return beamsplitter_mixed_model(params, motional_cutoff)
    raise InvalidArgument(f"unknown model kind {kind!r}; expected one of {KINDS}")
