"""Truncated tensor-product Hilbert spaces and elementary operators.

Subsystems are always ordered emitter, motion, cavity 1, cavity 2. The
emitter basis is (|g>, |e>), i.e. index 0 is the ground state.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce

import numpy as np


class InvalidArgument(ValueError):
    pass


EMITTER = "emitter"
MOTION = "motion"


@dataclass(frozen=True)
class Space:
    dims: tuple[int, ...]
    labels: tuple[str, ...]

    def __post_init__(self):
        if len(self.dims) != len(self.labels):
            raise InvalidArgument("dims and labels differ in length")
        if any(int(d) < 1 for d in self.dims):
            raise InvalidArgument(f"nonpositive subsystem dimension in {self.dims}")
        if EMITTER in self.labels and self.dims[self.labels.index(EMITTER)] != 2:
            raise InvalidArgument("emitter subsystem must have dimension 2")

    @property
    def total_dim(self) -> int:
        return int(np.prod(self.dims))

    @property
    def has_emitter(self) -> bool:
        return EMITTER in self.labels

    def slot(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise InvalidArgument(f"space {self.labels} has no subsystem {label!r}") from None

    @property
    def motion_slot(self) -> int:
        return self.slot(MOTION)

    @property
    def cavity_slots(self) -> tuple[int, ...]:
        return tuple(i for i, lab in enumerate(self.labels) if lab.startswith("cavity"))

    def subspace(self, keep) -> "Space":
        keep = sorted(keep)
        return Space(tuple(self.dims[k] for k in keep), tuple(self.labels[k] for k in keep))


def make_space(emitter: bool = True, motional_cutoff: int = 30, cavity_cutoffs=()) -> Space:
    """Space with dims [2, motional_cutoff+1, c1+1, ...].

    ``emitter=False`` gives a bare motional mode, which is what reduced
    motional states live on.
    """
    cavity_cutoffs = list(cavity_cutoffs)
    if int(motional_cutoff) < 1 or int(motional_cutoff) != motional_cutoff:
        raise InvalidArgument(f"motional cutoff must be a positive integer, got {motional_cutoff}")
    if any(int(c) < 1 or int(c) != c for c in cavity_cutoffs):
        raise InvalidArgument(f"cavity cutoffs must be positive integers, got {cavity_cutoffs}")
    if len(cavity_cutoffs) > 2:
        raise InvalidArgument("at most two cavity modes are supported")
    dims, labels = [], []
    if emitter:
        dims.append(2)
        labels.append(EMITTER)
    dims.append(int(motional_cutoff) + 1)
    labels.append(MOTION)
    for i, c in enumerate(cavity_cutoffs, start=1):
        dims.append(int(c) + 1)
        labels.append(f"cavity{i}")
    return Space(tuple(dims), tuple(labels))


def motional_space(space: Space) -> Space:
    return space.subspace([space.motion_slot])


@dataclass(frozen=True, eq=False)
class Operator:
    space: Space
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        n = self.space.total_dim
        if m.shape != (n, n):
            raise InvalidArgument(f"matrix shape {m.shape} does not match space dimension {n}")
        object.__setattr__(self, "matrix", m)

    def _check(self, other: "Operator"):
        if other.space != self.space:
            raise InvalidArgument("operators live on different spaces")

    def __add__(self, other):
        if isinstance(other, Operator):
            self._check(other)
            return Operator(self.space, self.matrix + other.matrix)
        return NotImplemented

    def __sub__(self, other):
        if isinstance(other, Operator):
            self._check(other)
            return Operator(self.space, self.matrix - other.matrix)
        return NotImplemented

    def __neg__(self):
        return Operator(self.space, -self.matrix)

    def __mul__(self, c):
        if np.isscalar(c):
            return Operator(self.space, c * self.matrix)
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, c):
        return Operator(self.space, self.matrix / c)

    def __matmul__(self, other):
        if isinstance(other, Operator):
            self._check(other)
            return Operator(self.space, self.matrix @ other.matrix)
        return self.matrix @ other

    def dag(self) -> "Operator":
        return Operator(self.space, self.matrix.conj().T)

    def norm(self) -> float:
        """Spectral norm."""
        if not self.matrix.any():
            return 0.0
        return float(np.linalg.norm(self.matrix, 2))

    def is_hermitian(self, atol: float = 1e-12) -> bool:
        return bool(np.allclose(self.matrix, self.matrix.conj().T, rtol=0, atol=atol))


def embed(local, space: Space, slot: int) -> Operator:
    """I x ... x local x ... x I with ``local`` on subsystem ``slot``."""
    if not 0 <= slot < len(space.dims):
        raise InvalidArgument(f"slot {slot} out of range for {space.labels}")
    local = np.asarray(local, dtype=complex)
    d = space.dims[slot]
    if local.shape != (d, d):
        raise InvalidArgument(f"local operator shape {local.shape} does not fit slot of dimension {d}")
    factors = [local if i == slot else np.eye(di) for i, di in enumerate(space.dims)]
    return Operator(space, reduce(np.kron, factors))


def identity(space: Space) -> Operator:
    return Operator(space, np.eye(space.total_dim, dtype=complex))


def zero(space: Space) -> Operator:
    return Operator(space, np.zeros((space.total_dim,) * 2, dtype=complex))


def ladder(dim: int) -> np.ndarray:
    """Single-mode lowering operator on Fock states 0..dim-1."""
    return np.diag(np.sqrt(np.arange(1, dim, dtype=float)), 1).astype(complex)


def annihilation(space: Space, slot: int) -> Operator:
    if not 0 <= slot < len(space.dims):
        raise InvalidArgument(f"slot {slot} out of range for {space.labels}")
    if space.labels[slot] == EMITTER or space.dims[slot] < 2:
        raise InvalidArgument(f"slot {slot} ({space.labels[slot]}) is not a bosonic mode")
    return embed(ladder(space.dims[slot]), space, slot)


def number(space: Space, slot: int) -> Operator:
    a = annihilation(space, slot)
    return a.dag() @ a


_SIGMA_MINUS = np.array([[0, 1], [0, 0]], dtype=complex)


def sigma_minus(space: Space) -> Operator:
    return embed(_SIGMA_MINUS, space, space.slot(EMITTER))


def sigma_z(space: Space) -> Operator:
    return embed(np.diag([-1.0, 1.0]), space, space.slot(EMITTER))


def excited_projector(space: Space) -> Operator:
    return embed(np.diag([0.0, 1.0]), space, space.slot(EMITTER))


def position_matrix(dim: int) -> np.ndarray:
    a = ladder(dim)
    return a + a.conj().T


def position(space: Space) -> Operator:
    """Dimensionless position x = v + v^dagger on the motional slot."""
    return embed(position_matrix(space.dims[space.motion_slot]), space, space.motion_slot)


def _function_of_position(dim: int, f) -> np.ndarray:
    # x is real symmetric, so eigh gives an exact spectral calculus
    w, v = np.linalg.eigh(position_matrix(dim).real)
    return (v * f(w)) @ v.T


def recoil_matrix(dim: int, eta: float, sign: int = 1) -> np.ndarray:
    return _function_of_position(dim, lambda w: np.exp(1j * sign * eta * w))


def recoil(space: Space, eta: float, sign: int = 1) -> Operator:
    """exp(sign * i * eta * x) built from the truncated position operator."""
    if eta < 0:
        raise InvalidArgument(f"Lamb-Dicke parameter must be nonnegative, got {eta}")
    if sign not in (1, -1):
        raise InvalidArgument(f"sign must be +1 or -1, got {sign}")
    d = space.dims[space.motion_slot]
    return embed(recoil_matrix(d, eta, sign), space, space.motion_slot)


def position_function(space: Space, f) -> Operator:
    """f(x) on the motional slot, for a vectorised real function ``f``."""
    d = space.dims[space.motion_slot]
    return embed(_function_of_position(d, f), space, space.motion_slot)


def basis_state(space: Space, levels) -> np.ndarray:
    """Product basis vector; ``levels`` maps labels (or slot indices) to levels."""
    idx = [0] * len(space.dims)
    for key, n in dict(levels).items():
        slot = space.slot(key) if isinstance(key, str) else key
        if not 0 <= n < space.dims[slot]:
            raise InvalidArgument(f"level {n} outside subsystem {space.labels[slot]}")
        idx[slot] = n
    psi = np.zeros(space.total_dim, dtype=complex)
    psi[np.ravel_multi_index(idx, space.dims)] = 1.0
    return psi
