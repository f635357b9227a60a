"""SLH triples and feedback reduction for the emitter-between-beamsplitters network.

Ports are numbered from 1, as in network diagrams. Scattering matrices are
indexed ``S[output, input]``. A scattering matrix is stored either as an
(n, n) complex array (scalar entries, meaning scalar * identity) or as an
(n, n, d, d) array of operator entries.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import hilbert as hs
from .hilbert import InvalidArgument, Operator, Space

SINGULAR_COND = 1e12

# internal links of the two-beamsplitter network, original port labels (out, in)
FP_LINKS = ((1, 6), (6, 3), (4, 5), (5, 2))

VALIDITY_CAVEAT = (
    "The 50/50 Fabry-Perot triple leaves the optical mode trapped between the "
    "beamsplitters unquantised; it is not a valid description of the dynamics when "
    "that mode is significantly populated, so it is refused for simulation."
)


class FeedbackSingularity(ArithmeticError):
    """(1 - S_xy) is not invertible: the link traps a mode."""


class ResonantSingularity(ArithmeticError):
    """The closed-form denominator F1 = 1 - e^{4i phi} sin(a) sin(b) vanishes."""


@dataclass(frozen=True)
class PortMap:
    inputs: tuple[int, ...]
    outputs: tuple[int, ...]

    @classmethod
    def fresh(cls, n: int) -> "PortMap":
        return cls(tuple(range(1, n + 1)), tuple(range(1, n + 1)))

    def current(self, out_label: int, in_label: int) -> tuple[int, int]:
        """Current 1-based (output, input) indices of original port labels."""
        try:
            return self.outputs.index(out_label) + 1, self.inputs.index(in_label) + 1
        except ValueError:
            raise InvalidArgument(f"link {out_label}->{in_label} refers to an eliminated port") from None

    def without(self, x: int, y: int) -> "PortMap":
        outs = self.outputs[: x - 1] + self.outputs[x:]
        ins = self.inputs[: y - 1] + self.inputs[y:]
        return PortMap(ins, outs)


@dataclass(frozen=True, eq=False)
class SLHTriple:
    space: Space
    scattering: np.ndarray
    jumps: tuple[Operator, ...]
    hamiltonian: Operator
    ports: PortMap = field(default=None)

    def __post_init__(self):
        S = np.asarray(self.scattering, dtype=complex)
        n = len(self.jumps)
        d = self.space.total_dim
        if S.shape not in ((n, n), (n, n, d, d)):
            raise InvalidArgument(f"scattering shape {S.shape} inconsistent with {n} jump operators")
        for op in (*self.jumps, self.hamiltonian):
            if op.space != self.space:
                raise InvalidArgument("all SLH operators must share one space")
        object.__setattr__(self, "scattering", S)
        if self.ports is None:
            object.__setattr__(self, "ports", PortMap.fresh(n))

    @property
    def n_ports(self) -> int:
        return len(self.jumps)

    @property
    def is_scalar(self) -> bool:
        return self.scattering.ndim == 2

    def scattering_operators(self) -> np.ndarray:
        """(n, n, d, d) view with scalars promoted to multiples of the identity."""
        if not self.is_scalar:
            return self.scattering
        eye = np.eye(self.space.total_dim)
        return self.scattering[:, :, None, None] * eye

    def unitarity_error(self) -> float:
        if not self.is_scalar:
            raise InvalidArgument("unitarity check needs scalar scattering entries")
        S = self.scattering
        eye = np.eye(len(S))
        return float(max(np.abs(S.conj().T @ S - eye).max(), np.abs(S @ S.conj().T - eye).max()))


def beamsplitter_scattering(theta: float) -> np.ndarray:
    return np.array([[1j * np.cos(theta), np.sin(theta)],
                     [np.sin(theta), 1j * np.cos(theta)]])


def beamsplitter(theta: float, space: Space) -> SLHTriple:
    z = hs.zero(space)
    return SLHTriple(space, beamsplitter_scattering(theta), (z, z), z)


def recoil_emitter(phi1: float, phi2: float, gamma: float, eta: float, space: Space,
                   omega_m: float = 1.0) -> SLHTriple:
    """Two-port emitter: left/right emission with recoil, propagation phases folded in."""
    sm = hs.sigma_minus(space)
    amp = np.sqrt(gamma / 2)
    L_left = (amp * np.exp(1j * phi2)) * (sm @ hs.recoil(space, eta, +1))
    L_right = (amp * np.exp(1j * phi1)) * (sm @ hs.recoil(space, eta, -1))
    S = np.exp(1j * (phi1 + phi2)) * np.eye(2)
    H = omega_m * hs.number(space, space.motion_slot)
    return SLHTriple(space, S, (L_left, L_right), H)


def concatenate(*triples: SLHTriple) -> SLHTriple:
    """Block-diagonal stacking of independent components."""
    space = triples[0].space
    if any(t.space != space for t in triples):
        raise InvalidArgument("components live on different spaces")
    n = sum(t.n_ports for t in triples)
    if all(t.is_scalar for t in triples):
        S = np.zeros((n, n), dtype=complex)
        k = 0
        for t in triples:
            S[k:k + t.n_ports, k:k + t.n_ports] = t.scattering
            k += t.n_ports
    else:
        d = space.total_dim
        S = np.zeros((n, n, d, d), dtype=complex)
        k = 0
        for t in triples:
            S[k:k + t.n_ports, k:k + t.n_ports] = t.scattering_operators()
            k += t.n_ports
    H = hs.zero(space)
    for t in triples:
        H = H + t.hamiltonian
    return SLHTriple(space, S, tuple(L for t in triples for L in t.jumps), H)


def fp_network(alpha: float, beta: float, phi1: float, phi2: float, gamma: float, eta: float,
               space: Space, omega_m: float = 1.0) -> SLHTriple:
    """Six-port network: left beamsplitter (beta), right beamsplitter (alpha), emitter."""
    if gamma <= 0:
        raise InvalidArgument("gamma must be positive")
    return concatenate(beamsplitter(beta, space), beamsplitter(alpha, space),
                       recoil_emitter(phi1, phi2, gamma, eta, space, omega_m))


def feedback_reduce(triple: SLHTriple, x_out: int, y_in: int) -> SLHTriple:
    """Close the internal link from output ``x_out`` to input ``y_in`` (1-based).

    S_red = S_{~x~y} + S_{~x,y} (1 - S_xy)^{-1} S_{x,~y}
    L_red = L_{~x} + S_{~x,y} (1 - S_xy)^{-1} L_x
    H_red = H + (1/2i) (sum_j L_j^dag S_jy (1 - S_xy)^{-1} L_x - h.c.)
    """
    n = triple.n_ports
    if not (1 <= x_out <= n and 1 <= y_in <= n):
        raise InvalidArgument(f"ports ({x_out}, {y_in}) out of range for a {n}-port triple")
    if n < 2:
        raise InvalidArgument("cannot reduce a one-port triple")
    x, y = x_out - 1, y_in - 1
    rows = [i for i in range(n) if i != x]
    cols = [j for j in range(n) if j != y]
    space = triple.space
    Lm = [L.matrix for L in triple.jumps]

    if triple.is_scalar:
        S = triple.scattering
        denom = 1 - S[x, y]
        if abs(denom) < 1 / SINGULAR_COND:
            raise FeedbackSingularity(f"1 - S[{x_out},{y_in}] = {denom:.3g} is singular")
        inv = 1 / denom
        S_red = S[np.ix_(rows, cols)] + inv * np.outer(S[rows, y], S[x, cols])
        L_red = [Lm[i] + (S[i, y] * inv) * Lm[x] for i in rows]
        acc = sum(Lm[j].conj().T @ ((S[j, y] * inv) * Lm[x]) for j in range(n))
    else:
        S = triple.scattering
        eye = np.eye(space.total_dim)
        gap = eye - S[x, y]
        if np.linalg.cond(gap) > SINGULAR_COND:
            raise FeedbackSingularity(f"1 - S[{x_out},{y_in}] is singular")
        inv = np.linalg.inv(gap)
        S_red = np.empty((n - 1, n - 1) + S.shape[2:], dtype=complex)
        for a, i in enumerate(rows):
            left = S[i, y] @ inv
            for b, j in enumerate(cols):
                S_red[a, b] = S[i, j] + left @ S[x, j]
        L_red = [Lm[i] + S[i, y] @ inv @ Lm[x] for i in rows]
        acc = sum(Lm[j].conj().T @ S[j, y] @ inv @ Lm[x] for j in range(n))
    H_red = triple.hamiltonian.matrix + (acc - acc.conj().T) / 2j
    return SLHTriple(space, S_red, tuple(Operator(space, L) for L in L_red), Operator(space, H_red),
                     triple.ports.without(x_out, y_in))


def reduce_links(triple: SLHTriple, links, check_unitary: bool = False, tol: float = 1e-10):
    """Eliminate ``links`` given in original port labels, renumbering as ports vanish.

    Returns the reduced triple and the list of (output, input) indices used
    at each step in the then-current numbering.
    """
    steps = []
    for out_label, in_label in links:
        x, y = triple.ports.current(out_label, in_label)
        steps.append((x, y))
        triple = feedback_reduce(triple, x, y)
        if check_unitary and triple.is_scalar and triple.unitarity_error() > tol:
            raise ArithmeticError(f"scattering lost unitarity after eliminating {out_label}->{in_label}")
    return triple, steps


def reduced_fp_network(alpha, beta, phi1, phi2, gamma, eta, space, omega_m=1.0):
    return reduce_links(fp_network(alpha, beta, phi1, phi2, gamma, eta, space, omega_m), FP_LINKS)[0]


def general_fp_triple(alpha: float, beta: float, phi: float, gamma: float, eta: float, space: Space,
                      omega_m: float = 1.0, global_phase: bool = True) -> SLHTriple:
    """Closed-form two-port triple for the emitter midway between the beamsplitters.

    The feedback reduction of :func:`fp_network` produces both jump operators
    multiplied by the common factor i e^{2i phi} (transmission phase of the
    beamsplitter times the round trip to the emitter). A common phase on L is
    a gauge choice: with vacuum inputs it changes neither the master equation
    nor any photon statistics. ``global_phase=False`` drops it, giving the
    form usually quoted.
    """
    sa, sb, ca, cb = np.sin(alpha), np.sin(beta), np.cos(alpha), np.cos(beta)
    e2, e4 = np.exp(2j * phi), np.exp(4j * phi)
    F1 = 1 - e4 * sa * sb
    F2 = e4 - sa * sb
    if abs(F1) < 1e-12:
        raise ResonantSingularity(f"F1 = {F1:.3g} vanishes at alpha={alpha}, beta={beta}, phi={phi}")
    S = np.array([[sb - e4 * sa, -e2 * ca * cb],
                  [-e2 * ca * cb, sa - e4 * sb]]) / F1
    sm = hs.sigma_minus(space)
    amp = np.sqrt(gamma / 2) / F1
    f = lambda func: hs.position_function(space, func)  # noqa: E731
    L1 = amp * cb * (sm @ f(lambda w: np.exp(-1j * (phi - eta * w)) + sa * np.exp(1j * (phi - eta * w))))
    L2 = amp * ca * (sm @ f(lambda w: np.exp(-1j * (phi + eta * w)) + sb * np.exp(1j * (phi + eta * w))))
    # e^{4i phi}/(F1 F2) = 1/|F1|^2, so the shift is real
    pref = (gamma / 2) * (e4 / (F1 * F2)).real
    shift = f(lambda w: sb * (1 + sa**2) * np.sin(2 * phi + 2 * eta * w)
              + sa * (1 + sb**2) * np.sin(2 * phi - 2 * eta * w)
              + 2 * sa * sb * np.sin(4 * phi))
    H = omega_m * hs.number(space, space.motion_slot) + pref * (hs.excited_projector(space) @ shift)
    if global_phase:
        L1, L2 = jump_phase(phi) * L1, jump_phase(phi) * L2
    return SLHTriple(space, S, (L1, L2), H)


def jump_phase(phi: float) -> complex:
    """Common phase i e^{2i phi} carried by the reduced FP jump operators."""
    return 1j * np.exp(2j * phi)


def fifty_fifty_triple(phi: float, gamma: float, eta: float, space: Space, omega_m: float = 1.0,
                       global_phase: bool = True) -> SLHTriple:
    """Closed form at alpha = beta = pi/4, written out separately.

    Not valid for dynamics; see :data:`VALIDITY_CAVEAT`.
    """
    e2, e4 = np.exp(2j * phi), np.exp(4j * phi)
    r = 1 / np.sqrt(2)
    norm = 1 / (np.sqrt(2) * (1 - e4 / 2))
    S = norm * np.array([[1 - e4, -e2 * r], [-e2 * r, 1 - e4]])
    sm = hs.sigma_minus(space)
    f = lambda func: hs.position_function(space, func)  # noqa: E731
    amp = np.sqrt(gamma / 2) * norm
    L1 = amp * (sm @ f(lambda w: np.exp(-1j * (phi - eta * w)) + r * np.exp(1j * (phi - eta * w))))
    L2 = amp * (sm @ f(lambda w: np.exp(-1j * (phi + eta * w)) + r * np.exp(1j * (phi + eta * w))))
    shift = f(lambda w: (3 * np.sqrt(2) * np.cos(2 * eta * w) + 4 * np.cos(2 * phi)) * np.sin(2 * phi))
    H = (omega_m * hs.number(space, space.motion_slot)
         # prefactor gamma (not gamma/2): the alpha = beta = pi/4 value of the general triple
         + gamma / (5 - 4 * np.cos(4 * phi)) * (hs.excited_projector(space) @ shift))
    if global_phase:
        L1, L2 = jump_phase(phi) * L1, jump_phase(phi) * L2
    return SLHTriple(space, S, (L1, L2), H)


def _opnorm(m: np.ndarray) -> float:
    return float(np.linalg.norm(m, 2)) if m.ndim == 2 and m.any() else float(np.abs(m).max(initial=0.0))


def triples_equal(a: SLHTriple, b: SLHTriple, tol: float = 1e-10):
    """Compare S, L and H entrywise in operator norm.

    Returns ``(equal, report)`` where ``report`` holds the largest deviation
    of each part and overall.
    """
    if a.n_ports != b.n_ports or a.space != b.space:
        raise InvalidArgument("triples differ in port count or space")
    if a.is_scalar and b.is_scalar:
        dS = float(np.abs(a.scattering - b.scattering).max())
    else:
        Sa, Sb = a.scattering_operators(), b.scattering_operators()
        dS = max(_opnorm(Sa[i, j] - Sb[i, j]) for i in range(a.n_ports) for j in range(a.n_ports))
    dL = max((_opnorm(x.matrix - y.matrix) for x, y in zip(a.jumps, b.jumps)), default=0.0)
    dH = _opnorm(a.hamiltonian.matrix - b.hamiltonian.matrix)
    worst = max(dS, dL, dH)
    return worst <= tol, {"scattering": dS, "jumps": dL, "hamiltonian": dH, "max": worst}


# -- network description files ----------------------------------------------

def network_from_dict(doc: dict) -> tuple[SLHTriple, list]:
    """Build the concatenated network and its internal links from a description.

    ``doc`` keys: ``motional_cutoff``, optional ``omega_m``, ``components``
    (each with ``kind`` in beamsplitter | emitter | fp_network) and ``links``
    as [output, input] pairs in original port labels.
    """
    from .io import matrix_from_json

    try:
        space = hs.make_space(True, int(doc.get("motional_cutoff", 10)))
        omega_m = float(doc.get("omega_m", 1.0))
        parts = []
        for comp in doc["components"]:
            kind = comp["kind"]
            if kind == "beamsplitter":
                parts.append(beamsplitter(float(comp["theta"]), space))
            elif kind == "emitter":
                parts.append(recoil_emitter(float(comp.get("phi1", 0.0)), float(comp.get("phi2", 0.0)),
                                            float(comp["gamma"]), float(comp.get("eta", 0.0)), space, omega_m))
            elif kind == "fp_network":
                parts.append(fp_network(float(comp["alpha"]), float(comp["beta"]), float(comp["phi1"]),
                                        float(comp["phi2"]), float(comp["gamma"]), float(comp.get("eta", 0.0)),
                                        space, omega_m))
            elif kind == "explicit":
                S = np.array(comp["S_real"]) + 1j * np.array(comp["S_imag"])
                Ls = tuple(Operator(space, matrix_from_json(m)) if m is not None else hs.zero(space)
                           for m in comp["L"])
                H = Operator(space, matrix_from_json(comp["H"])) if comp.get("H") else hs.zero(space)
                parts.append(SLHTriple(space, S, Ls, H))
            else:
                raise InvalidArgument(f"unknown component kind {kind!r}")
        links = [tuple(int(v) for v in link) for link in doc.get("links", [])]
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, InvalidArgument):
            raise
        raise InvalidArgument(f"malformed network description: {exc}") from exc
    return concatenate(*parts), links


def triple_to_dict(triple: SLHTriple) -> dict:
    from .io import matrix_to_json

    if triple.is_scalar:
        scattering = {"kind": "scalar", "matrix": matrix_to_json(triple.scattering)}
    else:
        n = triple.n_ports
        scattering = {"kind": "operator",
                      "entries": [[matrix_to_json(triple.scattering[i, j]) for j in range(n)] for i in range(n)]}
    return {
        "dims": list(triple.space.dims),
        "labels": list(triple.space.labels),
        "n_ports": triple.n_ports,
        "input_ports": list(triple.ports.inputs),
        "output_ports": list(triple.ports.outputs),
        "scattering": scattering,
        "jumps": [matrix_to_json(L.matrix) for L in triple.jumps],
        "hamiltonian": matrix_to_json(triple.hamiltonian.matrix),
    }
