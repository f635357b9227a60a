"""Photon-counting quantum trajectories.

Between clicks the unnormalised state follows d(psi)/dt = -i Heff psi with
Heff = H - (i/2) sum L^dag L, so its squared norm decays. A click happens when
the squared norm falls below a uniform random threshold; the channel is drawn
with weights ||L_i psi||^2 and the state jumps to L_i psi / ||L_i psi||.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import hilbert as hs
from .hilbert import InvalidArgument, Space
from .integrate import DormandPrince
from .lindblad import DensityMatrix, motional_state
from .models import Model

NORM_TOL = 1e-10
CLICK_TIME_RTOL = 1e-10


class PreconditionViolation(RuntimeError):
    pass


def trajectory_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream for trajectory ``index`` of an ensemble seeded with ``seed``."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


@dataclass
class TrajectoryResult:
    space: Space
    clicks: list
    final_state: np.ndarray
    t_final: float
    seed: int
    index: int = 0
    diagnostics: dict = field(default_factory=dict)

    @property
    def conditional_motional(self) -> DensityMatrix:
        return conditional_motional_state(self)

    @property
    def last_click(self):
        return self.clicks[-1] if self.clicks else None


def _click_time(step, threshold: float) -> float:
    """Bisect |psi(t)|^2 = threshold inside an accepted step."""
    lo, hi = step.t0, step.t1
    while hi - lo > CLICK_TIME_RTOL * max(abs(hi), 1.0):
        mid = 0.5 * (lo + hi)
        if np.vdot(step(mid), step(mid)).real < threshold:
            hi = mid
        else:
            lo = mid
    return hi


def sample_trajectory(model: Model, psi0, seed: int, t_final: float, index: int = 0,
                      rtol: float = 1e-9, atol: float = 1e-12) -> TrajectoryResult:
    """One photon-counting record from ``psi0`` up to ``t_final``.

    The random stream is derived from ``(seed, index)`` so that trajectories of
    an ensemble are independent and individually reproducible.
    """
    psi = np.asarray(psi0, dtype=complex).copy()
    if psi.shape != (model.space.total_dim,):
        raise InvalidArgument(f"state vector has shape {psi.shape}, expected ({model.space.total_dim},)")
    if abs(np.linalg.norm(psi) - 1) > NORM_TOL:
        raise InvalidArgument(f"initial state is not normalised (norm {np.linalg.norm(psi):.12g})")
    if t_final <= 0:
        raise InvalidArgument("t_final must be positive")
    rng = trajectory_rng(seed, index)
    # Work with phi = exp(i D t) psi, D the real diagonal of H. The fast free
    # phases (trap energies up to the cutoff) drop out, only the coupling
    # V = Heff - D remains, and |phi| = |psi|.
    heff = model.effective_hamiltonian()
    diag = np.real(np.diag(model.hamiltonian.matrix)).copy()
    V = heff - np.diag(diag)
    V_is_diag = not np.any(V - np.diag(np.diag(V)))
    v_diag = np.diag(V).copy()
    jumps = [L.matrix for L in model.jumps]

    def to_lab(t, phi):
        return np.exp(-1j * diag * t) * phi

    def to_frame(t, psi):
        return np.exp(1j * diag * t) * psi

    if V_is_diag:
        def rhs(t, y):
            return -1j * v_diag * y
    else:
        def rhs(t, y):
            return -1j * to_frame(t, V @ to_lab(t, y))

    clicks = []
    t = 0.0
    phi = psi.copy()
    threshold = rng.random()
    n_steps = 0
    while True:
        stepper = DormandPrince(rhs, t, phi, t_final, rtol, atol)
        clicked = False
        while not stepper.done:
            st = stepper.step()
            n_steps += 1
            if np.vdot(st.y1, st.y1).real < threshold:
                tc = _click_time(st, threshold)
                psi_c = to_lab(tc, st(tc))
                weights = np.array([np.vdot(L @ psi_c, L @ psi_c).real for L in jumps])
                cum = np.cumsum(weights)
                k = int(np.searchsorted(cum / cum[-1], rng.random(), side="right"))
                k = min(k, len(jumps) - 1)
                jumped = jumps[k] @ psi_c
                phi = to_frame(tc, jumped / np.linalg.norm(jumped))
                clicks.append((float(tc), model.labels[k]))
                t = tc
                threshold = rng.random()
                clicked = True
                break
        if not clicked:
            psi = to_lab(t_final, stepper.y)
            psi /= np.linalg.norm(psi)
            break
    return TrajectoryResult(model.space, clicks, psi, float(t_final), seed, index,
                            {"steps": n_steps, "final_threshold": float(threshold)})


def conditional_motional_state(result: TrajectoryResult) -> DensityMatrix:
    """Reduced motional state after the last click."""
    if not result.clicks:
        raise PreconditionViolation("no click recorded; the conditional state is undefined")
    return motional_state(DensityMatrix.from_pure(result.space, result.final_state))


def _sample_range(args):
    model, psi0, seed, t_final, indices = args
    return [sample_trajectory(model, psi0, seed, t_final, index=i) for i in indices]


def sample_ensemble(model: Model, psi0, n_traj: int, seed: int, t_final: float,
                    threads: int | None = None) -> list:
    """``n_traj`` trajectories, ordered by index whatever the worker count."""
    if n_traj < 1:
        raise InvalidArgument("n_traj must be at least 1")
    threads = threads or int(os.environ.get("RECOIL_THREADS", "1"))
    if threads <= 1 or n_traj == 1:
        return _sample_range((model, psi0, seed, t_final, range(n_traj)))
    chunks = [range(i, n_traj, threads) for i in range(threads)]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        parts = list(pool.map(_sample_range, [(model, psi0, seed, t_final, c) for c in chunks]))
    out = [None] * n_traj
    for c, part in zip(chunks, parts):
        for i, r in zip(c, part):
            out[i] = r
    return out


def average_projector(results) -> DensityMatrix:
    """Mean of |psi><psi| over the final states, summed in index order."""
    space = results[0].space
    acc = np.zeros((space.total_dim, space.total_dim), dtype=complex)
    for r in sorted(results, key=lambda r: r.index):
        acc += np.outer(r.final_state, r.final_state.conj())
    return DensityMatrix(space, acc / len(results))


def ensemble_average(model: Model, psi0, n_traj: int, seed: int, t_final: float,
                     threads: int | None = None) -> DensityMatrix:
    return average_projector(sample_ensemble(model, psi0, n_traj, seed, t_final, threads))


def cat_state(eta: float, channel: str, cutoff: int, elapsed: float = 0.0, omega_m: float = 1.0) -> np.ndarray:
    """Normalised cos(eta x)|0> ("plus") or sin(eta x)|0> ("minus"), freely rotated for ``elapsed``."""
    plus = hs.recoil_matrix(cutoff + 1, eta, +1)[:, 0]
    minus = hs.recoil_matrix(cutoff + 1, eta, -1)[:, 0]
    if channel == "plus":
        v = 0.5 * (plus + minus)
    elif channel == "minus":
        v = (plus - minus) / 2j
    else:
        raise InvalidArgument(f"unknown cat channel {channel!r}")
    v = v * np.exp(-1j * omega_m * elapsed * np.arange(cutoff + 1))
    return v / np.linalg.norm(v)


def cat_fidelity(result: TrajectoryResult, eta: float, omega_m: float = 1.0) -> float:
    """<cat|rho_m|cat> against the analytic cat for the last click's channel and time."""
    rho_m = conditional_motional_state(result)
    tc, channel = result.clicks[-1]
    cat = cat_state(eta, channel, rho_m.space.dims[0] - 1, result.t_final - tc, omega_m)
    return float(np.vdot(cat, rho_m.matrix @ cat).real)
