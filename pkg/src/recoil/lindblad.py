"""Master-equation propagation, long-time limit detection and partial traces."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .hilbert import InvalidArgument, Operator, Space
from .integrate import DormandPrince, IntegrationFailure
from .models import Model, total_excitation

log = logging.getLogger(__name__)

DEFAULT_EPS_STOP = 1e-6
# horizon for the closed-form route, whose cost does not grow with time
SPECTRAL_MAX_TIME = 1e6


class NotConverged(RuntimeError):
    def __init__(self, message, time, residuals):
        super().__init__(message)
        self.time = time
        self.residuals = residuals


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    space: Space
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        n = self.space.total_dim
        if m.shape != (n, n):
            raise InvalidArgument(f"density matrix shape {m.shape} does not match dimension {n}")
        object.__setattr__(self, "matrix", m)

    @classmethod
    def from_pure(cls, space: Space, psi) -> "DensityMatrix":
        psi = np.asarray(psi, dtype=complex)
        return cls(space, np.outer(psi, psi.conj()))

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def expect(self, op: Operator) -> float:
        return float(np.trace(op.matrix @ self.matrix).real)

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(0.5 * (self.matrix + self.matrix.conj().T))[0])

    def hermiticity_error(self) -> float:
        return float(np.max(np.abs(self.matrix - self.matrix.conj().T), initial=0.0))

    def check(self, herm_tol=1e-10, trace_tol=1e-8, eig_tol=1e-8) -> "DensityMatrix":
        """Raise InvalidArgument unless Hermitian, unit trace and positive."""
        if self.hermiticity_error() > herm_tol:
            raise InvalidArgument(f"not Hermitian (error {self.hermiticity_error():.2e})")
        if abs(self.trace - 1) > trace_tol:
            raise InvalidArgument(f"trace {self.trace!r} differs from 1")
        if self.min_eigenvalue() < -eig_tol:
            raise InvalidArgument(f"negative eigenvalue {self.min_eigenvalue():.2e}")
        return self


@dataclass
class EvolutionRecord:
    times: np.ndarray
    states: list
    observables: dict
    stop_reason: str
    diagnostics: dict = field(default_factory=dict)


def product_state(space: Space, factors) -> DensityMatrix:
    """Tensor product of local density matrices, one per subsystem in order."""
    mats = [np.asarray(f.matrix if isinstance(f, DensityMatrix) else f, dtype=complex) for f in factors]
    if [m.shape[0] for m in mats] != list(space.dims):
        raise InvalidArgument("factor dimensions do not match the space")
    out = mats[0]
    for m in mats[1:]:
        out = np.kron(out, m)
    return DensityMatrix(space, out)


def excited_initial_state(space: Space, motional=None) -> DensityMatrix:
    """|e><e| x rho_motion x |0><0| on every cavity.

    ``motional`` defaults to the motional ground state.
    """
    factors = []
    for label, d in zip(space.labels, space.dims):
        f = np.zeros((d, d), dtype=complex)
        if label == "motion" and motional is not None:
            f = np.asarray(motional.matrix if isinstance(motional, DensityMatrix) else motional, dtype=complex)
        elif label == "emitter":
            f[1, 1] = 1
        else:
            f[0, 0] = 1
        factors.append(f)
    return product_state(space, factors)


def lindblad_rhs(model: Model, rho: DensityMatrix) -> np.ndarray:
    """-i[H, rho] + sum_i (L rho L^dag - {L^dag L, rho}/2)."""
    if rho.space != model.space:
        raise InvalidArgument("state and model live on different spaces")
    return _Generator(model.effective_hamiltonian(), [L.matrix for L in model.jumps])(0.0, rho.matrix)


class _Generator:
    def __init__(self, heff, jumps):
        self.heff = heff
        self.jumps = [(L, L.conj().T) for L in jumps if L.any()]

    def __call__(self, t, rho):
        # -i(Heff rho - rho Heff^dag) = B + B^dag for Hermitian rho, B = -i Heff rho
        b = -1j * (self.heff @ rho)
        out = b + b.conj().T
        for L, Ld in self.jumps:
            out += (L @ rho) @ Ld
        return out


def reachable_support(model: Model, rho0: DensityMatrix) -> np.ndarray:
    """Basis indices reachable from the support of ``rho0``.

    The span of these basis states is invariant under H, every L_i and
    sum L^dag L, so the master equation closes exactly on it.
    """
    adj = model.hamiltonian.matrix != 0
    adj |= model.decay_operator().matrix != 0
    for L in model.jumps:
        adj |= L.matrix != 0
    reached = np.abs(np.diag(rho0.matrix)) > 0
    reached |= np.any(rho0.matrix != 0, axis=1)
    while True:
        nxt = reached | adj[:, reached].any(axis=1)
        if (nxt == reached).all():
            return np.flatnonzero(reached)
        reached = nxt


class _Restricted:
    """Model and state projected onto an invariant set of basis states."""

    def __init__(self, model: Model, rho0: DensityMatrix, restrict=True):
        n = model.space.total_dim
        self.idx = reachable_support(model, rho0) if restrict else np.arange(n)
        self.n = n
        ix = np.ix_(self.idx, self.idx)
        self.generator = _Generator(model.effective_hamiltonian()[ix], [L.matrix[ix] for L in model.jumps])
        self.rho0 = rho0.matrix[ix]
        self.space = model.space

    def observable(self, op: Operator) -> np.ndarray:
        return op.matrix[np.ix_(self.idx, self.idx)]

    def embed(self, rho_small) -> DensityMatrix:
        if len(self.idx) == self.n:
            return DensityMatrix(self.space, np.array(rho_small))
        full = np.zeros((self.n, self.n), dtype=complex)
        full[np.ix_(self.idx, self.idx)] = rho_small
        return DensityMatrix(self.space, full)


def _expect(op_small, rho_small) -> float:
    # tr(O rho) without forming the product
    return float(np.einsum("ij,ji->", op_small, rho_small).real)


def evolve(model: Model, rho0: DensityMatrix, t_final: float, rtol: float = 1e-8, atol: float = 1e-10,
           t_eval=None, observables=None, store_states: bool = True, stop=None,
           restrict: bool = True) -> EvolutionRecord:
    """Integrate the master equation from ``rho0`` up to ``t_final``.

    Parameters
    ----------
    t_eval : array_like, optional
        Output times; defaults to 101 evenly spaced points.
    observables : dict of name -> Operator, optional
        Expectation values recorded at every output time.
    stop : callable, optional
        ``stop(t, values)`` is called after every accepted step with the
        observable values at that step; returning True ends the run there.
    restrict : bool
        Integrate on the reachable support of ``rho0`` (exact; see
        :func:`reachable_support`).
    """
    if rho0.space != model.space:
        raise InvalidArgument("initial state and model live on different spaces")
    rho0.check(eig_tol=1e-8)
    if t_final <= 0:
        raise InvalidArgument("t_final must be positive")
    observables = dict(observables or {})
    t_eval = np.linspace(0.0, t_final, 101) if t_eval is None else np.asarray(t_eval, dtype=float)
    if np.any(np.diff(t_eval) <= 0) or t_eval[0] < 0 or t_eval[-1] > t_final * (1 + 1e-12):
        raise InvalidArgument("t_eval must be strictly increasing within [0, t_final]")

    sub = _Restricted(model, rho0, restrict)
    obs_small = {k: sub.observable(v) for k, v in observables.items()}
    stepper = DormandPrince(sub.generator, 0.0, sub.rho0, t_final, rtol, atol)
    fail_tol = 10 * max(rtol, 1e-10)

    times, states = [], []
    values = {k: [] for k in observables}
    diag = {"n_steps": 0, "n_rejected": 0, "max_trace_drift": 0.0, "min_eigenvalue": np.inf,
            "support_dim": int(len(sub.idx)), "rtol": rtol, "atol": atol}

    def record(t, rho_small):
        herm = 0.5 * (rho_small + rho_small.conj().T)
        drift = abs(np.trace(herm).real - 1)
        mineig = float(np.linalg.eigvalsh(herm)[0]) if len(herm) else 0.0
        diag["max_trace_drift"] = max(diag["max_trace_drift"], drift)
        diag["min_eigenvalue"] = min(diag["min_eigenvalue"], mineig)
        if drift > fail_tol or mineig < -fail_tol:
            raise IntegrationFailure(
                f"density-matrix invariant violated at t={t:.6g}: trace drift {drift:.2e}, "
                f"min eigenvalue {mineig:.2e}", dict(diag, t=t))
        times.append(t)
        for k, o in obs_small.items():
            values[k].append(_expect(o, herm))
        if store_states:
            states.append(sub.embed(herm))

    i = 0
    while i < len(t_eval) and t_eval[i] <= 0:
        record(0.0, sub.rho0)
        i += 1
    stop_reason = "max_time"
    while not stepper.done:
        st = stepper.step()
        drift = abs(np.trace(st.y1).real - 1)
        if drift > fail_tol:
            raise IntegrationFailure(f"trace drift {drift:.2e} at t={st.t1:.6g}", dict(diag, t=st.t1))
        while i < len(t_eval) and t_eval[i] <= st.t1:
            record(t_eval[i], st.y1 if t_eval[i] == st.t1 else st(t_eval[i]))
            i += 1
        if stop is not None and stop(st.t1, st.y1):
            # locate the first crossing inside the step from the dense output
            lo, hi = st.t0, st.t1
            while hi - lo > 1e-10 * max(hi, 1.0):
                mid = 0.5 * (lo + hi)
                if stop(mid, st(mid)):
                    hi = mid
                else:
                    lo = mid
            t_stop = st.t1 if hi == st.t1 else hi
            # output times past the crossing were recorded above; drop them
            while times and times[-1] > t_stop:
                times.pop()
                for k in values:
                    values[k].pop()
                if store_states:
                    states.pop()
            if not times or times[-1] < t_stop:
                record(t_stop, st.y1 if t_stop == st.t1 else st(t_stop))
            stepper.t = t_stop
            stop_reason = "converged"
            break
    diag["n_steps"], diag["n_rejected"] = stepper.n_steps, stepper.n_rejected
    diag["n_evals"] = stepper.n_evals
    diag["final_time"] = stepper.t
    return EvolutionRecord(np.array(times), states, {k: np.array(v) for k, v in values.items()},
                           stop_reason, diag)


def _phi(z, t):
    """(exp(z t) - 1) / z, continuous at z = 0."""
    small = np.abs(z * t) < 1e-12
    zs = np.where(small, 1.0, z)
    return np.where(small, t * (1 + 0.5 * z * t), np.expm1(zs * t) / zs)


class SectorPropagator:
    """Closed-form solution for a single decaying excitation.

    Applies when the initial state lives in the one-excitation sector of the
    total excitation number N (emitter plus cavity photons), H conserves N,
    and every jump maps N = 1 to N = 0 while annihilating N = 0. Then the
    N = 1 block obeys d(rho1)/dt = -i(Heff rho1 - rho1 Heff^dag), and the N = 0
    block is the integrated feed sum_i L_i rho1 L_i^dag, rotated by H. With
    Heff = R diag(lam) R^-1 and H0 = Q diag(eps) Q^dag both integrals are done
    exactly, so any time (including very long ones) costs the same.
    """

    def __init__(self, model: Model, rho0: DensityMatrix):
        if not self.applicable(model, rho0):
            raise InvalidArgument("model/state pair lacks the single-excitation decay structure")
        self.model = model
        self.space = model.space
        support = reachable_support(model, rho0)
        N = np.real(np.diag(total_excitation(model.space).matrix))
        self.idx1 = support[np.isclose(N[support], 1)]
        self.idx0 = support[np.isclose(N[support], 0)]
        i1, i0 = self.idx1, self.idx0
        heff = model.effective_hamiltonian()[np.ix_(i1, i1)]
        self.lam, self.R = np.linalg.eig(heff)
        self.Rinv = np.linalg.inv(self.R)
        self.reconstruction_error = float(np.abs((self.R * self.lam) @ self.Rinv - heff).max())
        self.eigvec_condition = float(np.linalg.cond(self.R))
        h0 = model.hamiltonian.matrix[np.ix_(i0, i0)]
        self.eps, self.Q = np.linalg.eigh(0.5 * (h0 + h0.conj().T))
        rho = rho0.matrix
        self.C = self.Rinv @ rho[np.ix_(i1, i1)] @ self.Rinv.conj().T
        self.rho0_tilde = self.Q.conj().T @ rho[np.ix_(i0, i0)] @ self.Q
        self.M = [self.Q.conj().T @ L.matrix[np.ix_(i0, i1)] @ self.R for L in model.jumps]
        self.mu = self.lam[:, None] - self.lam.conj()[None, :]
        self.omega = self.eps[:, None] - self.eps[None, :]
        self._pop_ops = {}
        for name, op in model.initial_excitation_observables().items():
            self._pop_ops[name] = (self.R.conj().T @ op.matrix[np.ix_(i1, i1)] @ self.R).T * self.C

    @staticmethod
    def applicable(model: Model, rho0: DensityMatrix) -> bool:
        if not model.space.has_emitter or rho0.space != model.space:
            return False
        N = np.real(np.diag(total_excitation(model.space).matrix))
        support = reachable_support(model, rho0)
        n_sup = N[support]
        if not np.all(np.isclose(n_sup, 0) | np.isclose(n_sup, 1)):
            return False
        rows = np.any(rho0.matrix != 0, axis=1)
        if not np.all(np.isclose(N[rows], 1)):
            return False
        i1 = support[np.isclose(n_sup, 1)]
        i0 = support[np.isclose(n_sup, 0)]
        if np.any(model.hamiltonian.matrix[np.ix_(i0, i1)] != 0):
            return False
        for L in model.jumps:
            if np.any(L.matrix[np.ix_(i1, i1)] != 0) or np.any(L.matrix[np.ix_(support, i0)] != 0):
                return False
        return True

    def populations(self, times) -> dict:
        """Expectation of each excitation observable at ``times`` (array)."""
        times = np.atleast_1d(np.asarray(times, dtype=float))
        out = {k: np.empty(len(times)) for k in self._pop_ops}
        for start in range(0, len(times), 128):
            chunk = times[start:start + 128]
            E = np.exp(-1j * self.mu[None, :, :] * chunk[:, None, None])
            for k, W in self._pop_ops.items():
                out[k][start:start + 128] = np.einsum("jk,tjk->t", W, E).real
        return out

    def excited_block(self, t: float) -> np.ndarray:
        return self.R @ (self.C * np.exp(-1j * self.mu * t)) @ self.R.conj().T

    def ground_block(self, t: float) -> np.ndarray:
        rot = np.exp(-1j * self.omega * t)
        out = rot * self.rho0_tilde
        for a in range(len(self.eps)):
            z = 1j * (self.omega[a][:, None, None] - self.mu[None, :, :])
            G = rot[a][:, None, None] * _phi(z, t)
            for M in self.M:
                weighted = M[a][:, None] * self.C  # (j, k)
                out[a] += np.einsum("jk,bjk,bk->b", weighted, G, M.conj())
        return self.Q @ out @ self.Q.conj().T

    def state(self, t: float) -> DensityMatrix:
        n = self.space.total_dim
        full = np.zeros((n, n), dtype=complex)
        full[np.ix_(self.idx1, self.idx1)] = self.excited_block(t)
        full[np.ix_(self.idx0, self.idx0)] = self.ground_block(t)
        return DensityMatrix(self.space, 0.5 * (full + full.conj().T))

    def total_population(self, t: float) -> float:
        return float(sum(v[0] for v in self.populations([t]).values()))

    def stopping_time(self, eps_stop: float, max_time: float, scan_step: float = 0.1) -> float | None:
        """First time at which every excitation population is below ``eps_stop``.

        The summed population is non-increasing, so the first time it drops
        below 2 eps_stop bounds the answer from below; the grid scan starts
        there and the crossing is refined by bisection.
        """
        def ok(t):
            return all(v[0] < eps_stop for v in self.populations([t]).values())

        if self.total_population(max_time) >= 2 * eps_stop and not ok(max_time):
            return None
        lo, hi = 0.0, max_time
        if self.total_population(0.0) >= 2 * eps_stop:
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                if self.total_population(mid) < 2 * eps_stop:
                    hi = mid
                else:
                    lo = mid
                if hi - lo <= 1e-10 * max(hi, 1.0):
                    break
            start = lo
        else:
            start = 0.0
        if ok(start):
            return start
        grid = np.arange(start, max_time + scan_step, scan_step)
        grid[-1] = min(grid[-1], max_time)
        for g0 in range(0, len(grid), 512):
            chunk = grid[g0:g0 + 512]
            pops = self.populations(chunk)
            good = np.all([pops[k] < eps_stop for k in pops], axis=0)
            if good.any():
                j = g0 + int(np.argmax(good))
                lo, hi = grid[max(j - 1, 0)], grid[j]
                while hi - lo > 1e-10 * max(hi, 1.0):
                    mid = 0.5 * (lo + hi)
                    if ok(mid):
                        hi = mid
                    else:
                        lo = mid
                return float(hi)
        return None


@dataclass
class LongTimeResult:
    state: DensityMatrix
    time: float
    residuals: dict
    record: EvolutionRecord


def default_max_time(model: Model, method: str = "rk") -> float:
    if method == "spectral":
        return SPECTRAL_MAX_TIME
    return 50.0 * model.timescale


def _snapshot_diagnostics(states) -> dict:
    drift = max(abs(s.trace - 1) for s in states)
    mineig = min(s.min_eigenvalue() for s in states)
    return {"max_trace_drift": float(drift), "min_eigenvalue": float(mineig)}


def run_to_long_time(model: Model, rho0: DensityMatrix, eps_stop: float = DEFAULT_EPS_STOP,
                     max_time: float | None = None, rtol: float = 1e-8, atol: float = 1e-10,
                     t_eval=None, observables=None, restrict: bool = True,
                     method: str = "auto") -> LongTimeResult:
    """Evolve until every excitation population (emitter, cavities) is below ``eps_stop``.

    ``method`` is "rk" (adaptive Runge-Kutta), "spectral" (closed form via
    :class:`SectorPropagator`) or "auto", which picks spectral whenever the
    model/state pair admits it.
    """
    if method not in ("auto", "rk", "spectral"):
        raise InvalidArgument(f"unknown method {method!r}")
    if rho0.space != model.space:
        raise InvalidArgument("initial state and model live on different spaces")
    rho0.check()
    if method == "auto":
        method = "spectral" if SectorPropagator.applicable(model, rho0) else "rk"
    max_time = default_max_time(model, method) if max_time is None else float(max_time)
    pops = model.initial_excitation_observables()

    if method == "spectral":
        prop = SectorPropagator(model, rho0)
        t_star = prop.stopping_time(eps_stop, max_time)
        obs = dict(pops)
        obs.update(observables or {})
        if t_star is None:
            residuals = {k: float(v[0]) for k, v in prop.populations([max_time]).items()}
            raise NotConverged(
                f"excitation not below {eps_stop:g} by t={max_time:g}: "
                + ", ".join(f"{k}={v:.3g}" for k, v in residuals.items()), max_time, residuals)
        times = [float(t) for t in (t_eval if t_eval is not None else []) if t < t_star] + [t_star]
        states = [prop.state(t) for t in times]
        values = {k: np.array([s.expect(o) for s in states]) for k, o in obs.items()}
        diag = {"method": "spectral", "support_dim": int(len(prop.idx0) + len(prop.idx1)),
                "eigvec_condition": prop.eigvec_condition,
                "reconstruction_error": prop.reconstruction_error, "final_time": t_star}
        diag.update(_snapshot_diagnostics(states))
        rec = EvolutionRecord(np.array(times), states, values, "converged", diag)
        final = states[-1]
        residuals = {k: final.expect(v) for k, v in pops.items()}
        return LongTimeResult(final, t_star, residuals, rec)

    sub = _Restricted(model, rho0, restrict)
    pop_diag = {k: np.real(np.diag(sub.observable(v))) for k, v in pops.items()}

    def stop(t, rho_small):
        d = np.real(np.diag(rho_small))
        return all(float(w @ d) < eps_stop for w in pop_diag.values())

    obs = dict(pops)
    obs.update(observables or {})
    rec = evolve(model, rho0, max_time, rtol, atol, t_eval=np.array([0.0]) if t_eval is None else t_eval,
                 observables=obs, store_states=True, stop=stop, restrict=restrict)
    rec.diagnostics["method"] = "rk"
    final = rec.states[-1]
    residuals = {k: final.expect(v) for k, v in pops.items()}
    if rec.stop_reason != "converged":
        raise NotConverged(
            f"excitation not below {eps_stop:g} by t={max_time:g}: "
            + ", ".join(f"{k}={v:.3g}" for k, v in residuals.items()),
            rec.times[-1], residuals)
    return LongTimeResult(final, float(rec.times[-1]), residuals, rec)


def long_time_state(model: Model, rho0: DensityMatrix, eps_stop: float = DEFAULT_EPS_STOP,
                    max_time: float | None = None, **kwargs) -> DensityMatrix:
    return run_to_long_time(model, rho0, eps_stop, max_time, **kwargs).state


def partial_trace(rho: DensityMatrix, keep) -> DensityMatrix:
    """Reduced state on the subsystems listed in ``keep`` (slot indices or labels)."""
    space = rho.space
    keep = [space.slot(k) if isinstance(k, str) else int(k) for k in np.atleast_1d(keep)]
    if not keep or len(set(keep)) != len(keep) or any(not 0 <= k < len(space.dims) for k in keep):
        raise InvalidArgument(f"invalid subsystem selection {keep} for {space.labels}")
    keep = sorted(keep)
    n = len(space.dims)
    t = rho.matrix.reshape(space.dims + space.dims)
    letters = "abcdefghijklmnopqrstuvwxyz"
    row = list(letters[:n])
    col = list(letters[n:2 * n])
    for k in range(n):
        if k not in keep:
            col[k] = row[k]
    out = "".join(row[k] for k in keep) + "".join(col[k] for k in keep)
    reduced = np.einsum("".join(row) + "".join(col) + "->" + out, t)
    sub = space.subspace(keep)
    d = sub.total_dim
    return DensityMatrix(sub, reduced.reshape(d, d))


def motional_state(rho: DensityMatrix) -> DensityMatrix:
    return partial_trace(rho, [rho.space.motion_slot])
