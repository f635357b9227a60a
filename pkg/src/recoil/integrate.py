"""Dormand-Prince 5(4) integrator for complex array-valued ODEs.

Works on arrays of any shape (state vectors, density matrices). Provides
per-step error control and the standard fourth-order dense output.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

C = np.array([0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1, 1])
A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
# fifth-order minus embedded fourth-order weights
E = np.array([-71 / 57600, 0, 71 / 16695, -71 / 1920, 17253 / 339200, -22 / 525, 1 / 40])
# dense-output polynomial coefficients (Shampine's continuous extension)
P = np.array([
    [1, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0, 0, 0, 0],
    [0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0


class IntegrationFailure(RuntimeError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


@dataclass
class Step:
    t0: float
    t1: float
    y0: np.ndarray
    y1: np.ndarray
    k: list

    def __call__(self, t: float) -> np.ndarray:
        h = self.t1 - self.t0
        theta = (t - self.t0) / h
        powers = np.array([theta, theta**2, theta**3, theta**4])
        coeff = P @ powers
        out = self.y0.copy()
        for c, k in zip(coeff, self.k):
            if c:
                out += (h * c) * k
        return out


class DormandPrince:
    """Adaptive stepper; call :meth:`step` repeatedly until ``t >= t_final``."""

    def __init__(self, fun, t0, y0, t_final, rtol=1e-8, atol=1e-10, first_step=None, max_step=np.inf):
        self.fun = fun
        self.t = float(t0)
        self.y = np.array(y0, dtype=complex)
        self.t_final = float(t_final)
        self.rtol, self.atol = rtol, atol
        self.max_step = max_step
        self.n_steps = 0
        self.n_rejected = 0
        self.n_evals = 1
        self.f = fun(self.t, self.y)
        self.h = first_step or self._initial_step()

    def _scale(self, y0, y1):
        return self.atol + self.rtol * np.maximum(np.abs(y0), np.abs(y1))

    def _norm(self, x):
        return float(np.sqrt(np.mean(np.abs(x) ** 2)))

    def _initial_step(self):
        scale = self._scale(self.y, self.y)
        d0, d1 = self._norm(self.y / scale), self._norm(self.f / scale)
        h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
        y1 = self.y + h0 * self.f
        f1 = self.fun(self.t + h0, y1)
        self.n_evals += 1
        d2 = self._norm((f1 - self.f) / scale) / h0
        if max(d1, d2) <= 1e-15:
            h1 = max(1e-6, h0 * 1e-3)
        else:
            h1 = (0.01 / max(d1, d2)) ** (1 / 5)
        return min(100 * h0, h1, self.max_step, max(self.t_final - self.t, 1e-12))

    @property
    def done(self) -> bool:
        return self.t >= self.t_final

    def step(self) -> Step:
        """Advance by one accepted step and return its dense-output interpolant."""
        while True:
            h = min(self.h, self.max_step, self.t_final - self.t)
            if h <= 1e-14 * max(1.0, abs(self.t)):
                raise IntegrationFailure("step size underflow", {"t": self.t, "h": h})
            k = [self.f]
            for i in range(1, 7):
                yi = self.y.copy()
                for a, kj in zip(A[i], k):
                    if a:
                        yi += (h * a) * kj
                if i == 6:
                    y_new = yi
                k.append(self.fun(self.t + C[i] * h, yi))
            self.n_evals += 6
            err = sum((h * e) * kj for e, kj in zip(E, k) if e)
            err_norm = self._norm(err / self._scale(self.y, y_new))
            if not np.isfinite(err_norm):
                raise IntegrationFailure("non-finite local error", {"t": self.t, "h": h})
            if err_norm <= 1.0:
                factor = MAX_FACTOR if err_norm == 0 else min(MAX_FACTOR, SAFETY * err_norm ** -0.2)
                t_old, y_old = self.t, self.y
                self.t = self.t_final if h == self.t_final - t_old else t_old + h
                self.y = y_new
                self.f = k[6]
                self.h = h * factor
                self.n_steps += 1
                return Step(t_old, self.t, y_old, y_new, k)
            self.n_rejected += 1
            self.h = h * max(MIN_FACTOR, SAFETY * err_norm ** -0.2)


def solve(fun, t0, y0, t_eval, rtol=1e-8, atol=1e-10, max_step=np.inf):
    """Integrate and return the solution sampled at ``t_eval`` (sorted, >= t0)."""
    t_eval = np.asarray(t_eval, dtype=float)
    stepper = DormandPrince(fun, t0, y0, t_eval[-1], rtol, atol, max_step=max_step)
    out = []
    i = 0
    while i < len(t_eval) and t_eval[i] <= t0:
        out.append(np.array(y0, dtype=complex))
        i += 1
    while i < len(t_eval):
        st = stepper.step()
        while i < len(t_eval) and t_eval[i] <= st.t1:
            out.append(st.y1.copy() if t_eval[i] == st.t1 else st(t_eval[i]))
            i += 1
    return np.array(out)
