"""Diagnostics of (reduced motional) states.

Phase-space convention: x = v + v^dag, p = -i(v - v^dag), alpha = (x + ip)/2.
Wigner functions are normalised to unit integral over dx dp, so the vacuum
peaks at 1/(2 pi).
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from . import hilbert as hs
from .hilbert import InvalidArgument, Space
from .lindblad import DensityMatrix

DEFAULT_EXTENT = 8.0
DEFAULT_POINTS = 201
BOUNDARY_TOL = 1e-4
NEGATIVITY_RADIAL_STEP = 1e-3
NEGATIVITY_ANGLES = 2048
NEGATIVITY_BOUNDARY_TOL = 1e-8


class CutoffTooSmall(InvalidArgument):
    pass


class GridExtentWarning(UserWarning):
    pass


def _single_mode(rho: DensityMatrix):
    if len(rho.space.dims) != 1:
        raise InvalidArgument(f"expected a single-mode state, got subsystems {rho.space.labels}")


# -- reference states -------------------------------------------------------

def fock_state(n: int, cutoff: int) -> DensityMatrix:
    space = hs.make_space(False, cutoff)
    return DensityMatrix.from_pure(space, hs.basis_state(space, {"motion": n}))


def coherent_amplitudes(alpha: complex, cutoff: int) -> np.ndarray:
    """Fock amplitudes e^{-|a|^2/2} a^n / sqrt(n!), renormalised after truncation."""
    n = np.arange(cutoff + 1)
    with np.errstate(divide="ignore"):
        logmag = np.where(n > 0, n * np.log(abs(alpha)) if alpha != 0 else -np.inf, 0.0)
    amps = np.exp(logmag - 0.5 * gammaln(n + 1) - abs(alpha) ** 2 / 2) * np.exp(1j * n * np.angle(alpha))
    return amps / np.linalg.norm(amps)


def coherent_state(alpha: complex, cutoff: int) -> DensityMatrix:
    return DensityMatrix.from_pure(hs.make_space(False, cutoff), coherent_amplitudes(alpha, cutoff))


def thermal_state(nbar: float, cutoff: int) -> DensityMatrix:
    """Boltzmann state with mean occupation ``nbar``, truncated and renormalised."""
    if nbar < 0 or not np.isfinite(nbar):
        raise InvalidArgument(f"nbar must be finite and nonnegative, got {nbar}")
    space = hs.make_space(False, cutoff)
    if nbar == 0:
        return fock_state(0, cutoff)
    q = nbar / (nbar + 1)
    p = (1 - q) * q ** np.arange(cutoff + 1)
    if p.sum() < 0.999:
        raise CutoffTooSmall(f"cutoff {cutoff} keeps only {p.sum():.4f} of the thermal weight for nbar={nbar}")
    return DensityMatrix(space, np.diag(p / p.sum()).astype(complex))


# -- scalar diagnostics -----------------------------------------------------

def purity(rho: DensityMatrix) -> float:
    m = rho.matrix
    # tr(rho^2) = sum |rho_ij|^2 for Hermitian rho
    return float(np.sum(np.abs(m) ** 2))


def von_neumann_entropy(rho: DensityMatrix) -> float:
    lam = np.linalg.eigvalsh(0.5 * (rho.matrix + rho.matrix.conj().T))
    lam = lam[lam >= 1e-12]
    return float(-np.sum(lam * np.log(lam)))


def trace_distance(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    if rho.space != sigma.space:
        raise InvalidArgument("trace distance needs states on the same space")
    diff = rho.matrix - sigma.matrix
    return float(0.5 * np.sum(np.abs(np.linalg.eigvalsh(0.5 * (diff + diff.conj().T)))))


def number_distribution(rho: DensityMatrix) -> np.ndarray:
    _single_mode(rho)
    return np.real(np.diag(rho.matrix)).copy()


def mean_number(rho: DensityMatrix) -> float:
    p = number_distribution(rho)
    return float(np.arange(len(p)) @ p)


def off_diagonal_mass(rho: DensityMatrix) -> float:
    """Sum of |rho_mn| over m != n, divided by the trace."""
    _single_mode(rho)
    m = np.abs(rho.matrix)
    return float((m.sum() - np.trace(m)) / rho.trace)


def free_rotation(rho: DensityMatrix, t: float, omega: float = 1.0) -> DensityMatrix:
    """Apply exp(-i omega v^dag v t) to a single-mode state."""
    _single_mode(rho)
    phase = np.exp(-1j * omega * t * np.arange(rho.space.dims[0]))
    return DensityMatrix(rho.space, phase[:, None] * rho.matrix * phase.conj()[None, :])


# -- Wigner function --------------------------------------------------------

@dataclass(frozen=True, eq=False)
class WignerGrid:
    x: np.ndarray
    p: np.ndarray
    # values[i, j] = W(x[i], p[j])
    values: np.ndarray

    @property
    def dx(self) -> float:
        return float(self.x[1] - self.x[0])

    @property
    def dp(self) -> float:
        return float(self.p[1] - self.p[0])

    def integral(self) -> float:
        return float(self.values.sum() * self.dx * self.dp)

    def boundary_max(self) -> float:
        v = np.abs(self.values)
        return float(max(v[0].max(), v[-1].max(), v[:, 0].max(), v[:, -1].max()))

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "p", "W"])
            for i, xi in enumerate(self.x):
                for j, pj in enumerate(self.p):
                    w.writerow([repr(float(xi)), repr(float(pj)), repr(float(self.values[i, j]))])

    def to_dict(self) -> dict:
        return {"x": self.x.tolist(), "p": self.p.tolist(),
                "shape": list(self.values.shape), "values": self.values.ravel().tolist()}

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def from_dict(cls, d) -> "WignerGrid":
        return cls(np.array(d["x"]), np.array(d["p"]), np.array(d["values"]).reshape(d["shape"]))


def _kernel_sum(rho: np.ndarray, alpha: np.ndarray) -> np.ndarray:
    """W at the phase-space points ``alpha`` (any shape).

    Uses the upward recurrence for the normalised Laguerre kernels
    w_mn(alpha), so no factorials or large powers are ever formed.
    """
    M = rho.shape[0]
    two_a, two_ac = 2 * alpha, 2 * alpha.conj()
    w = np.empty((M,) + alpha.shape, dtype=complex)
    w[0] = np.exp(-2 * np.abs(alpha) ** 2) / np.pi
    acc = np.real(rho[0, 0]) * w[0].real
    for n in range(1, M):
        w[n] = two_a * w[n - 1] / np.sqrt(n)
        acc += 2 * np.real(rho[0, n] * w[n])
    for m in range(1, M):
        sm = np.sqrt(m)
        prev = w[m].copy()  # w_{m-1, m}
        w[m] = (two_ac * prev - sm * w[m - 1]) / sm
        acc += np.real(rho[m, m] * w[m])
        for n in range(m + 1, M):
            nxt = (two_a * w[n - 1] - sm * prev) / np.sqrt(n)
            prev = w[n].copy()
            w[n] = nxt
            if rho[m, n] != 0:
                acc += 2 * np.real(rho[m, n] * w[n])
    # sum above is the d^2 alpha density divided by 2; dx dp = 4 d^2 alpha
    return 0.5 * acc


def wigner_values(rho: np.ndarray, x: np.ndarray, p: np.ndarray) -> np.ndarray:
    """W(x, p) on the outer grid of ``x`` and ``p`` from a Fock-basis matrix."""
    rho = np.asarray(rho, dtype=complex)
    return _kernel_sum(rho, 0.5 * (np.asarray(x)[:, None] + 1j * np.asarray(p)[None, :]))


def wigner_points(rho: np.ndarray, x, p, chunk: int = 100_000) -> np.ndarray:
    """W at paired points (x[i], p[i]); arrays of equal shape."""
    rho = np.asarray(rho, dtype=complex)
    x, p = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(p, dtype=float))
    out = np.empty(x.shape)
    xf, pf, of = x.ravel(), p.ravel(), out.reshape(-1)
    for s in range(0, len(xf), chunk):
        of[s:s + chunk] = _kernel_sum(rho, 0.5 * (xf[s:s + chunk] + 1j * pf[s:s + chunk]))
    return out


def wigner(rho: DensityMatrix, extent: float = DEFAULT_EXTENT, points: int = DEFAULT_POINTS,
           auto_widen: bool = True, max_extent: float = 32.0) -> WignerGrid:
    """Wigner function of a single-mode state on a square grid [-extent, extent]^2.

    When the boundary magnitude exceeds 1e-4 the grid is widened at fixed
    spacing (up to ``max_extent``); a :class:`GridExtentWarning` is issued
    if that is not enough.
    """
    _single_mode(rho)
    spacing = 2 * extent / (points - 1)
    while True:
        x = np.linspace(-extent, extent, points)
        grid = WignerGrid(x, x.copy(), wigner_values(rho.matrix, x, x))
        if grid.boundary_max() <= BOUNDARY_TOL or not auto_widen or extent >= max_extent:
            break
        extent = min(extent + 4.0, max_extent)
        points = int(round(2 * extent / spacing)) + 1
    if grid.boundary_max() > BOUNDARY_TOL:
        warnings.warn(f"Wigner grid boundary magnitude {grid.boundary_max():.2e} exceeds "
                      f"{BOUNDARY_TOL:g}; widen the grid", GridExtentWarning, stacklevel=2)
    return grid


def integrated_negativity(w: WignerGrid) -> float:
    """Riemann sum of W over the cells where W < 0 (always <= 0)."""
    v = w.values
    return float(v[v < 0].sum() * w.dx * w.dp)


def negativity_noise_bound(w: WignerGrid) -> float:
    """Discretisation error estimate from comparison with the half-resolution grid."""
    coarse = WignerGrid(w.x[::2], w.p[::2], w.values[::2, ::2])
    return abs(integrated_negativity(w) - integrated_negativity(coarse)) / 3.0


def radial_harmonics(rho: np.ndarray, radius: np.ndarray) -> np.ndarray:
    """Angular Fourier components of W on circles of phase-space radius ``radius``.

    Every kernel w_mn(alpha) equals w_mn(|alpha|) e^{i(n-m) arg alpha}, so
    W(r, theta) = Re sum_d G_d(r) e^{i d theta} with G returned as an array of
    shape (M, len(radius)). Here r = sqrt(x^2 + p^2) = 2 |alpha|.
    """
    rho = np.asarray(rho, dtype=complex)
    M = rho.shape[0]
    a = 0.5 * np.asarray(radius, dtype=float)
    G = np.zeros((M,) + a.shape, dtype=complex)
    w = np.empty((M,) + a.shape)
    w[0] = np.exp(-2 * a * a) / np.pi
    G[0] += np.real(rho[0, 0]) * w[0]
    for n in range(1, M):
        w[n] = 2 * a * w[n - 1] / np.sqrt(n)
        G[n] += 2 * rho[0, n] * w[n]
    for m in range(1, M):
        sm = np.sqrt(m)
        prev = w[m].copy()
        w[m] = (2 * a * prev - sm * w[m - 1]) / sm
        G[0] += np.real(rho[m, m]) * w[m]
        for n in range(m + 1, M):
            nxt = (2 * a * w[n - 1] - sm * prev) / np.sqrt(n)
            prev = w[n].copy()
            w[n] = nxt
            G[n - m] += 2 * rho[m, n] * w[n]
    return 0.5 * G


def wigner_negativity(rho: DensityMatrix, radial_step: float = NEGATIVITY_RADIAL_STEP,
                      angles: int = NEGATIVITY_ANGLES, boundary_tol: float = NEGATIVITY_BOUNDARY_TOL,
                      max_radius: float = 40.0) -> float:
    """Integrated negativity of W computed on a polar grid.

    Uses midpoint rules in r (times the r dr measure) and in theta, with W
    on each circle synthesised by an FFT of its angular harmonics. Free
    rotation only shifts theta, so the result is invariant under it to
    about 1e-9; the absolute error from the kink of min(W, 0) is of order
    radial_step^2 (about 1e-7 for Fock |1> at the default step). The outer
    radius grows in steps of 2 until sum_d |G_d| < ``boundary_tol`` there.
    """
    _single_mode(rho)
    radius = DEFAULT_EXTENT
    while True:
        edge = float(np.abs(radial_harmonics(rho.matrix, np.array([radius]))).sum())
        if edge <= boundary_tol or radius >= max_radius:
            break
        radius += 2.0
    if edge > boundary_tol:
        warnings.warn(f"Wigner function up to {edge:.1e} at r = {radius}", GridExtentWarning, stacklevel=2)
    nr = int(np.ceil(radius / radial_step))
    dr = radius / nr
    r = (np.arange(nr) + 0.5) * dr
    G = radial_harmonics(rho.matrix, r)
    if angles < 2 * G.shape[0]:
        raise InvalidArgument(f"need at least {2 * G.shape[0]} angles for this cutoff")
    # midpoint angles theta_j = 2 pi (j + 1/2) / angles
    G *= np.exp(1j * np.pi * np.arange(G.shape[0]) / angles)[:, None]
    total = 0.0
    chunk = max(1, 2**22 // angles)
    for s in range(0, nr, chunk):
        block = np.zeros((angles, min(chunk, nr - s)), dtype=complex)
        block[:G.shape[0]] = G[:, s:s + chunk]
        W = np.fft.ifft(block, axis=0).real * angles
        total += float(np.minimum(W, 0).sum(axis=0) @ r[s:s + chunk])
    return total * dr * 2 * np.pi / angles


def motional_metrics(rho_m: DensityMatrix, grid: WignerGrid | None = None, **wigner_kwargs) -> dict:
    """The rotation-invariant scalar summary used in reports.

    ``integrated_negativity`` comes from :func:`wigner_negativity`;
    ``grid_negativity`` is the Riemann sum on the reporting grid and
    ``negativity_noise_bound`` its half-resolution error estimate.
    """
    grid = wigner(rho_m, **wigner_kwargs) if grid is None else grid
    return {
        "purity": purity(rho_m),
        "entropy": von_neumann_entropy(rho_m),
        "integrated_negativity": wigner_negativity(rho_m),
        "grid_negativity": integrated_negativity(grid),
        "negativity_noise_bound": negativity_noise_bound(grid),
        "wigner_integral": grid.integral(),
        "number_distribution": number_distribution(rho_m).tolist(),
        "mean_number": mean_number(rho_m),
        "off_diagonal_mass": off_diagonal_mass(rho_m),
    }


def motion_only_space(cutoff: int) -> Space:
    return hs.make_space(False, cutoff)
