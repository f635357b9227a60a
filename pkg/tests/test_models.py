import numpy as np
import pytest
from hypothesis import given, strategies as st

from recoil import hilbert as hs
from recoil import models as M
from recoil.hilbert import InvalidArgument


def superoperator(model):
    """Dense Lindbladian acting on row-major vec(rho); small systems only."""
    n = model.space.total_dim
    eye = np.eye(n)
    heff = model.effective_hamiltonian()
    out = -1j * np.kron(heff, eye) + 1j * np.kron(eye, heff.conj())
    for L in model.jumps:
        out += np.kron(L.matrix, L.matrix.conj())
    return out


def test_waveguide_eta_zero():
    m = M.waveguide_model(M.ModelParams(gamma=0.8, eta=0.0), 6)
    sm = hs.sigma_minus(m.space).matrix
    for L in m.jumps:
        np.testing.assert_allclose(L.matrix, np.sqrt(0.4) * sm, atol=1e-14)


@pytest.mark.parametrize("kind", ["waveguide", "beamsplitter_mixed"])
@pytest.mark.parametrize("eta", [0.0, 0.5, 2.0])
def test_decay_operator_is_gamma_sigma_plus_minus(kind, eta):
    m = M.build_model(kind, M.ModelParams(gamma=1.3, eta=eta), motional_cutoff=15)
    expected = 1.3 * hs.excited_projector(m.space).matrix
    np.testing.assert_allclose(m.decay_operator().matrix, expected, atol=1e-12)


def test_beamsplitter_eta_zero():
    m = M.beamsplitter_mixed_model(M.ModelParams(gamma=2.0, eta=0.0), 5)
    assert m.jumps[1].norm() < 1e-14
    np.testing.assert_allclose(m.jumps[0].matrix, np.sqrt(2.0) * hs.sigma_minus(m.space).matrix, atol=1e-14)


@pytest.mark.parametrize("eta", [0.3, 1.1])
def test_waveguide_and_beamsplitter_share_lindbladian(eta):
    p = M.ModelParams(gamma=0.7, eta=eta)
    a = superoperator(M.waveguide_model(p, 5))
    b = superoperator(M.beamsplitter_mixed_model(p, 5))
    np.testing.assert_allclose(a, b, atol=1e-12)


@pytest.mark.parametrize("n", [0, 1, 2])
def test_mirror_node_suppresses_decay(n):
    m = M.mirror_model(M.ModelParams(gamma=0.25, eta=0.0, phi=(2 * n + 1) * np.pi / 2), 6)
    assert m.jumps[0].norm() < 1e-14
    trap = hs.number(m.space, m.space.motion_slot).matrix
    np.testing.assert_allclose(m.hamiltonian.matrix, trap, atol=1e-14)


def test_mirror_antinode():
    m = M.mirror_model(M.ModelParams(gamma=0.25, eta=0.0, phi=0.0), 6)
    np.testing.assert_allclose(m.jumps[0].matrix, np.sqrt(0.5) * hs.sigma_minus(m.space).matrix, atol=1e-14)
    np.testing.assert_allclose(m.hamiltonian.matrix, hs.number(m.space, 1).matrix, atol=1e-14)
    assert m.labels == ("left",)


def test_mirror_shift_term():
    # H - trap = (gamma/2)|e><e| sin(2 phi - 2 eta x); check on the ground motional diagonal
    gamma, eta, phi = 0.4, 0.6, 0.3
    m = M.mirror_model(M.ModelParams(gamma=gamma, eta=eta, phi=phi), 25)
    shift = m.hamiltonian - hs.number(m.space, 1)
    e0 = hs.basis_state(m.space, {"emitter": 1})
    # <0| sin(a - b x)|0> = sin(a) exp(-b^2/2) for the vacuum Gaussian with <x^2> = 1
    expected = gamma / 2 * np.sin(2 * phi) * np.exp(-(2 * eta) ** 2 / 2)
    assert np.vdot(e0, shift.matrix @ e0).real == pytest.approx(expected, abs=1e-10)


def toroid(**kw):
    base = dict(g=0.25, kappa=2.0, eta=2.0, delta=3.0)
    base.update(kw)
    return M.toroid_model(M.ModelParams(**base), motional_cutoff=10, cavity_cutoff=2)


def test_toroid_conserves_excitation():
    m = toroid()
    N = M.total_excitation(m.space).matrix
    H = m.hamiltonian.matrix
    assert np.linalg.norm(H @ N - N @ H, 2) < 1e-12


def test_toroid_detuning_places_excited_state_above():
    m = toroid(delta=1.7, g=1e-9)
    e = hs.basis_state(m.space, {"emitter": 1})
    g1 = hs.basis_state(m.space, {"emitter": 0, "cavity1": 1})
    H = m.hamiltonian.matrix
    assert np.vdot(e, H @ e).real - np.vdot(g1, H @ g1).real == pytest.approx(1.7, abs=1e-8)


def test_toroid_jumps():
    m = toroid()
    a1 = hs.annihilation(m.space, 2).matrix
    np.testing.assert_allclose(m.jumps[0].matrix, np.sqrt(2.0) * a1)
    assert m.labels == ("left", "right")


@given(st.floats(0.01, 3), st.floats(0.01, 4), st.floats(0, 3), st.floats(-5, 5))
def test_toroid_hermitian(g, kappa, eta, delta):
    m = M.toroid_model(M.ModelParams(g=g, kappa=kappa, eta=eta, delta=delta), motional_cutoff=6, cavity_cutoff=1)
    assert m.hamiltonian.is_hermitian(1e-12)


@given(st.sampled_from(["waveguide", "mirror", "beamsplitter_mixed"]),
       st.floats(0.01, 10), st.floats(0, 3), st.floats(-np.pi, np.pi))
def test_models_hermitian_and_share_space(kind, gamma, eta, phi):
    m = M.build_model(kind, M.ModelParams(gamma=gamma, eta=eta, phi=phi), motional_cutoff=8)
    assert m.hamiltonian.is_hermitian(1e-12)
    assert all(L.space == m.space for L in m.jumps)


@pytest.mark.parametrize("kw", [dict(gamma=-1), dict(eta=float("nan")), dict(kappa=-0.1), dict(phi=float("inf"))])
def test_invalid_params(kw):
    with pytest.raises(InvalidArgument):
        M.ModelParams(**kw)


def test_missing_rates_rejected():
    with pytest.raises(InvalidArgument):
        M.waveguide_model(M.ModelParams(gamma=0.0))
    with pytest.raises(InvalidArgument):
        M.toroid_model(M.ModelParams(g=0.0, kappa=1.0))
    with pytest.raises(InvalidArgument):
        M.build_model("laser", M.ModelParams())
