import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from recoil import hilbert as hs
from recoil import lindblad as lb
from recoil import models as M
from recoil import slh
from recoil.hilbert import InvalidArgument, Operator

angles = st.floats(0.0, 2 * np.pi, allow_nan=False)


@pytest.fixture(scope="module")
def space():
    return hs.make_space(True, 8)


def random_operator(space, rng):
    d = space.total_dim
    return Operator(space, rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d)))


@given(theta=angles)
def test_beamsplitter_is_unitary(theta):
    S = slh.beamsplitter_scattering(theta)
    np.testing.assert_allclose(S.conj().T @ S, np.eye(2), atol=1e-14)


def test_concatenate_is_block_diagonal(space):
    t = slh.concatenate(slh.beamsplitter(0.3, space), slh.beamsplitter(1.1, space))
    assert t.n_ports == 4
    np.testing.assert_allclose(t.scattering[:2, :2], slh.beamsplitter_scattering(0.3))
    np.testing.assert_allclose(t.scattering[2:, 2:], slh.beamsplitter_scattering(1.1))
    assert not t.scattering[:2, 2:].any()


def test_cascade_of_two_components(space):
    # closing output 1 of A into input 2 of B gives the series product of A and B
    rng = np.random.default_rng(0)
    La, Lb = random_operator(space, rng), random_operator(space, rng)
    Ha = random_operator(space, rng)
    Ha = Operator(space, Ha.matrix + Ha.matrix.conj().T)
    sa, sb = np.exp(0.4j), np.exp(-1.3j)
    A = slh.SLHTriple(space, np.array([[sa]]), (La,), Ha)
    B = slh.SLHTriple(space, np.array([[sb]]), (Lb,), hs.zero(space))
    red = slh.feedback_reduce(slh.concatenate(A, B), 1, 2)
    assert red.scattering[0, 0] == pytest.approx(sb * sa)
    np.testing.assert_allclose(red.jumps[0].matrix, Lb.matrix + sb * La.matrix, atol=1e-12)
    im = (Lb.matrix.conj().T @ (sb * La.matrix))
    np.testing.assert_allclose(red.hamiltonian.matrix, Ha.matrix + (im - im.conj().T) / 2j, atol=1e-12)


def test_singular_feedback_raises(space):
    t = slh.concatenate(slh.SLHTriple(space, np.array([[1.0]]), (hs.zero(space),), hs.zero(space)),
                        slh.beamsplitter(0.0, space))
    with pytest.raises(slh.FeedbackSingularity):
        slh.feedback_reduce(t, 1, 1)


def test_bad_port_indices(space):
    t = slh.beamsplitter(0.3, space)
    with pytest.raises(InvalidArgument):
        slh.feedback_reduce(t, 3, 1)
    with pytest.raises(InvalidArgument):
        slh.reduce_links(slh.fp_network(0.1, 0.2, 0.3, 0.3, 1.0, 0.5, space), [(1, 6), (1, 6)])


def test_fp_reduction_steps_renumber_ports(space):
    _, steps = slh.reduce_links(slh.fp_network(0.9, 0.4, 0.3, 0.3, 0.25, 0.5, space), slh.FP_LINKS)
    assert steps == [(1, 6), (5, 3), (3, 4), (3, 2)]


@pytest.mark.parametrize("draw", range(20))
def test_reduction_matches_closed_form(space, draw):
    rng = np.random.default_rng(draw)
    alpha, beta, phi = rng.uniform(0, 2 * np.pi, 3)
    gamma, eta = rng.uniform(0.05, 2.0), rng.uniform(0.0, 2.5)
    red, _ = slh.reduce_links(slh.fp_network(alpha, beta, phi, phi, gamma, eta, space), slh.FP_LINKS,
                              check_unitary=True)
    ok, report = slh.triples_equal(red, slh.general_fp_triple(alpha, beta, phi, gamma, eta, space), 1e-10)
    assert ok, report
    assert red.unitarity_error() < 1e-10


@given(alpha=angles, beta=angles, phi=angles)
@settings(max_examples=15)
def test_reduction_matches_closed_form_property(alpha, beta, phi):
    space = hs.make_space(True, 5)
    F1 = 1 - np.exp(4j * phi) * np.sin(alpha) * np.sin(beta)
    if abs(F1) < 1e-3:
        return
    red = slh.reduced_fp_network(alpha, beta, phi, phi, 0.4, 0.9, space)
    ok, report = slh.triples_equal(red, slh.general_fp_triple(alpha, beta, phi, 0.4, 0.9, space), 1e-9)
    assert ok, report


@pytest.mark.parametrize("phi", [0.0, 0.3, np.pi / 4, np.pi / 2])
def test_mirror_specialisation(phi):
    space = hs.make_space(True, 10)
    red = slh.reduced_fp_network(np.pi / 2, 0.0, phi, phi, 0.25, 0.7, space)
    mirror = M.mirror_model(M.ModelParams(gamma=0.25, eta=0.7, phi=phi), 10)
    np.testing.assert_allclose(red.jumps[0].matrix, slh.jump_phase(phi) * mirror.jumps[0].matrix, atol=1e-12)
    assert np.abs(red.jumps[1].matrix).max() < 1e-12
    np.testing.assert_allclose(red.hamiltonian.matrix, mirror.hamiltonian.matrix, atol=1e-12)
    assert red.unitarity_error() < 1e-12


def test_global_phase_is_a_gauge():
    space = hs.make_space(True, 6)
    a = slh.general_fp_triple(0.7, 1.1, 0.4, 0.5, 0.8, space)
    b = slh.general_fp_triple(0.7, 1.1, 0.4, 0.5, 0.8, space, global_phase=False)
    for La, Lb in zip(a.jumps, b.jumps):
        np.testing.assert_allclose(La.matrix, slh.jump_phase(0.4) * Lb.matrix)
        np.testing.assert_allclose((La.dag() @ La).matrix, (Lb.dag() @ Lb).matrix, atol=1e-14)


@pytest.mark.parametrize("phi", [0.3, 1.0, 2.2])
def test_fifty_fifty_matches_general(phi):
    space = hs.make_space(True, 6)
    ok, report = slh.triples_equal(slh.fifty_fifty_triple(phi, 0.3, 0.7, space),
                                   slh.general_fp_triple(np.pi / 4, np.pi / 4, phi, 0.3, 0.7, space), 1e-12)
    assert ok, report


def test_resonant_singularity():
    space = hs.make_space(True, 3)
    with pytest.raises(slh.ResonantSingularity):
        slh.general_fp_triple(np.pi / 2, np.pi / 2, 0.0, 1.0, 0.5, space)


def test_operator_scattering_reduction_agrees_with_scalar(space):
    t = slh.fp_network(0.9, 0.4, 0.3, 0.3, 0.25, 0.5, space)
    op = slh.SLHTriple(space, t.scattering_operators(), t.jumps, t.hamiltonian)
    a, _ = slh.reduce_links(t, slh.FP_LINKS)
    b, _ = slh.reduce_links(op, slh.FP_LINKS)
    ok, report = slh.triples_equal(a, b, 1e-12)
    assert ok, report


def test_reduced_network_is_a_valid_master_equation(space):
    red = slh.reduced_fp_network(0.9, 0.4, 0.3, 0.3, 0.25, 0.5, space)
    assert red.hamiltonian.is_hermitian(1e-12)
    model = M.Model("mirror", M.ModelParams(gamma=0.25, eta=0.5, phi=0.3), space, red.hamiltonian,
                    red.jumps, ("out1", "out2"))
    rho = lb.evolve(model, lb.excited_initial_state(space), 5.0, t_eval=[5.0]).states[-1]
    assert abs(rho.trace - 1) < 1e-9
    assert np.linalg.eigvalsh(rho.matrix).min() > -1e-9


def test_network_description_round_trip():
    doc = {"motional_cutoff": 4, "components": [
        {"kind": "fp_network", "alpha": 0.9, "beta": 0.4, "phi1": 0.3, "phi2": 0.3, "gamma": 0.25, "eta": 0.5}],
        "links": [[1, 6], [6, 3], [4, 5], [5, 2]]}
    net, links = slh.network_from_dict(doc)
    assert links == list(slh.FP_LINKS)
    red, _ = slh.reduce_links(net, links)
    d = slh.triple_to_dict(red)
    assert d["n_ports"] == 2 and d["scattering"]["kind"] == "scalar"
    with pytest.raises(InvalidArgument):
        slh.network_from_dict({"components": [{"kind": "laser"}]})
    with pytest.raises(InvalidArgument):
        slh.network_from_dict({"components": [{"kind": "beamsplitter"}]})
