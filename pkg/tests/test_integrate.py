import numpy as np
import pytest
from scipy.integrate import solve_ivp

from recoil.integrate import DormandPrince, IntegrationFailure, solve


def test_exponential_decay():
    t = np.linspace(0, 5, 11)
    y = solve(lambda t, y: -0.7 * y, 0.0, np.array([1.0 + 0j]), t, rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(y[:, 0].real, np.exp(-0.7 * t), rtol=1e-8)


def test_complex_rotation_matrix_state():
    omega = np.array([[1.0, 2.0], [3.0, -1.0]])
    y0 = np.eye(2, dtype=complex)
    y = solve(lambda t, y: -1j * omega * y, 0.0, y0, [0.0, 2.0], rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(y[-1], np.exp(-2j * omega) * y0, atol=1e-8)


def test_matches_scipy_on_oscillator():
    A = np.array([[0, 1], [-4, -0.1]])
    t = np.linspace(0, 10, 21)
    ours = solve(lambda t, y: A @ y, 0.0, np.array([1.0, 0.0]), t, rtol=1e-10, atol=1e-12).real
    ref = solve_ivp(lambda t, y: A @ y, (0, 10), [1.0, 0.0], t_eval=t, rtol=1e-11, atol=1e-13).y.T
    np.testing.assert_allclose(ours, ref, atol=1e-8)


def test_dense_output_is_accurate():
    stepper = DormandPrince(lambda t, y: 1j * y, 0.0, np.array([1 + 0j]), 10.0, rtol=1e-9, atol=1e-12)
    st = stepper.step()
    st = stepper.step()
    tm = 0.5 * (st.t0 + st.t1)
    assert abs(st(tm)[0] - np.exp(1j * tm)) < 1e-8
    np.testing.assert_allclose(st(st.t1), st.y1, atol=1e-14)


def test_counters_and_termination():
    stepper = DormandPrince(lambda t, y: -y, 0.0, np.ones(3, complex), 1.0)
    while not stepper.done:
        stepper.step()
    assert stepper.t == 1.0
    assert stepper.n_steps > 0 and stepper.n_evals >= 6 * stepper.n_steps


def test_nonfinite_raises():
    stepper = DormandPrince(lambda t, y: y**2, 0.0, np.array([1.0 + 0j]), 2.0)
    with pytest.raises(IntegrationFailure):
        while not stepper.done:
            stepper.step()
