import numpy as np
import pytest
from scipy.integrate import solve_ivp

from hfbeam import dp45
from hfbeam.errors import StepFailure


def test_matches_scipy_on_nonlinear_complex_ode():
    def f(t, y):
        return np.array([1j * y[0] - 0.1 * y[0] * np.abs(y[1]) ** 2,
                         -0.5 * y[1] + 0.2 * np.sin(t) * y[0]])

    y0 = np.array([1.0 + 0.5j, 0.3 - 0.2j])
    mine = dp45.integrate(f, 0.0, y0, [2.5], tol=1e-11)[0]
    ref = solve_ivp(f, (0.0, 2.5), y0, rtol=1e-12, atol=1e-13, dense_output=False)
    assert np.allclose(mine, ref.y[:, -1], atol=1e-8)


def test_multiple_output_times_and_backward():
    f = lambda t, y: 1j * y
    y0 = np.array([1.0 + 0j])
    ts = [0.5, 1.0, 2.0]
    outs = dp45.integrate(f, 0.0, y0, ts, tol=1e-10)
    for t, y in zip(ts, outs):
        assert np.allclose(y, np.exp(1j * t), atol=1e-8)
    back = dp45.integrate(f, 0.0, y0, [-1.5], tol=1e-10)[0]
    assert np.allclose(back, np.exp(-1.5j), atol=1e-8)


def test_output_at_start_time():
    f = lambda t, y: 0 * y
    outs = dp45.integrate(f, 1.0, np.array([2.0 + 0j]), [1.0, 2.0], tol=1e-10)
    assert np.allclose(outs[0], 2.0)
    assert np.allclose(outs[1], 2.0)


def test_post_step_hook_runs():
    seen = []

    def post(t, y):
        seen.append(t)
        y[:] = y.real  # projection; rhs keeps imaginary part zero anyway

    f = lambda t, y: -y
    out = dp45.integrate(f, 0.0, np.array([1.0 + 0j]), [1.0], tol=1e-9, post_step=post)[0]
    assert seen, "post_step was never invoked"
    assert np.allclose(out, np.exp(-1.0), atol=1e-7)


def test_step_failure_on_blowup():
    # y' = y^2 from y(0)=1 blows up at t=1; integration to t=2 must fail
    f = lambda t, y: y * y
    with pytest.raises(StepFailure):
        dp45.integrate(f, 0.0, np.array([1.0 + 0j]), [2.0], tol=1e-10, max_steps=5000)
