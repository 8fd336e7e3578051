import numpy as np
import pytest

from compactpf import grid_model, jacobian
from compactpf.errors import ValidationError


def _point(net, rng):
    v = rng.uniform(0.95, 1.05, net.n)
    theta = rng.uniform(-0.3, 0.3, net.n)
    theta[net.ref] = 0.0
    return v, theta


def test_injection_jacobian_fd(net14):
    rng = np.random.default_rng(10)
    v, theta = _point(net14, rng)

    def f(z):
        op = grid_model.eval_power_flow(net14, z[:net14.n], z[net14.n:])
        return np.concatenate([op.p_inj, op.q_inj])

    J = jacobian.injection_jacobian(net14, v, theta)
    Jfd = jacobian.finite_difference_jacobian(f, np.concatenate([v, theta]))
    assert np.max(np.abs(J - Jfd)) < 1e-6 * (1 + np.max(np.abs(J)))


@pytest.mark.parametrize("direction", ["ft", "tf"])
def test_line_flow_jacobian_fd(net14, direction):
    rng = np.random.default_rng(11)
    v, theta = _point(net14, rng)

    def f(z):
        op = grid_model.eval_power_flow(net14, z[:net14.n], z[net14.n:])
        p = getattr(op, f"p_{direction}")
        q = getattr(op, f"q_{direction}")
        return np.concatenate([p, q])

    J = jacobian.line_flow_jacobian(net14, v, theta, direction)
    Jfd = jacobian.finite_difference_jacobian(f, np.concatenate([v, theta]))
    assert np.max(np.abs(J - Jfd)) < 1e-6 * (1 + np.max(np.abs(J)))


@pytest.mark.parametrize("direction", ["ft", "tf"])
def test_apparent_flow_jacobian_fd(net14, direction):
    rng = np.random.default_rng(12)
    v, theta = _point(net14, rng)

    def f(z):
        op = grid_model.eval_power_flow(net14, z[:net14.n], z[net14.n:])
        return getattr(op, f"s_{direction}")

    J = jacobian.apparent_flow_jacobian(net14, v, theta, direction)
    Jfd = jacobian.finite_difference_jacobian(f, np.concatenate([v, theta]))
    assert np.max(np.abs(J - Jfd)) < 1e-6 * (1 + np.max(np.abs(J)))


def test_full_jacobian_stacks(net14):
    rng = np.random.default_rng(13)
    v, theta = _point(net14, rng)
    J = jacobian.full_jacobian(net14, v, theta)
    assert J.shape == (2 * net14.n + 2 * net14.m, 2 * net14.n)
    top = jacobian.injection_jacobian(net14, v, theta)
    assert np.array_equal(J[:2 * net14.n], top)


def test_linearize_exact_at_point(net14, lin14):
    # exact at x0 by construction
    y0 = grid_model.eval_at_input(net14, lin14.x0)
    assert np.allclose(lin14.predict(lin14.x0), y0, atol=1e-12)
    assert lin14.d_in == net14.d_in
    assert lin14.d_out == net14.d_out


def test_linearize_first_order(net14, lin14):
    rng = np.random.default_rng(14)
    dx = rng.standard_normal(net14.d_in)
    dx /= np.linalg.norm(dx)

    def err(h):
        x1 = lin14.x0 + h * dx
        return np.max(np.abs(lin14.predict(x1)
                             - grid_model.eval_at_input(net14, x1)))

    # remainder must vanish quadratically in the step size
    assert err(1e-5) < 0.03 * err(1e-4)
    assert err(1e-4) < 0.03 * err(1e-3)


def test_linearize_requires_zero_ref_angle(net14):
    v = np.ones(net14.n)
    theta = np.full(net14.n, 0.05)
    op = grid_model.eval_power_flow(net14, v, theta)
    with pytest.raises(ValidationError):
        jacobian.linearize(net14, op)


def test_apparent_jacobian_finite_at_zero_flow(net2):
    # flat start has exactly zero flow; rows must still be finite
    J = jacobian.apparent_flow_jacobian(net2, np.ones(2), np.zeros(2), "ft")
    assert np.all(np.isfinite(J))


def test_dump_jacobian_text():
    J = np.array([[1.0, 2.0], [3.0, 4.0]])
    text = jacobian.dump_jacobian(J, header="demo")
    lines = text.strip().split("\n")
    assert lines[0].startswith("# demo shape=2x2")
    assert len(lines) == 3
