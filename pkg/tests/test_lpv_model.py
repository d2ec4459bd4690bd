import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from slosh.errors import ConfigurationError, DivergenceError
from slosh.lpv import LpvModel, augment_integrators, init_scheduled, schedule_eval, synthetic_lpv
from slosh.lpv.ident import Objective


def scalar_model():
    # p = tanh(tanh(x)): two unit tanh layers with a unit read-out
    net = [(np.array([[1.0, 0.0]]), np.zeros(1)), (np.array([[1.0]]), np.zeros(1)),
           (np.array([[1.0]]), np.zeros(1))]
    A = np.array([[[0.5]], [[0.2]]])
    B = np.array([[[1.0]], [[0.1]]])
    C = np.array([[[2.0]], [[-0.5]]])
    return LpvModel(A, B, C, net, np.array([0.3]), 0.05)


def test_scalar_rollout_by_hand():
    m = scalar_model()
    u = [1.0, -1.0, 0.5]
    x = 0.3
    expected = []
    for uk in u:
        p = math.tanh(math.tanh(x))
        expected.append((2.0 - 0.5 * p) * x)
        x = (0.5 + 0.2 * p) * x + (1.0 + 0.1 * p) * uk
    y = m.simulate(np.array(u)[:, None])
    np.testing.assert_allclose(y[:, 0], expected, rtol=1e-14)


def test_affine_collapse(rng):
    m = synthetic_lpv(seed=2)
    lti_like = LpvModel(np.concatenate([m.A[:1], 0 * m.A[1:]]), np.concatenate([m.B[:1], 0 * m.B[1:]]),
                        np.concatenate([m.C[:1], 0 * m.C[1:]]), m.net, m.x0, m.ts)
    u = rng.normal(size=(200, 3))
    np.testing.assert_allclose(lti_like.simulate(u), m.lti().simulate(u), rtol=1e-12, atol=1e-12)


def test_zero_input_zero_output():
    m = synthetic_lpv(seed=1)
    assert np.all(m.simulate(np.zeros((50, 3))) == 0.0)


def test_divergence_reports_step():
    m = LpvModel(np.array([[[1e3]]]), np.ones((1, 1, 1)), np.ones((1, 1, 1)), x0=np.array([1.0]))
    with pytest.raises(DivergenceError) as err:
        m.simulate(np.zeros((400, 1)))
    assert err.value.step is not None and err.value.step > 0


def test_schedule_eval_zero_weights():
    net = [(np.zeros((4, 7)), np.zeros(4)), (np.zeros((4, 4)), np.zeros(4)), (np.zeros((1, 4)), np.array([0.37]))]
    assert schedule_eval(net, np.ones(4), np.ones(3)) == pytest.approx([0.37])


@given(st.lists(st.floats(-50, 50), min_size=7, max_size=7))
def test_hidden_activations_bounded(z):
    net = synthetic_lpv(seed=0).net
    _, (h1, h2) = schedule_eval(net, np.array(z[:4]), np.array(z[4:]), return_hidden=True)
    assert np.abs(h1).max() <= 1.0 and np.abs(h2).max() <= 1.0


def test_schedule_gradient_matches_fd(rng):
    net = synthetic_lpv(seed=4).net
    z = rng.normal(size=7)
    p, (h1, h2) = schedule_eval(net, z[:4], z[4:], return_hidden=True)
    (W1, _), (W2, _), (W3, _) = net
    analytic = W3 @ np.diag(1 - h2**2) @ W2 @ np.diag(1 - h1**2) @ W1
    eps = 1e-6
    fd = np.column_stack([(schedule_eval(net, (z + eps * e)[:4], (z + eps * e)[4:])
                           - schedule_eval(net, (z - eps * e)[:4], (z - eps * e)[4:])) / (2 * eps)
                          for e in np.eye(7)])
    np.testing.assert_allclose(analytic, fd, rtol=1e-6, atol=1e-9)


def test_loss_gradient_matches_fd(rng):
    m = init_scheduled(synthetic_lpv(seed=3).lti(), rng=rng, m_std=0.1)
    u = rng.normal(size=(20, 3))
    y = synthetic_lpv(seed=3).simulate(u) + 0.01 * rng.normal(size=(20, 3))
    obj = Objective(m, u, y, 1e-4, 1e-6)
    z = obj.pack(m) + 0.05 * rng.normal(size=obj.n_theta + m.n_x)
    f0, g = obj(z)
    eps = 1e-6
    fd = np.array([(obj(z + eps * e)[0] - obj(z - eps * e)[0]) / (2 * eps) for e in np.eye(len(z))])
    np.testing.assert_allclose(g, fd, rtol=1e-5, atol=1e-8 * max(1.0, abs(f0)))


def test_parameter_count():
    m = init_scheduled(synthetic_lpv(seed=0).lti())
    # 2 x (16 + 12 + 12) matrices + (7*4+4) + (4*4+4) + (4+1) net
    assert m.n_params() == 137


def test_augmented_outputs_are_integrated_velocities(rng):
    m = synthetic_lpv(seed=5)
    aug = augment_integrators(m, x0_pos=np.array([0.1, -0.2, 0.03]))
    assert aug.n_x == 7 and aug.n_y == 6
    u = rng.normal(size=(1000, 3))
    Y = aug.simulate(u)
    vel = Y[:, 3:]
    np.testing.assert_array_equal(vel, m.simulate(u))
    pos = np.empty_like(vel)
    acc = np.array([0.1, -0.2, 0.03])
    for k in range(len(vel)):
        pos[k] = acc
        acc = acc + m.ts * vel[k]
    np.testing.assert_allclose(Y[:, :3], pos, rtol=0, atol=1e-12)


def test_augmented_constant_velocity_ramp():
    A = np.zeros((1, 1, 1))
    B = np.ones((1, 1, 3)) / 3.0
    C = np.ones((1, 3, 1)) * np.array([[[1.0], [2.0], [-1.0]]])
    lti = LpvModel(np.ones((1, 1, 1)), np.zeros((1, 1, 3)), C, x0=np.array([0.5]))
    Y = augment_integrators(lti).simulate(np.zeros((10, 3)))
    k = np.arange(10)[:, None]
    np.testing.assert_allclose(Y[:, :3], k * 0.05 * np.array([0.5, 1.0, -0.5]), atol=1e-15)
    zero = augment_integrators(LpvModel(A, B, C)).simulate(np.zeros((10, 3)))
    assert np.all(zero[:, :3] == 0.0)


def test_closed_loop_consistency():
    m = augment_integrators(synthetic_lpv(seed=6))
    n = 300
    fx = np.where(np.arange(n) < 100, 1.0, 0.0)
    fy = np.zeros(n)
    ref = np.full(n, 0.1)
    U, Y = m.closed_loop(fx, fy, ref, 2.0, 1.0)
    np.testing.assert_array_equal(U[:, 0], fx)
    np.testing.assert_allclose(m.simulate(U), Y, rtol=1e-12, atol=1e-12)
    law = 2.0 * (ref - Y[:, 2]) - 1.0 * Y[:, 5]
    np.testing.assert_allclose(U[:, 2], law, rtol=1e-9, atol=1e-9)


def test_json_roundtrip_bit_exact(tmp_path):
    m = init_scheduled(synthetic_lpv(seed=7).lti(), rng=3)
    m.x0 = np.array([1 / 3, -2 / 7, np.pi, 1e-300])
    path = tmp_path / "m.json"
    m.save(path)
    back = LpvModel.load(path)
    np.testing.assert_array_equal(back.vector(), m.vector())
    np.testing.assert_array_equal(back.x0, m.x0)
    assert back.dims == m.dims and back.ts == m.ts


def test_model_invariants():
    d = synthetic_lpv().to_dict()
    d["D"] = [[1.0, 0, 0], [0, 0, 0], [0, 0, 0]]
    with pytest.raises(ConfigurationError):
        LpvModel.from_dict(d)
    with pytest.raises(ConfigurationError):
        LpvModel(np.full((1, 2, 2), np.nan), np.zeros((1, 2, 1)), np.zeros((1, 1, 2)))
    with pytest.raises(ConfigurationError):
        LpvModel(np.zeros((2, 2, 2)), np.zeros((2, 2, 1)), np.zeros((2, 1, 2)))
    assert np.all(synthetic_lpv().D == 0.0)
