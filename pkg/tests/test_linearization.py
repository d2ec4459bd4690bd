import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from slosh.errors import NumericBlowupError
from slosh.linearization import (LinearizedSystem, Method, eigen_trace, eigenvalues, jacobian, read_eigen_csv,
                                 spectral_distance, write_eigen_csv)
from slosh.simulation import Scenario


def test_zero_matrix_spectrum():
    np.testing.assert_array_equal(eigenvalues(np.zeros((5, 5))), 0.0)


def test_oscillator_companion():
    lam = np.sort_complex(eigenvalues(np.array([[0.0, 1.0], [-1.0, 0.0]])))
    np.testing.assert_allclose(lam, [-1j, 1j], atol=1e-15)


@given(arrays(np.float64, (6, 6), elements=st.floats(-10, 10)))
def test_real_spectrum_closed_under_conjugation(A):
    lam = eigenvalues(A, residual_tol=1e-6)
    assert spectral_distance(lam, np.conj(lam)) < 1e-6 * max(1.0, np.abs(lam).max())


def test_non_finite_matrix():
    with pytest.raises(NumericBlowupError):
        eigenvalues(np.array([[np.nan]]))


def test_spectral_distance_matches_best_pairing():
    a = np.array([0, 1, 2j])
    b = np.array([2j + 1e-3, 0, 1 - 2e-3])
    assert spectral_distance(a, b) == pytest.approx(2e-3)
    assert spectral_distance(a, a[::-1]) == 0.0


def _rigid_only():
    scen = Scenario(n_particles=0)
    return scen.plant(), scen.spawn()


@pytest.mark.parametrize("method", ["forward", "fd"])
def test_rigid_only_jacobian(method):
    plant, s = _rigid_only()
    lin = jacobian(plant, s, np.zeros(3), method)
    expected = np.zeros((6, 6))
    expected[:3, 3:] = np.eye(3)
    np.testing.assert_allclose(lin.A, expected, atol=1e-12)
    np.testing.assert_allclose(eigenvalues(lin), 0.0, atol=1e-12)
    assert lin.B[3, 0] == pytest.approx(1.0 / 1010.71, rel=1e-10)
    assert lin.B[5, 2] == pytest.approx(1.0 / 133.84, rel=1e-10)


def test_kinematic_rows_are_exact(desk_cfg):
    scen = Scenario(n_particles=10)
    plant = scen.plant()
    s = scen.spawn()
    lin = jacobian(plant, s, np.array([1.0, 0, 0]), Method.FORWARD)
    half = s.n_x // 2
    np.testing.assert_array_equal(lin.A[:half, :half], 0.0)
    np.testing.assert_array_equal(lin.A[:half, half:], np.eye(half))
    np.testing.assert_array_equal(lin.B[:half], 0.0)


def test_method_parse():
    assert Method.parse("fd") is Method.CENTRAL_FD
    assert Method.parse(Method.FORWARD) is Method.FORWARD
    with pytest.raises(ValueError):
        Method.parse("reverse")


def test_eigen_trace_stride_and_constancy():
    plant, s = _rigid_only()
    traj = [(0.05 * k, s, np.zeros(3)) for k in range(5)]
    full = eigen_trace(plant, traj, stride=1)
    assert len(full) == 5
    assert all(spectral_distance(full[0][1], lam) == 0.0 for _, lam in full)
    assert len(eigen_trace(plant, traj, stride=2)) == 3
    assert [t for t, _ in eigen_trace(plant, traj, stride=100)] == [0.0]
    assert len(eigen_trace(plant, traj, stride=None)) == 1
    with pytest.raises(ValueError):
        eigen_trace(plant, traj, stride=0)


def test_eigen_csv_roundtrip():
    trace = [(0.0, np.array([1 + 2j, 1 - 2j])), (0.05, np.array([0.1 + 0j, -3.3e-9 + 0j]))]
    back = read_eigen_csv(write_eigen_csv(trace))
    assert len(back) == 2
    for (t0, a), (t1, b) in zip(trace, back):
        assert t0 == t1
        np.testing.assert_array_equal(a, b)


def test_linearized_dims():
    lin = LinearizedSystem(np.zeros((46, 46)), np.zeros((46, 3)), (None, None))
    assert lin.n_x == 46
