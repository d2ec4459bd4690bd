import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from slosh.errors import ConfigurationError
from slosh.kernels import KernelKind, SmoothingKernel
from slosh.sph import (FluidParams, GhostLayer, ParticleField, compute_densities, compute_pressures,
                       estimate_gamma1, evaluate, ghost_fluid_forces, lattice, pressure_forces, viscous_forces)

FP = FluidParams()
M = FP.particle_mass
L = FP.particle_length


def field(pos, vel=None, mass=M):
    pos = np.asarray(pos, dtype=float).reshape(-1, 2)
    return ParticleField(pos, np.zeros_like(pos) if vel is None else vel, mass)


def test_benchmark_constants():
    assert FP.gamma1 == 0.5
    assert FP.stiffness == 3.0
    assert FP.rest_density == 1017.0


def test_isolated_particle_density_is_self_term():
    unit = SmoothingKernel(KernelKind.CUBIC_SPLINE, 1.0)
    rho = compute_densities(field([[0.0, 0.0]], mass=1.0), None, FP, unit)
    assert rho[0] == pytest.approx(10.0 / (7.0 * math.pi), rel=1e-14)


def test_separated_pair_density():
    h = FP.smoothing_length
    rho = compute_densities(field([[0.0, 0.0], [2.0 * h, 0.0]]), None, FP)
    w0 = FP.kernel(0.0)
    np.testing.assert_allclose(rho, M * w0, rtol=1e-14)


def test_eos():
    p = compute_pressures(np.array([1017.0, 1018.0, 1016.0]), FP)
    np.testing.assert_allclose(p, [0.0, 3.0, -3.0])
    clamped = compute_pressures(np.array([1016.0]), FluidParams(clamp_pressure=True))
    assert clamped[0] == 0.0


def test_gamma1_estimate_in_range():
    pos = lattice(L, 30, 12)
    g = estimate_gamma1(field(pos), FP.kernel, FP)
    assert 0.0 < g < 3.0


def test_gamma1_template_without_wall_neighbours():
    pos = lattice(L, 3, 3)
    with pytest.raises(ConfigurationError):
        estimate_gamma1(field(pos), FP.kernel, FP, wall=np.array([[100.0, 100.0]]))


def _blob(rng, n=40, jitter=0.3):
    side = int(np.ceil(np.sqrt(n)))
    pos = lattice(L, side, side)[:n]
    return pos + rng.uniform(-jitter * L, jitter * L, pos.shape)


def test_pressure_forces_sum_to_zero(rng):
    f = evaluate(field(_blob(rng)), None, FP)
    fp = pressure_forces(f, FP)
    scale = np.abs(fp).max()
    assert np.abs(fp.sum(axis=0)).max() <= 1e-12 * scale


def test_pair_pressure_antisymmetric():
    f = evaluate(field([[0.0, 0.0], [0.7 * L, 0.2 * L]]), None, FP)
    fp = pressure_forces(f, FP)
    np.testing.assert_array_equal(fp[0], -fp[1])


def test_lattice_interior_force_cancels():
    n = 15
    pos = lattice(L, n, n)
    rho = np.full(n * n, 1020.0)
    f = field(pos)
    f.densities = rho
    fp = pressure_forces(f, FP)
    centre = (n // 2) * n + n // 2
    per_pair = M * M * 2 * 3.0 * 3.0 / 1020.0**2 * abs(FP.kernel.derivative(L))
    assert np.abs(fp[centre]).max() <= 1e-10 * per_pair


def test_viscous_zero_for_common_velocity(rng):
    pos = _blob(rng)
    f = evaluate(field(pos, np.tile([0.3, -0.1], (len(pos), 1))), None, FP)
    np.testing.assert_allclose(viscous_forces(f, FP), 0.0, atol=1e-20)


def test_viscous_coincident_particles_finite():
    f = evaluate(field([[0.0, 0.0], [0.0, 0.0]], np.array([[1.0, 0.0], [-1.0, 0.0]])), None, FP)
    assert np.all(np.isfinite(viscous_forces(f, FP)))


def test_viscous_decelerates_closing_pair():
    v = 0.1
    pos = np.array([[0.0, 0.0], [L, 0.0]])
    f = evaluate(field(pos, np.array([[v, 0.0], [-v, 0.0]])), None, FP)
    fv = viscous_forces(f, FP)
    # hand oracle for the (i=0, j=1) term
    h = FP.smoothing_length
    rij = -L
    dw = FP.kernel.derivative(L)
    grad_x = dw * rij / L
    vr = 2 * v * rij
    coef = M * M * 2 * FP.viscous_factor * h / (2 * f.densities[0]) * vr / (L * L + FP.epsilon * h * h)
    assert fv[0, 0] == pytest.approx(grad_x * coef, rel=1e-12)
    assert fv[0, 0] < 0.0 < fv[1, 0]


def _wall():
    return GhostLayer(np.array([[0.0, 0.0]]), M)


def test_ghost_force_out_of_support():
    f = evaluate(field([[2.0 * FP.smoothing_length, 0.0]]), _wall(), FP)
    g2f, f2g = ghost_fluid_forces(f, _wall(), FP)
    assert np.all(g2f == 0.0) and np.all(f2g == 0.0)


def test_ghost_separating_motion_has_no_viscous_part():
    pos = [[0.5 * FP.smoothing_length, 0.0]]
    base = evaluate(field(pos), _wall(), FP)
    away = base.copy()
    away.velocities = np.array([[1.0, 0.0]])
    np.testing.assert_array_equal(ghost_fluid_forces(base, _wall(), FP)[0],
                                  ghost_fluid_forces(away, _wall(), FP)[0])
    toward = base.copy()
    toward.velocities = np.array([[-1.0, 0.0]])
    assert not np.array_equal(ghost_fluid_forces(toward, _wall(), FP)[0],
                              ghost_fluid_forces(base, _wall(), FP)[0])


@given(arrays(np.float64, (12, 2), elements=st.floats(-0.02, 0.02)),
       arrays(np.float64, (12, 2), elements=st.floats(-1, 1)))
def test_ghost_newton_pairs(pos, vel):
    ghosts = GhostLayer.circle(0.02, 24, M)
    f = evaluate(field(pos, vel), ghosts, FP)
    g2f, f2g = ghost_fluid_forces(f, ghosts, FP)
    total = g2f.sum(axis=0) + f2g.sum(axis=0)
    scale = max(np.abs(g2f).max(), 1e-300)
    assert np.abs(total).max() <= 1e-12 * scale


def test_wall_pressure_pushes_away():
    # positive pressure next to a wall pushes the particle off it
    ghosts = GhostLayer(np.column_stack([np.arange(-3, 4) * L, np.zeros(7)]), M)
    f = field([[0.2 * L, 0.5 * L]])
    f.densities = np.array([1100.0])
    f.pressures = compute_pressures(f.densities, FP)
    g2f, _ = ghost_fluid_forces(f, ghosts, FP)
    assert g2f[0, 1] > 0.0


def test_invalid_params():
    with pytest.raises(ConfigurationError):
        FluidParams(gamma1=0.0)
    with pytest.raises(ConfigurationError):
        FluidParams(stiffness=-1.0)
