"""Weakly compressible SPH: particle containers, density/pressure, pair forces.

The functions in this module are written against plain ``numpy`` semantics
and also accept :class:`~slosh.dual.Dual` positions/velocities, which is how
the forward-mode Jacobian is obtained.  The time-stepping hot path lives in
:mod:`slosh._fast` and reproduces the same arithmetic in compiled loops.

Sign conventions: ``pressure_forces`` returns the bracketed sum as written,
so the fluid acceleration subtracts it.  ``ghost_fluid_forces`` returns the
boundary force already oriented so that it is *added* to the acceleration;
positive wall-adjacent pressure pushes fluid away from the wall.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from . import dual as ad
from .errors import ConfigurationError, NumericBlowupError
from .kernels import KernelKind, SmoothingKernel, pair_gradient
from .neighbors import SpatialHashGrid


@dataclass(frozen=True)
class FluidParams:
    """Physical constants of the propellant and its SPH discretisation.

    Defaults correspond to the hydrazine-like benchmark fluid.
    """

    rest_density: float = 1017.0  # kg/m^2 (2D)
    stiffness: float = 3.0
    viscous_factor: float = 8.32e-4
    boundary_viscous_factor: float = 4e-4
    gamma1: float = 0.5
    epsilon: float = 0.01
    particle_length: float = 0.006  # m
    smoothing_length: float = 0.00942  # m
    clamp_pressure: bool = False

    def __post_init__(self):
        checks = {
            "rest_density": self.rest_density > 0.0,
            "stiffness": self.stiffness > 0.0,
            "viscous_factor": self.viscous_factor >= 0.0,
            "boundary_viscous_factor": self.boundary_viscous_factor >= 0.0,
            "gamma1": 0.0 < self.gamma1 <= 1.0,
            "epsilon": self.epsilon > 0.0,
            "particle_length": self.particle_length > 0.0,
            "smoothing_length": self.smoothing_length > 0.0,
        }
        bad = [name for name, ok in checks.items() if not ok]
        if bad:
            raise ConfigurationError(f"invalid fluid parameters: {', '.join(bad)}")

    @property
    def particle_mass(self):
        """Mass per particle, ``rho0 * L^2``."""
        return self.rest_density * self.particle_length**2

    @property
    def kernel(self):
        return SmoothingKernel(KernelKind.CUBIC_SPLINE, self.smoothing_length)

    @property
    def boundary_kernel(self):
        return SmoothingKernel(KernelKind.SPIKY3, self.smoothing_length)

    @property
    def neighbor_radius(self):
        return 2.0 * self.smoothing_length


@dataclass
class ParticleField:
    """Structure-of-arrays container for the fluid particles."""

    positions: np.ndarray
    velocities: np.ndarray
    mass: float
    densities: np.ndarray | None = None
    pressures: np.ndarray | None = None

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float).reshape(-1, 2)
        self.velocities = np.asarray(self.velocities, dtype=float).reshape(-1, 2)
        if self.positions.shape != self.velocities.shape:
            raise ConfigurationError("positions and velocities must have the same shape")
        if not self.mass > 0.0:
            raise ConfigurationError("particle mass must be positive")

    @property
    def count(self):
        return len(self.positions)

    def copy(self):
        return ParticleField(
            self.positions.copy(),
            self.velocities.copy(),
            self.mass,
            None if self.densities is None else self.densities.copy(),
            None if self.pressures is None else self.pressures.copy(),
        )


@dataclass
class GhostLayer:
    """Single layer of boundary particles rigidly attached to the tank."""

    body_positions: np.ndarray
    mass: float
    world_positions: np.ndarray = field(default=None)
    world_velocities: np.ndarray = field(default=None)

    def __post_init__(self):
        self.body_positions = np.asarray(self.body_positions, dtype=float).reshape(-1, 2)
        self.body_positions.setflags(write=False)
        if self.world_positions is None:
            self.world_positions = self.body_positions.copy()
        if self.world_velocities is None:
            self.world_velocities = np.zeros_like(self.body_positions)

    @classmethod
    def circle(cls, radius, count, mass, center=(0.0, 0.0)):
        """``count`` ghosts uniformly spaced on a circle in the body frame."""
        phi = 2.0 * np.pi * np.arange(count) / count
        pts = np.column_stack([np.cos(phi), np.sin(phi)]) * radius + np.asarray(center, dtype=float)
        return cls(pts, mass)

    @property
    def count(self):
        return len(self.body_positions)

    def spacing(self):
        """Smallest distance between consecutive ghosts (closed polygon)."""
        d = np.diff(np.vstack([self.body_positions, self.body_positions[:1]]), axis=0)
        return float(np.min(np.hypot(d[:, 0], d[:, 1])))


class PairList:
    """Directed interaction pairs ``(i, j)`` plus a segment-sum operator over ``i``."""

    def __init__(self, i, j, n_rows, n_cols):
        self.i = np.asarray(i, dtype=np.int64)
        self.j = np.asarray(j, dtype=np.int64)
        self.n_rows = n_rows
        self.n_cols = n_cols
        n = len(self.i)
        ones = np.ones(n)
        self._rows = sp.csr_matrix((ones, (self.i, np.arange(n))), shape=(n_rows, n))
        self._cols = None

    def __len__(self):
        return len(self.i)

    def sum_rows(self, values):
        """Accumulate per-pair values into their ``i`` index (ascending ``j`` order)."""
        return ad.matmul(self._rows, values)

    def sum_cols(self, values):
        """Accumulate per-pair values into their ``j`` index (ascending ``i`` order)."""
        if self._cols is None:
            order = np.lexsort((self.i, self.j))
            self._cols = sp.csr_matrix(
                (np.ones(len(order)), (self.j[order], order)), shape=(self.n_cols, len(order))
            )
        return ad.matmul(self._cols, values)


def fluid_pairs(positions, radius, include_self=True):
    """Fluid-fluid neighbour pairs within ``radius`` (optionally with ``i == j``)."""
    pos = np.asarray(ad.value(positions), dtype=float).reshape(-1, 2)
    grid = SpatialHashGrid(pos, radius)
    i, j = grid.query_pairs(pos, radius, exclude_self=not include_self)
    return PairList(i, j, len(pos), len(pos))


def ghost_pairs(fluid_positions, ghost_positions, radius):
    """Fluid-ghost pairs ``(fluid i, ghost j)`` within ``radius``."""
    fpos = np.asarray(ad.value(fluid_positions), dtype=float).reshape(-1, 2)
    gpos = np.asarray(ad.value(ghost_positions), dtype=float).reshape(-1, 2)
    grid = SpatialHashGrid(gpos, radius)
    i, j = grid.query_pairs(fpos, radius)
    return PairList(i, j, len(fpos), len(gpos))


def _check_finite(name, arr):
    v = np.asarray(ad.value(arr))
    bad = ~np.isfinite(v)
    if v.ndim > 1:
        bad = bad.any(axis=tuple(range(1, v.ndim)))
    if np.any(bad):
        idx = int(np.flatnonzero(bad)[0])
        raise NumericBlowupError(f"non-finite {name} at particle {idx}", index=idx)


# --- array-level kernels (float or Dual) ---------------------------------


def density_from_pairs(rf, gpos, mass, gamma1, kernel, ff, fg):
    """``rho_i = m (sum_f W + gamma1 sum_g W)``; ``ff`` must include the self pairs."""
    d_ff = ad.sqrt(_sqnorm(rf[ff.i] - rf[ff.j]))
    s_f = ff.sum_rows(kernel(d_ff))
    if len(fg):
        d_fg = ad.sqrt(_sqnorm(rf[fg.i] - gpos[fg.j]))
        s_g = fg.sum_rows(kernel(d_fg))
        return mass * (s_f + gamma1 * s_g)
    return mass * s_f


def _sqnorm(d):
    return d[:, 0] * d[:, 0] + d[:, 1] * d[:, 1]


def pressure_from_density(rho, params):
    p = params.stiffness * (rho - params.rest_density)
    if params.clamp_pressure:
        p = ad.maximum(p, 0.0)
    return p


def pressure_force_from_pairs(rf, rho, p, mass, kernel, ff):
    """``m_i sum_j m_j (P_i/rho_i^2 + P_j/rho_j^2) grad_i W_ij`` over ``j != i``."""
    g, _ = pair_gradient(kernel, rf[ff.i] - rf[ff.j])
    q = p / (rho * rho)
    coef = (mass * mass) * (q[ff.i] + q[ff.j])
    return ff.sum_rows(g * coef.reshape(-1, 1))


def viscous_force_from_pairs(rf, vf, rho, mass, alpha, eps, kernel, ff):
    h = kernel.h
    rij = rf[ff.i] - rf[ff.j]
    vij = vf[ff.i] - vf[ff.j]
    g, _ = pair_gradient(kernel, rij)
    vr = vij[:, 0] * rij[:, 0] + vij[:, 1] * rij[:, 1]
    coef = (mass * mass) * (2.0 * alpha * h) / (rho[ff.i] + rho[ff.j]) * vr / (_sqnorm(rij) + eps * h * h)
    return ff.sum_rows(g * coef.reshape(-1, 1))


def ghost_force_from_pairs(rf, vf, rho, p, gpos, gvel, mass, beta, eps, kernel, fg):
    """Per-pair wall force on the fluid particle, oriented to be added to its acceleration.

    Ghost mass and density are inherited from the fluid particle of the pair.
    """
    h = kernel.h
    rij = rf[fg.i] - gpos[fg.j]
    vij = vf[fg.i] - gvel[fg.j]
    g, _ = pair_gradient(kernel, rij)
    rho_i = rho[fg.i]
    mm = mass * mass
    pres = -2.0 * mm * p[fg.i] / (rho_i * rho_i)
    vr = ad.minimum(vij[:, 0] * rij[:, 0] + vij[:, 1] * rij[:, 1], 0.0)
    visc = mm * (2.0 * beta) / (rho_i + rho_i) * vr / (_sqnorm(rij) + eps * h * h)
    return g * (pres + visc).reshape(-1, 1)


# --- object-level API ---------------------------------------------------


def compute_densities(fluid, ghosts, params, kernel=None):
    """Corrected density of every fluid particle (self term included)."""
    kernel = kernel or params.kernel
    radius = kernel.support_radius
    ff = fluid_pairs(fluid.positions, radius, include_self=True)
    gpos = ghosts.world_positions if ghosts is not None else np.zeros((0, 2))
    fg = ghost_pairs(fluid.positions, gpos, radius)
    rho = density_from_pairs(fluid.positions, gpos, fluid.mass, params.gamma1, kernel, ff, fg)
    _check_finite("density", rho)
    bad = np.flatnonzero(np.asarray(ad.value(rho)) <= 0.0)
    if len(bad):
        raise NumericBlowupError(f"non-positive density at particle {bad[0]}", index=int(bad[0]))
    return rho


def compute_pressures(densities, params):
    """Equation of state ``P = k (rho - rho0)``; clamped at 0 only if configured."""
    return pressure_from_density(densities, params)


def _state_arrays(fluid, params):
    if fluid.densities is None:
        raise ConfigurationError("densities must be evaluated before computing forces")
    rho = fluid.densities
    p = fluid.pressures if fluid.pressures is not None else compute_pressures(rho, params)
    return rho, p


def pressure_forces(fluid, params, kernel=None):
    kernel = kernel or params.kernel
    rho, p = _state_arrays(fluid, params)
    ff = fluid_pairs(fluid.positions, kernel.support_radius, include_self=False)
    f = pressure_force_from_pairs(fluid.positions, rho, p, fluid.mass, kernel, ff)
    _check_finite("pressure force", f)
    return f


def viscous_forces(fluid, params, kernel=None):
    kernel = kernel or params.kernel
    rho, _ = _state_arrays(fluid, params)
    ff = fluid_pairs(fluid.positions, kernel.support_radius, include_self=False)
    f = viscous_force_from_pairs(
        fluid.positions, fluid.velocities, rho, fluid.mass, params.viscous_factor, params.epsilon, kernel, ff
    )
    _check_finite("viscous force", f)
    return f


def ghost_fluid_forces(fluid, ghosts, params, kernel=None):
    """Return ``(F_g2f per fluid particle, F_f2g per ghost)``; the two sum to zero."""
    kernel = kernel or params.boundary_kernel
    rho, p = _state_arrays(fluid, params)
    fg = ghost_pairs(fluid.positions, ghosts.world_positions, kernel.support_radius)
    if len(fg) == 0:
        return np.zeros((fluid.count, 2)), np.zeros((ghosts.count, 2))
    per_pair = ghost_force_from_pairs(
        fluid.positions,
        fluid.velocities,
        rho,
        p,
        ghosts.world_positions,
        ghosts.world_velocities,
        fluid.mass,
        params.boundary_viscous_factor,
        params.epsilon,
        kernel,
        fg,
    )
    f_g2f = fg.sum_rows(per_pair)
    f_f2g = -fg.sum_cols(per_pair)
    _check_finite("ghost force", f_g2f)
    return f_g2f, f_f2g


def evaluate(fluid, ghosts, params):
    """Return a copy of ``fluid`` with densities and pressures filled in."""
    rho = compute_densities(fluid, ghosts, params)
    out = replace(fluid.copy(), densities=rho, pressures=compute_pressures(rho, params))
    return out


def lattice(spacing, nx, ny, origin=(0.0, 0.0)):
    """Square lattice of ``nx * ny`` points."""
    gx, gy = np.meshgrid(np.arange(nx) * spacing, np.arange(ny) * spacing, indexing="ij")
    return np.column_stack([gx.ravel(), gy.ravel()]) + np.asarray(origin, dtype=float)


def estimate_gamma1(fluid_template, kernel, params, near_wall_distance=None, wall=None, spacing=None):
    """Estimate the single-layer boundary correction from a flat-wall template.

    The template is a half-lattice of fluid particles; ``wall`` is the single
    ghost row bounding it.  For every template particle within the kernel
    support of the wall, the density deficit (full-lattice kernel sum minus
    the fluid sum) is divided by the ghost-layer sum; the estimates are averaged.

    Args:
        fluid_template: ParticleField holding the half-lattice.
        kernel: kernel used for the density sums.
        params: fluid parameters.
        near_wall_distance: only particles closer than this to the wall are
            used; defaults to the kernel support radius.
        wall: ``(n, 2)`` ghost positions; defaults to the row ``y = -spacing``
            under a template whose lowest row sits at ``y = 0``.
        spacing: lattice spacing of the template; defaults to the particle length.
    """
    pos = fluid_template.positions
    if wall is None:
        dx = params.particle_length if spacing is None else spacing
        xs = np.unique(np.round(pos[:, 0], 12))
        wall = np.column_stack([xs, np.full_like(xs, pos[:, 1].min() - dx)])
    wall = np.asarray(wall, dtype=float)
    radius = kernel.support_radius
    near = near_wall_distance if near_wall_distance is not None else radius
    ff = fluid_pairs(pos, radius, include_self=True)
    fg = ghost_pairs(pos, wall, radius)
    s_f = ff.sum_rows(kernel(np.sqrt(_sqnorm(pos[ff.i] - pos[ff.j]))))
    s_g = np.zeros(len(pos))
    if len(fg):
        s_g = fg.sum_rows(kernel(np.sqrt(_sqnorm(pos[fg.i] - wall[fg.j]))))
    dist_to_wall = np.min(np.linalg.norm(pos[:, None, :] - wall[None, :, :], axis=-1), axis=1)
    # interior reference: particles that are unaffected by the wall and the template edges
    use = (s_g > 0.0) & (dist_to_wall < near)
    xmin, xmax = pos[:, 0].min(), pos[:, 0].max()
    use &= (pos[:, 0] - xmin >= radius) & (xmax - pos[:, 0] >= radius)
    if not np.any(use):
        raise ConfigurationError("template has no fluid particles near the boundary")
    # density the particle would see if the wall were replaced by more fluid
    spacing = params.particle_length if spacing is None else spacing
    target = full_lattice_density_sum(spacing, kernel)
    g = (target - s_f[use]) / s_g[use]
    return float(np.mean(g))


def full_lattice_density_sum(spacing, kernel, n_side=None):
    """Kernel sum ``sum_j W(|r_0 - r_j|)`` at an interior node of an infinite square lattice."""
    n_side = n_side or int(math.ceil(kernel.support_radius / spacing)) + 1
    k = np.arange(-n_side, n_side + 1) * spacing
    gx, gy = np.meshgrid(k, k, indexing="ij")
    return float(np.sum(kernel(np.hypot(gx, gy).ravel())))
