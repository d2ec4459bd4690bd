"""Spacecraft rigid-body dynamics and two-way coupling with the SPH fluid.

The continuous-time state is packed as::

    x = [r (2), theta, r_f (2 n_f), rdot (2), thetadot, rdot_f (2 n_f)]

with fluid coordinates interleaved ``x0, y0, x1, y1, ...``.  The returned
time derivative follows the same layout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _fast
from . import dual as ad
from . import sph
from .errors import ConfigurationError, NumericBlowupError
from .sph import FluidParams, GhostLayer, ParticleField

BLOWUP_LIMIT = 1e9


@dataclass
class SpacecraftState:
    r: np.ndarray
    theta: float
    rdot: np.ndarray
    thetadot: float

    def __post_init__(self):
        self.r = np.asarray(self.r, dtype=float).reshape(2)
        self.rdot = np.asarray(self.rdot, dtype=float).reshape(2)
        self.theta = float(self.theta)
        self.thetadot = float(self.thetadot)

    @classmethod
    def at_rest(cls):
        return cls(np.zeros(2), 0.0, np.zeros(2), 0.0)

    def as_vector(self):
        return np.array([self.r[0], self.r[1], self.theta, self.rdot[0], self.rdot[1], self.thetadot])

    @classmethod
    def from_vector(cls, v):
        return cls(v[0:2], v[2], v[3:5], v[5])


@dataclass(frozen=True)
class SpacecraftParams:
    """Rigid-body and tank geometry (defaults: benchmark satellite)."""

    mass: float = 1010.71
    inertia: float = 133.84
    tank_radius: float = 0.2
    tank_center: tuple = (0.0, 0.0)
    fill_ratio: float = 0.6

    def __post_init__(self):
        if not (self.mass > 0 and self.inertia > 0 and self.tank_radius > 0):
            raise ConfigurationError("mass, inertia and tank radius must be positive")
        if not 0.0 < self.fill_ratio < 1.0:
            raise ConfigurationError("fill ratio must lie in (0, 1)")


@dataclass
class ControlInput:
    u_x: float = 0.0
    u_y: float = 0.0
    tau: float = 0.0

    def as_vector(self):
        return np.array([self.u_x, self.u_y, self.tau], dtype=float)

    @classmethod
    def from_vector(cls, u):
        return cls(float(u[0]), float(u[1]), float(u[2]))


@dataclass
class SystemState:
    """Dynamic state: the spacecraft plus fluid positions/velocities."""

    spacecraft: SpacecraftState
    fluid: ParticleField

    @property
    def n_fluid(self):
        return self.fluid.count

    @property
    def n_x(self):
        return 6 + 4 * self.n_fluid

    def copy(self):
        sc = self.spacecraft
        return SystemState(
            SpacecraftState(sc.r.copy(), sc.theta, sc.rdot.copy(), sc.thetadot), self.fluid.copy()
        )

    def as_vector(self):
        return pack(self.spacecraft.as_vector(), self.fluid.positions, self.fluid.velocities)

    def with_vector(self, x):
        sc, rf, vf = unpack(np.asarray(x, dtype=float), self.n_fluid)
        return SystemState(SpacecraftState.from_vector(sc), ParticleField(rf, vf, self.fluid.mass))

    def output(self):
        """Measured output ``[r_x, r_y, theta, rdot_x, rdot_y, thetadot]``."""
        return self.spacecraft.as_vector()


def pack(sc, rf, vf):
    n = len(rf)
    return np.concatenate([sc[0:3], np.reshape(rf, 2 * n), sc[3:6], np.reshape(vf, 2 * n)])


def unpack(x, n):
    sc = np.concatenate([x[0:3], x[3 + 2 * n : 6 + 2 * n]])
    rf = x[3 : 3 + 2 * n].reshape(n, 2)
    vf = x[6 + 2 * n :].reshape(n, 2)
    return sc, rf, vf


def rotation(theta):
    c, s = ad.cos(theta), ad.sin(theta)
    return c, s


def update_ghost_kinematics(ghosts, sc):
    """Place the ghost layer at the spacecraft pose; returns a new :class:`GhostLayer`."""
    gp, gv = ghost_world_arrays(ghosts.body_positions, sc.r, sc.theta, sc.rdot, sc.thetadot)
    return GhostLayer(ghosts.body_positions, ghosts.mass, gp, gv)


def ghost_world_arrays(body, r, theta, rdot, thetadot):
    """``r_g = R(theta) r_g^B + r`` and ``v_g = rdot + thetadot x (r_g - r)``."""
    c, s = rotation(theta)
    bx, by = body[:, 0], body[:, 1]
    gx = c * bx - s * by + r[0]
    gy = s * bx + c * by + r[1]
    dx = gx - r[0]
    dy = gy - r[1]
    vx = rdot[0] - thetadot * dy
    vy = rdot[1] + thetadot * dx
    return ad.stack([gx, gy], axis=-1), ad.stack([vx, vy], axis=-1)


def rigid_body_acceleration(ghost_reaction_forces, ghosts, sc, params, u):
    """Newton-Euler accelerations ``(rddot, thetaddot)`` of the spacecraft.

    Args:
        ghost_reaction_forces: ``(n_g, 2)`` forces exerted by the fluid on each ghost.
        ghosts: ghost layer with current world positions.
        sc: spacecraft state.
        params: spacecraft parameters.
        u: :class:`ControlInput` or length-3 vector ``[u_x, u_y, tau]``.
    """
    u = u.as_vector() if isinstance(u, ControlInput) else u
    return _rigid_accel(ghost_reaction_forces, ghosts.world_positions, sc.r, params, u)


def _rigid_accel(gforce, gpos, r, params, u):
    if len(gforce):
        fx = gforce[:, 0].sum()
        fy = gforce[:, 1].sum()
        arm = gpos - r
        tq = (arm[:, 0] * gforce[:, 1] - arm[:, 1] * gforce[:, 0]).sum()
    else:
        fx = fy = tq = 0.0
    ax = (fx + u[0]) / params.mass
    ay = (fy + u[1]) / params.mass
    al = (tq + u[2]) / params.inertia
    return ad.stack([ax, ay]), al


def transition_arrays(sc, rf, vf, u, body, sc_params, fluid_params, external_fluid=None):
    """Accelerations for (possibly dual) packed arrays.

    ``sc`` is ``[rx, ry, theta, vx, vy, omega]``.  Returns
    ``(rddot (2,), thetaddot, fluid accelerations (n_f, 2))``.
    """
    fp = fluid_params
    kernel = fp.kernel
    bkernel = fp.boundary_kernel
    r = sc[0:2]
    v = sc[3:5]
    gpos, gvel = ghost_world_arrays(body, r, sc[2], v, sc[5])
    radius = fp.neighbor_radius
    ff_self = sph.fluid_pairs(rf, radius, include_self=True)
    ff = sph.fluid_pairs(rf, radius, include_self=False)
    fg = sph.ghost_pairs(rf, gpos, radius)
    m = fp.particle_mass
    rho = sph.density_from_pairs(rf, gpos, m, fp.gamma1, kernel, ff_self, fg)
    p = sph.pressure_from_density(rho, fp)
    f_p = sph.pressure_force_from_pairs(rf, rho, p, m, kernel, ff)
    f_v = sph.viscous_force_from_pairs(rf, vf, rho, m, fp.viscous_factor, fp.epsilon, kernel, ff)
    if len(fg):
        per_pair = sph.ghost_force_from_pairs(
            rf, vf, rho, p, gpos, gvel, m, fp.boundary_viscous_factor, fp.epsilon, bkernel, fg
        )
        f_g2f = fg.sum_rows(per_pair)
        f_f2g = -fg.sum_cols(per_pair)
    else:
        f_g2f = np.zeros((len(ad.value(rf)), 2))
        f_f2g = np.zeros((len(body), 2))
    total = -f_p + f_v + f_g2f
    if external_fluid is not None:
        total = total + external_fluid
    acc = total / m
    rdd, thdd = _rigid_accel(f_f2g, gpos, r, sc_params, u)
    return rdd, thdd, acc


class Plant:
    """The coupled spacecraft + fluid model ``xdot = f(x, u)``.

    Args:
        sc_params: spacecraft parameters.
        fluid_params: fluid parameters.
        ghosts: the tank ghost layer (body-frame positions are used).
        wall_guard: keep particles inside the ghost ring during integration
            (inelastic, momentum-conserving contact).  It acts only in the
            time stepper; ``f`` is the smooth SPH right-hand side.
    """

    def __init__(self, sc_params, fluid_params, ghosts, wall_guard=True):
        self.sc_params = sc_params
        self.fluid_params = fluid_params
        self.ghosts = ghosts
        self._body = np.ascontiguousarray(ghosts.body_positions, dtype=float)
        # contact guard on the ghost ring; off without a wall
        self.wall_radius = sc_params.tank_radius if (wall_guard and ghosts.count > 0) else 0.0

    def _fast_args(self):
        fp = self.fluid_params
        return (
            self.sc_params.mass,
            self.sc_params.inertia,
            fp.particle_mass,
            fp.smoothing_length,
            fp.rest_density,
            fp.stiffness,
            fp.viscous_factor,
            fp.boundary_viscous_factor,
            fp.gamma1,
            fp.epsilon,
            fp.clamp_pressure,
        )

    def accelerations(self, state, u, backend="fast"):
        """``(rddot, thetaddot, fluid accelerations)`` at ``state`` under input ``u``."""
        u = u.as_vector() if isinstance(u, ControlInput) else np.asarray(u, dtype=float)
        sc = state.spacecraft.as_vector()
        rf = np.ascontiguousarray(state.fluid.positions)
        vf = np.ascontiguousarray(state.fluid.velocities)
        if backend == "fast":
            ax, ay, al, acc, *_ = _fast.transition(sc, rf, vf, self._body, u, *self._fast_args())
            return np.array([ax, ay]), float(al), acc
        rdd, thdd, acc = transition_arrays(sc, rf, vf, u, self._body, self.sc_params, self.fluid_params)
        return np.asarray(rdd), float(thdd), np.asarray(acc)

    def f(self, x, u, n_fluid, backend="fast"):
        """Packed ``xdot`` for a packed (float or dual) state vector ``x``."""
        if ad.is_dual(x) or ad.is_dual(u) or backend != "fast":
            return self._f_generic(x, u, n_fluid)
        sc, rf, vf = unpack(np.asarray(x, dtype=float), n_fluid)
        u = np.asarray(u, dtype=float)
        ax, ay, al, acc, *_ = _fast.transition(
            sc, np.ascontiguousarray(rf), np.ascontiguousarray(vf), self._body, u, *self._fast_args()
        )
        return pack(np.array([sc[3], sc[4], sc[5], ax, ay, al]), vf, acc)

    def _f_generic(self, x, u, n):
        sc = ad.concatenate([x[0:3], x[3 + 2 * n : 6 + 2 * n]])
        rf = x[3 : 3 + 2 * n].reshape(n, 2)
        vf = x[6 + 2 * n :].reshape(n, 2)
        rdd, thdd, acc = transition_arrays(sc, rf, vf, u, self._body, self.sc_params, self.fluid_params)
        parts = [
            x[3 + 2 * n : 5 + 2 * n],
            x[5 + 2 * n : 6 + 2 * n],
            x[6 + 2 * n :],
            rdd,
            ad.stack([thdd]),
            acc.reshape(2 * n),
        ]
        return ad.concatenate([_as1d(p) for p in parts])

    def state_transition(self, state, u, backend="fast"):
        """Packed ``xdot = f(x, u)`` for a :class:`SystemState`."""
        xdot = self.f(state.as_vector(), _u_vec(u), state.n_fluid, backend=backend)
        if not np.all(np.isfinite(xdot)):
            bad = int(np.flatnonzero(~np.isfinite(xdot))[0])
            raise NumericBlowupError(f"non-finite state derivative at coordinate {bad}", index=bad)
        return xdot


def _as1d(p):
    if ad.is_dual(p):
        return p.reshape(-1)
    return np.reshape(np.asarray(p, dtype=float), -1)


def _u_vec(u):
    return u.as_vector() if isinstance(u, ControlInput) else np.asarray(u, dtype=float)


def symplectic_euler_step(state, accel, dt):
    """One symplectic Euler step: velocities from accelerations first, then positions.

    Args:
        state: current :class:`SystemState`.
        accel: callable ``state -> (rddot, thetaddot, fluid_acc)``.
        dt: step size.
    """
    if not dt > 0.0:
        raise ValueError("dt must be positive")
    rdd, thdd, acc = accel(state)
    sc = state.spacecraft
    rdot = sc.rdot + rdd * dt
    thetadot = sc.thetadot + thdd * dt
    vf = state.fluid.velocities + acc * dt
    new_sc = SpacecraftState(sc.r + rdot * dt, sc.theta + thetadot * dt, rdot, thetadot)
    new_fluid = ParticleField(state.fluid.positions + vf * dt, vf, state.fluid.mass)
    return SystemState(new_sc, new_fluid)


def symplectic_euler(x, v, accel, dt, n_steps):
    """Generic symplectic Euler on arrays: ``v += a(x, v) dt; x += v dt``.

    Returns the final ``(x, v)``; handy for testing the integrator on ODEs.
    """
    x = np.array(x, dtype=float)
    v = np.array(v, dtype=float)
    for _ in range(n_steps):
        v = v + accel(x, v) * dt
        x = x + v * dt
    return x, v


def fluid_rigid_momentum(state, sc_params):
    """Total linear momentum of fluid plus spacecraft."""
    m = state.fluid.mass
    return m * state.fluid.velocities.sum(axis=0) + sc_params.mass * state.spacecraft.rdot
