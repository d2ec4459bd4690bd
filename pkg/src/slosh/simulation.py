"""Scenario setup, fluid settling and multi-rate closed-loop simulation."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from . import _fast
from .data import Dataset
from .errors import ConfigurationError, NumericBlowupError, SettlingError
from .rigid import BLOWUP_LIMIT, Plant, SpacecraftParams, SpacecraftState, SystemState
from .sph import FluidParams, GhostLayer, ParticleField

log = logging.getLogger(__name__)

FAST_DT = 1e-3
SLOW_DT = 0.05


@dataclass(frozen=True)
class Scenario:
    """Everything needed to build the coupled plant and its initial fluid.

    ``spawn_spacing`` is the lattice spacing of the initial fluid
    (defaults to the particle length); particles fill the tank from the
    ``-y`` wall upwards.  The scenario fluid clamps negative pressures by
    default: with a single ghost layer, tensile pressure pulls particles
    through the wall.
    """

    spacecraft: SpacecraftParams = field(default_factory=SpacecraftParams)
    fluid: FluidParams = field(default_factory=lambda: FluidParams(clamp_pressure=True))
    n_particles: int = 150
    n_ghosts: int = 236
    spawn_spacing: float | None = None
    spawn_jitter: float = 0.1
    wall_clearance: float | None = None
    seed: int = 0
    wall_guard: bool = True

    def __post_init__(self):
        if self.n_particles < 0 or self.n_ghosts < 0:
            raise ConfigurationError("particle counts must be non-negative")

    @classmethod
    def benchmark(cls, **kw):
        return cls(n_particles=666, **kw)

    @classmethod
    def desk(cls, **kw):
        return cls(n_particles=150, **kw)

    def ghosts(self):
        g = GhostLayer.circle(
            self.spacecraft.tank_radius, self.n_ghosts, self.fluid.particle_mass, self.spacecraft.tank_center
        )
        if self.n_ghosts and g.spacing() > self.fluid.particle_length * (1.0 + 1e-9):
            raise ConfigurationError(
                f"ghost spacing {g.spacing():.4g} m exceeds the particle length; fluid could tunnel"
            )
        return g

    def plant(self):
        return Plant(self.spacecraft, self.fluid, self.ghosts(), wall_guard=self.wall_guard)

    def spawn(self):
        """Seeded jittered lattice of ``n_particles`` at rest inside the tank."""
        s = self.spawn_spacing or self.fluid.particle_length
        clearance = self.wall_clearance if self.wall_clearance is not None else self.fluid.particle_length
        radius = self.spacecraft.tank_radius
        c = np.asarray(self.spacecraft.tank_center, dtype=float)
        n_side = int(np.ceil(radius / s)) + 1
        k = np.arange(-n_side, n_side + 1) * s
        gx, gy = np.meshgrid(k, k, indexing="ij")
        pts = np.column_stack([gx.ravel(), gy.ravel()])
        pts = pts[np.hypot(pts[:, 0], pts[:, 1]) <= radius - clearance]
        if len(pts) < self.n_particles:
            raise ConfigurationError("tank cannot hold the requested number of particles at this spacing")
        order = np.lexsort((pts[:, 0], pts[:, 1]))
        pts = pts[order[: self.n_particles]]
        rng = np.random.default_rng(self.seed)
        pts = pts + rng.uniform(-self.spawn_jitter * s, self.spawn_jitter * s, pts.shape) + c
        fluid = ParticleField(pts, np.zeros_like(pts), self.fluid.particle_mass)
        return SystemState(SpacecraftState.at_rest(), fluid)


def max_speed(state):
    v = state.fluid.velocities
    if len(v) == 0:
        return 0.0
    return float(np.max(np.hypot(v[:, 0], v[:, 1])))


class Integrator:
    """Thin stateful wrapper around the compiled symplectic Euler loop."""

    def __init__(self, plant, state):
        self.plant = plant
        self.sc = state.spacecraft.as_vector()
        self.rf = np.ascontiguousarray(state.fluid.positions, dtype=float).copy()
        self.vf = np.ascontiguousarray(state.fluid.velocities, dtype=float).copy()
        self.mass = state.fluid.mass
        self._prev = (np.empty(6), np.empty_like(self.rf), np.empty_like(self.vf))
        self.steps = 0
        self._center = tuple(float(c) for c in plant.sc_params.tank_center)

    def advance(self, u, dt, n_steps, hold_body=False, damping=0.0):
        u = np.asarray(u, dtype=float)
        fail = _fast.advance(
            self.sc, self.rf, self.vf, self.plant._body, u, *self.plant._fast_args(),
            dt, n_steps, hold_body, damping, BLOWUP_LIMIT, *self._prev,
            self.plant.wall_radius, *self._center,
        )
        if fail >= 0:
            step = self.steps + fail
            last = SystemState(
                SpacecraftState.from_vector(self._prev[0].copy()),
                ParticleField(self._prev[1].copy(), self._prev[2].copy(), self.mass),
            )
            raise NumericBlowupError(f"state blew up at fast step {step}", step=step, last_state=last)
        self.steps += n_steps

    def state(self):
        return SystemState(
            SpacecraftState.from_vector(self.sc.copy()),
            ParticleField(self.rf.copy(), self.vf.copy(), self.mass),
        )

    def output(self):
        return self.sc.copy()


def settle_fluid(scenario, state=None, tolerance=1e-4, max_time=20.0, dt=FAST_DT, damping=5.0, check_every=0.05):
    """Relax the fluid to rest inside a pinned tank.

    The spacecraft is held at the origin while the fluid evolves with an extra
    velocity relaxation ``exp(-damping dt)`` per step; the first state whose
    maximum particle speed is below ``tolerance`` is returned with the
    spacecraft at rest at the origin.

    Raises:
        SettlingError: if the fluid is still moving after ``max_time``.
    """
    plant = scenario.plant()
    state = scenario.spawn() if state is None else state
    pinned = SystemState(SpacecraftState.at_rest(), state.fluid.copy())
    if max_speed(pinned) < tolerance and _is_static(plant, pinned, tolerance, dt):
        return pinned
    integ = Integrator(plant, pinned)
    chunk = max(1, int(round(check_every / dt)))
    n_chunks = int(np.ceil(max_time / (chunk * dt)))
    zero = np.zeros(3)
    speed = max_speed(pinned)
    for _ in range(n_chunks):
        integ.advance(zero, dt, chunk, hold_body=True, damping=damping)
        current = integ.state()
        speed = max_speed(current)
        if speed < tolerance and _is_static(plant, current, tolerance, dt):
            log.info("fluid settled after %.3f s", integ.steps * dt)
            return current
    raise SettlingError(f"fluid not settled after {max_time} s (max speed {speed:.3g} m/s)", max_speed=speed)


def _is_static(plant, state, tolerance, dt):
    # at rest *and* in equilibrium: one step from here must not exceed the tolerance
    if state.n_fluid == 0:
        return True
    _, _, acc = plant.accelerations(state, np.zeros(3))
    return float(np.max(np.hypot(acc[:, 0], acc[:, 1]))) * dt < tolerance


@dataclass
class SimulationResult:
    dataset: Dataset
    states: list = field(default_factory=list)
    state_times: list = field(default_factory=list)
    final_state: SystemState | None = None
    dynamics_time: float = 0.0
    logging_time: float = 0.0

    def timing_report(self):
        return {
            "dynamics_s": self.dynamics_time,
            "logging_s": self.logging_time,
            "samples": len(self.dataset),
        }


def simulate(plant, initial_state, horizon, fast_dt=FAST_DT, slow_dt=SLOW_DT, policy=None, logger=None,
             record_every=None):
    """Multi-rate simulation.

    The dynamics advance at ``fast_dt``.  At every slow tick ``k`` the output
    ``y_k`` is sampled, ``u_k = policy(k, t_k, y_k)`` is evaluated and held
    constant (zero-order hold) for the following ``slow_dt / fast_dt`` steps.

    Args:
        plant: :class:`~slosh.rigid.Plant`.
        initial_state: :class:`~slosh.rigid.SystemState`.
        horizon: simulated time; ``round(horizon / slow_dt)`` samples are produced.
        fast_dt: integration step.
        slow_dt: sampling / control / logging period (integer multiple of ``fast_dt``).
        policy: callable ``(k, t, y) -> u`` (length 3); zero input if omitted.
        logger: optional callable ``(k, t, state)`` receiving an independent copy.
        record_every: keep a full-state snapshot every this many slow ticks.

    Raises:
        NumericBlowupError: carrying the fast step index and the last finite state.
    """
    ratio = slow_dt / fast_dt
    n_sub = int(round(ratio))
    if n_sub < 1 or abs(ratio - n_sub) > 1e-9 * ratio:
        raise ConfigurationError("slow_dt must be an integer multiple of fast_dt")
    n_samples = int(round(horizon / slow_dt))
    integ = Integrator(plant, initial_state)
    us = np.zeros((n_samples, 3))
    ys = np.zeros((n_samples, 6))
    result = SimulationResult(Dataset(us, ys, slow_dt))
    t_dyn = 0.0
    t_log = 0.0
    for k in range(n_samples):
        t = k * slow_dt
        y = integ.output()
        u = np.zeros(3) if policy is None else np.asarray(policy(k, t, y), dtype=float).reshape(3)
        us[k] = u
        ys[k] = y
        tic = time.perf_counter()
        if logger is not None or (record_every and k % record_every == 0):
            snap = integ.state()
            if record_every and k % record_every == 0:
                result.states.append(snap)
                result.state_times.append(t)
            if logger is not None:
                logger(k, t, snap.copy())
        t_log += time.perf_counter() - tic
        tic = time.perf_counter()
        integ.advance(u, fast_dt, n_sub)
        t_dyn += time.perf_counter() - tic
    result.dataset = Dataset(us, ys, slow_dt)
    result.final_state = integ.state()
    result.dynamics_time = t_dyn
    result.logging_time = t_log
    return result


def tank_excursion(state, sc_params):
    """Largest distance of any fluid particle from the (moving) tank centre."""
    sc = state.spacecraft
    c, s = np.cos(sc.theta), np.sin(sc.theta)
    tc = np.asarray(sc_params.tank_center, dtype=float)
    center = sc.r + np.array([c * tc[0] - s * tc[1], s * tc[0] + c * tc[1]])
    if state.n_fluid == 0:
        return 0.0
    d = state.fluid.positions - center
    return float(np.max(np.hypot(d[:, 0], d[:, 1])))
