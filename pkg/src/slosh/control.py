"""PD attitude control, manoeuvre profiles and identification excitation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError


@dataclass
class AttitudeController:
    """Discrete PD law ``tau_k = Kp (ref_k - theta_k) - Kd thetadot_k``.

    Gains follow from a second-order target: ``Kp = J w^2``, ``Kd = 2 xi J w``.
    """

    kp: float
    kd: float
    omega: float = float("nan")
    xi: float = float("nan")
    reference: float = 0.0

    def __post_init__(self):
        if not (self.kp > 0.0 and self.kd > 0.0):
            raise ConfigurationError("controller gains must be positive")

    @classmethod
    def from_design(cls, inertia, omega=0.2 * math.pi, xi=0.7):
        if inertia <= 0 or omega <= 0 or xi <= 0:
            raise ConfigurationError("inertia, omega and xi must be positive")
        return cls(inertia * omega**2, 2.0 * xi * inertia * omega, omega, xi)

    @property
    def gain(self):
        return np.array([self.kp, self.kd])

    def time_constant(self):
        return 1.0 / (self.xi * self.omega)


def control_step(ctrl, theta, thetadot, reference=None):
    ref = ctrl.reference if reference is None else reference
    return ctrl.kp * (ref - theta) - ctrl.kd * thetadot


@dataclass(frozen=True)
class Segment:
    start: float
    end: float
    value: float


def _check_segments(segs, horizon, name):
    segs = sorted(segs, key=lambda s: s.start)
    for s in segs:
        if not (0.0 <= s.start < s.end <= horizon + 1e-12):
            raise ConfigurationError(f"{name}: segment [{s.start}, {s.end}] outside [0, {horizon}]")
        if not math.isfinite(s.value):
            raise ConfigurationError(f"{name}: non-finite value")
    for a, b in zip(segs, segs[1:]):
        if b.start < a.end:
            raise ConfigurationError(f"{name}: overlapping segments")
    return tuple(segs)


def _eval_segments(segs, t):
    for s in segs:
        if s.start <= t < s.end:
            return s.value
    return 0.0


@dataclass(frozen=True)
class ManoeuvreProfile:
    """Piecewise-constant thrust channels and attitude reference.

    Each channel is a tuple of non-overlapping ``Segment(start, end, value)``;
    outside every segment the channel is zero.
    """

    u_x: tuple
    u_y: tuple
    reference: tuple
    horizon: float
    profile_id: int = 0

    def __post_init__(self):
        if not self.horizon > 0:
            raise ConfigurationError("horizon must be positive")
        for name in ("u_x", "u_y", "reference"):
            object.__setattr__(self, name, _check_segments(getattr(self, name), self.horizon, name))

    def thrust(self, t):
        return _eval_segments(self.u_x, t), _eval_segments(self.u_y, t)

    def theta_ref(self, t):
        return _eval_segments(self.reference, t)

    def impulse(self):
        return tuple(sum((s.end - s.start) * s.value for s in ch) for ch in (self.u_x, self.u_y))


DEFAULT_PROFILES = {
    1: {
        "horizon": 30.0,
        "ux": 5.0, "ux_start": 0.0, "ux_end": 30.0,
        "theta_step": 0.1, "theta_step_time": 5.0,
        "uy_pulse": 10.0, "uy_start": 15.0, "uy_end": 15.5,
    },
    2: {
        "horizon": 30.0,
        "pulse": 10.0, "pulse_start": 2.0, "pulse_end": 4.0,
        "return_start": 10.0, "return_end": 12.0,
    },
}


def build_profile(profile_id, config=None):
    """Profile 1 (constant ``u_x``, one reference step, one ``u_y`` pulse) or 2 (pulse, dwell, reverse pulse)."""
    if profile_id not in DEFAULT_PROFILES:
        raise ConfigurationError(f"unknown profile {profile_id!r}; expected 1 or 2")
    c = dict(DEFAULT_PROFILES[profile_id])
    for key, val in (config or {}).items():
        if key not in c:
            raise ConfigurationError(f"unknown profile {profile_id} key {key!r}")
        c[key] = float(val)
    H = c["horizon"]
    try:
        if profile_id == 1:
            ux = [Segment(c["ux_start"], c["ux_end"], c["ux"])] if c["ux"] else []
            uy = [Segment(c["uy_start"], c["uy_end"], c["uy_pulse"])]
            ref = [Segment(c["theta_step_time"], H, c["theta_step"])]
        else:
            p = c["pulse"]
            ux = [Segment(c["pulse_start"], c["pulse_end"], p), Segment(c["return_start"], c["return_end"], -p)]
            uy = list(ux)
            ref = []
        return ManoeuvreProfile(tuple(ux), tuple(uy), tuple(ref), H, profile_id)
    except ConfigurationError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"malformed profile {profile_id} config: {exc}") from exc


class ClosedLoopPolicy:
    """Slow-rate policy combining a manoeuvre profile with the attitude controller.

    Callable as ``policy(k, t, y)`` with ``y = [r_x, r_y, theta, rdot_x, rdot_y, thetadot]``.
    """

    def __init__(self, profile, controller):
        self.profile = profile
        self.controller = controller

    def __call__(self, k, t, y):
        fx, fy = self.profile.thrust(t)
        tau = control_step(self.controller, y[2], y[5], self.profile.theta_ref(t))
        return np.array([fx, fy, tau])


@dataclass(frozen=True)
class ExcitationConfig:
    """Multisine plus pulses per channel.

    ``rms`` is the target RMS of each channel's multisine part; ``pulses`` lists
    ``(channel, start, end, value)`` with the pulse added on top.
    """

    n_samples: int = 2200
    ts: float = 0.05
    resolution: float = 0.05
    f_max: float = 2.0
    rms: tuple = (4.0, 4.0, 1.0)
    include_dc: bool = False
    pulses: tuple = field(default_factory=lambda: (
        (0, 5.0, 7.0, 8.0), (1, 15.0, 17.0, -8.0), (2, 25.0, 26.0, 2.0),
        (0, 60.0, 62.0, -8.0), (1, 70.0, 72.0, 8.0), (2, 80.0, 81.0, -2.0),
    ))

    def __post_init__(self):
        if self.n_samples < 1 or not self.ts > 0 or not self.resolution > 0:
            raise ConfigurationError("excitation length, ts and resolution must be positive")
        if len(self.rms) != 3 or any(r < 0 for r in self.rms):
            raise ConfigurationError("rms must be three non-negative levels")

    def frequencies(self):
        n = int(round(self.f_max / self.resolution))
        return self.resolution * np.arange(n)


@dataclass
class ExcitationSignal:
    u: np.ndarray
    ts: float
    frequencies: np.ndarray
    amplitudes: np.ndarray
    phases: np.ndarray
    seed: int

    def __len__(self):
        return len(self.u)

    @property
    def t(self):
        return self.ts * np.arange(len(self.u))


def multisine(t, freqs, amps, phases):
    return np.sum(amps[:, None] * np.cos(2.0 * np.pi * freqs[:, None] * t[None, :] + phases[:, None]), axis=0)


def build_excitation(seed, config=None):
    """Independent-phase multisine on the ``k * resolution`` grid plus pulse segments."""
    cfg = config or ExcitationConfig()
    rng = np.random.default_rng(seed)
    freqs = cfg.frequencies()
    t = cfg.ts * np.arange(cfg.n_samples)
    u = np.zeros((cfg.n_samples, 3))
    amps = np.zeros((3, len(freqs)))
    phases = rng.uniform(0.0, 2.0 * np.pi, size=(3, len(freqs)))
    active = np.ones(len(freqs), dtype=bool)
    if not cfg.include_dc:
        active &= freqs > 0
    for ch in range(3):
        a = active.astype(float)
        if cfg.rms[ch] > 0 and a.any():
            # flat amplitude with unit-RMS normalisation measured on the record itself
            raw = multisine(t, freqs, a, phases[ch])
            rms = float(np.sqrt(np.mean(raw**2)))
            a = a * (cfg.rms[ch] / rms) if rms > 0 else a * 0.0
        else:
            a = a * 0.0
        amps[ch] = a
        u[:, ch] = multisine(t, freqs, a, phases[ch])
    for ch, t0, t1, val in cfg.pulses:
        mask = (t >= t0) & (t < t1)
        u[mask, int(ch)] += val
    return ExcitationSignal(u, cfg.ts, freqs, amps, phases, seed)


class ReplayPolicy:
    """Open-loop playback of a precomputed input sequence at the slow rate."""

    def __init__(self, u):
        self.u = np.asarray(u, dtype=float)

    def __call__(self, k, t, y):
        return self.u[k]
