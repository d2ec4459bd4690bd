"""Sectioned ``key = value`` experiment configuration.

One file fully determines a run::

    [satellite]   mass, inertia, tank_radius, tank_center, fill_ratio
    [fluid]       fluid constants, particle counts, spawn and settling options
    [controller]  omega, xi
    [profile]     p1.<key> / p2.<key> overrides of the manoeuvre defaults
    [excitation]  identification input design
    [identification]  training options
    [run]         seed, fast_dt, slow_dt, out_dir
"""

from __future__ import annotations

import configparser
import io
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .control import DEFAULT_PROFILES, ExcitationConfig
from .errors import ConfigurationError
from .lpv.ident import TrainConfig
from .rigid import SpacecraftParams
from .simulation import FAST_DT, SLOW_DT, Scenario
from .sph import FluidParams


@dataclass(frozen=True)
class SettleConfig:
    tolerance: float = 1e-4
    max_time: float = 20.0
    damping: float = 5.0


@dataclass(frozen=True)
class ExperimentConfig:
    spacecraft: SpacecraftParams = field(default_factory=SpacecraftParams)
    fluid: FluidParams = field(default_factory=lambda: FluidParams(clamp_pressure=True))
    n_particles: int = 150
    n_ghosts: int = 236
    spawn_spacing: float | None = None
    spawn_jitter: float = 0.1
    wall_guard: bool = True
    settle: SettleConfig = field(default_factory=SettleConfig)
    omega: float = 0.2 * math.pi
    xi: float = 0.7
    profiles: dict = field(default_factory=lambda: {1: {}, 2: {}})
    excitation: ExcitationConfig = field(default_factory=ExcitationConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    n_states: int = 4
    seed: int = 0
    fast_dt: float = FAST_DT
    slow_dt: float = SLOW_DT
    out_dir: str = "out"

    def __post_init__(self):
        if not (self.fast_dt > 0 and self.slow_dt > 0):
            raise ConfigurationError("time steps must be positive")
        ratio = self.slow_dt / self.fast_dt
        if abs(ratio - round(ratio)) > 1e-9 * ratio:
            raise ConfigurationError("slow_dt must be an integer multiple of fast_dt")
        if self.omega <= 0 or self.xi <= 0:
            raise ConfigurationError("controller omega and xi must be positive")
        if self.n_states < 1:
            raise ConfigurationError("n_states must be >= 1")
        for pid, over in self.profiles.items():
            if pid not in DEFAULT_PROFILES:
                raise ConfigurationError(f"unknown profile {pid}")
            for key in over:
                if key not in DEFAULT_PROFILES[pid]:
                    raise ConfigurationError(f"unknown profile {pid} key {key!r}")

    @classmethod
    def desk(cls, **kw):
        return cls(n_particles=150, **kw)

    @classmethod
    def benchmark(cls, **kw):
        return cls(n_particles=666, **kw)

    def scenario(self):
        return Scenario(self.spacecraft, self.fluid, self.n_particles, self.n_ghosts, self.spawn_spacing,
                        self.spawn_jitter, None, self.seed, self.wall_guard)

    def with_seed(self, seed):
        return replace(self, seed=int(seed), train=replace(self.train, seed=int(seed)))


# -- text form --------------------------------------------------------------


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (tuple, list)):
        return ", ".join(_fmt(x) for x in v)
    if v is None:
        return "auto"
    return str(v)


def _bool(s):
    s = s.strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _floats(s):
    return tuple(float(x) for x in s.split(",") if x.strip())


def _pulses(s):
    out = []
    for chunk in s.split(";"):
        if chunk.strip():
            ch, t0, t1, val = (x.strip() for x in chunk.split(":"))
            out.append((int(ch), float(t0), float(t1), float(val)))
    return tuple(out)


def _pulses_fmt(p):
    return "; ".join(f"{ch}:{t0!r}:{t1!r}:{v!r}" for ch, t0, t1, v in p)


_FLUID_EXTRA = ("n_particles", "n_ghosts", "spawn_spacing", "spawn_jitter", "wall_guard")


def dumps(cfg):
    cp = configparser.ConfigParser(interpolation=None)
    sc = cfg.spacecraft
    cp["satellite"] = {"mass": _fmt(sc.mass), "inertia": _fmt(sc.inertia), "tank_radius": _fmt(sc.tank_radius),
                       "tank_center": _fmt(tuple(float(c) for c in sc.tank_center)),
                       "fill_ratio": _fmt(sc.fill_ratio)}
    fl = {f.name: _fmt(getattr(cfg.fluid, f.name)) for f in fields(FluidParams)}
    for key in _FLUID_EXTRA:
        fl[key] = _fmt(getattr(cfg, key))
    for f in fields(SettleConfig):
        fl["settle_" + f.name] = _fmt(getattr(cfg.settle, f.name))
    cp["fluid"] = fl
    cp["controller"] = {"omega": _fmt(cfg.omega), "xi": _fmt(cfg.xi)}
    prof = {}
    for pid in sorted(cfg.profiles):
        for key, val in sorted(cfg.profiles[pid].items()):
            prof[f"p{pid}.{key}"] = _fmt(float(val))
    cp["profile"] = prof
    ex = cfg.excitation
    cp["excitation"] = {"n_samples": str(ex.n_samples), "ts": _fmt(ex.ts), "resolution": _fmt(ex.resolution),
                        "f_max": _fmt(ex.f_max), "rms": _fmt(tuple(map(float, ex.rms))),
                        "include_dc": _fmt(ex.include_dc), "pulses": _pulses_fmt(ex.pulses)}
    tr = {f.name: _fmt(getattr(cfg.train, f.name)) for f in fields(TrainConfig) if f.name != "seed"}
    tr["n_states"] = str(cfg.n_states)
    cp["identification"] = tr
    cp["run"] = {"seed": str(cfg.seed), "fast_dt": _fmt(cfg.fast_dt), "slow_dt": _fmt(cfg.slow_dt),
                 "out_dir": cfg.out_dir}
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def loads(text):
    """Parse a configuration; missing keys take the desk-scale defaults."""
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigurationError(f"unreadable config: {exc}") from exc
    allowed = {"satellite", "fluid", "controller", "profile", "excitation", "identification", "run"}
    unknown = set(cp.sections()) - allowed
    if unknown:
        raise ConfigurationError(f"unknown config sections: {sorted(unknown)}")
    base = ExperimentConfig()
    try:
        return _build(cp, base)
    except ConfigurationError:
        raise
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigurationError(f"invalid config value: {exc}") from exc


def _section(cp, name):
    return dict(cp[name]) if cp.has_section(name) else {}


def _take(d, key, conv, default):
    if key in d:
        v = d.pop(key)
        if conv is not str and v.strip().lower() == "auto":
            return None
        return conv(v)
    return default


def _check_empty(d, name):
    if d:
        raise ConfigurationError(f"unknown keys in [{name}]: {sorted(d)}")


def _build(cp, base):
    s = _section(cp, "satellite")
    b = base.spacecraft
    sc = SpacecraftParams(
        _take(s, "mass", float, b.mass), _take(s, "inertia", float, b.inertia),
        _take(s, "tank_radius", float, b.tank_radius), _take(s, "tank_center", _floats, b.tank_center),
        _take(s, "fill_ratio", float, b.fill_ratio),
    )
    _check_empty(s, "satellite")

    f = _section(cp, "fluid")
    kw = {}
    for fd in fields(FluidParams):
        default = getattr(base.fluid, fd.name)
        kw[fd.name] = _take(f, fd.name, _bool if isinstance(default, bool) else float, default)
    fluid = FluidParams(**kw)
    n_particles = _take(f, "n_particles", int, base.n_particles)
    n_ghosts = _take(f, "n_ghosts", int, base.n_ghosts)
    spawn_spacing = _take(f, "spawn_spacing", float, base.spawn_spacing)
    spawn_jitter = _take(f, "spawn_jitter", float, base.spawn_jitter)
    wall_guard = _take(f, "wall_guard", _bool, base.wall_guard)
    settle = SettleConfig(*(_take(f, "settle_" + fd.name, float, getattr(base.settle, fd.name))
                            for fd in fields(SettleConfig)))
    _check_empty(f, "fluid")

    c = _section(cp, "controller")
    omega = _take(c, "omega", float, base.omega)
    xi = _take(c, "xi", float, base.xi)
    _check_empty(c, "controller")

    profiles = {1: {}, 2: {}}
    for key, val in _section(cp, "profile").items():
        head, _, name = key.partition(".")
        if head not in ("p1", "p2") or not name:
            raise ConfigurationError(f"profile keys look like p1.<name> or p2.<name>, got {key!r}")
        profiles[int(head[1])][name] = float(val)

    e = _section(cp, "excitation")
    be = base.excitation
    exc = ExcitationConfig(
        _take(e, "n_samples", int, be.n_samples), _take(e, "ts", float, be.ts),
        _take(e, "resolution", float, be.resolution), _take(e, "f_max", float, be.f_max),
        _take(e, "rms", _floats, be.rms), _take(e, "include_dc", _bool, be.include_dc),
        _take(e, "pulses", _pulses, be.pulses),
    )
    _check_empty(e, "excitation")

    r = _section(cp, "run")
    seed = _take(r, "seed", int, base.seed)
    fast_dt = _take(r, "fast_dt", float, base.fast_dt)
    slow_dt = _take(r, "slow_dt", float, base.slow_dt)
    out_dir = _take(r, "out_dir", str, base.out_dir)
    _check_empty(r, "run")

    t = _section(cp, "identification")
    n_states = _take(t, "n_states", int, base.n_states)
    tkw = {}
    for fd in fields(TrainConfig):
        if fd.name == "seed":
            continue
        default = getattr(base.train, fd.name)
        if isinstance(default, bool):
            conv = _bool
        elif isinstance(default, int):
            conv = int
        elif isinstance(default, tuple):
            conv = lambda v: tuple(int(x) for x in v.split(",") if x.strip())  # noqa: E731
        else:
            conv = float
        tkw[fd.name] = _take(t, fd.name, conv, default)
    train = TrainConfig(seed=seed, **tkw)
    _check_empty(t, "identification")

    return ExperimentConfig(sc, fluid, n_particles, n_ghosts, spawn_spacing, spawn_jitter, wall_guard, settle,
                            omega, xi, profiles, exc, train, n_states, seed, fast_dt, slow_dt, out_dir)


def load(path):
    return loads(Path(path).read_text())


def save(cfg, path):
    Path(path).write_text(dumps(cfg))
