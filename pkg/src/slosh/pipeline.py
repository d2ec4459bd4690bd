"""End-to-end experiment steps shared by the CLI, the demos and the tests."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .control import AttitudeController, ClosedLoopPolicy, ReplayPolicy, build_excitation, build_profile
from .data import Dataset
from .lpv.ident import bfr, fit_lti_init, train
from .lpv.model import augment_integrators
from .simulation import settle_fluid, simulate


def controller(cfg):
    return AttitudeController.from_design(cfg.spacecraft.inertia, cfg.omega, cfg.xi)


def settle(cfg):
    st = cfg.settle
    return settle_fluid(cfg.scenario(), tolerance=st.tolerance, max_time=st.max_time, dt=cfg.fast_dt,
                        damping=st.damping)


def simulate_profile(cfg, profile_id, state, plant=None, record_every=None, logger=None):
    """Closed-loop SPH run of manoeuvre ``profile_id`` from ``state``."""
    plant = plant or cfg.scenario().plant()
    profile = build_profile(profile_id, cfg.profiles.get(profile_id))
    policy = ClosedLoopPolicy(profile, controller(cfg))
    return simulate(plant, state, profile.horizon, cfg.fast_dt, cfg.slow_dt, policy, logger=logger,
                    record_every=record_every)


def simulate_excitation(cfg, state, plant=None):
    """Open-loop SPH response to the identification input; returns ``(result, signal)``."""
    plant = plant or cfg.scenario().plant()
    sig = build_excitation(cfg.seed, cfg.excitation)
    res = simulate(plant, state, len(sig) * cfg.slow_dt, cfg.fast_dt, cfg.slow_dt, ReplayPolicy(sig.u))
    return res, sig


@dataclass
class Identified:
    lti: object
    lpv: object
    lti_report: dict
    report: object

    @property
    def lti_augmented(self):
        return augment_integrators(self.lti)

    @property
    def lpv_augmented(self):
        return augment_integrators(self.lpv)


def identify(cfg, dataset):
    """LTI initialisation then LPV training on the velocity-level record."""
    data = dataset.velocity_level()
    lti, lti_report = fit_lti_init(data, cfg.n_states, cfg.train)
    lpv, report = train(data, cfg.train, lti)
    return Identified(lti, lpv, lti_report, report)


def profile_arrays(profile, n, ts):
    t = ts * np.arange(n)
    fx = np.array([profile.thrust(tk)[0] for tk in t])
    fy = np.array([profile.thrust(tk)[1] for tk in t])
    ref = np.array([profile.theta_ref(tk) for tk in t])
    return fx, fy, ref


def surrogate_closed_loop(model_aug, profile, ctrl, ts=None, x0=None):
    """Augmented surrogate in feedback with the PD law; returns ``(Dataset, seconds)``.

    The timing covers only the compiled loop.
    """
    ts = model_aug.ts if ts is None else ts
    n = int(round(profile.horizon / ts))
    fx, fy, ref = profile_arrays(profile, n, ts)
    if x0 is None:
        x0 = np.zeros(model_aug.n_x)
    model_aug.closed_loop(fx[:2], fy[:2], ref[:2], ctrl.kp, ctrl.kd, x0=x0)  # compile outside the timer
    tic = time.perf_counter()
    U, Y = model_aug.closed_loop(fx, fy, ref, ctrl.kp, ctrl.kd, x0=x0)
    seconds = time.perf_counter() - tic
    return Dataset(U, Y, ts), seconds


def validate(models, reference, profile, ctrl, reference_seconds=None):
    """Per-channel BFR of each augmented surrogate against a closed-loop SPH record.

    Args:
        models: mapping name -> augmented (6-output) model.
        reference: SPH :class:`Dataset` with six outputs.
        reference_seconds: SPH dynamics wall time, for the speed ratio.

    Returns:
        ``{name: {"bfr": per-channel, "avg": mean, "seconds": t, "speedup": ratio, "dataset": Dataset}}``.
    """
    out = {}
    for name, model in models.items():
        ds, sec = surrogate_closed_loop(model, profile, ctrl, reference.ts)
        per, avg = bfr(reference.y, ds.y)
        out[name] = {
            "bfr": per,
            "avg": avg,
            "seconds": sec,
            "speedup": (reference_seconds / sec) if reference_seconds and sec > 0 else float("nan"),
            "dataset": ds,
        }
    return out
