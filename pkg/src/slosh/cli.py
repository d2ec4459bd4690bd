"""Command-line entry point: ``slosh {settle,simulate,linearize,excite,identify,validate}``.

Every command writes into ``--out`` (default: the config's ``out_dir``).  On
failure a single ``error: {json}`` line is printed to stderr and the exit
code is non-zero (2 for configuration problems, 1 otherwise).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import config as cfgmod
from . import pipeline
from .control import build_profile
from .data import Dataset, read_snapshot, write_snapshot
from .errors import ConfigurationError, SloshError
from .linearization import eigen_trace, write_eigen_csv
from .lpv.ident import bfr
from .lpv.model import LpvModel
from .rigid import SpacecraftState, SystemState
from .sph import ParticleField

log = logging.getLogger("slosh")

OUTPUT_NAMES = ("r_x", "r_y", "theta", "rdot_x", "rdot_y", "thetadot")


def _load_config(args):
    cfg = cfgmod.load(args.config) if args.config else cfgmod.ExperimentConfig.desk()
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    return cfg


def _out(args, cfg):
    out = Path(args.out or cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=1, default=_jsonable))


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    raise TypeError(f"not serialisable: {type(o).__name__}")


def state_to_snapshot(state, path, t=0.0):
    write_snapshot(path, state.spacecraft.as_vector(), state.fluid.positions, state.fluid.velocities, t)


def snapshot_to_state(path, mass):
    t, sc, pos, vel = read_snapshot(path)
    return t, SystemState(SpacecraftState.from_vector(sc), ParticleField(pos, vel, mass))


def _initial_state(args, cfg, out):
    path = Path(args.state) if getattr(args, "state", None) else out / "settled.csv"
    if path.exists():
        _, state = snapshot_to_state(path, cfg.fluid.particle_mass)
        if state.n_fluid != cfg.n_particles:
            raise ConfigurationError(f"{path} holds {state.n_fluid} particles, config expects {cfg.n_particles}")
        return state
    log.info("no settled state at %s; settling now", path)
    state = pipeline.settle(cfg)
    state_to_snapshot(state, path)
    return state


# -- commands ---------------------------------------------------------------


def cmd_settle(args):
    cfg = _load_config(args)
    out = _out(args, cfg)
    tic = time.perf_counter()
    state = pipeline.settle(cfg)
    path = out / "settled.csv"
    state_to_snapshot(state, path)
    speed = float(np.max(np.hypot(*state.fluid.velocities.T))) if state.n_fluid else 0.0
    print(json.dumps({"snapshot": str(path), "particles": state.n_fluid, "max_speed": speed,
                      "seconds": time.perf_counter() - tic}))


def cmd_simulate(args):
    cfg = _load_config(args)
    out = _out(args, cfg)
    state = _initial_state(args, cfg, out)
    frames = None
    if args.frames:
        frames = out / f"frames_p{args.profile}"
        frames.mkdir(exist_ok=True)

    def logger(k, t, snap):
        if frames is not None and k % args.frames == 0:
            state_to_snapshot(snap, frames / f"frame_{k:05d}.csv", t)

    res = pipeline.simulate_profile(cfg, args.profile, state, logger=logger if frames is not None else None)
    csv = out / f"profile{args.profile}.csv"
    res.dataset.to_csv(csv)
    timing = res.timing_report()
    timing["horizon_s"] = len(res.dataset) * cfg.slow_dt
    _write_json(out / f"profile{args.profile}_timing.json", timing)
    print(json.dumps({"dataset": str(csv), **timing}))


def _trajectory_from_frames(frames_dir, dataset, mass):
    traj = []
    for f in sorted(Path(frames_dir).glob("frame_*.csv")):
        t, state = snapshot_to_state(f, mass)
        k = int(round((t - dataset.t0) / dataset.ts))
        traj.append((t, state, dataset.u[k]))
    return traj


def cmd_linearize(args):
    cfg = _load_config(args)
    out = _out(args, cfg)
    plant = cfg.scenario().plant()
    if args.trajectory:
        frames = Path(args.trajectory)
        ds = Dataset.from_csv(out / f"profile{args.profile}.csv" if not args.dataset else args.dataset)
        traj = _trajectory_from_frames(frames, ds, cfg.fluid.particle_mass)
        stride = args.stride
    else:
        # re-simulate (deterministic) and keep every stride-th state
        state = _initial_state(args, cfg, out)
        keep = args.stride
        res = pipeline.simulate_profile(cfg, args.profile, state, plant=plant, record_every=keep)
        idx = [int(round(t / cfg.slow_dt)) for t in res.state_times]
        traj = [(t, s, res.dataset.u[k]) for t, s, k in zip(res.state_times, res.states, idx)]
        stride = 1 if keep < len(res.dataset) else None
    trace = eigen_trace(plant, traj, stride, args.method)
    path = out / f"eigen_p{args.profile}.csv"
    write_eigen_csv(trace, path)
    print(json.dumps({"eigen_trace": str(path), "samples": len(trace)}))


def cmd_excite(args):
    cfg = _load_config(args)
    out = _out(args, cfg)
    state = _initial_state(args, cfg, out)
    res, sig = pipeline.simulate_excitation(cfg, state)
    Dataset(sig.u, np.zeros((len(sig), 0)), sig.ts).to_csv(out / "excitation_input.csv")
    res.dataset.to_csv(out / "excitation.csv")
    timing = res.timing_report()
    _write_json(out / "excitation_timing.json", timing)
    print(json.dumps({"dataset": str(out / "excitation.csv"), **timing}))


def cmd_identify(args):
    cfg = _load_config(args)
    out = _out(args, cfg)
    ds = Dataset.from_csv(args.dataset or out / "excitation.csv")
    tic = time.perf_counter()
    result = pipeline.identify(cfg, ds)
    result.lpv.save(out / "model_lpv.json")
    result.lti.save(out / "model_lti.json")
    report = result.report.as_dict()
    report["lti_init_bfr"] = result.lti_report["train_bfr"]
    report["seconds_total"] = time.perf_counter() - tic
    _write_json(out / "identify_report.json", report)
    print(json.dumps({"model": str(out / "model_lpv.json"), "n_params": report["n_params"],
                      "train_bfr_avg": report["train_bfr_avg"], "lti_bfr_avg": report["lti_bfr_avg"],
                      "restarts": len(report["restarts"])}))


def cmd_validate(args):
    cfg = _load_config(args)
    out = _out(args, cfg)
    ref_path = Path(args.reference) if args.reference else out / f"profile{args.profile}.csv"
    timing_path = ref_path.with_name(ref_path.stem + "_timing.json")
    if ref_path.exists():
        ref = Dataset.from_csv(ref_path)
        ref_sec = json.loads(timing_path.read_text())["dynamics_s"] if timing_path.exists() else None
    else:
        res = pipeline.simulate_profile(cfg, args.profile, _initial_state(args, cfg, out))
        ref, ref_sec = res.dataset, res.dynamics_time
        ref.to_csv(ref_path)
    models = {"lpv": LpvModel.load(args.model or out / "model_lpv.json")}
    lti_path = Path(args.lti) if args.lti else out / "model_lti.json"
    if lti_path.exists():
        models["lti"] = LpvModel.load(lti_path)
    from .lpv.model import augment_integrators

    models = {k: augment_integrators(m) if m.n_y == 3 else m for k, m in models.items()}
    profile = build_profile(args.profile, cfg.profiles.get(args.profile))
    res = pipeline.validate(models, ref, profile, pipeline.controller(cfg), ref_sec)
    cols = ["t"] + [f"sph.{n}" for n in OUTPUT_NAMES]
    data = [ref.t[:, None], ref.y]
    for name, r in res.items():
        cols += [f"{name}.{n}" for n in OUTPUT_NAMES]
        data.append(r["dataset"].y)
    table = np.hstack(data)
    lines = [",".join(cols)] + [",".join("%.17g" % v for v in row) for row in table]
    (out / f"validate_p{args.profile}.csv").write_text("\n".join(lines) + "\n")
    summary = {name: {"bfr": dict(zip(OUTPUT_NAMES, r["bfr"])), "avg": r["avg"], "seconds": r["seconds"],
                      "speedup": r["speedup"]} for name, r in res.items()}
    summary["sph_seconds"] = ref_sec
    _write_json(out / f"validate_p{args.profile}.json", summary)
    print(json.dumps(summary, default=_jsonable))


# -- argument parsing ---------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="slosh", description="SPH fuel-sloshing simulator and LPV surrogate tools")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="experiment config file (desk preset if omitted)")
        sp.add_argument("--seed", type=int, help="override the config seed")
        sp.add_argument("--out", help="output directory")

    sp = sub.add_parser("settle", help="relax the spawned fluid to rest and write a snapshot")
    common(sp)
    sp.set_defaults(func=cmd_settle)

    sp = sub.add_parser("simulate", help="closed-loop manoeuvre simulation")
    common(sp)
    sp.add_argument("--profile", type=int, choices=(1, 2), default=1)
    sp.add_argument("--state", help="settled snapshot (default: <out>/settled.csv)")
    sp.add_argument("--frames", type=int, default=0, help="write a particle snapshot every N samples")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("linearize", help="eigenvalues of the Jacobian along a manoeuvre")
    common(sp)
    sp.add_argument("--profile", type=int, choices=(1, 2), default=1)
    sp.add_argument("--stride", type=int, default=20)
    sp.add_argument("--method", choices=("fd", "forward"), default="forward")
    sp.add_argument("--trajectory", help="directory of particle frames written by simulate --frames")
    sp.add_argument("--dataset", help="dataset CSV matching the frames (inputs)")
    sp.add_argument("--state", help="settled snapshot (default: <out>/settled.csv)")
    sp.set_defaults(func=cmd_linearize)

    sp = sub.add_parser("excite", help="open-loop identification experiment")
    common(sp)
    sp.add_argument("--state", help="settled snapshot (default: <out>/settled.csv)")
    sp.set_defaults(func=cmd_excite)

    sp = sub.add_parser("identify", help="fit LTI and LPV surrogates to an excitation record")
    common(sp)
    sp.add_argument("--dataset", help="dataset CSV (default: <out>/excitation.csv)")
    sp.set_defaults(func=cmd_identify)

    sp = sub.add_parser("validate", help="closed-loop surrogate vs SPH comparison")
    common(sp)
    sp.add_argument("--profile", type=int, choices=(1, 2), default=1)
    sp.add_argument("--model", help="LPV model file (default: <out>/model_lpv.json)")
    sp.add_argument("--lti", help="LTI model file (default: <out>/model_lti.json)")
    sp.add_argument("--reference", help="SPH dataset CSV (default: <out>/profile<id>.csv)")
    sp.add_argument("--state", help="settled snapshot, used if the reference must be simulated")
    sp.set_defaults(func=cmd_validate)
    return p


def error_line(exc):
    info = {"error": type(exc).__name__, "message": str(exc)}
    for attr in ("step", "index", "max_speed"):
        val = getattr(exc, attr, None)
        if val is not None:
            info[attr] = val
    return "error: " + json.dumps(info, default=_jsonable)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except (ConfigurationError, ValueError, FileNotFoundError) as exc:
        print(error_line(exc), file=sys.stderr)
        return 2
    except SloshError as exc:
        print(error_line(exc), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
