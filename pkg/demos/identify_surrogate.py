"""Identify LTI and LPV surrogates from a short excitation run and validate them in closed loop.

This uses a reduced excitation and training budget so it finishes in about a minute.

Run: python3 demos/identify_surrogate.py
"""

from dataclasses import replace

from slosh import pipeline
from slosh.config import ExperimentConfig
from slosh.control import build_profile


def main():
    base = ExperimentConfig(n_particles=60)
    cfg = replace(base, excitation=replace(base.excitation, n_samples=800),
                  train=replace(base.train, adam_iters=100, lbfgs_max_iters=200, restarts=2))
    state = pipeline.settle(cfg)

    res, sig = pipeline.simulate_excitation(cfg, state)
    print(f"excitation: {len(sig)} samples, SPH {res.dynamics_time:.1f} s")
    ident = pipeline.identify(cfg, res.dataset)
    rep = ident.report
    print(f"training BFR: LTI {rep.lti_bfr_avg:.2f} %, LPV {rep.train_bfr_avg:.2f} % ({rep.n_params} parameters)")

    for pid in (1, 2):
        ref = pipeline.simulate_profile(cfg, pid, state)
        out = pipeline.validate({"lti": ident.lti_augmented, "lpv": ident.lpv_augmented}, ref.dataset,
                                build_profile(pid, cfg.profiles.get(pid)), pipeline.controller(cfg),
                                ref.dynamics_time)
        for name, r in out.items():
            print(f"profile {pid} {name}: BFR {r['avg']:6.2f} %, {r['speedup']:.0f}x faster than SPH")


if __name__ == "__main__":
    main()
