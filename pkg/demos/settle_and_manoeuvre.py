"""Settle a small propellant load, fly manoeuvre 1 and report the attitude response.

Run: python3 demos/settle_and_manoeuvre.py
"""

import numpy as np

from slosh import pipeline
from slosh.config import ExperimentConfig
from slosh.simulation import tank_excursion


def main():
    cfg = ExperimentConfig(n_particles=60)
    state = pipeline.settle(cfg)
    print(f"settled {state.n_fluid} particles")

    res = pipeline.simulate_profile(cfg, 1, state, record_every=20)
    ds = res.dataset
    theta = ds.y[:, 2]
    print(f"{len(ds)} samples, SPH dynamics {res.dynamics_time:.2f} s wall time")
    print(f"final attitude {theta[-1]:.4f} rad, peak {theta.max():.4f} rad")
    print(f"final position {ds.y[-1, :2].round(3)} m")
    worst = max(tank_excursion(s, cfg.spacecraft) for s in res.states)
    print(f"largest particle distance from tank centre {worst:.4f} m (tank radius {cfg.spacecraft.tank_radius} m)")
    for t, s in zip(res.state_times[::5], res.states[::5]):
        c = s.fluid.positions.mean(axis=0) - s.spacecraft.r
        print(f"  t={t:5.1f} s  fluid centroid rel. body {np.round(c, 4)}")


if __name__ == "__main__":
    main()
