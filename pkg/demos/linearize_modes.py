"""Jacobian of the coupled plant along manoeuvre 1, by forward-mode duals and by central differences.

At exact rest the viscosity switch (active only for approaching pairs) sits on
its kink, where the two methods legitimately disagree, so the comparison is
made on a moving state part-way through the manoeuvre.

Run: python3 demos/linearize_modes.py
"""

import numpy as np

from slosh import pipeline
from slosh.config import ExperimentConfig
from slosh.linearization import Method, eigenvalues, jacobian, spectral_distance


def main():
    cfg = ExperimentConfig(n_particles=40)
    state0 = pipeline.settle(cfg)
    plant = cfg.scenario().plant()
    run = pipeline.simulate_profile(cfg, 1, state0, plant=plant, record_every=100)
    k = 2
    state, t = run.states[k], run.state_times[k]
    u = run.dataset.u[int(round(t / cfg.slow_dt))]
    nq = 3 + 2 * state.n_fluid

    ad = jacobian(plant, state, u, Method.FORWARD, time_tag=t)
    fd = jacobian(plant, state, u, Method.CENTRAL_FD, time_tag=t)
    print(f"t = {t:.1f} s, state dimension {ad.n_x}")
    print(f"max |A_ad - A_fd| = {np.abs(ad.A - fd.A).max():.2e} (max |A| = {np.abs(ad.A).max():.2e})")
    print(f"d r_x'' / d u_x = {ad.B[nq, 0]:.6e}  (1/m_sc = {1 / cfg.spacecraft.mass:.6e})")

    lam = eigenvalues(ad)
    order = np.argsort(-np.abs(lam))
    print("five largest-magnitude eigenvalues:")
    for v in lam[order[:5]]:
        print(f"  {v.real:+.4e} {v.imag:+.4e}j")
    print(f"spectral distance forward vs fd: {spectral_distance(lam, eigenvalues(fd)):.3e}")
    rest = eigenvalues(jacobian(plant, state0, np.zeros(3)))
    print(f"spectral distance rest vs t = {t:.1f} s: {spectral_distance(rest, lam):.3e}")


if __name__ == "__main__":
    main()
