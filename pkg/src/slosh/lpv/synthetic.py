"""Known LPV systems for self-consistency checks of the identification pipeline."""

import numpy as np

from ..control import ExcitationConfig, build_excitation
from ..data import Dataset
from .model import LpvModel, xavier


def synthetic_lpv(seed=0, n_x=4, n_u=3, n_y=3, n_p=1, hidden=(4, 4), radius=0.9, strength=0.3, ts=0.05):
    """Random stable LPV model.

    ``A_0`` is a real block-diagonal rotation/decay with spectral radius at
    most ``radius``; ``M_1`` is scaled so ``A(p)`` stays contractive for
    ``|p| <= 1`` and the scheduling output is squashed through the net's
    tanh layers.
    """
    rng = np.random.default_rng(seed)
    blocks = []
    for _ in range(n_x // 2):
        r = rng.uniform(0.6, radius)
        w = rng.uniform(0.1, 0.8)
        blocks.append(r * np.array([[np.cos(w), -np.sin(w)], [np.sin(w), np.cos(w)]]))
    if n_x % 2:
        blocks.append(np.array([[rng.uniform(0.5, radius)]]))
    A0 = np.zeros((n_x, n_x))
    i = 0
    for b in blocks:
        k = b.shape[0]
        A0[i : i + k, i : i + k] = b
        i += k
    T = np.linalg.qr(rng.normal(size=(n_x, n_x)))[0]
    A0 = T @ A0 @ T.T
    A1 = rng.normal(size=(n_p, n_x, n_x))
    A1 *= (1.0 - radius) * 0.9 / np.linalg.norm(A1, 2, axis=(1, 2))[:, None, None]
    B0 = rng.normal(size=(n_x, n_u))
    C0 = rng.normal(size=(n_y, n_x))
    B1 = strength * rng.normal(size=(n_p, n_x, n_u))
    C1 = strength * rng.normal(size=(n_p, n_y, n_x))
    sizes = [n_x + n_u, *hidden, n_p]
    net = [(2.0 * xavier(rng, sizes[k + 1], sizes[k]), 0.1 * rng.normal(size=sizes[k + 1])) for k in range(3)]
    W3, b3 = net[2]
    net[2] = (W3 / max(1.0, np.abs(W3).sum(axis=1).max()), b3)
    return LpvModel(np.concatenate([A0[None], A1]), np.concatenate([B0[None], B1]),
                    np.concatenate([C0[None], C1]), net, np.zeros(n_x), ts)


def synthetic_dataset(model, n_samples=1200, seed=1, rms=1.0):
    """Multisine-plus-pulse record generated by ``model`` (scales left at 1)."""
    cfg = ExcitationConfig(n_samples=n_samples, ts=model.ts, rms=(rms, rms, rms),
                           pulses=((0, 5.0, 7.0, 2.0 * rms), (1, 15.0, 17.0, -2.0 * rms), (2, 25.0, 26.0, 2.0 * rms)))
    u = build_excitation(seed, cfg).u
    y = model.simulate(u)
    return Dataset(u, y, model.ts)
