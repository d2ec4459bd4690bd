"""Affine LPV state-space surrogate with a neural scheduling map."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import ConfigurationError, DivergenceError
from . import _kernels

FORMAT = "slosh-lpv/1"


@dataclass
class LpvModel:
    """``x+ = A(p) x + B(p) u``, ``y = C(p) x``, ``p = eta(x[:ns], u)``.

    ``A[i], B[i], C[i]`` are the affine coefficient matrices ``M_0..M_P``;
    the feedthrough is identically zero.  ``net`` holds
    ``[(W1, b1), (W2, b2), (W3, b3)]`` (tanh on the two hidden layers) and is
    empty for LTI models.  The model runs in normalised units: physical
    ``u`` is divided by ``u_scale`` and normalised ``y`` multiplied by ``y_scale``.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    net: list = field(default_factory=list)
    x0: np.ndarray | None = None
    ts: float = 0.05
    u_scale: np.ndarray | None = None
    y_scale: np.ndarray | None = None
    n_sched_states: int | None = None

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=float)
        self.B = np.asarray(self.B, dtype=float)
        self.C = np.asarray(self.C, dtype=float)
        if self.A.ndim == 2:
            self.A, self.B, self.C = self.A[None], self.B[None], self.C[None]
        P1, nx, nx2 = self.A.shape
        if nx != nx2 or self.B.shape[:2] != (P1, nx) or self.C.shape[0] != P1 or self.C.shape[2] != nx:
            raise ConfigurationError("inconsistent LPV matrix shapes")
        self.net = [(np.asarray(W, dtype=float), np.asarray(b, dtype=float)) for W, b in self.net]
        if self.n_p > 0 and len(self.net) != 3:
            raise ConfigurationError("a scheduled model needs a three-layer scheduling net")
        if self.n_p == 0 and self.net:
            raise ConfigurationError("an LTI model has no scheduling net")
        if self.n_sched_states is None:
            self.n_sched_states = self.n_x
        if self.net:
            if self.net[0][0].shape[1] != self.n_sched_states + self.n_u or self.net[2][0].shape[0] != self.n_p:
                raise ConfigurationError("scheduling net dimensions do not match the model")
        self.x0 = np.zeros(nx) if self.x0 is None else np.asarray(self.x0, dtype=float).reshape(nx)
        self.u_scale = np.ones(self.n_u) if self.u_scale is None else np.asarray(self.u_scale, dtype=float)
        self.y_scale = np.ones(self.n_y) if self.y_scale is None else np.asarray(self.y_scale, dtype=float)
        if not np.all(np.isfinite(self.vector())):
            raise ConfigurationError("non-finite model parameters")

    @property
    def n_x(self):
        return self.A.shape[1]

    @property
    def n_u(self):
        return self.B.shape[2]

    @property
    def n_y(self):
        return self.C.shape[1]

    @property
    def n_p(self):
        return self.A.shape[0] - 1

    @property
    def D(self):
        return np.zeros((self.n_y, self.n_u))

    @property
    def hidden(self):
        if not self.net:
            return (0, 0)
        return (self.net[0][0].shape[0], self.net[1][0].shape[0])

    @property
    def dims(self):
        h1, h2 = self.hidden
        return (self.n_x, self.n_u, self.n_y, self.n_p, self.n_sched_states, h1, h2)

    def n_params(self):
        """Trainable parameter count (matrices and net; ``x0`` excluded)."""
        return len(self.vector())

    def vector(self):
        parts = [self.A.ravel(), self.B.ravel(), self.C.ravel()]
        for W, b in self.net:
            parts += [W.ravel(), b.ravel()]
        return np.concatenate(parts)

    def with_vector(self, theta, x0=None):
        theta = np.asarray(theta, dtype=float)
        nx, nu, ny, npar, ns, h1, h2 = self.dims
        P1 = npar + 1
        pos = 0

        def take(shape):
            nonlocal pos
            n = int(np.prod(shape))
            out = theta[pos : pos + n].reshape(shape).copy()
            pos += n
            return out

        A = take((P1, nx, nx))
        B = take((P1, nx, nu))
        C = take((P1, ny, nx))
        net = []
        if npar:
            for shape in ((h1, ns + nu), (h2, h1), (npar, h2)):
                net.append((take(shape), take(shape[:1])))
        if pos != len(theta):
            raise ConfigurationError("parameter vector has the wrong length")
        return LpvModel(A, B, C, net, self.x0 if x0 is None else x0, self.ts, self.u_scale.copy(),
                        self.y_scale.copy(), self.n_sched_states)

    def matrices(self, p):
        """``(A(p), B(p), C(p))`` for a scheduling vector ``p``."""
        p = np.atleast_1d(np.asarray(p, dtype=float))
        w = np.concatenate([[1.0], p])
        return tuple(np.tensordot(w, M, axes=1) for M in (self.A, self.B, self.C))

    def lti(self):
        """The ``M_0`` part as an LTI model."""
        return LpvModel(self.A[:1].copy(), self.B[:1].copy(), self.C[:1].copy(), [], self.x0.copy(), self.ts,
                        self.u_scale.copy(), self.y_scale.copy())

    # -- evaluation -----------------------------------------------------

    def normalize_u(self, u):
        return np.asarray(u, dtype=float) / self.u_scale

    def simulate_normalized(self, u_n, x0=None):
        x0 = self.x0 if x0 is None else np.asarray(x0, dtype=float)
        u_n = np.ascontiguousarray(u_n, dtype=float).reshape(-1, self.n_u)
        Y, X, P, bad = _kernels.rollout(self.vector(), x0, u_n, *self.dims)
        if bad >= 0:
            raise DivergenceError(f"LPV rollout diverged at step {bad}", step=int(bad))
        return Y, X[:-1], P[:, : self.n_p]

    def simulate(self, u, x0=None, return_all=False):
        """Simulate on physical inputs; returns physical outputs ``(N, n_y)``."""
        Y, X, P = self.simulate_normalized(self.normalize_u(u), x0)
        Y = Y * self.y_scale
        if return_all:
            return Y, X, P
        return Y

    def closed_loop(self, fx, fy, ref, kp, kd, i_theta=2, i_rate=5, x0=None, max_iter=30):
        """Run the model in feedback with the PD attitude law; returns physical ``(u, y)``."""
        x0 = self.x0 if x0 is None else np.asarray(x0, dtype=float)
        arrs = [np.ascontiguousarray(a, dtype=float) for a in (fx, fy, ref)]
        U, Y, bad = _kernels.closed_loop(self.vector(), x0, *self.dims, *arrs, float(kp), float(kd),
                                         self.u_scale, self.y_scale, i_theta, i_rate, max_iter)
        if bad >= 0:
            raise DivergenceError(f"closed-loop surrogate diverged at step {bad}", step=int(bad))
        return U, Y

    # -- serialisation ---------------------------------------------------

    def to_dict(self):
        nx, nu, ny, npar, ns, h1, h2 = self.dims
        return {
            "format": FORMAT,
            "dims": {"n_x": nx, "n_u": nu, "n_y": ny, "n_p": npar, "n_sched_states": ns, "hidden": [h1, h2]},
            "ts": self.ts,
            "u_scale": self.u_scale.tolist(),
            "y_scale": self.y_scale.tolist(),
            "x0": self.x0.tolist(),
            "A": [M.tolist() for M in self.A],
            "B": [M.tolist() for M in self.B],
            "C": [M.tolist() for M in self.C],
            "D": self.D.tolist(),
            "net": [{"W": W.tolist(), "b": b.tolist()} for W, b in self.net],
        }

    @classmethod
    def from_dict(cls, d):
        if d.get("format") != FORMAT:
            raise ConfigurationError(f"unsupported model format {d.get('format')!r}")
        if np.any(np.asarray(d["D"], dtype=float) != 0.0):
            raise ConfigurationError("feedthrough must be zero")
        net = [(np.array(layer["W"], dtype=float), np.array(layer["b"], dtype=float)) for layer in d["net"]]
        return cls(
            np.array(d["A"], dtype=float), np.array(d["B"], dtype=float), np.array(d["C"], dtype=float), net,
            np.array(d["x0"], dtype=float), float(d["ts"]), np.array(d["u_scale"], dtype=float),
            np.array(d["y_scale"], dtype=float), int(d["dims"]["n_sched_states"]),
        )

    def save(self, path):
        # json writes floats with repr, which round-trips exactly
        Path(path).write_text(json.dumps(self.to_dict(), indent=1))

    @classmethod
    def load(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text()))


def schedule_eval(net, x, u, return_hidden=False):
    """Feed-forward scheduling map ``p = W3 tanh(W2 tanh(W1 [x; u] + b1) + b2) + b3``."""
    z = np.concatenate([np.asarray(x, dtype=float).ravel(), np.asarray(u, dtype=float).ravel()])
    (W1, b1), (W2, b2), (W3, b3) = net
    h1 = np.tanh(W1 @ z + b1)
    h2 = np.tanh(W2 @ h1 + b2)
    p = W3 @ h2 + b3
    if return_hidden:
        return p, (h1, h2)
    return p


def xavier(rng, fan_out, fan_in):
    lim = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-lim, lim, size=(fan_out, fan_in))


def init_scheduled(lti, n_p=1, hidden=(4, 4), rng=None, m_std=0.01):
    """LPV model around an LTI ``M_0``: ``M_i ~ N(0, m_std)``, Xavier net weights, zero biases."""
    rng = np.random.default_rng(rng)
    nx, nu, ny = lti.n_x, lti.n_u, lti.n_y
    A = np.concatenate([lti.A[:1], rng.normal(0.0, m_std, (n_p, nx, nx))])
    B = np.concatenate([lti.B[:1], rng.normal(0.0, m_std, (n_p, nx, nu))])
    C = np.concatenate([lti.C[:1], rng.normal(0.0, m_std, (n_p, ny, nx))])
    sizes = [nx + nu, *hidden, n_p]
    net = [(xavier(rng, sizes[i + 1], sizes[i]), np.zeros(sizes[i + 1])) for i in range(3)]
    return LpvModel(A, B, C, net, lti.x0.copy(), lti.ts, lti.u_scale.copy(), lti.y_scale.copy())


def augment_integrators(model, x0_pos=None):
    """Append forward-Euler integrators of the (velocity) outputs.

    The returned model has states ``[x; xe]`` with
    ``xe+ = xe + Ts C(p) x`` and outputs ``[xe; C(p) x]`` in physical
    units ``[positions; velocities]``.  The scheduling net still sees only
    the original states.
    """
    if model.n_y != 3 or model.n_u != 3:
        raise ConfigurationError("integrator augmentation expects a 3-input, 3-output velocity model")
    nx, ny, nu = model.n_x, model.n_y, model.n_u
    ts = model.ts
    P1 = model.n_p + 1
    A = np.zeros((P1, nx + ny, nx + ny))
    B = np.zeros((P1, nx + ny, nu))
    C = np.zeros((P1, 2 * ny, nx + ny))
    for i in range(P1):
        A[i, :nx, :nx] = model.A[i]
        A[i, nx:, :nx] = ts * model.C[i]
        B[i, :nx] = model.B[i]
        C[i, ny:, :nx] = model.C[i]
    A[0, nx:, nx:] = np.eye(ny)
    C[0, :ny, nx:] = np.eye(ny)
    pos0 = np.zeros(ny) if x0_pos is None else np.asarray(x0_pos, dtype=float) / model.y_scale
    x0 = np.concatenate([model.x0, pos0])
    return LpvModel(A, B, C, [(W.copy(), b.copy()) for W, b in model.net], x0, ts, model.u_scale.copy(),
                    np.concatenate([model.y_scale, model.y_scale]), model.n_x)
