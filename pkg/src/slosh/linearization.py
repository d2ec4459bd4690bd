"""Jacobians of the continuous-time coupled dynamics and their spectra."""

from __future__ import annotations

import enum
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import dual as ad
from .errors import NumericBlowupError, ToleranceError
from .rigid import ControlInput


class Method(enum.Enum):
    FORWARD = "forward"
    CENTRAL_FD = "fd"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        aliases = {"forward": cls.FORWARD, "forwardmode": cls.FORWARD, "ad": cls.FORWARD,
                   "fd": cls.CENTRAL_FD, "centralfd": cls.CENTRAL_FD, "central_fd": cls.CENTRAL_FD}
        try:
            return aliases[str(value).lower()]
        except KeyError:
            raise ValueError(f"unknown Jacobian method {value!r}") from None


@dataclass
class LinearizedSystem:
    """``xdot ~ A dx + B du`` about ``operating_point = (state, u)``."""

    A: np.ndarray
    B: np.ndarray
    operating_point: tuple
    time_tag: float = 0.0

    @property
    def n_x(self):
        return self.A.shape[0]


def _u_array(u):
    return u.as_vector() if isinstance(u, ControlInput) else np.asarray(u, dtype=float).reshape(3)


def jacobian(plant, state, u, method=Method.FORWARD, time_tag=0.0, chunk=64, fd_rel_step=1e-6):
    """``(df/dx, df/du)`` of the packed state derivative.

    Args:
        plant: :class:`~slosh.rigid.Plant`.
        state: operating point.
        u: input at the operating point.
        method: ``Method.FORWARD`` propagates dual numbers through the full
            pipeline (ghost kinematics included); ``Method.CENTRAL_FD`` uses
            ``h_i = fd_rel_step * max(1, |x_i|)``.
        chunk: number of tangent directions propagated together.

    Raises:
        ToleranceError: if a finite-difference step vanishes in floating point.
        NumericBlowupError: on a non-finite entry (the flat coordinate index is attached).
    """
    method = Method.parse(method)
    x = state.as_vector()
    uv = _u_array(u)
    n = state.n_fluid
    nx = len(x)
    if method is Method.FORWARD:
        J = _forward(plant, x, uv, n, chunk)
    else:
        J = _central_fd(plant, x, uv, n, fd_rel_step)
    bad = np.flatnonzero(~np.isfinite(J))
    if len(bad):
        raise NumericBlowupError(f"non-finite Jacobian entry at flat index {bad[0]}", index=int(bad[0]))
    return LinearizedSystem(J[:, :nx], J[:, nx:], (state, uv), time_tag)


def _forward(plant, x, u, n, chunk):
    nx = len(x)
    nz = nx + 3
    J = np.empty((nx, nz))
    for lo in range(0, nz, chunk):
        hi = min(nz, lo + chunk)
        k = hi - lo
        dx = np.zeros((k, nx))
        du = np.zeros((k, 3))
        for c, col in enumerate(range(lo, hi)):
            if col < nx:
                dx[c, col] = 1.0
            else:
                du[c, col - nx] = 1.0
        out = plant.f(ad.seed(x, dx), ad.seed(u, du), n)
        J[:, lo:hi] = out.tan.T
    return J


def _central_fd(plant, x, u, n, rel):
    z = np.concatenate([x, u])
    nx = len(x)
    J = np.empty((nx, len(z)))
    for i in range(len(z)):
        h = rel * max(1.0, abs(z[i]))
        up = z.copy()
        dn = z.copy()
        up[i] += h
        dn[i] -= h
        step = up[i] - dn[i]
        if not np.isfinite(step) or step == 0.0:
            raise ToleranceError(f"finite-difference step vanished at coordinate {i}")
        fp = plant.f(up[:nx], up[nx:], n)
        fm = plant.f(dn[:nx], dn[nx:], n)
        J[:, i] = (fp - fm) / step
    return J


def eigenvalues(lin, residual_tol=1e-8):
    """All eigenvalues of ``A`` with a residual check ``|Av - lv| <= tol |A|``."""
    A = lin.A if isinstance(lin, LinearizedSystem) else np.asarray(lin, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("A must be square")
    if not np.all(np.isfinite(A)):
        raise NumericBlowupError("non-finite matrix passed to the eigensolver")
    if A.size == 0:
        return np.zeros(0, dtype=complex)
    try:
        lam, V = np.linalg.eig(A)
    except np.linalg.LinAlgError as exc:
        raise NumericBlowupError(f"eigensolver did not converge: {exc}") from exc
    norm_a = np.linalg.norm(A, 2) if A.shape[0] <= 800 else np.linalg.norm(A, "fro")
    res = np.linalg.norm(A @ V - V * lam[None, :], axis=0) / np.maximum(np.linalg.norm(V, axis=0), 1e-300)
    # defective clusters (e.g. the rigid double integrator) give inaccurate vectors, not wrong values
    limit = residual_tol * max(norm_a, 1.0) * max(1.0, np.sqrt(A.shape[0]))
    eye = np.eye(A.shape[0])
    for i in np.flatnonzero(res > limit):
        # balancing can spoil a vector on badly scaled input; sigma_min(A - l I) is the backward error of l itself
        res[i] = np.linalg.svd(A - lam[i] * eye, compute_uv=False)[-1]
    if np.any(res > limit):
        worst = float(res.max())
        raise ToleranceError(f"eigen residual {worst:.3g} exceeds {limit:.3g}")
    return lam


def eigen_trace(plant, trajectory, stride=1, method=Method.FORWARD):
    """Spectra of the open-loop Jacobian along a logged trajectory.

    Args:
        trajectory: sequence of ``(t, state, u)``; ``u`` is treated as exogenous.
        stride: use every ``stride``-th sample; ``None`` or values beyond the
            trajectory length keep only the first sample.

    Returns:
        list of ``(t, eigenvalues)``.
    """
    traj = list(trajectory)
    if not traj:
        return []
    if stride is None or not np.isfinite(stride) or stride >= len(traj):
        idx = [0]
    else:
        stride = int(stride)
        if stride < 1:
            raise ValueError("stride must be >= 1")
        idx = list(range(0, len(traj), stride))
    out = []
    for i in idx:
        t, state, u = traj[i]
        try:
            lin = jacobian(plant, state, u, method, time_tag=t)
            out.append((t, eigenvalues(lin)))
        except (NumericBlowupError, ToleranceError) as exc:
            raise type(exc)(f"at t={t}: {exc}") from exc
    return out


def spectral_distance(a, b):
    """Largest matched distance under the assignment minimising total ``|l_i - m_j|``."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.shape != b.shape:
        raise ValueError("spectra must have equal size")
    if a.size == 0:
        return 0.0
    cost = np.abs(a[:, None] - b[None, :])
    r, c = linear_sum_assignment(cost)
    return float(cost[r, c].max())


def write_eigen_csv(trace, path=None):
    buf = io.StringIO()
    buf.write("t,re,im\n")
    for t, lam in trace:
        for z in lam:
            buf.write(f"{t:.17g},{z.real:.17g},{z.imag:.17g}\n")
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def read_eigen_csv(path_or_text):
    text = Path(path_or_text).read_text() if "\n" not in str(path_or_text) else path_or_text
    rows = [ln.split(",") for ln in text.splitlines()[1:] if ln.strip()]
    trace = []
    for t, re, im in rows:
        t = float(t)
        z = complex(float(re), float(im))
        if trace and trace[-1][0] == t:
            trace[-1][1].append(z)
        else:
            trace.append((t, [z]))
    return [(t, np.array(z)) for t, z in trace]
