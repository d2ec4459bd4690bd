"""Fit scoring, subspace LTI initialisation and prediction-error training."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize

from ..errors import ConfigurationError, DomainError, IdentificationError, TrainingError
from . import _kernels
from .model import LpvModel, init_scheduled

log = logging.getLogger(__name__)


def bfr(y, yhat):
    """Best fit rate ``100 (1 - |y - yhat| / |y - mean(y)|)`` per channel and averaged.

    Not clipped: worse-than-mean predictions score negative.

    Raises:
        DomainError: for a channel with zero variance or on length mismatch.
    """
    y = np.asarray(y, dtype=float)
    yhat = np.asarray(yhat, dtype=float)
    if y.shape != yhat.shape:
        raise DomainError("y and yhat must have the same shape")
    if y.ndim == 1:
        y, yhat = y[:, None], yhat[:, None]
    den = np.linalg.norm(y - y.mean(axis=0), axis=0)
    if np.any(den == 0.0):
        raise DomainError("best fit rate is undefined for a constant channel")
    per = 100.0 * (1.0 - np.linalg.norm(y - yhat, axis=0) / den)
    return per, float(per.mean())


def channel_scales(a):
    """Per-channel standard deviation (1 for constant channels)."""
    s = np.std(np.asarray(a, dtype=float), axis=0)
    return np.where(s > 0.0, s, 1.0)


@dataclass(frozen=True)
class TrainConfig:
    sigma2: float = 1e-4
    sigma_x: float = 1e-6
    adam_iters: int = 2000
    lbfgs_max_iters: int = 6000
    restarts: int = 8
    seed: int = 0
    learning_rate: float = 1e-3
    n_p: int = 1
    hidden: tuple = (4, 4)
    m_std: float = 0.01
    lbfgs_memory: int = 10
    gtol: float = 1e-9
    lti_restart: bool = True

    def __post_init__(self):
        if not (self.sigma2 > 0 and self.sigma_x > 0):
            raise ConfigurationError("regularisation weights must be positive")
        if self.adam_iters < 0 or self.lbfgs_max_iters < 0 or self.restarts < 1:
            raise ConfigurationError("iteration counts must be non-negative and restarts >= 1")


# -- objective -------------------------------------------------------------


class Objective:
    """``J(theta, x0) + sigma2/2 |theta|^2 + sigma_x/2 |x0|^2`` on normalised data."""

    def __init__(self, model, u_n, y_n, sigma2, sigma_x):
        self.template = model
        self.dims = model.dims
        self.u = np.ascontiguousarray(u_n, dtype=float)
        self.y = np.ascontiguousarray(y_n, dtype=float)
        self.sigma2 = sigma2
        self.sigma_x = sigma_x
        self.n_theta = model.n_params()
        self.evaluations = 0

    def pack(self, model):
        return np.concatenate([model.vector(), model.x0])

    def unpack(self, z):
        return self.template.with_vector(z[: self.n_theta], z[self.n_theta :].copy())

    def __call__(self, z):
        self.evaluations += 1
        theta = np.ascontiguousarray(z[: self.n_theta])
        x0 = np.ascontiguousarray(z[self.n_theta :])
        loss, g, gx, bad = _kernels.loss_grad(theta, x0, self.u, self.y, *self.dims)
        if bad >= 0 or not np.isfinite(loss):
            return np.inf, np.zeros_like(z)
        val = loss + 0.5 * self.sigma2 * float(theta @ theta) + 0.5 * self.sigma_x * float(x0 @ x0)
        grad = np.concatenate([g + self.sigma2 * theta, gx + self.sigma_x * x0])
        return val, grad


def adam(fun, z0, iters, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
    """Plain Adam; returns the best iterate seen and the objective history."""
    z = np.array(z0, dtype=float)
    m = np.zeros_like(z)
    v = np.zeros_like(z)
    best_z, best_f = z.copy(), np.inf
    hist = []
    for t in range(1, iters + 1):
        f, g = fun(z)
        hist.append(f)
        if not np.isfinite(f):
            break
        if f < best_f:
            best_f, best_z = f, z.copy()
        m = beta1 * m + (1 - beta1) * g
        v = beta2 * v + (1 - beta2) * g * g
        mh = m / (1 - beta1**t)
        vh = v / (1 - beta2**t)
        z = z - lr * mh / (np.sqrt(vh) + eps)
    if iters > 0:
        f, _ = fun(z)
        if f < best_f:
            best_f, best_z = f, z.copy()
    else:
        best_f, _ = fun(z)
    return best_z, best_f, hist


def lbfgs(fun, z0, max_iters, memory=10, gtol=1e-9):
    """Limited-memory BFGS with a strong-Wolfe line search (scipy's L-BFGS-B, unbounded)."""
    hist = [fun(z0)[0]]
    if max_iters == 0:
        return np.array(z0, dtype=float), hist[0], hist

    def wrapped(z):
        f, g = fun(z)
        if not np.isfinite(f):
            return 1e300, np.zeros_like(z)
        return f, g

    def cb(zk):
        hist.append(fun(zk)[0])

    res = minimize(wrapped, np.array(z0, dtype=float), jac=True, method="L-BFGS-B", callback=cb,
                   options={"maxiter": max_iters, "maxcor": memory, "gtol": gtol, "ftol": 1e-15,
                            "maxfun": 4 * max_iters + 100, "maxls": 40})
    return res.x, float(res.fun), hist


def optimise(model, u_n, y_n, cfg):
    obj = Objective(model, u_n, y_n, cfg.sigma2, cfg.sigma_x)
    z0 = obj.pack(model)
    f0, _ = obj(z0)
    if not np.isfinite(f0):
        return None, {"initial": np.inf, "diverged": True}
    z1, fa, hist_a = adam(obj, z0, cfg.adam_iters, cfg.learning_rate)
    z2, fb, hist_b = lbfgs(obj, z1, cfg.lbfgs_max_iters, cfg.lbfgs_memory, cfg.gtol)
    if not np.isfinite(fb) or fb > fa:
        z2, fb = z1, fa
    info = {"initial": f0, "after_adam": fa, "final": fb, "adam_history": hist_a, "lbfgs_history": hist_b,
            "evaluations": obj.evaluations, "diverged": not np.isfinite(fb)}
    return obj.unpack(z2), info


# -- LTI initialisation -----------------------------------------------------


def _hankel(x, s, n_cols):
    return np.vstack([x[i : i + n_cols].T for i in range(s)])


def subspace_lti(u, y, n_x, block_rows=10):
    """PO-MOESP estimate of ``(A, C)`` followed by least squares for ``(B, x0)``.

    Raises:
        IdentificationError: when the data do not support an order-``n_x`` model.
    """
    u = np.asarray(u, dtype=float)
    y = np.asarray(y, dtype=float)
    N, m = u.shape
    l = y.shape[1]
    s = int(block_rows)
    if s * l < n_x or N < 2 * s + n_x * 4:
        raise IdentificationError("record too short or block rows too few for the requested order")
    cols = N - 2 * s + 1
    Up, Uf = _hankel(u, s, cols), _hankel(u[s:], s, cols)
    Yp, Yf = _hankel(y, s, cols), _hankel(y[s:], s, cols)
    H = np.vstack([Uf, Up, Yp, Yf]) / np.sqrt(cols)
    L = np.linalg.qr(H.T, mode="r").T
    a = s * m
    b = a + s * (m + l)
    L32 = L[b:, a:b]
    U_, S_, _ = np.linalg.svd(L32, full_matrices=False)
    if len(S_) < n_x or S_[n_x - 1] <= 1e-12 * max(S_[0], 1e-300):
        raise IdentificationError("rank deficient data: not enough excitation for the requested order")
    G = U_[:, :n_x] * np.sqrt(S_[:n_x])
    C = G[:l]
    A = np.linalg.lstsq(G[:-l], G[l:], rcond=None)[0]
    B, x0 = _fit_b_x0(A, C, u, y)
    return A, B, C, x0


def _fit_b_x0(A, C, u, y):
    """Least squares for ``B`` and ``x0`` given ``(A, C)``; the output is linear in both."""
    n = A.shape[0]
    N, m = u.shape
    l = C.shape[0]
    cols = []
    # free response to each x0 basis vector
    for i in range(n):
        x = np.zeros(n)
        x[i] = 1.0
        out = np.empty((N, l))
        for k in range(N):
            out[k] = C @ x
            x = A @ x
        cols.append(out.ravel())
    # forced response to each B entry
    for r in range(n):
        for c in range(m):
            x = np.zeros(n)
            out = np.empty((N, l))
            for k in range(N):
                out[k] = C @ x
                x = A @ x
                x[r] += u[k, c]
            cols.append(out.ravel())
    Phi = np.column_stack(cols)
    sol, *_ = np.linalg.lstsq(Phi, y.ravel(), rcond=None)
    x0 = sol[:n]
    B = sol[n:].reshape(n, m)
    return B, x0


def spectral_radius(A):
    return float(np.max(np.abs(np.linalg.eigvals(A)))) if A.size else 0.0


def fit_lti_init(data, n_x=4, cfg=None, block_rows=(10, 15, 20, 8), max_spectral_radius=1.0 + 1e-3,
                 polish=True):
    """Discrete-time LTI model (``M_0`` only) for velocity-level data.

    Each block-row count gives one subspace candidate; candidates are
    polished by prediction-error minimisation, candidates with spectral
    radius above ``max_spectral_radius`` are rejected and the best training
    fit is returned.

    Returns:
        ``(model, report)``.
    """
    if data.n_y != 3 and data.n_y < 1:
        raise IdentificationError("identification needs at least one output")
    cfg = cfg or TrainConfig()
    cfg_lti = replace(cfg, restarts=1, n_p=0)
    us = channel_scales(data.u)
    ysc = channel_scales(data.y)
    u_n = data.u / us
    y_n = data.y / ysc
    report = {"candidates": []}
    best = None
    errors = []
    for s in block_rows:
        try:
            A, B, C, x0 = subspace_lti(u_n, y_n, n_x, s)
        except (IdentificationError, np.linalg.LinAlgError) as exc:
            errors.append(str(exc))
            continue
        model = LpvModel(A, B, C, [], x0, data.ts, us, ysc)
        entry = {"block_rows": s, "subspace_radius": spectral_radius(A)}
        try:
            entry["subspace_bfr"] = bfr(data.y, model.simulate(data.u))[1]
        except Exception:
            entry["subspace_bfr"] = -np.inf
        if polish and (cfg.adam_iters or cfg.lbfgs_max_iters):
            polished, info = optimise(model, u_n, y_n, cfg_lti)
            if polished is not None:
                cand = [model, polished]
            else:
                cand = [model]
        else:
            cand = [model]
        for mdl in cand:
            rho = spectral_radius(mdl.A[0])
            try:
                score = bfr(data.y, mdl.simulate(data.u))[1]
            except Exception:
                score = -np.inf
            ok = rho <= max_spectral_radius and np.isfinite(score)
            entry.setdefault("fits", []).append({"radius": rho, "bfr": score, "accepted": ok})
            if ok and (best is None or score > best[0]):
                best = (score, mdl)
        report["candidates"].append(entry)
    if best is None:
        raise IdentificationError("no stable LTI candidate: " + "; ".join(errors or ["all candidates rejected"]))
    report["train_bfr"] = best[0]
    return best[1], report


# -- LPV training -------------------------------------------------------------


@dataclass
class TrainingReport:
    restarts: list = field(default_factory=list)
    best_index: int = -1
    train_bfr: np.ndarray | None = None
    train_bfr_avg: float = float("nan")
    lti_bfr_avg: float = float("nan")
    n_params: int = 0
    seconds: float = 0.0

    def as_dict(self):
        return {
            "best_index": self.best_index,
            "train_bfr": None if self.train_bfr is None else [float(v) for v in self.train_bfr],
            "train_bfr_avg": self.train_bfr_avg,
            "lti_bfr_avg": self.lti_bfr_avg,
            "n_params": self.n_params,
            "seconds": self.seconds,
            "restarts": [
                {k: v for k, v in r.items() if not k.endswith("history")} for r in self.restarts
            ],
        }


def train(data, cfg=None, init=None):
    """Prediction-error training of an LPV model from an LTI initialisation.

    Args:
        data: velocity-level :class:`~slosh.data.Dataset` in physical units.
        cfg: :class:`TrainConfig`.
        init: LTI model whose ``M_0``, ``x0`` and scales seed every restart;
            fitted with :func:`fit_lti_init` if omitted.

    Returns:
        ``(model, TrainingReport)``; the restart with the best average training BFR.
        ``best_index == -1`` means no restart beat the embedded LTI point
        (``M_i = 0``), which is then returned.

    Raises:
        TrainingError: if every restart diverges.
    """
    cfg = cfg or TrainConfig()
    tic = time.perf_counter()
    if init is None:
        init, _ = fit_lti_init(data, cfg=cfg)
    lti = init.lti()
    u_n = data.u / lti.u_scale
    y_n = data.y / lti.y_scale
    report = TrainingReport()
    report.lti_bfr_avg = bfr(data.y, lti.simulate(data.u))[1]
    best = None
    for r in range(cfg.restarts):
        rng = np.random.default_rng([cfg.seed, r])
        # restart 0 starts on the embedded LTI point (M_i = 0), so the winner is never worse than M_0 alone
        m_std = 0.0 if (cfg.lti_restart and r == 0) else cfg.m_std
        start = init_scheduled(lti, cfg.n_p, cfg.hidden, rng, m_std)
        entry = {"restart": r}
        try:
            model, info = optimise(start, u_n, y_n, cfg)
        except Exception as exc:  # a restart failing must not sink the others
            model, info = None, {"diverged": True, "error": repr(exc)}
        entry.update(info)
        if model is not None and not info.get("diverged"):
            try:
                per, avg = bfr(data.y, model.simulate(data.u))
                entry["train_bfr"] = [float(v) for v in per]
                entry["train_bfr_avg"] = avg
                if best is None or avg > best[0]:
                    best = (avg, r, model, per)
            except Exception as exc:
                entry["diverged"] = True
                entry["error"] = repr(exc)
        report.restarts.append(entry)
        log.info("restart %d: %s", r, entry.get("train_bfr_avg"))
    if best is None:
        raise TrainingError("every training restart diverged", diagnostics=report.restarts)
    if cfg.lti_restart and best[0] < report.lti_bfr_avg:
        # the regulariser can trade fit for smaller weights; the embedded LTI point is a member of the class
        embedded = init_scheduled(lti, cfg.n_p, cfg.hidden, np.random.default_rng([cfg.seed, 0]), 0.0)
        per, avg = bfr(data.y, embedded.simulate(data.u))
        best = (avg, -1, embedded, per)
    report.train_bfr_avg, report.best_index, model, report.train_bfr = best
    report.n_params = model.n_params()
    report.seconds = time.perf_counter() - tic
    return model, report
