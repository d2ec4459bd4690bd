"""Radially symmetric 2D SPH kernels and their gradients.

Two kernels are provided: the cubic spline (support ``2h``) used for density,
fluid pressure and fluid viscosity, and the 2D spiky kernel (support ``h``)
used for the fluid/wall interaction forces.  All functions accept scalars,
``numpy`` arrays or :class:`~slosh.dual.Dual` arrays.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import dual as ad
from .errors import DomainError


class KernelKind(enum.Enum):
    CUBIC_SPLINE = "cubic_spline"
    SPIKY3 = "spiky3"


def _check(x, h):
    xv = np.asarray(ad.value(x), dtype=float)
    if not np.isfinite(h) or h <= 0.0:
        raise DomainError(f"smoothing length must be positive and finite, got {h!r}")
    if not np.all(np.isfinite(xv)) or np.any(xv < 0.0):
        raise DomainError("kernel distance must be finite and non-negative")


def cubic_spline(x, h):
    """Cubic spline kernel ``W_cb(x; h)`` in 2D, normalised to unit integral."""
    _check(x, h)
    q = x / h
    sigma = 5.0 / (14.0 * math.pi * h * h)
    a = 2.0 - q
    b = 1.0 - q
    inner = a * a * a - 4.0 * (b * b * b)
    outer = a * a * a
    qv = ad.value(q)
    w = ad.where(qv <= 1.0, inner, ad.where(qv < 2.0, outer, 0.0 * q))
    return sigma * w


def cubic_spline_derivative(x, h):
    """Radial derivative ``dW_cb/dx``."""
    _check(x, h)
    q = x / h
    sigma = 5.0 / (14.0 * math.pi * h * h * h)
    a = 2.0 - q
    b = 1.0 - q
    inner = -3.0 * (a * a) + 12.0 * (b * b)
    outer = -3.0 * (a * a)
    qv = ad.value(q)
    dw = ad.where(qv <= 1.0, inner, ad.where(qv < 2.0, outer, 0.0 * q))
    return sigma * dw


def spiky3(x, h):
    """2D spiky kernel ``W_s3(x; h) = 10/(pi h^5) (h - x)^3`` on ``[0, h]``."""
    _check(x, h)
    d = h - x
    sigma = 10.0 / (math.pi * h**5)
    return sigma * ad.where(ad.value(x) < h, d * d * d, 0.0 * d)


def spiky3_derivative(x, h):
    """Radial derivative ``dW_s3/dx``; non-zero (``-30/(pi h^3)``) at the centre."""
    _check(x, h)
    d = h - x
    sigma = -30.0 / (math.pi * h**5)
    return sigma * ad.where(ad.value(x) < h, d * d, 0.0 * d)


@dataclass(frozen=True)
class SmoothingKernel:
    """A kernel kind bound to a smoothing length ``h``."""

    kind: KernelKind
    h: float

    def __post_init__(self):
        if not (math.isfinite(self.h) and self.h > 0.0):
            raise DomainError(f"smoothing length must be positive, got {self.h!r}")

    @property
    def support_radius(self):
        return 2.0 * self.h if self.kind is KernelKind.CUBIC_SPLINE else self.h

    def __call__(self, x):
        if self.kind is KernelKind.CUBIC_SPLINE:
            return cubic_spline(x, self.h)
        return spiky3(x, self.h)

    def derivative(self, x):
        if self.kind is KernelKind.CUBIC_SPLINE:
            return cubic_spline_derivative(x, self.h)
        return spiky3_derivative(x, self.h)

    def gradient(self, r_ij):
        """``nabla_i W`` for separation vectors ``r_ij = r_i - r_j`` (last axis has size 2).

        Zero at zero separation and outside the support.
        """
        return pair_gradient(self, r_ij)[0]


def pair_gradient(kernel, r_ij):
    """Return ``(grad, dist)`` for separation vectors of shape ``(..., 2)``."""
    rx = r_ij[..., 0]
    ry = r_ij[..., 1]
    d2 = rx * rx + ry * ry
    dist = ad.sqrt(d2)
    dv = ad.value(dist)
    inside = (dv > 0.0) & (dv < kernel.support_radius)
    safe = ad.where(inside, dist, np.ones_like(dv))
    scale = ad.where(inside, kernel.derivative(ad.where(inside, dist, np.zeros_like(dv))) / safe, np.zeros_like(dv))
    return ad.stack([scale * rx, scale * ry], axis=-1), dist


def grad(kernel, r_ij):
    """Kernel gradient with respect to the first particle; see :meth:`SmoothingKernel.gradient`."""
    return kernel.gradient(np.asarray(r_ij, dtype=float) if not ad.is_dual(r_ij) else r_ij)


def radial_integral(kernel, n_nodes=400):
    """Integrate ``W`` over the plane in polar coordinates with Gauss-Legendre nodes.

    The cubic spline is split at ``q = 1`` so each panel is a polynomial and
    the rule is exact up to rounding.
    """
    x, w = np.polynomial.legendre.leggauss(n_nodes)
    if kernel.kind is KernelKind.CUBIC_SPLINE:
        edges = [0.0, kernel.h, 2.0 * kernel.h]
    else:
        edges = [0.0, kernel.h]
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        r = 0.5 * (b - a) * x + 0.5 * (b + a)
        total += 0.5 * (b - a) * np.sum(w * kernel(r) * 2.0 * math.pi * r)
    return float(total)
