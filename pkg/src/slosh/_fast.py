"""Compiled hot path: fused neighbour search, SPH forces and symplectic Euler.

Same arithmetic as :mod:`slosh.sph` / :mod:`slosh.rigid`, written as
explicit loops for ``numba``.  Neighbour contributions are accumulated in
ascending neighbour index; ghost reactions accumulate in ascending fluid
index.  Results are deterministic for a given input.
"""

import math

import numpy as np
from numba import njit

_CB = 5.0 / (14.0 * math.pi)
_S3 = 10.0 / math.pi
_OFFSET = 1 << 20
_STRIDE = 1 << 21


@njit(cache=True, inline="always")
def _w_cb(d, h):
    q = d / h
    a = 2.0 - q
    if q <= 1.0:
        b = 1.0 - q
        return _CB / (h * h) * (a * a * a - 4.0 * (b * b * b))
    if q < 2.0:
        return _CB / (h * h) * (a * a * a)
    return 0.0


@njit(cache=True, inline="always")
def _dw_cb(d, h):
    q = d / h
    a = 2.0 - q
    if q <= 1.0:
        b = 1.0 - q
        return _CB / (h * h * h) * (-3.0 * (a * a) + 12.0 * (b * b))
    if q < 2.0:
        return _CB / (h * h * h) * (-3.0 * (a * a))
    return 0.0


@njit(cache=True, inline="always")
def _dw_s3(d, h):
    if d < h:
        e = h - d
        return -3.0 * _S3 / (h**5) * (e * e)
    return 0.0


@njit(cache=True)
def _grid(points, cell):
    n = points.shape[0]
    keys = np.empty(n, dtype=np.int64)
    for i in range(n):
        cx = np.int64(math.floor(points[i, 0] / cell))
        cy = np.int64(math.floor(points[i, 1] / cell))
        keys[i] = (cx + _OFFSET) * _STRIDE + (cy + _OFFSET)
    order = np.argsort(keys, kind="mergesort")
    return keys[order], order


@njit(cache=True)
def _gather(x, y, cell, skeys, order, buf):
    """Fill ``buf`` with point indices in the 3x3 cell block around (x, y), sorted."""
    cx = np.int64(math.floor(x / cell))
    cy = np.int64(math.floor(y / cell))
    m = 0
    for dx in range(-1, 2):
        for dy in range(-1, 2):
            key = (cx + dx + _OFFSET) * _STRIDE + (cy + dy + _OFFSET)
            lo = np.searchsorted(skeys, key, side="left")
            hi = np.searchsorted(skeys, key, side="right")
            for t in range(lo, hi):
                buf[m] = order[t]
                m += 1
    buf[:m].sort()
    return m


@njit(cache=True)
def sph_forces(rf, vf, gp, gv, m, h, rho0, k, alpha, beta, gamma1, eps, clamp, acc, gforce, rho, pres):
    """Fluid accelerations and per-ghost reaction forces for one state.

    Writes ``acc`` (n, 2), ``gforce`` (n_g, 2), ``rho`` (n,), ``pres`` (n,).
    """
    n = rf.shape[0]
    ng = gp.shape[0]
    cell = 2.0 * h
    r2max = cell * cell
    fk, forder = _grid(rf, cell)
    if ng > 0:
        gk, gorder = _grid(gp, cell)
    else:
        gk = np.empty(0, dtype=np.int64)
        gorder = np.empty(0, dtype=np.int64)
    fbuf = np.empty(n, dtype=np.int64)
    gbuf = np.empty(max(ng, 1), dtype=np.int64)
    # neighbour lists, kept for the force pass
    fstart = np.zeros(n + 1, dtype=np.int64)
    gstart = np.zeros(n + 1, dtype=np.int64)
    flist = np.empty(n * 64, dtype=np.int64)
    glist = np.empty(n * 32, dtype=np.int64)
    nf = 0
    nglist = 0
    for i in range(n):
        xi = rf[i, 0]
        yi = rf[i, 1]
        cnt = _gather(xi, yi, cell, fk, forder, fbuf)
        s_f = 0.0
        for t in range(cnt):
            j = fbuf[t]
            dx = xi - rf[j, 0]
            dy = yi - rf[j, 1]
            d2 = dx * dx + dy * dy
            if d2 < r2max:
                s_f += _w_cb(math.sqrt(d2), h)
                if j != i:
                    if nf >= flist.shape[0]:
                        flist = np.concatenate((flist, np.empty(flist.shape[0], dtype=np.int64)))
                    flist[nf] = j
                    nf += 1
        fstart[i + 1] = nf
        s_g = 0.0
        if ng > 0:
            cnt = _gather(xi, yi, cell, gk, gorder, gbuf)
            for t in range(cnt):
                j = gbuf[t]
                dx = xi - gp[j, 0]
                dy = yi - gp[j, 1]
                d2 = dx * dx + dy * dy
                if d2 < r2max:
                    s_g += _w_cb(math.sqrt(d2), h)
                    if nglist >= glist.shape[0]:
                        glist = np.concatenate((glist, np.empty(glist.shape[0], dtype=np.int64)))
                    glist[nglist] = j
                    nglist += 1
        gstart[i + 1] = nglist
        rho[i] = m * (s_f + gamma1 * s_g)
        p = k * (rho[i] - rho0)
        if clamp and p < 0.0:
            p = 0.0
        pres[i] = p

    mm = m * m
    for g in range(ng):
        gforce[g, 0] = 0.0
        gforce[g, 1] = 0.0
    for i in range(n):
        xi = rf[i, 0]
        yi = rf[i, 1]
        qi = pres[i] / (rho[i] * rho[i])
        fpx = 0.0
        fpy = 0.0
        fvx = 0.0
        fvy = 0.0
        for t in range(fstart[i], fstart[i + 1]):
            j = flist[t]
            dx = xi - rf[j, 0]
            dy = yi - rf[j, 1]
            d = math.sqrt(dx * dx + dy * dy)
            if d > 0.0:
                s = _dw_cb(d, h) / d
            else:
                s = 0.0
            gx = s * dx
            gy = s * dy
            c = mm * (qi + pres[j] / (rho[j] * rho[j]))
            fpx += gx * c
            fpy += gy * c
            vr = (vf[i, 0] - vf[j, 0]) * dx + (vf[i, 1] - vf[j, 1]) * dy
            cv = mm * (2.0 * alpha * h) / (rho[i] + rho[j]) * vr / ((dx * dx + dy * dy) + eps * h * h)
            fvx += gx * cv
            fvy += gy * cv
        fgx = 0.0
        fgy = 0.0
        for t in range(gstart[i], gstart[i + 1]):
            j = glist[t]
            dx = xi - gp[j, 0]
            dy = yi - gp[j, 1]
            d = math.sqrt(dx * dx + dy * dy)
            if d > 0.0 and d < h:
                s = _dw_s3(d, h) / d
            else:
                s = 0.0
            gx = s * dx
            gy = s * dy
            cp = -2.0 * mm * pres[i] / (rho[i] * rho[i])
            vr = (vf[i, 0] - gv[j, 0]) * dx + (vf[i, 1] - gv[j, 1]) * dy
            if vr > 0.0:
                vr = 0.0
            cv = mm * (2.0 * beta) / (rho[i] + rho[i]) * vr / ((dx * dx + dy * dy) + eps * h * h)
            px = gx * (cp + cv)
            py = gy * (cp + cv)
            fgx += px
            fgy += py
            gforce[j, 0] -= px
            gforce[j, 1] -= py
        acc[i, 0] = (-fpx + fvx + fgx) / m
        acc[i, 1] = (-fpy + fvy + fgy) / m


@njit(cache=True)
def ghost_world(body, r, theta, v, omega, gp, gv):
    c = math.cos(theta)
    s = math.sin(theta)
    for j in range(body.shape[0]):
        bx = body[j, 0]
        by = body[j, 1]
        ox = c * bx - s * by
        oy = s * bx + c * by
        gp[j, 0] = ox + r[0]
        gp[j, 1] = oy + r[1]
        # recomputed offset from world position, matching the array path
        dx = gp[j, 0] - r[0]
        dy = gp[j, 1] - r[1]
        gv[j, 0] = v[0] - omega * dy
        gv[j, 1] = v[1] + omega * dx


@njit(cache=True)
def rigid_accel(gp, gforce, r, u, msc, jsc):
    fx = 0.0
    fy = 0.0
    tq = 0.0
    for j in range(gp.shape[0]):
        fx += gforce[j, 0]
        fy += gforce[j, 1]
        tq += (gp[j, 0] - r[0]) * gforce[j, 1] - (gp[j, 1] - r[1]) * gforce[j, 0]
    return (fx + u[0]) / msc, (fy + u[1]) / msc, (tq + u[2]) / jsc


@njit(cache=True)
def transition(sc, rf, vf, body, u, msc, jsc, m, h, rho0, k, alpha, beta, gamma1, eps, clamp):
    """Accelerations for the packed spacecraft vector ``sc = [rx, ry, th, vx, vy, om]``."""
    n = rf.shape[0]
    ng = body.shape[0]
    gp = np.empty((ng, 2))
    gv = np.empty((ng, 2))
    acc = np.empty((n, 2))
    gforce = np.zeros((ng, 2))
    rho = np.empty(n)
    pres = np.empty(n)
    r = sc[0:2]
    v = sc[3:5]
    ghost_world(body, r, sc[2], v, sc[5], gp, gv)
    sph_forces(rf, vf, gp, gv, m, h, rho0, k, alpha, beta, gamma1, eps, clamp, acc, gforce, rho, pres)
    ax, ay, al = rigid_accel(gp, gforce, r, u, msc, jsc)
    return ax, ay, al, acc, gforce, rho, pres


@njit(cache=True)
def _bad(x, limit):
    return not math.isfinite(x) or abs(x) > limit


@njit(cache=True)
def wall_guard(sc, rf, vf, m, msc, jsc, radius, cx, cy, hold_body):
    """Inelastic wall contact for particles that crossed the ghost ring.

    A particle beyond ``radius`` from the tank centre is projected back onto
    the ring and its outward velocity relative to the wall is removed; the
    opposite impulse goes to the spacecraft, so linear and angular momentum
    are conserved.  Returns the number of contacts.
    """
    c = math.cos(sc[2])
    s = math.sin(sc[2])
    ox = sc[0] + c * cx - s * cy
    oy = sc[1] + s * cx + c * cy
    hits = 0
    for i in range(rf.shape[0]):
        dx = rf[i, 0] - ox
        dy = rf[i, 1] - oy
        d = math.sqrt(dx * dx + dy * dy)
        if d <= radius:
            continue
        hits += 1
        nx = dx / d
        ny = dy / d
        rf[i, 0] = ox + radius * nx
        rf[i, 1] = oy + radius * ny
        px = rf[i, 0] - sc[0]
        py = rf[i, 1] - sc[1]
        wx = sc[3] - sc[5] * py
        wy = sc[4] + sc[5] * px
        vn = (vf[i, 0] - wx) * nx + (vf[i, 1] - wy) * ny
        if vn <= 0.0:
            continue
        if hold_body:
            vf[i, 0] -= vn * nx
            vf[i, 1] -= vn * ny
            continue
        # impulse j along -n solving the two-body contact with the rigid wall point
        rn = px * ny - py * nx
        inv = 1.0 / m + 1.0 / msc + rn * rn / jsc
        j = vn / inv
        vf[i, 0] -= j / m * nx
        vf[i, 1] -= j / m * ny
        sc[3] += j / msc * nx
        sc[4] += j / msc * ny
        sc[5] += j * rn / jsc
    return hits


@njit(cache=True)
def advance(sc, rf, vf, body, u, msc, jsc, m, h, rho0, k, alpha, beta, gamma1, eps, clamp,
            dt, nsteps, hold_body, damping, limit, prev_sc, prev_rf, prev_vf, wall_radius, cx, cy):
    """Integrate ``nsteps`` symplectic Euler steps in place.

    ``hold_body`` pins the spacecraft (it neither moves nor accelerates);
    ``damping`` multiplies fluid velocities by ``exp(-damping * dt)`` after
    each step (relaxation only).  With ``wall_radius > 0`` the contact guard
    runs after every position update.  Returns the index of the first step
    that produced a non-finite or over-limit state, or -1.  On failure the
    ``prev_*`` buffers hold the last good state.
    """
    n = rf.shape[0]
    ng = body.shape[0]
    gp = np.empty((ng, 2))
    gv = np.empty((ng, 2))
    acc = np.empty((n, 2))
    gforce = np.zeros((ng, 2))
    rho = np.empty(n)
    pres = np.empty(n)
    decay = math.exp(-damping * dt)
    for step in range(nsteps):
        prev_sc[:] = sc
        prev_rf[:, :] = rf
        prev_vf[:, :] = vf
        r = sc[0:2]
        v = sc[3:5]
        ghost_world(body, r, sc[2], v, sc[5], gp, gv)
        sph_forces(rf, vf, gp, gv, m, h, rho0, k, alpha, beta, gamma1, eps, clamp, acc, gforce, rho, pres)
        ax, ay, al = rigid_accel(gp, gforce, r, u, msc, jsc)
        if not hold_body:
            sc[3] += ax * dt
            sc[4] += ay * dt
            sc[5] += al * dt
            sc[0] += sc[3] * dt
            sc[1] += sc[4] * dt
            sc[2] += sc[5] * dt
        bad = False
        for i in range(n):
            vf[i, 0] += acc[i, 0] * dt
            vf[i, 1] += acc[i, 1] * dt
            if damping > 0.0:
                vf[i, 0] *= decay
                vf[i, 1] *= decay
            rf[i, 0] += vf[i, 0] * dt
            rf[i, 1] += vf[i, 1] * dt
            if _bad(rf[i, 0], limit) or _bad(rf[i, 1], limit) or _bad(vf[i, 0], limit) or _bad(vf[i, 1], limit):
                bad = True
        if wall_radius > 0.0 and not bad:
            wall_guard(sc, rf, vf, m, msc, jsc, wall_radius, cx, cy, hold_body)
        for c in range(6):
            if _bad(sc[c], limit):
                bad = True
        if bad:
            return step
    return -1
