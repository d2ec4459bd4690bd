"""Compiled rollout, adjoint gradient and closed-loop loop for affine LPV models.

Flat parameter layout (row-major blocks)::

    A[0..P] (nx, nx) | B[0..P] (nx, nu) | C[0..P] (ny, nx) |
    W1 (h1, ns+nu) | b1 | W2 (h2, h1) | b2 | W3 (P, h2) | b3

``ns`` leading states plus the input feed the scheduling net; the net block
is absent when ``P == 0``.
"""

import math

import numpy as np
from numba import njit


@njit(cache=True)
def _offsets(nx, nu, ny, npar, ns, h1, h2):
    o = np.zeros(11, dtype=np.int64)
    P1 = npar + 1
    o[0] = 0
    o[1] = o[0] + P1 * nx * nx
    o[2] = o[1] + P1 * nx * nu
    o[3] = o[2] + P1 * ny * nx
    if npar > 0:
        o[4] = o[3] + h1 * (ns + nu)
        o[5] = o[4] + h1
        o[6] = o[5] + h2 * h1
        o[7] = o[6] + h2
        o[8] = o[7] + npar * h2
        o[9] = o[8] + npar
    else:
        for i in range(4, 10):
            o[i] = o[3]
    o[10] = o[9]
    return o


@njit(cache=True)
def _net(theta, o, xk, uk, ns, nu, h1, h2, npar, z, a1, a2, p):
    ni = ns + nu
    for i in range(ns):
        z[i] = xk[i]
    for i in range(nu):
        z[ns + i] = uk[i]
    for r in range(h1):
        s = theta[o[4] + r]
        base = o[3] + r * ni
        for c in range(ni):
            s += theta[base + c] * z[c]
        a1[r] = math.tanh(s)
    for r in range(h2):
        s = theta[o[6] + r]
        base = o[5] + r * h1
        for c in range(h1):
            s += theta[base + c] * a1[c]
        a2[r] = math.tanh(s)
    for r in range(npar):
        s = theta[o[8] + r]
        base = o[7] + r * h2
        for c in range(h2):
            s += theta[base + c] * a2[c]
        p[r] = s


@njit(cache=True)
def _step(theta, o, xk, uk, pk, nx, nu, ny, npar, xn, yk):
    """``yk = C(p) xk`` and ``xn = A(p) xk + B(p) uk``."""
    for r in range(ny):
        s = 0.0
        for c in range(nx):
            coef = theta[o[2] + r * nx + c]
            for i in range(npar):
                coef += pk[i] * theta[o[2] + (i + 1) * ny * nx + r * nx + c]
            s += coef * xk[c]
        yk[r] = s
    for r in range(nx):
        s = 0.0
        for c in range(nx):
            coef = theta[o[0] + r * nx + c]
            for i in range(npar):
                coef += pk[i] * theta[o[0] + (i + 1) * nx * nx + r * nx + c]
            s += coef * xk[c]
        for c in range(nu):
            coef = theta[o[1] + r * nu + c]
            for i in range(npar):
                coef += pk[i] * theta[o[1] + (i + 1) * nx * nu + r * nu + c]
            s += coef * uk[c]
        xn[r] = s


@njit(cache=True)
def rollout(theta, x0, u, nx, nu, ny, npar, ns, h1, h2):
    """Return ``(yhat (N, ny), states (N+1, nx), p (N, P), first_bad_step or -1)``."""
    o = _offsets(nx, nu, ny, npar, ns, h1, h2)
    N = u.shape[0]
    X = np.zeros((N + 1, nx))
    Y = np.zeros((N, ny))
    Pk = np.zeros((N, max(npar, 1)))
    z = np.empty(ns + nu)
    a1 = np.empty(max(h1, 1))
    a2 = np.empty(max(h2, 1))
    X[0, :] = x0
    bad = -1
    for k in range(N):
        if npar > 0:
            _net(theta, o, X[k], u[k], ns, nu, h1, h2, npar, z, a1, a2, Pk[k])
        _step(theta, o, X[k], u[k], Pk[k], nx, nu, ny, npar, X[k + 1], Y[k])
        ok = True
        for i in range(nx):
            if not math.isfinite(X[k + 1, i]) or abs(X[k + 1, i]) > 1e150:
                ok = False
        if not ok:
            bad = k
            break
    return Y, X, Pk, bad


@njit(cache=True)
def loss_grad(theta, x0, u, y, nx, nu, ny, npar, ns, h1, h2):
    """Mean squared error ``(1/N) sum_k |y_k - yhat_k|^2`` and its exact gradient.

    Reverse-mode sweep over the stored forward trajectory.  Returns
    ``(loss, dtheta, dx0, bad)``; ``bad >= 0`` flags a diverged rollout
    (loss is then ``inf`` and gradients are zero).
    """
    o = _offsets(nx, nu, ny, npar, ns, h1, h2)
    N = u.shape[0]
    ni = ns + nu
    X = np.zeros((N + 1, nx))
    Y = np.zeros((N, ny))
    Pk = np.zeros((N, max(npar, 1)))
    H1 = np.zeros((N, max(h1, 1)))
    H2 = np.zeros((N, max(h2, 1)))
    z = np.empty(ni)
    X[0, :] = x0
    g = np.zeros(theta.shape[0])
    gx0 = np.zeros(nx)
    for k in range(N):
        if npar > 0:
            _net(theta, o, X[k], u[k], ns, nu, h1, h2, npar, z, H1[k], H2[k], Pk[k])
        _step(theta, o, X[k], u[k], Pk[k], nx, nu, ny, npar, X[k + 1], Y[k])
        for i in range(nx):
            if not math.isfinite(X[k + 1, i]) or abs(X[k + 1, i]) > 1e150:
                return np.inf, g, gx0, k
    loss = 0.0
    for k in range(N):
        for r in range(ny):
            e = Y[k, r] - y[k, r]
            loss += e * e
    loss /= N
    if not math.isfinite(loss):
        return np.inf, g, gx0, N - 1

    lam = np.zeros(nx)
    lam_prev = np.zeros(nx)
    gy = np.zeros(ny)
    gp = np.zeros(max(npar, 1))
    g2 = np.zeros(max(h2, 1))
    g1 = np.zeros(max(h1, 1))
    for k in range(N - 1, -1, -1):
        xk = X[k]
        uk = u[k]
        pk = Pk[k]
        for r in range(ny):
            gy[r] = 2.0 / N * (Y[k, r] - y[k, r])
        for i in range(npar):
            gp[i] = 0.0
        # C block
        for r in range(ny):
            for c in range(nx):
                w = gy[r] * xk[c]
                g[o[2] + r * nx + c] += w
                for i in range(npar):
                    g[o[2] + (i + 1) * ny * nx + r * nx + c] += pk[i] * w
                    gp[i] += w * theta[o[2] + (i + 1) * ny * nx + r * nx + c]
        # A, B blocks with lam = dL/dx_{k+1}
        for r in range(nx):
            lr = lam[r]
            if lr == 0.0:
                continue
            for c in range(nx):
                w = lr * xk[c]
                g[o[0] + r * nx + c] += w
                for i in range(npar):
                    g[o[0] + (i + 1) * nx * nx + r * nx + c] += pk[i] * w
                    gp[i] += w * theta[o[0] + (i + 1) * nx * nx + r * nx + c]
            for c in range(nu):
                w = lr * uk[c]
                g[o[1] + r * nu + c] += w
                for i in range(npar):
                    g[o[1] + (i + 1) * nx * nu + r * nu + c] += pk[i] * w
                    gp[i] += w * theta[o[1] + (i + 1) * nx * nu + r * nu + c]
        # dL/dx_k through the linear maps
        for c in range(nx):
            s = 0.0
            for r in range(ny):
                coef = theta[o[2] + r * nx + c]
                for i in range(npar):
                    coef += pk[i] * theta[o[2] + (i + 1) * ny * nx + r * nx + c]
                s += coef * gy[r]
            for r in range(nx):
                coef = theta[o[0] + r * nx + c]
                for i in range(npar):
                    coef += pk[i] * theta[o[0] + (i + 1) * nx * nx + r * nx + c]
                s += coef * lam[r]
            lam_prev[c] = s
        if npar > 0:
            a1 = H1[k]
            a2 = H2[k]
            for c in range(ns):
                z[c] = xk[c]
            for c in range(nu):
                z[ns + c] = uk[c]
            for i in range(npar):
                g[o[8] + i] += gp[i]
                for c in range(h2):
                    g[o[7] + i * h2 + c] += gp[i] * a2[c]
            for c in range(h2):
                s = 0.0
                for i in range(npar):
                    s += theta[o[7] + i * h2 + c] * gp[i]
                g2[c] = s * (1.0 - a2[c] * a2[c])
                g[o[6] + c] += g2[c]
                for j in range(h1):
                    g[o[5] + c * h1 + j] += g2[c] * a1[j]
            for j in range(h1):
                s = 0.0
                for c in range(h2):
                    s += theta[o[5] + c * h1 + j] * g2[c]
                g1[j] = s * (1.0 - a1[j] * a1[j])
                g[o[4] + j] += g1[j]
                for c in range(ni):
                    g[o[3] + j * ni + c] += g1[j] * z[c]
            for c in range(ns):
                s = 0.0
                for j in range(h1):
                    s += theta[o[3] + j * ni + c] * g1[j]
                lam_prev[c] += s
        for c in range(nx):
            lam[c] = lam_prev[c]
    for c in range(nx):
        gx0[c] = lam[c]
    return loss, g, gx0, -1


@njit(cache=True)
def _outputs(theta, o, x, pk, nx, ny, npar, yk):
    for r in range(ny):
        s = 0.0
        for c in range(nx):
            coef = theta[o[2] + r * nx + c]
            for i in range(npar):
                coef += pk[i] * theta[o[2] + (i + 1) * ny * nx + r * nx + c]
            s += coef * x[c]
        yk[r] = s


@njit(cache=True)
def _law(theta, o, x, un, tau, nx, nu, ny, npar, ns, h1, h2, z, a1, a2, p, yk, ref, kp, kd, u_scale, y_scale,
         i_theta, i_rate):
    un[2] = tau / u_scale[2]
    if npar > 0:
        _net(theta, o, x, un, ns, nu, h1, h2, npar, z, a1, a2, p)
    _outputs(theta, o, x, p, nx, ny, npar, yk)
    return kp * (ref - yk[i_theta] * y_scale[i_theta]) - kd * yk[i_rate] * y_scale[i_rate]


@njit(cache=True)
def closed_loop(theta, x0, nx, nu, ny, npar, ns, h1, h2, fx, fy, ref, kp, kd, u_scale, y_scale,
                i_theta, i_rate, max_iter):
    """Surrogate in feedback with the PD law.

    The model works in normalised units; ``u_scale``/``y_scale`` convert.
    Because ``p_k`` depends on ``u_k`` and ``u_k`` on ``y_k = C(p_k) x_k``,
    the torque at each tick solves ``tau = law(tau)`` by a secant iteration
    started from the previous input (at most ``max_iter`` updates).  Returns physical
    ``(u, y)`` and the first bad step or -1.
    """
    o = _offsets(nx, nu, ny, npar, ns, h1, h2)
    N = fx.shape[0]
    U = np.zeros((N, nu))
    Y = np.zeros((N, ny))
    x = x0.copy()
    xn = np.empty(nx)
    z = np.empty(ns + nu)
    a1 = np.empty(max(h1, 1))
    a2 = np.empty(max(h2, 1))
    p = np.zeros(max(npar, 1))
    yk = np.empty(ny)
    un = np.zeros(nu)
    tau = 0.0
    for k in range(N):
        un[0] = fx[k] / u_scale[0]
        un[1] = fy[k] / u_scale[1]
        t0 = tau
        g0 = _law(theta, o, x, un, t0, nx, nu, ny, npar, ns, h1, h2, z, a1, a2, p, yk, ref[k], kp, kd,
                  u_scale, y_scale, i_theta, i_rate) - t0
        tau = t0 + g0
        if npar > 0 and g0 != 0.0:
            # secant iteration on law(tau) - tau, started from one fixed-point sweep
            t1 = tau
            for it in range(max_iter):
                g1 = _law(theta, o, x, un, t1, nx, nu, ny, npar, ns, h1, h2, z, a1, a2, p, yk, ref[k], kp, kd,
                          u_scale, y_scale, i_theta, i_rate) - t1
                if abs(g1) <= 1e-14 * (1.0 + abs(t1)) or g1 == g0 or not math.isfinite(g1):
                    if math.isfinite(g1):
                        tau = t1
                    break
                t2 = t1 - g1 * (t1 - t0) / (g1 - g0)
                t0, g0, t1 = t1, g1, t2
                tau = t1
        un[2] = tau / u_scale[2]
        if npar > 0:
            _net(theta, o, x, un, ns, nu, h1, h2, npar, z, a1, a2, p)
        _step(theta, o, x, un, p, nx, nu, ny, npar, xn, yk)
        U[k, 0] = fx[k]
        U[k, 1] = fy[k]
        U[k, 2] = tau
        for i in range(ny):
            Y[k, i] = yk[i] * y_scale[i]
        for i in range(nx):
            x[i] = xn[i]
            if not math.isfinite(x[i]):
                return U, Y, k
    return U, Y, -1
