"""Projected nonlinear Gauss-Seidel sweep kernels.

Each interior node update solves the one-dimensional convex problem

    min_{s >= phi_i}  sum_{T ni i} |g_T(s)|^p / p * vol_T  +  lin_i s + quad_i s^2 / 2

exactly: the derivative is monotone, so we bracket a sign change and
run safeguarded Newton (bisection fallback) down to node_tol.  For
p = 2 the derivative is affine and the update is closed form.

The kernels are numba-compiled when numba is importable (it is a
declared dependency); the plain-Python fallback is identical code and
exists so the package still imports without a working JIT.

Two orderings are supported:
  mode 0: lexicographic, node (i) then (i, j) with j fastest; the
          canonical bit-reproducible order.
  mode 1: colored; colors are i % 2 in 1D and (i + j) % 3 in 2D.  The
          2D element graph couples the (i+1, j+1) diagonal, so two
          checkerboard colors would not be independent; (i + j) mod 3
          gives each triangle three distinct colors, hence nodes of one
          color never share an element and may be updated concurrently.

Obstacle values below -1e200 mean "unconstrained at this node".

Over-relaxation (omega > 1) moves past the scalar minimizer by the
usual SOR rule s_new = s + omega (s* - s), projected back onto the
bound.  For p = 2 the local objective is quadratic, so the projected
relaxed step can never raise the energy while omega < 2.  For other p
the step is accepted only when the local objective actually drops,
otherwise the exact minimizer is used; sweeps therefore stay
energy-monotone for every admissible omega.

Error codes returned by the kernels: 0 ok, 1 bracket expansion failed
(no sign change after 60 doublings), 2 non-finite value produced.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dependency
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def wrap(f):
            return f

        return wrap


UNCONSTRAINED = -1e200

__all__ = ["run_sweeps_1d", "run_sweeps_2d", "UNCONSTRAINED", "HAVE_NUMBA"]


@njit(cache=True)
def _node_energy(m, gx0, gy0, bx, by, vol, li, qi, p, s):
    """Local objective at value s (element terms touching one node)."""
    e = li * s + 0.5 * qi * s * s
    for t in range(m):
        gx = gx0[t] + bx[t] * s
        gy = gy0[t] + by[t] * s
        n2 = gx * gx + gy * gy
        if n2 > 0.0:
            e += vol * n2 ** (0.5 * p) / p
    return e


@njit(cache=True)
def _relaxed(m, gx0, gy0, bx, by, vol, li, qi, lo_bound, old, v, p, omega):
    """Over-relaxed update with the energy safeguard described above."""
    cand = old + omega * (v - old)
    if lo_bound > UNCONSTRAINED and cand < lo_bound:
        cand = lo_bound
    if cand == v or p == 2.0:
        return cand
    e_cand = _node_energy(m, gx0, gy0, bx, by, vol, li, qi, p, cand)
    e_old = _node_energy(m, gx0, gy0, bx, by, vol, li, qi, p, old)
    if e_cand < e_old:
        return cand
    return v


@njit(cache=True)
def _solve_node(m, gx0, gy0, bx, by, vol, li, qi, lo_bound, warm, minn, maxn, p, tol):
    """Exact scalar minimization for one node.

    The element gradients are affine in the unknown s:
    g_t(s) = (gx0[t] + bx[t] s, gy0[t] + by[t] s), t < m, all with the
    same volume.  Returns (value, active, err).
    """
    e = 0.5 * (p - 2.0)
    if p == 2.0:
        a = qi
        b = li
        for t in range(m):
            a += vol * (bx[t] * bx[t] + by[t] * by[t])
            b += vol * (gx0[t] * bx[t] + gy0[t] * by[t])
        s = -b / a
        if lo_bound > UNCONSTRAINED and s <= lo_bound:
            return lo_bound, 1, 0
        if not np.isfinite(s):
            return warm, 0, 2
        return s, 0, 0

    # derivative at the obstacle: nonnegative means the bound is active
    if lo_bound > UNCONSTRAINED:
        d0 = qi * lo_bound + li
        for t in range(m):
            gx = gx0[t] + bx[t] * lo_bound
            gy = gy0[t] + by[t] * lo_bound
            n2 = gx * gx + gy * gy
            if n2 > 0.0:
                d0 += vol * n2**e * (gx * bx[t] + gy * by[t])
        if d0 >= 0.0:
            return lo_bound, 1, 0
        lo = minn - 1.0
        if lo < lo_bound:
            lo = lo_bound
    else:
        lo = minn - 1.0
    hi = maxn + 1.0
    if hi <= lo:
        hi = lo + 1.0

    # expand upward until the derivative turns nonnegative
    width = hi - lo
    ok = False
    for _ in range(61):
        d = qi * hi + li
        for t in range(m):
            gx = gx0[t] + bx[t] * hi
            gy = gy0[t] + by[t] * hi
            n2 = gx * gx + gy * gy
            if n2 > 0.0:
                d += vol * n2**e * (gx * bx[t] + gy * by[t])
        if d >= 0.0:
            ok = True
            break
        hi += width
        width += width
    if not ok:
        return warm, 0, 1

    # expand downward (never below the obstacle) until it turns negative
    width = 1.0
    ok = False
    for _ in range(61):
        if lo_bound > UNCONSTRAINED and lo <= lo_bound:
            ok = True  # derivative at the obstacle is known negative
            break
        d = qi * lo + li
        for t in range(m):
            gx = gx0[t] + bx[t] * lo
            gy = gy0[t] + by[t] * lo
            n2 = gx * gx + gy * gy
            if n2 > 0.0:
                d += vol * n2**e * (gx * bx[t] + gy * by[t])
        if d < 0.0:
            ok = True
            break
        lo -= width
        width += width
        if lo_bound > UNCONSTRAINED and lo < lo_bound:
            lo = lo_bound
    if not ok:
        return warm, 0, 1

    # safeguarded Newton on the monotone derivative
    s = warm
    if s <= lo or s >= hi:
        s = 0.5 * (lo + hi)
    for _ in range(200):
        d = qi * s + li
        curv = qi
        singular = False
        for t in range(m):
            gx = gx0[t] + bx[t] * s
            gy = gy0[t] + by[t] * s
            n2 = gx * gx + gy * gy
            if n2 > 0.0:
                w = n2**e
                gb = gx * bx[t] + gy * by[t]
                d += vol * w * gb
                curv += vol * (
                    w * (bx[t] * bx[t] + by[t] * by[t])
                    + (p - 2.0) * n2 ** (e - 1.0) * gb * gb
                )
            elif p < 2.0:
                singular = True  # infinite curvature; fall back to bisection
        if d > 0.0:
            hi = s
        elif d < 0.0:
            lo = s
        else:
            lo = s
            hi = s
        if hi - lo <= tol * (1.0 + abs(s)):
            break
        if not singular and curv > 0.0 and np.isfinite(curv):
            sn = s - d / curv
            if sn <= lo or sn >= hi:
                sn = 0.5 * (lo + hi)
        else:
            sn = 0.5 * (lo + hi)
        s = sn
    v = 0.5 * (lo + hi)
    if lo_bound > UNCONSTRAINED and v < lo_bound:
        v = lo_bound
    if not np.isfinite(v):
        return warm, 0, 2
    return v, 0, 0


@njit(cache=True)
def run_sweeps_1d(u, phi, lin, quad, h, p, node_tol, omega, mode, nsweeps, active):
    """Run nsweeps full sweeps in place; returns (err, max_delta_of_last)."""
    n = u.shape[0]
    gx0 = np.empty(2)
    gy0 = np.zeros(2)
    bx = np.empty(2)
    by = np.zeros(2)
    ih = 1.0 / h
    err = 0
    delta = 0.0
    for _ in range(nsweeps):
        delta = 0.0
        ncolors = 1 if mode == 0 else 2
        for color in range(ncolors):
            start = 1
            step = 1
            if mode == 1:
                step = 2
                start = 1 if color == 1 else 2
            for i in range(start, n - 1, step):
                uw = u[i - 1]
                ue = u[i + 1]
                # left element g = (s - uw)/h, right element g = (ue - s)/h
                gx0[0] = -uw * ih
                bx[0] = ih
                gx0[1] = ue * ih
                bx[1] = -ih
                minn = uw if uw < ue else ue
                maxn = uw if uw > ue else ue
                v, act, rc = _solve_node(
                    2, gx0, gy0, bx, by, h, lin[i], quad[i], phi[i], u[i],
                    minn, maxn, p, node_tol,
                )
                if rc != 0:
                    return rc, delta
                if omega != 1.0 and act == 0:
                    v = _relaxed(
                        2, gx0, gy0, bx, by, h, lin[i], quad[i], phi[i],
                        u[i], v, p, omega,
                    )
                dv = abs(v - u[i])
                if dv > delta:
                    delta = dv
                u[i] = v
                active[i] = act
    return err, delta


@njit(cache=True)
def run_sweeps_2d(u, phi, lin, quad, hx, hy, p, node_tol, omega, mode, nsweeps, active):
    """Run nsweeps full sweeps in place; returns (err, max_delta_of_last)."""
    nx, ny = u.shape
    gx0 = np.empty(6)
    gy0 = np.empty(6)
    bx = np.empty(6)
    by = np.empty(6)
    ihx = 1.0 / hx
    ihy = 1.0 / hy
    vol = 0.5 * hx * hy
    err = 0
    delta = 0.0
    for _ in range(nsweeps):
        delta = 0.0
        ncolors = 1 if mode == 0 else 3
        for color in range(ncolors):
            for i in range(1, nx - 1):
                for j in range(1, ny - 1):
                    if mode == 1 and (i + j) % 3 != color:
                        continue
                    uw = u[i - 1, j]
                    ue = u[i + 1, j]
                    us = u[i, j - 1]
                    un = u[i, j + 1]
                    une = u[i + 1, j + 1]
                    usw = u[i - 1, j - 1]
                    # six triangles around (i, j); see energy.element_mesh
                    gx0[0] = ue * ihx
                    bx[0] = -ihx
                    gy0[0] = (une - ue) * ihy
                    by[0] = 0.0
                    gx0[1] = (une - un) * ihx
                    bx[1] = 0.0
                    gy0[1] = un * ihy
                    by[1] = -ihy
                    gx0[2] = -uw * ihx
                    bx[2] = ihx
                    gy0[2] = un * ihy
                    by[2] = -ihy
                    gx0[3] = ue * ihx
                    bx[3] = -ihx
                    gy0[3] = -us * ihy
                    by[3] = ihy
                    gx0[4] = (us - usw) * ihx
                    bx[4] = 0.0
                    gy0[4] = -us * ihy
                    by[4] = ihy
                    gx0[5] = -uw * ihx
                    bx[5] = ihx
                    gy0[5] = (uw - usw) * ihy
                    by[5] = 0.0
                    minn = uw
                    maxn = uw
                    for v_ in (ue, us, un, une, usw):
                        if v_ < minn:
                            minn = v_
                        if v_ > maxn:
                            maxn = v_
                    v, act, rc = _solve_node(
                        6, gx0, gy0, bx, by, vol, lin[i, j], quad[i, j],
                        phi[i, j], u[i, j], minn, maxn, p, node_tol,
                    )
                    if rc != 0:
                        return rc, delta
                    if omega != 1.0 and act == 0:
                        v = _relaxed(
                            6, gx0, gy0, bx, by, vol, lin[i, j], quad[i, j],
                            phi[i, j], u[i, j], v, p, omega,
                        )
                    dv = abs(v - u[i, j])
                    if dv > delta:
                        delta = dv
                    u[i, j] = v
                    active[i, j] = act
    return err, delta
