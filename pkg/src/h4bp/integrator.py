"""Compiled Dormand-Prince 8(5,3) integrator with dense output and event location.

The Butcher tableau, error estimators and interpolation coefficients are taken
from scipy's DOP853 implementation; the stepping loop is compiled with numba so
that whole arcs (including the variational equations) run without returning to
the interpreter.  Right-hand sides and event functions are selected by the
integer codes of :mod:`h4bp.kernels`; ``p`` is a float parameter vector.
"""

import numpy as np
from numba import njit
from scipy.integrate._ivp import dop853_coefficients as _dc

from .kernels import event, rhs

N_STAGES = _dc.N_STAGES
N_EXT = _dc.N_STAGES_EXTENDED
_A = np.ascontiguousarray(_dc.A)
_B = np.ascontiguousarray(_dc.B)
_C = np.ascontiguousarray(_dc.C)
_E3 = np.ascontiguousarray(_dc.E3)
_E5 = np.ascontiguousarray(_dc.E5)
_D = np.ascontiguousarray(_dc.D)

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0

# integration status codes
REACHED = 0
EVENT = 1
COLLISION = 2
TOO_MANY_STEPS = 3
STEP_TOO_SMALL = 4


@njit(cache=True)
def _rk_step(f, t, y, fy, h, p, K):
    n = y.shape[0]
    K[0, :] = fy
    for s in range(1, N_STAGES):
        ys = y.copy()
        for j in range(s):
            a = _A[s, j]
            if a != 0.0:
                for i in range(n):
                    ys[i] += h * a * K[j, i]
        K[s, :] = rhs(f, t + _C[s] * h, ys, p)
    y_new = y.copy()
    for j in range(N_STAGES):
        b = _B[j]
        if b != 0.0:
            for i in range(n):
                y_new[i] += h * b * K[j, i]
    f_new = rhs(f, t + h, y_new, p)
    K[N_STAGES, :] = f_new
    return y_new, f_new


@njit(cache=True)
def _error_norm(K, h, y, y_new, rtol, atol):
    n = y.shape[0]
    e5 = 0.0
    e3 = 0.0
    for i in range(n):
        sc = atol + max(abs(y[i]), abs(y_new[i])) * rtol
        a5 = 0.0
        a3 = 0.0
        for j in range(N_STAGES + 1):
            a5 += K[j, i] * _E5[j]
            a3 += K[j, i] * _E3[j]
        a5 /= sc
        a3 /= sc
        e5 += a5 * a5
        e3 += a3 * a3
    if e5 == 0.0 and e3 == 0.0:
        return 0.0
    return abs(h) * e5 / np.sqrt((e5 + 0.01 * e3) * n)


@njit(cache=True)
def _dense_coeffs(f, t_old, y_old, y_new, f_new, h, p, K):
    n = y_old.shape[0]
    for s in range(N_STAGES + 1, N_EXT):
        ys = y_old.copy()
        for j in range(s):
            a = _A[s, j]
            if a != 0.0:
                for i in range(n):
                    ys[i] += h * a * K[j, i]
        K[s, :] = rhs(f, t_old + _C[s] * h, ys, p)
    F = np.zeros((7, n))
    for i in range(n):
        dy = y_new[i] - y_old[i]
        F[0, i] = dy
        F[1, i] = h * K[0, i] - dy
        F[2, i] = 2.0 * dy - h * (f_new[i] + K[0, i])
    for r in range(4):
        for j in range(N_EXT):
            d = _D[r, j]
            if d != 0.0:
                for i in range(n):
                    F[3 + r, i] += h * d * K[j, i]
    return F


@njit(cache=True)
def _dense_eval(y_old, F, x):
    y = F[6] * x + F[5]
    y = y * (1.0 - x) + F[4]
    y = y * x + F[3]
    y = y * (1.0 - x) + F[2]
    y = y * x + F[1]
    y = y * (1.0 - x) + F[0]
    return y * x + y_old


@njit(cache=True)
def _initial_step(f, t0, y0, f0, direction, p, rtol, atol, hmax):
    n = y0.shape[0]
    d0 = 0.0
    d1 = 0.0
    for i in range(n):
        sc = atol + abs(y0[i]) * rtol
        d0 += (y0[i] / sc) ** 2
        d1 += (f0[i] / sc) ** 2
    d0 = np.sqrt(d0 / n)
    d1 = np.sqrt(d1 / n)
    if d0 < 1e-5 or d1 < 1e-5:
        h0 = 1e-6
    else:
        h0 = 0.01 * d0 / d1
    h0 = min(h0, hmax)
    y1 = y0 + direction * h0 * f0
    f1 = rhs(f, t0 + direction * h0, y1, p)
    d2 = 0.0
    for i in range(n):
        sc = atol + abs(y0[i]) * rtol
        d2 += ((f1[i] - f0[i]) / sc) ** 2
    d2 = np.sqrt(d2 / n) / h0
    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1.0 / 8.0)
    return min(100.0 * h0, h1, hmax)


@njit(cache=True)
def _crossed(g_old, g_new, direction):
    if direction > 0:
        return g_old < 0.0 and g_new >= 0.0
    if direction < 0:
        return g_old > 0.0 and g_new <= 0.0
    return (g_old < 0.0 and g_new >= 0.0) or (g_old > 0.0 and g_new <= 0.0)


@njit(cache=True)
def _locate(g, y_old, F, p, g_old, g_new):
    """Root of g along the step interpolant, as a fraction of the step."""
    lo = 0.0
    hi = 1.0
    glo = g_old
    ghi = g_new
    side = 0
    x = 0.5
    for _ in range(200):
        # Illinois variant of regula falsi
        if ghi != glo:
            x = (lo * ghi - hi * glo) / (ghi - glo)
        else:
            x = 0.5 * (lo + hi)
        if not (lo < x < hi):
            x = 0.5 * (lo + hi)
        gx = event(g, 0.0, _dense_eval(y_old, F, x), p)
        if gx == 0.0:
            return x
        if (gx > 0.0) == (ghi > 0.0):
            hi = x
            ghi = gx
            if side == 1:
                glo *= 0.5
            side = 1
        else:
            lo = x
            glo = gx
            if side == -1:
                ghi *= 0.5
            side = -1
        if hi - lo < 1e-16:
            break
    return x


@njit(cache=True)
def integrate(f, g, t0, y0, t1, p, rtol, atol, hmax, ev_dir, ev_count,
              guard2, min_advance, store, max_steps):
    """Integrate ``y' = f(t, y, p)`` (``f`` a kernel code) from ``t0`` towards ``t1``.

    Integration stops at ``t1``, at the ``ev_count``-th crossing of ``g = 0``
    in direction ``ev_dir`` (disabled when ``ev_count == 0``), or when the
    planar radius drops below ``sqrt(guard2)``.

    Returns ``(status, t, y, nsteps, rmin2, ts, hs, yolds, Fs)``; the last
    four arrays hold the dense output when ``store`` is true.
    """
    n = y0.shape[0]
    direction = 1.0 if t1 >= t0 else -1.0
    K = np.empty((N_EXT, n))
    t = t0
    y = y0.copy()
    fy = rhs(f, t, y, p)
    rmin2 = y[0] * y[0] + y[1] * y[1]

    cap = 64 if store else 1
    ts = np.empty(cap)
    hs = np.empty(cap)
    yolds = np.empty((cap, n))
    Fs = np.empty((cap, 7, n))
    nstore = 0

    if t1 == t0:
        return (REACHED, t, y, 0, rmin2, ts[:0], hs[:0], yolds[:0], Fs[:0])

    h_abs = _initial_step(f, t0, y, fy, direction, p, rtol, atol, hmax)
    g_old = event(g, t, y, p) if ev_count > 0 else 0.0
    found = 0
    nsteps = 0
    while True:
        if nsteps >= max_steps:
            return (TOO_MANY_STEPS, t, y, nsteps, rmin2, ts[:nstore], hs[:nstore],
                    yolds[:nstore], Fs[:nstore])
        min_step = 10.0 * abs(np.nextafter(t, direction * np.inf) - t)
        h_abs = min(h_abs, hmax)
        rejected = False
        while True:
            if h_abs < min_step:
                return (STEP_TOO_SMALL, t, y, nsteps, rmin2, ts[:nstore],
                        hs[:nstore], yolds[:nstore], Fs[:nstore])
            h = h_abs * direction
            t_new = t + h
            if direction * (t_new - t1) > 0.0:
                t_new = t1
            h = t_new - t
            h_abs = abs(h)
            y_new, f_new = _rk_step(f, t, y, fy, h, p, K)
            err = _error_norm(K, h, y, y_new, rtol, atol)
            if err < 1.0:
                if err == 0.0:
                    factor = MAX_FACTOR
                else:
                    factor = min(MAX_FACTOR, SAFETY * err ** (-1.0 / 8.0))
                if rejected:
                    factor = min(1.0, factor)
                h_next = h_abs * factor
                break
            h_abs *= max(MIN_FACTOR, SAFETY * err ** (-1.0 / 8.0))
            rejected = True
        nsteps += 1

        need_dense = store
        g_new = 0.0
        hit = False
        if ev_count > 0:
            g_new = event(g, t_new, y_new, p)
            hit = _crossed(g_old, g_new, ev_dir)
            if hit:
                need_dense = True
        if need_dense:
            F = _dense_coeffs(f, t, y, y_new, f_new, h, p, K)
            if store:
                if nstore == cap:
                    cap *= 2
                    ts2 = np.empty(cap)
                    hs2 = np.empty(cap)
                    yolds2 = np.empty((cap, n))
                    Fs2 = np.empty((cap, 7, n))
                    ts2[:nstore] = ts[:nstore]
                    hs2[:nstore] = hs[:nstore]
                    yolds2[:nstore] = yolds[:nstore]
                    Fs2[:nstore] = Fs[:nstore]
                    ts, hs, yolds, Fs = ts2, hs2, yolds2, Fs2
                ts[nstore] = t
                hs[nstore] = h
                yolds[nstore] = y
                Fs[nstore] = F
                nstore += 1
            if hit:
                x = _locate(g, y, F, p, g_old, g_new)
                t_ev = t + x * h
                if direction * (t_ev - t0) > min_advance:
                    found += 1
                    if found == ev_count:
                        # re-integrate the partial step for full accuracy
                        h_ev = t_ev - t
                        if h_ev != 0.0:
                            y_ev, _ = _rk_step(f, t, y, fy, h_ev, p, K)
                        else:
                            y_ev = y.copy()
                        if store:
                            nstore -= 1
                            F2 = _dense_coeffs(f, t, y, y_ev, rhs(f, t_ev, y_ev, p), h_ev, p, K)
                            hs[nstore] = h_ev
                            Fs[nstore] = F2
                            nstore += 1
                        return (EVENT, t_ev, y_ev, nsteps, rmin2, ts[:nstore],
                                hs[:nstore], yolds[:nstore], Fs[:nstore])
        t = t_new
        y = y_new
        fy = f_new
        g_old = g_new
        h_abs = h_next
        r2 = y[0] * y[0] + y[1] * y[1]
        if r2 < rmin2:
            rmin2 = r2
        if r2 < guard2:
            return (COLLISION, t, y, nsteps, rmin2, ts[:nstore], hs[:nstore],
                    yolds[:nstore], Fs[:nstore])
        if t == t1:
            return (REACHED, t, y, nsteps, rmin2, ts[:nstore], hs[:nstore],
                    yolds[:nstore], Fs[:nstore])


@njit(cache=True)
def dense_at(ts, hs, yolds, Fs, t):
    """Evaluate stored dense output at time ``t``."""
    m = ts.shape[0]
    forward = hs[0] > 0.0
    k = 0
    if forward:
        lo, hi = 0, m - 1
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if ts[mid] <= t:
                lo = mid
            else:
                hi = mid - 1
        k = lo
    else:
        lo, hi = 0, m - 1
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if ts[mid] >= t:
                lo = mid
            else:
                hi = mid - 1
        k = lo
    x = (t - ts[k]) / hs[k]
    return _dense_eval(yolds[k], Fs[k], x)


@njit(cache=True)
def locate_in_dense(g, ts, hs, yolds, Fs, p, direction, t_after):
    """First crossing of ``g`` after ``t_after`` on stored dense output.

    Returns ``(found, t_event)``.
    """
    m = ts.shape[0]
    for k in range(m):
        t_end = ts[k] + hs[k]
        if (t_end - t_after) * hs[k] <= 0.0:
            continue
        y_end = _dense_eval(yolds[k], Fs[k], 1.0)
        g_old = event(g, ts[k], yolds[k], p)
        g_new = event(g, t_end, y_end, p)
        if _crossed(g_old, g_new, direction):
            x = _locate(g, yolds[k], Fs[k], p, g_old, g_new)
            t_ev = ts[k] + x * hs[k]
            if (t_ev - t_after) * hs[k] > 0.0:
                return True, t_ev
    return False, 0.0
