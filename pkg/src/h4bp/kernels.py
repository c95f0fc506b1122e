"""Numba right-hand sides and section functions shared by the propagators.

Every kernel has the signature ``f(t, y, p)`` with the parameter vector

    p[0] = lambda1, p[1] = lambda2, p[2] = Jacobi constant C (regularized
    flows only), p[3] = section offset used by the event functions.

State layouts
-------------
planar        [x, y, vx, vy]
planar_var    [x, y, vx, vy, Phi (4x4 row-major), V (2x2 row-major)]
spatial       [x, y, z, vx, vy, vz]
spatial_var   [x, y, z, vx, vy, vz, Phi (6x6 row-major)]
reg           [Q1, Q2, P1, P2, t]
reg_var       [Q1, Q2, P1, P2, t, Phi (4x4 row-major), V (2x2 row-major), dZ/dC (4),
               dt/dZ0 (4), dt/dC]
"""

import numpy as np
from numba import njit


@njit(cache=True)
def planar(t, y, p):
    x, yy, vx, vy = y[0], y[1], y[2], y[3]
    r2 = x * x + yy * yy
    ir3 = 1.0 / (r2 * np.sqrt(r2))
    out = np.empty(4)
    out[0] = vx
    out[1] = vy
    out[2] = 2.0 * vy + p[1] * x - x * ir3
    out[3] = -2.0 * vx + p[0] * yy - yy * ir3
    return out


@njit(cache=True)
def planar_var(t, y, p):
    x, yy, vx, vy = y[0], y[1], y[2], y[3]
    r2 = x * x + yy * yy
    ir3 = 1.0 / (r2 * np.sqrt(r2))
    ir5 = ir3 / r2
    oxx = p[1] - ir3 + 3.0 * x * x * ir5
    oyy = p[0] - ir3 + 3.0 * yy * yy * ir5
    oxy = 3.0 * x * yy * ir5
    ozz = -1.0 - ir3
    out = np.empty(24)
    out[0] = vx
    out[1] = vy
    out[2] = 2.0 * vy + p[1] * x - x * ir3
    out[3] = -2.0 * vx + p[0] * yy - yy * ir3
    for j in range(4):
        f0 = y[4 + j]
        f1 = y[8 + j]
        f2 = y[12 + j]
        f3 = y[16 + j]
        out[4 + j] = f2
        out[8 + j] = f3
        out[12 + j] = oxx * f0 + oxy * f1 + 2.0 * f3
        out[16 + j] = oxy * f0 + oyy * f1 - 2.0 * f2
    for j in range(2):
        out[20 + j] = y[22 + j]
        out[22 + j] = ozz * y[20 + j]
    return out


@njit(cache=True)
def spatial(t, y, p):
    x, yy, z = y[0], y[1], y[2]
    r2 = x * x + yy * yy + z * z
    ir3 = 1.0 / (r2 * np.sqrt(r2))
    out = np.empty(6)
    out[0] = y[3]
    out[1] = y[4]
    out[2] = y[5]
    out[3] = 2.0 * y[4] + p[1] * x - x * ir3
    out[4] = -2.0 * y[3] + p[0] * yy - yy * ir3
    out[5] = -z - z * ir3
    return out


@njit(cache=True)
def spatial_var(t, y, p):
    x, yy, z = y[0], y[1], y[2]
    r2 = x * x + yy * yy + z * z
    ir3 = 1.0 / (r2 * np.sqrt(r2))
    ir5 = ir3 / r2
    out = np.empty(42)
    out[:6] = spatial(t, y[:6], p)
    H = np.empty((3, 3))
    H[0, 0] = p[1] - ir3 + 3.0 * x * x * ir5
    H[1, 1] = p[0] - ir3 + 3.0 * yy * yy * ir5
    H[2, 2] = -1.0 - ir3 + 3.0 * z * z * ir5
    H[0, 1] = H[1, 0] = 3.0 * x * yy * ir5
    H[0, 2] = H[2, 0] = 3.0 * x * z * ir5
    H[1, 2] = H[2, 1] = 3.0 * yy * z * ir5
    Phi = y[6:].reshape((6, 6))
    dPhi = np.zeros((6, 6))
    for j in range(6):
        for i in range(3):
            dPhi[i, j] = Phi[3 + i, j]
            acc = 0.0
            for k in range(3):
                acc += H[i, k] * Phi[k, j]
            dPhi[3 + i, j] = acc
        dPhi[3, j] += 2.0 * Phi[4, j]
        dPhi[4, j] -= 2.0 * Phi[3, j]
    out[6:] = dPhi.ravel()
    return out


@njit(cache=True)
def reg(t, y, p):
    Q1, Q2, P1, P2 = y[0], y[1], y[2], y[3]
    l1, l2, C = p[0], p[1], p[2]
    e1 = 1.0 - l1
    e2 = 1.0 - l2
    s = Q1 * Q1 + Q2 * Q2
    x = Q1 * Q1 - Q2 * Q2
    yy = 2.0 * Q1 * Q2
    L = P2 * Q1 - Q2 * P1
    V = e2 * x * x + e1 * yy * yy
    dV1 = 4.0 * (e2 * x * Q1 + e1 * yy * Q2)
    dV2 = 4.0 * (-e2 * x * Q2 + e1 * yy * Q1)
    out = np.empty(5)
    out[0] = P1 + 2.0 * s * Q2
    out[1] = P2 - 2.0 * s * Q1
    out[2] = -(-4.0 * Q1 * L - 2.0 * s * P2 + 4.0 * Q1 * V + 2.0 * s * dV1 + 4.0 * C * Q1)
    out[3] = -(-4.0 * Q2 * L + 2.0 * s * P1 + 4.0 * Q2 * V + 2.0 * s * dV2 + 4.0 * C * Q2)
    out[4] = 4.0 * s
    return out


@njit(cache=True)
def reg_jacobian(y, p):
    """Jacobian of the regularized (Q, P) vector field."""
    Q1, Q2, P1, P2 = y[0], y[1], y[2], y[3]
    l1, l2, C = p[0], p[1], p[2]
    a = Q1 * Q1
    b = Q2 * Q2
    hqq11 = (4.0 * C + 4.0 * P1 * Q2 - 12.0 * P2 * Q1 + 60.0 * (1.0 - l2) * a * a
             + (72.0 - 96.0 * l1 + 24.0 * l2) * a * b + (12.0 - 16.0 * l1 + 4.0 * l2) * b * b)
    hqq12 = (4.0 * P1 * Q1 - 4.0 * P2 * Q2
             + (48.0 - 64.0 * l1 + 16.0 * l2) * Q1 * Q2 * (a + b))
    hqq22 = (4.0 * C + 12.0 * P1 * Q2 - 4.0 * P2 * Q1 + (12.0 - 16.0 * l1 + 4.0 * l2) * a * a
             + (72.0 - 96.0 * l1 + 24.0 * l2) * a * b + 60.0 * (1.0 - l2) * b * b)
    # d^2 H / dQ_i dP_j
    hqp11 = 4.0 * Q1 * Q2
    hqp12 = -(6.0 * a + 2.0 * b)
    hqp21 = 2.0 * a + 6.0 * b
    hqp22 = -4.0 * Q1 * Q2
    J = np.zeros((4, 4))
    J[0, 0] = hqp11
    J[0, 1] = hqp21
    J[1, 0] = hqp12
    J[1, 1] = hqp22
    J[0, 2] = 1.0
    J[1, 3] = 1.0
    J[2, 0] = -hqq11
    J[2, 1] = -hqq12
    J[3, 0] = -hqq12
    J[3, 1] = -hqq22
    J[2, 2] = -hqp11
    J[2, 3] = -hqp12
    J[3, 2] = -hqp21
    J[3, 3] = -hqp22
    return J


@njit(cache=True)
def reg_var(t, y, p):
    out = np.empty(34)
    out[:5] = reg(t, y[:5], p)
    J = reg_jacobian(y, p)
    Phi = y[5:21].reshape((4, 4))
    dPhi = J @ Phi
    out[5:21] = dPhi.ravel()
    # vertical variation in regularized time: dz/dtau = 4s w, dw/dtau = 4s Ozz z
    s = y[0] * y[0] + y[1] * y[1]
    k = -4.0 * s - 4.0 / (s * s)
    for j in range(2):
        out[21 + j] = 4.0 * s * y[23 + j]
        out[23 + j] = k * y[21 + j]
    # sensitivity to the Jacobi constant
    zeta = y[25:29]
    dz = J @ zeta
    dz[2] -= 4.0 * y[0]
    dz[3] -= 4.0 * y[1]
    out[25:29] = dz
    # sensitivity of the physical time, dt/dtau = 4 s
    for j in range(4):
        out[29 + j] = 8.0 * (y[0] * Phi[0, j] + y[1] * Phi[1, j])
    out[33] = 8.0 * (y[0] * zeta[0] + y[1] * zeta[1])
    return out


# section functions -----------------------------------------------------------

@njit(cache=True)
def no_event(t, y, p):
    return 1.0


@njit(cache=True)
def sec_y(t, y, p):
    return y[1] - p[3]


@njit(cache=True)
def sec_x(t, y, p):
    return y[0] - p[3]


@njit(cache=True)
def sec_r(t, y, p):
    return y[0] * y[0] + y[1] * y[1] - p[3] * p[3]


@njit(cache=True)
def reg_sec_y(t, y, p):
    return 2.0 * y[0] * y[1] - p[3]


@njit(cache=True)
def reg_sec_x(t, y, p):
    return y[0] * y[0] - y[1] * y[1] - p[3]


@njit(cache=True)
def reg_sec_r(t, y, p):
    s = y[0] * y[0] + y[1] * y[1]
    return s - p[3]


@njit(cache=True)
def reg_time(t, y, p):
    return y[4] - p[3]


# integer-coded dispatch ------------------------------------------------------
# The integrator is compiled once against these two functions rather than once
# per (vector field, section) pair, which keeps it in numba's on-disk cache.

PLANAR, PLANAR_VAR, SPATIAL, SPATIAL_VAR, REG, REG_VAR = range(6)
NO_EVENT, SEC_Y, SEC_X, SEC_R, REG_SEC_Y, REG_SEC_X, REG_SEC_R, REG_TIME = range(8)


@njit(cache=True)
def rhs(code, t, y, p):
    if code == PLANAR:
        return planar(t, y, p)
    if code == PLANAR_VAR:
        return planar_var(t, y, p)
    if code == SPATIAL:
        return spatial(t, y, p)
    if code == SPATIAL_VAR:
        return spatial_var(t, y, p)
    if code == REG:
        return reg(t, y, p)
    return reg_var(t, y, p)


@njit(cache=True)
def event(code, t, y, p):
    if code == SEC_Y:
        return sec_y(t, y, p)
    if code == SEC_X:
        return sec_x(t, y, p)
    if code == SEC_R:
        return sec_r(t, y, p)
    if code == REG_SEC_Y:
        return reg_sec_y(t, y, p)
    if code == REG_SEC_X:
        return reg_sec_x(t, y, p)
    if code == REG_SEC_R:
        return reg_sec_r(t, y, p)
    if code == REG_TIME:
        return reg_time(t, y, p)
    return 1.0


RHS_CODES = {planar: PLANAR, planar_var: PLANAR_VAR, spatial: SPATIAL,
             spatial_var: SPATIAL_VAR, reg: REG, reg_var: REG_VAR}
EVENT_CODES = {no_event: NO_EVENT, sec_y: SEC_Y, sec_x: SEC_X, sec_r: SEC_R,
               reg_sec_y: REG_SEC_Y, reg_sec_x: REG_SEC_X, reg_sec_r: REG_SEC_R,
               reg_time: REG_TIME}
