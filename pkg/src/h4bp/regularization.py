"""Levi-Civita regularization of the planar problem at a fixed Jacobi constant.

Positions map as ``x + iy = (Q1 + iQ2)^2``, momenta as ``p = A0 P / (2|Q|^2)``
with ``A0 = [[Q1, -Q2], [Q2, Q1]]``, and physical time advances as
``dt = 4|Q|^2 dtau``.  The regularized Hamiltonian vanishes on the energy
level of the embedding Jacobi constant.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass

import numpy as np

from . import kernels
from .dynamics import (PhaseState, SystemParams, effective_potential, jacobi_constant)


@dataclass(frozen=True)
class RegState:
    Q1: float
    Q2: float
    P1: float
    P2: float
    t_phys: float = 0.0
    C: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.Q1, self.Q2, self.P1, self.P2, self.t_phys])

    @classmethod
    def from_array(cls, y, C) -> "RegState":
        return cls(float(y[0]), float(y[1]), float(y[2]), float(y[3]),
                   float(y[4]) if len(y) > 4 else 0.0, float(C))


def reg_p(params: SystemParams, C: float) -> np.ndarray:
    p = params.p.copy()
    p[2] = C
    return p


def to_regularized(params: SystemParams, s: PhaseState, branch: str = "plus") -> RegState:
    if branch not in ("plus", "minus"):
        raise ValueError("branch must be 'plus' or 'minus'")
    if s.x == 0.0 and s.y == 0.0:
        raise ValueError("the collision point has no unique regularized preimage")
    w = cmath.sqrt(complex(s.x, s.y))
    if branch == "minus":
        w = -w
    Q1, Q2 = w.real, w.imag
    px = s.vx - s.y
    py = s.vy + s.x
    # P = 2 A0^T p
    P1 = 2.0 * (Q1 * px + Q2 * py)
    P2 = 2.0 * (-Q2 * px + Q1 * py)
    return RegState(Q1, Q2, P1, P2, 0.0, jacobi_constant(params, s))


def physical_from_array(y) -> np.ndarray:
    """Planar physical state (x, y, vx, vy) from a regularized state vector."""
    Q1, Q2, P1, P2 = y[0], y[1], y[2], y[3]
    s = Q1 * Q1 + Q2 * Q2
    x = Q1 * Q1 - Q2 * Q2
    yy = 2.0 * Q1 * Q2
    if s == 0.0:
        return np.array([0.0, 0.0, np.nan, np.nan])
    px = (Q1 * P1 - Q2 * P2) / (2.0 * s)
    py = (Q2 * P1 + Q1 * P2) / (2.0 * s)
    return np.array([x, yy, px + yy, py - x])


def physical_jacobian(y) -> np.ndarray:
    """d(x, y, vx, vy) / d(Q1, Q2, P1, P2)."""
    Q1, Q2, P1, P2 = y[0], y[1], y[2], y[3]
    s = Q1 * Q1 + Q2 * Q2
    J = np.zeros((4, 4))
    J[0] = [2 * Q1, -2 * Q2, 0, 0]
    J[1] = [2 * Q2, 2 * Q1, 0, 0]
    a = Q1 * P1 - Q2 * P2
    b = Q2 * P1 + Q1 * P2
    dpx = np.array([(P1 * s - a * 2 * Q1) / (2 * s * s), (-P2 * s - a * 2 * Q2) / (2 * s * s),
                    Q1 / (2 * s), -Q2 / (2 * s)])
    dpy = np.array([(P2 * s - b * 2 * Q1) / (2 * s * s), (P1 * s - b * 2 * Q2) / (2 * s * s),
                    Q2 / (2 * s), Q1 / (2 * s)])
    J[2] = dpx + J[1]
    J[3] = dpy - J[0]
    return J


def regularized_jacobian(y_phys) -> np.ndarray:
    """d(Q1, Q2, P1, P2) / d(x, y, vx, vy) on the branch containing ``y_phys``'s image."""
    return np.linalg.inv(physical_jacobian(y_phys))


def from_regularized(params: SystemParams, r: RegState) -> PhaseState:
    """Physical state of ``r``; at the collision point velocities are NaN."""
    x, y, vx, vy = physical_from_array(r.as_array())
    return PhaseState.planar(x, y, vx, vy)


def reg_hamiltonian(params: SystemParams, r: RegState) -> float:
    Q1, Q2, P1, P2 = r.Q1, r.Q2, r.P1, r.P2
    s = Q1 * Q1 + Q2 * Q2
    x = Q1 * Q1 - Q2 * Q2
    y = 2.0 * Q1 * Q2
    V = (1.0 - params.lambda2) * x * x + (1.0 - params.lambda1) * y * y
    return (0.5 * (P1 * P1 + P2 * P2) - 2.0 * s * (P2 * Q1 - Q2 * P1) + 2.0 * s * V
            + 2.0 * r.C * s - 4.0)


def reg_eom(params: SystemParams, r: RegState) -> RegState:
    """Rates (dQ, dP, dt_phys) with respect to fictitious time."""
    d = kernels.reg(0.0, r.as_array(), reg_p(params, r.C))
    return RegState(*(float(v) for v in d), C=0.0)


def reg_potential(params: SystemParams, r: RegState) -> float:
    """Regularized effective potential ``4|Q|^2 (Omega - C/2)``."""
    s = r.Q1 ** 2 + r.Q2 ** 2
    if s == 0.0:
        return 4.0  # limit of 4 s / r with r = s
    omega = effective_potential(params, PhaseState(r.Q1 ** 2 - r.Q2 ** 2, 2.0 * r.Q1 * r.Q2))
    return 4.0 * s * (omega - 0.5 * r.C)


def reg_first_integral(params: SystemParams, r: RegState) -> float:
    """``|dQ/dtau|^2 - 2 Omega_r``; zero on the physical energy level."""
    d = reg_eom(params, r)
    return d.Q1 ** 2 + d.Q2 ** 2 - 2.0 * reg_potential(params, r)


__all__ = ["RegState", "to_regularized", "from_regularized", "reg_eom", "reg_hamiltonian",
           "reg_first_integral", "reg_potential", "physical_from_array", "physical_jacobian"]
