"""Parameters, potential, vector field, Jacobi integral and symmetries of the
Hill four-body problem in the rotated synodic frame."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

#: radius below which the unregularized potential refuses to evaluate
COLLISION_RADIUS = 1e-12


class DomainError(ValueError):
    """Raised for parameters outside their admissible range."""


class CollisionError(ArithmeticError):
    """Raised when a physical-frame quantity is evaluated at the tertiary."""


@dataclass(frozen=True)
class SystemParams:
    mu: float
    d: float
    lambda1: float
    lambda2: float
    a: float
    b: float
    c: float = 0.5

    @property
    def p(self) -> np.ndarray:
        """Parameter vector consumed by the compiled kernels."""
        return np.array([self.lambda1, self.lambda2, 0.0, 0.0])


@dataclass(frozen=True)
class PhaseState:
    x: float
    y: float
    z: float = 0.0
    vx: float = 0.0
    vy: float = 0.0
    vz: float = 0.0

    @classmethod
    def planar(cls, x, y, vx, vy) -> "PhaseState":
        return cls(float(x), float(y), 0.0, float(vx), float(vy), 0.0)

    @classmethod
    def from_array(cls, arr) -> "PhaseState":
        arr = np.asarray(arr, dtype=float)
        if arr.shape[0] == 4:
            return cls.planar(*arr[:4])
        return cls(*(float(v) for v in arr[:6]))

    @property
    def is_planar(self) -> bool:
        return self.z == 0.0 and self.vz == 0.0

    def as_planar(self) -> np.ndarray:
        return np.array([self.x, self.y, self.vx, self.vy])

    def as_spatial(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z, self.vx, self.vy, self.vz])

    @property
    def r(self) -> float:
        return math.sqrt(self.x * self.x + self.y * self.y + self.z * self.z)


@dataclass(frozen=True)
class HamiltonianState:
    x: float
    y: float
    z: float = 0.0
    px: float = 0.0
    py: float = 0.0
    pz: float = 0.0

    @classmethod
    def from_phase(cls, s: PhaseState) -> "HamiltonianState":
        return cls(s.x, s.y, s.z, s.vx - s.y, s.vy + s.x, s.vz)

    def to_phase(self) -> PhaseState:
        return PhaseState(self.x, self.y, self.z, self.px + self.y, self.py - self.x, self.pz)


def make_params(mu: float) -> SystemParams:
    mu = float(mu)
    if not (0.0 <= mu <= 0.5) or math.isnan(mu):
        raise DomainError(f"mass parameter must lie in [0, 1/2], got {mu!r}")
    d = math.sqrt(1.0 - 3.0 * mu + 3.0 * mu * mu)
    lam1 = 1.5 * (1.0 - d)
    lam2 = 1.5 * (1.0 + d)
    return SystemParams(mu=mu, d=d, lambda1=lam1, lambda2=lam2,
                        a=(1.0 - lam2) / 2.0, b=(1.0 - lam1) / 2.0, c=0.5)


def _radius(x, y, z):
    r = math.sqrt(x * x + y * y + z * z)
    if r < COLLISION_RADIUS:
        raise CollisionError(f"position ({x}, {y}, {z}) is at the tertiary")
    return r


def effective_potential(params: SystemParams, s: PhaseState) -> float:
    r = _radius(s.x, s.y, s.z)
    return 0.5 * (params.lambda2 * s.x ** 2 + params.lambda1 * s.y ** 2 - s.z ** 2) + 1.0 / r


def potential_gradient(params: SystemParams, s: PhaseState) -> np.ndarray:
    r = _radius(s.x, s.y, s.z)
    ir3 = 1.0 / r ** 3
    return np.array([
        params.lambda2 * s.x - s.x * ir3,
        params.lambda1 * s.y - s.y * ir3,
        -s.z - s.z * ir3,
    ])


def potential_hessian(params: SystemParams, s: PhaseState) -> np.ndarray:
    """Second partials of the effective potential, 3x3."""
    r = _radius(s.x, s.y, s.z)
    ir3 = 1.0 / r ** 3
    ir5 = ir3 / r ** 2
    pos = np.array([s.x, s.y, s.z])
    H = 3.0 * ir5 * np.outer(pos, pos)
    H += np.diag([params.lambda2 - ir3, params.lambda1 - ir3, -1.0 - ir3])
    return H


def eom(params: SystemParams, s: PhaseState) -> PhaseState:
    """Time derivative of ``s``, returned as a PhaseState of rates."""
    gx, gy, gz = potential_gradient(params, s)
    return PhaseState(s.vx, s.vy, s.vz, 2.0 * s.vy + gx, -2.0 * s.vx + gy, gz)


def jacobi_constant(params: SystemParams, s: PhaseState) -> float:
    return 2.0 * effective_potential(params, s) - (s.vx ** 2 + s.vy ** 2 + s.vz ** 2)


def hamiltonian(params: SystemParams, h: HamiltonianState) -> float:
    r = _radius(h.x, h.y, h.z)
    return (0.5 * (h.px ** 2 + h.py ** 2 + h.pz ** 2) + h.y * h.px - h.x * h.py
            + params.a * h.x ** 2 + params.b * h.y ** 2 + params.c * h.z ** 2 - 1.0 / r)


def jacobi_gradient(params: SystemParams, arr) -> np.ndarray:
    """Gradient of C with respect to the planar state (x, y, vx, vy)."""
    x, y, vx, vy = arr[:4]
    gx, gy, _ = potential_gradient(params, PhaseState(x, y))
    return np.array([2.0 * gx, 2.0 * gy, -2.0 * vx, -2.0 * vy])


_SYMMETRIES = {
    "S": (np.array([1.0, -1.0, -1.0, 1.0]), True),
    "S'": (np.array([-1.0, 1.0, 1.0, -1.0]), True),
    "SS'": (np.array([-1.0, -1.0, -1.0, -1.0]), False),
}
_SYMMETRIES["S∘S'"] = _SYMMETRIES["SS'"]


def symmetry_matrix(which: str) -> tuple[np.ndarray, bool]:
    try:
        signs, reverses = _SYMMETRIES[which]
    except KeyError:
        raise ValueError(f"unknown symmetry {which!r}; use S, S' or SS'") from None
    return np.diag(signs), reverses


def apply_symmetry(which: str, s: PhaseState) -> tuple[PhaseState, bool]:
    """Map a planar state through ``S`` (x-axis), ``S'`` (y-axis) or ``SS'``.

    Returns the image and whether the symmetry reverses time.
    """
    signs, reverses = _SYMMETRIES.get(which, (None, None))
    if signs is None:
        raise ValueError(f"unknown symmetry {which!r}; use S, S' or SS'")
    x, y, vx, vy = signs * s.as_planar()
    return PhaseState.planar(x, y, vx, vy), reverses


def hill_perturbation_split(params: SystemParams, h: HamiltonianState) -> tuple[float, float, float]:
    """Split the planar Hamiltonian into the classical Hill part plus ``mu * P``.

    Returns ``(H_hill, P, residual)`` where the residual is the O(mu^2)
    remainder ``H - H_hill - mu * P``.
    """
    planar = HamiltonianState(h.x, h.y, 0.0, h.px, h.py, 0.0)
    hill = hamiltonian(make_params(0.0), planar)
    pert = 9.0 / 8.0 * (h.x ** 2 - h.y ** 2)
    # a + 1 - 9mu/8 = -(b - 1/2 + 9mu/8), written without cancellation
    mu, d = params.mu, params.d
    coef = 9.0 * mu * mu * (1.0 - 3.0 * mu - 2.0 * d) / (8.0 * (1.0 + d) ** 2)
    residual = coef * (h.x ** 2 - h.y ** 2)
    return hill, pert, residual
