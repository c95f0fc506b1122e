"""Equilibrium points, their spectra, the critical mass and the linear
short/long period motions around L3."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import CollisionError, PhaseState, SystemParams, make_params, potential_hessian

#: |D| below this is treated as the double-frequency case
DEGENERACY_TOL = 1e-12


class ComplexSpectrumError(ValueError):
    """The frequencies at L3/L4 are complex (mu above the critical mass)."""


@dataclass(frozen=True)
class EquilibriumInfo:
    label: str
    position: tuple[float, float] | None
    eigenvalues: np.ndarray | None
    classification: str  # saddle-center | center-center | complex-saddle | degenerate | absent

    @property
    def present(self) -> bool:
        return self.position is not None


@dataclass(frozen=True)
class LinearAnalysis:
    mu: float
    A: float
    D: float
    omega1: float
    omega2: float
    alpha1: float
    alpha2: float
    Omega_xx: float
    Omega_yy: float
    Omega_xy: float
    degenerate: bool = False

    @property
    def ratio(self) -> float:
        return self.omega2 / self.omega1 if self.omega1 > 0 else math.inf

    @property
    def short_period(self) -> float:
        return 2.0 * math.pi / self.omega2

    @property
    def long_period(self) -> float:
        return 2.0 * math.pi / self.omega1 if self.omega1 > 0 else math.inf


@dataclass(frozen=True)
class LinearSeed:
    kind: str
    xi0: float
    eta0: float
    xidot0: float
    etadot0: float
    period: float
    semi_axis_a: float
    semi_axis_b: float
    phase: float
    eccentricity: float
    center: tuple[float, float]

    def state(self) -> PhaseState:
        """Seed in global rotated coordinates."""
        cx, cy = self.center
        return PhaseState.planar(cx + self.xi0, cy + self.eta0, self.xidot0, self.etadot0)


def A_coef(params: SystemParams) -> float:
    return (3.0 * params.d - 1.0) / 2.0


def D_coef(params: SystemParams) -> float:
    d = params.d
    return (225.0 * d * d - 222.0 * d + 1.0) / 4.0


def mu_critical() -> float:
    return (225.0 - math.sqrt(3.0 * (5227.0 + 2368.0 * math.sqrt(21.0)))) / 450.0


def linearization(params: SystemParams, point) -> np.ndarray:
    x, y = point
    if x == 0.0 and y == 0.0:
        raise CollisionError("linearization requested at the tertiary")
    H = potential_hessian(params, PhaseState(x, y))
    return np.array([
        [0.0, 0.0, 1.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
        [H[0, 0], H[0, 1], 0.0, 2.0],
        [H[0, 1], H[1, 1], -2.0, 0.0],
    ])


def l3_spectrum_closed_form(params: SystemParams) -> np.ndarray:
    """The four eigenvalues ``+-(1/sqrt 2) sqrt(-A +- sqrt D)`` at L3/L4."""
    A = A_coef(params)
    sD = np.sqrt(complex(D_coef(params)))
    out = []
    for s1 in (1.0, -1.0):
        for s2 in (1.0, -1.0):
            out.append(s1 * np.sqrt(-A + s2 * sD) / math.sqrt(2.0))
    return np.array(out)


def _sorted_eigs(M):
    ev = np.linalg.eigvals(M)
    return ev[np.lexsort((ev.imag, ev.real))]


def equilibria(params: SystemParams) -> list[EquilibriumInfo]:
    out = []
    xl = params.lambda2 ** (-1.0 / 3.0)
    for label, pos in (("L1", (xl, 0.0)), ("L2", (-xl, 0.0))):
        out.append(EquilibriumInfo(label, pos, _sorted_eigs(linearization(params, pos)),
                                   "saddle-center"))
    if params.lambda1 <= 0.0:
        out.append(EquilibriumInfo("L3", None, None, "absent"))
        out.append(EquilibriumInfo("L4", None, None, "absent"))
        return out
    yl = params.lambda1 ** (-1.0 / 3.0)
    D = D_coef(params)
    if abs(D) <= DEGENERACY_TOL:
        kind = "degenerate"
    elif D > 0:
        kind = "center-center"
    else:
        kind = "complex-saddle"
    for label, pos in (("L3", (0.0, yl)), ("L4", (0.0, -yl))):
        out.append(EquilibriumInfo(label, pos, _sorted_eigs(linearization(params, pos)), kind))
    return out


def frequencies(params: SystemParams) -> LinearAnalysis:
    A = A_coef(params)
    D = D_coef(params)
    lam1, lam2 = params.lambda1, params.lambda2
    if D < -DEGENERACY_TOL:
        raise ComplexSpectrumError(
            f"mu={params.mu} exceeds the critical mass {mu_critical():.6f}; L3 spectrum is complex")
    sD = math.sqrt(max(D, 0.0))
    w1 = math.sqrt(max(A - sD, 0.0) / 2.0)
    w2 = math.sqrt((A + sD) / 2.0)

    def alpha(w):
        return 2.0 * w / (lam2 - lam1 + w * w)

    return LinearAnalysis(mu=params.mu, A=A, D=D, omega1=w1, omega2=w2,
                          alpha1=alpha(w1), alpha2=alpha(w2),
                          Omega_xx=lam2 - lam1, Omega_yy=3.0 * lam1, Omega_xy=0.0,
                          degenerate=(params.mu == 0.0))


def resonant_mu(k: int) -> float:
    """Mass parameter at which the L3 frequencies are in ``|k| : 1`` resonance."""
    k = int(k)
    if k == 0:
        raise ValueError("resonance order must be nonzero")
    K = ((k * k - 1.0) / (k * k + 1.0)) ** 2
    r = math.sqrt(84.0 - 3.0 * K)
    num = 5227.0 + 1184.0 * r - 5.0 * K * K - 32.0 * K * r - 38.0 * K
    return 0.5 - math.sqrt(num / (K - 25.0) ** 2) / (6.0 * math.sqrt(3.0))


def linear_seed(params: SystemParams, kind: str, amplitude: float) -> LinearSeed:
    """Pure short or long period solution around L3 starting on the y-axis.

    ``amplitude`` is the offset ``eta0 > 0`` above L3; the start is a
    perpendicular crossing of the symmetry axis (``xi0 = 0``, ``etadot0 = 0``).
    """
    if kind not in ("short", "long"):
        raise ValueError("kind must be 'short' or 'long'")
    if not amplitude > 0:
        raise ValueError("amplitude must be positive")
    lin = frequencies(params)
    if kind == "short":
        w, alpha = lin.omega2, lin.alpha2
    else:
        if lin.omega1 == 0.0:
            raise ComplexSpectrumError("long period motion is degenerate at mu = 0")
        w, alpha = lin.omega1, lin.alpha1
    eta0 = float(amplitude)
    xi0 = 0.0
    A_ax = math.sqrt(xi0 ** 2 + alpha ** 2 * eta0 ** 2)
    B_ax = math.sqrt(eta0 ** 2 + xi0 ** 2 / alpha ** 2)
    return LinearSeed(kind=kind, xi0=xi0, eta0=eta0, xidot0=w * alpha * eta0,
                      etadot0=-(w / alpha) * xi0, period=2.0 * math.pi / w,
                      semi_axis_a=A_ax, semi_axis_b=B_ax,
                      phase=math.atan2(alpha * eta0, xi0),
                      eccentricity=math.sqrt(1.0 - alpha ** 2),
                      center=(0.0, params.lambda1 ** (-1.0 / 3.0)))


def l1_lyapunov_seed(params: SystemParams, amplitude: float) -> PhaseState:
    """Linear planar Lyapunov orbit around L1 starting at ``x = L1 + amplitude``."""
    xl = params.lambda2 ** (-1.0 / 3.0)
    M = linearization(params, (xl, 0.0))
    oxx, oyy = M[2, 0], M[3, 1]
    b = 4.0 - oxx - oyy
    w2 = (b + math.sqrt(b * b - 4.0 * oxx * oyy)) / 2.0
    w = math.sqrt(w2)
    vy = -(w2 + oxx) * amplitude / 2.0
    return PhaseState.planar(xl + amplitude, 0.0, 0.0, vy)


def resonance_table(kmax: int = 10) -> list[tuple[int, float]]:
    return [(k, resonant_mu(k)) for k in range(1, kmax + 1)]


__all__ = ["EquilibriumInfo", "LinearAnalysis", "LinearSeed", "ComplexSpectrumError",
           "equilibria", "linearization", "mu_critical", "frequencies", "resonant_mu",
           "linear_seed", "l1_lyapunov_seed", "l3_spectrum_closed_form", "A_coef", "D_coef",
           "resonance_table", "make_params"]
