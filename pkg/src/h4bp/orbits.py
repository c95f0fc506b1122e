"""Differential correction of periodic orbits and their stability indices.

Orbits are described on one of two sections: the ``"x"`` axis (the line
``y = value``) or the ``"y"`` axis (the line ``x = value``).  A state on the
section is characterised by its position along the axis, the velocity
component along the axis (zero at a perpendicular crossing) and the transverse
velocity, which is eliminated through the Jacobi integral.

Arcs that come within :data:`SWITCH_RADIUS` of the tertiary are recomputed in
Levi-Civita variables, and the resulting sensitivities are mapped back to the
physical section so that the correctors never see the difference.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .dynamics import (PhaseState, SystemParams, effective_potential, jacobi_constant,
                       jacobi_gradient, potential_gradient)
from .propagation import (DEFAULT_CONFIG, IntegrationError, IntegratorConfig, flow_to_section)
from .integrator import COLLISION, EVENT
from .regularization import (RegState, physical_from_array, physical_jacobian, reg_p,
                             to_regularized)

#: minimum radius that triggers regularized recomputation of an arc
SWITCH_RADIUS = 1e-2
#: corrector convergence threshold on the residual
CORRECTOR_TOL = 1e-11
MAX_ITER = 25


class CorrectionError(RuntimeError):
    """Newton iteration failed to converge."""

    def __init__(self, msg, residual=math.nan):
        super().__init__(msg)
        self.residual = residual


@dataclass(frozen=True)
class Axis:
    name: str
    sec: int    # coordinate that vanishes on the section
    pos: int    # coordinate along the axis
    perp: int   # velocity along the axis, zero at perpendicular crossings
    trans: int  # velocity across the section

    @property
    def reflection(self) -> np.ndarray:
        """Linear part of the reversing symmetry about this axis."""
        signs = np.ones(4)
        signs[self.sec] = -1.0
        signs[self.perp] = -1.0
        return np.diag(signs)


X_AXIS = Axis("x", sec=1, pos=0, perp=2, trans=3)
Y_AXIS = Axis("y", sec=0, pos=1, perp=3, trans=2)
AXES = {"x": X_AXIS, "y": Y_AXIS}


def get_axis(axis) -> Axis:
    return axis if isinstance(axis, Axis) else AXES[axis]


@dataclass
class SectionMap:
    """Flow from a section state to a later crossing of the same section."""
    y: np.ndarray        # physical state at the crossing
    M: np.ndarray        # d(state at crossing)/d(initial state), along the section
    t: float             # physical time of flight
    V: np.ndarray        # vertical 2x2 state-transition matrix
    regularized: bool
    rmin: float
    stm: np.ndarray      # raw 4x4 STM (physical, or regularized at fixed C)


def _project(M, fvec, gradg):
    """Remove the flow component so that perturbed images stay on the section."""
    return M - np.outer(fvec, gradg @ M) / (gradg @ fvec)


def section_map(params: SystemParams, X0, axis, count, config: IntegratorConfig = DEFAULT_CONFIG,
                direction=0, value=0.0, t_max=500.0, switch_radius=SWITCH_RADIUS,
                force_regularized=False) -> SectionMap:
    """Flow ``X0`` to the ``count``-th crossing of ``axis`` (at offset ``value``)."""
    ax = get_axis(axis)
    X0 = np.asarray(X0, dtype=float)
    p = params.p.copy()
    p[3] = value
    if not force_regularized:
        y0 = np.concatenate([X0, np.eye(4).ravel(), np.eye(2).ravel()])
        sec = kernels.sec_y if ax.sec == 1 else kernels.sec_x
        hit = flow_to_section(kernels.planar_var, y0, p, config, sec, direction, count, t_max,
                              guard=switch_radius)
        if hit.status == EVENT:
            Phi = hit.y[4:20].reshape(4, 4)
            f = kernels.planar(0.0, hit.y[:4], p)
            grad = np.zeros(4)
            grad[ax.sec] = 1.0
            return SectionMap(hit.y[:4].copy(), _project(Phi, f, grad), hit.t,
                              hit.y[20:24].reshape(2, 2).copy(), False, hit.rmin, Phi)
        if hit.status != COLLISION:
            raise IntegrationError(f"no crossing of the {ax.name} axis within t={t_max}")
    return _section_map_regularized(params, X0, ax, count, config, direction, value, t_max)


def _section_map_regularized(params, X0, ax, count, config, direction, value, t_max):
    s0 = PhaseState.from_array(X0)
    r0 = to_regularized(params, s0)
    C = r0.C
    p = reg_p(params, C)
    p[3] = value
    Z0 = r0.as_array()
    y0 = np.concatenate([Z0, np.eye(4).ravel(), np.eye(2).ravel(), np.zeros(9)])
    sec = kernels.reg_sec_y if ax.sec == 1 else kernels.reg_sec_x
    # the regularized section functions vanish at the origin too; event direction
    # is expressed for the physical coordinate, whose sign matches the product form
    # only on the plus branch near the start, so crossings are counted undirected
    # and filtered below
    need = count
    t0 = 0.0
    yc = y0
    found = 0
    tau_max = t_max  # dt/dtau = 4|Q|^2 is bounded on bounded orbits
    rmin = math.inf
    while True:
        hit = flow_to_section(kernels.reg_var, yc, p, config, sec, 0, 1, tau_max, t0=t0)
        if hit.status != EVENT:
            raise IntegrationError(f"no regularized crossing of the {ax.name} axis")
        rmin = min(rmin, hit.rmin ** 2)  # the integrator tracks |Q|, and r = |Q|^2
        xphys = physical_from_array(hit.y[:4])
        fphys = kernels.planar(0.0, xphys, params.p) if np.all(np.isfinite(xphys)) else None
        ok = True
        if direction != 0 and fphys is not None:
            ok = np.sign(fphys[ax.sec]) == direction
        if ok:
            found += 1
        if found == need:
            break
        t0 = hit.t
        yc = hit.y
    yz = hit.y
    Phi = yz[5:21].reshape(4, 4)
    zeta = yz[25:29]
    # initial sensitivities: physical -> regularized, plus the dependence on C
    DT = np.linalg.inv(physical_jacobian(Z0))
    gradC = jacobi_gradient(params, X0)
    dZ = Phi @ DT + np.outer(zeta, gradC)
    fz = kernels.reg(0.0, yz[:5], p)[:4]
    gz = np.zeros(4)
    Q1, Q2 = yz[0], yz[1]
    if ax.sec == 1:
        gz[0], gz[1] = 2.0 * Q2, 2.0 * Q1
    else:
        gz[0], gz[1] = 2.0 * Q1, -2.0 * Q2
    dZ = _project(dZ, fz, gz)
    X1 = physical_from_array(yz[:4])
    M = physical_jacobian(yz[:4]) @ dZ
    return SectionMap(X1, M, float(yz[4]), yz[21:25].reshape(2, 2).copy(), True, rmin, Phi.copy())


def time_map(params: SystemParams, X0, t, config: IntegratorConfig = DEFAULT_CONFIG,
             switch_radius=SWITCH_RADIUS, force_regularized=False) -> SectionMap:
    """Flow ``X0`` for a physical time ``t``; ``M`` is the full 4x4 STM."""
    X0 = np.asarray(X0, dtype=float)
    if not force_regularized:
        y0 = np.concatenate([X0, np.eye(4).ravel(), np.eye(2).ravel()])
        hit = flow_to_section(kernels.planar_var, y0, params.p, config, kernels.no_event, 0, 0,
                              t, guard=switch_radius)
        if hit.status != COLLISION:
            Phi = hit.y[4:20].reshape(4, 4).copy()
            return SectionMap(hit.y[:4].copy(), Phi, hit.t, hit.y[20:24].reshape(2, 2).copy(),
                              False, hit.rmin, Phi)
    r0 = to_regularized(params, PhaseState.from_array(X0))
    p = reg_p(params, r0.C)
    p[3] = t
    Z0 = r0.as_array()
    y0 = np.concatenate([Z0, np.eye(4).ravel(), np.eye(2).ravel(), np.zeros(9)])
    hit = flow_to_section(kernels.reg_var, y0, p, config, kernels.reg_time, 1, 1,
                          50.0 * t + 100.0)
    if hit.status != EVENT:
        raise IntegrationError(f"regularized flow did not reach t={t}")
    yz = hit.y
    DT = np.linalg.inv(physical_jacobian(Z0))
    gradC = jacobi_gradient(params, X0)
    Phi = yz[5:21].reshape(4, 4)
    dZ = Phi @ DT + np.outer(yz[25:29], gradC)
    dt = yz[29:33] @ DT + yz[33] * gradC
    # hold the physical time fixed instead of the fictitious one
    fz = kernels.reg(0.0, yz[:5], p)
    dZ = dZ - np.outer(fz[:4], dt) / fz[4]
    M = physical_jacobian(yz[:4]) @ dZ
    return SectionMap(physical_from_array(yz[:4]), M, t, yz[21:25].reshape(2, 2).copy(), True,
                      hit.rmin ** 2, M)


# ---------------------------------------------------------------------------
# periodic orbit records

@dataclass(frozen=True)
class StabilityIndices:
    ah: float
    av: float
    half_a: float
    half_d: float
    reduced: np.ndarray = field(repr=False)
    monodromy: np.ndarray = field(repr=False)
    vertical: np.ndarray = field(repr=False)

    @property
    def horizontally_stable(self) -> bool:
        return abs(self.ah) < 2.0

    @property
    def vertically_stable(self) -> bool:
        return abs(self.av) < 2.0


@dataclass(frozen=True)
class PeriodicOrbit:
    C: float
    ic: PhaseState
    T: float
    ah: float
    av: float
    half_a: float
    half_d: float
    symmetry: str
    collision: bool
    axis: str = "x"
    crossings: int = 2
    section_value: float = 0.0
    reg_ic: RegState | None = None
    residual: float = 0.0
    iterations: int = 0
    rmin: float = math.inf

    @property
    def x0(self) -> float:
        """Position of the reference crossing along its axis."""
        return self.ic.x if self.axis == "x" else self.ic.y

    @property
    def state(self) -> np.ndarray:
        return self.ic.as_planar()

    @property
    def bistable(self) -> bool:
        return abs(self.ah) < 2.0 and abs(self.av) < 2.0


def _transverse_velocity(params, ax, pos, perp, C, sign, value=0.0):
    X = np.zeros(4)
    X[ax.sec] = value
    X[ax.pos] = pos
    omega = effective_potential(params, PhaseState(X[0], X[1]))
    v2 = 2.0 * omega - C - perp * perp
    if v2 < 0.0:
        return None
    X[ax.perp] = perp
    X[ax.trans] = sign * math.sqrt(v2)
    return X


def _energy_basis(params, X, ax):
    """Section perturbations (along pos, along perp) that keep C fixed."""
    g = jacobi_gradient(params, X)
    e1 = np.zeros(4)
    e1[ax.pos] = 1.0
    e1[ax.trans] = -g[ax.pos] / g[ax.trans]
    e2 = np.zeros(4)
    e2[ax.perp] = 1.0
    e2[ax.trans] = -g[ax.perp] / g[ax.trans]
    return e1, e2


def reduced_map(params, X0, M, ax) -> np.ndarray:
    """2x2 Jacobian of the energy-reduced return map in (pos, perp)."""
    e1, e2 = _energy_basis(params, X0, ax)
    c1 = M @ e1
    c2 = M @ e2
    return np.array([[c1[ax.pos], c2[ax.pos]], [c1[ax.perp], c2[ax.perp]]])


def stability_from_map(params, X0, sm: SectionMap, ax) -> StabilityIndices:
    R = reduced_map(params, X0, sm.M, ax)
    a, d = R[0, 0], R[1, 1]
    return StabilityIndices(ah=a + d, av=float(np.trace(sm.V)), half_a=a, half_d=d,
                            reduced=R, monodromy=sm.stm, vertical=sm.V)


def stability(params: SystemParams, orbit: PeriodicOrbit,
              config: IntegratorConfig = DEFAULT_CONFIG) -> StabilityIndices:
    """Stability indices from one full period, reduced on the orbit's own section."""
    ax = get_axis(orbit.axis)
    X0 = orbit.state
    full = time_map(params, X0, orbit.T, config)
    grad = np.zeros(4)
    grad[ax.sec] = 1.0
    M = _project(full.M, kernels.planar(0.0, full.y, params.p), grad)
    sm = SectionMap(full.y, M, full.t, full.V, full.regularized, full.rmin, full.M)
    return stability_from_map(params, X0, sm, ax)


# ---------------------------------------------------------------------------
# correctors

def _symmetric_residual(params, u, ax, n_half, config, value, t_max):
    """Perpendicular-velocity residual of the half-period arc from ``u = (pos, trans)``."""
    X = np.zeros(4)
    X[ax.sec] = value
    X[ax.pos] = u[0]
    X[ax.trans] = u[1]
    sm = section_map(params, X, ax, n_half, config, value=value, t_max=t_max)
    G = sm.y[ax.perp]
    DG = np.array([sm.M[ax.perp, ax.pos], sm.M[ax.perp, ax.trans]])
    return X, sm, G, DG


def symmetric_orbit_from_state(params, X, sm_half, ax, n_half, value, config, residual=0.0,
                               iterations=0, with_stability=True) -> PeriodicOrbit:
    T = 2.0 * sm_half.t
    C = jacobi_constant(params, PhaseState.from_array(X))
    # the second half mirrors the first, so its minimum radius is the same
    reg = sm_half.regularized
    orbit = PeriodicOrbit(
        C=C, ic=PhaseState.from_array(X), T=T, ah=math.nan, av=math.nan, half_a=math.nan,
        half_d=math.nan, symmetry=f"{ax.name}-symmetric", collision=reg, axis=ax.name,
        crossings=2 * n_half, section_value=value,
        reg_ic=to_regularized(params, PhaseState.from_array(X)) if reg else None,
        residual=abs(residual), iterations=iterations, rmin=sm_half.rmin)
    return _attach_stability(params, orbit, config) if with_stability else orbit


def correct_symmetric(params: SystemParams, guess, section="x", crossings=2, C=None,
                      config: IntegratorConfig = DEFAULT_CONFIG, value=0.0, t_max=500.0,
                      tol=CORRECTOR_TOL, max_iter=MAX_ITER, with_stability=True) -> PeriodicOrbit:
    """Correct a symmetric periodic orbit from a perpendicular-crossing guess.

    ``guess`` is ``(pos0, trans_v0)``: the position along the axis and the
    velocity across it.  When ``C`` is given the Jacobi constant is held
    fixed and the transverse velocity follows from it; otherwise the
    transverse velocity is held fixed.
    """
    ax = get_axis(section)
    n_half = crossings // 2
    pos, vt = float(guess[0]), float(guess[1])
    sign = 1.0 if vt >= 0 else -1.0
    G = math.inf
    for it in range(max_iter + 1):
        if C is not None:
            X = _transverse_velocity(params, ax, pos, 0.0, C, sign, value)
            if X is None:
                raise CorrectionError(f"C={C} not reachable at {ax.name}0={pos}", G)
            vt = X[ax.trans]
        X, sm, G, DG = _symmetric_residual(params, (pos, vt), ax, n_half, config, value, t_max)
        if abs(G) < tol:
            return symmetric_orbit_from_state(params, X, sm, ax, n_half, value, config, G, it,
                                              with_stability)
        if it == max_iter:
            break
        if C is not None:
            g = jacobi_gradient(params, X)
            slope = -g[ax.pos] / g[ax.trans]
            dG = DG[0] + DG[1] * slope
        else:
            dG = DG[0]
        if dG == 0.0 or not np.isfinite(dG):
            raise CorrectionError("singular corrector derivative", G)
        pos -= G / dG
    raise CorrectionError(f"no convergence after {max_iter} iterations (residual {G:.3e})", G)


def correct_asymmetric(params: SystemParams, guess, T_guess=None, section="x", crossings=2,
                       C=None, config: IntegratorConfig = DEFAULT_CONFIG, value=0.0,
                       tol=CORRECTOR_TOL, max_iter=MAX_ITER, with_stability=True) -> PeriodicOrbit:
    """Correct a general periodic orbit through a section state at fixed C.

    ``guess`` is a planar state on the section; the return is sought at the
    ``crossings // 2``-th crossing in the same direction.
    """
    ax = get_axis(section)
    X = np.asarray(guess.as_planar() if isinstance(guess, PhaseState) else guess, dtype=float).copy()
    X[ax.sec] = value
    if C is None:
        C = jacobi_constant(params, PhaseState.from_array(X))
    sign = 1.0 if X[ax.trans] >= 0 else -1.0
    count = max(crossings // 2, 1)
    t_max = 3.0 * T_guess + 10.0 if T_guess else 500.0
    pos, perp = X[ax.pos], X[ax.perp]
    res = math.inf
    for it in range(max_iter + 1):
        X = _transverse_velocity(params, ax, pos, perp, C, sign, value)
        if X is None:
            raise CorrectionError("guess left the Hill region", res)
        sm = section_map(params, X, ax, count, config, direction=int(sign), value=value, t_max=t_max)
        F = np.array([sm.y[ax.pos] - pos, sm.y[ax.perp] - perp])
        res = float(np.max(np.abs(F)))
        if res < tol:
            st = stability_from_map(params, X, sm, ax) if with_stability else None
            s0 = PhaseState.from_array(X)
            return PeriodicOrbit(
                C=C, ic=s0, T=sm.t, ah=st.ah if st else math.nan, av=st.av if st else math.nan,
                half_a=st.half_a if st else math.nan, half_d=st.half_d if st else math.nan,
                symmetry="asymmetric", collision=sm.regularized, axis=ax.name,
                crossings=2 * count, section_value=value,
                reg_ic=to_regularized(params, s0) if sm.regularized else None,
                residual=res, iterations=it, rmin=sm.rmin)
        if it == max_iter or not np.isfinite(res) or res > 1e3:
            break
        R = reduced_map(params, X, sm.M, ax)
        J = R - np.eye(2)
        try:
            step = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError:
            raise CorrectionError("singular return-map Jacobian", res) from None
        pos += step[0]
        perp += step[1]
    raise CorrectionError(f"no convergence after {it} iterations (residual {res:.3e})", res)


def closure_error(params: SystemParams, orbit: PeriodicOrbit,
                  config: IntegratorConfig = DEFAULT_CONFIG) -> float:
    """Max-norm distance between the initial state and its image after one period."""
    from .propagation import propagate_variational, VariationalState, CollisionApproach
    try:
        v = propagate_variational(params, config, VariationalState.initial(orbit.ic), orbit.T,
                                  guard=1e-12)
        return float(np.max(np.abs(v.base.as_planar() - orbit.state)))
    except CollisionApproach:
        return math.nan


def kepler_circle(params: SystemParams, radius: float, retrograde: bool) -> tuple[float, float]:
    """(x0, vy0) of a circular two-body orbit about the tertiary, in the rotating frame."""
    vk = 1.0 / math.sqrt(radius)
    vy = -(vk + radius) if retrograde else (vk - radius)
    return radius, vy


def with_stability(params, orbit: PeriodicOrbit, config=DEFAULT_CONFIG) -> PeriodicOrbit:
    st = stability(params, orbit, config)
    return replace(orbit, ah=st.ah, av=st.av, half_a=st.half_a, half_d=st.half_d)


_attach_stability = with_stability
