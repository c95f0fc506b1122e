"""Pseudo-arclength continuation of symmetric periodic-orbit families in C.

A family member is ``u = (pos, C, w tau)``: the position of a perpendicular
crossing of the symmetry axis, the Jacobi constant and the (weighted) half
period.  The velocity across the axis follows from the Jacobi integral with a
sign fixed by the chart.  Two conditions at time ``tau`` (back on the axis,
no velocity along it) leave a curve, whose projection on ``(pos, C)`` is the
characteristic curve.  Working at a fixed time rather than at the n-th axis
crossing keeps the equations regular where the orbit grazes the axis or
reaches the zero-velocity curve there.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .dynamics import (PhaseState, SystemParams, effective_potential, jacobi_constant,
                       potential_gradient)
from .equilibria import frequencies, l1_lyapunov_seed, linear_seed
from .orbits import (CORRECTOR_TOL, CorrectionError, PeriodicOrbit, correct_symmetric, get_axis,
                     kepler_circle, time_map)
from .propagation import DEFAULT_CONFIG, IntegrationError, IntegratorConfig
from .regularization import to_regularized

#: largest residual accepted once Newton steps have stalled at round-off level
NOISE_FLOOR = 1e-8

FAMILY_NAMES = ("g", "f", "a", "a2", "Hb", "Ha", "short", "long")

_R2 = np.diag([1.0, -1.0])


@dataclass(frozen=True)
class ContinuationLimits:
    c_min: float = -math.inf
    c_max: float = math.inf
    max_members: int = 2000
    ds0: float = 1e-3
    ds_min: float = 1e-7
    ds_max: float = 0.05
    newton_budget: int = 12

    def __post_init__(self):
        if not self.c_min < self.c_max:
            raise ValueError("c_min must be below c_max")
        if self.max_members < 1:
            raise ValueError("max_members must be positive")
        if not 0 < self.ds_min <= self.ds0 <= self.ds_max:
            raise ValueError("step bounds must satisfy 0 < ds_min <= ds0 <= ds_max")


@dataclass(frozen=True)
class Event:
    kind: str
    C: float
    detail: str = ""
    level: float | None = None
    quantity: str = ""
    index: int = -1
    x0: float = math.nan
    T: float = math.nan

    def as_dict(self) -> dict:
        return {"kind": self.kind, "C": self.C, "detail": self.detail, "level": self.level,
                "quantity": self.quantity, "index": self.index, "x0": self.x0, "T": self.T}

    @classmethod
    def from_dict(cls, d) -> "Event":
        return cls(kind=d["kind"], C=float(d["C"]), detail=d.get("detail", ""),
                   level=d.get("level"), quantity=d.get("quantity", ""),
                   index=int(d.get("index", -1)), x0=float(d.get("x0", math.nan)),
                   T=float(d.get("T", math.nan)))


@dataclass
class FamilyRecord:
    name: str
    mu: float
    members: list = field(default_factory=list)
    events: list = field(default_factory=list)
    axis: str = "x"
    crossings: int = 2
    truncated: bool = False
    termination: str = ""

    def events_of(self, kind, quantity=None):
        return [e for e in self.events
                if e.kind == kind and (quantity is None or e.quantity.startswith(quantity))]


@dataclass(frozen=True)
class FamilySpec:
    """How a family is parametrized on its section."""
    name: str
    axis: str
    crossings: int
    center: float
    sign: float  # sign of the velocity across the section at the reference crossing


# ---------------------------------------------------------------------------
# evaluation of one point of the characteristic curve

#: weight of the half period in the arclength metric
TAU_WEIGHT = 0.1


@dataclass
class _Point:
    u: np.ndarray          # (pos, C, TAU_WEIGHT * half period)
    X: np.ndarray          # reference crossing
    tm: object             # flow over the half period
    R: np.ndarray          # symmetry residual at the half period
    J: np.ndarray          # dR/du, 2x3
    orbit: PeriodicOrbit | None = None
    tangent: np.ndarray | None = None
    iterations: int = 0

    @property
    def null(self) -> np.ndarray:
        """Unnormalised kernel of ``J``; smooth and consistently oriented along the curve."""
        return np.cross(self.J[0], self.J[1])


def _state(params, spec: FamilySpec, pos, C):
    ax = get_axis(spec.axis)
    X = np.zeros(4)
    X[ax.pos] = pos
    omega = effective_potential(params, PhaseState(X[0], X[1]))
    v2 = 2.0 * omega - C
    if not v2 > 0.0:
        return None
    X[ax.trans] = spec.sign * math.sqrt(v2)
    return X


def _omega_grad(params, X):
    g = potential_gradient(params, PhaseState(X[0], X[1]))
    return np.array([g[0], g[1]])


def _evaluate(params, spec: FamilySpec, u, config):
    """Residual and Jacobian of the reversibility condition at ``u``.

    A member starts perpendicular to the axis and, half a period later, is
    again on the axis with no velocity along it.
    """
    ax = get_axis(spec.axis)
    X = _state(params, spec, u[0], u[1])
    if X is None:
        raise CorrectionError("point outside the Hill region")
    tau = u[2] / TAU_WEIGHT
    if not tau > 0.0:
        raise CorrectionError("non-positive half period")
    tm = time_map(params, X, tau, config)
    vt = X[ax.trans]
    dpos = np.zeros(4)
    dpos[ax.pos] = 1.0
    dpos[ax.trans] = _omega_grad(params, X)[ax.pos] / vt
    dC = np.zeros(4)
    dC[ax.trans] = -0.5 / vt
    f = kernels.planar(0.0, tm.y, params.p)
    rows = (ax.sec, ax.perp)
    R = np.array([tm.y[i] for i in rows])
    J = np.array([[tm.M[i] @ dpos, tm.M[i] @ dC, f[i] / TAU_WEIGHT] for i in rows])
    return _Point(np.array(u, dtype=float), X, tm, R, J)


def _palc_correct(params, spec, u_pred, normal, config, budget, tol=CORRECTOR_TOL):
    """Newton on ``R(u) = 0`` restricted to the plane through ``u_pred`` normal to ``normal``."""
    u = np.array(u_pred, dtype=float)
    du = np.full(3, np.inf)
    res = math.inf
    for it in range(budget + 1):
        pt = _evaluate(params, spec, u, config)
        N = float(normal @ (u - u_pred))
        res = float(np.abs(pt.R).max())
        scale = 1.0 + np.abs(u).max()
        if abs(N) < 1e-13 * scale and (
                res < tol or
                # strongly unstable orbits: the residual stalls at the round-off floor
                (res < NOISE_FLOOR and np.abs(du).max() < 1e-13 * scale)):
            pt.iterations = it
            return pt
        if it == budget:
            break
        A = np.vstack([pt.J, normal])
        try:
            du = np.linalg.solve(A, -np.append(pt.R, N))
        except np.linalg.LinAlgError:
            raise CorrectionError("singular continuation Jacobian", res) from None
        if not np.all(np.isfinite(du)):
            raise CorrectionError("non-finite Newton step", res)
        u = u + du
    raise CorrectionError(f"continuation corrector failed (|R|={res:.2e})", res)


def half_period_stability(spec: FamilySpec, tm):
    """Full-period planar and vertical monodromies from the half-period flow.

    Reversibility gives ``Phi(T) = S Phi(T/2)^-1 S Phi(T/2)`` with ``S`` the
    linear part of the reflection, and the same for the vertical block.
    """
    S = get_axis(spec.axis).reflection
    P = S @ np.linalg.inv(tm.M) @ S @ tm.M
    Vf = _R2 @ np.linalg.inv(tm.V) @ _R2 @ tm.V
    return P, Vf


def _make_orbit(params, spec: FamilySpec, pt: _Point) -> PeriodicOrbit:
    ax = get_axis(spec.axis)
    P, Vf = half_period_stability(spec, pt.tm)
    # eigenvalues 1, 1, lambda, 1/lambda; a = (lambda + 1/lambda) / 2
    a = 0.5 * (float(np.trace(P)) - 2.0)
    s0 = PhaseState.from_array(pt.X)
    mirror = abs(pt.tm.y[ax.pos] + pt.X[ax.pos]) < 1e-8 * (1.0 + abs(pt.X[ax.pos]))
    symmetry = "doubly-symmetric" if mirror and spec.crossings == 2 else f"{ax.name}-symmetric"
    reg = pt.tm.regularized
    pt.orbit = PeriodicOrbit(
        C=float(pt.u[1]), ic=s0, T=2.0 * pt.tm.t, ah=2.0 * a, av=float(np.trace(Vf)),
        half_a=a, half_d=a, symmetry=symmetry, collision=bool(reg), axis=ax.name,
        crossings=spec.crossings, reg_ic=to_regularized(params, s0) if reg else None,
        residual=float(np.abs(pt.R).max()), iterations=pt.iterations, rmin=float(pt.tm.rmin))
    return pt.orbit


def _tangent(pt: _Point, prev=None, orient=1.0):
    t = pt.null
    n = np.linalg.norm(t)
    if n == 0.0 or not np.isfinite(n):
        raise CorrectionError("tangent undefined at a singular point")
    t = t / n
    if prev is not None:
        if t @ prev < 0:
            t = -t
    elif t[0] * orient < 0:
        t = -t
    return t


def point_from_orbit(params, spec: FamilySpec, orbit: PeriodicOrbit,
                     config: IntegratorConfig = DEFAULT_CONFIG, budget=12) -> _Point:
    """Characteristic-curve point of a symmetric orbit, re-corrected at its C."""
    ax = get_axis(spec.axis)
    u0 = np.array([orbit.state[ax.pos], orbit.C, TAU_WEIGHT * 0.5 * orbit.T])
    pt = _evaluate(params, spec, u0, config)
    if np.abs(pt.R).max() > CORRECTOR_TOL:
        pt = _palc_correct(params, spec, u0, np.array([0.0, 1.0, 0.0]), config, budget)
    _make_orbit(params, spec, pt)
    return pt


# ---------------------------------------------------------------------------
# seeds

def family_spec(params: SystemParams, name: str, seed: PeriodicOrbit | None = None) -> FamilySpec:
    if name not in FAMILY_NAMES:
        raise ValueError(f"unknown family {name!r}; expected one of {', '.join(FAMILY_NAMES)}")
    if seed is not None:
        ax = get_axis(seed.axis)
        X = seed.state
        center = _family_center(params, name, ax)
        return FamilySpec(name, ax.name, seed.crossings, center, math.copysign(1.0, X[ax.trans]))
    if name in ("short", "long"):
        return FamilySpec(name, "y", 2, params.lambda1 ** (-1.0 / 3.0), 1.0)
    if name == "g":
        return FamilySpec(name, "x", 2, 0.0, 1.0)
    if name == "f":
        return FamilySpec(name, "x", 2, 0.0, -1.0)
    if name == "a":
        return FamilySpec(name, "x", 2, params.lambda2 ** (-1.0 / 3.0), -1.0)
    if name == "a2":
        return FamilySpec(name, "x", 2, -params.lambda2 ** (-1.0 / 3.0), 1.0)
    return FamilySpec(name, "x", 4, 0.0, 1.0)


def _family_center(params, name, ax):
    if name in ("short", "long"):
        return params.lambda1 ** (-1.0 / 3.0)
    if name == "a":
        return params.lambda2 ** (-1.0 / 3.0)
    if name == "a2":
        return -params.lambda2 ** (-1.0 / 3.0)
    return 0.0


#: radius of the Keplerian circles that seed the families around the tertiary
KEPLER_SEED_RADIUS = 0.01
#: linear amplitude of the Lyapunov seeds
LYAPUNOV_SEED_AMPLITUDE = 1e-3


def seed_family(params: SystemParams, name: str, config: IntegratorConfig = DEFAULT_CONFIG,
                parent: "FamilyRecord | None" = None) -> PeriodicOrbit:
    """Corrected small-amplitude first member of a named family."""
    spec = family_spec(params, name)
    if name in ("g", "f"):
        x0, vy = kepler_circle(params, KEPLER_SEED_RADIUS, retrograde=(name == "f"))
        C = jacobi_constant(params, PhaseState.planar(x0, 0.0, 0.0, vy))
        return correct_symmetric(params, (x0, vy), "x", C=C, config=config)
    if name in ("a", "a2"):
        s = l1_lyapunov_seed(params, LYAPUNOV_SEED_AMPLITUDE)
        if name == "a2":
            s = PhaseState.planar(-s.x, 0.0, 0.0, -s.vy)
        C = jacobi_constant(params, s)
        return correct_symmetric(params, (s.x, s.vy), "x", C=C, config=config)
    if name in ("short", "long"):
        frequencies(params)  # raises above the critical mass
        s = linear_seed(params, name, LYAPUNOV_SEED_AMPLITUDE).state()
        C = jacobi_constant(params, s)
        return correct_symmetric(params, (s.y, s.vx), "y", C=C, config=config)
    if name == "Hb":
        from .branches import seed_hb
        return seed_hb(params, config)
    if name == "Ha":
        from .branches import seed_ha
        return seed_ha(params, config, parent=parent)
    raise ValueError(f"unknown family {name!r}")


# ---------------------------------------------------------------------------
# events

def _cross(q0, q1, level):
    a, b = q0 - level, q1 - level
    return np.isfinite(a) and np.isfinite(b) and (a == 0.0 or a * b < 0.0)


_MONITORS = (
    ("half_a", (1.0, -1.0), "ahCritical", "half_a={lvl:+g} (a_h={tr:+g})"),
    ("half_av", (1.0, -1.0), "avCritical", "a33={lvl:+g} (a_v={tr:+g})"),
)


def _quantity(pt: _Point, name):
    o = pt.orbit
    if name == "half_a":
        return o.half_a
    if name == "half_av":
        return 0.5 * o.av
    if name == "dC":
        return pt.null[1]
    if name == "C":
        return pt.u[1]
    raise KeyError(name)


class _Tracer:
    def __init__(self, params, spec, config, limits):
        self.params = params
        self.spec = spec
        self.config = config
        self.limits = limits

    def correct(self, u_pred, normal, budget=None):
        pt = _palc_correct(self.params, self.spec, u_pred, normal, self.config,
                           budget or self.limits.newton_budget)
        _make_orbit(self.params, self.spec, pt)
        return pt

    def on_chord(self, p0: _Point, p1: _Point, s):
        d = p1.u - p0.u
        return self.correct(p0.u + s * d, d / np.linalg.norm(d))

    def refine(self, p0: _Point, p1: _Point, quantity, level, max_iter=12):
        """Locate ``quantity == level`` between two members by secant steps on the chord."""
        L = np.linalg.norm(p1.u - p0.u)
        s0, s1 = 0.0, 1.0
        f0 = _quantity(p0, quantity) - level
        f1 = _quantity(p1, quantity) - level
        best = (p0, f0) if abs(f0) < abs(f1) else (p1, f1)
        side = 0
        for _ in range(max_iter):
            if f1 == f0:
                break
            s = s1 - f1 * (s1 - s0) / (f1 - f0)
            if not (0.0 < s < 1.0) or not np.isfinite(s):
                s = 0.5 * (s0 + s1)
            try:
                pt = self.on_chord(p0, p1, s)
            except (CorrectionError, IntegrationError):
                break
            f = _quantity(pt, quantity) - level
            if abs(f) < abs(best[1]):
                best = (pt, f)
            if abs(f) < 1e-12 or abs(s1 - s0) * L < 1e-11:
                break
            # Illinois variant of regula falsi
            if f * f1 < 0:
                s0, f0 = s1, f1
                side = 0
            else:
                f0 = f0 * 0.5 if side == 1 else f0
                side = 1
            s1, f1 = s, f
        return best[0]

    def extremum(self, p0: _Point, p2: _Point, quantity, sign, tol=1e-7):
        """Golden-section search for the extremum of ``sign * quantity`` on the chord."""
        g = 0.5 * (math.sqrt(5.0) - 1.0)
        a, b = 0.0, 1.0
        pts = {}

        def val(s):
            if s not in pts:
                pts[s] = self.on_chord(p0, p2, s)
            return sign * _quantity(pts[s], quantity)

        c, d = b - g * (b - a), a + g * (b - a)
        while b - a > tol:
            if val(c) < val(d):
                b, d = d, c
                c = b - g * (b - a)
            else:
                a, c = c, d
                d = a + g * (b - a)
        s = 0.5 * (a + b)
        return self.on_chord(p0, p2, s)


#: extrema of a monitored quantity closer than this to a level are examined
EXTREMUM_BAND = 0.2
#: extrema closer than this to a level without crossing it are logged as tangencies
TANGENCY_TOL = 1e-3
#: shorter three-member chords are not searched for hidden extrema
MIN_EXTREMUM_CHORD = 1e-5


_TRACE_NAMES = {"ahCritical": ("half_a", "a_h"), "avCritical": ("a33", "a_v")}


def _level_event(kind, fmt, lvl, pt, q0, q1, index, extra=""):
    """Events for one crossing of a critical level.

    The half-map element crossing ``lvl`` and the trace crossing ``2 lvl``
    are the same event for a symmetric orbit; both are logged.
    """
    direction = "increasing" if q1 > q0 else "decreasing"
    label = fmt.format(lvl=lvl, tr=2 * lvl)
    C, x0, T = float(pt.u[1]), float(pt.u[0]), pt.orbit.T
    half, trace = _TRACE_NAMES[kind]
    note = f"{label}, {direction} along the family{extra}"
    out = [Event(kind, C, note, lvl, f"{half}={lvl:+g}", index, x0, T),
           Event(kind, C, note, 2 * lvl, f"{trace}={2 * lvl:+g}", index, x0, T)]
    if kind == "ahCritical":
        typ = "period-doubling" if lvl < 0 else "unit-multiplier"
        out.append(Event("bifurcation", C, f"{typ} ({label})", 2 * lvl, label, index, x0, T))
    return out


def _scan_events(tr: _Tracer, prev2, prev: _Point, cur: _Point, index, events):
    new = []
    if prev.tangent is not None and cur.tangent is not None and \
            np.sign(prev.tangent[1]) != np.sign(cur.tangent[1]):
        # the extremum of C is better conditioned than the zero of dC/ds, whose
        # kernel component cancels badly on strongly unstable members
        try:
            pt = tr.extremum(prev, cur, "C", 1.0 if prev.tangent[1] < 0 else -1.0, tol=1e-9)
        except (CorrectionError, IntegrationError):
            pt = tr.refine(prev, cur, "dC", 0.0)
        new.append(Event("turningPoint", float(pt.u[1]), "dC/ds changes sign", None, "dC/ds",
                         index, float(pt.u[0]), pt.orbit.T))
        k = _cover_order(tr.params, tr.config, pt)
        if k:
            new.append(Event("bifurcation", float(pt.u[1]),
                             f"the member is a {k}-fold cover of a shorter periodic orbit",
                             None, f"{k}-fold cover", index, float(pt.u[0]), pt.orbit.T))
    for qname, levels, kind, fmt in _MONITORS:
        q0, q1 = _quantity(prev, qname), _quantity(cur, qname)
        for lvl in levels:
            if _cross(q0, q1, lvl):
                pt = tr.refine(prev, cur, qname, lvl)
                new.extend(_level_event(kind, fmt, lvl, pt, q0, q1, index))
        if prev2 is None or np.linalg.norm(cur.u - prev2.u) < MIN_EXTREMUM_CHORD:
            continue
        # a pair of crossings (or a tangency) can hide between samples on the same side
        qm = _quantity(prev2, qname)
        if not (np.isfinite(qm) and (q0 - qm) * (q1 - q0) < 0):
            continue
        for lvl in levels:
            vals = np.array([qm, q0, q1]) - lvl
            if np.all(vals > 0) or np.all(vals < 0):
                if np.abs(vals).min() > EXTREMUM_BAND:
                    continue
                sign = 1.0 if q0 < qm else -1.0  # minimum -> minimise q
                try:
                    pe = tr.extremum(prev2, cur, qname, sign)
                except (CorrectionError, IntegrationError):
                    continue
                qe = _quantity(pe, qname)
                if (qe - lvl) * vals[0] < 0:
                    for a, b in ((prev2, pe), (pe, cur)):
                        pt = tr.refine(a, b, qname, lvl)
                        new.extend(_level_event(kind, fmt, lvl, pt, _quantity(a, qname),
                                                _quantity(b, qname), index))
                elif abs(qe - lvl) < TANGENCY_TOL:
                    new.append(Event(kind, float(pe.u[1]),
                                     f"{fmt.format(lvl=lvl, tr=2 * lvl)} touched without crossing "
                                     f"(extremum {qe:.6f})", 2 * lvl,
                                     fmt.format(lvl=lvl, tr=2 * lvl) + " tangency", index,
                                     float(pe.u[0]), pe.orbit.T))
    if cur.orbit.rmin < SWITCH_COLLISION <= prev.orbit.rmin:
        new.append(Event("collision", cur.orbit.C,
                         f"minimum radius {cur.orbit.rmin:.3e}; regularized correction", None,
                         "rmin", index, float(cur.u[0]), cur.orbit.T))
    new.sort(key=lambda e: abs(e.C - prev.u[1]))
    events.extend(new)
    return new


def _crossing_pair(pt: _Point):
    """Sorted positions of the two perpendicular crossings (an invariant of the orbit)."""
    ax = get_axis(pt.orbit.axis)
    return tuple(sorted((float(pt.X[ax.pos]), float(pt.tm.y[ax.pos]))))


#: agreement of crossing pairs that identifies an already traced member
RETRACE_TOL = 2e-3
#: distance from a cover bifurcation at which retracing is tested
RETRACE_DIST = 0.25


def _retraces(history, C, pair) -> bool:
    """Whether the orbit ``(C, pair)`` lies on the part of the curve traced so far."""
    p = np.array(pair)
    for (C0, p0), (C1, p1) in zip(history[:-1], history[1:]):
        if (C0 - C) * (C1 - C) > 0 or C0 == C1:
            continue
        w = (C - C0) / (C1 - C0)
        q = (1.0 - w) * np.array(p0) + w * np.array(p1)
        if np.abs(q - p).max() < RETRACE_TOL * (1.0 + np.abs(p).max()):
            return True
    return False


#: largest cover order tested at turning points
MAX_COVER = 12
#: state mismatch after ``T/k`` that identifies a k-fold cover
COVER_TOL = 1e-3


def _cover_order(params, config, pt: _Point) -> int:
    """Largest ``k > 1`` such that the member closes after ``T/k``, or 0."""
    X = pt.X
    scale = 1.0 + np.abs(X).max()
    for k in range(MAX_COVER, 1, -1):
        try:
            y = time_map(params, X, pt.orbit.T / k, config).y
        except IntegrationError:
            continue
        if np.abs(y - X).max() < COVER_TOL * scale:
            return k
    return 0


SWITCH_COLLISION = 1e-2
#: reference crossings closer than this to the tertiary end the parametrization
COLLISION_START = 1e-6


def continue_family(params: SystemParams, seed: PeriodicOrbit, direction: int = 1,
                    limits: ContinuationLimits = ContinuationLimits(), name: str = "family",
                    config: IntegratorConfig = DEFAULT_CONFIG, spec: FamilySpec | None = None,
                    away_from=None, progress=None) -> FamilyRecord:
    """Trace the family through ``seed``.

    ``direction = +1`` moves away from the family's centre (growing
    amplitude), ``-1`` towards it.  When ``away_from`` (a point ``(pos, C)``
    of the characteristic plane) is given, the first step instead moves away
    from it.
    """
    if spec is None:
        spec = family_spec(params, name if name in FAMILY_NAMES else "g", seed)
        spec = replace(spec, name=name)
    rec = FamilyRecord(name=name, mu=params.mu, axis=spec.axis, crossings=spec.crossings)
    tr = _Tracer(params, spec, config, limits)
    cur = point_from_orbit(params, spec, seed, config, limits.newton_budget)
    cur.tangent = _tangent(cur)
    if away_from is not None:
        away = np.asarray(away_from, dtype=float)[:2]
        if cur.tangent[:2] @ (cur.u[:2] - away) < 0:
            cur.tangent = -cur.tangent
    elif cur.tangent[0] * direction * (1.0 if cur.u[0] >= spec.center else -1.0) < 0:
        cur.tangent = -cur.tangent
    rec.members.append(cur.orbit)
    crossings = [(float(cur.u[1]), _crossing_pair(cur))]
    pending = None
    prev = None
    ds = limits.ds0
    while len(rec.members) < limits.max_members:
        C = cur.u[1]
        if not (limits.c_min <= C <= limits.c_max):
            rec.termination = "C limit reached"
            break
        swapped = _reanchor(params, tr, cur)
        if swapped is not None:
            cur, prev = swapped, None
        t = cur.tangent
        try:
            nxt = tr.correct(cur.u + ds * t, t)
            nxt.tangent = _tangent(nxt, t)
            ok = _acceptable(cur, nxt)
        except (CorrectionError, IntegrationError, ValueError, np.linalg.LinAlgError):
            ok = False
        if not ok:
            ds *= 0.5
            if ds < limits.ds_min:
                _terminate(rec, cur)
                break
            continue
        if math.hypot(nxt.X[0], nxt.X[1]) < COLLISION_START:
            rec.events.append(Event("collision", float(nxt.u[1]),
                                    "reference crossing reaches the tertiary", None, "r0",
                                    len(rec.members) - 1, float(nxt.u[0]), nxt.orbit.T))
            rec.termination = "collision orbit"
            break
        new = _scan_events(tr, prev, cur, nxt, len(rec.members) - 1, rec.events)
        covers = [e for e in new if e.quantity.endswith("cover")]
        if covers:
            pending = (covers[-1], len(rec.members), len(crossings), nxt.u.copy())
        pair = _crossing_pair(nxt)
        if pending is not None and np.linalg.norm(nxt.u[:2] - pending[3][:2]) >= RETRACE_DIST:
            ev, n_members, n_hist, _ = pending
            pending = None
            if _retraces(crossings[:n_hist], nxt.u[1], pair):
                # past a cover bifurcation the curve can come back over orbits already
                # traced, seen from their other perpendicular crossing: the family ends
                del rec.members[n_members:]
                rec.events[:] = [e for e in rec.events if e.index < n_members or e is ev]
                rec.events[rec.events.index(ev)] = replace(ev, detail="terminal: " + ev.detail)
                rec.termination = "multiple-cover bifurcation"
                break
        crossings.append((float(nxt.u[1]), pair))
        rec.members.append(nxt.orbit)
        if progress is not None:
            progress(rec, nxt)
        if nxt.iterations <= 2:
            ds = min(ds * 1.5, limits.ds_max)
        elif nxt.iterations >= 5:
            ds = max(ds * 0.6, limits.ds_min)
        prev, cur = cur, nxt
    if not rec.termination:
        rec.termination = "member cap reached"
    return rec


def _terminate(rec: FamilyRecord, cur: _Point):
    C = float(cur.u[1])
    r0 = math.hypot(cur.X[0], cur.X[1])
    if r0 < 1e-4 and cur.tangent[1] < 0:
        rec.events.append(Event("terminationAsymptote", C,
                                "x0 -> 0 with C decreasing at the step floor", None, "x0",
                                len(rec.members) - 1, float(cur.u[0]), cur.orbit.T))
        rec.termination = "asymptote"
    else:
        rec.events.append(Event("termination", C, "corrector failed at the minimum step", None,
                                "", len(rec.members) - 1, float(cur.u[0]), cur.orbit.T))
        rec.termination = "step underflow"
        rec.truncated = True


#: reference crossings slower than this are swapped for the half-period crossing
SWAP_SPEED = 0.05


def _reanchor(params, tr: "_Tracer", pt: _Point) -> _Point | None:
    """Move the reference crossing of ``pt`` to its half-period crossing.

    The chart is singular where the reference crossing meets the
    zero-velocity curve; the opposite crossing is then a regular anchor.
    """
    ax = get_axis(tr.spec.axis)
    vt0 = pt.X[ax.trans]
    X1 = pt.tm.y
    vt1 = X1[ax.trans]
    if abs(vt0) >= SWAP_SPEED or abs(vt1) < 4.0 * abs(vt0):
        return None
    # carry the tangent through the half-period flow
    t = pt.tangent
    dX = np.zeros(4)
    dX[ax.pos] = t[0]
    dX[ax.trans] = (_omega_grad(params, pt.X)[ax.pos] * t[0] - 0.5 * t[1]) / vt0
    f = kernels.planar(0.0, X1, params.p)
    dX1 = pt.tm.M @ dX + f * t[2] / TAU_WEIGHT
    guide = np.array([dX1[ax.pos], t[1], t[2]])
    old = tr.spec
    tr.spec = replace(old, sign=math.copysign(1.0, vt1))
    try:
        new = tr.correct(np.array([X1[ax.pos], pt.u[1], pt.u[2]]), np.array([0.0, 1.0, 0.0]))
        new.tangent = _tangent(new, guide / np.linalg.norm(guide))
    except (CorrectionError, IntegrationError):
        tr.spec = old
        return None
    return new


def _acceptable(cur: _Point, nxt: _Point) -> bool:
    """Reject steps that hop onto another branch."""
    T0, T1 = cur.orbit.T, nxt.orbit.T
    if not (np.isfinite(T1) and abs(T1 - T0) <= 0.25 * T0):
        return False
    return cur.tangent @ nxt.tangent >= 0.5
