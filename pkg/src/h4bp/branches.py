"""Branch switching at bifurcations and the seeds of the families that are
reached only through one (H_a) or have no stated parent (H_b)."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import kernels
from .continuation import (TAU_WEIGHT, ContinuationLimits, Event, FamilyRecord, FamilySpec,
                           _evaluate, _make_orbit, _omega_grad, _palc_correct, continue_family, family_spec,
                           point_from_orbit,
                           seed_family)
from .dynamics import SystemParams
from .orbits import (CorrectionError, PeriodicOrbit, _transverse_velocity, get_axis, section_map,
                     time_map)
from .propagation import DEFAULT_CONFIG, IntegrationError, IntegratorConfig

#: distance from the bifurcation point of the first member on a new branch
BRANCH_OFFSET = 3e-3


class BranchError(RuntimeError):
    """No new branch could be corrected at the requested event."""


@dataclass(frozen=True)
class Branch:
    orbit: PeriodicOrbit
    spec: FamilySpec
    origin: np.ndarray  # (pos, C, w tau) of the branch point in the branch's chart
    parent: str
    event: Event
    root: PeriodicOrbit  # the bifurcation orbit, seen in the branch's chart


def _chart_at(record: FamilyRecord, event: Event) -> FamilySpec:
    ax = get_axis(record.axis)
    i = min(max(event.index + 1, 0), len(record.members) - 1)
    sign = math.copysign(1.0, record.members[i].state[ax.trans])
    return FamilySpec(record.name, record.axis, record.crossings, 0.0, sign)


def _parent_tangents(params, spec, pt, doubling):
    """The parent's tangent at ``pt`` carried into the chart of each perpendicular crossing.

    Computed on the single-period curve, where the Jacobian keeps full rank.
    """
    ax = get_axis(spec.axis)
    t = pt.null / np.linalg.norm(pt.null)
    factor = 2.0 if doubling else 1.0
    vt0 = pt.X[ax.trans]
    X1 = pt.tm.y
    dX = np.zeros(4)
    dX[ax.pos] = t[0]
    dX[ax.trans] = (_omega_grad(params, pt.X)[ax.pos] * t[0] - 0.5 * t[1]) / vt0
    dX1 = pt.tm.M @ dX + kernels.planar(0.0, X1, params.p) * t[2] / TAU_WEIGHT
    far = np.array([dX1[ax.pos], t[1], factor * t[2]])
    near = np.array([t[0], t[1], factor * t[2]])
    return near / np.linalg.norm(near), far / np.linalg.norm(far)


def _candidates(params, spec, pt, regular, doubling, config):
    """The branch point seen from each perpendicular crossing, over one or two periods.

    ``regular`` is a nearby parent point whose tangent is well defined.
    """
    ax = get_axis(spec.axis)
    factor = 2.0 if doubling else 1.0
    crossings = spec.crossings * (2 if doubling else 1)
    X1 = pt.tm.y
    t_near, t_far = _parent_tangents(params, spec, regular, doubling)
    charts = [(replace(spec, crossings=crossings), np.array([pt.u[0], pt.u[1], factor * pt.u[2]]),
               t_near),
              (replace(spec, crossings=crossings, sign=math.copysign(1.0, X1[ax.trans])),
               np.array([X1[ax.pos], pt.u[1], factor * pt.u[2]]), t_far)]
    out = []
    for sp, u, tp in charts:
        try:
            q = _evaluate(params, sp, u, config)
        except (CorrectionError, IntegrationError):
            continue
        sv = np.linalg.svd(q.J, compute_uv=False)
        out.append((sv[1] / sv[0], sp, q, tp))
    return sorted(out, key=lambda c: c[0])


def _closes_early(params, pt, config):
    X = pt.X
    y = time_map(params, X, 0.5 * pt.orbit.T, config).y
    return np.abs(y - X).max() < 1e-6 * (1.0 + np.abs(X).max())


def branch_switch(params: SystemParams, record: FamilyRecord, event: Event,
                  config: IntegratorConfig = DEFAULT_CONFIG,
                  offset: float = BRANCH_OFFSET) -> list[Branch]:
    """Corrected first members of the branches crossing ``record`` at ``event``.

    The kernel of the residual Jacobian is two-dimensional at a branch point;
    the member is perturbed within it, normal to the parent, and re-corrected
    on the hyperplane through the perturbed point.  A period-doubling event
    (``a_h = -2``) is handled over two periods of the parent.  Both
    perpendicular crossings are tried as reference, since the new branch is
    regular in only one of the two charts.
    """
    if event.kind not in ("bifurcation", "ahCritical"):
        raise ValueError("branch switching needs a bifurcation event")
    doubling = event.level is not None and event.level < 0
    spec = _chart_at(record, event)
    u = np.array([event.x0, event.C, TAU_WEIGHT * 0.5 * event.T])
    try:
        pt = _palc_correct(params, spec, u, np.array([0.0, 1.0, 0.0]), config, 20)
    except (CorrectionError, IntegrationError) as exc:
        raise BranchError(f"could not re-correct the bifurcation orbit: {exc}") from None
    if doubling:
        regular = pt  # the single-period curve is regular here
    else:
        i = min(event.index + 1, len(record.members) - 1)
        regular = point_from_orbit(params, spec, record.members[i], config)
    branches = []
    for _, sp, q, tp in _candidates(params, spec, pt, regular, doubling, config):
        _, _, Vt = np.linalg.svd(q.J)
        n1, n2 = Vt[1], Vt[2]
        c1, c2 = tp @ n1, tp @ n2
        v = -c2 * n1 + c1 * n2
        v /= np.linalg.norm(v)
        for sgn in (1.0, -1.0):
            try:
                b = _palc_correct(params, sp, q.u + sgn * offset * v, v, config, 20)
            except (CorrectionError, IntegrationError):
                continue
            d = b.u - q.u
            if np.linalg.norm(d - (d @ tp) * tp) < 0.5 * offset:
                continue  # slid back onto the parent
            _make_orbit(params, sp, b)
            if doubling and _closes_early(params, b, config):
                continue
            root = _make_orbit(params, sp, q)
            branches.append(Branch(b.orbit, sp, q.u.copy(), record.name, event, root))
        if branches:
            return branches
    raise BranchError(f"no branch found at C={event.C:.6f}")


# ---------------------------------------------------------------------------
# named branches

def _trace_g_to_bifurcation(params, config):
    g = continue_family(params, seed_family(params, "g", config), 1,
                        ContinuationLimits(c_min=4.4, max_members=5000, ds_max=0.1),
                        name="g", config=config)
    ev = [e for e in g.events_of("bifurcation") if e.level == 2.0]
    if not ev:
        raise BranchError("family g shows no unit-multiplier bifurcation")
    return g, ev[0]


def trace_branch(params: SystemParams, br: Branch, name: str, limits: ContinuationLimits,
                 config: IntegratorConfig = DEFAULT_CONFIG, progress=None) -> FamilyRecord:
    """Continue a branch away from its bifurcation orbit.

    The bifurcation orbit is the record's first member and the parent event
    is logged against it.
    """
    rec = continue_family(params, br.orbit, 1, limits, name=name, config=config,
                          spec=replace(br.spec, name=name), away_from=br.origin,
                          progress=progress)
    rec.members.insert(0, br.root)
    rec.events = [replace(e, index=e.index + 1) for e in rec.events]
    ev = br.event
    rec.events.insert(0, Event("bifurcation", ev.C, f"parent bifurcation on {br.parent}: {ev.detail}",
                               ev.level, ev.quantity, 0, float(br.origin[0]), br.root.T))
    return rec


def g_upper(params: SystemParams, config: IntegratorConfig = DEFAULT_CONFIG,
            limits: ContinuationLimits | None = None) -> FamilyRecord:
    """The branch of family g through its first bifurcation, on the side of larger x0."""
    g, ev = _trace_g_to_bifurcation(params, config)
    br = max(branch_switch(params, g, ev, config), key=lambda b: b.orbit.x0)
    limits = limits or ContinuationLimits(c_min=4.2, max_members=5000)
    return trace_branch(params, br, "g-upper", limits, config)


def seed_ha(params: SystemParams, config: IntegratorConfig = DEFAULT_CONFIG,
            parent: FamilyRecord | None = None) -> PeriodicOrbit:
    """First member of H_a: the period-doubling branch of g-upper."""
    return ha_branch(params, config, parent).orbit


def ha_branch(params: SystemParams, config: IntegratorConfig = DEFAULT_CONFIG,
              parent: FamilyRecord | None = None) -> Branch:
    if parent is None or parent.name != "g-upper":
        parent = g_upper(params, config)
    pd = [e for e in parent.events_of("bifurcation") if e.level == -2.0]
    if not pd:
        raise BranchError("g-upper shows no period-doubling bifurcation")
    branches = branch_switch(params, parent, pd[0], config)
    return max(branches, key=lambda b: b.orbit.x0)


# H_b: documented search ------------------------------------------------------

#: Jacobi constant of the H_b search, just below its reported maximum
HB_SEARCH_C = 4.24
#: scanned positions of the reference crossing
HB_SEARCH_GRID = (0.02, 3.0, 0.005)
#: window in which the searched family must turn
HB_TURN_WINDOW = (4.24, 4.26)


def _hb_roots(params, config):
    ax = get_axis("x")
    lo, hi, step = HB_SEARCH_GRID
    prev = None
    for x in np.arange(lo, hi + 0.5 * step, step):
        X = _transverse_velocity(params, ax, x, 0.0, HB_SEARCH_C, 1.0)
        if X is None:
            prev = None
            continue
        try:
            sm = section_map(params, X, ax, 2, config, t_max=50.0)
        except (IntegrationError, CorrectionError):
            prev = None
            continue
        G = sm.y[ax.perp]
        if prev is not None and prev[1] * G < 0 and abs(sm.t - prev[2]) < 0.2 * sm.t:
            yield 0.5 * (x + prev[0]), X[ax.trans]
        prev = (x, G, sm.t)


def hb_candidates(params: SystemParams, config: IntegratorConfig = DEFAULT_CONFIG):
    """Double-periodic x-symmetric orbits at the search constant that are not
    simple periodic orbits traversed twice."""
    from .orbits import correct_symmetric
    ax = get_axis("x")
    seen = []
    for x, vt in _hb_roots(params, config):
        try:
            o = correct_symmetric(params, (x, vt), "x", crossings=4, C=HB_SEARCH_C, config=config,
                                  t_max=50.0)
        except (CorrectionError, IntegrationError):
            continue
        first = section_map(params, o.state, ax, 1, config, t_max=50.0)
        if abs(first.y[ax.perp]) < 1e-6:
            continue  # closes after one crossing pair: a simple orbit counted twice
        if any(abs(o.x0 - s.x0) < 1e-6 for s in seen):
            continue
        seen.append(o)
        yield o


def seed_hb(params: SystemParams, config: IntegratorConfig = DEFAULT_CONFIG) -> PeriodicOrbit:
    """First H_b candidate (in increasing x0) whose family turns inside the window."""
    spec = replace(family_spec(params, "Hb"), name="Hb")
    lo, hi = HB_TURN_WINDOW
    for o in hb_candidates(params, config):
        rec = continue_family(params, o, 1,
                              ContinuationLimits(c_min=lo - 0.05, c_max=hi + 0.05, max_members=300,
                                                 ds_max=0.01),
                              name="Hb", config=config, spec=spec,
                              away_from=(o.x0, o.C - 1.0))
        if any(lo <= e.C <= hi for e in rec.events_of("turningPoint")):
            return o
    raise BranchError("H_b search found no family with a maximum in the window")


__all__ = ["Branch", "BranchError", "branch_switch", "trace_branch", "g_upper", "seed_ha", "ha_branch", "seed_hb",
           "hb_candidates", "HB_SEARCH_C"]
