"""Golden-value and property checks behind ``h4bp verify``.

Every check yields a :class:`Check`; a criterion passes when all of its
checks pass.  Families are read from a record directory when one is given
and traced otherwise.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import minimize_scalar

from . import kernels
from .continuation import TAU_WEIGHT, FamilyRecord, FamilySpec, _evaluate, seed_family
from .dynamics import PhaseState, jacobi_constant, jacobi_gradient, make_params
from .equilibria import D_coef, frequencies, mu_critical, resonant_mu
from .families import table2, trace_family
from .orbits import closure_error, get_axis, kepler_circle, stability
from .propagation import (DEFAULT_CONFIG, VariationalState, propagate,
                          propagate_regularized, propagate_spatial_stm, propagate_variational)
from .records import (CorruptRecordError, check_manifest, events_json, members_csv, read_record,
                      record_dirs)
from .regularization import (RegState, physical_from_array, reg_hamiltonian, to_regularized)

REFERENCE_MU = 0.00095
TABLE1 = {2: 0.007733, 3: 0.004390, 4: 0.002713, 5: 0.001817, 6: 0.001293, 7: 0.000965,
          8: 0.000746, 9: 0.000594, 10: 0.000483}
EVENT_RUNTIME_LIMIT = 600.0
PROPERTY_SEED = 20240607


@dataclass
class Check:
    criterion: str
    name: str
    passed: bool
    value: float | None = None
    target: float | None = None
    tolerance: float | None = None
    detail: str = ""

    def as_dict(self):
        d = asdict(self)
        for k in ("value", "target", "tolerance"):
            if d[k] is not None and not math.isfinite(d[k]):
                d[k] = None
        return d


def _close(criterion, name, value, target, tol, detail=""):
    ok = value is not None and math.isfinite(value) and abs(value - target) <= tol
    return Check(criterion, name, bool(ok), value, target, tol, detail)


def _below(criterion, name, value, tol, detail=""):
    ok = value is not None and math.isfinite(value) and value < tol
    return Check(criterion, name, bool(ok), value, None, tol, detail)


# ---------------------------------------------------------------------------
# closed-form criteria

def check_mu0(ctx=None) -> list[Check]:
    m0 = mu_critical()
    return [_close("mu0", "mu0 value", m0, 0.011942, 5e-7),
            _close("mu0", "D(mu0)", D_coef(make_params(m0)), 0.0, 1e-12)]


def check_table1(ctx=None) -> list[Check]:
    out = [_close("table1", f"k={k}", resonant_mu(k), v, 5e-7) for k, v in TABLE1.items()]
    exact = {2: 0.5 - math.sqrt(5.0 / 3.0 * (10181.0 + 458.0 * math.sqrt(2073.0))) / 462.0,
             3: 0.5 - math.sqrt(5.0 * (24077.0 + 6464.0 * math.sqrt(57.0))) / 1218.0}
    for k, v in exact.items():
        out.append(_close("table1", f"k={k} radical", resonant_mu(k), v, 1e-12))
    return out


def check_periods(ctx=None) -> list[Check]:
    lin = frequencies(make_params(REFERENCE_MU))
    return [_close("periods", "short period", lin.short_period, 6.35271, 1e-4),
            _close("periods", "long period", lin.long_period, 44.8422, 0.05)]


# ---------------------------------------------------------------------------
# traced families

class Context:
    """Lazily traced (or loaded) families at the reference mass parameter."""

    def __init__(self, records: dict[str, FamilyRecord] | None = None, config=DEFAULT_CONFIG):
        self.params = make_params(REFERENCE_MU)
        self.config = config
        self.records = dict(records or {})
        self.trace_seconds = 0.0

    def family(self, name: str) -> FamilyRecord:
        if name not in self.records:
            t0 = time.perf_counter()
            self.records[name] = trace_family(self.params, name, config=self.config)
            self.trace_seconds += time.perf_counter() - t0
        return self.records[name]


def check_table2(ctx: Context) -> list[Check]:
    out = []
    for row in table2(ctx.params, ctx.config, ctx.family("short")):
        x0, vx0, T = row["reference"]
        C = row["C"]
        out += [_close("table2", f"C={C} x0", row["x0"], x0, 1e-5),
                _close("table2", f"C={C} vx0", row["vx0"], vx0, 1e-5),
                _close("table2", f"C={C} T", row["T"], T, 1e-5)]
    return out


def _critical(rec, kind):
    return [e for e in rec.events if e.kind == kind and e.level is not None
            and abs(e.level) == 2.0 and "tangency" not in e.quantity]


def _nearest(events, target):
    if not events:
        return None
    return min(events, key=lambda e: abs(e.C - target))


def _event_check(name, events, target, tol):
    e = _nearest(events, target)
    if e is None:
        return Check("events", name, False, None, target, tol, "no such event in the record")
    return _close("events", name, e.C, target, tol, f"{e.kind} {e.quantity} {e.detail}".strip())


def check_events(ctx: Context) -> list[Check]:
    t0 = time.perf_counter()
    before = ctx.trace_seconds
    g, hb, ha = ctx.family("g"), ctx.family("Hb"), ctx.family("Ha")
    lng, sh, a = ctx.family("long"), ctx.family("short"), ctx.family("a")
    out = [
        _event_check("g bifurcation", [e for e in g.events_of("bifurcation") if e.level == 2.0],
                     4.4984, 0.01),
        _event_check("g a_h critical", _critical(g, "ahCritical"), 4.498, 0.01),
        _event_check("Hb maximum", hb.events_of("turningPoint"), 4.2451, 0.01),
        _event_check("Ha parent bifurcation", [e for e in ha.events_of("bifurcation")
                                               if e.detail.startswith("parent")], 4.1178, 0.01),
        _event_check("long turning point", lng.events_of("turningPoint"), 0.795, 0.01),
        _event_check("long terminal bifurcation", [e for e in lng.events_of("bifurcation")
                                                   if e.detail.startswith("terminal")],
                     -5.190, 0.02),
        _event_check("short a_h loss", _critical(sh, "ahCritical"), -66.11, 0.2),
    ]
    av = _critical(a, "avCritical")
    for target in (4.006, 1.246, -0.013):
        out.append(_event_check(f"a vertical critical {target}", av, target, 0.01))
    elapsed = time.perf_counter() - t0
    traced = ctx.trace_seconds - before
    out.append(_below("events", "runtime", elapsed, EVENT_RUNTIME_LIMIT,
                      f"{traced:.1f} s spent tracing"))
    return out


# ---------------------------------------------------------------------------
# property suite

def random_bounded_states(params, rng, n, r_range=(0.1, 0.3)):
    """Near-Keplerian states about the tertiary, well inside the Hill region."""
    states = []
    while len(states) < n:
        r = rng.uniform(*r_range)
        th = rng.uniform(0.0, 2.0 * math.pi)
        retro = bool(rng.integers(2))
        _, vy = kepler_circle(params, r, retro)
        v = vy * rng.uniform(0.95, 1.0)
        c, s = math.cos(th), math.sin(th)
        states.append(PhaseState.planar(r * c, r * s, -v * s, v * c))
    return states


def jacobi_drift(params, s0, t=100.0, config=DEFAULT_CONFIG, samples=50):
    tr = propagate(params, config, s0, t)
    C0 = jacobi_constant(params, s0)
    drift = abs(jacobi_constant(params, PhaseState.from_array(tr.y1)) - C0)
    _, ys = tr.sample(samples)
    r = np.hypot(ys[:, 0], ys[:, 1]).max()
    for y in ys:
        drift = max(drift, abs(jacobi_constant(params, PhaseState.from_array(y)) - C0))
    return drift, r


def stm_fd_error(params, s0, t, config=DEFAULT_CONFIG, h=1e-6):
    """(relative STM error against central differences, |det - 1|)."""
    Phi = propagate_variational(params, config, VariationalState.initial(s0), t).stm
    X0 = s0.as_planar()
    fd = np.empty((4, 4))
    for j in range(4):
        e = np.zeros(4)
        e[j] = h
        yp = propagate(params, config, PhaseState.from_array(X0 + e), t).y1
        ym = propagate(params, config, PhaseState.from_array(X0 - e), t).y1
        fd[:, j] = (yp - ym) / (2.0 * h)
    return (float(np.linalg.norm(fd - Phi) / np.linalg.norm(Phi)),
            float(abs(np.linalg.det(Phi) - 1.0)))


def regularized_agreement(params, s0, tau, config=DEFAULT_CONFIG, samples=50):
    """(max physical-state mismatch, max drift of the regularized Hamiltonian)."""
    r0 = to_regularized(params, s0)
    rt = propagate_regularized(params, config, r0, tau)
    H0 = reg_hamiltonian(params, r0)
    _, zs = rt.sample(samples)
    hdrift = max(abs(reg_hamiltonian(params, RegState.from_array(z, r0.C)) - H0) for z in zs)
    pt = propagate(params, config, s0, rt.y1[4])
    mismatch = float(np.abs(physical_from_array(rt.y1) - pt.y1).max())
    return mismatch, float(hdrift)


def collision_condition(params, C, angle, config=DEFAULT_CONFIG, tau=0.3):
    """|P|^2 at the recovered collision of a collision orbit, and the miss distance.

    The orbit is built backwards from the collision, re-entered through the
    physical state and integrated forward until it comes closest to the origin.
    """
    start = RegState(0.0, 0.0, math.sqrt(8.0) * math.cos(angle), math.sqrt(8.0) * math.sin(angle),
                     0.0, C)
    back = propagate_regularized(params, config, start, -tau)
    s = PhaseState.from_array(physical_from_array(back.y1))
    r0 = to_regularized(params, s)
    r0 = RegState(r0.Q1, r0.Q2, r0.P1, r0.P2, 0.0, C)
    fwd = propagate_regularized(params, config, r0, 2.0 * tau)
    taus, zs = fwd.sample(2001)
    i = int(np.argmin(zs[:, 0] ** 2 + zs[:, 1] ** 2))
    lo, hi = taus[max(i - 1, 0)], taus[min(i + 1, len(taus) - 1)]
    res = minimize_scalar(lambda t: fwd(t)[0] ** 2 + fwd(t)[1] ** 2, bounds=(lo, hi),
                          method="bounded", options={"xatol": 1e-14})
    z = fwd(res.x)
    return float(z[2] ** 2 + z[3] ** 2), float(math.hypot(z[0], z[1]))


def monodromy_checks(params, orbit, config=DEFAULT_CONFIG):
    """Normwise defects of the trivial multiplier pair and of ``a = d``.

    The flow direction and the Jacobi gradient are the right and left
    eigenvectors of the unit pair; the returned unit defect is the larger of
    their relative residuals ``|M v - v| / (|M| |v|)``.  ``a - d`` is scaled by
    ``max(1, |M|)`` for the same reason: entries of a monodromy with norm
    ``|M|`` carry an integration error proportional to ``|M|``.
    Returns ``(unit, ad, |a - d|, |M|)``.
    """
    st = stability(params, orbit, config)
    M = st.monodromy
    X = orbit.state
    f = kernels.planar(0.0, X, params.p)
    g = jacobi_gradient(params, X)
    nM = float(np.linalg.norm(M, 2))
    unit = max(np.linalg.norm(M @ f - f) / (nM * np.linalg.norm(f)),
               np.linalg.norm(g @ M - g) / (nM * np.linalg.norm(g)))
    raw = float(abs(st.half_a - st.half_d))
    return float(unit), raw / max(1.0, nM), raw, nM


def classical_hill(x, y, vx, vy):
    r3 = (x * x + y * y) ** 1.5
    return np.array([vx, vy, 2.0 * vy + 3.0 * x - x / r3, -2.0 * vx - y / r3])


def vertical_index_agreement(params, orbit, config=DEFAULT_CONFIG):
    """a_v of the 2x2 vertical system against ``a33 + a66`` of the 6x6 system, over one period.

    Returns ``(difference / max(1, |M6|), difference)``; the planar trajectory
    both integrations follow is only known to an accuracy proportional to the
    monodromy norm.
    """
    av = stability(params, orbit, config).av
    _, M = propagate_spatial_stm(params, config, orbit.ic, orbit.T)
    diff = float(abs(M[2, 2] + M[5, 5] - av))
    return diff / max(1.0, float(np.linalg.norm(M, 2))), diff


def _sample_orbits(ctx: Context, count=6):
    out = []
    for name in ("g", "f", "a"):
        rec = ctx.records.get(name)
        if rec is None or not rec.members:
            seed = seed_family(ctx.params, name, ctx.config)
            out.append(seed)
            continue
        ms = [m for m in rec.members if not m.collision]
        idx = np.linspace(0, len(ms) - 1, count).astype(int)
        out += [ms[i] for i in sorted(set(idx))]
    return out


def check_properties(ctx: Context) -> list[Check]:
    p, cfg = ctx.params, ctx.config
    rng = np.random.default_rng(PROPERTY_SEED)
    out = []
    states = random_bounded_states(p, rng, 20)
    drift = radius = 0.0
    for s in states:
        d, r = jacobi_drift(p, s, 100.0, cfg)
        drift, radius = max(drift, d), max(radius, r)
    out.append(_below("properties", "Jacobi drift over 100 time units", drift, 1e-11,
                      f"20 orbits, max radius {radius:.3f}"))
    errs, dets = [], []
    for s in states:
        e, dd = stm_fd_error(p, s, rng.uniform(1.0, 3.0), cfg)
        errs.append(e)
        dets.append(dd)
    out.append(_below("properties", "STM vs finite differences", max(errs), 1e-5, "20 arcs"))
    out.append(_below("properties", "det(STM) - 1", max(dets), 1e-9, "20 arcs"))
    mism, hd = [], []
    for s in states[:10]:
        m, h = regularized_agreement(p, s, rng.uniform(0.5, 2.0), cfg)
        mism.append(m)
        hd.append(h)
    out.append(_below("properties", "regularized vs physical flow", max(mism), 1e-9, "10 arcs"))
    out.append(_below("properties", "regularized Hamiltonian drift", max(hd), 1e-10, "10 arcs"))
    pp, miss = [], []
    for C in (4.0, 2.0, -1.0):
        v, q = collision_condition(p, C, rng.uniform(0.0, 2.0 * math.pi), cfg)
        pp.append(abs(v - 8.0))
        miss.append(q)
    out.append(_below("properties", "|P|^2 = 8 at collision", max(pp), 1e-8,
                      f"closest approach |Q| <= {max(miss):.1e}"))
    sample = _sample_orbits(ctx)
    mono = [monodromy_checks(p, o, cfg) for o in sample]
    worst = max(mono, key=lambda m: m[1])
    out.append(_below("properties", "monodromy unit pair", max(m[0] for m in mono), 1e-6,
                      f"{len(mono)} orbits, normwise eigenvector residual"))
    out.append(_below("properties", "symmetric a = d", worst[1], 1e-8,
                      f"{len(mono)} orbits; worst |a-d| = {worst[2]:.2e} at |M| = {worst[3]:.2e}"))
    p0 = make_params(0.0)
    pts = rng.uniform(-1.5, 1.5, size=(50, 4))
    field = max(float(np.abs(kernels.planar(0.0, y, p0.p) - classical_hill(*y)).max()
                      / max(1.0, np.abs(classical_hill(*y)).max())) for y in pts)
    out.append(_below("properties", "mu = 0 field is classical Hill", field, 1e-14))
    try:
        g0 = seed_family(p0, "g", cfg)
        ok = closure_error(p0, g0, cfg) < 1e-9
        out.append(Check("properties", "g seed at mu = 0 converges", bool(ok),
                         detail=f"C={g0.C:.6f} T={g0.T:.6f}"))
    except Exception as exc:  # noqa: BLE001 - any failure is a failed check
        out.append(Check("properties", "g seed at mu = 0 converges", False, detail=str(exc)))
    va = [vertical_index_agreement(p, o, cfg) for o in _sample_orbits(ctx, 3)]
    out.append(_below("properties", "a_v against the 6x6 monodromy", max(v[0] for v in va), 1e-9,
                      f"{len(va)} orbits; largest raw difference {max(v[1] for v in va):.2e}"))
    return out


# ---------------------------------------------------------------------------
# stored records

CLOSURE_SAMPLE = 0.1
CLOSURE_TOL = 1e-11


def ic_error(params, record: FamilyRecord, orbit, config=DEFAULT_CONFIG):
    """Reversibility residual of a stored member and the Newton step that would remove it.

    The step is the forward-error estimate of the stored initial condition in
    the ``(position, C, weighted half period)`` chart.  Returns
    ``(residual, step, chart scale)``.
    """
    ax = get_axis(record.axis)
    spec = FamilySpec(record.name, record.axis, record.crossings, 0.0,
                      math.copysign(1.0, orbit.state[ax.trans]))
    u = np.array([orbit.state[ax.pos], orbit.C, TAU_WEIGHT * 0.5 * orbit.T])
    pt = _evaluate(params, spec, u, config)
    step = np.linalg.lstsq(pt.J, pt.R, rcond=None)[0]
    return float(np.abs(pt.R).max()), float(np.abs(step).max()), 1.0 + float(np.abs(u).max())


def member_closes(params, record, orbit, config=DEFAULT_CONFIG) -> tuple[bool, bool]:
    """(closes, at round-off floor): the residual meets the corrector tolerance, or
    the remaining Newton step is below it relative to the chart scale."""
    res, step, scale = ic_error(params, record, orbit, config)
    if res <= CLOSURE_TOL:
        return True, False
    return step <= CLOSURE_TOL * scale, True


def check_records(root, config=DEFAULT_CONFIG) -> tuple[list[Check], dict[str, FamilyRecord]]:
    """Manifest checksums, exact re-serialization and closure of a 10% member sample."""
    out, loaded = [], {}
    dirs = record_dirs(root)
    if not dirs:
        return [Check("records", f"{root}", False, detail="no record directories found")], {}
    for d in dirs:
        problems = check_manifest(d)
        out.append(Check("records", f"{d.name} checksums", not problems,
                         detail="; ".join(problems)))
        try:
            rec = read_record(d)
        except CorruptRecordError as exc:
            out.append(Check("records", f"{d.name} readable", False, detail=str(exc)))
            continue
        same = (members_csv(rec) == (d / "members.csv").read_text()
                and events_json(rec) == (d / "events.json").read_text())
        out.append(Check("records", f"{d.name} round trip", same))
        params = make_params(rec.mu)
        ms = rec.members
        n = math.ceil(CLOSURE_SAMPLE * len(ms))
        idx = sorted(set(np.linspace(0, len(ms) - 1, n).astype(int))) if n else []
        bad, floor = [], 0
        for i in idx:
            try:
                ok, at_floor = member_closes(params, rec, ms[i], config)
            except Exception as exc:  # noqa: BLE001 - reported as a failed member
                ok, at_floor = False, False
                bad.append(f"{i} ({exc})")
                continue
            floor += at_floor
            if not ok:
                bad.append(str(i))
        out.append(Check("records", f"{d.name} closure on {len(idx)} members", not bad,
                         float(len(bad)), None, None,
                         f"{floor} at the round-off floor" + (f"; failing {', '.join(bad)}" if bad else "")))
        if math.isclose(rec.mu, REFERENCE_MU):
            loaded[rec.name] = rec
    return out, loaded


CRITERIA = {
    "mu0": check_mu0,
    "table1": check_table1,
    "periods": check_periods,
    "table2": check_table2,
    "events": check_events,
    "properties": check_properties,
}


def run(criteria=None, record_root=None, config=DEFAULT_CONFIG) -> list[Check]:
    names = list(criteria or CRITERIA)
    unknown = [n for n in names if n not in CRITERIA and n != "records"]
    if unknown:
        raise ValueError(f"unknown criterion {', '.join(unknown)}")
    checks, loaded = [], {}
    if record_root is not None:
        rec_checks, loaded = check_records(Path(record_root), config)
        if criteria is None or "records" in names:
            checks += rec_checks
    ctx = Context(loaded, config)
    for n in names:
        if n == "records":
            continue
        checks += CRITERIA[n](ctx)
    return checks


def summary(checks: list[Check]) -> dict[str, bool]:
    out: dict[str, bool] = {}
    for c in checks:
        out[c.criterion] = out.get(c.criterion, True) and c.passed
    return out


__all__ = ["Check", "Context", "CRITERIA", "run", "summary", "check_records", "TABLE1",
           "jacobi_drift", "stm_fd_error", "regularized_agreement", "collision_condition",
           "monodromy_checks", "classical_hill", "vertical_index_agreement",
           "random_bounded_states"]
