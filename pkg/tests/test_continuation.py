import math

import numpy as np
import pytest

from h4bp.continuation import ContinuationLimits
from h4bp.dynamics import make_params
from h4bp.families import family_limits, terminal_cover_match, trace_family
from h4bp.verify import member_closes

P = make_params(0.00095)


def _bracketed(rec, e):
    """The event lies on the arc between the members around its index."""
    ms = rec.members[max(e.index - 1, 0):e.index + 3]
    if e.index == len(rec.members) - 1:
        # terminal events are refined within one step past the last member
        last = rec.members[-1]
        return math.hypot(e.x0 - last.x0, e.C - last.C) < 0.05
    pos = [m.x0 for m in ms]
    Cs = [m.C for m in ms]
    # either coordinate may overshoot the samples near its extremum
    slack = 1e-3 * max(1.0, abs(e.C))
    ps = 1e-3 * max(1.0, abs(e.x0))
    return (min(pos) - ps <= e.x0 <= max(pos) + ps
            and min(Cs) - slack <= e.C <= max(Cs) + slack)


@pytest.mark.parametrize("kw", [dict(c_min=1.0, c_max=0.0), dict(max_members=0),
                                dict(ds0=1.0, ds_max=0.1)])
def test_limits_validation(kw):
    with pytest.raises(ValueError):
        ContinuationLimits(**kw)


def test_retrograde_family_monotone_and_stable(families):
    f = families.family("f")
    Cs = np.array([m.C for m in f.members])
    d = np.diff(Cs)
    assert np.all(d < 0) or np.all(d > 0)
    assert all(m.bistable for m in f.members)


@pytest.mark.parametrize("name", ["g", "f", "a", "short", "long"])
def test_events_are_bracketed(families, name):
    rec = families.family(name)
    for e in rec.events:
        assert _bracketed(rec, e), e


@pytest.mark.parametrize("name", ["g", "a", "long"])
def test_C_monotone_between_turning_points(families, name):
    rec = families.family(name)
    Cs = np.array([m.C for m in rec.members])
    turns = sorted(e.index for e in rec.events_of("turningPoint"))
    bounds = [0] + [t + 1 for t in turns] + [len(Cs)]
    for a, b in zip(bounds[:-1], bounds[1:]):
        seg = np.diff(Cs[max(a - 1, 0):b])
        seg = seg[1:-1] if len(seg) > 2 else seg[:0]
        assert np.all(seg <= 0) or np.all(seg >= 0)


def test_mirror_family_matches(families):
    a = families.family("a")
    a2 = trace_family(P, "a2", family_limits("a2", max_members=30))
    for m, n in zip(a.members[:30], a2.members):
        assert abs(m.C - n.C) < 1e-9
        assert abs(m.ic.x + n.ic.x) < 1e-9
        assert abs(m.ic.vy + n.ic.vy) < 1e-9


def test_trace_is_deterministic():
    lim = family_limits("f", max_members=15)
    r1 = trace_family(P, "f", lim)
    r2 = trace_family(P, "f", lim)
    assert [m.state.tolist() for m in r1.members] == [m.state.tolist() for m in r2.members]
    assert [e.as_dict() for e in r1.events] == [e.as_dict() for e in r2.events]


def test_member_cap_ends_trace_cleanly():
    rec = trace_family(P, "g", family_limits("g", max_members=5))
    assert len(rec.members) == 5
    assert rec.termination == "member cap reached"
    assert not rec.truncated


def test_direct_family_has_branch_points(families):
    g = families.family("g")
    levels = [e for e in g.events_of("bifurcation") if e.level == 2.0]
    assert levels
    assert any(abs(e.C - 4.4984) < 1e-3 for e in levels)


def test_branch_family_joins_parent(families):
    ha = families.family("Ha")
    parent = [e for e in ha.events_of("bifurcation") if e.detail.startswith("parent")]
    assert parent
    first = ha.members[0]
    assert abs(first.C - parent[0].C) < 1e-9
    assert abs(abs(first.half_a) - 1.0) < 1e-4


def test_long_family_ends_on_short_cover(families):
    dist, dT = terminal_cover_match(P, families.family("long"), families.family("short"))
    assert dist < 1e-4
    assert dT < 1e-4


@pytest.mark.parametrize("name", ["g", "f", "a", "short", "long", "Hb", "Ha"])
def test_sampled_members_close(families, name):
    rec = families.family(name)
    rng = np.random.default_rng(12)
    n = max(1, len(rec.members) // 10)
    for i in sorted(rng.choice(len(rec.members), n, replace=False)):
        ok, _ = member_closes(P, rec, rec.members[i])
        assert ok, (name, i)


def test_collision_members_flagged(families):
    g = families.family("g")
    flagged = [m for m in g.members if m.collision]
    assert flagged
    assert all(m.rmin < 0.05 for m in flagged)
