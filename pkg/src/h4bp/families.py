"""Tracing of the named families with their default windows, and the
short-family reference rows."""

from __future__ import annotations

import math
from dataclasses import replace

import numpy as np

from .branches import g_upper, ha_branch, seed_hb, trace_branch
from .continuation import (FAMILY_NAMES, ContinuationLimits, FamilyRecord, continue_family,
                           seed_family)
from .dynamics import SystemParams
from .orbits import correct_symmetric, section_map
from .propagation import DEFAULT_CONFIG, IntegratorConfig

#: (c_min, c_max) traced when the run does not bound C
DEFAULT_WINDOWS = {
    "g": (-2.0, 200.0),
    "f": (-10.0, 200.0),
    "a": (-5.0, 10.0),
    "a2": (-5.0, 10.0),
    "Hb": (3.0, 5.0),
    "Ha": (3.6, 5.0),
    "short": (-101.0, 10.0),
    "long": (-10.0, 10.0),
}
DEFAULT_MAX_MEMBERS = 5000


def family_limits(name: str, c_min=None, c_max=None, max_members=None, **steps) -> ContinuationLimits:
    lo, hi = DEFAULT_WINDOWS[name]
    return ContinuationLimits(c_min=lo if c_min is None else c_min,
                              c_max=hi if c_max is None else c_max,
                              max_members=max_members or DEFAULT_MAX_MEMBERS, **steps)


def merge_records(back: FamilyRecord, fwd: FamilyRecord) -> FamilyRecord:
    """Join two traces leaving the same seed in opposite directions.

    ``back`` is reversed, so the merged members stay ordered by arclength.
    """
    nb = len(back.members)
    members = back.members[::-1] + fwd.members[1:]
    events = [replace(e, index=nb - 2 - e.index) for e in back.events[::-1]]
    events += [replace(e, index=e.index + nb - 1) for e in fwd.events]
    term = "; ".join(t for t in (back.termination, fwd.termination) if t)
    return FamilyRecord(fwd.name, fwd.mu, members, events, fwd.axis, fwd.crossings,
                        back.truncated or fwd.truncated, term)


def trace_family(params: SystemParams, name: str, limits: ContinuationLimits | None = None,
                 config: IntegratorConfig = DEFAULT_CONFIG, progress=None) -> FamilyRecord:
    """Seed and continue one named family."""
    if name not in FAMILY_NAMES:
        raise ValueError(f"unknown family {name!r}")
    limits = limits or family_limits(name)
    if name == "Hb":
        seed = seed_hb(params, config)
        up = continue_family(params, seed, 1, limits, name=name, config=config,
                             away_from=(seed.x0, seed.C - 1.0), progress=progress)
        down = continue_family(params, seed, 1, limits, name=name, config=config,
                               away_from=(seed.x0, seed.C + 1.0), progress=progress)
        return merge_records(down, up)
    if name == "Ha":
        parent = g_upper(params, config)
        return trace_branch(params, ha_branch(params, config, parent), name, limits, config,
                            progress)
    seed = seed_family(params, name, config)
    return continue_family(params, seed, 1, limits, name=name, config=config, progress=progress)


# ---------------------------------------------------------------------------
# short-family reference rows

TABLE2 = (
    (0.386390, 0.0052630577, -0.000003114, 6.352714861),
    (0.000490, 0.6349317173, -0.0452963681, 6.352729416),
    (-6.033910, 2.4990322956, -0.6970916287, 6.352966358),
    (-99.90891, 7.7351384429, -6.6652904069, 6.3561117178),
)


def short_row(params: SystemParams, record: FamilyRecord, C: float,
              config: IntegratorConfig = DEFAULT_CONFIG) -> tuple[float, float, float]:
    """(x0, vx0, T) of the short-family member at ``C``.

    The state is read where the orbit crosses the horizontal line through
    L3 moving downwards, with x measured from L3.
    """
    ms = record.members
    for m0, m1 in zip(ms[:-1], ms[1:]):
        if (m0.C - C) * (m1.C - C) <= 0:
            break
    else:
        raise ValueError(f"C={C} outside the traced short family")
    w = 0.0 if m1.C == m0.C else (C - m0.C) / (m1.C - m0.C)
    guess = (1 - w) * m0.state + w * m1.state
    o = correct_symmetric(params, (guess[1], guess[2]), "y", C=C, config=config)
    yl3 = params.lambda1 ** (-1.0 / 3.0)
    sm = section_map(params, o.state, "x", 1, config, value=yl3, direction=-1)
    return float(sm.y[0]), float(sm.y[2]), float(o.T)


def table2(params: SystemParams, config: IntegratorConfig = DEFAULT_CONFIG,
           record: FamilyRecord | None = None) -> list[dict]:
    c_min = min(r[0] for r in TABLE2) - 1.0
    if record is None or min(m.C for m in record.members) > c_min + 1.0:
        record = trace_family(params, "short", family_limits("short", c_min=c_min), config)
    rows = []
    for C, x0, vx0, T in TABLE2:
        x, vx, t = short_row(params, record, C, config)
        rows.append({"C": C, "x0": x, "vx0": vx, "T": t, "reference": (x0, vx0, T),
                     "error": max(abs(x - x0), abs(vx - vx0), abs(t - T))})
    return rows


def terminal_cover_match(params: SystemParams, long_rec: FamilyRecord, short_rec: FamilyRecord,
                         config: IntegratorConfig = DEFAULT_CONFIG) -> tuple[float, float]:
    """How closely the long family's terminal orbit covers a short-family member.

    Returns the distance between the terminal member's reference crossing and
    the nearer perpendicular crossing of the short orbit at the same C, and
    the mismatch of the period with a whole multiple of the short period.
    """
    ev = [e for e in long_rec.events_of("bifurcation") if e.detail.startswith("terminal")]
    if not ev:
        return math.nan, math.nan
    ev = ev[-1]
    ms = short_rec.members
    for m0, m1 in zip(ms[:-1], ms[1:]):
        if (m0.C - ev.C) * (m1.C - ev.C) <= 0:
            break
    else:
        return math.nan, math.nan
    w = 0.0 if m1.C == m0.C else (ev.C - m0.C) / (m1.C - m0.C)
    guess = (1 - w) * m0.state + w * m1.state
    o = correct_symmetric(params, (guess[1], guess[2]), "y", C=ev.C, config=config)
    far = section_map(params, o.state, "y", 1, config).y
    dist = min(abs(o.state[1] - ev.x0), abs(far[1] - ev.x0))
    k = round(ev.T / o.T)
    return float(dist), float(abs(ev.T - k * o.T))


__all__ = ["DEFAULT_WINDOWS", "family_limits", "merge_records", "trace_family", "TABLE2",
           "short_row", "table2", "terminal_cover_match"]
