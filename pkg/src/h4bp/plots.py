"""Static SVG figures of a family record."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .continuation import FamilyRecord  # noqa: E402
from .dynamics import make_params  # noqa: E402
from .propagation import (DEFAULT_CONFIG, CollisionApproach, IntegrationError,  # noqa: E402
                          propagate, propagate_regularized)
from .regularization import to_regularized  # noqa: E402

PLOT_FILES = ("characteristic.svg", "stability_h.svg", "stability_v.svg", "orbits.svg")
GALLERY_SIZE = 12
_STYLE = {"svg.hashsalt": "h4bp", "svg.fonttype": "path", "figure.figsize": (7.0, 5.0),
          "font.size": 9, "axes.grid": True, "grid.alpha": 0.3}
_EVENT_MARKERS = {"bifurcation": ("o", "tab:red"), "turningPoint": ("s", "tab:green"),
                  "collision": ("x", "black"), "terminationAsymptote": ("v", "tab:purple")}


def _save(fig, path):
    fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)


def _empty_note(ax, record):
    ax.text(0.5, 0.5, f"warning: record '{record.name}' has no members", ha="center",
            va="center", transform=ax.transAxes, color="tab:red")


def _columns(record):
    if not record.members:
        return {k: np.empty(0) for k in ("C", "x0", "ah", "av")}
    return {"C": np.array([m.C for m in record.members]),
            "x0": np.array([m.x0 for m in record.members]),
            "ah": np.array([m.ah for m in record.members]),
            "av": np.array([m.av for m in record.members])}


def characteristic(record: FamilyRecord, path):
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        d = _columns(record)
        ax.plot(d["C"], d["x0"], lw=1.0, color="tab:blue", label=record.name)
        seen = set()
        for e in record.events:
            if e.kind not in _EVENT_MARKERS or not np.isfinite(e.x0):
                continue
            marker, color = _EVENT_MARKERS[e.kind]
            ax.plot([e.C], [e.x0], marker=marker, color=color, ls="none", ms=5,
                    label=None if e.kind in seen else e.kind)
            seen.add(e.kind)
            if e.kind == "bifurcation":
                ax.annotate(f"C={e.C:.4f}", (e.C, e.x0), textcoords="offset points",
                            xytext=(4, 4), fontsize=7)
        if not record.members:
            _empty_note(ax, record)
        ax.set_xlabel("C")
        ax.set_ylabel(f"{record.axis}0")
        ax.set_title(f"characteristic curve, family {record.name} (mu={record.mu:g})")
        if record.members:
            ax.legend(loc="best", fontsize=7)
        _save(fig, path)


def _stability(record, path, key, label, guides, event_kind):
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        d = _columns(record)
        for g in guides:
            ax.axhline(g, color="0.4", lw=0.8, ls="-" if abs(g) == 2 else "--")
        ax.plot(d["C"], d[key], lw=1.0, color="tab:blue")
        crit = [e for e in record.events if e.kind == event_kind and e.level is not None
                and abs(e.level) == 2 and "tangency" not in e.quantity]
        if crit:
            ax.plot([e.C for e in crit], [e.level for e in crit], "o", color="tab:red", ms=4,
                    label=f"{event_kind} (|level| = 2)")
            ax.legend(loc="best", fontsize=7)
        if len(d[key]) and np.nanmax(np.abs(d[key])) > 10:
            ax.set_yscale("symlog", linthresh=2.0)
        if not record.members:
            _empty_note(ax, record)
        ax.set_xlabel("C")
        ax.set_ylabel(label)
        ax.set_title(f"{label} along family {record.name}")
        _save(fig, path)


def stability_h(record: FamilyRecord, path):
    _stability(record, path, "ah", "a_h", (-2.0, -1.0, 1.0, 2.0), "ahCritical")


def stability_v(record: FamilyRecord, path):
    _stability(record, path, "av", "a_v", (-2.0, 2.0), "avCritical")


def gallery_indices(record: FamilyRecord, n=GALLERY_SIZE) -> list[int]:
    """Members evenly spaced in arclength along the characteristic curve."""
    m = len(record.members)
    if m <= n:
        return list(range(m))
    d = _columns(record)
    s = np.concatenate([[0.0], np.cumsum(np.hypot(np.diff(d["C"]), np.diff(d["x0"])))])
    targets = np.linspace(0.0, s[-1], n)
    idx = sorted({int(np.argmin(np.abs(s - t))) for t in targets})
    return idx


def orbit_path(params, orbit, config=DEFAULT_CONFIG, n=400) -> np.ndarray:
    """Positions along one period of ``orbit``; collision orbits are followed regularized."""
    try:
        tr = propagate(params, config, orbit.ic, orbit.T, guard=1e-3)
        _, ys = tr.sample(n)
        return ys[:, :2]
    except CollisionApproach:
        pass
    r0 = to_regularized(params, orbit.ic)
    tau = max(orbit.T, 1.0)
    for _ in range(40):
        tr = propagate_regularized(params, config, r0, tau)
        if tr.y1[4] >= orbit.T:
            break
        tau *= 2.0
    taus, ys = tr.sample(4 * n)
    keep = ys[:, 4] <= orbit.T
    Q1, Q2 = ys[keep, 0], ys[keep, 1]
    return np.column_stack([Q1 * Q1 - Q2 * Q2, 2.0 * Q1 * Q2])


def orbits(record: FamilyRecord, path, config=DEFAULT_CONFIG):
    params = make_params(record.mu)
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(6.0, 6.0))
        idx = gallery_indices(record)
        cmap = plt.get_cmap("viridis")
        for k, i in enumerate(idx):
            m = record.members[i]
            try:
                xy = orbit_path(params, m, config)
            except (IntegrationError, ValueError):
                continue
            ax.plot(xy[:, 0], xy[:, 1], lw=0.7, color=cmap(k / max(len(idx) - 1, 1)),
                    label=f"C={m.C:.4f}")
        ax.plot([0.0], [0.0], "k+", ms=6)
        ax.set_aspect("equal", adjustable="datalim")
        if not record.members:
            _empty_note(ax, record)
        else:
            ax.legend(loc="upper right", fontsize=6)
        ax.set_xlabel("x")
        ax.set_ylabel("y")
        ax.set_title(f"family {record.name}: {len(idx)} members over one period")
        _save(fig, path)


def plot_record(record: FamilyRecord, directory, config=DEFAULT_CONFIG) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = [directory / name for name in PLOT_FILES]
    characteristic(record, paths[0])
    stability_h(record, paths[1])
    stability_v(record, paths[2])
    orbits(record, paths[3], config)
    return paths


__all__ = ["PLOT_FILES", "plot_record", "characteristic", "stability_h", "stability_v", "orbits",
           "gallery_indices", "orbit_path"]
