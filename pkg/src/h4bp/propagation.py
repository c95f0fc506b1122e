"""Time integration of the physical and regularized flows, section crossings
and variational equations."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .dynamics import COLLISION_RADIUS, PhaseState, SystemParams
from .integrator import (COLLISION, EVENT, REACHED, dense_at, integrate,
                         locate_in_dense)

#: events closer than this to the start of an arc are ignored
MIN_ADVANCE = 1e-10


class IntegrationError(RuntimeError):
    pass


class CollisionApproach(Exception):
    """Physical propagation came closer to the tertiary than the guard radius.

    Carries the time and state at which the guard tripped so that callers can
    restart in regularized variables.
    """

    def __init__(self, t, state, guard):
        super().__init__(f"radius fell below {guard:g} at t={t:.15g}")
        self.t = t
        self.state = state
        self.guard = guard


@dataclass(frozen=True)
class IntegratorConfig:
    rel_tol: float = 2.22e-14
    abs_tol: float = 1e-16
    max_step: float = np.inf
    method: str = "DOP853"
    max_steps: int = 5_000_000

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("tolerances must be positive")
        if not self.max_step > 0:
            raise ValueError("max_step must be positive")
        if self.method.upper() != "DOP853":
            raise ValueError(f"unsupported method {self.method!r}")


DEFAULT_CONFIG = IntegratorConfig()


@dataclass(frozen=True)
class YCross:
    """Crossing of the line y = value (regularized: 2 Q1 Q2 = value)."""
    direction: int = 0
    value: float = 0.0


@dataclass(frozen=True)
class XCross:
    direction: int = 0
    value: float = 0.0


@dataclass(frozen=True)
class RMin:
    """Radius falling below ``threshold``."""
    threshold: float = 1e-2


_PHYS_EVENTS = {YCross: kernels.sec_y, XCross: kernels.sec_x, RMin: kernels.sec_r}
_REG_EVENTS = {YCross: kernels.reg_sec_y, XCross: kernels.reg_sec_x, RMin: kernels.reg_sec_r}


def event_function(event, regularized=False):
    """Compiled section function, its direction and offset for ``event``."""
    table = _REG_EVENTS if regularized else _PHYS_EVENTS
    fn = table[type(event)]
    if isinstance(event, RMin):
        return fn, -1, event.threshold
    return fn, int(event.direction), float(event.value)


@dataclass
class Trajectory:
    """Dense-output trajectory of one propagation run.

    ``kind`` is ``"physical"``, ``"variational"``, ``"spatial"`` or
    ``"regularized"``; for regularized runs the independent variable is the
    fictitious time and the physical time is the state's last component.
    """
    kind: str
    params: SystemParams
    p: np.ndarray
    t0: float
    t1: float
    y0: np.ndarray
    y1: np.ndarray
    ts: np.ndarray = field(repr=False)
    hs: np.ndarray = field(repr=False)
    yolds: np.ndarray = field(repr=False)
    Fs: np.ndarray = field(repr=False)
    nsteps: int = 0

    def __call__(self, t):
        t = float(t)
        lo, hi = min(self.t0, self.t1), max(self.t0, self.t1)
        if not (lo - 1e-12 <= t <= hi + 1e-12):
            raise ValueError(f"t={t} outside [{lo}, {hi}]")
        if self.ts.shape[0] == 0 or t == self.t1:
            return self.y1.copy() if t == self.t1 else self.y0.copy()
        return dense_at(self.ts, self.hs, self.yolds, self.Fs, t)

    def sample(self, n=200):
        tt = np.linspace(self.t0, self.t1, n)
        return tt, np.array([self(t) for t in tt])

    def state(self, t) -> PhaseState:
        y = self(t)
        if self.kind == "regularized":
            from .regularization import RegState, from_regularized
            return from_regularized(self.params, RegState(*y[:5], C=self.p[2]))
        if self.kind == "spatial":
            return PhaseState.from_array(y[:6])
        return PhaseState.from_array(y[:4])


def _code(table, fn):
    return fn if isinstance(fn, int) else table[fn]


def _run(f, g, t0, y0, t1, p, config, ev_dir=0, ev_count=0, guard=0.0, store=False):
    res = integrate(_code(kernels.RHS_CODES, f), _code(kernels.EVENT_CODES, g), float(t0),
                    np.ascontiguousarray(y0, dtype=float), float(t1), p, config.rel_tol,
                    config.abs_tol, config.max_step, ev_dir, ev_count, guard * guard, MIN_ADVANCE,
                    store, config.max_steps)
    status, t, y, nsteps, rmin2, ts, hs, yolds, Fs = res
    if status not in (REACHED, EVENT, COLLISION):
        raise IntegrationError(f"integration failed with status {status} at t={t}")
    return status, t, y, nsteps, np.sqrt(rmin2), (ts, hs, yolds, Fs)


def propagate(params: SystemParams, config: IntegratorConfig, s0: PhaseState, t_final: float,
              guard: float = COLLISION_RADIUS) -> Trajectory:
    """Integrate the planar (or spatial, when ``s0`` leaves the plane) flow.

    Raises :class:`CollisionApproach` when the radius drops below ``guard``.
    """
    spatial = not s0.is_planar
    f = kernels.spatial if spatial else kernels.planar
    y0 = s0.as_spatial() if spatial else s0.as_planar()
    p = params.p
    status, t, y, n, _, dense = _run(f, kernels.no_event, 0.0, y0, t_final, p, config,
                                     guard=0.0 if spatial else guard, store=True)
    if status == COLLISION:
        raise CollisionApproach(t, PhaseState.from_array(y), guard)
    return Trajectory("spatial" if spatial else "physical", params, p, 0.0, t, y0, y, *dense, n)


@dataclass(frozen=True)
class VariationalState:
    base: PhaseState
    stm: np.ndarray
    vstm: np.ndarray
    t: float = 0.0

    @classmethod
    def initial(cls, base: PhaseState) -> "VariationalState":
        return cls(base, np.eye(4), np.eye(2), 0.0)

    def pack(self) -> np.ndarray:
        return np.concatenate([self.base.as_planar(), self.stm.ravel(), self.vstm.ravel()])

    @classmethod
    def unpack(cls, y, t=0.0) -> "VariationalState":
        return cls(PhaseState.from_array(y[:4]), y[4:20].reshape(4, 4).copy(),
                   y[20:24].reshape(2, 2).copy(), t)


def propagate_variational(params: SystemParams, config: IntegratorConfig, v0: VariationalState,
                          t_final: float, guard: float = COLLISION_RADIUS) -> VariationalState:
    status, t, y, *_ = _run(kernels.planar_var, kernels.no_event, v0.t, v0.pack(),
                            v0.t + t_final, params.p, config, guard=guard)
    if status == COLLISION:
        raise CollisionApproach(t, PhaseState.from_array(y[:4]), guard)
    return VariationalState.unpack(y, t)


def propagate_spatial_stm(params: SystemParams, config: IntegratorConfig, s0: PhaseState,
                          t_final: float) -> tuple[np.ndarray, np.ndarray]:
    """Reference 6x6 spatial state-transition matrix; returns (state, stm)."""
    y0 = np.concatenate([s0.as_spatial(), np.eye(6).ravel()])
    status, t, y, *_ = _run(kernels.spatial_var, kernels.no_event, 0.0, y0, t_final, params.p, config)
    return y[:6], y[6:].reshape(6, 6)


def propagate_regularized(params: SystemParams, config: IntegratorConfig, r0, tau_final: float) -> Trajectory:
    """Integrate the regularized flow for ``tau_final`` units of fictitious time."""
    p = params.p.copy()
    p[2] = r0.C
    y0 = np.array([r0.Q1, r0.Q2, r0.P1, r0.P2, r0.t_phys])
    status, t, y, n, _, dense = _run(kernels.reg, kernels.no_event, 0.0, y0, tau_final, p, config,
                                     store=True)
    return Trajectory("regularized", params, p, 0.0, t, y0, y, *dense, n)


def next_event(trajectory: Trajectory, event, after: float | None = None):
    """First crossing of ``event`` on ``trajectory`` strictly after ``after``.

    Returns ``(t, state)`` with ``state`` the raw state vector at the event,
    or ``None`` when no crossing occurs before the end of the trajectory.
    """
    reg = trajectory.kind == "regularized"
    fn, direction, value = event_function(event, reg)
    p = trajectory.p.copy()
    p[3] = value
    if after is None:
        after = trajectory.t0 + np.sign(trajectory.t1 - trajectory.t0) * MIN_ADVANCE
    if trajectory.ts.shape[0] == 0:
        return None
    found, t_ev = locate_in_dense(kernels.EVENT_CODES[fn], trajectory.ts, trajectory.hs,
                                  trajectory.yolds, trajectory.Fs, p, direction, float(after))
    if not found:
        return None
    return t_ev, trajectory(t_ev)


@dataclass
class SectionHit:
    """Result of flowing to a section crossing."""
    status: int
    t: float
    y: np.ndarray
    rmin: float
    nsteps: int


def flow_to_section(f, y0, p, config, section, ev_dir, count, t_max, guard=0.0, t0=0.0):
    """Integrate ``f`` from ``y0`` until the ``count``-th crossing of ``section``."""
    status, t, y, n, rmin, _ = _run(f, section, t0, y0, t0 + t_max, p, config, ev_dir, count, guard)
    return SectionHit(status, t, y, rmin, n)
