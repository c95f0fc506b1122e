"""Run configuration for the command-line tools.

The JSON form uses the field names of :class:`RunConfig` verbatim::

    {"mu": 0.00095, "families": ["g", "short"],
     "limits": {"Cmin": null, "Cmax": null, "maxMembers": null,
                "ds0": 0.001, "dsMin": 1e-07, "dsMax": 0.05, "newtonBudget": 12},
     "integrator": {"relTol": 2.22e-14, "absTol": 1e-16, "maxStep": null,
                    "method": "DOP853", "maxSteps": 5000000},
     "outputDir": "records", "plot": false}

A null C bound or member cap selects the family's default.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields

from .continuation import FAMILY_NAMES, ContinuationLimits
from .equilibria import mu_critical
from .families import family_limits
from .propagation import IntegratorConfig

DEFAULT_MU = 0.00095
DEFAULT_OUTPUT = "records"


class ConfigError(ValueError):
    def __init__(self, problems: list[str]):
        super().__init__("; ".join(problems))
        self.problems = problems


@dataclass
class Limits:
    Cmin: float | None = None
    Cmax: float | None = None
    maxMembers: int | None = None
    ds0: float = 1e-3
    dsMin: float = 1e-7
    dsMax: float = 0.05
    newtonBudget: int = 12

    def for_family(self, name: str) -> ContinuationLimits:
        return family_limits(name, self.Cmin, self.Cmax, self.maxMembers, ds0=self.ds0,
                             ds_min=self.dsMin, ds_max=self.dsMax,
                             newton_budget=self.newtonBudget)


@dataclass
class Integrator:
    relTol: float = 2.22e-14
    absTol: float = 1e-16
    maxStep: float | None = None
    method: str = "DOP853"
    maxSteps: int = 5_000_000

    def build(self) -> IntegratorConfig:
        return IntegratorConfig(rel_tol=self.relTol, abs_tol=self.absTol,
                                max_step=math.inf if self.maxStep is None else self.maxStep,
                                method=self.method, max_steps=self.maxSteps)


@dataclass
class RunConfig:
    mu: float = DEFAULT_MU
    families: list = field(default_factory=list)
    limits: Limits = field(default_factory=Limits)
    integrator: Integrator = field(default_factory=Integrator)
    outputDir: str = DEFAULT_OUTPUT
    plot: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


def _is_num(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _is_int(v):
    return isinstance(v, int) and not isinstance(v, bool)


def _merge_section(cls, base, data, where, problems):
    if data is None:
        return base
    if not isinstance(data, dict):
        problems.append(f"{where}: expected an object")
        return base
    names = {f.name for f in fields(cls)}
    for k in data:
        if k not in names:
            problems.append(f"{where}.{k}: unknown field")
    values = asdict(base)
    values.update({k: v for k, v in data.items() if k in names})
    return cls(**values)


def merge(base: RunConfig, data: dict, problems: list[str]) -> RunConfig:
    """Overlay the fields present in ``data`` on ``base``; structural problems are appended."""
    if not isinstance(data, dict):
        problems.append("config: expected a JSON object")
        return base
    names = {f.name for f in fields(RunConfig)}
    for k in data:
        if k not in names:
            problems.append(f"{k}: unknown field")
    out = RunConfig(**{f.name: getattr(base, f.name) for f in fields(RunConfig)})
    for k in ("mu", "families", "outputDir", "plot"):
        if k in data:
            setattr(out, k, data[k])
    out.limits = _merge_section(Limits, base.limits, data.get("limits"), "limits", problems)
    out.integrator = _merge_section(Integrator, base.integrator, data.get("integrator"),
                                    "integrator", problems)
    return out


def validate(cfg: RunConfig, problems: list[str] | None = None) -> RunConfig:
    """Raise :class:`ConfigError` listing every invalid field."""
    problems = list(problems or [])
    if not _is_num(cfg.mu) or not 0.0 <= cfg.mu <= 0.5:
        problems.append(f"mu: must be a number in [0, 1/2], got {cfg.mu!r}")
    if not isinstance(cfg.families, list) or not all(isinstance(f, str) for f in cfg.families):
        problems.append("families: expected a list of family names")
    else:
        if not cfg.families:
            problems.append("families: at least one family is required")
        bad = [f for f in cfg.families if f not in FAMILY_NAMES]
        if bad:
            problems.append(f"families: unknown {', '.join(map(repr, bad))}; "
                            f"expected {', '.join(FAMILY_NAMES)}")
        if _is_num(cfg.mu) and any(f in ("short", "long") for f in cfg.families):
            if cfg.mu <= 0.0 or cfg.mu > mu_critical():
                problems.append(f"families: short/long need 0 < mu <= {mu_critical():.6f}")
        if len(set(cfg.families)) != len(cfg.families):
            problems.append("families: duplicate names")
    L = cfg.limits
    for k in ("Cmin", "Cmax"):
        v = getattr(L, k)
        if v is not None and not _is_num(v):
            problems.append(f"limits.{k}: expected a number or null")
    if _is_num(L.Cmin) and _is_num(L.Cmax) and not L.Cmin < L.Cmax:
        problems.append("limits: Cmin must be below Cmax")
    if L.maxMembers is not None and not (_is_int(L.maxMembers) and L.maxMembers >= 1):
        problems.append("limits.maxMembers: expected a positive integer or null")
    if not all(_is_num(v) for v in (L.ds0, L.dsMin, L.dsMax)):
        problems.append("limits: ds0, dsMin and dsMax must be numbers")
    elif not 0 < L.dsMin <= L.ds0 <= L.dsMax:
        problems.append("limits: need 0 < dsMin <= ds0 <= dsMax")
    if not (_is_int(L.newtonBudget) and L.newtonBudget >= 1):
        problems.append("limits.newtonBudget: expected a positive integer")
    I = cfg.integrator
    for k in ("relTol", "absTol"):
        v = getattr(I, k)
        if not (_is_num(v) and v > 0):
            problems.append(f"integrator.{k}: expected a positive number")
    if I.maxStep is not None and not (_is_num(I.maxStep) and I.maxStep > 0):
        problems.append("integrator.maxStep: expected a positive number or null")
    if not (isinstance(I.method, str) and I.method.upper() == "DOP853"):
        problems.append(f"integrator.method: only DOP853 is available, got {I.method!r}")
    if not (_is_int(I.maxSteps) and I.maxSteps >= 1):
        problems.append("integrator.maxSteps: expected a positive integer")
    if not (isinstance(cfg.outputDir, str) and cfg.outputDir):
        problems.append("outputDir: expected a non-empty path")
    if not isinstance(cfg.plot, bool):
        problems.append("plot: expected true or false")
    if problems:
        raise ConfigError(problems)
    return cfg


def load_file(path) -> tuple[dict, list[str]]:
    try:
        with open(path) as f:
            return json.load(f), []
    except OSError as exc:
        return {}, [f"config file: {exc.strerror or exc}"]
    except ValueError as exc:
        return {}, [f"config file: invalid JSON ({exc})"]


def resolve(file_data: dict | None = None, overrides: dict | None = None) -> RunConfig:
    """Defaults, then the config file, then command-line overrides; validated."""
    problems: list[str] = []
    cfg = RunConfig()
    if file_data is not None:
        cfg = merge(cfg, file_data, problems)
    if overrides:
        cfg = merge(cfg, overrides, problems)
    return validate(cfg, problems)


__all__ = ["RunConfig", "Limits", "Integrator", "ConfigError", "resolve", "validate", "merge",
           "load_file", "DEFAULT_MU"]
