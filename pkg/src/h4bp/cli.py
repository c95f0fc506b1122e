"""``h4bp`` command line: info, trace, plot and verify."""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path

from .config import ConfigError, load_file, resolve
from .continuation import FAMILY_NAMES
from .dynamics import DomainError, make_params

EXIT_OK, EXIT_FAIL, EXIT_ARGS, EXIT_TRUNCATED, EXIT_IO, EXIT_CORRUPT = 0, 1, 2, 3, 4, 5

#: |D| below which the L3/L4 spectrum is reported as degenerate
NEAR_DEGENERATE_D = 1e-4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"h4bp: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_ARGS)


def _err(msg):
    print(f"h4bp: {msg}", file=sys.stderr)


def _float(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not math.isfinite(v):
        raise argparse.ArgumentTypeError(f"not a finite number: {text!r}")
    return v


def _families(text):
    return [f.strip() for f in text.split(",") if f.strip()]


# ---------------------------------------------------------------------------
# info

def _fmt_complex(z):
    if abs(z.imag) < 1e-15:
        return f"{z.real:+.10f}"
    return f"{z.real:+.10f}{z.imag:+.10f}i"


def info_report(mu: float) -> dict:
    from .equilibria import (A_coef, D_coef, ComplexSpectrumError, equilibria, frequencies,
                             l3_spectrum_closed_form, mu_critical, resonance_table)
    p = make_params(mu)
    m0 = mu_critical()
    D = D_coef(p)
    rep = {"mu": mu, "d": p.d, "lambda1": p.lambda1, "lambda2": p.lambda2,
           "mu0": m0, "A": A_coef(p), "D": D,
           "near_degenerate": abs(D) < NEAR_DEGENERATE_D and p.lambda1 > 0,
           "regime": ("below mu0" if mu < m0 else "above mu0") if abs(D) >= NEAR_DEGENERATE_D
           else "at mu0",
           "equilibria": [], "periods": None, "resonances": []}
    for e in equilibria(p):
        rep["equilibria"].append({
            "label": e.label, "present": e.present, "position": e.position,
            "classification": e.classification,
            "eigenvalues": None if e.eigenvalues is None else [_fmt_complex(z) for z in e.eigenvalues]})
    if p.lambda1 > 0:
        rep["l3_closed_form"] = [_fmt_complex(complex(z)) for z in l3_spectrum_closed_form(p)]
    try:
        if p.lambda1 <= 0.0:
            raise ComplexSpectrumError("no L3/L4")
        lin = frequencies(p)
        rep["periods"] = {"omega1": lin.omega1, "omega2": lin.omega2,
                          "short": lin.short_period,
                          "long": lin.long_period if math.isfinite(lin.long_period) else None,
                          "ratio": lin.ratio if math.isfinite(lin.ratio) else None}
    except ComplexSpectrumError:
        pass
    for k, mk in resonance_table(10):
        rep["resonances"].append({"k": k, "mu": mk, "mu_minus_mu_k": mu - mk})
    return rep


def print_info(rep: dict, out=None):
    w = (out or sys.stdout).write
    w(f"mu        = {rep['mu']:.12g}\n")
    w(f"d         = {rep['d']:.15g}\n")
    w(f"lambda1   = {rep['lambda1']:.15g}\nlambda2   = {rep['lambda2']:.15g}\n")
    w(f"mu0       = {rep['mu0']:.15g}   (mu - mu0 = {rep['mu'] - rep['mu0']:+.6e}, {rep['regime']})\n")
    w(f"A         = {rep['A']:.15g}\nD         = {rep['D']:.6e}\n")
    if rep["near_degenerate"]:
        w("WARNING: D ~ 0, the L3/L4 frequencies are nearly equal (mu at the critical mass)\n")
    w("\nequilibria\n")
    for e in rep["equilibria"]:
        if not e["present"]:
            w(f"  {e['label']}: absent\n")
            continue
        x, y = e["position"]
        w(f"  {e['label']}: ({x:+.12f}, {y:+.12f})  {e['classification']}\n")
        w(f"      eigenvalues {'  '.join(e['eigenvalues'])}\n")
    if "l3_closed_form" in rep:
        w(f"  L3/L4 closed form: {'  '.join(rep['l3_closed_form'])}\n")
    per = rep["periods"]
    if per is None and rep["lambda1"] <= 0.0:
        w("\nL3/L4 absent: no short/long period motion\n")
    elif per is None:
        w("\nL3/L4 frequencies: complex (no short/long period motion)\n")
    else:
        w(f"\nomega1 = {per['omega1']:.12g}   omega2 = {per['omega2']:.12g}\n")
        long = "inf" if per["long"] is None else f"{per['long']:.10g}"
        w(f"short period 2pi/omega2 = {per['short']:.10g}\nlong period  2pi/omega1 = {long}\n")
    w("\nresonances omega2/omega1 = k\n   k  mu_k                mu - mu_k\n")
    for r in rep["resonances"]:
        w(f"  {r['k']:2d}  {r['mu']:.15f}  {r['mu_minus_mu_k']:+.6e}\n")


def cmd_info(args) -> int:
    try:
        rep = info_report(args.mu)
    except DomainError as exc:
        _err(str(exc))
        return EXIT_ARGS
    if args.json:
        print(json.dumps(rep, indent=1))
    else:
        print_info(rep)
    return EXIT_OK


# ---------------------------------------------------------------------------
# trace

def _overrides(args) -> dict:
    o: dict = {}
    if args.mu is not None:
        o["mu"] = args.mu
    if args.family is not None:
        o["families"] = args.family
    if args.out is not None:
        o["outputDir"] = args.out
    if args.plot:
        o["plot"] = True
    lim = {}
    if args.c_min is not None:
        lim["Cmin"] = args.c_min
    if args.c_max is not None:
        lim["Cmax"] = args.c_max
    if args.max_members is not None:
        lim["maxMembers"] = args.max_members
    if lim:
        o["limits"] = lim
    return o


def load_config(args):
    file_data, problems = (None, [])
    if getattr(args, "config", None):
        file_data, problems = load_file(args.config)
        if problems:
            raise ConfigError(problems)
    return resolve(file_data, _overrides(args))


def _prepare_output(path: Path):
    path.mkdir(parents=True, exist_ok=True)
    probe = path / ".h4bp-write-test"
    probe.write_text("")
    probe.unlink()


def cmd_trace(args) -> int:
    from .branches import BranchError
    from .orbits import CorrectionError
    from .propagation import IntegrationError
    from .records import write_manifest, write_record

    try:
        cfg = load_config(args)
    except ConfigError as exc:
        for p in exc.problems:
            _err(f"config: {p}")
        return EXIT_ARGS
    out = Path(cfg.outputDir)
    try:
        _prepare_output(out)
    except OSError as exc:
        _err(f"cannot write to {out}: {exc.strerror or exc}")
        return EXIT_IO
    from .families import trace_family
    params = make_params(cfg.mu)
    integ = cfg.integrator.build()
    status = EXIT_OK
    for name in cfg.families:
        t0 = time.perf_counter()
        try:
            rec = trace_family(params, name, cfg.limits.for_family(name), integ)
        except (BranchError, CorrectionError, IntegrationError) as exc:
            _err(f"{name}: seeding failed: {exc}")
            status = EXIT_TRUNCATED
            continue
        d = out / name
        try:
            write_record(d, rec, cfg.to_dict())
            if cfg.plot:
                from .plots import plot_record
                plot_record(rec, d, integ)
                write_manifest(d)
        except OSError as exc:
            _err(f"cannot write {d}: {exc.strerror or exc}")
            return EXIT_IO
        flag = " TRUNCATED" if rec.truncated else ""
        print(f"{name}: {len(rec.members)} members, {len(rec.events)} events, "
              f"C in [{min((m.C for m in rec.members), default=math.nan):.6g}, "
              f"{max((m.C for m in rec.members), default=math.nan):.6g}], "
              f"{rec.termination}{flag} ({time.perf_counter() - t0:.1f} s) -> {d}")
        if rec.truncated:
            status = EXIT_TRUNCATED
    return status


# ---------------------------------------------------------------------------
# plot

def cmd_plot(args) -> int:
    from .records import CorruptRecordError, read_record, record_dirs, write_manifest
    root = Path(args.records)
    dirs = record_dirs(root)
    if not dirs:
        _err(f"no family records under {root}")
        return EXIT_CORRUPT
    try:
        records = [(d, read_record(d)) for d in dirs]
    except CorruptRecordError as exc:
        _err(f"corrupt record: {exc}")
        return EXIT_CORRUPT
    from .plots import plot_record
    for d, rec in records:
        target = d if args.out is None else (
            Path(args.out) / d.name if len(records) > 1 else Path(args.out))
        try:
            target.mkdir(parents=True, exist_ok=True)
            if not rec.members:
                _err(f"warning: record {rec.name} has no members; writing empty axes")
            paths = plot_record(rec, target)
            if target == d:
                write_manifest(d)
        except OSError as exc:
            _err(f"cannot write {target}: {exc.strerror or exc}")
            return EXIT_IO
        print(f"{rec.name}: " + ", ".join(str(p) for p in paths))
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify

def cmd_verify(args) -> int:
    from . import verify
    crit = args.criterion or None
    if crit:
        unknown = [c for c in crit if c not in verify.CRITERIA and c != "records"]
        if unknown:
            _err(f"unknown criterion {', '.join(unknown)}; expected "
                 f"{', '.join([*verify.CRITERIA, 'records'])}")
            return EXIT_ARGS
    if args.records is not None and not Path(args.records).exists():
        _err(f"{args.records}: no such directory")
        return EXIT_IO
    if crit and "records" in crit and args.records is None:
        _err("the records criterion needs a record directory")
        return EXIT_ARGS
    checks = verify.run(crit, args.records)
    summary = verify.summary(checks)
    ok = all(summary.values())
    if args.json:
        print(json.dumps({"passed": ok, "criteria": summary,
                          "checks": [c.as_dict() for c in checks]}, indent=1))
    else:
        for c in checks:
            val = "" if c.value is None else f" value={c.value:.12g}"
            tgt = "" if c.target is None else f" target={c.target:.12g}"
            tol = "" if c.tolerance is None else f" tol={c.tolerance:.3g}"
            det = f"  [{c.detail}]" if c.detail else ""
            print(f"  {'PASS' if c.passed else 'FAIL'} {c.criterion}: {c.name}{val}{tgt}{tol}{det}")
        for name, passed in summary.items():
            print(f"{'PASS' if passed else 'FAIL'} {name}")
    return EXIT_OK if ok else EXIT_FAIL


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="h4bp", description="Periodic orbit families of the planar Hill four-body problem.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("info", help="equilibria, linear spectra and resonances at a mass parameter")
    p.add_argument("--mu", type=_float, default=0.00095)
    p.add_argument("--json", action="store_true", help="print the report as JSON")
    p.set_defaults(func=cmd_info)

    p = sub.add_parser("trace", help="continue families and write their records")
    p.add_argument("--mu", type=_float)
    p.add_argument("--family", type=_families,
                   help=f"comma-separated names from {', '.join(FAMILY_NAMES)}")
    p.add_argument("--c-min", type=_float)
    p.add_argument("--c-max", type=_float)
    p.add_argument("--max-members", type=int)
    p.add_argument("--out", help="output directory (one subdirectory per family)")
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--plot", action="store_true", help="also write the SVG figures")
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("plot", help="SVG figures of stored records")
    p.add_argument("records", help="a family record directory or a directory of them")
    p.add_argument("--out", help="write the figures here instead of next to the records")
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("verify", help="acceptance checks; recomputes when no records are given")
    p.add_argument("records", nargs="?", help="record directory to check and reuse")
    p.add_argument("--criterion", action="append",
                   help="run only this criterion (repeatable)")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_verify)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
