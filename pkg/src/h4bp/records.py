"""On-disk family records: member tables (CSV), event logs and manifests (JSON)."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import platform
from pathlib import Path

from .continuation import Event, FamilyRecord
from .dynamics import PhaseState
from .orbits import PeriodicOrbit

MEMBER_COLUMNS = ("index", "C", "x0", "y0", "vx0", "vy0", "T", "a_h", "a_v", "half_a", "half_d",
                  "symmetry", "collision")
MEMBERS_FILE = "members.csv"
EVENTS_FILE = "events.json"
MANIFEST_FILE = "manifest.json"
FORMAT_VERSION = 1


class CorruptRecordError(ValueError):
    """A record directory is missing files or holds unparsable content."""


def _num(x: float) -> str:
    return format(float(x), ".17g")


def _json_num(x):
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


def members_csv(record: FamilyRecord) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(MEMBER_COLUMNS)
    for i, m in enumerate(record.members):
        s = m.ic
        w.writerow([i, _num(m.C), _num(s.x), _num(s.y), _num(s.vx), _num(s.vy), _num(m.T),
                    _num(m.ah), _num(m.av), _num(m.half_a), _num(m.half_d), m.symmetry,
                    "true" if m.collision else "false"])
    return buf.getvalue()


def events_json(record: FamilyRecord) -> str:
    items = []
    for e in record.events:
        d = e.as_dict()
        for k in ("C", "level", "x0", "T"):
            d[k] = _json_num(d[k])
        items.append(d)
    return json.dumps(items, indent=1, allow_nan=False) + "\n"


def sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def versions() -> dict:
    import numba
    import numpy
    import scipy

    from . import __version__
    return {"h4bp": __version__, "python": platform.python_version(), "numpy": numpy.__version__,
            "scipy": scipy.__version__, "numba": numba.__version__}


def family_meta(record: FamilyRecord) -> dict:
    return {"name": record.name, "mu": record.mu, "axis": record.axis,
            "crossings": record.crossings, "members": len(record.members),
            "truncated": record.truncated, "termination": record.termination}


def write_manifest(directory: Path, config: dict | None = None, family: dict | None = None) -> dict:
    """(Re)write ``manifest.json`` with checksums of every other file in ``directory``."""
    directory = Path(directory)
    old = {}
    if (directory / MANIFEST_FILE).exists():
        try:
            old = json.loads((directory / MANIFEST_FILE).read_text())
        except (OSError, ValueError):
            old = {}
    files = sorted(p.name for p in directory.iterdir() if p.is_file() and p.name != MANIFEST_FILE)
    manifest = {
        "format": FORMAT_VERSION,
        "config": config if config is not None else old.get("config"),
        "family": family if family is not None else old.get("family"),
        "versions": versions(),
        "checksums": {name: sha256(directory / name) for name in files},
    }
    _atomic_write(directory / MANIFEST_FILE, json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    return manifest


def _atomic_write(path: Path, text: str):
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def write_record(directory, record: FamilyRecord, config: dict | None = None) -> Path:
    """Write one family's files; raises ``OSError`` when the directory is unwritable."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    _atomic_write(directory / MEMBERS_FILE, members_csv(record))
    _atomic_write(directory / EVENTS_FILE, events_json(record))
    write_manifest(directory, config, family_meta(record))
    return directory


def _parse_bool(s: str) -> bool:
    if s == "true":
        return True
    if s == "false":
        return False
    raise ValueError(f"not a boolean: {s!r}")


def read_record(directory) -> FamilyRecord:
    """Load a record written by :func:`write_record`.

    Raises :class:`CorruptRecordError` for missing files, malformed rows or
    events, and member counts that disagree with the manifest.
    """
    directory = Path(directory)
    paths = [directory / n for n in (MEMBERS_FILE, EVENTS_FILE, MANIFEST_FILE)]
    missing = [p.name for p in paths if not p.is_file()]
    if missing:
        raise CorruptRecordError(f"{directory}: missing {', '.join(missing)}")
    try:
        manifest = json.loads(paths[2].read_text())
        meta = manifest["family"]
        axis, crossings = meta["axis"], int(meta["crossings"])
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise CorruptRecordError(f"{paths[2]}: {exc}") from None
    members = []
    try:
        with open(paths[0], newline="") as f:
            rows = list(csv.reader(f))
        if not rows or tuple(rows[0]) != MEMBER_COLUMNS:
            raise ValueError("unexpected header")
        for n, row in enumerate(rows[1:]):
            if len(row) != len(MEMBER_COLUMNS) or int(row[0]) != n:
                raise ValueError(f"row {n + 1} is malformed")
            v = [float(x) for x in row[1:11]]
            members.append(PeriodicOrbit(
                C=v[0], ic=PhaseState.planar(v[1], v[2], v[3], v[4]), T=v[5], ah=v[6], av=v[7],
                half_a=v[8], half_d=v[9], symmetry=row[11], collision=_parse_bool(row[12]),
                axis=axis, crossings=crossings))
    except (OSError, ValueError) as exc:
        raise CorruptRecordError(f"{paths[0]}: {exc}") from None
    try:
        raw = json.loads(paths[1].read_text())
        if not isinstance(raw, list):
            raise ValueError("events must be a JSON array")
        events = [Event.from_dict({k: (math.nan if v is None and k in ("x0", "T") else v)
                                   for k, v in d.items()}) for d in raw]
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise CorruptRecordError(f"{paths[1]}: {exc}") from None
    if int(meta.get("members", len(members))) != len(members):
        raise CorruptRecordError(f"{directory}: manifest lists {meta.get('members')} members, "
                                 f"table has {len(members)}")
    return FamilyRecord(name=meta["name"], mu=float(meta["mu"]), members=members, events=events,
                        axis=axis, crossings=crossings, truncated=bool(meta.get("truncated")),
                        termination=meta.get("termination", ""))


def check_manifest(directory) -> list[str]:
    """Files whose checksum disagrees with the manifest (or that it does not list)."""
    directory = Path(directory)
    try:
        manifest = json.loads((directory / MANIFEST_FILE).read_text())
        sums = manifest["checksums"]
    except (OSError, ValueError, KeyError, TypeError) as exc:
        return [f"{MANIFEST_FILE}: unreadable ({exc})"]
    problems = []
    for name, digest in sorted(sums.items()):
        p = directory / name
        if not p.is_file():
            problems.append(f"{name}: missing")
        elif sha256(p) != digest:
            problems.append(f"{name}: checksum mismatch")
    for p in sorted(directory.iterdir()):
        if p.is_file() and p.name != MANIFEST_FILE and p.name not in sums:
            problems.append(f"{p.name}: not covered by the manifest")
    return problems


def record_dirs(root) -> list[Path]:
    """Family directories below ``root`` (or ``root`` itself when it is one)."""
    root = Path(root)
    if (root / MEMBERS_FILE).exists() or (root / MANIFEST_FILE).exists():
        return [root]
    if not root.is_dir():
        return []
    return sorted(p for p in root.iterdir() if p.is_dir() and
                  ((p / MEMBERS_FILE).exists() or (p / MANIFEST_FILE).exists()))


def same_member(a: PeriodicOrbit, b: PeriodicOrbit) -> bool:
    """Equality over the persisted fields."""
    fa = (a.C, *a.state, a.T, a.ah, a.av, a.half_a, a.half_d, a.symmetry, a.collision)
    fb = (b.C, *b.state, b.T, b.ah, b.av, b.half_a, b.half_d, b.symmetry, b.collision)
    return all((x == y) or (isinstance(x, float) and math.isnan(x) and math.isnan(y))
               for x, y in zip(fa, fb))


__all__ = ["MEMBER_COLUMNS", "CorruptRecordError", "write_record", "read_record", "write_manifest",
           "check_manifest", "record_dirs", "members_csv", "events_json", "same_member"]
