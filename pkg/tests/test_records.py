import csv
import json
import math

import pytest

from h4bp.dynamics import make_params
from h4bp.families import family_limits, trace_family
from h4bp.records import (MEMBER_COLUMNS, CorruptRecordError, check_manifest, members_csv,
                          read_record, record_dirs, same_member, write_record)

P = make_params(0.00095)


@pytest.fixture(scope="module")
def small():
    return trace_family(P, "f", family_limits("f", max_members=8))


def test_round_trip_is_exact(tmp_path, small):
    write_record(tmp_path / "f", small)
    back = read_record(tmp_path / "f")
    assert len(back.members) == len(small.members)
    assert all(same_member(a, b) for a, b in zip(small.members, back.members))
    assert [e.as_dict() for e in back.events] == [e.as_dict() for e in small.events]
    assert members_csv(back) == (tmp_path / "f" / "members.csv").read_text()


def test_columns_and_digits(tmp_path, small):
    write_record(tmp_path, small)
    with open(tmp_path / "members.csv", newline="") as f:
        rows = list(csv.reader(f))
    assert tuple(rows[0]) == MEMBER_COLUMNS
    for row in rows[1:]:
        for cell in row[1:11]:
            v = float(cell)
            assert float(format(v, ".17g")) == v
            mant = cell.lstrip("-").split("e")[0].replace(".", "").lstrip("0")
            assert len(mant) <= 17
        assert row[12] in ("true", "false")


def test_manifest_checksums(tmp_path, small):
    write_record(tmp_path, small, {"mu": P.mu})
    assert check_manifest(tmp_path) == []
    m = json.loads((tmp_path / "manifest.json").read_text())
    assert m["config"] == {"mu": P.mu}
    assert set(m["versions"]) >= {"h4bp", "numpy", "scipy", "numba"}
    text = (tmp_path / "members.csv").read_text()
    (tmp_path / "members.csv").write_text(text.replace("\n1,", "\n1, ", 1))
    assert any("members.csv" in p for p in check_manifest(tmp_path))


def test_extra_file_is_reported(tmp_path, small):
    write_record(tmp_path, small)
    (tmp_path / "stray.txt").write_text("x")
    assert any("stray.txt" in p for p in check_manifest(tmp_path))


@pytest.mark.parametrize("damage", ["drop_members", "bad_number", "bad_bool", "bad_events",
                                    "short_table", "bad_manifest"])
def test_corruption_detected(tmp_path, small, damage):
    write_record(tmp_path, small)
    mf = tmp_path / "members.csv"
    if damage == "drop_members":
        mf.unlink()
    elif damage == "bad_number":
        mf.write_text(mf.read_text().replace(",", ",x", 2))
    elif damage == "bad_bool":
        mf.write_text(mf.read_text().replace("false", "maybe", 1))
    elif damage == "bad_events":
        (tmp_path / "events.json").write_text("{not json")
    elif damage == "short_table":
        mf.write_text("".join(mf.read_text().splitlines(True)[:-1]))
    elif damage == "bad_manifest":
        (tmp_path / "manifest.json").write_text("[]")
    with pytest.raises(CorruptRecordError):
        read_record(tmp_path)


def test_record_discovery(tmp_path, small):
    write_record(tmp_path / "a", small)
    write_record(tmp_path / "b", small)
    (tmp_path / "empty").mkdir()
    assert [p.name for p in record_dirs(tmp_path)] == ["a", "b"]
    assert record_dirs(tmp_path / "a") == [tmp_path / "a"]
    assert record_dirs(tmp_path / "missing") == []


def test_non_finite_values_survive(tmp_path, small):
    from dataclasses import replace
    rec = replace(small, members=[replace(small.members[0], av=math.nan)])
    write_record(tmp_path, rec)
    assert math.isnan(read_record(tmp_path).members[0].av)
