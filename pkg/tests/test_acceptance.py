"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line."""

import pytest

from h4bp import verify


def _report(capsys, name, checks):
    ok = all(c.passed for c in checks)
    with capsys.disabled():
        for c in checks:
            if not c.passed:
                print(f"\n    failed {c.name}: value={c.value} target={c.target} "
                      f"tol={c.tolerance} {c.detail}", end="")
        print(f"\n{'PASS' if ok else 'FAIL'} {name}")
    return ok, [c.name for c in checks if not c.passed]


@pytest.mark.parametrize("criterion", list(verify.CRITERIA))
def test_criterion(criterion, families, capsys):
    checks = verify.CRITERIA[criterion](families)
    assert checks
    ok, failed = _report(capsys, criterion, checks)
    assert ok, failed


def test_records_written_by_trace_verify(families, tmp_path, capsys):
    from h4bp.records import write_record
    for name in ("f", "a"):
        write_record(tmp_path / name, families.family(name))
    checks, loaded = verify.check_records(tmp_path)
    assert set(loaded) == {"f", "a"}
    ok, failed = _report(capsys, "records", checks)
    assert ok, failed
