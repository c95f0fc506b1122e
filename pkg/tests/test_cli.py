import json

import pytest

from h4bp.cli import main


def run(capsys, *argv):
    try:
        code = main(list(argv))
    except SystemExit as exc:
        code = exc.code
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture(scope="module")
def record_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("rec")
    assert main(["trace", "--family", "f,g", "--max-members", "12", "--out", str(d)]) == 0
    return d


def test_info_reference_mass(capsys):
    code, out, _ = run(capsys, "info")
    assert code == 0
    for token in ("mu0", "L1", "L3", "short period", "long period", "resonances"):
        assert token in out
    assert "mu - mu0" in out
    assert out.count("\n  10 ") == 1


def test_info_json(capsys):
    code, out, _ = run(capsys, "info", "--mu", "0.00095", "--json")
    rep = json.loads(out)
    assert code == 0
    assert [r["k"] for r in rep["resonances"]] == list(range(1, 11))
    assert rep["periods"]["short"] == pytest.approx(6.35271, abs=1e-4)


def test_info_without_secondaries(capsys):
    code, out, _ = run(capsys, "info", "--mu", "0")
    assert code == 0
    assert "L3/L4 absent" in out


def test_info_at_critical_mass(capsys):
    code, out, _ = run(capsys, "info", "--mu", "0.011942")
    assert code == 0
    assert "D ~ 0" in out


def test_info_above_critical_mass(capsys):
    code, out, _ = run(capsys, "info", "--mu", "0.05")
    assert code == 0
    assert "complex" in out


@pytest.mark.parametrize("argv", [["info", "--mu", "abc"], ["info", "--mu", "0.7"],
                                  ["trace", "--family", "nope"], ["trace"], ["bogus"],
                                  ["trace", "--family", "g", "--c-min", "3", "--c-max", "1"],
                                  ["verify", "--criterion", "nope"]])
def test_bad_arguments_exit_2(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 2
    assert err


def test_config_errors_listed(capsys, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"mu": -3, "families": ["x"], "plot": 1}))
    code, _, err = run(capsys, "trace", "--config", str(cfg))
    assert code == 2
    assert "mu" in err and "families" in err and "plot" in err


def test_cli_overrides_config(capsys, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"families": ["f"], "limits": {"maxMembers": 50},
                               "outputDir": str(tmp_path / "from_file")}))
    code, _, _ = run(capsys, "trace", "--config", str(cfg), "--max-members", "4",
                     "--out", str(tmp_path / "cli"))
    assert code == 0
    m = json.loads((tmp_path / "cli" / "f" / "manifest.json").read_text())
    assert m["config"]["limits"]["maxMembers"] == 4
    assert m["family"]["members"] == 4
    assert not (tmp_path / "from_file").exists()


def test_trace_outputs(record_dir):
    for fam in ("f", "g"):
        d = record_dir / fam
        assert {p.name for p in d.iterdir()} == {"members.csv", "events.json", "manifest.json"}
        assert (d / "members.csv").read_text().startswith(
            "index,C,x0,y0,vx0,vy0,T,a_h,a_v,half_a,half_d,symmetry,collision\n")


def test_trace_failure_exit_3(capsys, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"families": ["g"], "integrator": {"maxSteps": 3}}))
    code, _, err = run(capsys, "trace", "--config", str(cfg), "--out", str(tmp_path / "o"))
    assert code == 3
    assert "g" in err


def test_unwritable_output_exit_4(capsys, tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    code, _, _ = run(capsys, "trace", "--family", "f", "--out", str(blocker / "sub"))
    assert code == 4


def test_plot_writes_figures(capsys, record_dir, tmp_path):
    code, _, _ = run(capsys, "plot", str(record_dir), "--out", str(tmp_path))
    assert code == 0
    for fam in ("f", "g"):
        assert len(list((tmp_path / fam).glob("*.svg"))) == 4


def test_plot_in_place_keeps_manifest_valid(capsys, tmp_path):
    assert main(["trace", "--family", "f", "--max-members", "5", "--out", str(tmp_path)]) == 0
    code, _, _ = run(capsys, "plot", str(tmp_path / "f"))
    assert code == 0
    from h4bp.records import check_manifest
    assert check_manifest(tmp_path / "f") == []


def test_plot_empty_record_warns(capsys, tmp_path, record_dir):
    import shutil
    d = tmp_path / "f"
    shutil.copytree(record_dir / "f", d)
    lines = (d / "members.csv").read_text().splitlines(True)
    (d / "members.csv").write_text(lines[0])
    m = json.loads((d / "manifest.json").read_text())
    m["family"]["members"] = 0
    (d / "manifest.json").write_text(json.dumps(m))
    code, _, err = run(capsys, "plot", str(d))
    assert code == 0
    assert "warning" in err


def test_plot_corrupt_or_missing_exit_5(capsys, tmp_path, record_dir):
    code, _, _ = run(capsys, "plot", str(tmp_path / "nothing"))
    assert code == 5
    import shutil
    d = tmp_path / "g"
    shutil.copytree(record_dir / "g", d)
    (d / "events.json").write_text("garbage")
    code, _, _ = run(capsys, "plot", str(d))
    assert code == 5


def test_verify_single_criterion(capsys):
    code, out, _ = run(capsys, "verify", "--criterion", "mu0", "--json")
    rep = json.loads(out)
    assert code == 0
    assert rep["criteria"] == {"mu0": True}


def test_verify_failure_exit_nonzero(capsys):
    code, out, _ = run(capsys, "verify", "--criterion", "table1")
    assert code != 0
    assert "FAIL table1" in out


def test_verify_detects_tampering(capsys, tmp_path, record_dir):
    import shutil
    d = tmp_path / "rec"
    shutil.copytree(record_dir, d)
    code, out, _ = run(capsys, "verify", str(d), "--criterion", "records")
    assert code == 0, out
    csvp = d / "f" / "members.csv"
    csvp.write_text(csvp.read_text().replace("\n3,", "\n3,1", 1))
    code, out, _ = run(capsys, "verify", str(d), "--criterion", "records")
    assert code != 0
    assert "checksum" in out


def test_verify_missing_dir_exit_4(capsys, tmp_path):
    code, _, _ = run(capsys, "verify", str(tmp_path / "none"))
    assert code == 4
