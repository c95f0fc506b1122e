import json

import pytest

from h4bp.config import DEFAULT_MU, ConfigError, RunConfig, load_file, resolve


def test_defaults():
    cfg = resolve(None, {"families": ["g"]})
    assert cfg.mu == DEFAULT_MU == 0.00095
    assert cfg.outputDir == "records"
    assert cfg.plot is False


def test_json_keys_mirror_run_config():
    d = RunConfig().to_dict()
    assert set(d) == {"mu", "families", "limits", "integrator", "outputDir", "plot"}
    assert set(d["limits"]) >= {"Cmin", "Cmax", "maxMembers"}
    assert set(d["integrator"]) >= {"relTol", "absTol", "method"}
    json.dumps(d)


def test_precedence_cli_over_file_over_default():
    file_data = {"mu": 0.001, "families": ["g"], "limits": {"Cmin": 1.0, "maxMembers": 40}}
    cfg = resolve(file_data, {"mu": 0.002, "limits": {"maxMembers": 7}})
    assert cfg.mu == 0.002
    assert cfg.limits.maxMembers == 7
    assert cfg.limits.Cmin == 1.0
    assert cfg.limits.ds0 == RunConfig().limits.ds0


def test_all_errors_reported_together():
    bad = {"mu": -1, "families": ["zz"], "limits": {"Cmin": 3, "Cmax": 1, "maxMembers": 0},
           "integrator": {"relTol": 0, "method": "RK4"}, "outputDir": "", "plot": "yes",
           "colour": 1}
    with pytest.raises(ConfigError) as ei:
        resolve(bad)
    probs = ei.value.problems
    for key in ("mu", "families", "Cmin", "maxMembers", "relTol", "method", "outputDir",
                "plot", "colour"):
        assert any(key in p for p in probs), key


def test_short_family_needs_subcritical_mass():
    with pytest.raises(ConfigError):
        resolve({"mu": 0.02, "families": ["short"]})
    with pytest.raises(ConfigError):
        resolve({"mu": 0.0, "families": ["long"]})


def test_load_file_errors(tmp_path):
    p = tmp_path / "c.json"
    p.write_text("{oops")
    data, probs = load_file(p)
    assert probs and "JSON" in probs[0]
    data, probs = load_file(tmp_path / "nope.json")
    assert probs


def test_limits_map_to_continuation():
    cfg = resolve({"families": ["g"], "limits": {"Cmin": 2.0, "maxMembers": 9}})
    lim = cfg.limits.for_family("g")
    assert lim.c_min == 2.0 and lim.max_members == 9
    assert cfg.integrator.build().method == "DOP853"
