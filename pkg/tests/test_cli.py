import json

import pytest

from conftest import config_path
from nelsonlab.cli import (ConfigError, dispatch, main, parse_config,
                           resolved_echo)

MINIMAL = json.dumps({
    "model": {"d": 1, "L": 4, "mu": 1.0, "lambda": 0.0,
              "sigma": 2.0, "sigma0": 1.0},
    "grid": {"modes": [0.5, 1.5]},
})


def test_minimal_config_defaults():
    cfg = parse_config(MINIMAL)
    assert cfg.steps == 64
    assert cfg.n_max == 6
    assert cfg.out_format == "csv"
    assert cfg.identity_n_max == [4, 6, 8]
    assert cfg.trials == 100
    assert cfg.weights == [1.0, 1.0]
    assert cfg.alphas == [0j, 0j]
    assert cfg.experiment == "all"


def test_uniform_grid_expansion():
    cfg = parse_config(json.dumps({
        "model": {"d": 1, "L": 4, "mu": 1.0, "lambda": 0.0,
                  "sigma": 2.0, "sigma0": 1.0},
        "grid": {"uniform": {"count": 4, "k_max": 2.0}},
    }))
    assert cfg.modes == [[-1.5], [-0.5], [0.5], [1.5]]
    assert cfg.weights == [1.0] * 4


def test_cutoff_ordering_violation_named():
    bad = MINIMAL.replace('"sigma0": 1.0', '"sigma0": 3.0')
    with pytest.raises(ConfigError) as exc:
        parse_config(bad)
    assert any("sigma0" in v for v in exc.value.violations)


def test_multiple_violations_all_reported():
    doc = json.loads(MINIMAL)
    doc["model"]["sigma0"] = 5.0       # ordering violation
    doc["model"]["lambda"] = -1.0      # sign violation
    doc["grid"]["modes"] = [0.5, 0.5]  # duplicate
    with pytest.raises(ConfigError) as exc:
        parse_config(json.dumps(doc))
    text = " ".join(exc.value.violations)
    assert "sigma0" in text
    assert "lambda" in text
    assert "duplicates" in text
    assert len(exc.value.violations) >= 3


def test_syntax_error_carries_location():
    with pytest.raises(ConfigError) as exc:
        parse_config('{"model": {\n  "d": 1,,\n}}')
    assert "line 2" in exc.value.violations[0]


def test_sampling_bound_violation():
    doc = json.loads(MINIMAL)
    doc["model"]["h"] = 1.0
    doc["grid"]["modes"] = [0.5, 3.2]  # 3.2 * 1.0 >= pi
    doc["model"]["sigma"] = 4.0
    with pytest.raises(ConfigError) as exc:
        parse_config(json.dumps(doc))
    assert any("sampling bound" in v for v in exc.value.violations)


def test_band_coverage_required():
    doc = json.loads(MINIMAL)
    doc["grid"]["modes"] = [0.5]       # nothing in (sigma0, sigma]
    with pytest.raises(ConfigError) as exc:
        parse_config(json.dumps(doc))
    assert any("(sigma0, sigma]" in v for v in exc.value.violations)


def test_sizing_rule_enforced_at_parse():
    doc = json.loads(MINIMAL)
    doc["model"]["lambda"] = 0.1
    doc["model"]["lambda_list"] = [0.1]
    doc["field"] = {"alphas": [[1.0, 0.0], [1.0, 0.0]]}
    with pytest.raises(ConfigError) as exc:
        parse_config(json.dumps(doc))
    assert any("coherent sizing" in v for v in exc.value.violations)


def test_acceptance_config_echo_round_trip(acceptance_cfg):
    echo = resolved_echo(acceptance_cfg)
    assert echo == acceptance_cfg.echo
    assert echo["model"]["L"] == 16
    assert echo["model"]["lambda_list"] == [0.4, 0.2, 0.1, 0.05]
    assert echo["truncation"]["identity_n_max"] == [4, 6, 8]
    json.dumps(echo)  # must be serializable as-is


# ---------------------------------------------------------------------------
# main() and dispatch()

def test_unknown_selector_exits_2(tmp_path):
    cfgfile = tmp_path / "c.json"
    cfgfile.write_text(MINIMAL)
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate", "--config", str(cfgfile)])
    assert exc.value.code == 2


def test_missing_config_file_exits_2():
    assert main(["identity", "--config", "/nonexistent/c.json"]) == 2


def test_invalid_config_exits_2(tmp_path, capsys):
    cfgfile = tmp_path / "c.json"
    cfgfile.write_text(MINIMAL.replace('"sigma0": 1.0', '"sigma0": 9.0'))
    assert main(["identity", "--config", str(cfgfile)]) == 2
    assert "sigma0" in capsys.readouterr().err


def test_dry_run_prints_echo(tmp_path, capsys):
    cfgfile = tmp_path / "c.json"
    cfgfile.write_text(MINIMAL)
    assert main(["identity", "--config", str(cfgfile), "--dry-run"]) == 0
    echo = json.loads(capsys.readouterr().out)
    assert echo["model"]["L"] == 4


def test_identity_run_zero_coupling_exits_0(tmp_path):
    cfgfile = tmp_path / "c.json"
    cfgfile.write_text(MINIMAL)
    out = tmp_path / "out"
    code = main(["identity", "--config", str(cfgfile), "--out", str(out)])
    assert code == 0
    doc = json.loads((out / "identity_report.json").read_text())
    assert all(c["passed"] for c in doc["checks"])


def test_dispatch_writes_expected_files(tmp_path):
    doc = {
        "model": {"d": 1, "L": 4, "mu": 1.0, "lambda": 0.2,
                  "lambda_list": [0.4, 0.2], "sigma": 2.0, "sigma0": 1.0},
        "grid": {"modes": [0.5, 1.5]},
        "truncation": {"n_max": 3, "identity_n_max": [2, 3]},
        "field": {"alphas": [[0.01, 0.0], [0.0, 0.01]]},
        "propagation": {"times": [0.25], "steps": 16},
        "trials": 5,
    }
    cfg = parse_config(json.dumps(doc))
    cfg.out_dir = str(tmp_path / "results")
    code = dispatch(cfg, "all")
    assert code in (0, 1)
    names = {p.name for p in (tmp_path / "results").iterdir()}
    assert {"identity_report.json", "inequalities_report.json",
            "observables.csv", "observables_report.json", "sweep.csv",
            "sweep_report.json"} <= names
    sweep = (tmp_path / "results" / "sweep.csv").read_text().splitlines()
    assert sweep[0] == "lambda,t,err_wv,err_zv,bound_ratio,wall_ms"
    assert len(sweep) == 1 + 2 * 1  # two lambdas, one time


def test_seed_override_changes_echo(tmp_path, capsys):
    cfgfile = tmp_path / "c.json"
    cfgfile.write_text(MINIMAL)
    main(["inequalities", "--config", str(cfgfile), "--dry-run",
          "--seed", "42"])
    echo = json.loads(capsys.readouterr().out)
    assert echo["seed"] == 42
