import json

import pandas as pd
import pytest
from vte_cli import USAGE_ERROR, build_parser, main, resolve_config

@pytest.fixture
def simulated_csv(tmp_path):
    """Returns a dynamic builder of small synthetic CSV files."""

    def _simulated_csv(*extra):
        """Writes a synthetic dataset through the simulate command and returns its path."""
        path = tmp_path / "synthetic.csv"
        status = main(["simulate", "--n", "80", "--d", "3", "--seed", "4", "--out", str(path), *extra])
        assert status == 0

        return path

    return _simulated_csv

def test_simulate_writes_csv(simulated_csv):
    """Test if simulate writes covariates, treatment and outcome columns"""
    frame = pd.read_csv(simulated_csv())

    assert list(frame.columns) == ["x1", "x2", "x3", "a", "y"]
    assert len(frame) == 80
    assert set(frame["a"].unique()) <= {0, 1}

def test_simulate_external_v(simulated_csv):
    """Test if --external-v appends a conditioning column"""
    frame = pd.read_csv(simulated_csv("--external-v"))

    assert "v1" in frame.columns

def test_simulate_writes_config(simulated_csv):
    """Test if simulate records its generator settings next to the CSV"""
    path = simulated_csv()
    config = json.loads(path.with_name("synthetic.config.json").read_text(encoding="utf-8"))

    assert (config["n"], config["d"], config["seed"]) == (80, 3, 4)
    assert config["conditioning"] == "none"

def test_estimate_writes_config(simulated_csv, tmp_path):
    """Test if estimate --out records the resolved settings next to the estimate"""
    out = tmp_path / "estimate.json"

    status = main(["estimate", "--data", str(simulated_csv()), "--method", "naive", "--seed", "7", "--out", str(out)])
    config = json.loads((tmp_path / "estimate.config.json").read_text(encoding="utf-8"))

    assert status == 0
    assert config["method"] == "naive"
    assert config["seed"] == 7
    assert config["data"].endswith("synthetic.csv")

def test_estimate_naive_on_csv(simulated_csv, capsys):
    """Test if estimate prints the naive estimate as JSON"""
    path = simulated_csv()
    frame = pd.read_csv(path)

    status = main(["estimate", "--data", str(path), "--method", "naive"])
    output = json.loads(capsys.readouterr().out)

    expected = frame.loc[frame["a"] == 1, "y"].var(ddof=0) + frame.loc[frame["a"] == 0, "y"].var(ddof=0)
    assert status == 0
    assert output["method"] == "naive"
    assert output["estimate"] == pytest.approx(expected, rel=1e-9)

def test_estimate_proposed_writes_report(simulated_csv, capsys, tmp_path):
    """Test if the proposed estimator reports its decomposition and writes --out"""
    out = tmp_path / "estimate.json"

    status = main(["estimate", "--data", str(simulated_csv()), "--out", str(out)])
    printed = json.loads(capsys.readouterr().out)

    assert status == 0
    assert printed == json.loads(out.read_text(encoding="utf-8"))
    assert printed["estimand"] == "vte"
    assert printed["n"] == 80
    assert printed["estimate"] == pytest.approx(printed["cate_variance"] + printed["exogenous"], abs=1e-8)

def test_benchmark_writes_outputs(tmp_path):
    """Test if benchmark writes every report and the resolved config"""
    out = tmp_path / "bench"

    status = main(["benchmark", "--methods", "naive,match_euclid", "--sizes", "60", "--reps", "2",
                   "--d", "3", "--out", str(out)])

    assert status == 0
    assert sorted(path.name for path in out.iterdir()) == ["config.json", "plotdata.json", "results.csv", "results.json"]
    config = json.loads((out / "config.json").read_text(encoding="utf-8"))
    assert config["sizes"] == [60]
    assert config["methods"] == ["naive", "match_euclid"]

def test_report_reformats(tmp_path):
    """Test if report turns a JSON result into a CSV table"""
    out = tmp_path / "bench"
    main(["benchmark", "--methods", "naive", "--sizes", "60", "--reps", "2", "--d", "3",
          "--formats", "json", "--out", str(out)])

    status = main(["report", "--input", str(out / "results.json"), "--format", "csv", "--out", str(tmp_path / "table.csv")])
    table = pd.read_csv(tmp_path / "table.csv")

    assert status == 0
    assert table["method"].tolist() == ["naive"]
    assert "n=60" in table.columns

def test_flags_override_config_file(tmp_path):
    """Test if explicit flags win over values from --config"""
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"reps": 5, "d": 4, "sizes": [100]}), encoding="utf-8")

    args = build_parser().parse_args(["benchmark", "--config", str(config), "--reps", "2"])
    cfg = resolve_config(args)

    assert cfg.reps == 2
    assert cfg.d == 4
    assert cfg.sizes == (100,)

def test_unknown_config_key(tmp_path, caplog):
    """Test if a config file with an unknown key exits with a usage error"""
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"repetitions": 5}), encoding="utf-8")

    with caplog.at_level("DEBUG"):
        status = main(["benchmark", "--config", str(config), "--out", str(tmp_path / "bench")])

    assert status == USAGE_ERROR
    assert "benchmark failed: Unknown config keys: ['repetitions']" in caplog.text

def test_missing_data_file(tmp_path):
    """Test if a missing dataset exits with a usage error"""

    assert main(["estimate", "--data", str(tmp_path / "missing.csv")]) == USAGE_ERROR

def test_condition_source_mismatch(simulated_csv):
    """Test if a covariate condition with an external conditioning source is rejected"""
    path = simulated_csv("--external-v")

    status = main(["estimate", "--data", str(path), "--conditioning", "v1", "--conditioning-source", "external",
                   "--estimand", "cvte", "--condition", "x2=0"])

    assert status == USAGE_ERROR

def test_condition_without_cvte():
    """Test if a condition for the vte estimand is rejected"""

    assert main(["estimate", "--n", "50", "--d", "2", "--condition", "x2=0"]) == USAGE_ERROR
