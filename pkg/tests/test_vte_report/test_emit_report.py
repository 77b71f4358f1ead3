import json

import pandas as pd
import pytest
from vte_benchmark import BenchmarkResult, CellResult, RepetitionRecord
from vte_errors import VteInputError
from vte_report import emit_report, emit_reports, format_cell, load_result

@pytest.fixture
def result():
    """Creates a two-method, two-size result with one failed repetition."""

    def runs(estimates, truth):
        """Builds repetition records, None marking a failure."""
        records = []
        for rep, estimate in enumerate(estimates):
            if estimate is None:
                records.append(RepetitionRecord(rep, rep, error="solver failed", seconds=0.1))
            else:
                records.append(RepetitionRecord(rep, rep, estimate, abs(estimate - truth), seconds=0.2))
        return records

    cells = [
        CellResult("proposed", 500, 3.0, runs([2.5, 3.2, 3.1], 3.0)),
        CellResult("naive", 500, 3.0, runs([6.5, None, 7.0], 3.0)),
        CellResult("proposed", 1000, 3.0, runs([2.9, 3.05, 3.0], 3.0)),
        CellResult("naive", 1000, 3.0, runs([6.8, 6.9, 7.1], 3.0)),
    ]

    return BenchmarkResult({"estimand": "vte", "reps": 3}, cells)

def test_json_round_trip(result, tmp_path):
    """Test if a JSON report loads back to an equal result"""
    path = emit_report(result, "json", tmp_path / "results.json")

    assert load_result(path) == result

def test_json_summaries(result, tmp_path):
    """Test if the JSON carries MAE, SE and exclusions that match the raw runs"""
    emit_report(result, "json", tmp_path / "results.json")
    payload = json.loads((tmp_path / "results.json").read_text(encoding="utf-8"))
    naive = payload["cells"][1]

    assert naive["excluded"] == 1
    assert naive["mae"] == pytest.approx((3.5 + 4.0) / 2, abs=1e-12)
    assert naive["runs"][1]["error"] == "solver failed"

def test_csv_table(result, tmp_path):
    """Test if the CSV has one row per method with "mean (se)" cells"""
    emit_report(result, "csv", tmp_path / "results.csv")
    table = pd.read_csv(tmp_path / "results.csv")

    assert table["method"].tolist() == ["proposed", "naive"]
    assert table.loc[0, "n=500"] == format_cell(result.cell("proposed", 500).mae, result.cell("proposed", 500).se)
    assert table.loc[1, "excluded_500"] == 1
    assert table.loc[1, "mae_1000"] == pytest.approx(result.cell("naive", 1000).mae)

def test_format_cell():
    """Test if cells use two decimals"""

    assert format_cell(0.354, 0.3349) == "0.35 (0.33)"

def test_plotdata(result, tmp_path):
    """Test if plot data holds the estimates and the truth per method and size"""
    emit_report(result, "plotdata", tmp_path / "plotdata.json")
    payload = json.loads((tmp_path / "plotdata.json").read_text(encoding="utf-8"))

    assert payload["series"]["naive"]["500"] == {"truth": 3.0, "estimates": [6.5, 7.0]}
    assert payload["estimand"] == "vte"

def test_emit_all_formats(result, tmp_path):
    """Test if every format is written into a new directory"""
    paths = emit_reports(result, tmp_path / "out")

    assert sorted(path.name for path in paths) == ["plotdata.json", "results.csv", "results.json"]

def test_unknown_format(result, tmp_path, caplog):
    """Test if an unknown format is rejected"""

    with caplog.at_level("DEBUG"):
        with pytest.raises(VteInputError):
            emit_report(result, "xlsx", tmp_path / "results.xlsx")

    assert "Unknown report format xlsx" in caplog.text

def test_unwritable_path(result, tmp_path):
    """Test if writing into a missing directory raises an I/O error"""

    with pytest.raises(OSError):
        emit_report(result, "json", tmp_path / "missing" / "results.json")

def test_load_malformed(tmp_path):
    """Test if a JSON file without cells is rejected"""
    path = tmp_path / "bad.json"
    path.write_text('{"config": {}}', encoding="utf-8")

    with pytest.raises(VteInputError):
        load_result(path)
