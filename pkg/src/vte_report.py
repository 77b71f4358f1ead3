"""Writes benchmark results as JSON, a method-by-size CSV table, or box-plot data."""

import json
from pathlib import Path

import pandas as pd

from logger import get_logger
from vte_benchmark import BenchmarkResult, CellResult, RepetitionRecord
from vte_errors import VteInputError

logger = get_logger(__name__)

FORMATS = ("json", "csv", "plotdata")
FILE_NAMES = {"json": "results.json", "csv": "results.csv", "plotdata": "plotdata.json"}


def _finite_or_none(value):
    return None if value != value else value


def result_to_dict(result):
    """Full nested form of a BenchmarkResult, summaries included."""
    cells = []

    for cell in result.cells:
        cells.append({
            "method": cell.method,
            "size": cell.size,
            "truth": cell.truth,
            "mae": _finite_or_none(cell.mae),
            "se": cell.se,
            "estimate_sd": cell.estimate_sd,
            "excluded": cell.excluded,
            "runs": [
                {"rep": run.rep, "seed": run.seed, "estimate": run.estimate,
                 "abs_error": run.abs_error, "error": run.error, "seconds": run.seconds}
                for run in cell.runs
            ],
        })

    return {"config": result.config, "cells": cells}


def result_from_dict(values):
    """Rebuilds a BenchmarkResult; summaries are recomputed from the runs."""
    try:
        cells = [
            CellResult(cell["method"], int(cell["size"]), float(cell["truth"]),
                       [RepetitionRecord(**run) for run in cell["runs"]])
            for cell in values["cells"]
        ]
        return BenchmarkResult(values["config"], cells)
    except (KeyError, TypeError) as exc:
        logger.error(f"Result file is missing or has malformed fields: {exc}")
        raise VteInputError(f"Result file is missing or has malformed fields: {exc}") from exc


def format_cell(mean, se):
    """Formats a table cell as "mean (se)" with two decimals."""
    return f"{mean:.2f} ({se:.2f})"


def result_table(result):
    """Method-by-size table: a "mean (se)" column per size plus raw mae/se/excluded columns."""
    sizes = sorted({cell.size for cell in result.cells})
    methods = list(dict.fromkeys(cell.method for cell in result.cells))
    rows = []

    for method in methods:
        row = {"method": method}
        for size in sizes:
            cell = result.cell(method, size)
            row[f"n={size}"] = format_cell(cell.mae, cell.se)
        for size in sizes:
            cell = result.cell(method, size)
            row[f"mae_{size}"] = cell.mae
            row[f"se_{size}"] = cell.se
            row[f"estimate_sd_{size}"] = cell.estimate_sd
            row[f"excluded_{size}"] = cell.excluded
        rows.append(row)

    return pd.DataFrame(rows)


def plot_data(result):
    """Per-method, per-size estimate vectors with the truth, ready for a box plot."""
    series = {}

    for cell in result.cells:
        series.setdefault(cell.method, {})[str(cell.size)] = {"truth": cell.truth, "estimates": cell.estimates}

    return {"estimand": result.config.get("estimand", "vte"), "series": series}


def emit_report(result, fmt, path):
    """Writes one report format to path.

    Args:
        result: A BenchmarkResult.
        fmt: "json", "csv" or "plotdata".
        path: Output file path.

    Returns:
        The Path written.

    Raises:
        VteInputError: For an unknown format.
        OSError: If the file cannot be written.
    """
    if fmt not in FORMATS:
        logger.error(f"Unknown report format {fmt}, choose from {FORMATS}")
        raise VteInputError(f"Unknown report format {fmt}, choose from {FORMATS}")

    path = Path(path)

    try:
        if fmt == "csv":
            result_table(result).to_csv(path, index=False)
        else:
            payload = result_to_dict(result) if fmt == "json" else plot_data(result)
            with open(path, "w", encoding="utf-8") as file:
                json.dump(payload, file, indent=2)
    except OSError as exc:
        logger.error(f"Cannot write {fmt} report to {path}: {exc}")
        raise

    logger.info(f"Wrote {fmt} report to {path}")

    return path


def emit_reports(result, directory, formats=FORMATS):
    """Writes every requested format into directory under its standard file name."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)

    return [emit_report(result, fmt, directory / FILE_NAMES.get(fmt, fmt)) for fmt in formats]


def load_result(path):
    """Reads a JSON report written by emit_report back into a BenchmarkResult."""
    path = Path(path)

    try:
        with open(path, "r", encoding="utf-8") as file:
            values = json.load(file)
    except json.JSONDecodeError as exc:
        logger.error(f"{path} is not a JSON report: {exc}")
        raise VteInputError(f"{path} is not a JSON report: {exc}") from exc

    return result_from_dict(values)
