"""CSV and JSON artifacts for experiment results."""

from __future__ import annotations

import csv
import json
from pathlib import Path

from cfpos.errors import CfposError
from cfpos.experiment import ExperimentResult


class OutputError(CfposError, OSError):
    """Writing an artifact failed."""


def fmt(value: float) -> str:
    return f"{value:.9g}"


def _write_csv(path: Path, header, rows) -> None:
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc.strerror or exc}") from exc


def emit_outputs(result: ExperimentResult, directory) -> list[Path]:
    """Write errors.csv, summary.csv, cdf.csv and config.echo.json into ``directory``."""
    d = Path(directory)
    try:
        d.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OutputError(f"cannot create {d}: {exc.strerror or exc}") from exc
    methods = [m for m in result.config.methods if m in result.summaries]

    error_rows = []
    for s in result.setups:
        for method in result.config.methods:
            if method not in s.errors:
                continue
            for t, e in enumerate(s.errors[method]):
                error_rows.append((s.setup_index, t, method, fmt(e)))
    summary_rows = [(m, fmt(result.summaries[m].mean_m), fmt(result.summaries[m].median_m),
                     fmt(result.summaries[m].p90_m)) for m in methods]
    cdf_rows = [(m, fmt(x), fmt(c)) for m in methods for x, c in zip(*result.cdfs[m])]

    paths = [d / "errors.csv", d / "summary.csv", d / "cdf.csv", d / "config.echo.json"]
    _write_csv(paths[0], ("setup", "test_point", "method", "error_m"), error_rows)
    _write_csv(paths[1], ("method", "mean_m", "median_m", "p90_m"), summary_rows)
    _write_csv(paths[2], ("method", "error_m", "cdf"), cdf_rows)
    echo = {
        "config": result.config.to_dict(),
        "failures": [{"setup": s, "method": m, "message": msg} for s, m, msg in result.failures],
    }
    try:
        paths[3].write_text(json.dumps(echo, indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise OutputError(f"cannot write {paths[3]}: {exc.strerror or exc}") from exc
    return paths
