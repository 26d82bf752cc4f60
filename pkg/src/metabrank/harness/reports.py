"""Writing experiment reports to disk.

Files written by :func:`emit_reports`:

``auc_table.csv``
    One row per (feature_set, learner); for every (hormone, class) problem
    two columns ``<hormone>_<class>_auc`` and ``<hormone>_<class>_std``
    (mean and sample standard deviation of the outer-fold AUCs; empty when
    the cell failed or is absent).
``report.json``
    The full report, including per-fold hyperparameters and ROC points.
``timings.csv``
    ``feature_set,learner,hormone,class,wall_seconds``.  Kept apart from
    the report so reruns give byte-identical reports.
``roc/<feature_set>_<learner>_<hormone>_<class>_fold<k>.csv``
    ``threshold,fpr,tpr`` for every outer test fold.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path

from .experiment import ExperimentReport

TABLE_FILE = "auc_table.csv"
REPORT_FILE = "report.json"
TIMINGS_FILE = "timings.csv"
ROC_DIR = "roc"


def _problems(report: ExperimentReport) -> list[tuple[str, str]]:
    cfg = report.config
    if cfg.get("hormones") and cfg.get("classes"):
        return [(h, c) for h in cfg["hormones"] for c in cfg["classes"]]
    seen: list[tuple[str, str]] = []
    for cell in report.cells:
        if (cell.hormone, cell.target_class) not in seen:
            seen.append((cell.hormone, cell.target_class))
    return seen


def table_rows(report: ExperimentReport) -> tuple[list[str], list[list[str]]]:
    problems = _problems(report)
    header = ["feature_set", "learner"]
    for h, c in problems:
        header += [f"{h}_{c}_auc", f"{h}_{c}_std"]
    rows: dict[tuple[str, str], dict] = {}
    for cell in report.cells:
        rows.setdefault((cell.feature_set, cell.learner), {})[(cell.hormone, cell.target_class)] = cell
    out = []
    for (fs, lr), by_problem in rows.items():
        line = [fs, lr]
        for p in problems:
            cell = by_problem.get(p)
            if cell is None or not cell.folds or cell.error is not None:
                line += ["", ""]
            else:
                line += [_fmt(cell.mean_auc), _fmt(cell.std_auc)]
        out.append(line)
    return header, out


def _fmt(x: float) -> str:
    return "" if math.isnan(x) else f"{x:.4f}"


def emit_reports(report: ExperimentReport, out_dir: str | Path) -> list[Path]:
    """Write the table, JSON, timings and ROC files; returns the paths written."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / ROC_DIR).mkdir(exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    written = []
    header, rows = table_rows(report)
    with open(out / TABLE_FILE, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    written.append(out / TABLE_FILE)
    (out / REPORT_FILE).write_text(report.to_json() + "\n")
    written.append(out / REPORT_FILE)
    with open(out / TIMINGS_FILE, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["feature_set", "learner", "hormone", "class", "wall_seconds"])
        for cell in report.cells:
            w.writerow([*cell.key, f"{cell.wall_time:.3f}"])
    written.append(out / TIMINGS_FILE)
    for cell in report.cells:
        for fold in cell.folds:
            path = out / ROC_DIR / f"{cell.cell_id}_fold{fold.fold}.csv"
            fold.roc.to_csv(path)
            written.append(path)
    return written
