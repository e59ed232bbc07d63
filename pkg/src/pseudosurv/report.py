"""Aggregates strategy and survival results into report shapes
(mean +/- std tables, C-index tables, KM curve bundles) and serializes
them deterministically.

report.json is validated against the checked-in schema on every emission
and is byte-identical across reruns with identical inputs; wall-clock
timing is therefore serialized as null and logged separately.
"""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema

from .errors import ConfigError, EmptyInputError
from .ssl_engine import RunRecord, StrategyResult
from .survival import KmCurve, km_curves_to_csv, km_curves_to_svg

TOOL_NAME = "pseudosurv"
TOOL_VERSION = "0.1.0"


def jsonable(obj):
    """Recursively convert a payload to strict JSON: non-finite floats
    become null, numpy scalars become python numbers."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, bool) or obj is None or isinstance(obj, (str, int)):
        return obj
    if hasattr(obj, "item"):
        obj = obj.item()
    if isinstance(obj, float):
        return obj if obj == obj and abs(obj) != float("inf") else None
    return obj


@dataclass
class RunReport:
    """Everything one run produced, in serializable form."""

    config: dict
    split: dict | None = None
    folds: list | None = None
    cells: list[StrategyResult] = field(default_factory=list)
    survival: dict | None = None
    hdts: list[dict] | None = None
    comparisons: list[dict] | None = None
    pseudo_labels: dict | None = None
    fingerprints: dict | None = None
    km_curves: dict[str, KmCurve] = field(default_factory=dict)
    timing_seconds: float | None = None

    def to_json(self) -> dict:
        return jsonable(
            {
                "tool": {"name": TOOL_NAME, "version": TOOL_VERSION},
                "config": self.config,
                "split": self.split,
                "folds": self.folds,
                "cells": [c.to_json() for c in self.cells],
                "survival": self.survival,
                "hdts": self.hdts,
                "comparisons": self.comparisons,
                "pseudo_labels": self.pseudo_labels,
                "fingerprints": self.fingerprints,
                "timing_seconds": None,  # excluded from bytes: reports must be rerun-identical
            }
        )


def report_from_run_record(record: RunRecord) -> RunReport:
    fingerprints = {}
    for audit in (*record.fold_audits, record.external_audit):
        fingerprints[audit.stage] = {
            "training_indices": list(audit.training_indices),
            "evaluation_indices": list(audit.evaluation_indices),
            "scaler": audit.scaler.fingerprint(),
            "pca": audit.pca_fingerprint,
            "classifiers": list(audit.classifier_fingerprints),
            "labeler": audit.labeler_fingerprint,
            "grid_table": [[spec, acc] for spec, acc in audit.grid_table],
        }
    pseudo = None
    if record.pseudo_confidence_histogram is not None:
        pseudo = {
            "per_stage_kept": {a.stage: a.pseudo_kept for a in (*record.fold_audits, record.external_audit)},
            "per_stage_total": {a.stage: a.pseudo_total for a in (*record.fold_audits, record.external_audit)},
            "confidence_histogram": record.pseudo_confidence_histogram,
        }
    return RunReport(
        config=record.config.to_json(),
        split=record.holdout.to_json(),
        folds=[list(f) for f in record.folds_absolute],
        cells=[record.result],
        pseudo_labels=pseudo,
        fingerprints=fingerprints,
        timing_seconds=record.timing_seconds,
    )


def summarize(cells: list[StrategyResult]) -> list[tuple[str, str, str, str]]:
    """Rows (hmls_name, strategy, 'mean +/- std', external), sorted by mean
    accuracy descending."""
    if not cells:
        raise EmptyInputError("summarize needs at least one result cell")
    rows = sorted(cells, key=lambda c: -c.mean_accuracy)
    return [
        (
            c.hmls_name,
            c.strategy,
            f"{c.mean_accuracy:.2f} ± {c.std_accuracy:.2f}",
            f"{c.external_accuracy:.2f}",
        )
        for c in rows
    ]


def _summary_csv(cells: list[StrategyResult]) -> str:
    lines = ["hmls,strategy,mean_accuracy,std_accuracy,formatted,external_accuracy"]
    for c in sorted(cells, key=lambda c: -c.mean_accuracy):
        formatted = f"{c.mean_accuracy:.2f} ± {c.std_accuracy:.2f}"
        lines.append(
            f"{c.hmls_name},{c.strategy},{c.mean_accuracy!r},{c.std_accuracy!r},{formatted},{c.external_accuracy!r}"
        )
    return "\n".join(lines) + "\n"


def _survival_csv(survival: dict) -> str:
    lines = ["model,mean_cindex,std_cindex,external_cindex,logrank_statistic,logrank_p"]
    lr = survival.get("log_rank") or {}
    lines.append(
        ",".join(
            [
                survival["model"],
                repr(survival["mean_cindex"]),
                repr(survival["std_cindex"]),
                repr(survival["external_cindex"]),
                repr(lr.get("statistic")) if lr else "",
                repr(lr.get("p_value")) if lr else "",
            ]
        )
    )
    return "\n".join(lines) + "\n"


def load_schema() -> dict:
    text = resources.files("pseudosurv").joinpath("report_schema.json").read_text(encoding="utf-8")
    return json.loads(text)


def emit_report(report: RunReport, out_dir: str | Path, svg: bool = False) -> list[Path]:
    """Write report.json plus tables and KM curves; returns the manifest of
    written paths. Bytes are identical across reruns with identical inputs."""
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        payload = report.to_json()
        jsonschema.validate(payload, load_schema())
        manifest: list[Path] = []

        report_path = out_dir / "report.json"
        report_path.write_text(
            json.dumps(payload, indent=2, sort_keys=True, allow_nan=False) + "\n", encoding="utf-8"
        )
        manifest.append(report_path)

        if report.cells:
            p = out_dir / "summary.csv"
            p.write_text(_summary_csv(report.cells), encoding="utf-8")
            manifest.append(p)
        if report.survival is not None:
            p = out_dir / "survival_summary.csv"
            p.write_text(_survival_csv(report.survival), encoding="utf-8")
            manifest.append(p)
        for group in sorted(report.km_curves):
            p = out_dir / f"km_{group}.csv"
            p.write_text(km_curves_to_csv({group: report.km_curves[group]}), encoding="utf-8")
            manifest.append(p)
        if svg and report.km_curves:
            p = out_dir / "km.svg"
            p.write_text(km_curves_to_svg(report.km_curves), encoding="utf-8")
            manifest.append(p)
    except OSError as exc:
        raise ConfigError(f"cannot write report to {out_dir}: {exc}") from exc

    if report.timing_seconds is not None:
        print(f"[{TOOL_NAME}] wall-clock {report.timing_seconds:.3f}s (not serialized)", file=sys.stderr)
    return manifest
