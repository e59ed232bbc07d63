"""Core data model: feature tables, outcome labels, survival records and
the seeded synthetic cohort generator.

File format: comma-separated UTF-8 text with a mandatory header whose first
cell is ``sample_id``. The column names ``label``, ``time`` and ``event``
are reserved and parsed into the optional outcome fields; every other
column is a feature, kept in file order.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (
    DuplicateIdError,
    EmptyTableError,
    InvalidEventCellError,
    InvalidLabelError,
    InvalidSpecError,
    MissingColumnError,
    NonFiniteCellError,
    NonNumericCellError,
    NonPositiveTimeError,
)

RESERVED_COLUMNS = ("sample_id", "label", "time", "event")


class OutcomeLabel(IntEnum):
    """Binary overall-survival outcome: 1 alive beyond the two-year horizon,
    2 deceased within it. Class 2 is the positive class internally."""

    ALIVE = 1
    DECEASED = 2


@dataclass(frozen=True)
class SurvivalRecord:
    """Time-to-event observation: months since diagnosis plus whether the
    death was observed (event=True) or the subject was censored."""

    time: float
    event: bool

    def __post_init__(self) -> None:
        if not (self.time > 0):
            raise NonPositiveTimeError(f"survival time must be > 0, got {self.time}")


@dataclass(frozen=True, eq=False)
class FeatureTable:
    """Rectangular numeric matrix of samples x features with identifiers and
    optional outcome columns. Immutable after construction; arrays are
    marked read-only. Construction coerces types only — `validate_table`
    checks the invariants, `load_feature_table` enforces them."""

    sample_ids: tuple[str, ...]
    feature_names: tuple[str, ...]
    values: np.ndarray
    labels: np.ndarray | None = None
    survival: tuple[SurvivalRecord, ...] | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "sample_ids", tuple(str(s) for s in self.sample_ids))
        object.__setattr__(self, "feature_names", tuple(str(s) for s in self.feature_names))
        values = np.array(self.values, dtype=np.float64, copy=True)
        if values.ndim != 2:
            values = values.reshape(len(self.sample_ids), -1)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        if self.labels is not None:
            labels = np.array(self.labels, dtype=np.int64, copy=True)
            labels.setflags(write=False)
            object.__setattr__(self, "labels", labels)
        if self.survival is not None:
            object.__setattr__(self, "survival", tuple(self.survival))

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]

    @property
    def n_features(self) -> int:
        return self.values.shape[1]

    @property
    def times(self) -> np.ndarray:
        if self.survival is None:
            raise MissingColumnError("table has no survival records")
        return np.array([r.time for r in self.survival], dtype=np.float64)

    @property
    def events(self) -> np.ndarray:
        if self.survival is None:
            raise MissingColumnError("table has no survival records")
        return np.array([r.event for r in self.survival], dtype=bool)

    def row_subset(self, indices: Sequence[int]) -> "FeatureTable":
        idx = np.asarray(indices, dtype=np.int64)
        return FeatureTable(
            sample_ids=tuple(self.sample_ids[i] for i in idx),
            feature_names=self.feature_names,
            values=self.values[idx],
            labels=None if self.labels is None else self.labels[idx],
            survival=None if self.survival is None else tuple(self.survival[i] for i in idx),
        )


@dataclass(frozen=True)
class CheckResult:
    check: str
    passed: bool
    detail: str = ""


@dataclass(frozen=True)
class ValidationReport:
    entries: tuple[CheckResult, ...]

    @property
    def ok(self) -> bool:
        return all(e.passed for e in self.entries)

    def failures(self) -> tuple[CheckResult, ...]:
        return tuple(e for e in self.entries if not e.passed)


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters of the seeded two-class Gaussian cohort generator that
    stands in for the private clinical feature tables."""

    n_labeled: int
    n_auxiliary: int
    n_features: int
    class_separation: float
    noise_features: int
    survival_effect: float
    censoring_rate: float

    def __post_init__(self) -> None:
        if self.n_labeled <= 0:
            raise InvalidSpecError("n_labeled must be positive")
        if self.n_auxiliary < 0:
            raise InvalidSpecError("n_auxiliary must be nonnegative")
        if self.n_features <= 0:
            raise InvalidSpecError("n_features must be positive")
        if self.class_separation < 0:
            raise InvalidSpecError("class_separation must be nonnegative")
        if not (0 <= self.noise_features <= self.n_features):
            raise InvalidSpecError("noise_features must lie in [0, n_features]")
        if self.class_separation > 0 and self.noise_features == self.n_features:
            raise InvalidSpecError("class_separation > 0 requires at least one signal feature")
        if not (0 <= self.censoring_rate < 1):
            raise InvalidSpecError("censoring_rate must lie in [0, 1)")

    @staticmethod
    def from_json(path: str | Path) -> "SyntheticSpec":
        try:
            payload = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise InvalidSpecError(f"cannot read synthetic spec {path}: {exc}") from exc
        if not isinstance(payload, dict):
            raise InvalidSpecError("synthetic spec must be a JSON object")
        expected = {
            "n_labeled",
            "n_auxiliary",
            "n_features",
            "class_separation",
            "noise_features",
            "survival_effect",
            "censoring_rate",
        }
        if set(payload) != expected:
            missing = expected - set(payload)
            extra = set(payload) - expected
            raise InvalidSpecError(f"spec fields mismatch: missing={sorted(missing)} extra={sorted(extra)}")
        return SyntheticSpec(**payload)


def _parse_float(cell: str, row: int, col_name: str) -> float:
    try:
        value = float(cell)
    except ValueError as exc:
        raise NonNumericCellError(f"non-numeric cell at row {row}, column '{col_name}': {cell!r}") from exc
    if not math.isfinite(value):
        raise NonFiniteCellError(f"non-finite cell at row {row}, column '{col_name}': {cell!r}")
    return value


def load_feature_table(
    path: str | Path,
    expect_labels: bool = False,
    expect_survival: bool = False,
    allow_empty: bool = False,
) -> FeatureTable:
    """Read and validate a feature table file.

    Reserved columns `label`, `time`, `event` populate the optional fields;
    all other columns become features in file order. `allow_empty` permits
    zero data rows (needed for empty auxiliary cohorts).
    """
    path = Path(path)
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyTableError(f"{path}: file has no header row") from None
        rows = [row for row in reader if row]

    if not header or header[0] != "sample_id":
        raise MissingColumnError(f"{path}: first header cell must be 'sample_id', got {header[:1]!r}")
    seen: set[str] = set()
    for name in header:
        if name in seen:
            raise DuplicateIdError(f"{path}: duplicate column name '{name}'")
        seen.add(name)

    has_label = "label" in header
    has_time = "time" in header
    has_event = "event" in header
    if expect_labels and not has_label:
        raise MissingColumnError(f"{path}: expected a 'label' column")
    if expect_survival and not (has_time and has_event):
        raise MissingColumnError(f"{path}: expected 'time' and 'event' columns")
    if has_time != has_event:
        raise MissingColumnError(f"{path}: 'time' and 'event' must appear together")

    feature_names = tuple(name for name in header if name not in RESERVED_COLUMNS)
    if not feature_names:
        raise EmptyTableError(f"{path}: no feature columns")
    if not rows and not allow_empty:
        raise EmptyTableError(f"{path}: no data rows")

    col_index = {name: i for i, name in enumerate(header)}
    sample_ids: list[str] = []
    ids_seen: set[str] = set()
    values = np.empty((len(rows), len(feature_names)), dtype=np.float64)
    labels: list[int] = []
    records: list[SurvivalRecord] = []

    for r, row in enumerate(rows):
        if len(row) != len(header):
            raise NonNumericCellError(f"{path}: row {r} has {len(row)} cells, header has {len(header)}")
        sid = row[0]
        if not sid:
            raise DuplicateIdError(f"{path}: row {r} has an empty sample_id")
        if sid in ids_seen:
            raise DuplicateIdError(f"{path}: duplicate sample_id '{sid}'")
        ids_seen.add(sid)
        sample_ids.append(sid)
        for j, name in enumerate(feature_names):
            values[r, j] = _parse_float(row[col_index[name]], r, name)
        if has_label:
            cell = row[col_index["label"]]
            if cell not in ("1", "2"):
                raise InvalidLabelError(f"{path}: row {r} label must be '1' or '2', got {cell!r}")
            labels.append(int(cell))
        if has_time:
            t = _parse_float(row[col_index["time"]], r, "time")
            if not (t > 0):
                raise NonPositiveTimeError(f"{path}: row {r} time must be > 0, got {t}")
            ev = row[col_index["event"]]
            if ev not in ("0", "1"):
                raise InvalidEventCellError(f"{path}: row {r} event must be '0' or '1', got {ev!r}")
            records.append(SurvivalRecord(time=t, event=ev == "1"))

    return FeatureTable(
        sample_ids=tuple(sample_ids),
        feature_names=feature_names,
        values=values,
        labels=np.asarray(labels, dtype=np.int64) if has_label else None,
        survival=tuple(records) if has_time else None,
    )


def _format_float(x: float) -> str:
    return repr(float(x))


def write_feature_table(table: FeatureTable, path: str | Path) -> None:
    """Write a table in the canonical layout: sample_id, features, then any
    reserved columns. Floats use shortest round-trip formatting so
    write(load(f)) == f for canonically written files."""
    path = Path(path)
    header = ["sample_id", *table.feature_names]
    if table.labels is not None:
        header.append("label")
    if table.survival is not None:
        header.extend(["time", "event"])
    lines = [",".join(header)]
    for i in range(table.n_samples):
        cells = [table.sample_ids[i]]
        cells.extend(_format_float(v) for v in table.values[i])
        if table.labels is not None:
            cells.append(str(int(table.labels[i])))
        if table.survival is not None:
            rec = table.survival[i]
            cells.append(_format_float(rec.time))
            cells.append("1" if rec.event else "0")
        lines.append(",".join(cells))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def validate_table(table: FeatureTable) -> ValidationReport:
    """Enumerate every FeatureTable invariant as a pass/fail entry.

    Never raises: broken invariants become report entries with the
    offending coordinates."""
    entries: list[CheckResult] = []
    n = len(table.sample_ids)

    shape_ok = table.values.shape == (n, len(table.feature_names))
    entries.append(
        CheckResult(
            "ShapeMatch",
            shape_ok,
            "" if shape_ok else f"values shape {table.values.shape} vs {n} ids x {len(table.feature_names)} features",
        )
    )

    finite_mask = np.isfinite(table.values)
    if finite_mask.all():
        entries.append(CheckResult("NonFiniteCell", True))
    else:
        bad = np.argwhere(~finite_mask)
        coords = ", ".join(f"({i},{j})" for i, j in bad[:5])
        entries.append(CheckResult("NonFiniteCell", False, f"non-finite values at {coords}"))

    dup_ids = sorted({s for s in table.sample_ids if table.sample_ids.count(s) > 1})
    empty_ids = any(not s for s in table.sample_ids)
    entries.append(
        CheckResult(
            "UniqueSampleIds",
            not dup_ids and not empty_ids,
            f"duplicates: {dup_ids[:5]}" if dup_ids else ("empty sample_id" if empty_ids else ""),
        )
    )

    dup_names = sorted({s for s in table.feature_names if table.feature_names.count(s) > 1})
    entries.append(
        CheckResult("UniqueFeatureNames", not dup_names, f"duplicates: {dup_names[:5]}" if dup_names else "")
    )

    if table.labels is None:
        entries.append(CheckResult("LabelLength", True, "no labels"))
    else:
        ok = len(table.labels) == n
        entries.append(CheckResult("LabelLength", ok, "" if ok else f"{len(table.labels)} labels for {n} rows"))
        valid = np.isin(table.labels, (1, 2)).all() if len(table.labels) else True
        entries.append(CheckResult("LabelValues", bool(valid), "" if valid else "labels outside {1, 2}"))

    if table.survival is None:
        entries.append(CheckResult("SurvivalLength", True, "no survival records"))
    else:
        ok = len(table.survival) == n
        entries.append(
            CheckResult("SurvivalLength", ok, "" if ok else f"{len(table.survival)} records for {n} rows")
        )

    return ValidationReport(entries=tuple(entries))


BASE_HAZARD = math.log(2.0) / 24.0  # median survival of 24 months at zero signal score


@dataclass(frozen=True)
class SyntheticCohort:
    labeled: FeatureTable
    auxiliary: FeatureTable
    signal_direction: np.ndarray = field(repr=False)


def generate_synthetic_cohort(spec: SyntheticSpec, seed: int) -> SyntheticCohort:
    """Generate a labeled cohort (labels + survival) and an unlabeled
    auxiliary cohort drawn from the same two-class Gaussian mixture.

    Signal features sit in two unit-variance Gaussian clusters whose means
    are `class_separation` apart; noise features are standard Gaussian and
    class-independent. Survival times follow an exponential
    proportional-hazards model with log hazard = survival_effect x signal
    score (the projection onto the inter-class direction), censored
    uniformly at rate censoring_rate. Fully determined by (spec, seed).
    """
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed))
    p = spec.n_features
    n_signal = p - spec.noise_features

    direction = np.zeros(p)
    if n_signal > 0:
        direction[:n_signal] = 1.0 / math.sqrt(n_signal)

    def draw(n: int, prefix: str, with_outcomes: bool) -> FeatureTable:
        labels = rng.integers(1, 3, size=n)
        x = rng.standard_normal((n, p))
        signed = np.where(labels == 2, 0.5, -0.5)
        x += np.outer(signed * spec.class_separation, direction)
        ids = tuple(f"{prefix}{i:04d}" for i in range(n))
        if not with_outcomes:
            return FeatureTable(sample_ids=ids, feature_names=_feature_names(spec), values=x)
        score = x @ direction
        hazard = BASE_HAZARD * np.exp(spec.survival_effect * score)
        event_time = rng.exponential(1.0 / hazard)
        censored = rng.random(n) < spec.censoring_rate
        frac = 1.0 - rng.random(n)  # in (0, 1], keeps censored times positive
        time = np.where(censored, event_time * frac, event_time)
        records = tuple(SurvivalRecord(time=float(t), event=not c) for t, c in zip(time, censored))
        return FeatureTable(
            sample_ids=ids,
            feature_names=_feature_names(spec),
            values=x,
            labels=labels,
            survival=records,
        )

    labeled = draw(spec.n_labeled, "L", with_outcomes=True)
    auxiliary = draw(spec.n_auxiliary, "A", with_outcomes=False)
    return SyntheticCohort(labeled=labeled, auxiliary=auxiliary, signal_direction=direction)


def _feature_names(spec: SyntheticSpec) -> tuple[str, ...]:
    n_signal = spec.n_features - spec.noise_features
    names = [f"sig{i:03d}" for i in range(n_signal)]
    names.extend(f"noise{i:03d}" for i in range(spec.noise_features))
    return tuple(names)
