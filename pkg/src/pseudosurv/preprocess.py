"""Min-max scaling and stratified splitting with a strict fit-on-train,
apply-elsewhere contract."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import (
    ClassTooSmallError,
    DimensionMismatchError,
    EmptyInputError,
    InvalidFractionError,
)
from .seeding import fingerprint, rng_for


@dataclass(frozen=True, eq=False)
class ScalerParams:
    """Column-wise minimum and maximum of the training rows only."""

    minimum: np.ndarray
    maximum: np.ndarray

    def __post_init__(self) -> None:
        mn = np.array(self.minimum, dtype=np.float64, copy=True)
        mx = np.array(self.maximum, dtype=np.float64, copy=True)
        mn.setflags(write=False)
        mx.setflags(write=False)
        object.__setattr__(self, "minimum", mn)
        object.__setattr__(self, "maximum", mx)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ScalerParams):
            return NotImplemented
        return np.array_equal(self.minimum, other.minimum) and np.array_equal(self.maximum, other.maximum)

    def fingerprint(self) -> str:
        return fingerprint("minmax", self.minimum, self.maximum)


@dataclass(frozen=True)
class SplitPlan:
    """Disjoint, covering train/test index partition."""

    train_indices: tuple[int, ...]
    test_indices: tuple[int, ...]

    def to_json(self) -> dict:
        return {"train": list(self.train_indices), "test": list(self.test_indices)}

    @staticmethod
    def from_json(payload: dict) -> "SplitPlan":
        return SplitPlan(tuple(payload["train"]), tuple(payload["test"]))


@dataclass(frozen=True)
class FoldPlan:
    """k pairwise-disjoint index sets covering the training rows."""

    folds: tuple[tuple[int, ...], ...]

    @property
    def k(self) -> int:
        return len(self.folds)

    def training_for(self, fold: int) -> tuple[int, ...]:
        return tuple(i for f, members in enumerate(self.folds) if f != fold for i in members)

    def to_json(self) -> list[list[int]]:
        return [list(f) for f in self.folds]

    @staticmethod
    def from_json(payload: list[list[int]]) -> "FoldPlan":
        return FoldPlan(tuple(tuple(f) for f in payload))

    def digest(self) -> str:
        return fingerprint("folds", json.dumps(self.to_json(), separators=(",", ":")))


def fit_minmax(train: np.ndarray) -> ScalerParams:
    train = np.asarray(train, dtype=np.float64)
    if train.size == 0 or train.shape[0] == 0:
        raise EmptyInputError("cannot fit a min-max scaler on an empty matrix")
    return ScalerParams(minimum=train.min(axis=0), maximum=train.max(axis=0))


def apply_minmax(params: ScalerParams, m: np.ndarray) -> np.ndarray:
    """Scale columns to (x - min)/(max - min). Constant columns map to zero;
    values outside the fit range are NOT clipped."""
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[1] != params.minimum.shape[0]:
        raise DimensionMismatchError(
            f"matrix has {m.shape[1] if m.ndim == 2 else '?'} columns, scaler expects {params.minimum.shape[0]}"
        )
    span = params.maximum - params.minimum
    safe = np.where(span > 0, span, 1.0)
    out = (m - params.minimum) / safe
    out[:, span == 0] = 0.0
    return out


def _class_indices(labels: np.ndarray) -> dict[int, np.ndarray]:
    labels = np.asarray(labels, dtype=np.int64)
    return {int(c): np.flatnonzero(labels == c) for c in np.unique(labels)}


def stratified_holdout(labels: np.ndarray, test_fraction: float, seed: int) -> SplitPlan:
    """Per-class test counts are round-half-to-even(count x fraction),
    adjusted by at most 1 so both sides keep every class. Assignment within
    a class is a seeded uniform shuffle."""
    if not (0 < test_fraction < 1):
        raise InvalidFractionError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    by_class = _class_indices(np.asarray(labels))
    for c, idx in by_class.items():
        if len(idx) < 2:
            raise ClassTooSmallError(f"class {c} has {len(idx)} member(s); need at least 2")
    rng = rng_for(seed, "holdout")
    train: list[int] = []
    test: list[int] = []
    for c in sorted(by_class):
        idx = by_class[c]
        n_test = int(round(len(idx) * test_fraction))
        n_test = min(max(n_test, 1), len(idx) - 1)
        perm = rng.permutation(idx)
        test.extend(int(i) for i in perm[:n_test])
        train.extend(int(i) for i in perm[n_test:])
    return SplitPlan(train_indices=tuple(sorted(train)), test_indices=tuple(sorted(test)))


def stratified_kfold(labels: np.ndarray, k: int, seed: int) -> FoldPlan:
    """Deal each class's shuffled members round-robin onto the folds, with
    the fold pointer carrying over between classes so overall fold sizes
    differ by at most one."""
    if k < 2:
        raise ClassTooSmallError(f"k must be >= 2, got {k}")
    by_class = _class_indices(np.asarray(labels))
    for c, idx in by_class.items():
        if len(idx) < k:
            raise ClassTooSmallError(f"class {c} has {len(idx)} member(s); need at least k={k}")
    rng = rng_for(seed, "kfold", k)
    folds: list[list[int]] = [[] for _ in range(k)]
    pointer = 0
    for c in sorted(by_class):
        for i in rng.permutation(by_class[c]):
            folds[pointer % k].append(int(i))
            pointer += 1
    return FoldPlan(folds=tuple(tuple(sorted(f)) for f in folds))
