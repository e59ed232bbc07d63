"""Orchestrates the supervised (SL) and semi-supervised (SSL) strategies:
stratified 80/20 holdout, stratified k-fold CV, per-fold scaling + PCA +
grid search fitted on training rows only, per-fold random-forest
pseudo-labeling of the auxiliary cohort, and a final retrain on all folds
for the external evaluation.

Every fitting step logs the exact row indices it saw, so leak-freedom is
an auditable property of each run, not an assumption.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .classifiers import (
    DEFAULT_LABELER_SPEC,
    KNN,
    LINEAR_SVM,
    MLP,
    ClassifierModel,
    ClassifierSpec,
    Prediction,
    accuracy,
    default_grid,
    ensemble_vote,
    grid_search,
    predict,
    predict_scores,
    train_classifier,
)
from .dataset import FeatureTable, OutcomeLabel, load_feature_table
from .errors import (
    DimensionMismatchError,
    FoldMismatchError,
    InvalidSpecError,
    MissingAuxiliaryError,
    SingleClassTrainingError,
)
from .pca import PcaModel, PcaPolicy, fit_pca, transform_pca
from .preprocess import (
    FoldPlan,
    ScalerParams,
    SplitPlan,
    apply_minmax,
    fit_minmax,
    stratified_holdout,
    stratified_kfold,
)
from .seeding import child_seed, fingerprint
from .stats import PairedSample, TestResult, paired_t_test

SL = "SL"
SSL = "SSL"

_MEMBER_KINDS = {
    "knn": (KNN,),
    "mlp": (MLP,),
    "svm": (LINEAR_SVM,),
    "ev": (MLP, LINEAR_SVM, KNN),
}

_HMLS_NAMES = {"knn": "PCA+KNN", "mlp": "PCA+MLP", "svm": "PCA+SVM", "ev": "PCA+EV"}


@dataclass(frozen=True)
class RunConfig:
    """Full, serializable description of one classification run. Every
    field is echoed into the report so a report alone reproduces its run."""

    labeled_table: str
    strategy: str
    classifier: str
    auxiliary_table: str | None = None
    feature_set_name: str | None = None
    pca_policy: PcaPolicy = PcaPolicy()
    k: int = 5
    test_fraction: float = 0.2
    confidence_threshold: float = 0.0
    seed: int = 0
    jobs: int = 1
    grids: tuple[tuple[str, tuple[ClassifierSpec, ...]], ...] = ()

    def __post_init__(self) -> None:
        if self.strategy not in ("sl", "ssl"):
            raise InvalidSpecError(f"strategy must be 'sl' or 'ssl', got {self.strategy!r}")
        if self.classifier not in _MEMBER_KINDS:
            raise InvalidSpecError(f"classifier must be one of {sorted(_MEMBER_KINDS)}, got {self.classifier!r}")
        if self.strategy == "ssl" and self.auxiliary_table is None:
            raise MissingAuxiliaryError("strategy 'ssl' requires an auxiliary table")
        if self.k < 2:
            raise InvalidSpecError(f"k must be >= 2, got {self.k}")
        if not (0.0 <= self.confidence_threshold <= 1.0):
            raise InvalidSpecError(f"confidence_threshold must lie in [0, 1], got {self.confidence_threshold}")
        if self.jobs < 1:
            raise InvalidSpecError(f"jobs must be >= 1, got {self.jobs}")
        grids = tuple(
            (kind, tuple(specs)) for kind, specs in (dict(self.grids) if self.grids else {}).items()
        )
        for kind, specs in grids:
            if kind not in (*_MEMBER_KINDS["ev"], "RANDOM_FOREST"):
                raise InvalidSpecError(f"grid override names unknown kind {kind!r}")
            if not specs:
                raise InvalidSpecError(f"grid override for {kind} is empty")
            for spec in specs:
                if spec.kind != kind:
                    raise InvalidSpecError(f"grid override for {kind} holds a {spec.kind} spec")
        object.__setattr__(self, "grids", grids)

    @property
    def resolved_feature_set_name(self) -> str:
        return self.feature_set_name or Path(self.labeled_table).stem

    def grid_for(self, kind: str) -> tuple[ClassifierSpec, ...]:
        override = dict(self.grids).get(kind)
        return override if override is not None else tuple(default_grid(kind))

    def to_json(self) -> dict:
        # the worker count is an execution detail: it may not change what a
        # run computes, so it stays out of the echoed config
        kinds = set(_MEMBER_KINDS[self.classifier]) | {"RANDOM_FOREST"}
        return {
            "labeled_table": self.labeled_table,
            "auxiliary_table": self.auxiliary_table,
            "strategy": self.strategy,
            "classifier": self.classifier,
            "feature_set_name": self.resolved_feature_set_name,
            "pca_policy": self.pca_policy.to_json(),
            "k": self.k,
            "test_fraction": self.test_fraction,
            "confidence_threshold": self.confidence_threshold,
            "seed": self.seed,
            "grids": {kind: [s.to_json() for s in self.grid_for(kind)] for kind in sorted(kinds)},
        }

    def config_digest(self) -> str:
        # the requested strategy is excluded so an SSL run reducing to SL
        # hashes identically to the SL run it equals
        payload = self.to_json()
        payload.pop("strategy")
        return fingerprint("config", json.dumps(payload, sort_keys=True, separators=(",", ":")))[:16]


@dataclass(frozen=True)
class PseudoLabelSet:
    """Pseudo-labels assigned to the auxiliary cohort by a training-fold
    labeler, with the score-based confidence of every kept row."""

    auxiliary_ids: tuple[str, ...]
    labels: tuple[int, ...]
    confidences: tuple[float, ...]
    labeler_fingerprint: str

    def __post_init__(self) -> None:
        if not (len(self.auxiliary_ids) == len(self.labels) == len(self.confidences)):
            raise DimensionMismatchError("pseudo-label fields differ in length")


@dataclass(frozen=True)
class StrategyResult:
    """Per-fold accuracies plus the external-test accuracy for one
    (feature set, HMLS, strategy) cell. `strategy` records the effective
    strategy: an SSL run that kept zero pseudo-labeled rows is SL."""

    strategy: str
    feature_set_name: str
    hmls_name: str
    fold_accuracies: tuple[float, ...]
    mean_accuracy: float
    std_accuracy: float
    external_accuracy: float
    config_hash: str
    seed: int

    def to_json(self) -> dict:
        return {
            "strategy": self.strategy,
            "feature_set_name": self.feature_set_name,
            "hmls_name": self.hmls_name,
            "fold_accuracies": list(self.fold_accuracies),
            "mean_accuracy": self.mean_accuracy,
            "std_accuracy": self.std_accuracy,
            "external_accuracy": self.external_accuracy,
            "config_hash": self.config_hash,
            "seed": self.seed,
        }

    @staticmethod
    def from_json(payload: dict) -> "StrategyResult":
        return StrategyResult(
            strategy=payload["strategy"],
            feature_set_name=payload["feature_set_name"],
            hmls_name=payload["hmls_name"],
            fold_accuracies=tuple(payload["fold_accuracies"]),
            mean_accuracy=payload["mean_accuracy"],
            std_accuracy=payload["std_accuracy"],
            external_accuracy=payload["external_accuracy"],
            config_hash=payload["config_hash"],
            seed=payload["seed"],
        )


@dataclass(frozen=True)
class FitAudit:
    """What one fitting stage saw: the exact training/evaluation row
    indices and the fingerprints of everything fitted from them."""

    stage: str
    training_indices: tuple[int, ...]
    evaluation_indices: tuple[int, ...]
    scaler: ScalerParams
    pca_fingerprint: str
    grid_table: tuple[tuple[str, float], ...]
    classifier_fingerprints: tuple[str, ...]
    labeler_fingerprint: str | None
    pseudo_total: int
    pseudo_kept: int
    accuracy: float


@dataclass(frozen=True)
class RunRecord:
    """Complete outcome of one strategy run: the spec-level StrategyResult
    plus the audit trail needed for leakage verification and reporting."""

    config: RunConfig
    result: StrategyResult
    holdout: SplitPlan
    folds_absolute: tuple[tuple[int, ...], ...]
    fold_audits: tuple[FitAudit, ...]
    external_audit: FitAudit
    pseudo_confidence_histogram: dict[str, int] | None
    timing_seconds: float | None = None


def pseudo_label(
    auxiliary: FeatureTable,
    labeler: ClassifierModel,
    scaler: ScalerParams,
    pca: PcaModel,
    confidence_threshold: float,
    training_indices: Sequence[int] | None = None,
) -> PseudoLabelSet:
    """Label the auxiliary cohort with a training-fold labeler.

    Rows are scaled and projected with the provided train-fit transforms;
    rows whose confidence max(score, 1-score) falls below the threshold are
    dropped.
    """
    if auxiliary.feature_names and pca.n_features != auxiliary.n_features:
        raise DimensionMismatchError(
            f"auxiliary has {auxiliary.n_features} features, transforms expect {pca.n_features}"
        )
    indices = [] if training_indices is None else [int(i) for i in training_indices]
    labeler_fp = fingerprint("labeler", labeler.fingerprint(), json.dumps(sorted(indices)))
    if auxiliary.n_samples == 0:
        return PseudoLabelSet((), (), (), labeler_fp)
    z = transform_pca(pca, apply_minmax(scaler, auxiliary.values))
    scores = predict_scores(labeler, z)
    confidences = np.maximum(scores, 1.0 - scores)
    keep = confidences >= confidence_threshold
    labels = np.where(scores >= 0.5, int(OutcomeLabel.DECEASED), int(OutcomeLabel.ALIVE))
    return PseudoLabelSet(
        auxiliary_ids=tuple(sid for sid, k in zip(auxiliary.sample_ids, keep) if k),
        labels=tuple(int(l) for l, k in zip(labels, keep) if k),
        confidences=tuple(float(c) for c, k in zip(confidences, keep) if k),
        labeler_fingerprint=labeler_fp,
    )


def _confidence_histogram(confidences: Sequence[float]) -> dict[str, int]:
    edges = np.linspace(0.5, 1.0, 11)
    counts = {f"[{edges[i]:.2f},{edges[i + 1]:.2f})": 0 for i in range(10)}
    keys = list(counts)
    for c in confidences:
        b = min(int((c - 0.5) / 0.05), 9) if c >= 0.5 else 0
        counts[keys[b]] += 1
    return counts


def _inner_fold_plan(y: np.ndarray, seed: int) -> FoldPlan | None:
    _, counts = np.unique(y, return_counts=True)
    k = min(3, int(counts.min()))
    if k < 2:
        return None
    return stratified_kfold(y, k, seed)


def _fit_stage(
    config: RunConfig,
    labeled: FeatureTable,
    auxiliary: FeatureTable | None,
    use_ssl: bool,
    tr_abs: np.ndarray,
    ev_abs: np.ndarray,
    stage: str,
) -> tuple[FitAudit, PseudoLabelSet | None]:
    x = labeled.values
    y = labeled.labels
    seed = config.seed

    scaler = fit_minmax(x[tr_abs])
    pca = fit_pca(apply_minmax(scaler, x[tr_abs]), config.pca_policy)
    z_tr = transform_pca(pca, apply_minmax(scaler, x[tr_abs]))
    y_tr = y[tr_abs]

    pls: PseudoLabelSet | None = None
    z_fit, y_fit = z_tr, y_tr
    if use_ssl:
        labeler_spec = config.grid_for("RANDOM_FOREST")[0]
        labeler = train_classifier(
            labeler_spec, z_tr, y_tr, child_seed(seed, "labeler", stage)
        )
        pls = pseudo_label(
            auxiliary, labeler, scaler, pca, config.confidence_threshold, training_indices=tr_abs
        )
        if pls.auxiliary_ids:
            pos = {sid: i for i, sid in enumerate(auxiliary.sample_ids)}
            kept_rows = np.array([pos[sid] for sid in pls.auxiliary_ids], dtype=np.int64)
            z_aux = transform_pca(pca, apply_minmax(scaler, auxiliary.values[kept_rows]))
            z_fit = np.vstack([z_tr, z_aux])
            y_fit = np.concatenate([y_tr, np.asarray(pls.labels, dtype=np.int64)])

    inner = _inner_fold_plan(y_tr, child_seed(seed, "inner", stage))
    member_predictions: list[list[Prediction]] = []
    member_fps: list[str] = []
    grid_rows: list[tuple[str, float]] = []
    z_ev = transform_pca(pca, apply_minmax(scaler, x[ev_abs]))
    for kind in _MEMBER_KINDS[config.classifier]:
        grid = config.grid_for(kind)
        if inner is None or len(grid) == 1:
            best = grid[0]
            table = [(spec, float("nan")) for spec in grid]
        else:
            best, table = grid_search(kind, grid, z_tr, y_tr, inner, child_seed(seed, "grid", stage, kind))
        grid_rows.extend((json.dumps(spec.to_json(), sort_keys=True), acc) for spec, acc in table)
        model = train_classifier(best, z_fit, y_fit, child_seed(seed, "train", stage, kind))
        member_fps.append(model.fingerprint())
        member_predictions.append(predict(model, z_ev))

    if len(member_predictions) == 1:
        predictions = member_predictions[0]
    else:
        predictions = ensemble_vote(member_predictions)
    acc = accuracy(predictions, y[ev_abs])

    audit = FitAudit(
        stage=stage,
        training_indices=tuple(int(i) for i in tr_abs),
        evaluation_indices=tuple(int(i) for i in ev_abs),
        scaler=scaler,
        pca_fingerprint=pca.fingerprint(),
        grid_table=tuple(grid_rows),
        classifier_fingerprints=tuple(member_fps),
        labeler_fingerprint=pls.labeler_fingerprint if pls is not None else None,
        pseudo_total=auxiliary.n_samples if use_ssl else 0,
        pseudo_kept=len(pls.auxiliary_ids) if pls is not None else 0,
        accuracy=acc,
    )
    return audit, pls


def _run(config: RunConfig, labeled: FeatureTable | None, auxiliary: FeatureTable | None, use_ssl: bool) -> RunRecord:
    if labeled is None:
        labeled = load_feature_table(config.labeled_table, expect_labels=True)
    if labeled.labels is None:
        raise SingleClassTrainingError("labeled table must carry labels")
    if use_ssl and auxiliary is None:
        if config.auxiliary_table is None:
            raise MissingAuxiliaryError("semi-supervised run requires an auxiliary table")
        auxiliary = load_feature_table(config.auxiliary_table, allow_empty=True)

    y = labeled.labels
    holdout = stratified_holdout(y, config.test_fraction, config.seed)
    train_abs = np.asarray(holdout.train_indices, dtype=np.int64)
    folds_rel = stratified_kfold(y[train_abs], config.k, child_seed(config.seed, "folds"))
    folds_abs = tuple(tuple(int(train_abs[i]) for i in fold) for fold in folds_rel.folds)

    def run_fold(f: int) -> tuple[FitAudit, PseudoLabelSet | None]:
        ev = np.asarray(folds_abs[f], dtype=np.int64)
        tr = np.asarray(sorted(set(train_abs.tolist()) - set(folds_abs[f])), dtype=np.int64)
        return _fit_stage(config, labeled, auxiliary, use_ssl, tr, ev, f"fold{f}")

    if config.jobs > 1:
        with ThreadPoolExecutor(max_workers=config.jobs) as pool:
            outcomes = list(pool.map(run_fold, range(config.k)))
    else:
        outcomes = [run_fold(f) for f in range(config.k)]

    external_audit, external_pls = _fit_stage(
        config,
        labeled,
        auxiliary,
        use_ssl,
        train_abs,
        np.asarray(holdout.test_indices, dtype=np.int64),
        "external",
    )

    fold_audits = tuple(a for a, _ in outcomes)
    fold_accuracies = tuple(a.accuracy for a in fold_audits)
    all_pls = [p for _, p in outcomes if p is not None]
    if external_pls is not None:
        all_pls.append(external_pls)
    kept_total = sum(len(p.auxiliary_ids) for p in all_pls)
    effective = SSL if (use_ssl and kept_total > 0) else SL

    fold_digest = fingerprint(
        "partition",
        json.dumps({"holdout": holdout.to_json(), "folds": [list(f) for f in folds_abs]}, separators=(",", ":")),
    )[:16]
    result = StrategyResult(
        strategy=effective,
        feature_set_name=config.resolved_feature_set_name,
        hmls_name=_HMLS_NAMES[config.classifier],
        fold_accuracies=fold_accuracies,
        mean_accuracy=float(np.mean(fold_accuracies)),
        std_accuracy=float(np.std(fold_accuracies, ddof=1)),
        external_accuracy=external_audit.accuracy,
        config_hash=f"{config.config_digest()}:{fold_digest}",
        seed=config.seed,
    )
    histogram = None
    if use_ssl:
        confidences = [c for p in all_pls for c in p.confidences]
        histogram = _confidence_histogram(confidences)
    return RunRecord(
        config=config,
        result=result,
        holdout=holdout,
        folds_absolute=folds_abs,
        fold_audits=fold_audits,
        external_audit=external_audit,
        pseudo_confidence_histogram=histogram,
    )


def run_supervised(
    config: RunConfig, labeled: FeatureTable | None = None
) -> StrategyResult:
    """Run the supervised strategy; the auxiliary table (if any) is ignored."""
    return _run(config, labeled, None, use_ssl=False).result


def run_semi_supervised(
    config: RunConfig,
    labeled: FeatureTable | None = None,
    auxiliary: FeatureTable | None = None,
) -> StrategyResult:
    """Run the semi-supervised strategy: inside each fold a random-forest
    labeler trained on the k-1 training folds pseudo-labels the auxiliary
    cohort, and the augmented set trains the classifier. The validation
    fold and the external split never enter labeling or training."""
    return _run(config, labeled, auxiliary, use_ssl=True).result


def run_strategy(
    config: RunConfig,
    labeled: FeatureTable | None = None,
    auxiliary: FeatureTable | None = None,
) -> RunRecord:
    """Dispatch on config.strategy and return the full audited record."""
    return _run(config, labeled, auxiliary, use_ssl=config.strategy == "ssl")


def compare_strategies(a: StrategyResult, b: StrategyResult) -> TestResult:
    """Two-tailed paired t-test on the fold accuracies of two cells that
    share a fold partition."""
    if len(a.fold_accuracies) != len(b.fold_accuracies):
        raise FoldMismatchError(
            f"fold counts differ: {len(a.fold_accuracies)} vs {len(b.fold_accuracies)}"
        )
    fold_a = a.config_hash.split(":")[-1]
    fold_b = b.config_hash.split(":")[-1]
    if fold_a != fold_b:
        raise FoldMismatchError("results come from different fold partitions")
    return paired_t_test(PairedSample(a.fold_accuracies, b.fold_accuracies))
