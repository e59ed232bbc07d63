"""Cross-validated survival pipeline: PCA + one hazard-ratio estimator per
fold, external concordance, risk grouping, KM curves and log-rank on the
external split.

Holdout and fold stratification use the event indicator as the two-class
label, so survival tables do not need outcome labels.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import FeatureTable, load_feature_table
from .errors import EmptyGroupError, InvalidSpecError, MissingColumnError, NoEventsError
from .pca import PcaPolicy, fit_pca, transform_pca
from .preprocess import SplitPlan, apply_minmax, fit_minmax, stratified_holdout, stratified_kfold
from .seeding import child_seed, fingerprint
from .ssl_engine import RunRecord  # noqa: F401  (shared report plumbing)
from .stats import TestResult, hdts_test
from .survival import (
    KmCurve,
    RiskGroupAssignment,
    SURVIVAL_KINDS,
    assign_risk_groups,
    concordance_index,
    fit_survival,
    kaplan_meier,
    log_rank,
    predict_risk,
    risk_groups_from_scores,
)

_MODEL_FLAGS = {"coxr": "COXR", "cwgb": "CWGB", "rsf": "RSF", "fsvm": "FSVM"}


@dataclass(frozen=True)
class SurvivalConfig:
    """Serializable description of one survival run. `risk_rule` is
    mandatory: the source describes both median and mean thresholds."""

    features_table: str
    model: str
    risk_rule: str
    pca_policy: PcaPolicy = PcaPolicy()
    k: int = 5
    test_fraction: float = 0.2
    seed: int = 0
    jobs: int = 1
    hyperparameters: tuple[tuple[str, float], ...] = ()
    hdts_permutations: int = 999

    def __post_init__(self) -> None:
        if self.model not in _MODEL_FLAGS:
            raise InvalidSpecError(f"model must be one of {sorted(_MODEL_FLAGS)}, got {self.model!r}")
        if self.risk_rule not in ("median", "mean"):
            raise InvalidSpecError(f"risk_rule must be 'median' or 'mean', got {self.risk_rule!r}")
        if self.k < 2:
            raise InvalidSpecError(f"k must be >= 2, got {self.k}")
        if self.jobs < 1:
            raise InvalidSpecError(f"jobs must be >= 1, got {self.jobs}")

    @property
    def kind(self) -> str:
        return _MODEL_FLAGS[self.model]

    def to_json(self) -> dict:
        # jobs omitted: worker count may not change what a run computes
        return {
            "features_table": self.features_table,
            "model": self.model,
            "risk_rule": self.risk_rule,
            "pca_policy": self.pca_policy.to_json(),
            "k": self.k,
            "test_fraction": self.test_fraction,
            "seed": self.seed,
            "hyperparameters": dict(self.hyperparameters),
            "hdts_permutations": self.hdts_permutations,
        }


@dataclass(frozen=True)
class SurvivalStageAudit:
    stage: str
    training_indices: tuple[int, ...]
    evaluation_indices: tuple[int, ...]
    scaler_fingerprint: str
    pca_fingerprint: str
    model_fingerprint: str
    cindex: float


@dataclass(frozen=True)
class SurvivalRunRecord:
    config: SurvivalConfig
    holdout: SplitPlan
    folds_absolute: tuple[tuple[int, ...], ...]
    fold_cindex: tuple[float, ...]
    mean_cindex: float
    std_cindex: float
    external_cindex: float
    time_based_assignment: RiskGroupAssignment
    predicted_groups: tuple[str, ...]
    km_curves: dict[str, KmCurve]
    log_rank_result: TestResult | None
    hdts_result: TestResult | None
    audits: tuple[SurvivalStageAudit, ...]
    timing_seconds: float | None = None


def run_survival(config: SurvivalConfig, table: FeatureTable | None = None) -> SurvivalRunRecord:
    if table is None:
        table = load_feature_table(config.features_table, expect_survival=True)
    if table.survival is None:
        raise MissingColumnError("survival run needs time and event columns")
    if not table.events.any():
        raise NoEventsError("survival run needs at least one observed event")

    strata = np.where(table.events, 2, 1)
    holdout = stratified_holdout(strata, config.test_fraction, config.seed)
    train_abs = np.asarray(holdout.train_indices, dtype=np.int64)
    folds_rel = stratified_kfold(strata[train_abs], config.k, child_seed(config.seed, "folds"))
    folds_abs = tuple(tuple(int(train_abs[i]) for i in fold) for fold in folds_rel.folds)

    hyper = dict(config.hyperparameters)

    def fit_stage(tr_abs: np.ndarray, ev_abs: np.ndarray, stage: str):
        scaler = fit_minmax(table.values[tr_abs])
        pca = fit_pca(apply_minmax(scaler, table.values[tr_abs]), config.pca_policy)
        z_tr = transform_pca(pca, apply_minmax(scaler, table.values[tr_abs]))
        records_tr = [table.survival[i] for i in tr_abs]
        model = fit_survival(config.kind, z_tr, records_tr, hyper, child_seed(config.seed, "fit", stage))
        z_ev = transform_pca(pca, apply_minmax(scaler, table.values[ev_abs]))
        risks = predict_risk(model, z_ev)
        records_ev = [table.survival[i] for i in ev_abs]
        cindex = concordance_index(records_ev, risks)
        audit = SurvivalStageAudit(
            stage=stage,
            training_indices=tuple(int(i) for i in tr_abs),
            evaluation_indices=tuple(int(i) for i in ev_abs),
            scaler_fingerprint=scaler.fingerprint(),
            pca_fingerprint=pca.fingerprint(),
            model_fingerprint=model.fingerprint(),
            cindex=cindex,
        )
        return audit, risks

    def run_fold(f: int):
        ev = np.asarray(folds_abs[f], dtype=np.int64)
        tr = np.asarray(sorted(set(train_abs.tolist()) - set(folds_abs[f])), dtype=np.int64)
        return fit_stage(tr, ev, f"fold{f}")

    if config.jobs > 1:
        with ThreadPoolExecutor(max_workers=config.jobs) as pool:
            fold_outcomes = list(pool.map(run_fold, range(config.k)))
    else:
        fold_outcomes = [run_fold(f) for f in range(config.k)]
    fold_audits = [a for a, _ in fold_outcomes]
    fold_cindex = tuple(a.cindex for a in fold_audits)

    ext_abs = np.asarray(holdout.test_indices, dtype=np.int64)
    ext_audit, ext_risks = fit_stage(train_abs, ext_abs, "external")

    ext_records = [table.survival[i] for i in ext_abs]
    time_groups = assign_risk_groups(ext_records, config.risk_rule.upper())
    predicted = risk_groups_from_scores(ext_risks)

    high = [r for r, g in zip(ext_records, predicted) if g == "HIGH"]
    low = [r for r, g in zip(ext_records, predicted) if g == "LOW"]
    curves: dict[str, KmCurve] = {}
    lr: TestResult | None = None
    hdts: TestResult | None = None
    if high and low:
        curves["HIGH"] = kaplan_meier(high)
        curves["LOW"] = kaplan_meier(low)
        try:
            lr = log_rank(high, low)
        except (EmptyGroupError, NoEventsError):
            lr = None
        x_high = table.values[ext_abs][[g == "HIGH" for g in predicted]]
        x_low = table.values[ext_abs][[g == "LOW" for g in predicted]]
        if x_high.shape[0] >= 2 and x_low.shape[0] >= 2:
            hdts = hdts_test(
                x_high,
                x_low,
                n_perm=config.hdts_permutations,
                seed=child_seed(config.seed, "hdts"),
            )
    else:
        curves["ALL"] = kaplan_meier(ext_records)

    return SurvivalRunRecord(
        config=config,
        holdout=holdout,
        folds_absolute=folds_abs,
        fold_cindex=fold_cindex,
        mean_cindex=float(np.mean(fold_cindex)),
        std_cindex=float(np.std(fold_cindex, ddof=1)),
        external_cindex=ext_audit.cindex,
        time_based_assignment=time_groups,
        predicted_groups=predicted,
        km_curves=curves,
        log_rank_result=lr,
        hdts_result=hdts,
        audits=tuple([*fold_audits, ext_audit]),
    )


def survival_report_payload(record: SurvivalRunRecord) -> dict:
    """The `survival` section of a run report."""
    ext_ids = [record.audits[-1].evaluation_indices[i] for i in range(len(record.predicted_groups))]
    return {
        "model": record.config.model,
        "fold_cindex": list(record.fold_cindex),
        "mean_cindex": record.mean_cindex,
        "std_cindex": record.std_cindex,
        "external_cindex": record.external_cindex,
        "risk_rule": record.time_based_assignment.rule,
        "risk_threshold": record.time_based_assignment.threshold,
        "time_based_groups": {str(i): g for i, g in zip(ext_ids, record.time_based_assignment.groups)},
        "predicted_groups": {str(i): g for i, g in zip(ext_ids, record.predicted_groups)},
        "log_rank": record.log_rank_result.to_json() if record.log_rank_result else None,
    }


def partition_digest(record: SurvivalRunRecord) -> str:
    return fingerprint(
        "partition",
        json.dumps(
            {"holdout": record.holdout.to_json(), "folds": [list(f) for f in record.folds_absolute]},
            separators=(",", ":"),
        ),
    )[:16]
