"""Pseudo-labeling classification and survival-analysis pipelines for
tabular feature cohorts, with seeded determinism and auditable splits."""

__version__ = "0.1.0"

from .dataset import (
    FeatureTable,
    OutcomeLabel,
    SurvivalRecord,
    SyntheticSpec,
    generate_synthetic_cohort,
    load_feature_table,
    validate_table,
    write_feature_table,
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
from .ssl_engine import (
    PseudoLabelSet,
    RunConfig,
    StrategyResult,
    compare_strategies,
    pseudo_label,
    run_semi_supervised,
    run_strategy,
    run_supervised,
)
from .stats import PairedSample, TestResult, hdts_test, paired_t_test
from .survival import (
    KmCurve,
    assign_risk_groups,
    concordance_index,
    fit_survival,
    kaplan_meier,
    log_rank,
    predict_risk,
)
from .survival_run import SurvivalConfig, run_survival

__all__ = [
    "FeatureTable",
    "OutcomeLabel",
    "SurvivalRecord",
    "SyntheticSpec",
    "generate_synthetic_cohort",
    "load_feature_table",
    "validate_table",
    "write_feature_table",
    "PcaModel",
    "PcaPolicy",
    "fit_pca",
    "transform_pca",
    "FoldPlan",
    "ScalerParams",
    "SplitPlan",
    "apply_minmax",
    "fit_minmax",
    "stratified_holdout",
    "stratified_kfold",
    "PseudoLabelSet",
    "RunConfig",
    "StrategyResult",
    "compare_strategies",
    "pseudo_label",
    "run_semi_supervised",
    "run_strategy",
    "run_supervised",
    "PairedSample",
    "TestResult",
    "hdts_test",
    "paired_t_test",
    "KmCurve",
    "assign_risk_groups",
    "concordance_index",
    "fit_survival",
    "kaplan_meier",
    "log_rank",
    "predict_risk",
    "SurvivalConfig",
    "run_survival",
]
