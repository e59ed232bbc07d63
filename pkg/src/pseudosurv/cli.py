"""Command-line entry point wiring every module into the full workflow.

Exit codes: 0 success, 2 data-validation failure, 3 configuration error
(including unknown flags), 4 runtime numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from .classifiers import CLASSIFIER_KINDS  # noqa: F401  (re-exported for scripts)
from .dataset import (
    SyntheticSpec,
    generate_synthetic_cohort,
    load_feature_table,
    validate_table,
    write_feature_table,
)
from .errors import ConfigError, DataError, NumericError, PseudosurvError
from .pca import PcaPolicy
from .report import (
    RunReport,
    emit_report,
    report_from_run_record,
    summarize,
)
from .ssl_engine import RunConfig, StrategyResult, compare_strategies, run_strategy
from .stats import hdts_test
from .survival import kaplan_meier, km_curves_to_csv, km_curves_to_svg, log_rank
from .survival_run import SurvivalConfig, partition_digest, run_survival, survival_report_payload

EXIT_OK = 0
EXIT_DATA = 2
EXIT_CONFIG = 3
EXIT_NUMERIC = 4


class _Parser(argparse.ArgumentParser):
    """argparse that reports flag problems as ConfigError (exit 3) instead
    of exiting with argparse's own status 2."""

    def error(self, message):
        raise ConfigError(message)


def _read_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    if not isinstance(payload, dict):
        raise ConfigError("config file must hold a JSON object")
    return payload


def _merged(args: argparse.Namespace, file_config: dict, key: str, default):
    """Flag value if given, else config-file value, else default."""
    cli_value = getattr(args, key, None)
    if cli_value is not None:
        return cli_value
    if key in file_config:
        return file_config[key]
    return default


def _pca_policy(args, file_config) -> PcaPolicy:
    n_comp = _merged(args, file_config, "pca_components", None)
    if n_comp is not None:
        return PcaPolicy(variance_threshold=None, n_components=int(n_comp))
    var = _merged(args, file_config, "pca_var", 0.95)
    return PcaPolicy(variance_threshold=float(var))


def cmd_validate(args) -> int:
    table = load_feature_table(
        args.features, expect_labels=args.expect_labels, expect_survival=args.expect_survival
    )
    report = validate_table(table)
    for entry in report.entries:
        status = "PASS" if entry.passed else "FAIL"
        detail = f"  ({entry.detail})" if entry.detail else ""
        print(f"{status} {entry.check}{detail}")
    print(f"table: {table.n_samples} samples x {table.n_features} features")
    return EXIT_OK if report.ok else EXIT_DATA


def cmd_synth(args) -> int:
    spec = SyntheticSpec.from_json(args.spec)
    cohort = generate_synthetic_cohort(spec, args.seed)
    write_feature_table(cohort.labeled, args.out_labeled)
    print(f"wrote {args.out_labeled}: {cohort.labeled.n_samples} labeled samples")
    if args.out_aux is not None:
        write_feature_table(cohort.auxiliary, args.out_aux)
        print(f"wrote {args.out_aux}: {cohort.auxiliary.n_samples} auxiliary samples")
    return EXIT_OK


def cmd_classify(args) -> int:
    file_config = _read_config_file(args.config)
    mode = _merged(args, file_config, "mode", None)
    if mode is None:
        raise ConfigError("--mode is required (sl or ssl)")
    aux = _merged(args, file_config, "aux", None)
    if mode == "ssl" and aux is None:
        raise ConfigError("--mode ssl requires --aux AUXILIARY_TABLE")
    config = RunConfig(
        labeled_table=args.features,
        auxiliary_table=aux,
        strategy=mode,
        classifier=_merged(args, file_config, "model", None) or _fail_required("--model"),
        feature_set_name=_merged(args, file_config, "feature_set_name", None),
        pca_policy=_pca_policy(args, file_config),
        k=int(_merged(args, file_config, "folds", 5)),
        test_fraction=float(_merged(args, file_config, "test_fraction", 0.2)),
        confidence_threshold=float(_merged(args, file_config, "threshold", 0.0)),
        seed=int(_merged(args, file_config, "seed", 0)),
        jobs=int(_merged(args, file_config, "jobs", 1)),
    )
    started = time.perf_counter()
    record = run_strategy(config)
    elapsed = time.perf_counter() - started
    report = report_from_run_record(record)
    report.timing_seconds = elapsed
    manifest = emit_report(report, args.out, svg=args.svg)
    for name, strategy, formatted, external in summarize([record.result]):
        print(f"{name} [{strategy}] cv={formatted} external={external}")
    print(f"report: {manifest[0]}")
    return EXIT_OK


def _fail_required(flag: str):
    raise ConfigError(f"{flag} is required")


def cmd_survive(args) -> int:
    file_config = _read_config_file(args.config)
    model = _merged(args, file_config, "model", None) or _fail_required("--model")
    risk_rule = _merged(args, file_config, "risk_rule", None) or _fail_required("--risk-rule")
    hyper = file_config.get("hyperparameters", {})
    config = SurvivalConfig(
        features_table=args.features,
        model=model,
        risk_rule=risk_rule,
        pca_policy=_pca_policy(args, file_config),
        k=int(_merged(args, file_config, "folds", 5)),
        test_fraction=float(_merged(args, file_config, "test_fraction", 0.2)),
        seed=int(_merged(args, file_config, "seed", 0)),
        jobs=int(_merged(args, file_config, "jobs", 1)),
        hyperparameters=tuple(sorted(hyper.items())),
    )
    started = time.perf_counter()
    record = run_survival(config)
    elapsed = time.perf_counter() - started

    fingerprints = {
        a.stage: {
            "training_indices": list(a.training_indices),
            "evaluation_indices": list(a.evaluation_indices),
            "scaler": a.scaler_fingerprint,
            "pca": a.pca_fingerprint,
            "model": a.model_fingerprint,
        }
        for a in record.audits
    }
    fingerprints["partition"] = {"digest": partition_digest(record)}
    report = RunReport(
        config=config.to_json(),
        split=record.holdout.to_json(),
        folds=[list(f) for f in record.folds_absolute],
        survival=survival_report_payload(record),
        hdts=[record.hdts_result.to_json()] if record.hdts_result else None,
        fingerprints=fingerprints,
        km_curves=record.km_curves,
        timing_seconds=elapsed,
    )
    manifest = emit_report(report, args.out, svg=args.svg)
    lr = record.log_rank_result
    lr_text = f"log-rank p={lr.p_value:.4g}" if lr else "log-rank n/a"
    print(
        f"PCA+{config.model.upper()} cv C-index={record.mean_cindex:.2f} ± {record.std_cindex:.2f} "
        f"external={record.external_cindex:.2f} {lr_text}"
    )
    print(f"report: {manifest[0]}")
    return EXIT_OK


def cmd_hdts(args) -> int:
    ta = load_feature_table(args.features_a)
    tb = load_feature_table(args.features_b)
    result = hdts_test(ta.values, tb.values, n_perm=args.n_perm, seed=args.seed, shrinkage=args.shrinkage)
    payload = json.dumps(result.to_json(), indent=2, sort_keys=True)
    print(payload)
    if args.out is not None:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "hdts.json").write_text(payload + "\n", encoding="utf-8")
        print(f"report: {out_dir / 'hdts.json'}", file=sys.stderr)
    return EXIT_OK


def cmd_km(args) -> int:
    table = load_feature_table(args.features, expect_survival=True)
    curves = {"ALL": kaplan_meier(table.survival)}
    lr_line = ""
    if table.labels is not None:
        groups = {
            "class1": [r for r, l in zip(table.survival, table.labels) if l == 1],
            "class2": [r for r, l in zip(table.survival, table.labels) if l == 2],
        }
        for name, records in groups.items():
            if records:
                curves[name] = kaplan_meier(records)
        if groups["class1"] and groups["class2"]:
            lr = log_rank(groups["class1"], groups["class2"])
            lr_line = f"log-rank class1 vs class2: statistic={lr.statistic:.4g} p={lr.p_value:.4g}"
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for group in sorted(curves):
        path = out_dir / f"km_{group}.csv"
        path.write_text(km_curves_to_csv({group: curves[group]}), encoding="utf-8")
        written.append(path)
    if args.svg:
        path = out_dir / "km.svg"
        path.write_text(km_curves_to_svg(curves), encoding="utf-8")
        written.append(path)
    for path in written:
        print(f"wrote {path}")
    if lr_line:
        print(lr_line)
    return EXIT_OK


def _load_report_cells(path: str) -> list[StrategyResult]:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read report {path}: {exc}") from exc
    cells = payload.get("cells") or []
    if not cells:
        raise ConfigError(f"report {path} holds no strategy cells")
    return [StrategyResult.from_json(c) for c in cells]


def cmd_compare(args) -> int:
    cells_a = _load_report_cells(args.report_a)
    cells_b = _load_report_cells(args.report_b)
    rows = []
    for ca in cells_a:
        matches = [cb for cb in cells_b if cb.feature_set_name == ca.feature_set_name and cb.hmls_name == ca.hmls_name]
        for cb in matches:
            test = compare_strategies(ca, cb)
            verdict = "no significant difference"
            if test.p_value < 0.05:
                better = ca if ca.mean_accuracy > cb.mean_accuracy else cb
                verdict = f"{better.strategy} {better.hmls_name} better (p < 0.05)"
            rows.append(
                {
                    "cell_a": f"{ca.feature_set_name}/{ca.hmls_name}/{ca.strategy}",
                    "cell_b": f"{cb.feature_set_name}/{cb.hmls_name}/{cb.strategy}",
                    "mean_a": ca.mean_accuracy,
                    "mean_b": cb.mean_accuracy,
                    "statistic": test.statistic,
                    "p_value": test.p_value,
                    "df": test.meta["df"],
                    "verdict": verdict,
                }
            )
    if not rows:
        raise ConfigError("no matching (feature set, HMLS) cells between the two reports")
    for row in rows:
        stat = row["statistic"]
        stat_text = f"{stat:.4g}" if stat == stat and abs(stat) != float("inf") else str(stat)
        print(
            f"{row['cell_a']} vs {row['cell_b']}: mean {row['mean_a']:.3f} vs {row['mean_b']:.3f}, "
            f"t={stat_text} df={row['df']} p={row['p_value']:.4g} -> {row['verdict']}"
        )
    if args.out is not None:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        from .report import jsonable

        (out_dir / "comparison.json").write_text(
            json.dumps(jsonable(rows), indent=2, sort_keys=True, allow_nan=False) + "\n", encoding="utf-8"
        )
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="pseudosurv", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="validate a feature table file")
    p.add_argument("--features", required=True)
    p.add_argument("--expect-labels", action="store_true")
    p.add_argument("--expect-survival", action="store_true")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("synth", help="generate a seeded synthetic cohort")
    p.add_argument("--spec", required=True, help="JSON file with the generator parameters")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out-labeled", required=True)
    p.add_argument("--out-aux")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("classify", help="run the SL or SSL classification pipeline")
    p.add_argument("--features", required=True)
    p.add_argument("--aux")
    p.add_argument("--mode", choices=("sl", "ssl"))
    p.add_argument("--model", choices=("knn", "mlp", "svm", "ev"))
    p.add_argument("--pca-var", type=float, dest="pca_var")
    p.add_argument("--pca-components", type=int, dest="pca_components")
    p.add_argument("--folds", type=int)
    p.add_argument("--test-fraction", type=float, dest="test_fraction")
    p.add_argument("--threshold", type=float, help="pseudo-label confidence threshold")
    p.add_argument("--seed", type=int)
    p.add_argument("--jobs", type=int)
    p.add_argument("--config", help="JSON config mirroring the flags; flags override it")
    p.add_argument("--out", required=True)
    p.add_argument("--svg", action="store_true")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("survive", help="run the survival-analysis pipeline")
    p.add_argument("--features", required=True)
    p.add_argument("--model", choices=("coxr", "cwgb", "rsf", "fsvm"))
    p.add_argument("--risk-rule", choices=("median", "mean"), dest="risk_rule")
    p.add_argument("--pca-var", type=float, dest="pca_var")
    p.add_argument("--pca-components", type=int, dest="pca_components")
    p.add_argument("--folds", type=int)
    p.add_argument("--test-fraction", type=float, dest="test_fraction")
    p.add_argument("--seed", type=int)
    p.add_argument("--jobs", type=int)
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.add_argument("--svg", action="store_true")
    p.set_defaults(func=cmd_survive)

    p = sub.add_parser("hdts", help="high-dimensional two-sample mean test")
    p.add_argument("--features-a", required=True, dest="features_a")
    p.add_argument("--features-b", required=True, dest="features_b")
    p.add_argument("--n-perm", type=int, default=999, dest="n_perm")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--shrinkage", type=float, default=0.1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_hdts)

    p = sub.add_parser("km", help="Kaplan-Meier curves for a survival table")
    p.add_argument("--features", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--svg", action="store_true")
    p.set_defaults(func=cmd_km)

    p = sub.add_parser("compare", help="paired t-test between two run reports")
    p.add_argument("--report-a", required=True, dest="report_a")
    p.add_argument("--report-b", required=True, dest="report_b")
    p.add_argument("--out")
    p.set_defaults(func=cmd_compare)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data validation error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except np.linalg.LinAlgError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"data validation error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except PseudosurvError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
