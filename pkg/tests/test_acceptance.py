"""Acceptance suite: one test per criterion, each printing a pass/fail
line with the measured values at its stated tolerance.

Criterion 1 is split in two: the directional clause (mean CV-accuracy gap
over 10 seeds) and the per-seed significance clause. The significance
clause is implemented exactly as stated and is expected to fail at desk
scale; see the analysis in the repository notes.
"""

import json
import time
from pathlib import Path

import numpy as np
import pytest

from pseudosurv import (
    PairedSample,
    PcaPolicy,
    RunConfig,
    SurvivalConfig,
    SurvivalRecord,
    SyntheticSpec,
    compare_strategies,
    concordance_index,
    fit_pca,
    fit_survival,
    generate_synthetic_cohort,
    hdts_test,
    kaplan_meier,
    log_rank,
    predict_risk,
    run_semi_supervised,
    run_supervised,
    run_survival,
    transform_pca,
    write_feature_table,
)
from pseudosurv.classifiers import (
    ClassifierSpec,
    accuracy,
    default_grid,
    grid_search,
    mlp_init,
    mlp_loss_and_grads,
    predict,
    train_classifier,
)
from pseudosurv.cli import main
from pseudosurv.pca import inverse_transform_pca
from pseudosurv.preprocess import stratified_kfold
from pseudosurv.ssl_engine import run_strategy
from pseudosurv.stats import hotelling_statistic

from oracles import (
    cindex_exhaustive,
    hotelling_exhaustive_p,
    km_product_limit_brute,
    logrank_statistic_brute,
)


def check(criterion: str, ok: bool, detail: str) -> None:
    print(f"[{criterion}] {'PASS' if ok else 'FAIL'} - {detail}")
    assert ok, f"{criterion}: {detail}"


# ---------------------------------------------------------------------------
# Criterion 1: directional SSL superiority
# ---------------------------------------------------------------------------

SSL_SCENARIO = SyntheticSpec(
    n_labeled=200,
    n_auxiliary=400,
    n_features=24,
    class_separation=2.0,
    noise_features=20,
    survival_effect=1.0,
    censoring_rate=0.2,
)
SSL_LABELER_GRID = (
    (
        "RANDOM_FOREST",
        (ClassifierSpec("RANDOM_FOREST", {"n_trees": 300, "min_leaf": 2, "features_per_split": 10}),),
    ),
)


@pytest.fixture(scope="module")
def ssl_superiority_runs():
    started = time.perf_counter()
    outcomes = []
    for seed in range(10):
        cohort = generate_synthetic_cohort(SSL_SCENARIO, 1000 + seed)
        config = RunConfig(
            labeled_table="scenario",
            auxiliary_table="scenario-aux",
            strategy="ssl",
            classifier="knn",
            grids=SSL_LABELER_GRID,
            seed=seed,
        )
        sl = run_supervised(config, labeled=cohort.labeled)
        ssl = run_semi_supervised(config, labeled=cohort.labeled, auxiliary=cohort.auxiliary)
        test = compare_strategies(ssl, sl)
        outcomes.append((ssl.mean_accuracy - sl.mean_accuracy, test.p_value))
    return outcomes, time.perf_counter() - started


def test_criterion_1_directional_gap(ssl_superiority_runs):
    outcomes, elapsed = ssl_superiority_runs
    mean_gap = float(np.mean([g for g, _ in outcomes]))
    check(
        "criterion 1a",
        mean_gap >= 0.02 and elapsed <= 300.0,
        f"SSL-SL mean CV-accuracy gap {mean_gap:+.4f} (>= 0.02) over 10 seeds in {elapsed:.0f}s (<= 300s)",
    )


def test_criterion_1_per_seed_significance(ssl_superiority_runs):
    outcomes, _ = ssl_superiority_runs
    wins = sum(1 for gap, p in outcomes if gap > 0 and p < 0.05)
    # Implemented exactly as stated; at this scale per-fold paired t-tests
    # rarely reach p < 0.05 (see notes): this check documents the shortfall.
    check(
        "criterion 1b",
        wins >= 7,
        f"paired t-test p < 0.05 with SSL ahead on {wins}/10 seeds (need >= 7)",
    )


# ---------------------------------------------------------------------------
# Criterion 2: empty-auxiliary reduction
# ---------------------------------------------------------------------------


def test_criterion_2_empty_auxiliary_reduction(small_cohort):
    config = RunConfig(
        labeled_table="t", auxiliary_table="a", strategy="ssl", classifier="mlp", seed=13
    )
    sl = run_supervised(config, labeled=small_cohort.labeled)
    ssl = run_semi_supervised(
        config, labeled=small_cohort.labeled, auxiliary=small_cohort.auxiliary.row_subset([])
    )
    check("criterion 2", ssl == sl, "0-row auxiliary SSL result is bit-identical to SL")


# ---------------------------------------------------------------------------
# Criterion 3: leakage audit across 50 seeded runs
# ---------------------------------------------------------------------------


def test_criterion_3_leakage_audit():
    spec = SyntheticSpec(60, 20, 5, 2.5, 2, 0.5, 0.2)
    knn_grid = (("KNN", (ClassifierSpec("KNN", {"k": 3}),)),)
    violations = 0
    for seed in range(50):
        cohort = generate_synthetic_cohort(spec, 500 + seed)
        config = RunConfig(
            labeled_table="t",
            auxiliary_table="a",
            strategy="ssl",
            classifier="knn",
            grids=knn_grid + SSL_LABELER_GRID[:0],
            seed=seed,
        )
        record = run_strategy(config, labeled=cohort.labeled, auxiliary=cohort.auxiliary)
        external = set(record.holdout.test_indices)
        for audit in (*record.fold_audits, record.external_audit):
            if external & set(audit.training_indices):
                violations += 1
            if audit.stage != "external" and set(audit.evaluation_indices) & set(audit.training_indices):
                violations += 1
    check("criterion 3", violations == 0, f"{violations} fitting inputs intersected external/validation ids over 50 runs")


# ---------------------------------------------------------------------------
# Criterion 4: oracle equivalence for survival statistics
# ---------------------------------------------------------------------------


def _random_records(rng, n, max_time=8):
    return [
        SurvivalRecord(time=float(rng.integers(1, max_time + 1)), event=bool(rng.random() < 0.7))
        for _ in range(n)
    ]


def test_criterion_4_survival_oracles():
    rng = np.random.default_rng(2024)
    km_err = 0.0
    for _ in range(200):
        records = _random_records(rng, int(rng.integers(1, 9)))
        curve = kaplan_meier(records)
        brute = km_product_limit_brute(records)
        assert len(curve.times) == len(brute)
        for (t, s), ct, cs in zip(brute, curve.times, curve.survival):
            assert ct == t
            km_err = max(km_err, abs(cs - s))

    cindex_exact = True
    for _ in range(200):
        n = int(rng.integers(2, 51))
        records = _random_records(rng, n, max_time=25)
        risks = rng.normal(size=n)
        if rng.random() < 0.3:
            risks = np.round(risks, 1)
        try:
            ours = concordance_index(records, list(risks))
        except Exception:
            continue
        cindex_exact &= ours == cindex_exhaustive(records, list(risks))

    lr_err = 0.0
    count = 0
    while count < 50:
        a = _random_records(rng, int(rng.integers(2, 12)))
        b = _random_records(rng, int(rng.integers(2, 12)))
        if not any(r.event for r in a + b):
            continue
        count += 1
        lr_err = max(lr_err, abs(log_rank(a, b).statistic - logrank_statistic_brute(a, b)))

    check(
        "criterion 4",
        km_err <= 1e-12 and cindex_exact and lr_err <= 1e-9,
        f"KM max err {km_err:.2e} (<= 1e-12); C-index exact={cindex_exact}; log-rank max err {lr_err:.2e} (<= 1e-9)",
    )


# ---------------------------------------------------------------------------
# Criterion 5: Cox recovery
# ---------------------------------------------------------------------------


def test_criterion_5_cox_recovery():
    started = time.perf_counter()
    rng = np.random.default_rng(42)
    n = 2000
    x = rng.integers(0, 2, n).astype(float).reshape(-1, 1)
    lam = 0.05 * np.exp(np.log(2.0) * x[:, 0])
    event_time = rng.exponential(1.0 / lam)
    censored = rng.random(n) < 0.2
    obs = np.where(censored, event_time * (1 - rng.random(n)), event_time)
    records = [SurvivalRecord(float(t), bool(e)) for t, e in zip(obs, ~censored)]

    fit_idx, held_idx = np.arange(1000), np.arange(1000, n)
    model = fit_survival("COXR", x[fit_idx], [records[i] for i in fit_idx], seed=0)
    beta_err = abs(float(model.beta[0]) - np.log(2.0))
    held_c = concordance_index([records[i] for i in held_idx], predict_risk(model, x[held_idx]))
    ascent = bool(np.all(np.diff(model.loglik_history) >= 0))
    elapsed = time.perf_counter() - started
    check(
        "criterion 5",
        beta_err < 0.1 and held_c >= 0.65 and ascent and elapsed <= 30.0,
        f"|beta-ln2|={beta_err:.4f} (< 0.1); held-out C={held_c:.3f} (>= 0.65); "
        f"monotone ascent={ascent}; {elapsed:.1f}s (<= 30s)",
    )


# ---------------------------------------------------------------------------
# Criterion 6: survival C-index analog
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("model", ["cwgb", "rsf"])
def test_criterion_6_survival_cindex(model, survival_cohort):
    config = SurvivalConfig(features_table="t", model=model, risk_rule="median", seed=5)
    record = run_survival(config, table=survival_cohort.labeled)
    lr = record.log_rank_result
    ok = record.mean_cindex >= 0.75 and lr is not None and lr.p_value < 0.001
    check(
        f"criterion 6 ({model})",
        ok,
        f"5-fold mean C-index {record.mean_cindex:.3f} (>= 0.75); external log-rank "
        f"p={lr.p_value if lr else float('nan'):.2e} (< 1e-3)",
    )


# ---------------------------------------------------------------------------
# Criterion 7: PCA correctness
# ---------------------------------------------------------------------------


def test_criterion_7_pca_correctness():
    from oracles import pca_eigh_oracle

    rng = np.random.default_rng(7)
    train = rng.normal(size=(40, 12)) * rng.uniform(0.5, 3.0, size=12)

    model = fit_pca(train, PcaPolicy(variance_threshold=None, n_components=10))
    gram = model.components @ model.components.T
    ortho_err = float(np.abs(gram - np.eye(10)).max())

    _, oracle_components, oracle_ratios = pca_eigh_oracle(train)
    agree_err = 0.0
    for i in range(10):
        agree_err = max(agree_err, 1.0 - abs(float(model.components[i] @ oracle_components[i])))
        agree_err = max(agree_err, abs(float(model.explained_variance_ratio[i] - oracle_ratios[i])))

    full = fit_pca(train, PcaPolicy(variance_threshold=1.0))
    recon = inverse_transform_pca(full, transform_pca(full, train))
    recon_err = float(np.abs(recon - train).max())

    scores = transform_pca(model, train)
    cov = np.cov(scores, rowvar=False, ddof=1)
    off_err = float(np.abs(cov - np.diag(np.diag(cov))).max())
    off_bound = 1e-8 * float(np.diag(cov).max())

    ok = ortho_err <= 1e-8 and agree_err <= 1e-8 and recon_err <= 1e-8 and off_err <= off_bound
    check(
        "criterion 7",
        ok,
        f"orthonormality {ortho_err:.1e}; oracle agreement {agree_err:.1e}; "
        f"reconstruction {recon_err:.1e}; score-cov off-diag {off_err:.1e} (bound {off_bound:.1e})",
    )


# ---------------------------------------------------------------------------
# Criterion 8: MLP gradient check
# ---------------------------------------------------------------------------


def test_criterion_8_mlp_gradient_check():
    worst = 0.0
    eps = 1e-5
    for trial in range(20):
        rng = np.random.default_rng(trial)
        n_features = int(rng.integers(2, 6))
        hidden = int(rng.integers(2, 6))
        n = int(rng.integers(3, 9))
        w1, b1, w2, b2 = mlp_init(n_features, hidden, trial)
        w1 = w1 + rng.normal(0, 0.4, w1.shape)
        b1 = b1 + rng.normal(0, 0.4, b1.shape)
        w2 = w2 + rng.normal(0, 0.4, w2.shape)
        b2 = float(b2 + rng.normal(0, 0.4))
        x = rng.normal(size=(n, n_features))
        y01 = rng.integers(0, 2, n).astype(float)

        _, gw1, gb1, gw2, gb2 = mlp_loss_and_grads(w1, b1, w2, b2, x, y01)
        grads = {"w1": gw1, "b1": gb1, "w2": gw2}
        params = {"w1": w1, "b1": b1, "w2": w2}
        for name, arr in params.items():
            it = np.nditer(arr, flags=["multi_index"])
            for _ in it:
                idx = it.multi_index
                plus = {k: v.copy() for k, v in params.items()}
                minus = {k: v.copy() for k, v in params.items()}
                plus[name][idx] += eps
                minus[name][idx] -= eps
                lp = mlp_loss_and_grads(plus["w1"], plus["b1"], plus["w2"], b2, x, y01)[0]
                lm = mlp_loss_and_grads(minus["w1"], minus["b1"], minus["w2"], b2, x, y01)[0]
                fd = (lp - lm) / (2 * eps)
                denom = max(1e-8, abs(fd) + abs(grads[name][idx]))
                worst = max(worst, abs(fd - grads[name][idx]) / denom)
        lp = mlp_loss_and_grads(w1, b1, w2, b2 + eps, x, y01)[0]
        lm = mlp_loss_and_grads(w1, b1, w2, b2 - eps, x, y01)[0]
        fd = (lp - lm) / (2 * eps)
        worst = max(worst, abs(fd - gb2) / max(1e-8, abs(fd) + abs(gb2)))
    check("criterion 8", worst <= 1e-4, f"max relative gradient error {worst:.2e} over 20 networks (<= 1e-4)")


# ---------------------------------------------------------------------------
# Criterion 9: HDTS calibration, power and exhaustive agreement
# ---------------------------------------------------------------------------


def test_criterion_9_hdts():
    started = time.perf_counter()
    rejections = 0
    reps = 500
    for rep in range(reps):
        rng = np.random.default_rng(10_000 + rep)
        xa = rng.normal(size=(15, 30))
        xb = rng.normal(size=(15, 30))
        if hdts_test(xa, xb, n_perm=199, seed=rep).p_value < 0.05:
            rejections += 1
    null_rate = rejections / reps

    power_hits = 0
    power_reps = 50
    for rep in range(power_reps):
        rng = np.random.default_rng(20_000 + rep)
        xa = rng.normal(size=(20, 50))
        xb = rng.normal(size=(20, 50)) + 2.0
        if hdts_test(xa, xb, n_perm=199, seed=rep).p_value < 0.01:
            power_hits += 1
    power = power_hits / power_reps

    xa = np.array([[0.5], [1.5]])
    xb = np.array([[2.0], [4.0]])
    result = hdts_test(xa, xb, n_perm=99, seed=0)
    exact = hotelling_exhaustive_p(np.vstack([xa, xb]), 2, hotelling_statistic, hotelling_statistic(xa, xb))
    exhaustive_ok = result.p_value == pytest.approx(exact, abs=1e-12)

    elapsed = time.perf_counter() - started
    ok = 0.02 <= null_rate <= 0.08 and power >= 0.9 and exhaustive_ok and elapsed <= 180.0
    check(
        "criterion 9",
        ok,
        f"null rejection {null_rate:.3f} in [0.02, 0.08]; power {power:.2f} (>= 0.9); "
        f"exhaustive agreement {exhaustive_ok}; {elapsed:.0f}s (<= 180s)",
    )


# ---------------------------------------------------------------------------
# Criterion 10: CLI determinism
# ---------------------------------------------------------------------------


@pytest.fixture(scope="module")
def cli_tables(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli-det")
    spec = SyntheticSpec(60, 25, 5, 2.5, 2, 1.0, 0.2)
    cohort = generate_synthetic_cohort(spec, 77)
    labeled = root / "labeled.csv"
    aux = root / "aux.csv"
    write_feature_table(cohort.labeled, labeled)
    write_feature_table(cohort.auxiliary, aux)
    spec_path = root / "spec.json"
    spec_path.write_text(
        json.dumps(
            {
                "n_labeled": 30,
                "n_auxiliary": 10,
                "n_features": 3,
                "class_separation": 2.0,
                "noise_features": 1,
                "survival_effect": 0.5,
                "censoring_rate": 0.1,
            }
        )
    )
    return {"root": root, "labeled": labeled, "aux": aux, "spec": spec_path}


def _tree_bytes(directory: Path) -> dict:
    return {p.name: p.read_bytes() for p in sorted(directory.iterdir()) if p.is_file()}


def test_criterion_10_cli_determinism(cli_tables, capsys):
    root = cli_tables["root"]
    labeled, aux, spec = str(cli_tables["labeled"]), str(cli_tables["aux"]), str(cli_tables["spec"])
    failures = []

    def run(args, out_dir=None):
        code = main(args)
        captured = capsys.readouterr()
        assert code == 0, f"{args} exited {code}: {captured.err}"
        return (_tree_bytes(out_dir) if out_dir else None, captured.out)

    # classify: reruns and --jobs 1 vs 4 must agree byte-for-byte
    outs = {}
    for name, jobs in (("a", "1"), ("b", "1"), ("c", "4")):
        out = root / f"classify_{name}"
        outs[name], _ = run(
            ["classify", "--features", labeled, "--aux", aux, "--mode", "ssl", "--model", "ev",
             "--seed", "3", "--jobs", jobs, "--out", str(out)],
            out,
        )
    if not (outs["a"] == outs["b"] == outs["c"]):
        failures.append("classify")

    # survive: rerun identity
    sa, _ = run(["survive", "--features", labeled, "--model", "coxr", "--risk-rule", "median",
                 "--seed", "3", "--out", str(root / "surv_a"), "--jobs", "1"], root / "surv_a")
    sb, _ = run(["survive", "--features", labeled, "--model", "coxr", "--risk-rule", "median",
                 "--seed", "3", "--out", str(root / "surv_b"), "--jobs", "4"], root / "surv_b")
    if sa != sb:
        failures.append("survive")

    # synth: byte-identical tables
    run(["synth", "--spec", spec, "--seed", "5", "--out-labeled", str(root / "s1.csv"), "--out-aux", str(root / "sa1.csv")])
    run(["synth", "--spec", spec, "--seed", "5", "--out-labeled", str(root / "s2.csv"), "--out-aux", str(root / "sa2.csv")])
    if (root / "s1.csv").read_bytes() != (root / "s2.csv").read_bytes():
        failures.append("synth")

    # hdts: stdout and file identical
    _, h1 = run(["hdts", "--features-a", labeled, "--features-b", aux, "--n-perm", "99", "--seed", "2",
                 "--out", str(root / "h1")])
    _, h2 = run(["hdts", "--features-a", labeled, "--features-b", aux, "--n-perm", "99", "--seed", "2",
                 "--out", str(root / "h2")])
    if h1 != h2 or _tree_bytes(root / "h1") != _tree_bytes(root / "h2"):
        failures.append("hdts")

    # km: file identity
    k1, _ = run(["km", "--features", labeled, "--out", str(root / "k1"), "--svg"], root / "k1")
    k2, _ = run(["km", "--features", labeled, "--out", str(root / "k2"), "--svg"], root / "k2")
    if k1 != k2:
        failures.append("km")

    # validate: stdout identity
    _, v1 = run(["validate", "--features", labeled, "--expect-labels"])
    _, v2 = run(["validate", "--features", labeled, "--expect-labels"])
    if v1 != v2:
        failures.append("validate")

    # compare: stdout + file identity
    report = str(root / "classify_a" / "report.json")
    _, c1 = run(["compare", "--report-a", report, "--report-b", report, "--out", str(root / "c1")])
    _, c2 = run(["compare", "--report-a", report, "--report-b", report, "--out", str(root / "c2")])
    if c1 != c2 or _tree_bytes(root / "c1") != _tree_bytes(root / "c2"):
        failures.append("compare")

    check("criterion 10", not failures, f"non-deterministic subcommands: {failures or 'none'}")


# ---------------------------------------------------------------------------
# Criterion 11: chance-level guard
# ---------------------------------------------------------------------------


def test_criterion_11_chance_level_guard():
    spec = SyntheticSpec(300, 0, 6, 3.0, 2, 0.0, 0.0)
    out_of_range = []
    for seed in range(20):
        cohort = generate_synthetic_cohort(spec, 3000 + seed)
        rng = np.random.default_rng(seed)
        labels = rng.permutation(cohort.labeled.labels)
        x = cohort.labeled.values
        tr, te = np.arange(100), np.arange(100, 300)
        folds = stratified_kfold(labels[tr], 3, seed)
        for kind in ("KNN", "MLP", "LINEAR_SVM", "RANDOM_FOREST"):
            best, _ = grid_search(kind, default_grid(kind), x[tr], labels[tr], folds, seed)
            model = train_classifier(best, x[tr], labels[tr], seed)
            acc = accuracy(predict(model, x[te]), labels[te])
            if not (0.35 <= acc <= 0.65):
                out_of_range.append((kind, seed, round(acc, 3)))
    check(
        "criterion 11",
        not out_of_range,
        f"permuted-label held-out accuracies outside [0.35, 0.65]: {out_of_range or 'none'}",
    )
