"""Hazard-ratio survival estimators, risk grouping, Kaplan-Meier
estimation, log-rank testing and concordance evaluation.

Implements four estimator families over right-censored records:

- COXR: ridge-penalized Cox regression, Breslow tie handling, damped
  Newton iterations with a monotone partial log-likelihood.
- CWGB: component-wise gradient boosting of the Cox partial likelihood
  with one-feature least-squares base learners.
- RSF: random survival forest with log-rank splitting and Nelson-Aalen
  cumulative hazards in the leaves.
- FSVM: pairwise ranking support vector machine (squared hinge over
  comparable pairs) trained by fixed-step gradient descent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import gammaincc

from .dataset import SurvivalRecord
from .errors import (
    DimensionMismatchError,
    EmptyGroupError,
    EmptyInputError,
    InvalidSpecError,
    LengthMismatchError,
    NoComparablePairsError,
    NoEventsError,
    NonConvergenceError,
    NonFiniteInputError,
    TooFewEventsError,
    TooFewRowsError,
)
from .seeding import fingerprint, rng_for
from .stats import TestResult

COXR = "COXR"
CWGB = "CWGB"
RSF = "RSF"
FSVM = "FSVM"
SURVIVAL_KINDS = (COXR, CWGB, RSF, FSVM)

MEDIAN = "MEDIAN"
MEAN = "MEAN"

Z_95 = 1.959963984540054

DEFAULT_SURVIVAL_PARAMS: dict[str, dict] = {
    COXR: {"ridge": 1e-6, "max_iter": 100, "tol": 1e-9},
    CWGB: {"learning_rate": 0.1, "n_rounds": 100},
    RSF: {"n_trees": 100, "min_leaf_events": 3, "features_per_split": None},
    FSVM: {"alpha": 1.0, "n_steps": 1000, "step_size": 0.01},
}


def _times_events(records: Sequence[SurvivalRecord]) -> tuple[np.ndarray, np.ndarray]:
    times = np.array([r.time for r in records], dtype=np.float64)
    events = np.array([r.event for r in records], dtype=bool)
    return times, events


@dataclass(frozen=True)
class RiskGroupAssignment:
    """Time-threshold grouping: samples at or below the threshold are HIGH
    risk, above it LOW risk. The threshold comes from event-observed times
    only; censored samples are grouped by their censoring time."""

    threshold: float
    rule: str
    groups: tuple[str, ...]


def assign_risk_groups(records: Sequence[SurvivalRecord], rule: str) -> RiskGroupAssignment:
    if rule not in (MEDIAN, MEAN):
        raise InvalidSpecError(f"rule must be MEDIAN or MEAN, got {rule!r}")
    times, events = _times_events(records)
    if not events.any():
        raise NoEventsError("risk grouping needs at least one event-observed record")
    event_times = times[events]
    threshold = float(np.median(event_times) if rule == MEDIAN else np.mean(event_times))
    groups = tuple("LOW" if t > threshold else "HIGH" for t in times)
    return RiskGroupAssignment(threshold=threshold, rule=rule, groups=groups)


def risk_groups_from_scores(scores: np.ndarray) -> tuple[str, ...]:
    """Median split of predicted risk scores: HIGH at or above the median."""
    scores = np.asarray(scores, dtype=np.float64)
    threshold = float(np.median(scores))
    return tuple("HIGH" if s >= threshold else "LOW" for s in scores)


# ---------------------------------------------------------------------------
# Kaplan-Meier, log-rank, concordance
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class KmCurve:
    """Product-limit step function over the distinct event times, with the
    number at risk and a 95% log-log Greenwood band at each step. The curve
    is 1 before the first event time."""

    times: tuple[float, ...]
    survival: tuple[float, ...]
    at_risk: tuple[int, ...]
    ci_lower: tuple[float, ...]
    ci_upper: tuple[float, ...]

    def survival_at(self, t: float) -> float:
        s = 1.0
        for ti, si in zip(self.times, self.survival):
            if ti <= t:
                s = si
            else:
                break
        return s


def kaplan_meier(records: Sequence[SurvivalRecord]) -> KmCurve:
    """Product-limit estimator S(t) = prod_{t_i <= t} (1 - d_i/n_i) over
    distinct event times; censored subjects leave the risk set after their
    time. The 95% band uses the Greenwood variance with the log-log
    transform, clamped where S is 0 or 1."""
    if not records:
        raise EmptyInputError("kaplan_meier needs at least one record")
    times, events = _times_events(records)
    order = np.argsort(times, kind="stable")
    times = times[order]
    events = events[order]
    n = times.shape[0]

    event_times = np.unique(times[events])
    survival: list[float] = []
    at_risk: list[int] = []
    lower: list[float] = []
    upper: list[float] = []
    s = 1.0
    greenwood = 0.0
    for t in event_times:
        n_i = int(np.sum(times >= t))
        d_i = int(np.sum((times == t) & events))
        s *= 1.0 - d_i / n_i
        at_risk.append(n_i)
        survival.append(s)
        if n_i > d_i:
            greenwood += d_i / (n_i * (n_i - d_i))
        if s <= 0.0 or s >= 1.0:
            lower.append(max(s, 0.0))
            upper.append(min(s, 1.0))
        else:
            se = math.sqrt(greenwood) / abs(math.log(s))
            lower.append(s ** math.exp(Z_95 * se))
            upper.append(s ** math.exp(-Z_95 * se))
    return KmCurve(
        times=tuple(float(t) for t in event_times),
        survival=tuple(survival),
        at_risk=tuple(at_risk),
        ci_lower=tuple(lower),
        ci_upper=tuple(upper),
    )


def chi2_sf_1df(statistic: float) -> float:
    """Survival function of the chi-square distribution with one degree of
    freedom, via the regularized upper incomplete gamma function."""
    return float(gammaincc(0.5, statistic / 2.0))


def log_rank(a: Sequence[SurvivalRecord], b: Sequence[SurvivalRecord]) -> TestResult:
    """Two-group log-rank test: statistic = (sum(O_a - E_a))^2 / sum(V),
    p from the chi-square survival function with one degree of freedom."""
    if not a or not b:
        raise EmptyGroupError("both groups must be nonempty")
    ta, ea = _times_events(a)
    tb, eb = _times_events(b)
    if not (ea.any() or eb.any()):
        raise NoEventsError("log-rank needs at least one event overall")

    all_event_times = np.unique(np.concatenate([ta[ea], tb[eb]]))
    o_minus_e = 0.0
    variance = 0.0
    for t in all_event_times:
        na = int(np.sum(ta >= t))
        nb = int(np.sum(tb >= t))
        n = na + nb
        if n < 2:
            continue
        da = int(np.sum((ta == t) & ea))
        db = int(np.sum((tb == t) & eb))
        d = da + db
        e_a = d * na / n
        o_minus_e += da - e_a
        variance += d * (na / n) * (nb / n) * (n - d) / (n - 1)
    if variance <= 0.0:
        return TestResult(0.0, 1.0, "log_rank", {"df": 1})
    statistic = o_minus_e**2 / variance
    return TestResult(float(statistic), chi2_sf_1df(statistic), "log_rank", {"df": 1})


def concordance_index(records: Sequence[SurvivalRecord], risks: Sequence[float]) -> float:
    """Harrell's C over pairs comparable under censoring: (i, j) with i's
    event observed and t_i < t_j counts 1 if risk_i > risk_j, 0.5 on risk
    ties, 0 otherwise."""
    times, events = _times_events(records)
    risks = np.asarray(risks, dtype=np.float64)
    if risks.shape[0] != times.shape[0]:
        raise LengthMismatchError(f"{times.shape[0]} records vs {risks.shape[0]} risks")
    comparable = events[:, None] & (times[:, None] < times[None, :])
    n_pairs = int(comparable.sum())
    if n_pairs == 0:
        raise NoComparablePairsError("no comparable pairs under censoring")
    concordant = float(np.sum((risks[:, None] > risks[None, :]) & comparable))
    tied = float(np.sum((risks[:, None] == risks[None, :]) & comparable))
    return (concordant + 0.5 * tied) / n_pairs


# ---------------------------------------------------------------------------
# Cox regression (Breslow ties, ridge, damped Newton)
# ---------------------------------------------------------------------------


def _cox_scan(x, times, events, beta):
    """One pass over time-sorted rows: Breslow partial log-likelihood, its
    gradient and the information matrix (negated Hessian, before ridge)."""
    n, p = x.shape
    order = np.argsort(times, kind="stable")[::-1]  # descending time
    eta = x @ beta
    eta_c = eta - eta.max()
    r = np.exp(eta_c)

    loglik = 0.0
    grad = np.zeros(p)
    info = np.zeros((p, p))
    s0 = 0.0
    s1 = np.zeros(p)
    s2 = np.zeros((p, p))

    i = 0
    while i < n:
        j = i
        t = times[order[i]]
        while j < n and times[order[j]] == t:
            idx = order[j]
            s0 += r[idx]
            s1 += r[idx] * x[idx]
            s2 += r[idx] * np.outer(x[idx], x[idx])
            j += 1
        group = order[i:j]
        deaths = group[events[group]]
        d = deaths.shape[0]
        if d > 0:
            loglik += eta_c[deaths].sum() - d * math.log(s0)
            mean1 = s1 / s0
            grad += x[deaths].sum(axis=0) - d * mean1
            info += d * (s2 / s0 - np.outer(mean1, mean1))
        i = j
    return loglik, grad, info


class CoxModel:
    """Fitted ridge-penalized Cox regression. `loglik_history` records the
    penalized partial log-likelihood at every accepted Newton step."""

    kind = COXR

    def __init__(self, beta, ridge, loglik_history, n_iter, converged, seed):
        self.beta = beta
        self.ridge = ridge
        self.loglik_history = loglik_history
        self.n_iter = n_iter
        self.converged = converged
        self.training_seed = seed

    @property
    def n_features(self) -> int:
        return self.beta.shape[0]

    def predict_risk(self, x: np.ndarray) -> np.ndarray:
        return x @ self.beta

    def fingerprint(self) -> str:
        return fingerprint("coxr", self.beta, self.ridge)


def _fit_cox(x, times, events, params, seed):
    ridge = params["ridge"]
    max_iter = params["max_iter"]
    tol = params["tol"]
    n, p = x.shape
    center = x.mean(axis=0)
    xc = x - center  # centering x shifts eta by a constant, leaving the partial likelihood unchanged
    beta = np.zeros(p)

    def penalized(b):
        ll, g, info = _cox_scan(xc, times, events, b)
        return ll - ridge * float(b @ b), g - 2.0 * ridge * b, info + 2.0 * ridge * np.eye(p)

    ll, grad, hess = penalized(beta)
    history = [ll]
    converged = False
    for it in range(max_iter):
        try:
            delta = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            delta = np.linalg.lstsq(hess, grad, rcond=None)[0]
        step = 1.0
        improved = False
        for _ in range(60):
            candidate = beta + step * delta
            new_ll, new_grad, new_hess = penalized(candidate)
            if np.isfinite(new_ll) and new_ll >= ll:
                improved = True
                break
            step *= 0.5
        if not improved:
            break
        change = new_ll - ll
        beta, ll, grad, hess = candidate, new_ll, new_grad, new_hess
        history.append(ll)
        if abs(change) < tol:
            converged = True
            break
    if not np.isfinite(beta).all() or not math.isfinite(ll):
        raise NonConvergenceError("Cox Newton iterations diverged to non-finite values")
    return CoxModel(beta, ridge, tuple(history), len(history) - 1, converged, seed)


# ---------------------------------------------------------------------------
# Component-wise gradient boosting of the Cox partial likelihood
# ---------------------------------------------------------------------------


def _cox_loss_and_residual(f, times, events):
    """Negative Breslow partial log-likelihood of risk scores f and its
    negative gradient (the boosting residual)."""
    f_c = f - f.max()
    r = np.exp(f_c)

    event_times = np.unique(times[events])
    if event_times.size == 0:
        return 0.0, np.zeros_like(f)
    # S0_k = sum of r over subjects still at risk at each distinct event time
    asc = np.argsort(times, kind="stable")
    sorted_times = times[asc]
    suffix = np.concatenate([np.cumsum(r[asc][::-1])[::-1], [0.0]])
    first_at_risk = np.searchsorted(sorted_times, event_times, side="left")
    s0 = suffix[first_at_risk]
    d_k = np.array([np.sum((times == t) & events) for t in event_times], dtype=np.float64)

    loglik = float(f_c[events].sum() - (d_k * np.log(s0)).sum())
    # Breslow cumulative hazard at each subject's own time
    cum_inc = np.concatenate([[0.0], np.cumsum(d_k / s0)])
    h0 = cum_inc[np.searchsorted(event_times, times, side="right")]
    residual = events.astype(np.float64) - r * h0
    return -loglik, residual


class CwgbModel:
    """Additive per-feature coefficients built by component-wise boosting;
    the risk score is the linear predictor on centered features."""

    kind = CWGB

    def __init__(self, coef, center, loss_history, seed):
        self.coef = coef
        self.center = center
        self.loss_history = loss_history
        self.training_seed = seed

    @property
    def n_features(self) -> int:
        return self.coef.shape[0]

    def predict_risk(self, x: np.ndarray) -> np.ndarray:
        return (x - self.center) @ self.coef

    def fingerprint(self) -> str:
        return fingerprint("cwgb", self.coef, self.center)


def _fit_cwgb(x, times, events, params, seed):
    nu = params["learning_rate"]
    rounds = params["n_rounds"]
    n, p = x.shape
    center = x.mean(axis=0)
    xc = x - center
    col_ss = (xc**2).sum(axis=0)
    fit_ok = col_ss > 0
    coef = np.zeros(p)
    f = np.zeros(n)
    loss, _ = _cox_loss_and_residual(f, times, events)
    history = [loss]
    for _ in range(rounds):
        _, residual = _cox_loss_and_residual(f, times, events)
        with np.errstate(invalid="ignore", divide="ignore"):
            gamma = np.where(fit_ok, (xc.T @ residual) / np.where(fit_ok, col_ss, 1.0), 0.0)
        score = gamma**2 * col_ss  # sum-of-squares reduction of each one-feature learner
        best = int(np.argmax(score))
        if score[best] <= 0.0:
            break
        coef[best] += nu * gamma[best]
        f = f + nu * gamma[best] * xc[:, best]
        loss, _ = _cox_loss_and_residual(f, times, events)
        history.append(loss)
    return CwgbModel(coef, center, tuple(history), seed)


# ---------------------------------------------------------------------------
# Random survival forest
# ---------------------------------------------------------------------------


class _SurvTree:
    __slots__ = ("feature", "threshold", "left", "right", "leaf_hsum", "leaf_hazard")

    def __init__(self):
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.leaf_hsum: list[float] = []
        self.leaf_hazard: list[np.ndarray | None] = []

    def add_node(self) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.leaf_hsum.append(0.0)
        self.leaf_hazard.append(None)
        return len(self.feature) - 1

    def apply_hsum(self, x: np.ndarray) -> np.ndarray:
        out = np.empty(x.shape[0])
        stack = [(0, np.arange(x.shape[0]))]
        while stack:
            node, rows = stack.pop()
            if self.feature[node] < 0:
                out[rows] = self.leaf_hsum[node]
                continue
            mask = x[rows, self.feature[node]] <= self.threshold[node]
            if mask.any():
                stack.append((self.left[node], rows[mask]))
            if (~mask).any():
                stack.append((self.right[node], rows[~mask]))
        return out


def _nelson_aalen_on_grid(times, events, grid):
    """Nelson-Aalen cumulative hazard of the members, evaluated at the
    forest-level grid of training event times."""
    values = np.zeros(grid.shape[0])
    if times.shape[0] == 0:
        return values
    event_times = np.unique(times[events])
    if event_times.size == 0:
        return values
    increments = np.array(
        [np.sum((times == t) & events) / np.sum(times >= t) for t in event_times]
    )
    cum = np.concatenate([[0.0], np.cumsum(increments)])
    return cum[np.searchsorted(event_times, grid, side="right")]


def _logrank_split_scores(node_times, node_events, values, min_events):
    """Log-rank statistic of every threshold of one feature within a node.

    Returns (thresholds, scores); invalid splits (child event counts below
    min_events or zero variance) score -inf.
    """
    order = np.argsort(values, kind="stable")
    vs = values[order]
    ts = node_times[order]
    es = node_events[order]
    boundaries = np.flatnonzero(vs[:-1] < vs[1:])
    if boundaries.size == 0:
        return np.empty(0), np.empty(0)

    event_times = np.unique(ts[es])
    if event_times.size == 0:
        return np.empty(0), np.empty(0)
    at_risk = ts[:, None] >= event_times[None, :]
    death = (ts[:, None] == event_times[None, :]) & es[:, None]

    cum_risk = np.cumsum(at_risk, axis=0)
    cum_death = np.cumsum(death, axis=0)
    n_k = at_risk.sum(axis=0).astype(np.float64)
    d_k = death.sum(axis=0).astype(np.float64)

    nl = cum_risk[boundaries].astype(np.float64)
    dl = cum_death[boundaries].astype(np.float64)
    with np.errstate(invalid="ignore", divide="ignore"):
        expected = d_k * nl / n_k
        frac = nl / n_k
        var_terms = np.where(n_k > 1, d_k * frac * (1 - frac) * (n_k - d_k) / np.maximum(n_k - 1, 1), 0.0)
    num = np.where(n_k > 0, dl - expected, 0.0).sum(axis=1)
    var = var_terms.sum(axis=1)

    left_events = dl.sum(axis=1)
    total_events = d_k.sum()
    valid = (var > 0) & (left_events >= min_events) & (total_events - left_events >= min_events)
    scores = np.where(valid, np.divide(num**2, var, out=np.full_like(var, -np.inf), where=var > 0), -np.inf)
    thresholds = (vs[boundaries] + vs[boundaries + 1]) / 2.0
    return thresholds, scores


def _grow_surv_tree(x, times, events, grid, rng, min_events, features_per_split):
    n, q = x.shape
    bootstrap = rng.integers(0, n, size=n)
    tree = _SurvTree()
    root = tree.add_node()
    stack = [(root, bootstrap)]
    while stack:
        node, rows = stack.pop()
        node_events = int(events[rows].sum())
        split = None
        if node_events >= 2 * min_events:
            m = min(features_per_split, q)
            candidates = rng.choice(q, size=m, replace=False)
            best_score = -np.inf
            for f in candidates:
                thresholds, scores = _logrank_split_scores(times[rows], events[rows], x[rows, f], min_events)
                if scores.size == 0:
                    continue
                i = int(np.argmax(scores))
                if scores[i] > best_score:
                    best_score = float(scores[i])
                    split = (int(f), float(thresholds[i]))
            if not np.isfinite(best_score):
                split = None
        if split is None:
            hazard = _nelson_aalen_on_grid(times[rows], events[rows], grid)
            tree.leaf_hazard[node] = hazard
            tree.leaf_hsum[node] = float(hazard.sum())
            continue
        feature, threshold = split
        mask = x[rows, feature] <= threshold
        tree.feature[node] = feature
        tree.threshold[node] = threshold
        left = tree.add_node()
        right = tree.add_node()
        tree.left[node] = left
        tree.right[node] = right
        stack.append((left, rows[mask]))
        stack.append((right, rows[~mask]))
    return tree


class RsfModel:
    """Random survival forest; the risk score is the ensemble-mean
    cumulative hazard summed over the training event-time grid."""

    kind = RSF

    def __init__(self, trees, grid, seed, n_features):
        self.trees = trees
        self.grid = grid
        self.training_seed = seed
        self._n_features = n_features

    @property
    def n_features(self) -> int:
        return self._n_features

    def predict_risk(self, x: np.ndarray) -> np.ndarray:
        total = np.zeros(x.shape[0])
        for tree in self.trees:
            total += tree.apply_hsum(x)
        return total / len(self.trees)

    def fingerprint(self) -> str:
        parts: list = ["rsf", self.grid]
        for tree in self.trees:
            parts.append(np.asarray(tree.feature, dtype=np.int64))
            parts.append(np.asarray(tree.threshold, dtype=np.float64))
            parts.append(np.asarray(tree.leaf_hsum, dtype=np.float64))
        return fingerprint(*parts)


def _fit_rsf(x, times, events, params, seed):
    q = x.shape[1]
    fps = params["features_per_split"] or max(1, math.ceil(math.sqrt(q)))
    grid = np.unique(times[events])
    trees = []
    for i in range(params["n_trees"]):
        rng = rng_for(seed, "surv-tree", i)
        trees.append(_grow_surv_tree(x, times, events, grid, rng, params["min_leaf_events"], fps))
    return RsfModel(trees, grid, seed, q)


# ---------------------------------------------------------------------------
# Ranking survival SVM
# ---------------------------------------------------------------------------


class FsvmModel:
    """Linear ranking survival SVM; the risk score is the linear predictor."""

    kind = FSVM

    def __init__(self, w, seed):
        self.w = w
        self.training_seed = seed

    @property
    def n_features(self) -> int:
        return self.w.shape[0]

    def predict_risk(self, x: np.ndarray) -> np.ndarray:
        return x @ self.w

    def fingerprint(self) -> str:
        return fingerprint("fsvm", self.w)


def _fit_fsvm(x, times, events, params, seed):
    # objective: 0.5 ||w||^2 + alpha * mean over comparable pairs of
    # squared hinge on w.(x_i - x_j); the mean keeps the stated fixed step
    # stable for any cohort size.
    alpha = params["alpha"]
    steps = params["n_steps"]
    step_size = params["step_size"]
    n, p = x.shape
    comparable = events[:, None] & (times[:, None] < times[None, :])
    ii, jj = np.nonzero(comparable)
    w = np.zeros(p)
    if ii.size == 0:
        return FsvmModel(w, seed)
    d = x[ii] - x[jj]
    n_pairs = d.shape[0]
    for _ in range(steps):
        slack = np.maximum(0.0, 1.0 - d @ w)
        grad = w - (2.0 * alpha / n_pairs) * (d.T @ slack)
        w = w - step_size * grad
    return FsvmModel(w, seed)


_SURV_FITTERS = {COXR: _fit_cox, CWGB: _fit_cwgb, RSF: _fit_rsf, FSVM: _fit_fsvm}

SurvivalModel = CoxModel | CwgbModel | RsfModel | FsvmModel


def fit_survival(
    kind: str,
    x: np.ndarray,
    records: Sequence[SurvivalRecord],
    hyperparameters: dict | None = None,
    seed: int = 0,
) -> SurvivalModel:
    """Fit one of the four survival estimators on (x, records)."""
    if kind not in SURVIVAL_KINDS:
        raise InvalidSpecError(f"unknown survival kind {kind!r}")
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise DimensionMismatchError("design matrix must be 2-D")
    if x.shape[0] != len(records):
        raise LengthMismatchError(f"{x.shape[0]} rows vs {len(records)} records")
    if x.shape[0] < 5:
        raise TooFewRowsError(f"survival fitting needs n >= 5, got {x.shape[0]}")
    if not np.isfinite(x).all():
        raise NonFiniteInputError("design matrix contains non-finite values")
    times, events = _times_events(records)
    if int(events.sum()) < 2:
        raise TooFewEventsError(f"survival fitting needs at least 2 events, got {int(events.sum())}")
    params = dict(DEFAULT_SURVIVAL_PARAMS[kind])
    for key, value in (hyperparameters or {}).items():
        if key not in params:
            raise InvalidSpecError(f"{kind} has no hyperparameter {key!r}")
        params[key] = value
    return _SURV_FITTERS[kind](x, times, events, params, seed)


def predict_risk(model: SurvivalModel, x: np.ndarray) -> np.ndarray:
    """Per-row risk score; higher means higher hazard."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.n_features:
        raise DimensionMismatchError(
            f"matrix has {x.shape[1] if x.ndim == 2 else '?'} columns, model expects {model.n_features}"
        )
    return model.predict_risk(x)


# ---------------------------------------------------------------------------
# Curve export
# ---------------------------------------------------------------------------

KM_CSV_HEADER = "group,time,n_at_risk,survival,ci_lower,ci_upper"


def km_curves_to_csv(curves: dict[str, KmCurve]) -> str:
    lines = [KM_CSV_HEADER]
    for group in sorted(curves):
        curve = curves[group]
        for t, n_i, s, lo, hi in zip(curve.times, curve.at_risk, curve.survival, curve.ci_lower, curve.ci_upper):
            lines.append(f"{group},{t!r},{n_i},{s!r},{lo!r},{hi!r}")
    return "\n".join(lines) + "\n"


_SVG_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b")


def km_curves_to_svg(curves: dict[str, KmCurve], width: int = 640, height: int = 420) -> str:
    """Self-contained SVG step plot of one or more survival curves."""
    margin = 50
    plot_w = width - 2 * margin
    plot_h = height - 2 * margin
    max_t = max((max(c.times) for c in curves.values() if c.times), default=1.0)
    if max_t <= 0:
        max_t = 1.0

    def sx(t: float) -> float:
        return margin + plot_w * (t / max_t)

    def sy(s: float) -> float:
        return margin + plot_h * (1.0 - s)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{margin}" y1="{margin}" x2="{margin}" y2="{height - margin}" stroke="black"/>',
        f'<line x1="{margin}" y1="{height - margin}" x2="{width - margin}" y2="{height - margin}" stroke="black"/>',
        f'<text x="{margin}" y="{margin - 10}" font-size="12">survival probability</text>',
        f'<text x="{width - margin - 60}" y="{height - margin + 30}" font-size="12">time</text>',
    ]
    for gi, group in enumerate(sorted(curves)):
        curve = curves[group]
        color = _SVG_COLORS[gi % len(_SVG_COLORS)]
        points = [(0.0, 1.0)]
        s_prev = 1.0
        for t, s in zip(curve.times, curve.survival):
            points.append((t, s_prev))
            points.append((t, s))
            s_prev = s
        points.append((max_t, s_prev))
        path = " ".join(f"{sx(t):.2f},{sy(s):.2f}" for t, s in points)
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{path}"/>')
        parts.append(
            f'<text x="{width - margin - 100}" y="{margin + 16 * (gi + 1)}" font-size="12" '
            f'fill="{color}">{group}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
