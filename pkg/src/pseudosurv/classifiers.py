"""The four classification algorithms of the supervised pipeline plus the
random-forest pseudo-labeler, with grid-search hyperparameter selection.

Every fit is a pure function of (spec, data, seed): no global RNG, stable
tie-breaking everywhere, so retraining reproduces models bit-for-bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import expit

from .dataset import OutcomeLabel
from .errors import (
    DimensionMismatchError,
    EmptyGridError,
    InvalidSpecError,
    LengthMismatchError,
    NonFiniteInputError,
    SingleClassTrainingError,
)
from .preprocess import FoldPlan
from .seeding import child_seed, fingerprint, rng_for

KNN = "KNN"
MLP = "MLP"
LINEAR_SVM = "LINEAR_SVM"
RANDOM_FOREST = "RANDOM_FOREST"
CLASSIFIER_KINDS = (KNN, MLP, LINEAR_SVM, RANDOM_FOREST)

_REQUIRED_PARAMS = {
    KNN: ("k",),
    MLP: ("hidden_width", "learning_rate", "epochs"),
    LINEAR_SVM: ("C", "epochs"),
    RANDOM_FOREST: ("n_trees", "min_leaf", "features_per_split"),
}
_INT_PARAMS = {"k", "hidden_width", "epochs", "n_trees", "min_leaf", "features_per_split"}


@dataclass(frozen=True)
class ClassifierSpec:
    """Classifier kind plus its kind-specific hyperparameters.

    `features_per_split` may be None, meaning ceil(sqrt(n_features)) is
    resolved at fit time.
    """

    kind: str
    hyperparameters: tuple[tuple[str, float | int | None], ...]

    def __init__(self, kind: str, hyperparameters: dict | tuple):
        if kind not in CLASSIFIER_KINDS:
            raise InvalidSpecError(f"unknown classifier kind {kind!r}")
        params = dict(hyperparameters)
        required = _REQUIRED_PARAMS[kind]
        if set(params) != set(required):
            raise InvalidSpecError(f"{kind} expects parameters {required}, got {sorted(params)}")
        for name, value in params.items():
            if name == "features_per_split" and value is None:
                continue
            if not (np.isfinite(value) and value > 0):
                raise InvalidSpecError(f"{kind} hyperparameter {name}={value!r} must be strictly positive")
            if name in _INT_PARAMS:
                if int(value) != value:
                    raise InvalidSpecError(f"{kind} hyperparameter {name}={value!r} must be an integer")
                params[name] = int(value)
        if kind == KNN and params["k"] % 2 == 0:
            raise InvalidSpecError(f"KNN k must be odd, got {params['k']}")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "hyperparameters", tuple(sorted(params.items())))

    @property
    def params(self) -> dict:
        return dict(self.hyperparameters)

    def to_json(self) -> dict:
        return {"kind": self.kind, "hyperparameters": self.params}

    @staticmethod
    def from_json(payload: dict) -> "ClassifierSpec":
        return ClassifierSpec(payload["kind"], payload["hyperparameters"])


@dataclass(frozen=True)
class Prediction:
    label: OutcomeLabel
    score: float


def default_grid(kind: str) -> list[ClassifierSpec]:
    """Stated default grids (the source settings are unpublished)."""
    if kind == KNN:
        return [ClassifierSpec(KNN, {"k": k}) for k in (3, 5, 7)]
    if kind == MLP:
        return [
            ClassifierSpec(MLP, {"hidden_width": h, "learning_rate": 0.01, "epochs": 500})
            for h in (16, 64)
        ]
    if kind == LINEAR_SVM:
        return [ClassifierSpec(LINEAR_SVM, {"C": c, "epochs": 200}) for c in (0.1, 1.0, 10.0)]
    if kind == RANDOM_FOREST:
        return [
            ClassifierSpec(
                RANDOM_FOREST, {"n_trees": 100, "min_leaf": 1, "features_per_split": None}
            )
        ]
    raise InvalidSpecError(f"unknown classifier kind {kind!r}")


DEFAULT_LABELER_SPEC = default_grid(RANDOM_FOREST)[0]


def _check_training_inputs(x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if x.ndim != 2:
        raise DimensionMismatchError("training matrix must be 2-D")
    if x.shape[0] != y.shape[0]:
        raise LengthMismatchError(f"{x.shape[0]} rows vs {y.shape[0]} labels")
    if not np.isfinite(x).all():
        raise NonFiniteInputError("training matrix contains non-finite values")
    classes = np.unique(y)
    if x.shape[0] >= 2 and classes.size < 2:
        raise SingleClassTrainingError("training labels contain a single class")
    return x, y


class KnnModel:
    """Stores the training set; votes among the k nearest rows by Euclidean
    distance, ties broken by lower training-row index."""

    def __init__(self, spec: ClassifierSpec, x: np.ndarray, y: np.ndarray, training_seed: int):
        self.spec = spec
        self.x = x
        self.y = y
        self.training_seed = training_seed

    @property
    def n_features(self) -> int:
        return self.x.shape[1]

    def predict_scores(self, x: np.ndarray) -> np.ndarray:
        k = min(self.spec.params["k"], self.x.shape[0])
        scores = np.empty(x.shape[0])
        positive = (self.y == OutcomeLabel.DECEASED).astype(np.float64)
        for start in range(0, x.shape[0], 256):
            block = x[start : start + 256]
            d2 = ((block[:, None, :] - self.x[None, :, :]) ** 2).sum(axis=2)
            order = np.argsort(d2, axis=1, kind="stable")[:, :k]
            scores[start : start + 256] = positive[order].mean(axis=1)
        return scores

    def fingerprint(self) -> str:
        return fingerprint("knn", repr(self.spec.hyperparameters), self.x, self.y)


class MlpModel:
    """One hidden layer of rectified units and a single logistic output,
    trained by full-batch gradient descent on the binary cross-entropy."""

    def __init__(self, spec, w1, b1, w2, b2, training_seed, loss_history):
        self.spec = spec
        self.w1 = w1
        self.b1 = b1
        self.w2 = w2
        self.b2 = b2
        self.training_seed = training_seed
        self.loss_history = loss_history

    @property
    def n_features(self) -> int:
        return self.w1.shape[0]

    def predict_scores(self, x: np.ndarray) -> np.ndarray:
        hidden = np.maximum(x @ self.w1 + self.b1, 0.0)
        return expit(hidden @ self.w2 + self.b2)

    def fingerprint(self) -> str:
        return fingerprint("mlp", repr(self.spec.hyperparameters), self.w1, self.b1, self.w2, self.b2)


def mlp_init(n_features: int, hidden_width: int, seed: int):
    """Symmetric-uniform weight init (scale 1/sqrt(fan_in)), zero biases."""
    rng = rng_for(seed, "mlp-init")
    a1 = 1.0 / math.sqrt(n_features)
    a2 = 1.0 / math.sqrt(hidden_width)
    w1 = rng.uniform(-a1, a1, size=(n_features, hidden_width))
    w2 = rng.uniform(-a2, a2, size=hidden_width)
    return w1, np.zeros(hidden_width), w2, 0.0


def mlp_loss_and_grads(w1, b1, w2, b2, x, y01):
    """Binary cross-entropy (via logits, numerically stable) and its exact
    gradients for the one-hidden-layer network."""
    n = x.shape[0]
    z1 = x @ w1 + b1
    a1 = np.maximum(z1, 0.0)
    z2 = a1 @ w2 + b2
    loss = float(np.mean(np.logaddexp(0.0, z2) - y01 * z2))
    dz2 = (expit(z2) - y01) / n
    gw2 = a1.T @ dz2
    gb2 = float(dz2.sum())
    da1 = np.outer(dz2, w2)
    dz1 = da1 * (z1 > 0.0)
    gw1 = x.T @ dz1
    gb1 = dz1.sum(axis=0)
    return loss, gw1, gb1, gw2, gb2


def _train_mlp(spec: ClassifierSpec, x: np.ndarray, y: np.ndarray, seed: int) -> MlpModel:
    params = spec.params
    w1, b1, w2, b2 = mlp_init(x.shape[1], params["hidden_width"], seed)
    y01 = (y == OutcomeLabel.DECEASED).astype(np.float64)
    lr = params["learning_rate"]
    history = []
    for _ in range(params["epochs"]):
        loss, gw1, gb1, gw2, gb2 = mlp_loss_and_grads(w1, b1, w2, b2, x, y01)
        history.append(loss)
        w1 = w1 - lr * gw1
        b1 = b1 - lr * gb1
        w2 = w2 - lr * gw2
        b2 = b2 - lr * gb2
    return MlpModel(spec, w1, b1, w2, b2, seed, tuple(history))


class LinearSvmModel:
    """L2-regularized linear hinge classifier; scores are the
    logistic-squashed margin."""

    def __init__(self, spec, w, b, training_seed):
        self.spec = spec
        self.w = w
        self.b = b
        self.training_seed = training_seed

    @property
    def n_features(self) -> int:
        return self.w.shape[0]

    def predict_scores(self, x: np.ndarray) -> np.ndarray:
        return expit(x @ self.w + self.b)

    def fingerprint(self) -> str:
        return fingerprint("svm", repr(self.spec.hyperparameters), self.w, self.b)


def _train_linear_svm(spec: ClassifierSpec, x: np.ndarray, y: np.ndarray, seed: int) -> LinearSvmModel:
    # Full-batch subgradient descent with the 1/(lambda*t) epoch schedule;
    # the bias is not regularized.
    params = spec.params
    n, p = x.shape
    lam = 1.0 / params["C"]
    sy = np.where(y == OutcomeLabel.DECEASED, 1.0, -1.0)
    w = np.zeros(p)
    b = 0.0
    for t in range(1, params["epochs"] + 1):
        margins = sy * (x @ w + b)
        viol = margins < 1.0
        gw = lam * w - (sy[viol, None] * x[viol]).sum(axis=0) / n
        gb = -sy[viol].sum() / n
        eta = 1.0 / (lam * t)
        w = w - eta * gw
        b = b - eta * gb
    return LinearSvmModel(spec, w, b, seed)


class _Tree:
    """Flat-array decision tree; feature < 0 marks a leaf storing the
    class-2 fraction of its bootstrap samples."""

    __slots__ = ("feature", "threshold", "left", "right", "p2")

    def __init__(self):
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.p2: list[float] = []

    def add_node(self) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.p2.append(0.0)
        return len(self.feature) - 1

    def apply(self, x: np.ndarray) -> np.ndarray:
        out = np.empty(x.shape[0])
        stack = [(0, np.arange(x.shape[0]))]
        while stack:
            node, rows = stack.pop()
            if self.feature[node] < 0:
                out[rows] = self.p2[node]
                continue
            mask = x[rows, self.feature[node]] <= self.threshold[node]
            if mask.any():
                stack.append((self.left[node], rows[mask]))
            if (~mask).any():
                stack.append((self.right[node], rows[~mask]))
        return out

    def state_arrays(self) -> tuple[np.ndarray, ...]:
        return (
            np.asarray(self.feature, dtype=np.int64),
            np.asarray(self.threshold, dtype=np.float64),
            np.asarray(self.left, dtype=np.int64),
            np.asarray(self.right, dtype=np.int64),
            np.asarray(self.p2, dtype=np.float64),
        )


def _best_gini_split(x, y01, rows, candidates, min_leaf):
    """Return (decrease, feature, threshold) of the best split or None.

    Candidates are scanned in the order drawn and thresholds ascending, with
    strictly-greater comparisons, so ties keep the earliest candidate.
    """
    n = rows.size
    total2 = y01[rows].sum()
    p2 = total2 / n
    parent_gini = 2.0 * p2 * (1.0 - p2)
    best = None
    for f in candidates:
        v = x[rows, f]
        order = np.argsort(v, kind="stable")
        vs = v[order]
        ys = y01[rows][order]
        boundary = np.flatnonzero(vs[:-1] < vs[1:])
        if boundary.size == 0:
            continue
        n_left = boundary + 1
        n_right = n - n_left
        valid = (n_left >= min_leaf) & (n_right >= min_leaf)
        if not valid.any():
            continue
        prefix2 = np.cumsum(ys)
        left2 = prefix2[boundary]
        right2 = total2 - left2
        pl = left2 / n_left
        pr = right2 / n_right
        weighted = (n_left * 2.0 * pl * (1.0 - pl) + n_right * 2.0 * pr * (1.0 - pr)) / n
        decrease = parent_gini - weighted
        decrease[~valid] = -np.inf
        i = int(np.argmax(decrease))
        if decrease[i] > 1e-12 and (best is None or decrease[i] > best[0]):
            cut = boundary[i]
            best = (float(decrease[i]), int(f), float((vs[cut] + vs[cut + 1]) / 2.0))
    return best


def _grow_tree(x, y01, rng, min_leaf, features_per_split):
    n, q = x.shape
    bootstrap = rng.integers(0, n, size=n)
    tree = _Tree()
    root = tree.add_node()
    stack = [(root, bootstrap)]
    while stack:
        node, rows = stack.pop()
        frac2 = float(y01[rows].mean())
        if frac2 in (0.0, 1.0) or rows.size < 2 * min_leaf:
            tree.p2[node] = frac2
            continue
        m = min(features_per_split, q)
        candidates = rng.choice(q, size=m, replace=False)
        best = _best_gini_split(x, y01, rows, candidates, min_leaf)
        if best is None:
            tree.p2[node] = frac2
            continue
        _, feature, threshold = best
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


class RandomForestModel:
    """Bagged Gini trees; the forest score is the fraction of trees voting
    class 2 (a tree votes class 2 when its leaf fraction is >= 0.5)."""

    def __init__(self, spec, trees, training_seed, n_features):
        self.spec = spec
        self.trees = trees
        self.training_seed = training_seed
        self._n_features = n_features

    @property
    def n_features(self) -> int:
        return self._n_features

    def predict_scores(self, x: np.ndarray) -> np.ndarray:
        votes = np.zeros(x.shape[0])
        for tree in self.trees:
            votes += tree.apply(x) >= 0.5
        return votes / len(self.trees)

    def fingerprint(self) -> str:
        parts = ["rf", repr(self.spec.hyperparameters)]
        for tree in self.trees:
            parts.extend(tree.state_arrays())
        return fingerprint(*parts)


def _train_random_forest(spec: ClassifierSpec, x: np.ndarray, y: np.ndarray, seed: int) -> RandomForestModel:
    params = spec.params
    q = x.shape[1]
    fps = params["features_per_split"] or max(1, math.ceil(math.sqrt(q)))
    y01 = (y == OutcomeLabel.DECEASED).astype(np.float64)
    trees = []
    for i in range(params["n_trees"]):
        rng = rng_for(seed, "tree", i)
        trees.append(_grow_tree(x, y01, rng, params["min_leaf"], fps))
    return RandomForestModel(spec, trees, seed, q)


_TRAINERS = {
    MLP: _train_mlp,
    LINEAR_SVM: _train_linear_svm,
    RANDOM_FOREST: _train_random_forest,
}

ClassifierModel = KnnModel | MlpModel | LinearSvmModel | RandomForestModel


def train_classifier(spec: ClassifierSpec, x: np.ndarray, y: np.ndarray, seed: int) -> ClassifierModel:
    """Fit the classifier described by `spec`. A single-row training set is
    permitted as a stated degenerate case; otherwise both classes must be
    present."""
    x, y = _check_training_inputs(x, y)
    if spec.kind == KNN:
        return KnnModel(spec, x, y, seed)
    return _TRAINERS[spec.kind](spec, x, y, seed)


def predict_scores(model: ClassifierModel, x: np.ndarray) -> np.ndarray:
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.n_features:
        raise DimensionMismatchError(
            f"matrix has {x.shape[1] if x.ndim == 2 else '?'} columns, model expects {model.n_features}"
        )
    return model.predict_scores(x)


def _label_from_score(score: float) -> OutcomeLabel:
    return OutcomeLabel.DECEASED if score >= 0.5 else OutcomeLabel.ALIVE


def predict(model: ClassifierModel, x: np.ndarray) -> list[Prediction]:
    scores = predict_scores(model, x)
    return [Prediction(label=_label_from_score(s), score=float(s)) for s in scores]


def ensemble_vote(predictions: Sequence[Sequence[Prediction]]) -> list[Prediction]:
    """Per-sample majority label with score = mean of member scores. Even
    splits go to the label favored by the mean score, then to class 1."""
    if len(predictions) < 2:
        raise LengthMismatchError("ensemble needs at least 2 member prediction lists")
    length = len(predictions[0])
    if any(len(p) != length for p in predictions):
        raise LengthMismatchError("member prediction lists differ in length")
    out = []
    for i in range(length):
        members = [p[i] for p in predictions]
        votes2 = sum(1 for m in members if m.label == OutcomeLabel.DECEASED)
        votes1 = len(members) - votes2
        mean_score = float(np.mean([m.score for m in members]))
        if votes2 > votes1:
            label = OutcomeLabel.DECEASED
        elif votes1 > votes2:
            label = OutcomeLabel.ALIVE
        else:
            label = OutcomeLabel.DECEASED if mean_score > 0.5 else OutcomeLabel.ALIVE
        out.append(Prediction(label=label, score=mean_score))
    return out


def accuracy(predictions: Sequence[Prediction], y: np.ndarray) -> float:
    y = np.asarray(y, dtype=np.int64)
    if len(predictions) != y.shape[0]:
        raise LengthMismatchError(f"{len(predictions)} predictions vs {y.shape[0]} labels")
    hits = sum(1 for p, t in zip(predictions, y) if int(p.label) == int(t))
    return hits / y.shape[0]


def grid_search(
    kind: str,
    grid: Sequence[ClassifierSpec],
    x: np.ndarray,
    y: np.ndarray,
    inner_folds: FoldPlan,
    seed: int,
) -> tuple[ClassifierSpec, list[tuple[ClassifierSpec, float]]]:
    """Mean inner-fold accuracy per spec; the best spec is the argmax with
    ties broken by earliest grid position. Only the given inner folds are
    touched."""
    if not grid:
        raise EmptyGridError("hyperparameter grid is empty")
    for spec in grid:
        if spec.kind != kind:
            raise InvalidSpecError(f"grid entry kind {spec.kind} != requested {kind}")
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    table: list[tuple[ClassifierSpec, float]] = []
    best_i = 0
    best_acc = -1.0
    for gi, spec in enumerate(grid):
        fold_accs = []
        for f in range(inner_folds.k):
            tr = np.asarray(inner_folds.training_for(f), dtype=np.int64)
            va = np.asarray(inner_folds.folds[f], dtype=np.int64)
            model = train_classifier(spec, x[tr], y[tr], child_seed(seed, "grid", gi, f))
            fold_accs.append(accuracy(predict(model, x[va]), y[va]))
        mean_acc = float(np.mean(fold_accs))
        table.append((spec, mean_acc))
        if mean_acc > best_acc:
            best_acc = mean_acc
            best_i = gi
    return grid[best_i], table
