"""Principal component analysis via singular value decomposition of the
row-centered training matrix. Fit on training rows only; transform is pure."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, InvalidSpecError, TooFewRowsError, TooManyComponentsError
from .seeding import fingerprint


@dataclass(frozen=True)
class PcaPolicy:
    """Retention policy: exactly one of `variance_threshold` (cumulative
    explained-variance cutoff in (0, 1]) or `n_components`."""

    variance_threshold: float | None = 0.95
    n_components: int | None = None

    def __post_init__(self) -> None:
        if (self.variance_threshold is None) == (self.n_components is None):
            raise InvalidSpecError("set exactly one of variance_threshold or n_components")
        if self.variance_threshold is not None and not (0 < self.variance_threshold <= 1):
            raise InvalidSpecError(f"variance_threshold must lie in (0, 1], got {self.variance_threshold}")
        if self.n_components is not None and self.n_components < 1:
            raise InvalidSpecError(f"n_components must be positive, got {self.n_components}")

    def to_json(self) -> dict:
        if self.n_components is not None:
            return {"n_components": self.n_components}
        return {"variance_threshold": self.variance_threshold}


@dataclass(frozen=True, eq=False)
class PcaModel:
    """Fitted principal directions. `components` rows are orthonormal;
    `explained_variance_ratio` is nonincreasing with entries in [0, 1]."""

    mean: np.ndarray
    components: np.ndarray
    explained_variance_ratio: np.ndarray

    def __post_init__(self) -> None:
        for name in ("mean", "components", "explained_variance_ratio"):
            arr = np.array(getattr(self, name), dtype=np.float64, copy=True)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_components(self) -> int:
        return self.components.shape[0]

    @property
    def n_features(self) -> int:
        return self.components.shape[1]

    def fingerprint(self) -> str:
        return fingerprint("pca", self.mean, self.components, self.explained_variance_ratio)

    def to_json(self) -> dict:
        return {
            "mean": self.mean.tolist(),
            "components": self.components.tolist(),
            "explained_variance_ratio": self.explained_variance_ratio.tolist(),
        }


def _apply_sign_convention(components: np.ndarray) -> np.ndarray:
    out = components.copy()
    for i, row in enumerate(out):
        j = int(np.argmax(np.abs(row)))  # argmax takes the lowest index on ties
        if row[j] < 0:
            out[i] = -row
    return out


def fit_pca(train: np.ndarray, policy: PcaPolicy) -> PcaModel:
    """Fit principal directions on the training rows only.

    Components are the top right-singular vectors of the centered matrix.
    Under a variance threshold, q is the smallest count whose cumulative
    explained-variance ratio reaches the threshold (capped at the centered
    rank); with `n_components`, exactly that count is returned. Sign
    convention: each component's largest-magnitude entry is nonnegative.
    """
    train = np.asarray(train, dtype=np.float64)
    if train.ndim != 2 or train.shape[0] < 2:
        raise TooFewRowsError("PCA needs at least 2 training rows")
    n, p = train.shape
    max_q = min(n - 1, p)

    mean = train.mean(axis=0)
    centered = train - mean
    _, s, vt = np.linalg.svd(centered, full_matrices=False)

    variances = (s**2) / (n - 1)
    total = variances.sum()
    if total > 0:
        ratios = variances / total
    else:
        ratios = np.zeros_like(variances)
    rank_tol = max(n, p) * np.finfo(np.float64).eps * (s[0] if s.size else 0.0)
    rank = int(np.sum(s > rank_tol))

    if policy.n_components is not None:
        q = policy.n_components
        if q > max_q:
            raise TooManyComponentsError(f"requested {q} components, at most min(n-1, p) = {max_q} available")
    else:
        cap = min(max_q, rank) if rank > 0 else max_q
        cumulative = np.cumsum(ratios)
        reached = np.flatnonzero(cumulative >= policy.variance_threshold - 1e-12)
        q = int(reached[0]) + 1 if reached.size else cap
        q = max(1, min(q, cap))

    components = _apply_sign_convention(vt[:q])
    return PcaModel(mean=mean, components=components, explained_variance_ratio=ratios[:q])


def transform_pca(model: PcaModel, m: np.ndarray) -> np.ndarray:
    """Project rows onto the fitted directions: (m - mean) @ components.T."""
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[1] != model.n_features:
        raise DimensionMismatchError(
            f"matrix has {m.shape[1] if m.ndim == 2 else '?'} columns, model expects {model.n_features}"
        )
    return (m - model.mean) @ model.components.T


def inverse_transform_pca(model: PcaModel, scores: np.ndarray) -> np.ndarray:
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 2 or scores.shape[1] != model.n_components:
        raise DimensionMismatchError(
            f"scores have {scores.shape[1] if scores.ndim == 2 else '?'} columns, model has {model.n_components}"
        )
    return scores @ model.components + model.mean
