"""Shared hypothesis-testing machinery: the paired t-test and a
ridge-regularized high-dimensional two-sample mean test with a
permutation null."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from math import comb

import numpy as np
from scipy.special import betainc

from .errors import (
    DimensionMismatchError,
    LengthMismatchError,
    NonFiniteInputError,
    TooFewPairsError,
    TooFewSamplesError,
)
from .seeding import rng_for


@dataclass(frozen=True)
class TestResult:
    """Generic hypothesis-test outcome: statistic, p-value in [0, 1] and a
    meta field carrying degrees of freedom or the permutation count."""

    statistic: float
    p_value: float
    method: str
    meta: dict

    def to_json(self) -> dict:
        return {
            "statistic": self.statistic,
            "p_value": self.p_value,
            "method": self.method,
            "meta": self.meta,
        }


@dataclass(frozen=True)
class PairedSample:
    a: tuple[float, ...]
    b: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "a", tuple(float(x) for x in self.a))
        object.__setattr__(self, "b", tuple(float(x) for x in self.b))
        if len(self.a) != len(self.b):
            raise LengthMismatchError(f"paired sample lengths differ: {len(self.a)} vs {len(self.b)}")
        if not all(np.isfinite(self.a)) or not all(np.isfinite(self.b)):
            raise NonFiniteInputError("paired samples must be finite")


def student_t_sf_two_sided(t: float, df: int) -> float:
    """P(|T| >= t) for Student's t with df degrees of freedom, via the
    regularized incomplete beta function."""
    if df < 1:
        raise TooFewPairsError(f"degrees of freedom must be >= 1, got {df}")
    x = df / (df + t * t)
    return float(betainc(df / 2.0, 0.5, x))


def paired_t_test(sample: PairedSample) -> TestResult:
    """Two-tailed paired t-test on d = a - b with sample standard deviation
    (divisor m-1). Degenerate conventions: sd = 0 and mean(d) = 0 gives
    p = 1; sd = 0 with mean(d) != 0 gives p = 0."""
    m = len(sample.a)
    if m < 2:
        raise TooFewPairsError(f"need at least 2 pairs, got {m}")
    d = np.asarray(sample.a, dtype=np.float64) - np.asarray(sample.b, dtype=np.float64)
    mean = float(d.mean())
    sd = float(d.std(ddof=1))
    df = m - 1
    if sd == 0.0:
        if mean == 0.0:
            return TestResult(0.0, 1.0, "paired_t", {"df": df})
        sign = 1.0 if mean > 0 else -1.0
        return TestResult(sign * float("inf"), 0.0, "paired_t", {"df": df})
    t = mean / (sd / np.sqrt(m))
    return TestResult(float(t), student_t_sf_two_sided(t, df), "paired_t", {"df": df})


def hotelling_statistic(xa: np.ndarray, xb: np.ndarray, shrinkage: float = 0.1) -> float:
    """Ridge-regularized Hotelling T^2:
    T = (na*nb/(na+nb)) * d' (S + lambda I)^{-1} d with S the pooled sample
    covariance and lambda = shrinkage * trace(S)/p."""
    xa = np.asarray(xa, dtype=np.float64)
    xb = np.asarray(xb, dtype=np.float64)
    na, nb = xa.shape[0], xb.shape[0]
    p = xa.shape[1]
    delta = xa.mean(axis=0) - xb.mean(axis=0)
    ca = np.atleast_2d(np.cov(xa, rowvar=False, ddof=1))
    cb = np.atleast_2d(np.cov(xb, rowvar=False, ddof=1))
    pooled = ((na - 1) * ca + (nb - 1) * cb) / (na + nb - 2)
    lam = shrinkage * float(np.trace(pooled)) / p
    if lam <= 0:
        lam = np.finfo(np.float64).tiny
    solved = np.linalg.solve(pooled + lam * np.eye(p), delta)
    return float((na * nb / (na + nb)) * delta @ solved)


def _canonical_pool(xa: np.ndarray, xb: np.ndarray) -> tuple[np.ndarray, int, int]:
    # Byte-lexicographic ordering of the inputs makes the permutation stream
    # and hence the p-value identical under a group swap.
    if xa.tobytes() <= xb.tobytes():
        return np.vstack([xa, xb]), xa.shape[0], xb.shape[0]
    return np.vstack([xb, xa]), xb.shape[0], xa.shape[0]


def hdts_test(xa: np.ndarray, xb: np.ndarray, n_perm: int = 999, seed: int = 0, shrinkage: float = 0.1) -> TestResult:
    """High-dimensional two-sample mean test with a permutation null.

    The observed statistic is the ridge-regularized Hotelling T^2, valid
    when the feature count exceeds the sample count. When the number of
    distinct group assignments C(na+nb, na) is at most n_perm the null is
    enumerated exhaustively (p = #{T* >= T}/total, identity included);
    otherwise n_perm seeded permutations give
    p = (1 + #{T* >= T}) / (n_perm + 1). Either way p >= 1/(n_perm + 1).
    """
    xa = np.ascontiguousarray(xa, dtype=np.float64)
    xb = np.ascontiguousarray(xb, dtype=np.float64)
    if xa.ndim != 2 or xb.ndim != 2 or xa.shape[1] != xb.shape[1]:
        raise DimensionMismatchError("both groups must be 2-D with the same column count")
    if xa.shape[0] < 2 or xb.shape[0] < 2:
        raise TooFewSamplesError("each group needs at least 2 rows")
    if not (np.isfinite(xa).all() and np.isfinite(xb).all()):
        raise NonFiniteInputError("groups must be finite")
    if n_perm < 99:
        raise TooFewSamplesError(f"n_perm must be >= 99, got {n_perm}")

    observed = hotelling_statistic(xa, xb, shrinkage)
    pooled, n1, n2 = _canonical_pool(xa, xb)
    n = n1 + n2

    n_assignments = comb(n, n1)
    if n_assignments <= n_perm:
        count = 0
        all_rows = frozenset(range(n))
        for group in combinations(range(n), n1):
            rest = sorted(all_rows - set(group))
            t_star = hotelling_statistic(pooled[list(group)], pooled[rest], shrinkage)
            if t_star >= observed - 1e-12:
                count += 1
        p = count / n_assignments
        meta = {"n_perm": n_assignments, "exhaustive": True}
    else:
        count = 0
        for i in range(n_perm):
            idx = rng_for(seed, "hdts", i).permutation(n)
            t_star = hotelling_statistic(pooled[idx[:n1]], pooled[idx[n1:]], shrinkage)
            if t_star >= observed:
                count += 1
        p = (1 + count) / (n_perm + 1)
        meta = {"n_perm": n_perm, "exhaustive": False}

    return TestResult(observed, float(p), "hdts_permutation", meta)
