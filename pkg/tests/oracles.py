"""Independent brute-force oracles used to freeze and cross-check expected
values. These deliberately avoid the implementation's code paths: plain
loops, exhaustive enumeration and numerical quadrature only."""

from __future__ import annotations

import math
from itertools import combinations

import numpy as np
from scipy.integrate import quad


def km_product_limit_brute(records):
    """Product-limit survival estimates as (event_time, survival) pairs,
    computed with literal loops over the definition."""
    times = [r.time for r in records]
    events = [r.event for r in records]
    event_times = sorted({t for t, e in zip(times, events) if e})
    out = []
    s = 1.0
    for t in event_times:
        n_at_risk = sum(1 for ti in times if ti >= t)
        deaths = sum(1 for ti, ei in zip(times, events) if ti == t and ei)
        s *= 1.0 - deaths / n_at_risk
        out.append((t, s))
    return out


def cindex_exhaustive(records, risks):
    """Harrell's C by literal enumeration of all ordered pairs."""
    n = len(records)
    num = 0.0
    comparable = 0
    for i in range(n):
        for j in range(n):
            if i == j or not records[i].event or not (records[i].time < records[j].time):
                continue
            comparable += 1
            if risks[i] > risks[j]:
                num += 1.0
            elif risks[i] == risks[j]:
                num += 0.5
    if comparable == 0:
        raise ValueError("no comparable pairs")
    return num / comparable


def logrank_statistic_brute(group_a, group_b):
    """Two-group log-rank statistic by hand O/E/V tabulation."""
    ta = [r.time for r in group_a]
    ea = [r.event for r in group_a]
    tb = [r.time for r in group_b]
    eb = [r.event for r in group_b]
    event_times = sorted(
        {t for t, e in zip(ta, ea) if e} | {t for t, e in zip(tb, eb) if e}
    )
    o_minus_e = 0.0
    variance = 0.0
    for t in event_times:
        na = sum(1 for x in ta if x >= t)
        nb = sum(1 for x in tb if x >= t)
        n = na + nb
        if n < 2:
            continue
        da = sum(1 for x, e in zip(ta, ea) if x == t and e)
        db = sum(1 for x, e in zip(tb, eb) if x == t and e)
        d = da + db
        o_minus_e += da - d * na / n
        variance += d * (na / n) * (nb / n) * (n - d) / (n - 1)
    if variance <= 0:
        return 0.0
    return o_minus_e**2 / variance


def t_two_sided_p_quadrature(t_value, df):
    """Two-tailed Student-t p-value by numerical integration of the density."""

    def pdf(x):
        c = math.exp(
            math.lgamma((df + 1) / 2.0) - math.lgamma(df / 2.0)
        ) / math.sqrt(df * math.pi)
        return c * (1.0 + x * x / df) ** (-(df + 1) / 2.0)

    tail, _ = quad(pdf, abs(t_value), np.inf)
    return 2.0 * tail


def pca_eigh_oracle(train):
    """Principal directions via eigendecomposition of the sample covariance."""
    train = np.asarray(train, dtype=np.float64)
    mean = train.mean(axis=0)
    cov = np.cov(train - mean, rowvar=False, ddof=1)
    eigvals, eigvecs = np.linalg.eigh(np.atleast_2d(cov))
    order = np.argsort(eigvals)[::-1]
    eigvals = eigvals[order]
    components = eigvecs[:, order].T
    ratios = eigvals / eigvals.sum()
    return mean, components, ratios


def hotelling_exhaustive_p(pooled, n1, statistic_fn, observed):
    """Exact permutation p over all size-n1 group assignments."""
    n = pooled.shape[0]
    total = 0
    count = 0
    for group in combinations(range(n), n1):
        rest = [i for i in range(n) if i not in group]
        t_star = statistic_fn(pooled[list(group)], pooled[rest])
        total += 1
        if t_star >= observed - 1e-12:
            count += 1
    return count / total


def nearest_class_mean_accuracy(values, labels):
    """Accuracy of classifying each row by its nearest class mean."""
    values = np.asarray(values)
    labels = np.asarray(labels)
    mean1 = values[labels == 1].mean(axis=0)
    mean2 = values[labels == 2].mean(axis=0)
    d1 = ((values - mean1) ** 2).sum(axis=1)
    d2 = ((values - mean2) ** 2).sum(axis=1)
    predicted = np.where(d2 < d1, 2, 1)
    return float((predicted == labels).mean())
