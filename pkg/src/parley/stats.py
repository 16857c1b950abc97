"""Statistical procedures for outcome analysis.

Rank tests (Mann-Whitney U, Wilcoxon signed-rank) with exact small-sample
enumeration and tie/continuity-corrected normal approximations, Cliff's delta
and rank-biserial effect sizes, Benjamini-Hochberg step-up FDR, seeded
percentile bootstrap intervals, and a fractional-logit GLM (binomial family,
logit link) with cluster-robust sandwich standard errors and average marginal
effects.

Thresholds for the exact modes (n+m <= 12 without ties for MWU, n <= 12 for
the signed-rank test) and the use of continuity corrections are documented
here so replications with other toolkits can toggle them.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np
from scipy.special import expit, ndtr

ALTERNATIVES = ("two_sided", "greater", "less")


class StatsError(ValueError):
    pass


class EmptySampleError(StatsError):
    pass


class AllZeroDifferencesError(StatsError):
    pass


class OutOfRangePError(StatsError):
    pass


class RankDeficientDesignError(StatsError):
    pass


class SingleClusterError(StatsError):
    pass


@dataclass(frozen=True)
class TestResult:
    statistic: float
    p_value: float
    alternative: str
    effect: float | None = None
    method: str = ""

    def to_dict(self) -> dict:
        return {
            "statistic": self.statistic,
            "p_value": self.p_value,
            "alternative": self.alternative,
            "effect": self.effect,
            "method": self.method,
        }


def _check_alternative(alternative: str) -> str:
    if alternative not in ALTERNATIVES:
        raise StatsError(f"alternative must be one of {ALTERNATIVES}")
    return alternative


def _tail_p(cdf_le: float, cdf_ge: float, alternative: str) -> float:
    if alternative == "greater":
        return min(1.0, cdf_ge)
    if alternative == "less":
        return min(1.0, cdf_le)
    return min(1.0, 2.0 * min(cdf_le, cdf_ge))


def _midranks(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="mergesort")
    ranks = np.empty(len(values), dtype=float)
    sorted_values = values[order]
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and sorted_values[j + 1] == sorted_values[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


# ---------------------------------------------------------------------------
# Cliff's delta


def cliffs_delta(x: Sequence[float], y: Sequence[float]) -> float:
    """P(X > Y) - P(X < Y) over all cross pairs."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size == 0 or y.size == 0:
        raise EmptySampleError("cliffs_delta needs nonempty samples")
    y_sorted = np.sort(y)
    greater = np.searchsorted(y_sorted, x, side="left").sum()
    less_or_equal = np.searchsorted(y_sorted, x, side="right").sum()
    less = x.size * y.size - less_or_equal
    return float((int(greater) - int(less)) / (x.size * y.size))


# ---------------------------------------------------------------------------
# Mann-Whitney U


def _exact_u_distribution(n: int, m: int) -> np.ndarray:
    """Counts of rank-subsets by U value over all C(n+m, n) labelings (no ties)."""
    max_u = n * m
    # dp[k][u]: subsets of size k of ranks seen so far with U contribution u
    dp = np.zeros((n + 1, max_u + 1), dtype=float)
    dp[0, 0] = 1.0
    for rank in range(1, n + m + 1):
        for k in range(min(rank, n), 0, -1):
            # picking `rank` as the k-th smallest x contributes (rank - k) to U
            contribution = rank - k
            dp[k, contribution:] += dp[k - 1, : max_u + 1 - contribution]
    return dp[n]


def mann_whitney_u(
    x: Sequence[float],
    y: Sequence[float],
    alternative: str = "two_sided",
) -> TestResult:
    """Mann-Whitney U with Cliff's delta attached.

    Exact p by enumeration when n+m <= 12 and the pooled sample has no ties;
    otherwise a normal approximation with tie correction and continuity
    correction. The statistic is U for the first sample (count of (x, y) pairs
    with x > y, ties counted half).
    """
    _check_alternative(alternative)
    x = np.asarray(list(x), dtype=float)
    y = np.asarray(list(y), dtype=float)
    if x.size == 0 or y.size == 0:
        raise EmptySampleError("mann_whitney_u needs nonempty samples")
    n, m = x.size, y.size
    pooled = np.concatenate([x, y])
    ranks = _midranks(pooled)
    rank_sum_x = float(ranks[:n].sum())
    u_x = rank_sum_x - n * (n + 1) / 2.0
    delta = cliffs_delta(x, y)

    has_ties = len(np.unique(pooled)) < pooled.size
    if n + m <= 12 and not has_ties:
        counts = _exact_u_distribution(n, m)
        total = counts.sum()
        u_int = int(round(u_x))
        cdf_le = counts[: u_int + 1].sum() / total
        cdf_ge = counts[u_int:].sum() / total
        p = _tail_p(cdf_le, cdf_ge, alternative)
        return TestResult(statistic=u_x, p_value=p, alternative=alternative, effect=delta,
                          method="mann-whitney-u exact enumeration")

    N = n + m
    mu = n * m / 2.0
    _, tie_counts = np.unique(pooled, return_counts=True)
    tie_term = float(((tie_counts ** 3) - tie_counts).sum())
    variance = n * m / 12.0 * ((N + 1) - tie_term / (N * (N - 1)))
    if variance <= 0:
        p = 1.0
    else:
        sd = math.sqrt(variance)
        if alternative == "greater":
            z = (u_x - mu - 0.5) / sd
            p = 1.0 - float(ndtr(z))
        elif alternative == "less":
            z = (u_x - mu + 0.5) / sd
            p = float(ndtr(z))
        else:
            z = (abs(u_x - mu) - 0.5) / sd
            p = 2.0 * (1.0 - float(ndtr(max(z, 0.0))))
    return TestResult(statistic=u_x, p_value=min(p, 1.0), alternative=alternative, effect=delta,
                      method="mann-whitney-u normal approximation, tie + continuity corrected")


# ---------------------------------------------------------------------------
# Wilcoxon signed-rank


def _exact_wplus_p(ranks: np.ndarray, w_obs: float, alternative: str) -> float:
    """Tail probability of W+ over all 2^n equiprobable sign assignments."""
    n = len(ranks)
    le = ge = 0
    for mask in range(1 << n):
        w = 0.0
        for index in range(n):
            if mask >> index & 1:
                w += ranks[index]
        if w <= w_obs + 1e-12:
            le += 1
        if w >= w_obs - 1e-12:
            ge += 1
    total = float(1 << n)
    return _tail_p(le / total, ge / total, alternative)


def wilcoxon_signed_rank(
    x: Sequence[float],
    y: Sequence[float] | None = None,
    alternative: str = "two_sided",
) -> TestResult:
    """Wilcoxon signed-rank test with the rank-biserial correlation attached.

    Accepts paired samples (x, y) or precomputed differences (y omitted).
    Zero differences are dropped. Exact p for n <= 12 (sign-pattern
    enumeration over midranks, so tied magnitudes are handled); otherwise
    normal approximation with tie correction and continuity correction.
    r_rb = (W+ - W-) / (W+ + W-).
    """
    _check_alternative(alternative)
    diffs = np.asarray(list(x), dtype=float)
    if y is not None:
        diffs = diffs - np.asarray(list(y), dtype=float)
    diffs = diffs[diffs != 0.0]
    if diffs.size == 0:
        raise AllZeroDifferencesError("wilcoxon needs at least one nonzero difference")
    n = diffs.size
    ranks = _midranks(np.abs(diffs))
    w_plus = float(ranks[diffs > 0].sum())
    w_minus = float(ranks[diffs < 0].sum())
    r_rb = (w_plus - w_minus) / (w_plus + w_minus)

    if n <= 12:
        p = _exact_wplus_p(ranks, w_plus, alternative)
        return TestResult(statistic=w_plus, p_value=p, alternative=alternative, effect=r_rb,
                          method="wilcoxon signed-rank exact enumeration")

    mu = ranks.sum() / 2.0
    variance = float((ranks ** 2).sum()) / 4.0  # midrank form absorbs tie correction
    sd = math.sqrt(variance)
    if alternative == "greater":
        z = (w_plus - mu - 0.5) / sd
        p = 1.0 - float(ndtr(z))
    elif alternative == "less":
        z = (w_plus - mu + 0.5) / sd
        p = float(ndtr(z))
    else:
        z = (abs(w_plus - mu) - 0.5) / sd
        p = 2.0 * (1.0 - float(ndtr(max(z, 0.0))))
    return TestResult(statistic=w_plus, p_value=min(p, 1.0), alternative=alternative, effect=r_rb,
                      method="wilcoxon signed-rank normal approximation, tie + continuity corrected")


# ---------------------------------------------------------------------------
# Benjamini-Hochberg


def bh_adjust(p_values: Sequence[float]) -> list[float]:
    """Step-up FDR q-values: q_(k) = min_{j >= k} p_(j) * m / j, clipped to 1."""
    ps = np.asarray(list(p_values), dtype=float)
    if ps.size == 0:
        return []
    if np.any((ps < 0) | (ps > 1)):
        raise OutOfRangePError("p-values must lie in [0, 1]")
    m = ps.size
    order = np.argsort(ps, kind="mergesort")
    scaled = ps[order] * m / np.arange(1, m + 1)
    running_min = np.minimum.accumulate(scaled[::-1])[::-1]
    qs = np.minimum(running_min, 1.0)
    out = np.empty(m)
    out[order] = qs
    return out.tolist()


# ---------------------------------------------------------------------------
# bootstrap

_STATISTICS = {
    "mean": np.mean,
    "median": np.median,
}


def bootstrap_ci(
    values: Sequence[float],
    statistic: str = "mean",
    b: int = 10_000,
    level: float = 0.95,
    seed: int | None = None,
) -> tuple[float, float]:
    """Seeded percentile bootstrap interval for a named statistic.

    ``statistic`` is one of mean, median, share ("share" is the mean of 0/1
    indicators and validates its input). Deterministic given the seed, which
    is required.
    """
    if seed is None:
        raise StatsError("bootstrap_ci requires an explicit seed")
    data = np.asarray(list(values), dtype=float)
    if data.size == 0:
        raise EmptySampleError("bootstrap_ci needs nonempty values")
    if statistic == "share":
        if not np.all(np.isin(data, (0.0, 1.0))):
            raise StatsError("share statistic expects 0/1 indicator values")
        fn = np.mean
    else:
        try:
            fn = _STATISTICS[statistic]
        except KeyError:
            raise StatsError(f"unknown statistic {statistic!r}") from None
    rng = np.random.default_rng(seed)
    stats = np.empty(b)
    chunk = max(1, min(b, 4_000_000 // max(data.size, 1)))
    done = 0
    while done < b:
        take = min(chunk, b - done)
        indices = rng.integers(0, data.size, size=(take, data.size))
        stats[done : done + take] = fn(data[indices], axis=1)
        done += take
    alpha = (1.0 - level) / 2.0
    low, high = np.quantile(stats, [alpha, 1.0 - alpha])
    return float(low), float(high)


# ---------------------------------------------------------------------------
# fractional logit


def read_regression_rows(path: str | Path) -> list[dict[str, Any]]:
    """Regression rows from CSV or JSONL (by extension).

    CSV cells that parse as numbers are coerced to float; the caller declares
    column roles (outcome, predictors, fixed effects, cluster) when fitting.
    """
    path = Path(path)
    if path.suffix.lower() == ".csv":
        with open(path, newline="", encoding="utf-8") as fh:
            raw_rows = list(csv.DictReader(fh))
        rows: list[dict[str, Any]] = []
        for raw in raw_rows:
            row: dict[str, Any] = {}
            for key, value in raw.items():
                try:
                    row[key] = float(value)
                except (TypeError, ValueError):
                    row[key] = value
            rows.append(row)
        return rows
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


@dataclass(frozen=True)
class RegressionResult:
    coefficients: dict[str, float]
    cluster_robust_se: dict[str, float]
    p_values: dict[str, float]
    ames: dict[str, float]  # percentage points, predictors only
    n: int
    n_clusters: int
    reference_levels: dict[str, str] = field(default_factory=dict)
    method: str = ""

    def to_dict(self) -> dict:
        return {
            "coefficients": self.coefficients,
            "cluster_robust_se": self.cluster_robust_se,
            "p_values": self.p_values,
            "ames": self.ames,
            "n": self.n,
            "n_clusters": self.n_clusters,
            "reference_levels": self.reference_levels,
            "method": self.method,
        }


def fractional_logit_fit(
    rows: Sequence[Mapping[str, Any]],
    predictors: Sequence[str],
    fixed_effects: Sequence[str] = (),
    cluster: str | None = "pairing",
    outcome: str = "p",
    tol: float = 1e-12,
    max_iter: int = 200,
) -> RegressionResult:
    """Binomial-family logit-link GLM for outcomes in [0, 1].

    Fixed-effect labels are dummy-coded with the lexicographically first level
    as reference. Standard errors are the cluster-robust sandwich with
    cluster-summed scores and a G/(G-1) small-sample factor; p-values are
    two-sided normal. AMEs (per predictor, in percentage points) are
    100 * beta * mean(mu * (1 - mu)).
    """
    if not rows:
        raise EmptySampleError("no rows")
    y = np.asarray([float(r[outcome]) for r in rows])
    if np.any((y < 0) | (y > 1)):
        raise StatsError("outcome must lie in [0, 1]")

    columns: list[str] = ["(intercept)"]
    design: list[np.ndarray] = [np.ones(len(rows))]
    for name in predictors:
        columns.append(name)
        design.append(np.asarray([float(r[name]) for r in rows]))
    reference_levels: dict[str, str] = {}
    for fe in fixed_effects:
        levels = sorted({str(r[fe]) for r in rows})
        reference_levels[fe] = levels[0]
        for level_value in levels[1:]:
            columns.append(f"{fe}[{level_value}]")
            design.append(np.asarray([1.0 if str(r[fe]) == level_value else 0.0 for r in rows]))
    X = np.column_stack(design)
    n, p = X.shape
    if np.linalg.matrix_rank(X) < p:
        raise RankDeficientDesignError("design matrix is rank deficient after dummy coding")

    clusters = None
    if cluster is not None:
        clusters = np.asarray([str(r[cluster]) for r in rows])
        if len(set(clusters.tolist())) < 2:
            raise SingleClusterError("cluster-robust SEs need at least 2 clusters")

    beta = np.zeros(p)
    for _ in range(max_iter):
        eta = X @ beta
        mu = expit(eta)
        w = np.clip(mu * (1.0 - mu), 1e-12, None)
        z = eta + (y - mu) / w
        wx = X * w[:, None]
        new_beta = np.linalg.solve(X.T @ wx, wx.T @ z)
        if np.max(np.abs(new_beta - beta)) < tol:
            beta = new_beta
            break
        beta = new_beta
    eta = X @ beta
    mu = expit(eta)
    w = np.clip(mu * (1.0 - mu), 1e-12, None)
    bread = np.linalg.inv(X.T @ (X * w[:, None]))

    scores = X * (y - mu)[:, None]
    if clusters is not None:
        unique = sorted(set(clusters.tolist()))
        G = len(unique)
        meat = np.zeros((p, p))
        for label in unique:
            s = scores[clusters == label].sum(axis=0)
            meat += np.outer(s, s)
        cov = (G / (G - 1)) * bread @ meat @ bread
        method = f"fractional logit (IRLS), cluster-robust sandwich over {G} clusters with G/(G-1) correction"
        n_clusters = G
    else:
        meat = scores.T @ scores
        cov = bread @ meat @ bread
        method = "fractional logit (IRLS), heteroskedasticity-robust sandwich"
        n_clusters = n
    se = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    with np.errstate(divide="ignore", invalid="ignore"):
        zstat = np.where(se > 0, beta / se, np.inf * np.sign(beta))
    pvals = 2.0 * (1.0 - ndtr(np.abs(zstat)))

    mean_weight = float(np.mean(mu * (1.0 - mu)))
    ames = {name: 100.0 * float(beta[k]) * mean_weight
            for k, name in enumerate(columns) if name in predictors}

    return RegressionResult(
        coefficients={name: float(beta[k]) for k, name in enumerate(columns)},
        cluster_robust_se={name: float(se[k]) for k, name in enumerate(columns)},
        p_values={name: float(pvals[k]) for k, name in enumerate(columns)},
        ames=ames,
        n=n,
        n_clusters=n_clusters,
        reference_levels=reference_levels,
        method=method,
    )
