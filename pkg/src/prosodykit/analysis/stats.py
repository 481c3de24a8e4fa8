"""Statistics used across the perception studies.

One-way ANOVA with omega-squared, Tukey HSD on the studentized range,
paired t-tests, chi-square goodness of fit, percentile bootstrap CIs,
and Pearson correlation. Decompositions are computed directly from
sums of squares so that raw-data and summary-statistics entry points
agree to machine precision; p-values come from the standard
distribution CDFs. All tests are two-sided.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import stats as _sps


class AnalysisError(ValueError):
    """Invalid data for a statistical procedure."""


@dataclass(frozen=True)
class StatTestResult:
    statistic: float
    df: tuple[float, ...]
    p_value: float
    effect_size: float | None = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.p_value <= 1.0:
            raise AnalysisError(f"p-value {self.p_value} outside [0, 1]")


# ----------------------------------------------------------------- ANOVA

def _anova_from_sums(
    ns: np.ndarray, means: np.ndarray, ssw: float
) -> StatTestResult:
    k = len(ns)
    n_total = float(ns.sum())
    grand = float((ns * means).sum() / n_total)
    ssb = float((ns * (means - grand) ** 2).sum())
    sst = ssb + ssw
    df_b = k - 1
    df_w = n_total - k

    if ssw == 0.0:
        if ssb == 0.0:
            raise AnalysisError(
                "zero variance: all observations identical"
            )
        # perfectly separated constants: F unbounded
        return StatTestResult(
            statistic=math.inf,
            df=(float(df_b), float(df_w)),
            p_value=0.0,
            effect_size=ssb / sst,
        )

    msb = ssb / df_b
    msw = ssw / df_w
    f_stat = msb / msw
    p = float(_sps.f.sf(f_stat, df_b, df_w))
    omega_sq = (ssb - df_b * msw) / (sst + msw)
    return StatTestResult(
        statistic=float(f_stat),
        df=(float(df_b), float(df_w)),
        p_value=p,
        effect_size=float(omega_sq),
    )


def _validated_groups(groups) -> list[np.ndarray]:
    arrays = [np.asarray(g, dtype=float) for g in groups]
    if len(arrays) < 2:
        raise AnalysisError("need at least 2 groups")
    for i, g in enumerate(arrays):
        if g.ndim != 1 or len(g) < 2:
            raise AnalysisError(f"group {i} needs at least 2 observations")
        if not np.all(np.isfinite(g)):
            raise AnalysisError(f"group {i} has non-finite values")
    return arrays


def one_way_anova(groups) -> StatTestResult:
    """F test of equal group means; effect_size is omega-squared."""
    arrays = _validated_groups(groups)
    ns = np.array([len(g) for g in arrays], dtype=float)
    means = np.array([g.mean() for g in arrays])
    ssw = float(sum(((g - g.mean()) ** 2).sum() for g in arrays))
    return _anova_from_sums(ns, means, ssw)


def anova_from_summary(
    n_per_group, means: Sequence[float], sds: Sequence[float]
) -> StatTestResult:
    """Same test from (n, mean, sd) summaries; matches raw to 1e-9."""
    means = np.asarray(means, dtype=float)
    sds = np.asarray(sds, dtype=float)
    if np.isscalar(n_per_group):
        ns = np.full(len(means), float(n_per_group))
    else:
        ns = np.asarray(n_per_group, dtype=float)
    if not (len(ns) == len(means) == len(sds)):
        raise AnalysisError("n, means, sds lengths differ")
    if len(means) < 2:
        raise AnalysisError("need at least 2 groups")
    if np.any(ns < 2):
        raise AnalysisError("every group needs n >= 2")
    if np.any(sds < 0):
        raise AnalysisError("negative sd")
    ssw = float(((ns - 1) * sds**2).sum())
    return _anova_from_sums(ns, means, ssw)


# ------------------------------------------------------------- Tukey HSD

@dataclass(frozen=True)
class TukeyPair:
    group_i: int
    group_j: int
    mean_diff: float  # mean_i - mean_j
    q_stat: float
    p_value: float
    reject: bool


def tukey_hsd(groups, alpha: float = 0.05) -> list[TukeyPair]:
    """All pairwise comparisons via the studentized range."""
    arrays = _validated_groups(groups)
    k = len(arrays)
    n_total = sum(len(g) for g in arrays)
    df_w = n_total - k
    ssw = float(sum(((g - g.mean()) ** 2).sum() for g in arrays))
    if ssw == 0.0:
        raise AnalysisError("zero within-group variance")
    msw = ssw / df_w

    out = []
    for i in range(k):
        for j in range(i + 1, k):
            gi, gj = arrays[i], arrays[j]
            diff = float(gi.mean() - gj.mean())
            se = math.sqrt(msw * (1 / len(gi) + 1 / len(gj)) / 2.0)
            q = abs(diff) / se
            p = float(_sps.studentized_range.sf(q, k, df_w))
            p = min(1.0, max(0.0, p))
            out.append(
                TukeyPair(i, j, diff, q, p, reject=p < alpha)
            )
    return out


# ------------------------------------------------------------ chi-square

def chi_square_gof(
    counts, expected=None
) -> StatTestResult:
    """Goodness of fit against expected counts (uniform by default)."""
    obs = np.asarray(counts, dtype=float)
    if obs.ndim != 1 or len(obs) < 2:
        raise AnalysisError("need at least 2 categories")
    if np.any(obs < 0):
        raise AnalysisError("negative count")
    total = obs.sum()
    if total <= 0:
        raise AnalysisError("all counts zero")
    if expected is None:
        exp = np.full(len(obs), total / len(obs))
    else:
        exp = np.asarray(expected, dtype=float)
        if len(exp) != len(obs):
            raise AnalysisError("expected length mismatch")
    if np.any(exp == 0):
        raise AnalysisError("expected count of zero")
    stat = float((((obs - exp) ** 2) / exp).sum())
    df = len(obs) - 1
    return StatTestResult(
        statistic=stat,
        df=(float(df),),
        p_value=float(_sps.chi2.sf(stat, df)),
    )


# -------------------------------------------------------------- bootstrap

def bootstrap_ci(
    data,
    statistic: Callable[[np.ndarray], float],
    level: float = 0.95,
    seed: int = 0,
    n_resamples: int = 10_000,
) -> tuple[float, float]:
    """Percentile bootstrap interval; deterministic under seed."""
    x = np.asarray(data, dtype=float)
    if len(x) < 2:
        raise AnalysisError("need at least 2 observations")
    if not 0.0 <= level < 1.0:
        raise AnalysisError("level must be in [0, 1)")
    if n_resamples < 10_000:
        raise AnalysisError("n_resamples must be >= 10000")
    if level == 0.0:
        s = float(statistic(x))
        return (s, s)
    rng = np.random.default_rng(seed)
    n = len(x)
    estimates = np.empty(n_resamples)
    for i in range(n_resamples):
        estimates[i] = statistic(x[rng.integers(0, n, n)])
    lo_q = 100.0 * (1.0 - level) / 2.0
    lo, hi = np.percentile(estimates, [lo_q, 100.0 - lo_q])
    return (float(lo), float(hi))


# --------------------------------------------------------------- Pearson

def pearson_r(x, y) -> float:
    """Product-moment correlation."""
    xa = np.asarray(x, dtype=float)
    ya = np.asarray(y, dtype=float)
    if len(xa) != len(ya):
        raise AnalysisError("x and y lengths differ")
    if len(xa) < 2:
        raise AnalysisError("need at least 2 points")
    dx = xa - xa.mean()
    dy = ya - ya.mean()
    sx = float((dx**2).sum())
    sy = float((dy**2).sum())
    if sx == 0.0 or sy == 0.0:
        raise AnalysisError("zero variance")
    return float((dx * dy).sum() / math.sqrt(sx * sy))


# -------------------------------------------------------------- paired t

@dataclass(frozen=True)
class PairedTResult:
    t_stat: float
    df: float
    p_value: float
    mean_diff: float
    ci95_lo: float
    ci95_hi: float


def paired_t(a, b) -> PairedTResult:
    """Two-sided paired t-test with a 95% CI on the mean difference.

    Degenerate-variance conventions: identical pairs give t=0, p=1;
    a constant nonzero difference gives t of matching-sign infinity
    with p reported as 0 (below any printable threshold).
    """
    xa = np.asarray(a, dtype=float)
    xb = np.asarray(b, dtype=float)
    if xa.shape != xb.shape or xa.ndim != 1:
        raise AnalysisError("paired samples must be equal-length vectors")
    n = len(xa)
    if n < 2:
        raise AnalysisError("need at least 2 pairs")
    d = xa - xb
    mean = float(d.mean())
    sd = float(d.std(ddof=1))
    df = float(n - 1)
    if sd == 0.0:
        if mean == 0.0:
            return PairedTResult(0.0, df, 1.0, 0.0, 0.0, 0.0)
        t = math.copysign(math.inf, mean)
        return PairedTResult(t, df, 0.0, mean, mean, mean)
    se = sd / math.sqrt(n)
    t = mean / se
    p = float(2.0 * _sps.t.sf(abs(t), df))
    crit = float(_sps.t.ppf(0.975, df))
    return PairedTResult(
        t_stat=float(t),
        df=df,
        p_value=min(1.0, p),
        mean_diff=mean,
        ci95_lo=mean - crit * se,
        ci95_hi=mean + crit * se,
    )
