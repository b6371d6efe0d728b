"""Ensemble statistics: law distances, circular uniformity, small-action frequencies."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

CI_LEVEL = 0.95


def ks_critical(n: int, m: int, alpha: float = 0.01) -> float:
    """Asymptotic two-sample KS critical value ``c(alpha) sqrt((n+m)/(nm))``."""
    c = np.sqrt(-0.5 * np.log(alpha / 2))
    return float(c * np.sqrt((n + m) / (n * m)))


def _as_2d(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise ValueError("samples must be 1-D or 2-D (n_samples, dim)")
    return x


def law_distance(samples_a, samples_b) -> float:
    """Largest coordinatewise two-sample Kolmogorov-Smirnov statistic.

    This compares one-dimensional marginals only, so it is a proxy for weak
    convergence rather than a metric on joint laws.

    Raises
    ------
    ValueError
        If either sample is empty or the dimensions differ.
    """
    a, b = _as_2d(samples_a), _as_2d(samples_b)
    if a.shape[0] == 0 or b.shape[0] == 0:
        raise ValueError("samples must be nonempty")
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"dimension mismatch: {a.shape[1]} vs {b.shape[1]}")
    return float(max(stats.ks_2samp(a[:, j], b[:, j]).statistic for j in range(a.shape[1])))


def law_distance_pvalues(samples_a, samples_b) -> np.ndarray:
    a, b = _as_2d(samples_a), _as_2d(samples_b)
    return np.array([stats.ks_2samp(a[:, j], b[:, j]).pvalue for j in range(a.shape[1])])


@dataclass
class AngleUniformity:
    """Per-mode circular statistics; NaN angles are excluded and counted."""

    moment: np.ndarray  # |mean exp(i phi)|
    ci_low: np.ndarray
    ci_high: np.ndarray
    ks: np.ndarray  # KS statistic against U[0, 2pi)
    rayleigh_p: np.ndarray
    n: np.ndarray
    excluded: np.ndarray

    def uniform_ok(self, alpha: float = 0.01) -> np.ndarray:
        return self.rayleigh_p > alpha


def angle_uniformity(samples) -> AngleUniformity:
    """First circular moment magnitude and KS distance to uniform, per mode.

    The interval for the moment is a delta-method interval at 95%, clipped to
    [0, 1]. ``rayleigh_p`` is the Rayleigh test p-value
    ``exp(-n R^2)`` (large-sample form) for the uniform null.
    """
    x = _as_2d(samples)
    m = x.shape[1]
    out = {k: np.zeros(m) for k in ("moment", "lo", "hi", "ks", "p")}
    n_used = np.zeros(m, dtype=int)
    excl = np.zeros(m, dtype=int)
    z = stats.norm.ppf(0.5 + CI_LEVEL / 2)
    for j in range(m):
        col = x[:, j]
        ok = np.isfinite(col)
        excl[j] = int((~ok).sum())
        phi = np.mod(col[ok], 2 * np.pi)
        n = phi.size
        n_used[j] = n
        if n == 0:
            for k in out:
                out[k][j] = np.nan
            continue
        c, s = np.cos(phi), np.sin(phi)
        C, S = c.mean(), s.mean()
        R = float(np.hypot(C, S))
        if R > 0 and n > 1:
            proj = (C * c + S * s) / R  # derivative of |mean| along the mean direction
            se = proj.std(ddof=1) / np.sqrt(n)
        else:
            se = np.sqrt(0.5 / n)
        out["moment"][j] = R
        out["lo"][j] = max(0.0, R - z * se)
        out["hi"][j] = min(1.0, R + z * se)
        out["ks"][j] = stats.kstest(phi, stats.uniform(0, 2 * np.pi).cdf).statistic
        out["p"][j] = float(np.exp(-n * R**2))
    return AngleUniformity(out["moment"], out["lo"], out["hi"], out["ks"], out["p"], n_used, excl)


@dataclass(frozen=True)
class Proportion:
    p: float
    low: float
    high: float
    count: int
    n: int


def proportion(count: int, n: int, level: float = CI_LEVEL) -> Proportion:
    """Frequency with an exact (Clopper-Pearson) binomial interval."""
    if n == 0:
        return Proportion(float("nan"), 0.0, 1.0, 0, 0)
    ci = stats.binomtest(int(count), int(n)).proportion_ci(confidence_level=level, method="exact")
    return Proportion(count / n, float(ci.low), float(ci.high), int(count), int(n))


def small_action_probability(samples, delta: float, k: int | None = None) -> Proportion:
    """Empirical ``P{I_k < delta}`` with a binomial confidence interval.

    ``samples`` is either a 1-D array of actions or ``(n, m)`` with ``k`` the
    1-based mode to use. NaN entries are ignored.
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    x = np.asarray(samples, dtype=float)
    if x.ndim == 2:
        if k is None:
            raise ValueError("k is required for multi-mode samples")
        x = x[:, k - 1]
    x = x[np.isfinite(x)]
    return proportion(int(np.sum(x < delta)), x.size)


@dataclass(frozen=True)
class Correlation:
    r: float
    low: float
    high: float
    n: int

    def contains_zero(self) -> bool:
        return self.low <= 0.0 <= self.high


def correlation(x, y, level: float = CI_LEVEL) -> Correlation:
    """Pearson correlation with a Fisher-z confidence interval; NaN pairs dropped."""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    ok = np.isfinite(x) & np.isfinite(y)
    x, y = x[ok], y[ok]
    n = x.size
    if n < 4 or x.std() == 0 or y.std() == 0:
        return Correlation(float("nan"), -1.0, 1.0, n)
    r = float(np.corrcoef(x, y)[0, 1])
    z = np.arctanh(np.clip(r, -0.999999999, 0.999999999))
    half = stats.norm.ppf(0.5 + level / 2) / np.sqrt(n - 3)
    return Correlation(r, float(np.tanh(z - half)), float(np.tanh(z + half)), n)
