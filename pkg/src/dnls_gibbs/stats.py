"""Small Monte Carlo statistics helpers.

Standard errors of nonlinear estimators (ratios, covariances, Richardson
combinations of several ratios computed on one sample) go through per-sample
influence values psi_i: the estimator is approximately its target plus
mean(psi), so its standard error is sqrt(sum psi_i^2)/n. Linear combinations
of estimators on the same sample combine their influence arrays linearly,
which keeps the correlations right.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats as sps


@dataclass(frozen=True)
class Estimate:
    value: float
    stderr: float

    def __iter__(self):
        yield self.value
        yield self.stderr

    def as_dict(self):
        return {"value": self.value, "stderr": self.stderr}


def mean_se(x) -> Estimate:
    x = np.asarray(x, dtype=float)
    n = x.size
    if n == 0:
        return Estimate(float("nan"), float("nan"))
    se = x.std(ddof=1) / np.sqrt(n) if n > 1 else float("inf")
    return Estimate(float(x.mean()), float(se))


def se_of(psi) -> float:
    psi = np.asarray(psi, dtype=float)
    return float(np.sqrt(np.sum(psi * psi)) / psi.size)


def ratio(num, den):
    """mean(num)/mean(den) with its influence array."""
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    d = den.mean()
    if d == 0:
        raise ZeroDivisionError("ratio estimator with zero denominator mean")
    r = num.mean() / d
    return float(r), (num - r * den) / d


def mean_influence(x):
    x = np.asarray(x, dtype=float)
    m = x.mean()
    return float(m), x - m


def covariance(x, y) -> Estimate:
    """Sample covariance with a delta-method standard error."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    dx = x - x.mean()
    dy = y - y.mean()
    c = float(np.mean(dx * dy))
    return Estimate(c, se_of(dx * dy - c))


def ess(w) -> float:
    """(sum w)^2 / sum w^2."""
    w = np.asarray(w, dtype=float)
    s2 = float(np.sum(w * w))
    return float(np.sum(w)) ** 2 / s2 if s2 > 0 else 0.0


def top_weight_share(w, fraction: float = 1e-3) -> float:
    """Share of sum(w) carried by the largest ``fraction`` of the weights."""
    w = np.sort(np.asarray(w, dtype=float))[::-1]
    if w.size == 0 or w.sum() == 0:
        return 0.0
    k = max(1, int(np.ceil(fraction * w.size)))
    return float(w[:k].sum() / w.sum())


def weighted_mean_diff(w, o0, oT):
    """Self-normalised means of o0 and oT and of their paired difference."""
    w = np.asarray(w, dtype=float)
    W = w.sum()
    m0 = float(w @ o0 / W)
    mT = float(w @ oT / W)
    x = np.asarray(oT, dtype=float) - np.asarray(o0, dtype=float)
    d = float(w @ x / W)
    se = float(np.sqrt(np.sum((w * (x - d)) ** 2)) / W)
    return m0, mT, d, se


def weighted_mean(w, x):
    """Self-normalised mean sum w x / sum w with its influence array (per sample)."""
    w = np.asarray(w, dtype=float)
    x = np.asarray(x, dtype=float)
    return ratio(w * x, w)


def wilson(k: int, n: int, conf: float = 0.99) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if n <= 0:
        return 0.0, 1.0
    z = sps.norm.ppf(0.5 + conf / 2)
    p = k / n
    den = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / den
    half = z * np.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
    return float(max(0.0, centre - half)), float(min(1.0, centre + half))


def richardson_weights(h1: float, h2: float, power: float = 2.0) -> tuple[float, float]:
    """Coefficients (c1, c2) with c1 x(h1) + c2 x(h2) cancelling an h^power error."""
    r = (h2 / h1) ** power
    # x(h) = x0 + a h^p  ->  x0 = (x(h2) - r x(h1)) / (1 - r)
    return -r / (1 - r), 1 / (1 - r)


def z_score(a: Estimate, b: Estimate) -> float:
    s = np.hypot(a.stderr, b.stderr)
    return float((a.value - b.value) / s) if s > 0 else (0.0 if a.value == b.value else float("inf"))
