"""Goodness-of-fit, independence and convergence diagnostics."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Union

import numpy as np

from . import specfun
from .specfun import DistributionSpec, RngLike

SIGNIFICANCE = 0.01

CdfLike = Union[DistributionSpec, Callable[[np.ndarray], np.ndarray]]


@dataclass
class TestReport:
    name: str
    statistic: float
    p_value: float | None
    passed: bool
    n: int
    significance: float = SIGNIFICANCE
    seed: int | None = None
    details: str = ""
    extra: dict = field(default_factory=dict)

    __test__ = False  # not a pytest class

    def __post_init__(self):
        if self.p_value is not None and not 0.0 <= self.p_value <= 1.0:
            raise ValueError(f"p-value {self.p_value} outside [0, 1]")

    @property
    def verdict(self) -> str:
        return "pass" if self.passed else "fail"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["verdict"] = self.verdict
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def write_reports_jsonl(path, reports) -> None:
    with open(path, "w") as fh:
        for r in reports:
            fh.write(r.to_json() + "\n")


def _clean(samples) -> np.ndarray:
    x = np.asarray(samples, dtype=float).ravel()
    if np.isnan(x).any():
        raise ValueError("samples contain NaN")
    return x


def kolmogorov_sf(lam: float) -> float:
    """Asymptotic P(sqrt(n) D_n > lam), series truncated below 1e-12."""
    if lam <= 0.1:
        # 1 - sf < 1e-50 here
        return 1.0
    if lam < 1.18:
        # Jacobi-transformed series, fast for small lam
        c = math.pi**2 / (8.0 * lam * lam)
        total, k = 0.0, 1
        while True:
            term = math.exp(-((2 * k - 1) ** 2) * c)
            total += term
            if term < 1e-12 * max(total, 1e-300) or k > 100:
                break
            k += 1
        return min(1.0, max(0.0, 1.0 - math.sqrt(2.0 * math.pi) / lam * total))
    total, k, sign = 0.0, 1, 1.0
    while True:
        term = math.exp(-2.0 * k * k * lam * lam)
        total += sign * term
        if term < 1e-12 or k > 100:
            break
        sign, k = -sign, k + 1
    return min(1.0, max(0.0, 2.0 * total))


def ks_test(samples, cdf: CdfLike, significance: float = SIGNIFICANCE, name: str = "ks",
            seed: int | None = None) -> TestReport:
    """One-sample Kolmogorov-Smirnov test with the asymptotic p-value."""
    x = np.sort(_clean(samples))
    n = x.size
    if n < 100:
        raise ValueError("KS test needs at least 100 samples")
    F = specfun.cdf(cdf, x) if isinstance(cdf, DistributionSpec) else np.asarray(cdf(x), float)
    i = np.arange(1, n + 1)
    d = float(max(np.max(i / n - F), np.max(F - (i - 1) / n)))
    sn = math.sqrt(n)
    p = kolmogorov_sf((sn + 0.12 + 0.11 / sn) * d)
    target = str(cdf) if isinstance(cdf, DistributionSpec) else getattr(cdf, "__name__", "cdf")
    return TestReport(name, d, p, p >= significance, n, significance, seed, f"vs {target}")


def lag_correlation(series, lag: int) -> float:
    """Pearson correlation between ``series[:-lag]`` and ``series[lag:]``."""
    x = _clean(series)
    if lag < 0:
        raise ValueError("lag must be >= 0")
    if x.size <= lag + 30:
        raise ValueError("series too short for this lag")
    a = x[: x.size - lag] if lag else x
    b = x[lag:]
    a = a - a.mean()
    b = b - b.mean()
    den = math.sqrt(float(a @ a) * float(b @ b))
    if den == 0:
        raise ValueError("correlation undefined for a constant series")
    return float(a @ b) / den


def _quantile_bins(v: np.ndarray, bins: int) -> np.ndarray:
    order = np.argsort(v, kind="stable")
    idx = np.empty(v.size, dtype=np.int64)
    idx[order] = np.arange(v.size) * bins // v.size
    return idx


def chi2_independence(pairs, bins: int = 8, significance: float = SIGNIFICANCE,
                      name: str = "chi2_independence", seed: int | None = None) -> TestReport:
    """Chi-square test of independence on an equiprobable ``bins x bins`` grid."""
    xy = np.asarray(pairs, dtype=float)
    if xy.ndim != 2 or xy.shape[1] != 2:
        raise ValueError("pairs must have shape (n, 2)")
    if np.isnan(xy).any():
        raise ValueError("pairs contain NaN")
    n = xy.shape[0]
    if bins < 2 or n / bins**2 < 20:
        raise ValueError(f"{n} pairs give fewer than 20 expected counts per cell at {bins} bins")
    bx = _quantile_bins(xy[:, 0], bins)
    by = _quantile_bins(xy[:, 1], bins)
    obs = np.zeros((bins, bins))
    np.add.at(obs, (bx, by), 1.0)
    exp = np.outer(obs.sum(1), obs.sum(0)) / n
    stat = float(np.sum((obs - exp) ** 2 / exp))
    dof = (bins - 1) ** 2
    p = specfun.regularized_gamma_q(dof / 2.0, stat / 2.0)
    return TestReport(name, stat, p, p >= significance, n, significance, seed, f"dof={dof}")


def gamma_fit_mom(samples) -> tuple[float, float]:
    """Method-of-moments Gamma fit: (mean^2 / var, mean / var)."""
    x = _clean(samples)
    if x.size < 1000:
        raise ValueError("need at least 1000 samples")
    if np.any(x <= 0):
        raise ValueError("samples must be positive")
    m = float(x.mean())
    v = float(x.var(ddof=1))
    if v <= 0:
        raise ValueError("zero sample variance")
    return m * m / v, m / v


def quantile_levels(m: int) -> np.ndarray:
    return (np.arange(m) + 0.5) / m


def quantile_distance(a, b, m_quantiles: int = 1000) -> float:
    """Mean absolute gap between empirical quantiles of two samples at m levels."""
    if m_quantiles < 100:
        raise ValueError("use at least 100 quantile levels")
    lv = quantile_levels(m_quantiles)
    return float(np.mean(np.abs(np.quantile(_clean(a), lv) - np.quantile(_clean(b), lv))))


def wasserstein1_vs_spec(samples, spec: DistributionSpec, m_quantiles: int = 1000,
                         rng: RngLike = 0, reference_size: int = 200_000) -> float:
    """Quantile-averaged W1 distance between ``samples`` and a Monte Carlo draw from ``spec``."""
    ref = specfun.sample(spec, rng, size=reference_size)
    return quantile_distance(samples, ref, m_quantiles)
