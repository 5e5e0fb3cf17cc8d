"""Statistical tests used throughout the verification suite.

Only the machinery the acceptance checks need: empirical-CDF
Kolmogorov-Smirnov tests (one and two sample, asymptotic p-values),
Poisson chi-square goodness of fit with safe binning, a chi-square
two-sample homogeneity test for integer-valued data (where KS p-values
are not calibrated because of ties), and moment estimators with standard
errors.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special


@dataclass(frozen=True)
class TestReport:
    """Outcome of one hypothesis test at a fixed significance level."""

    test_name: str
    statistic: float
    p_value: float
    n: tuple[int, ...]
    significance: float = 0.01
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 <= self.p_value <= 1.0:
            raise ValueError(f"p-value {self.p_value} outside [0, 1]")

    @property
    def passed(self) -> bool:
        return self.p_value > self.significance

    def to_dict(self) -> dict:
        return {
            "test_name": self.test_name,
            "statistic": self.statistic,
            "p_value": self.p_value,
            "n": list(self.n),
            "significance": self.significance,
            "pass": self.passed,
            **self.extra,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def kolmogorov_sf(x: float) -> float:
    """Survival function of the Kolmogorov distribution."""
    return float(special.kolmogorov(x))


def _clean(samples, min_n: int, name: str) -> np.ndarray:
    x = np.asarray(samples, dtype=float)
    if x.ndim != 1:
        x = x.ravel()
    if x.size < min_n:
        raise ValueError(f"{name} needs at least {min_n} samples, got {x.size}")
    return x


def ks_one_sample(samples, cdf, *, significance: float = 0.01) -> TestReport:
    """One-sample KS test of the samples against a given CDF.

    D is the exact sup distance between the empirical CDF and ``cdf``;
    the p-value is the asymptotic Kolmogorov tail at sqrt(n) * D.
    """
    x = np.sort(_clean(samples, 20, "ks_one_sample"))
    n = x.size
    try:
        f = np.asarray(cdf(x), dtype=float)
        if f.shape != x.shape:
            raise TypeError
    except Exception:
        f = np.array([cdf(v) for v in x], dtype=float)
    hi = np.arange(1, n + 1) / n - f
    lo = f - np.arange(0, n) / n
    d = float(max(hi.max(), lo.max()))
    p = kolmogorov_sf(math.sqrt(n) * d)
    return TestReport("ks_one_sample", d, p, (n,), significance)


def ks_two_sample(a, b, *, significance: float = 0.01) -> TestReport:
    """Two-sample KS test with the effective-size asymptotic p-value."""
    xa = np.sort(_clean(a, 20, "ks_two_sample"))
    xb = np.sort(_clean(b, 20, "ks_two_sample"))
    na, nb = xa.size, xb.size
    grid = np.concatenate([xa, xb])
    ca = np.searchsorted(xa, grid, side="right") / na
    cb = np.searchsorted(xb, grid, side="right") / nb
    d = float(np.abs(ca - cb).max())
    en = math.sqrt(na * nb / (na + nb))
    p = kolmogorov_sf(en * d)
    return TestReport("ks_two_sample", d, p, (na, nb), significance)


def _poisson_pmf(lam: float, k_max: int) -> np.ndarray:
    pmf = np.empty(k_max + 1)
    pmf[0] = math.exp(-lam)
    for k in range(1, k_max + 1):
        pmf[k] = pmf[k - 1] * lam / k
    return pmf


def _merge_bins(observed: np.ndarray, expected: np.ndarray, min_expected: float):
    """Pool adjacent categories until every expected count reaches the floor."""
    obs, exp = [], []
    acc_o = acc_e = 0.0
    for o, e in zip(observed, expected):
        acc_o += o
        acc_e += e
        if acc_e >= min_expected:
            obs.append(acc_o)
            exp.append(acc_e)
            acc_o = acc_e = 0.0
    if acc_e > 0.0:
        if exp:
            obs[-1] += acc_o
            exp[-1] += acc_e
        else:
            obs.append(acc_o)
            exp.append(acc_e)
    return np.array(obs), np.array(exp)


def poisson_gof(counts, lam: float, *, significance: float = 0.01,
                min_expected: float = 5.0) -> TestReport:
    """Chi-square goodness of fit of integer counts against Poisson(lam).

    Categories 0..K plus a tail bin, pooled so every expected count is at
    least ``min_expected``; the statistic is referred to chi-square with
    (bins - 1) degrees of freedom.
    """
    if not lam > 0:
        raise ValueError("lambda must be positive")
    x = np.asarray(counts)
    if x.size < 100:
        raise ValueError(f"poisson_gof needs at least 100 counts, got {x.size}")
    if np.issubdtype(x.dtype, np.floating):
        if not np.all(x == np.floor(x)):
            raise ValueError("counts must be integers")
        x = x.astype(np.int64)
    if (x < 0).any():
        raise ValueError("counts must be non-negative")
    if x.min() == x.max():
        raise ValueError("degenerate all-equal input")
    n = x.size
    k_max = int(x.max())
    pmf = _poisson_pmf(lam, k_max)
    observed = np.bincount(x, minlength=k_max + 2).astype(float)
    expected = n * np.append(pmf, max(1.0 - pmf.sum(), 0.0))
    obs, exp = _merge_bins(observed, expected, min_expected)
    if obs.size < 2:
        raise ValueError("too few usable bins after pooling")
    stat = float(((obs - exp) ** 2 / exp).sum())
    dof = obs.size - 1
    p = float(special.chdtrc(dof, stat))
    return TestReport(
        "poisson_gof", stat, p, (n,), significance,
        {"bins": int(obs.size), "lambda": lam},
    )


def chi2_two_sample(a, b, *, significance: float = 0.01,
                    min_expected: float = 5.0) -> TestReport:
    """Chi-square homogeneity test for two integer-valued samples.

    The calibrated replacement for a two-sample KS when the data are
    discrete counts (heavy ties make the KS null distribution invalid).
    Value categories are pooled jointly until both rows clear the
    expected-count floor.
    """
    xa = np.asarray(a, dtype=np.int64)
    xb = np.asarray(b, dtype=np.int64)
    if xa.size < 20 or xb.size < 20:
        raise ValueError("chi2_two_sample needs at least 20 samples per side")
    lo = min(xa.min(), xb.min())
    xa, xb = xa - lo, xb - lo
    width = int(max(xa.max(), xb.max())) + 1
    ca = np.bincount(xa, minlength=width).astype(float)
    cb = np.bincount(xb, minlength=width).astype(float)
    na, nb = xa.size, xb.size
    total = ca + cb
    # pool adjacent value bins until the smaller row's expected clears the floor
    share = min(na, nb) / (na + nb)
    obs_a, obs_b = [], []
    acc_a = acc_b = 0.0
    for oa, ob in zip(ca, cb):
        acc_a += oa
        acc_b += ob
        if (acc_a + acc_b) * share >= min_expected:
            obs_a.append(acc_a)
            obs_b.append(acc_b)
            acc_a = acc_b = 0.0
    if acc_a or acc_b:
        if obs_a:
            obs_a[-1] += acc_a
            obs_b[-1] += acc_b
        else:
            obs_a.append(acc_a)
            obs_b.append(acc_b)
    oa = np.array(obs_a)
    ob = np.array(obs_b)
    if oa.size < 2:
        raise ValueError("samples are essentially constant; no test possible")
    col = oa + ob
    ea = col * na / (na + nb)
    eb = col * nb / (na + nb)
    stat = float((((oa - ea) ** 2) / ea).sum() + (((ob - eb) ** 2) / eb).sum())
    dof = oa.size - 1
    p = float(special.chdtrc(dof, stat))
    return TestReport(
        "chi2_two_sample", stat, p, (na, nb), significance, {"bins": int(oa.size)}
    )


def mean_se(samples) -> tuple[float, float]:
    """Sample mean and its standard error s / sqrt(n)."""
    x = np.asarray(samples, dtype=float)
    if x.size < 2:
        raise ValueError("mean_se needs at least 2 samples")
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size))


def bootstrap_median_se(samples, n_boot: int = 400, seed: int = 0) -> tuple[float, float]:
    """Sample median and its bootstrap standard error."""
    x = np.asarray(samples, dtype=float)
    if x.size < 2:
        raise ValueError("bootstrap_median_se needs at least 2 samples")
    rng = np.random.Generator(np.random.Philox(key=seed))
    idx = rng.integers(0, x.size, size=(n_boot, x.size))
    meds = np.median(x[idx], axis=1)
    return float(np.median(x)), float(meds.std(ddof=1))
