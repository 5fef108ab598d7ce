"""Binning and two-sample t-test primitives.

The Student-t tail probability is computed from the regularized incomplete
beta function (continued-fraction evaluation), with no lookup tables. All
functions are pure and reentrant.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import ParameterError

_EPS = 1e-16
_TINY = 1e-300
_MAX_ITER = 500


def _betacf(a: float, b: float, x: float) -> float:
    # modified Lentz evaluation of the incomplete beta continued fraction
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, _MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    raise ArithmeticError(f"incomplete beta failed to converge (a={a}, b={b}, x={x})")


def betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta function I_x(a, b)."""
    if a <= 0 or b <= 0:
        raise ParameterError("betainc requires a > 0 and b > 0")
    if not 0.0 <= x <= 1.0:
        raise ParameterError(f"betainc argument outside [0, 1]: {x}")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    ln_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                + a * math.log(x) + b * math.log1p(-x))
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def student_t_sf2(t: float, df: float) -> float:
    """Two-tailed survival probability P(|T| >= |t|) for Student's t with `df` dof."""
    if df <= 0:
        raise ParameterError("degrees of freedom must be positive")
    if math.isnan(t):
        return math.nan
    if math.isinf(t):
        return 0.0
    x = df / (df + t * t)
    return min(1.0, max(0.0, betainc(df / 2.0, 0.5, x)))


class DegenerateSamples(enum.Enum):
    EQUAL = "equal"
    UNEQUAL = "unequal"


@dataclass(frozen=True)
class TTestResult:
    t_score: float
    df: float
    p_value: float


def two_sample_t(x: Sequence[float], y: Sequence[float], *, pooled: bool = False) -> TTestResult:
    """Two-sided independent two-sample t-test.

    Welch's unequal-variance statistic and Welch-Satterthwaite degrees of
    freedom by default; ``pooled=True`` gives Student's equal-variance test.

    When both samples have zero variance the statistic is undefined; equal
    means give t = 0, p = 1 and unequal means give t = +/-inf, p = 0.
    """
    a = np.asarray(x, dtype=float)
    b = np.asarray(y, dtype=float)
    n1, n2 = len(a), len(b)
    if n1 < 2 or n2 < 2:
        raise ParameterError("each sample needs at least two observations")
    m1, m2 = math.fsum(a) / n1, math.fsum(b) / n2
    v1 = math.fsum((a - m1) ** 2) / (n1 - 1)
    v2 = math.fsum((b - m2) ** 2) / (n2 - 1)
    diff = m1 - m2
    if v1 == 0.0 and v2 == 0.0:
        df = float(n1 + n2 - 2)
        if diff == 0.0:
            return TTestResult(0.0, df, 1.0)
        return TTestResult(math.copysign(math.inf, diff), df, 0.0)
    if pooled:
        df = float(n1 + n2 - 2)
        sp2 = ((n1 - 1) * v1 + (n2 - 1) * v2) / df
        se = math.sqrt(sp2 * (1.0 / n1 + 1.0 / n2))
    else:
        q1, q2 = v1 / n1, v2 / n2
        se = math.sqrt(q1 + q2)
        df = (q1 + q2) ** 2 / (q1 * q1 / (n1 - 1) + q2 * q2 / (n2 - 1))
    t = diff / se
    return TTestResult(t, df, student_t_sf2(t, df))


class Feature(enum.Enum):
    PACKET_SIZE = "size"
    INTER_ARRIVAL = "iat"


@dataclass(frozen=True)
class DistributionVector:
    bin_edges: tuple[float, ...]
    counts: tuple[int, ...]
    feature: Feature = Feature.PACKET_SIZE

    def __post_init__(self):
        if len(self.counts) != len(self.bin_edges) - 1:
            raise ParameterError("counts must have one entry fewer than bin_edges")
        if any(c < 0 for c in self.counts):
            raise ParameterError("counts must be non-negative")

    @property
    def k(self) -> int:
        return len(self.counts)

    @property
    def total(self) -> int:
        return sum(self.counts)


def sturges_bins(m: int) -> int:
    return math.ceil(math.log2(m)) + 1


def freedman_diaconis_bins(samples: np.ndarray) -> int:
    """Bin count from the Freedman-Diaconis width, 0 when IQR or range is zero."""
    m = len(samples)
    q75, q25 = np.percentile(samples, [75, 25])
    iqr = q75 - q25
    rng = samples.max() - samples.min()
    if iqr <= 0 or rng <= 0:
        return 0
    h = 2.0 * iqr * m ** (-1.0 / 3.0)
    return math.ceil(rng / h)


def auto_bin_count(samples) -> int:
    a = np.asarray(samples, dtype=float)
    if a.size == 0:
        raise ParameterError("cannot bin an empty sample")
    if a.max() == a.min():
        return 1
    return max(sturges_bins(a.size), freedman_diaconis_bins(a))


def auto_bins(samples) -> tuple[float, ...]:
    """Equal-width edges over [min, max] with max(Sturges, Freedman-Diaconis) bins.

    A sample with zero range gets the single bin [v, v].
    """
    a = np.asarray(samples, dtype=float)
    k = auto_bin_count(a)
    lo, hi = float(a.min()), float(a.max())
    if lo == hi:
        return (lo, hi)
    edges = np.linspace(lo, hi, k + 1)
    edges[0], edges[-1] = lo, hi
    return tuple(float(e) for e in edges)


def histogram(samples, edges: Sequence[float], feature: Feature = Feature.PACKET_SIZE) -> DistributionVector:
    """Count samples per bin; out-of-range samples are clamped into the end bins.

    Bins are half-open except the last, which is closed on the right. A
    degenerate edge pair [v, v] forms one bin that receives everything.
    """
    e = np.asarray(edges, dtype=float)
    if e.ndim != 1 or len(e) < 2:
        raise ParameterError("need at least two bin edges")
    k = len(e) - 1
    if k > 1 and np.any(np.diff(e) <= 0):
        raise ParameterError("bin edges must be strictly increasing")
    a = np.asarray(samples, dtype=float)
    if k == 1:
        return DistributionVector(tuple(map(float, e)), (int(a.size),), feature)
    idx = np.searchsorted(e, a, side="right") - 1
    np.clip(idx, 0, k - 1, out=idx)
    counts = np.bincount(idx, minlength=k)
    return DistributionVector(tuple(map(float, e)), tuple(int(c) for c in counts), feature)


def welch_t_test(a: DistributionVector, b: DistributionVector, *, pooled: bool = False) -> TTestResult:
    """t-test treating the two per-bin count vectors as the two samples."""
    if a.bin_edges != b.bin_edges:
        raise ParameterError("distribution vectors must share bin edges")
    if a.k < 2:
        raise ParameterError("the t-test needs at least two bins")
    return two_sample_t(a.counts, b.counts, pooled=pooled)


def fisher_combine(*pvalues: float) -> float:
    """Fisher's method: chi-square survival of -2 * sum(ln p) with 2k dof."""
    k = len(pvalues)
    if k == 0:
        raise ParameterError("no p-values to combine")
    if any(p <= 0.0 for p in pvalues):
        return 0.0
    x = -2.0 * math.fsum(math.log(p) for p in pvalues)
    # closed form of the chi-square survival function for even dof
    half = x / 2.0
    term = 1.0
    acc = 1.0
    for i in range(1, k):
        term *= half / i
        acc += term
    return min(1.0, math.exp(-half) * acc)
