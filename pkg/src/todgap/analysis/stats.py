"""Significance tests, bootstrap intervals and correlation."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import stats as sps

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TTestResult:
    t: float
    df: float
    p: float

    def to_json(self) -> dict:
        return {"t": _finite_or_str(self.t), "df": _finite_or_str(self.df), "p": self.p}


def _finite_or_str(x: float):
    return x if math.isfinite(x) else repr(x)


def bootstrap_ci(values: Sequence, resamples: int = 2000, seed: int = 0,
                 statistic: Callable[[np.ndarray], float] | None = None,
                 level: float = 0.95) -> tuple[float, float]:
    """Percentile bootstrap interval.

    ``values`` holds one entry per resampling unit (a scalar, or a row of
    per-unit quantities when ``statistic`` pools them). ``statistic`` maps a
    resampled array to a number and defaults to the mean.
    """
    arr = np.asarray(values, dtype=float)
    if len(arr) < 2:
        raise ValueError("bootstrap_ci needs at least two units")
    if statistic is None:
        statistic = lambda a: float(np.mean(a, axis=0))  # noqa: E731
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, len(arr), size=(resamples, len(arr)))
    stats = np.array([statistic(arr[row]) for row in idx])
    tail = (1 - level) / 2 * 100
    lo, hi = np.percentile(stats, [tail, 100 - tail])
    return float(lo), float(hi)


def welch_t_test(a: Sequence[float], b: Sequence[float]) -> TTestResult:
    """Two-sided Welch t-test with Satterthwaite degrees of freedom."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    na, nb = len(a), len(b)
    if na < 2 or nb < 2:
        raise ValueError("welch_t_test needs at least two values per group")
    va, vb = a.var(ddof=1) / na, b.var(ddof=1) / nb
    diff = a.mean() - b.mean()
    se2 = va + vb
    if se2 == 0:
        if diff == 0:
            return TTestResult(0.0, float(na + nb - 2), 1.0)
        log.warning("welch_t_test: zero variance in both groups with different means")
        return TTestResult(math.copysign(math.inf, diff), float(na + nb - 2), 0.0)
    t = diff / math.sqrt(se2)
    df = se2 ** 2 / (va ** 2 / (na - 1) + vb ** 2 / (nb - 1))
    p = float(2 * sps.t.sf(abs(t), df))
    return TTestResult(float(t), float(df), min(p, 1.0))


def log_ratio_t_test(pairs: Sequence[tuple[float, float]]) -> TTestResult:
    """One-sided one-sample t-test of ln(injected / baseline) > 0.

    Pairs with a nonpositive member are dropped with a warning.
    """
    logs = []
    for injected, baseline in pairs:
        if injected <= 0 or baseline <= 0:
            log.warning("log_ratio_t_test: dropping nonpositive pair (%r, %r)", injected, baseline)
            continue
        logs.append(math.log(injected / baseline))
    x = np.asarray(logs, dtype=float)
    n = len(x)
    if n < 2:
        raise ValueError("log_ratio_t_test needs at least two valid pairs")
    mean = float(x.mean())
    sd = float(x.std(ddof=1))
    df = float(n - 1)
    # identical ratios give an exactly zero spread up to rounding
    if sd <= 1e-12 * max(1.0, abs(mean)):
        if abs(mean) <= 1e-15:
            return TTestResult(0.0, df, 0.5)
        log.warning("log_ratio_t_test: zero variance in log ratios")
        return TTestResult(math.copysign(math.inf, mean), df, 0.0 if mean > 0 else 1.0)
    t = mean / (sd / math.sqrt(n))
    return TTestResult(t, df, float(sps.t.sf(t, df)))


def pearson_r(x: Sequence[float], y: Sequence[float]) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) != len(y) or len(x) < 2:
        raise ValueError("pearson_r needs two equal-length sequences of length >= 2")
    dx, dy = x - x.mean(), y - y.mean()
    sxx, syy = float(dx @ dx), float(dy @ dy)
    if sxx == 0 or syy == 0:
        raise ValueError("pearson_r is undefined for zero variance")
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))
