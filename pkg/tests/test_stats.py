import math

import numpy as np
import pytest
from scipy import stats as sps

from todgap.analysis.stats import bootstrap_ci, log_ratio_t_test, pearson_r, welch_t_test


def test_welch_matches_scipy():
    rng = np.random.default_rng(0)
    for _ in range(50):
        a = rng.normal(3, rng.uniform(0.2, 2), rng.integers(2, 40))
        b = rng.normal(3.3, rng.uniform(0.2, 2), rng.integers(2, 40))
        ours, ref = welch_t_test(a, b), sps.ttest_ind(a, b, equal_var=False)
        assert ours.t == pytest.approx(ref.statistic, abs=1e-9)
        assert ours.p == pytest.approx(ref.pvalue, abs=1e-9)


def test_welch_degenerate():
    assert welch_t_test([2, 2], [2, 2]).p == 1.0
    r = welch_t_test([3, 3], [2, 2])
    assert r.p == 0.0 and r.t == math.inf and r.to_json()["t"] == "inf"
    with pytest.raises(ValueError):
        welch_t_test([1], [1, 2])


def test_log_ratio_matches_scipy():
    rng = np.random.default_rng(1)
    for _ in range(50):
        base = rng.integers(1, 6, 20).astype(float)
        inj = np.clip(base + rng.integers(-1, 3, 20), 1, 5)
        ours = log_ratio_t_test(list(zip(inj, base)))
        ref = sps.ttest_1samp(np.log(inj / base), 0.0, alternative="greater")
        if not math.isfinite(ours.t):
            continue
        assert ours.p == pytest.approx(ref.pvalue, abs=1e-9)


def test_log_ratio_degenerate_and_drops(caplog):
    assert log_ratio_t_test([(3, 3)] * 5).p == 0.5
    assert log_ratio_t_test([(4, 2)] * 5).p == 0.0
    assert log_ratio_t_test([(2, 4)] * 5).p == 1.0
    r = log_ratio_t_test([(4, 2), (3, 2), (0, 2), (5, 4)])
    assert r.df == 2 and "dropping" in caplog.text
    with pytest.raises(ValueError):
        log_ratio_t_test([(1, 1), (0, 1)])


def test_bootstrap_ci():
    rng = np.random.default_rng(2)
    x = rng.normal(0, 1, 500)
    lo, hi = bootstrap_ci(x, 1000, seed=3)
    assert lo < x.mean() < hi
    assert (lo, hi) == bootstrap_ci(x, 1000, seed=3)
    rows = np.array([[1, 1], [3, 1], [2, 2]])
    lo, hi = bootstrap_ci(rows, 200, seed=0, statistic=lambda a: a[:, 0].sum() / a[:, 1].sum())
    assert 1.0 <= lo <= hi <= 3.0
    with pytest.raises(ValueError):
        bootstrap_ci([1.0], 10)


def test_pearson():
    assert pearson_r([1, 2, 3], [2, 4, 6]) == pytest.approx(1.0)
    assert pearson_r([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0)
    rng = np.random.default_rng(4)
    x, y = rng.normal(size=30), rng.normal(size=30)
    assert pearson_r(x, y) == pytest.approx(sps.pearsonr(x, y)[0], abs=1e-12)
    with pytest.raises(ValueError):
        pearson_r([1, 1], [1, 2])
