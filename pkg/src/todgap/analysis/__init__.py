"""Statistics and experiment orchestration.

Only the pure statistics are re-exported here; the experiment and report
helpers live in :mod:`todgap.analysis.experiments` and
:mod:`todgap.analysis.report`.
"""

from .stats import TTestResult, bootstrap_ci, log_ratio_t_test, pearson_r, welch_t_test

__all__ = ["TTestResult", "bootstrap_ci", "log_ratio_t_test", "pearson_r", "welch_t_test"]
