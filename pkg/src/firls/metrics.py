"""Evaluation metrics and the per-solve report structure.

SNR uses the population variance convention (divide by N) so values are
reproducible bit-for-bit for identical inputs; the convention is echoed
into report metadata and CSV headers.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConfigError, UndefinedMetricError

VARIANCE_CONVENTION = "population"


def _pair(x0, x):
    x0 = np.asarray(x0, dtype=float)
    x = np.asarray(x, dtype=float)
    if x0.shape != x.shape:
        raise ConfigError("vectors must have equal length")
    return x0, x


def mse(x0, x):
    """Mean squared error between reference x0 and estimate x."""
    x0, x = _pair(x0, x)
    return float(np.mean((x - x0) ** 2))


def relative_error(x0, x):
    """||x - x0||_2 / ||x0||_2."""
    x0, x = _pair(x0, x)
    denom = np.linalg.norm(x0)
    if denom == 0:
        raise UndefinedMetricError("relative error undefined for zero reference")
    return float(np.linalg.norm(x - x0) / denom)


def snr(x0, x):
    """10 log10(var(x0) / MSE(x0, x)) in dB; +inf when x == x0."""
    x0, x = _pair(x0, x)
    vs = float(np.var(x0))
    if vs == 0:
        raise UndefinedMetricError("SNR undefined for constant reference")
    vn = mse(x0, x)
    if vn == 0:
        return math.inf
    return 10.0 * math.log10(vs / vn)


@dataclass
class IterationRecord:
    iteration: int
    objective: float
    mse: float
    snr_db: float
    pcg_iterations: int
    elapsed_ms: float


@dataclass
class SolveReport:
    """Trace of one solver run: final iterate plus per-iteration records."""

    x: np.ndarray
    records: list = field(default_factory=list)
    converged: bool = False
    metadata: dict = field(default_factory=dict)

    def objectives(self):
        return np.array([r.objective for r in self.records])

    def pcg_iteration_counts(self):
        return np.array([r.pcg_iterations for r in self.records])

    @property
    def outer_iterations(self):
        # Record 0 holds the initial iterate.
        return len(self.records) - 1

    def assert_monotone(self, rel_tol=1e-9):
        """Raise if the objective trace increases beyond rel_tol * F(x0)."""
        obj = self.objectives()
        slack = rel_tol * abs(obj[0]) if len(obj) else 0.0
        bad = np.flatnonzero(np.diff(obj) > slack)
        if bad.size:
            k = int(bad[0])
            raise AssertionError(
                f"objective increased at iteration {k + 1}: "
                f"{obj[k]} -> {obj[k + 1]}"
            )
