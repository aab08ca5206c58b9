"""Preconditioned conjugate gradient for SPD systems given as black boxes."""

from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConfigError, NumericalBreakdownError


@dataclass(frozen=True)
class PcgConfig:
    max_iterations: int = 30
    relative_residual_tolerance: float = 1e-8
    record_residual_trace: bool = False

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ConfigError("max_iterations must be >= 1")
        if not 0.0 < self.relative_residual_tolerance < 1.0:
            raise ConfigError("tolerance must lie in (0, 1)")


@dataclass
class PcgResult:
    solution: np.ndarray
    iterations_used: int
    residual_trace: list = field(default_factory=list)


def pcg_solve(apply_S, apply_Pinv, rhs, x0=None, cfg=None):
    """Solve S x = rhs by PCG with preconditioner-inverse apply_Pinv.

    Warm-startable via x0.  The quadratic 1/2 x^T S x - rhs^T x is
    non-increasing across iterates, which is what the outer solvers'
    monotone-descent guarantee relies on.  Raises
    NumericalBreakdownError (carrying the last finite iterate) if the
    recurrence produces non-finite values.
    """
    cfg = cfg or PcgConfig()
    rhs = np.asarray(rhs, dtype=float)
    x = np.zeros_like(rhs) if x0 is None else np.asarray(x0, dtype=float).copy()
    if x.shape != rhs.shape:
        raise ConfigError("x0 and rhs must have the same shape")

    rhs_norm = float(np.linalg.norm(rhs))
    scale = rhs_norm if rhs_norm > 0 else 1.0
    trace = []

    r = rhs - apply_S(x)
    if np.linalg.norm(r) / scale <= cfg.relative_residual_tolerance:
        return PcgResult(x, 0, trace)
    z = apply_Pinv(r)
    p = z.copy()
    rz = float(r @ z)

    iterations = 0
    for _ in range(cfg.max_iterations):
        Sp = apply_S(p)
        pSp = float(p @ Sp)
        if not np.isfinite(pSp) or pSp <= 0:
            raise NumericalBreakdownError(
                f"PCG breakdown: p^T S p = {pSp}", last_iterate=x
            )
        alpha = rz / pSp
        x = x + alpha * p
        r = r - alpha * Sp
        iterations += 1
        res = float(np.linalg.norm(r)) / scale
        if not np.isfinite(res):
            raise NumericalBreakdownError(
                "PCG produced a non-finite residual", last_iterate=x - alpha * p
            )
        if cfg.record_residual_trace:
            trace.append(res)
        if res <= cfg.relative_residual_tolerance:
            break
        z = apply_Pinv(r)
        rz_new = float(r @ z)
        beta = rz_new / rz
        rz = rz_new
        p = z + beta * p

    return PcgResult(x, iterations, trace)


def identity_preconditioner(r):
    """Pinv = I: plain conjugate gradient."""
    return r


def jacobi_preconditioner(diagonal):
    """Pinv = diag(d)^{-1}, the conventional Jacobi comparison."""
    diagonal = np.asarray(diagonal, dtype=float)
    if np.any(diagonal <= 0):
        raise ConfigError("Jacobi preconditioner needs a positive diagonal")
    inv = 1.0 / diagonal

    def apply(r):
        return inv * r

    return apply
