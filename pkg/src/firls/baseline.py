"""Desk-scale oracles: classical IRLS (FOCUSS) and a proximal-gradient
reference solver used to cross-validate the reweighted solvers.

Both work on explicit dense measurement matrices.  The FOCUSS update
inverts an M x M system every iteration, so it refuses problems with
N > 2048; the reference solver handles l1, (overlapping) group and TV
penalties, computing non-separable proximal maps through their duals.
"""

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigError, SingularFactorError
from .operators import FiniteDifferenceOperator

_DENSE_CAP = 2048


@dataclass
class DenseProblem:
    A: np.ndarray
    b: np.ndarray
    lam: float = 0.0
    eps_guard: float = 1e-12

    def __post_init__(self):
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        self.b = np.asarray(self.b, dtype=float)
        m, n = self.A.shape
        if m > n:
            raise ConfigError("dense baseline expects M <= N")
        if self.b.shape != (m,):
            raise ConfigError("b must have length M")


def irls_focuss_solve(
    problem, outer_iters=50, tol=1e-10, record_iterates=False
):
    """Classical constrained IRLS: min ||x||_1 s.t. Ax = b.

    Iterates x^{k+1} = W^{-1} A^T (A W^{-1} A^T)^{-1} b with
    W_i = (|x_i| + eps_guard)^{-1}.  Every iterate is feasible by
    construction.  Stops on relative iterate change below tol.
    """
    A, b = problem.A, problem.b
    m, n = A.shape
    if n > _DENSE_CAP:
        raise ConfigError(f"dense baseline is capped at N <= {_DENSE_CAP}")
    x = A.T @ b
    iterates = [x.copy()]
    for _ in range(outer_iters):
        winv = np.abs(x) + problem.eps_guard
        AW = A * winv  # A W^{-1}
        K = AW @ A.T
        try:
            y = np.linalg.solve(K, b)
        except np.linalg.LinAlgError as exc:
            raise SingularFactorError(f"A W^-1 A^T is singular: {exc}") from exc
        x_new = winv * (A.T @ y)
        change = np.linalg.norm(x_new - x)
        norm_x = np.linalg.norm(x)
        x = x_new
        if record_iterates:
            iterates.append(x.copy())
        if norm_x > 0 and change / norm_x < tol:
            break
    if record_iterates:
        return x, iterates
    return x


# ---------------------------------------------------------------------------
# Penalties for the proximal-gradient reference
# ---------------------------------------------------------------------------

def _soft_threshold(v, t):
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def _dual_l21_prox(v, t, apply_B, apply_Bt, project, lipschitz, u0,
                   iters=400, tol=1e-13):
    """prox of t * ||B x||_{2,1} at v, via its dual projection problem.

    Solves min_u 1/2 ||v - B^T u||^2 over the per-group ball ||u_g|| <= t
    by accelerated projected gradient; returns (x, u) with x = v - B^T u.
    The dual variable is warm-startable across prox calls.
    """
    u = project(u0.copy(), t)
    z = u.copy()
    tk = 1.0
    step = 1.0 / lipschitz
    for _ in range(iters):
        grad = apply_B(apply_Bt(z) - v)
        u_new = project(z - step * grad, t)
        tk_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * tk * tk))
        z = u_new + ((tk - 1.0) / tk_new) * (u_new - u)
        delta = np.linalg.norm(u_new - u)
        u = u_new
        tk = tk_new
        if delta <= tol * max(1.0, np.linalg.norm(u)):
            break
    return v - apply_Bt(u), u


class L1Penalty:
    """lambda-free l1 penalty with its closed-form prox."""

    def value(self, x):
        return float(np.sum(np.abs(x)))

    def prox(self, v, t):
        return _soft_threshold(v, t)


class GroupPenalty:
    """l2,1 penalty over (possibly overlapping) groups of Phi x.

    For an orthogonal Phi the prox factors through the transform; the
    remaining group prox is computed exactly for non-overlapping groups
    and through the dual projection otherwise.
    """

    def __init__(self, groups, phi=None, dual_iters=400):
        self.groups = groups
        self.phi = phi
        self.dual_iters = dual_iters
        counts = groups.membership_counts()
        self.overlapping = bool(np.any(counts > 1))
        self.lipschitz = float(max(counts.max(), 1))
        self._u = np.zeros(groups.row_dim)

    def value(self, x):
        z = self.phi.forward(x) if self.phi is not None else x
        return float(np.sum(self.groups.group_norms(z)))

    def _project(self, u, t):
        g = self.groups
        norms = np.sqrt(
            np.add.reduceat(u**2, g._offsets)
        )
        scale = np.where(norms > t, t / np.maximum(norms, 1e-300), 1.0)
        return u * np.repeat(scale, g._sizes)

    def _group_prox(self, z, t):
        g = self.groups
        if not self.overlapping:
            norms = g.group_norms(z)
            shrink = np.maximum(1.0 - t / np.maximum(norms, 1e-300), 0.0)
            out = np.zeros_like(z)
            out[g._flat] = z[g._flat] * np.repeat(shrink, g._sizes)
            # Indices outside every group pass through unchanged.
            untouched = g.membership_counts() == 0
            out[untouched] = z[untouched]
            return out
        flat = g._flat

        def apply_B(x):
            return x[flat]

        def apply_Bt(u):
            return np.bincount(flat, weights=u, minlength=g.dim)

        out, self._u = _dual_l21_prox(
            z, t, apply_B, apply_Bt, self._project, self.lipschitz,
            self._u, iters=self.dual_iters,
        )
        return out

    def prox(self, v, t):
        if self.phi is None:
            return self._group_prox(v, t)
        return self.phi.inverse(self._group_prox(self.phi.forward(v), t))


class TvPenalty:
    """Isotropic or anisotropic TV built from the literal difference
    matrices (identity first rows included); prox via the dual."""

    def __init__(self, side, variant="isotropic", dual_iters=400):
        if variant not in ("isotropic", "anisotropic"):
            raise ConfigError(f"unknown TV variant {variant!r}")
        self.side = side
        self.variant = variant
        self.dual_iters = dual_iters
        self.d1 = FiniteDifferenceOperator(side, 1)
        self.d2 = FiniteDifferenceOperator(side, 2)
        N = side * side
        # ||B B^T|| <= ||D1||^2 + ||D2||^2 <= 8.
        self.lipschitz = 8.0
        self._u = np.zeros(2 * N)

    def value(self, x):
        g1 = self.d1.apply(x)
        g2 = self.d2.apply(x)
        if self.variant == "isotropic":
            return float(np.sum(np.sqrt(g1**2 + g2**2)))
        return float(np.sum(np.abs(g1)) + np.sum(np.abs(g2)))

    def _project(self, u, t):
        N = self.side * self.side
        if self.variant == "anisotropic":
            return np.clip(u, -t, t)
        u1, u2 = u[:N], u[N:]
        norms = np.sqrt(u1**2 + u2**2)
        scale = np.where(norms > t, t / np.maximum(norms, 1e-300), 1.0)
        return np.concatenate([u1 * scale, u2 * scale])

    def prox(self, v, t):
        N = self.side * self.side

        def apply_B(x):
            return np.concatenate([self.d1.apply(x), self.d2.apply(x)])

        def apply_Bt(u):
            return self.d1.adjoint(u[:N]) + self.d2.adjoint(u[N:])

        out, self._u = _dual_l21_prox(
            v, t, apply_B, apply_Bt, self._project, self.lipschitz,
            self._u, iters=self.dual_iters,
        )
        return out


def power_iteration_sq_norm(A, iters=100, seed=0):
    """Estimate ||A^T A||_2 by power iteration."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(A.shape[1])
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(iters):
        w = A.T @ (A @ v)
        lam = float(np.linalg.norm(w))
        if lam == 0:
            return 0.0
        v = w / lam
    return lam


def prox_grad_reference_solve(
    problem,
    penalty,
    iters=50000,
    tol=1e-12,
    accelerated=True,
    x0=None,
    record_objectives=False,
):
    """High-accuracy reference minimizer of
    1/2 ||Ax - b||^2 + lambda * penalty(x).

    Plain ISTA when accelerated=False (objective is then non-increasing);
    FISTA with objective-based adaptive restarts otherwise.  Stops when
    the relative objective change stays below tol.
    """
    A, b, lam = problem.A, problem.b, problem.lam
    if lam <= 0:
        raise ConfigError("reference solver needs lambda > 0")
    L = power_iteration_sq_norm(A) * 1.02 + 1e-12
    step = 1.0 / L

    def objective(x):
        return 0.5 * float(np.linalg.norm(A @ x - b) ** 2) + lam * penalty.value(x)

    x = np.zeros(A.shape[1]) if x0 is None else np.asarray(x0, dtype=float).copy()
    y = x.copy()
    tk = 1.0
    f_prev = objective(x)
    objectives = [f_prev]
    for _ in range(iters):
        grad = A.T @ (A @ y - b)
        x_new = penalty.prox(y - step * grad, step * lam)
        f_new = objective(x_new)
        if accelerated:
            if f_new > f_prev:  # adaptive restart keeps the trace monotone
                y = x.copy()
                tk = 1.0
                grad = A.T @ (A @ y - b)
                x_new = penalty.prox(y - step * grad, step * lam)
                f_new = objective(x_new)
            tk_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * tk * tk))
            y = x_new + ((tk - 1.0) / tk_new) * (x_new - x)
            tk = tk_new
        else:
            y = x_new
        done = abs(f_prev - f_new) <= tol * max(1.0, abs(f_prev))
        x = x_new
        f_prev = f_new
        if record_objectives:
            objectives.append(f_new)
        if done:
            break
    if record_objectives:
        return x, objectives
    return x
