"""Centralized dual oracle used as ground truth for the distributed runs.

The dual function to minimize is

    q(lam) = sum_i max_{x in X_i} { -lam*x - f_i(x) } + lam*b_i,

with subgradient ``sum_i (b_i - x_i(lam))``, where ``x_i(lam)`` is the primal
argmin.  Because ``lam`` is a scalar and the subgradient is nondecreasing,
bisection gives a certified bracket on the minimizer.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BracketFailure
from .problem import Problem

DEFAULT_TOL = 1e-8
MAX_DOUBLINGS = 60
MIN_WIDTH = 1e-12


@dataclass(frozen=True)
class DualOracleResult:
    lambda_star: float
    q_star: float
    f_star: float
    x_star: np.ndarray
    iterations: int
    residual: float


def _argmin_grid(p: Problem, lam):
    """Primal argmins for every (lambda, node) pair; shape ``lam.shape + (n,)``."""
    lam = np.asarray(lam, dtype=float)
    v = np.broadcast_to(lam[..., None], lam.shape + (p.n,))
    if p.is_quadratic:
        return p.argmin(v)
    flat = v.reshape(-1, p.n)
    return np.stack([p.argmin(row) for row in flat]).reshape(v.shape)


def q_eval(p: Problem, lam):
    """Dual objective at ``lam`` (scalar or array of multipliers)."""
    lam_arr = np.asarray(lam, dtype=float)
    x = _argmin_grid(p, lam_arr)
    terms = -p.costs(x) - lam_arr[..., None] * x + lam_arr[..., None] * p.b
    out = terms.sum(axis=-1)
    return float(out) if np.ndim(lam) == 0 else out


def q_subgradient(p: Problem, lam):
    """``sum_i (b_i - x_i(lam))``; nondecreasing in ``lam``."""
    lam_arr = np.asarray(lam, dtype=float)
    out = (p.b - _argmin_grid(p, lam_arr)).sum(axis=-1)
    return float(out) if np.ndim(lam) == 0 else out


def check_slater(p: Problem) -> bool:
    return bool(p.lo.sum() < p.b.sum() < p.hi.sum())


def solve_dual(p: Problem, tol: float = DEFAULT_TOL) -> DualOracleResult:
    """Minimize ``q`` by bisection on the sign of its subgradient.

    The bracket starts at ``[-M, M]`` with ``M = 1 + max marginal cost`` and
    doubles until the subgradient changes sign.  Stops when the subgradient
    is within ``tol`` of zero or the bracket is narrower than 1e-12.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    M = 1.0 + p.marginal_cost_range()
    lo, hi = -M, M
    g_lo, g_hi = q_subgradient(p, lo), q_subgradient(p, hi)
    doublings = 0
    while g_lo > 0 or g_hi < 0:
        if doublings >= MAX_DOUBLINGS:
            raise BracketFailure(
                f"no sign change of the dual subgradient in [{lo:g}, {hi:g}] "
                f"(g={g_lo:g}, {g_hi:g}); is the problem infeasible?"
            )
        lo, hi = 2 * lo, 2 * hi
        g_lo, g_hi = q_subgradient(p, lo), q_subgradient(p, hi)
        doublings += 1

    iterations = 0
    if abs(g_lo) <= tol:
        lam = lo
    elif abs(g_hi) <= tol:
        lam = hi
    else:
        while True:
            iterations += 1
            lam = 0.5 * (lo + hi)
            g = q_subgradient(p, lam)
            if abs(g) <= tol or hi - lo <= MIN_WIDTH:
                break
            if g > 0:
                hi = lam
            else:
                lo = lam

    x = p.argmin(np.full(p.n, lam))
    f_star = float(p.costs(x).sum())
    return DualOracleResult(
        lambda_star=float(lam),
        q_star=q_eval(p, lam),
        f_star=f_star,
        x_star=x,
        iterations=iterations,
        residual=abs(float((x - p.b).sum())),
    )
