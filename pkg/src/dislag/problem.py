"""Per-node data of the resource allocation problem and the local oracles.

Every node ``i`` owns a convex cost ``f_i``, a capacity box ``[lo_i, hi_i]``
and a share ``b_i`` of the total resource.  The coupled problem is

    minimize  sum_i f_i(x_i)   s.t.  x_i in [lo_i, hi_i],  sum_i (x_i - b_i) = 0.

The helpers here are the only places that touch ``f_i`` directly; the dual
oracle and both engines go through :func:`primal_argmin` (scalar) or
:meth:`Problem.argmin` (vectorized over nodes).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence, Union

import numpy as np

from .errors import ConfigurationError, SlaterViolation

GOLDEN_TOL = 1e-9
_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class Quadratic2:
    """``a*x**2 + b*x`` (IEEE-14 generator convention)."""

    a: float
    b: float

    def __post_init__(self):
        if not (self.a > 0 and math.isfinite(self.a)):
            raise ConfigurationError(f"Quadratic2 needs a > 0, got a={self.a}")

    @property
    def coefficients(self):
        """(quadratic, linear, constant) coefficients."""
        return self.a, self.b, 0.0

    def __call__(self, x):
        return self.a * x * x + self.b * x


@dataclass(frozen=True)
class Quadratic3:
    """``a + b*x + c*x**2`` (IEEE-118 generator convention)."""

    a: float
    b: float
    c: float

    def __post_init__(self):
        if not (self.c > 0 and math.isfinite(self.c)):
            raise ConfigurationError(f"Quadratic3 needs c > 0, got c={self.c}")

    @property
    def coefficients(self):
        return self.c, self.b, self.a

    def __call__(self, x):
        return self.a + self.b * x + self.c * x * x


@dataclass(frozen=True)
class ConvexCost:
    """Arbitrary convex cost given as a Python callable.

    The argmin over the box falls back to golden-section search, so the
    callable must be convex on the box for results to be meaningful.
    """

    func: Callable[[float], float]
    name: str = "convex"

    def __call__(self, x):
        return self.func(x)


CostFunction = Union[Quadratic2, Quadratic3, ConvexCost]


@dataclass(frozen=True)
class Box:
    lo: float
    hi: float

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise ConfigurationError(f"box bounds must be finite: [{self.lo}, {self.hi}]")
        if self.lo > self.hi:
            raise ConfigurationError(f"box has lo > hi: [{self.lo}, {self.hi}]")

    def contains(self, x, tol=0.0):
        return self.lo - tol <= x <= self.hi + tol


@dataclass(frozen=True)
class NodeSpec:
    id: int
    cost: CostFunction
    box: Box
    b: float


def golden_section(func, lo, hi, tol=GOLDEN_TOL):
    """Minimize a unimodal scalar function on ``[lo, hi]``."""
    if hi - lo <= tol:
        return lo
    a, b = lo, hi
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = func(c), func(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = func(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = func(d)
    x = 0.5 * (a + b)
    # the minimizer may sit on an endpoint of the box
    return min((lo, x, hi), key=func)


def primal_argmin(cost: CostFunction, box: Box, v: float) -> float:
    """Unique minimizer of ``cost(x) + v*x`` over ``box``.

    For quadratic costs this is the stationary point clipped to the box.
    A degenerate box returns ``box.lo``.
    """
    if box.lo == box.hi:
        return box.lo
    if isinstance(cost, ConvexCost):
        return golden_section(lambda x: cost(x) + v * x, box.lo, box.hi)
    q2, q1, _ = cost.coefficients
    x = -(q1 + v) / (2.0 * q2)
    return min(max(x, box.lo), box.hi)


def cost_eval(cost: CostFunction, x: float) -> float:
    return cost(x)


def local_lagrangian(spec: NodeSpec, x: float, v: float) -> float:
    """``f_i(x) + v*(x - b_i)``."""
    return spec.cost(x) + v * (x - spec.b)


def subgradient_bound(spec: NodeSpec) -> float:
    """Tight bound on ``|b_i - x|`` for ``x`` in the node's box."""
    return max(abs(spec.b - spec.box.lo), abs(spec.b - spec.box.hi))


@dataclass(frozen=True)
class Problem:
    """An ordered collection of nodes.

    Construction only checks per-node data; call :meth:`validate` for the
    problem-level invariants (``n >= 2``, unique ids, strict Slater).
    """

    nodes: tuple

    def __init__(self, nodes: Sequence[NodeSpec]):
        object.__setattr__(self, "nodes", tuple(nodes))
        if not self.nodes:
            raise ConfigurationError("problem needs at least one node")

    @property
    def n(self) -> int:
        return len(self.nodes)

    def validate(self):
        if self.n < 2:
            raise ConfigurationError(f"problem needs n >= 2 nodes, got {self.n}")
        ids = [nd.id for nd in self.nodes]
        if len(set(ids)) != len(ids):
            raise ConfigurationError("node ids must be unique")
        lo, b, hi = self.lo.sum(), self.b.sum(), self.hi.sum()
        if not lo < b < hi:
            raise SlaterViolation(
                f"Slater condition fails: need sum(lo)={lo:g} < sum(b)={b:g} < sum(hi)={hi:g}"
            )
        return self

    @cached_property
    def lo(self) -> np.ndarray:
        return np.array([nd.box.lo for nd in self.nodes], dtype=float)

    @cached_property
    def hi(self) -> np.ndarray:
        return np.array([nd.box.hi for nd in self.nodes], dtype=float)

    @cached_property
    def b(self) -> np.ndarray:
        return np.array([nd.b for nd in self.nodes], dtype=float)

    @cached_property
    def total_demand(self) -> float:
        return float(self.b.sum())

    @cached_property
    def is_quadratic(self) -> bool:
        return all(not isinstance(nd.cost, ConvexCost) for nd in self.nodes)

    @cached_property
    def _coef(self):
        if not self.is_quadratic:
            return None
        c = np.array([nd.cost.coefficients for nd in self.nodes], dtype=float)
        return c[:, 0], c[:, 1], c[:, 2]

    @cached_property
    def subgradient_bounds(self) -> np.ndarray:
        return np.array([subgradient_bound(nd) for nd in self.nodes])

    def argmin(self, v) -> np.ndarray:
        """Per-node primal argmin; ``v`` has one price per node."""
        v = np.asarray(v, dtype=float)
        if self._coef is None:
            return np.array([primal_argmin(nd.cost, nd.box, vi) for nd, vi in zip(self.nodes, v)])
        q2, q1, _ = self._coef
        x = np.clip(-(q1 + v) / (2.0 * q2), self.lo, self.hi)
        # degenerate boxes return lo exactly
        return np.where(self.lo == self.hi, self.lo, x)

    def costs(self, x) -> np.ndarray:
        """Per-node costs ``f_i(x_i)``; trailing axis indexes nodes."""
        x = np.asarray(x, dtype=float)
        if self._coef is None:
            flat = x.reshape(-1, self.n)
            out = np.array([[nd.cost(xi) for nd, xi in zip(self.nodes, row)] for row in flat])
            return out.reshape(x.shape)
        q2, q1, q0 = self._coef
        return q0 + q1 * x + q2 * x * x

    def marginal_cost_range(self) -> float:
        """Largest ``|f_i'|`` over any node's box, used to size dual brackets."""
        if self._coef is not None:
            q2, q1, _ = self._coef
            ends = np.concatenate([2 * q2 * self.lo + q1, 2 * q2 * self.hi + q1])
            return float(np.max(np.abs(ends)))
        worst = 0.0
        for nd in self.nodes:
            lo, hi = nd.box.lo, nd.box.hi
            h = max(1e-6, 1e-6 * (hi - lo))
            if hi - lo <= 2 * h:
                continue
            d_lo = (nd.cost(lo + h) - nd.cost(lo)) / h
            d_hi = (nd.cost(hi) - nd.cost(hi - h)) / h
            worst = max(worst, abs(d_lo), abs(d_hi))
        return worst
