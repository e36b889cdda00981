"""Distributed Lagrangian method over a time-varying graph.

One synchronous round, for every node ``i`` at once::

    v_i      <- sum_j a_ij(k) lam_j           (consensus on the multipliers)
    x_i      <- argmin_{x in X_i} f_i(x) + v_i x
    lam_i    <- v_i + alpha(k) (x_i - b_i)    (local dual subgradient step)

Each node also keeps ``y_i``, the alpha-weighted running average of its own
multipliers, whose dual gap is what the rate bound controls.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .dual import DualOracleResult, q_eval
from .errors import ConfigurationError, DeltaOutOfRange
from .graphs import GraphSchedule
from .problem import Problem

TRACE_HEADER = (
    "k", "node", "lambda", "v", "x", "y", "consensus_residual", "balance_residual",
    "dual_gap_y", "lagrangian_sum", "primal_cost",
)
ABS_FALLBACK = 1e-6


def fmt(value) -> str:
    return f"{value:.12g}"


@dataclass(frozen=True)
class StepSchedule:
    """Step sizes ``alpha(k)``: ``invsqrt`` 1/sqrt(k+1), ``harmonic`` 1/(k+1), ``constant``."""

    kind: str = "invsqrt"
    value: float = 1.0

    def __post_init__(self):
        if self.kind not in ("invsqrt", "harmonic", "constant"):
            raise ConfigurationError(f"unknown step schedule {self.kind!r}")
        if not self.value > 0:
            raise ConfigurationError("step size must be positive")

    def alpha(self, k: int) -> float:
        if self.kind == "invsqrt":
            return 1.0 / math.sqrt(k + 1)
        if self.kind == "harmonic":
            return 1.0 / (k + 1)
        return self.value

    @classmethod
    def parse(cls, text: str) -> "StepSchedule":
        if text.startswith("constant:"):
            return cls("constant", float(text.split(":", 1)[1]))
        return cls(text)

    def __str__(self):
        return f"constant:{self.value:g}" if self.kind == "constant" else self.kind


@dataclass(frozen=True)
class RunConfig:
    max_iters: int = 1000
    schedule: StepSchedule = field(default_factory=StepSchedule)
    termination: str = "relative"  # or "max_iters"
    frac: float = 0.1
    lambda_init: Union[float, Sequence[float]] = 0.0
    record_every: int = 1
    stream_to: Optional[Path] = None

    def __post_init__(self):
        if self.max_iters < 1:
            raise ConfigurationError("max_iters must be >= 1")
        if not self.frac > 0:
            raise ConfigurationError("termination fraction must be > 0")
        if self.termination not in ("relative", "max_iters"):
            raise ConfigurationError(f"unknown termination rule {self.termination!r}")
        if self.record_every < 1:
            raise ConfigurationError("record_every must be >= 1")

    def initial_lambda(self, n: int) -> np.ndarray:
        lam = np.asarray(self.lambda_init, dtype=float)
        if lam.ndim == 0:
            return np.full(n, float(lam))
        if lam.shape != (n,):
            raise ConfigurationError(f"lambda_init has {lam.size} entries for {n} nodes")
        return lam.copy()


@dataclass(frozen=True)
class AgentState:
    """Multipliers, consensus prices, allocations and averages of all nodes."""

    lam: np.ndarray
    v: np.ndarray
    x: np.ndarray
    y: np.ndarray
    S: float = 0.0


def consensus_residual(lam) -> float:
    lam = np.asarray(lam)
    return float(np.linalg.norm(lam - lam.mean()))


def _round(state: AgentState, matrix, problem: Problem, alpha: float, loads) -> AgentState:
    v = matrix @ state.lam
    x = problem.argmin(v)
    lam = v + alpha * (x - loads)
    return AgentState(lam=lam, v=v, x=x, y=state.y, S=state.S)


def dlm_step(state: AgentState, matrix, problem: Problem, alpha: float) -> AgentState:
    """One synchronous round; ``y`` and ``S`` are left untouched."""
    return _round(state, matrix, problem, alpha, problem.b)


def dual_average_update(y, lam, alpha: float, S: float):
    """Fold ``lam`` into the running average; returns ``(y_next, S_next)``.

    With ``S == 0`` the previous ``y`` is discarded.
    """
    S_next = S + alpha
    y_next = (alpha * np.asarray(lam, dtype=float) + S * np.asarray(y, dtype=float)) / S_next
    return y_next, S_next


def _rate_bound(k, n, G, delta, lam0, lam_star):
    if not 0.0 <= delta < 1.0:
        raise DeltaOutOfRange(f"delta must lie in [0, 1), got {delta}")
    lam0 = np.atleast_1d(np.asarray(lam0, dtype=float))
    root = math.sqrt(k + 1)
    gap = 1.0 - delta
    t1 = n * (lam0.mean() - lam_star) ** 2 / (2.0 * root)
    t2 = 3.0 * G * float(np.linalg.norm(lam0)) / (gap * root)
    t3 = 7.0 * G * G * (1.0 + math.log(k + 1)) / (2.0 * gap * root)
    return t1 + t2 + t3


def rate_bound_deterministic(k, n, C, delta, lam0, lam_star) -> float:
    """Upper bound on ``q(y_i(k)) - q*`` for step size 1/sqrt(k+1).

    ``C`` is the sum of the per-node subgradient bounds and ``lam0`` the
    initial multiplier vector.
    """
    return _rate_bound(k, n, C, delta, lam0, lam_star)


@dataclass
class IterationTrace:
    """Recorded history of one run.

    Per-node arrays have shape ``(rows, n)`` and are indexed by ``k[row]``.
    The per-step arrays (``alpha``, ``sigma2``, ``avg_lhs``, ``avg_rhs``,
    ``loads``) have one entry per executed round ``k -> k+1``.
    When the run streamed its rows to disk the per-node arrays are ``None``.
    """

    n: int
    k: np.ndarray
    lambdas: Optional[np.ndarray]
    vs: Optional[np.ndarray]
    xs: Optional[np.ndarray]
    ys: Optional[np.ndarray]
    dual_gap_y: Optional[np.ndarray]
    consensus_residual: np.ndarray
    balance_residual: np.ndarray
    lagrangian_sum: np.ndarray
    primal_cost: np.ndarray
    alpha: np.ndarray
    sigma2: np.ndarray
    avg_lhs: np.ndarray
    avg_rhs: np.ndarray
    loads: np.ndarray
    terminated: bool
    termination_iter: Optional[int]
    lambda0: np.ndarray
    final: AgentState

    @property
    def iterations(self) -> int:
        return int(self.alpha.size)

    @property
    def averaging_slack(self) -> np.ndarray:
        return self.avg_rhs - self.avg_lhs

    def rows(self):
        """Yield CSV rows (as lists of strings) in ``TRACE_HEADER`` order."""
        if self.lambdas is None:
            raise ValueError("per-node data was streamed to disk and is not in memory")
        for r, k in enumerate(self.k):
            yield from _rows_for(
                int(k), self.lambdas[r], self.vs[r], self.xs[r], self.ys[r],
                self.consensus_residual[r], self.balance_residual[r], self.dual_gap_y[r],
                self.lagrangian_sum[r], self.primal_cost[r],
            )

    def write_csv(self, path):
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(TRACE_HEADER)
            w.writerows(self.rows())


def _rows_for(k, lam, v, x, y, cres, bres, gaps, lsum, pcost):
    shared = (fmt(cres), fmt(bres))
    tail = (fmt(lsum), fmt(pcost))
    for i in range(lam.size):
        yield [str(k), str(i), fmt(lam[i]), fmt(v[i]), fmt(x[i]), fmt(y[i]), *shared, fmt(gaps[i]), *tail]


def terminated_at(lam, lam_star, frac) -> bool:
    """Every node within ``frac * |lam*|`` of ``lam*`` (absolute 1e-6 when ``lam* ~ 0``)."""
    thresh = frac * abs(lam_star) if abs(lam_star) >= 1e-9 else ABS_FALLBACK
    return bool(np.max(np.abs(np.asarray(lam) - lam_star)) < thresh)


def run_rounds(
    problem: Problem,
    schedule: GraphSchedule,
    config: RunConfig,
    oracle: DualOracleResult,
    loads_at: Optional[Callable[[int], np.ndarray]] = None,
) -> IterationTrace:
    """Shared driver for the deterministic and stochastic variants.

    ``loads_at(k)`` returns the resource estimates used in round ``k``; the
    deterministic method passes ``None`` and uses ``problem.b``.
    """
    n = problem.n
    if schedule.n != n:
        raise ConfigurationError(f"schedule has {schedule.n} nodes, problem has {n}")
    lam0 = config.initial_lambda(n)
    # v(0) and x(0) are not produced by the method; fill them from lam(0)
    state = AgentState(lam=lam0, v=lam0.copy(), x=problem.argmin(lam0), y=lam0.copy(), S=0.0)
    q_star = oracle.q_star
    b = problem.b

    rec = {key: [] for key in ("k", "lam", "v", "x", "y", "gap", "cres", "bres", "lsum", "pcost")}
    steps = {key: [] for key in ("alpha", "sigma2", "lhs", "rhs", "loads")}
    sink = _CsvSink(config.stream_to) if config.stream_to is not None else None

    def record(k, st):
        cost = problem.costs(st.x)
        gaps = q_eval(problem, st.y) - q_star
        cres = consensus_residual(st.lam)
        bres = float(np.sum(st.x - b))
        lsum = float(np.sum(cost + st.lam * (st.x - b)))
        pcost = float(cost.sum())
        rec["k"].append(k)
        rec["cres"].append(cres)
        rec["bres"].append(bres)
        rec["lsum"].append(lsum)
        rec["pcost"].append(pcost)
        if sink is not None:
            sink.write(_rows_for(k, st.lam, st.v, st.x, st.y, cres, bres, gaps, lsum, pcost))
        else:
            rec["lam"].append(st.lam)
            rec["v"].append(st.v)
            rec["x"].append(st.x)
            rec["y"].append(st.y)
            rec["gap"].append(gaps)

    def done(st):
        return config.termination == "relative" and terminated_at(st.lam, oracle.lambda_star, config.frac)

    record(0, state)
    stopped = done(state)
    k = 0
    try:
        while not stopped and k < config.max_iters:
            matrix = schedule.matrix(k)
            alpha = config.schedule.alpha(k)
            loads = b if loads_at is None else loads_at(k)
            before = consensus_residual(state.lam)
            nxt = _round(state, matrix, problem, alpha, loads)
            y, S = dual_average_update(state.y, state.lam, alpha, state.S)
            nxt = replace(nxt, y=y, S=S)
            steps["alpha"].append(alpha)
            s2 = schedule.sigma2(k)
            steps["sigma2"].append(s2)
            steps["lhs"].append(consensus_residual(nxt.lam))
            steps["rhs"].append(s2 * before + alpha * float(np.linalg.norm(nxt.x - loads)))
            steps["loads"].append(loads)
            state = nxt
            k += 1
            stopped = done(state)
            if stopped or k == config.max_iters or k % config.record_every == 0:
                record(k, state)
    finally:
        if sink is not None:
            sink.close()

    def stack(key):
        return np.array(rec[key]) if sink is None else None

    return IterationTrace(
        n=n,
        k=np.array(rec["k"], dtype=int),
        lambdas=stack("lam"),
        vs=stack("v"),
        xs=stack("x"),
        ys=stack("y"),
        dual_gap_y=stack("gap"),
        consensus_residual=np.array(rec["cres"]),
        balance_residual=np.array(rec["bres"]),
        lagrangian_sum=np.array(rec["lsum"]),
        primal_cost=np.array(rec["pcost"]),
        alpha=np.array(steps["alpha"]),
        sigma2=np.array(steps["sigma2"]),
        avg_lhs=np.array(steps["lhs"]),
        avg_rhs=np.array(steps["rhs"]),
        loads=np.array(steps["loads"]).reshape(-1, n),
        terminated=bool(stopped),
        termination_iter=k if stopped else None,
        lambda0=lam0,
        final=state,
    )


class _CsvSink:
    def __init__(self, path):
        self._fh = Path(path).open("w", newline="")
        self._w = csv.writer(self._fh, lineterminator="\n")
        self._w.writerow(TRACE_HEADER)

    def write(self, rows):
        self._w.writerows(rows)

    def close(self):
        self._fh.close()


def run_dlm(problem: Problem, schedule: GraphSchedule, config: RunConfig, oracle: DualOracleResult) -> IterationTrace:
    """Run the deterministic method until the termination rule or ``max_iters``.

    Raises :class:`~dislag.errors.ScheduleExhausted` if the schedule is
    shorter than the number of rounds needed.
    """
    return run_rounds(problem, schedule, config, oracle)
