"""Distributed stochastic Lagrangian method.

Nodes only see noisy load samples ``l_i(k) = b_i + eta_i(k)`` with bounded,
zero-mean, independent ``eta``.  The round is the deterministic one with
``b_i`` replaced by ``l_i(k)`` in the dual step; the same sample is used for
the primal and dual updates of that round.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .dlm import AgentState, IterationTrace, RunConfig, _rate_bound, _round, fmt, run_rounds
from .dual import DualOracleResult
from .errors import ConfigurationError
from .graphs import GraphSchedule, spectral_delta
from .problem import NodeSpec, Problem, subgradient_bound

NOISE_KINDS = ("uniform", "rademacher", "truncgauss")
ENSEMBLE_HEADER = ("k", "mean_dual_gap_y", "halfwidth", "mean_lagrangian_sum", "mean_balance_residual", "bound")
NOISE_STREAM = 2
Z95 = 1.959963984540054


@dataclass(frozen=True)
class NoiseModel:
    """Symmetric bounded noise with per-node magnitude ``c_i``.

    ``uniform``: U[-c, c].  ``rademacher``: +-c with probability 1/2.
    ``truncgauss``: N(0, sigma^2) conditioned on [-c, c], sigma = ``sigma_ratio * c``.
    """

    kind: str
    c: tuple
    sigma_ratio: float = 1.0 / 3.0

    def __init__(self, kind, c, sigma_ratio=1.0 / 3.0):
        if kind not in NOISE_KINDS:
            raise ConfigurationError(f"unknown noise kind {kind!r}")
        c = tuple(float(v) for v in np.atleast_1d(c))
        if any(not (v >= 0 and math.isfinite(v)) for v in c):
            raise ConfigurationError("noise magnitudes must be finite and >= 0")
        if not sigma_ratio > 0:
            raise ConfigurationError("sigma_ratio must be positive")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "sigma_ratio", float(sigma_ratio))

    @classmethod
    def relative(cls, kind, frac, b, sigma_ratio=1.0 / 3.0):
        """Magnitudes ``c_i = frac * |b_i|``."""
        return cls(kind, frac * np.abs(np.asarray(b, dtype=float)), sigma_ratio)

    @classmethod
    def zero(cls, n):
        return cls("uniform", np.zeros(n))

    def magnitude(self, node: int) -> float:
        return self.c[0] if len(self.c) == 1 else self.c[node]

    def magnitudes(self, n: int) -> np.ndarray:
        return np.array([self.magnitude(i) for i in range(n)])

    def draw(self, rng: np.random.Generator, node: int = 0, size: Optional[int] = None):
        """Draw ``eta`` for one node (``size`` draws, or a scalar)."""
        c = self.magnitude(node)
        m = 1 if size is None else size
        if self.kind == "uniform":
            eta = c * (2.0 * rng.random(m) - 1.0)
        elif self.kind == "rademacher":
            eta = c * np.where(rng.random(m) < 0.5, -1.0, 1.0)
        else:
            eta = _trunc_gauss(rng, c, self.sigma_ratio * c, m)
        return float(eta[0]) if size is None else eta

    def stream(self, seed: int, node: int, K: int) -> np.ndarray:
        """The ``K`` draws of node ``node`` under ``seed``; entry ``k`` is ``eta_node(k)``."""
        return self.draw(np.random.default_rng([int(seed), NOISE_STREAM, int(node)]), node, K)


def _trunc_gauss(rng, c, sigma, m):
    if c == 0.0:
        return np.zeros(m)
    out = np.empty(m)
    filled = 0
    while filled < m:
        z = rng.normal(0.0, sigma, size=2 * (m - filled) + 8)
        z = z[np.abs(z) <= c]
        take = min(z.size, m - filled)
        out[filled:filled + take] = z[:take]
        filled += take
    return out


def sample_load(b: float, model: NoiseModel, rng: np.random.Generator, node: int = 0) -> float:
    """One noisy measurement ``b + eta``."""
    return b + model.draw(rng, node)


def stochastic_subgradient(load: float, x: float) -> float:
    return load - x


def stochastic_subgradient_bound(spec: NodeSpec, model: NoiseModel, node: Optional[int] = None) -> float:
    """``D_i = C_i + c_i``."""
    return subgradient_bound(spec) + model.magnitude(spec.id if node is None else node)


def rate_bound_stochastic(k, n, D, delta, lam0, lam_star) -> float:
    """Bound on ``E[q(y_i(k))] - q*`` for a deterministic initial multiplier vector."""
    return _rate_bound(k, n, D, delta, lam0, lam_star)


def dslm_step(state: AgentState, matrix, problem: Problem, alpha: float, noise: NoiseModel, rng):
    """One stochastic round drawing fresh loads from ``rng``.

    Returns ``(state, loads)``.  The multiplier term ``-v_i * l_i`` of the
    primal objective does not depend on ``x`` and so does not enter the argmin.
    """
    loads = np.array([sample_load(nd.b, noise, rng, i) for i, nd in enumerate(problem.nodes)])
    return _round(state, matrix, problem, alpha, loads), loads


class LoadStreams:
    """Per-node load samples keyed by ``(seed, node, k)``.

    Column ``i`` is produced by its own generator, so the values never depend
    on the order in which nodes are evaluated.
    """

    def __init__(self, problem: Problem, noise: NoiseModel, seed: int, K: int):
        self.seed = int(seed)
        self.eta = np.column_stack([noise.stream(seed, i, K) for i in range(problem.n)])
        self.loads = problem.b + self.eta

    def __call__(self, k: int) -> np.ndarray:
        return self.loads[k]


def run_dslm(
    problem: Problem,
    schedule: GraphSchedule,
    config: RunConfig,
    noise: NoiseModel,
    seed: int,
    oracle: DualOracleResult,
) -> IterationTrace:
    streams = LoadStreams(problem, noise, seed, config.max_iters)
    return run_rounds(problem, schedule, config, oracle, loads_at=streams)


@dataclass
class EnsembleResult:
    """Seed-wise traces plus per-k sample means and 95% normal halfwidths.

    ``mean_dual_gap_y`` and ``gap_halfwidth`` have shape ``(K+1, n)``.
    ``bound`` is the stochastic rate bound at every k.
    """

    seeds: list
    traces: list
    k: np.ndarray
    mean_dual_gap_y: np.ndarray
    gap_halfwidth: np.ndarray
    mean_lagrangian_sum: np.ndarray
    lagrangian_halfwidth: np.ndarray
    mean_balance_residual: np.ndarray
    bound: np.ndarray
    delta: float
    D: float

    def write_csv(self, path):
        worst = np.argmax(self.mean_dual_gap_y, axis=1)
        rows = np.arange(self.k.size)
        gap = self.mean_dual_gap_y[rows, worst]
        hw = self.gap_halfwidth[rows, worst]
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(ENSEMBLE_HEADER)
            for r, k in enumerate(self.k):
                w.writerow([str(int(k)), fmt(gap[r]), fmt(hw[r]), fmt(self.mean_lagrangian_sum[r]),
                            fmt(self.mean_balance_residual[r]), fmt(self.bound[r])])


def halfwidth95(samples, axis=0):
    samples = np.asarray(samples, dtype=float)
    m = samples.shape[axis]
    # shifting by one sample makes identical samples give exactly zero
    shifted = samples - np.take(samples, [0], axis=axis)
    return Z95 * shifted.std(axis=axis, ddof=1) / math.sqrt(m)


def _one_run(args):
    problem, schedule, config, noise, seed, oracle = args
    return run_dslm(problem, schedule, config, noise, seed, oracle)


def run_ensemble(
    problem: Problem,
    schedule: GraphSchedule,
    config: RunConfig,
    noise: NoiseModel,
    seeds: Sequence[int],
    oracle: DualOracleResult,
    workers: int = 1,
) -> EnsembleResult:
    """Run one stochastic trace per seed on a shared graph schedule.

    Every run executes exactly ``config.max_iters`` rounds (the termination
    rule is switched off) so all traces line up on the same k grid.
    """
    seeds = list(seeds)
    if len(seeds) < 2:
        raise ConfigurationError("an ensemble needs at least 2 seeds")
    if config.stream_to is not None:
        raise ConfigurationError("ensemble runs keep traces in memory; unset stream_to")
    config = replace(config, termination="max_iters")
    jobs = [(problem, schedule, config, noise, s, oracle) for s in seeds]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            traces = list(pool.map(_one_run, jobs))
    else:
        traces = [_one_run(j) for j in jobs]

    gaps = np.stack([t.dual_gap_y for t in traces])
    lsum = np.stack([t.lagrangian_sum for t in traces])
    bres = np.stack([t.balance_residual for t in traces])
    k = traces[0].k
    delta = spectral_delta(schedule, config.max_iters)
    noise_c = noise.magnitudes(problem.n)
    D = float(np.sum(problem.subgradient_bounds + noise_c))
    lam0 = config.initial_lambda(problem.n)
    bound = np.array([rate_bound_stochastic(int(kk), problem.n, D, delta, lam0, oracle.lambda_star) for kk in k])
    return EnsembleResult(
        seeds=seeds,
        traces=traces,
        k=k,
        mean_dual_gap_y=gaps.mean(axis=0),
        gap_halfwidth=halfwidth95(gaps),
        mean_lagrangian_sum=lsum.mean(axis=0),
        lagrangian_halfwidth=halfwidth95(lsum),
        mean_balance_residual=bres.mean(axis=0),
        bound=bound,
        delta=delta,
        D=D,
    )
