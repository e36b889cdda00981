"""Time-varying undirected graphs and their lazy Metropolis mixing matrices."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ParseError, ScheduleExhausted

JACOBI_TOL = 1e-12
SUM_TOL = 1e-12
# stream tags keep graph draws independent of noise draws under one seed
GRAPH_STREAM = 1
WINDOW_STREAM = 3


@dataclass(frozen=True)
class Graph:
    """Undirected simple graph on nodes ``0..n-1``; edges stored as ``(i, j)`` with ``i < j``."""

    n: int
    edges: frozenset

    def __init__(self, n: int, edges: Iterable[tuple[int, int]] = ()):
        norm = set()
        for i, j in edges:
            i, j = int(i), int(j)
            if i == j:
                raise ValueError(f"self-loop at node {i}")
            if not (0 <= i < n and 0 <= j < n):
                raise ValueError(f"edge ({i}, {j}) outside [0, {n})")
            norm.add((min(i, j), max(i, j)))
        object.__setattr__(self, "n", int(n))
        object.__setattr__(self, "edges", frozenset(norm))

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n, dtype=int)
        for i, j in self.edges:
            deg[i] += 1
            deg[j] += 1
        return deg

    def components(self) -> list[set]:
        return _components(self.n, self.edges)

    def is_connected(self) -> bool:
        return len(self.components()) == 1

    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(self.edges)


def _components(n, edges):
    adj = [[] for _ in range(n)]
    for i, j in edges:
        adj[i].append(j)
        adj[j].append(i)
    seen = [False] * n
    comps = []
    for s in range(n):
        if seen[s]:
            continue
        seen[s] = True
        comp, stack = {s}, [s]
        while stack:
            u = stack.pop()
            for w in adj[u]:
                if not seen[w]:
                    seen[w] = True
                    comp.add(w)
                    stack.append(w)
        comps.append(comp)
    return comps


def complete_graph(n: int) -> Graph:
    return Graph(n, ((i, j) for i in range(n) for j in range(i + 1, n)))


def path_graph(n: int) -> Graph:
    return Graph(n, ((i, i + 1) for i in range(n - 1)))


def star_graph(n: int) -> Graph:
    return Graph(n, ((0, j) for j in range(1, n)))


@lru_cache(maxsize=64)
def _pairs(n):
    return np.triu_indices(n, k=1)


def random_connected_graph(n: int, p: float, rng: np.random.Generator) -> Graph:
    """Erdos-Renyi draw, then merge components with random inter-component edges.

    Each repair step picks a uniform node ``u`` and a uniform node ``w`` outside
    ``u``'s component and joins them, until the graph is connected.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    iu, ju = _pairs(n)
    keep = rng.random(iu.size) < p
    edges = set(zip(iu[keep].tolist(), ju[keep].tolist()))
    comps = _components(n, edges)
    while len(comps) > 1:
        label = np.empty(n, dtype=int)
        for c, members in enumerate(comps):
            label[list(members)] = c
        u = int(rng.integers(n))
        outside = np.flatnonzero(label != label[u])
        w = int(outside[rng.integers(outside.size)])
        edges.add((min(u, w), max(u, w)))
        comps = _components(n, edges)
    return Graph(n, edges)


def lazy_metropolis(g: Graph) -> np.ndarray:
    """``a_ij = 1 / (2 max(deg_i, deg_j))`` on edges, residual mass on the diagonal."""
    deg = g.degrees()
    a = np.zeros((g.n, g.n))
    if g.edges:
        e = np.array(g.sorted_edges())
        w = 1.0 / (2.0 * np.maximum(deg[e[:, 0]], deg[e[:, 1]]))
        a[e[:, 0], e[:, 1]] = w
        a[e[:, 1], e[:, 0]] = w
    a[np.diag_indices(g.n)] = 1.0 - a.sum(axis=1)
    a.setflags(write=False)
    return a


def jacobi_eigenvalues(m, tol=JACOBI_TOL, max_sweeps=100) -> np.ndarray:
    """Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.

    Sweeps until the off-diagonal Frobenius norm drops below ``tol``.
    Returned in ascending order.
    """
    a = np.array(m, dtype=float, copy=True)
    n = a.shape[0]
    for _ in range(max_sweeps):
        off = math.sqrt(max(0.0, float(np.sum(a * a) - np.sum(np.diag(a) ** 2))))
        if off < tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                rp, rq = a[p, :].copy(), a[q, :].copy()
                a[p, :] = c * rp - s * rq
                a[q, :] = s * rp + c * rq
                cp, cq = a[:, p].copy(), a[:, q].copy()
                a[:, p] = c * cp - s * cq
                a[:, q] = s * cp + c * cq
    return np.sort(np.diag(a))


def second_singular_value(m, method="eigh") -> float:
    """Second-largest singular value of a symmetric mixing matrix.

    ``method="eigh"`` uses LAPACK; ``method="jacobi"`` uses
    :func:`jacobi_eigenvalues`.  Both rely on symmetry: singular values are
    the absolute eigenvalues.
    """
    m = np.asarray(m, dtype=float)
    if m.shape[0] < 2:
        return 0.0
    if method == "eigh":
        ev = np.linalg.eigvalsh(m)
    elif method == "jacobi":
        ev = jacobi_eigenvalues(m)
    else:
        raise ValueError(f"unknown method {method!r}")
    return float(np.sort(np.abs(ev))[-2])


def check_b_connectivity(graphs: Sequence[Graph], B: int) -> bool:
    """True iff the union over every full window of ``B`` graphs is connected."""
    if B < 1:
        raise ValueError("B must be >= 1")
    if not graphs:
        return False
    n = graphs[0].n
    windows = len(graphs) // B
    if windows == 0:
        return False
    for w in range(windows):
        union = set()
        for g in graphs[w * B:(w + 1) * B]:
            union |= g.edges
        if len(_components(n, union)) != 1:
            return False
    return True


def validate_mixing(m, g: Graph) -> list[str]:
    """List violated weight conditions with ``beta = 1/(2n)``; empty when valid.

    At most one message per condition:
    (a) diagonal floor, (b) edge weights in ``[beta, 1]`` and zero off-graph,
    (c) unit row and column sums.
    """
    m = np.asarray(m, dtype=float)
    n = g.n
    beta = 1.0 / (2 * n)
    out = []
    if m.shape != (n, n):
        return [f"shape {m.shape} does not match graph on {n} nodes"]
    low_diag = np.flatnonzero(np.diag(m) < beta)
    if low_diag.size:
        out.append(f"(a) diagonal below beta={beta:g} at nodes {low_diag.tolist()}")
    adj = np.zeros((n, n), dtype=bool)
    for i, j in g.edges:
        adj[i, j] = adj[j, i] = True
    off = ~np.eye(n, dtype=bool)
    bad_edge = adj & ((m < beta) | (m > 1.0))
    bad_non = off & ~adj & (m != 0.0)
    if bad_edge.any() or bad_non.any():
        parts = []
        if bad_edge.any():
            parts.append(f"edge weights outside [beta, 1] at {np.argwhere(bad_edge).tolist()}")
        if bad_non.any():
            parts.append(f"nonzero weight on non-edges {np.argwhere(bad_non).tolist()}")
        out.append("(b) " + "; ".join(parts))
    rows = np.flatnonzero(np.abs(m.sum(axis=1) - 1.0) > SUM_TOL)
    cols = np.flatnonzero(np.abs(m.sum(axis=0) - 1.0) > SUM_TOL)
    if rows.size or cols.size:
        out.append(f"(c) sums differ from 1: rows {rows.tolist()}, columns {cols.tolist()}")
    return out


class GraphSchedule:
    """Seed-reproducible sequence of graphs ``G(0), ..., G(horizon-1)``.

    Graphs and matrices are built on first access and cached.  For ``B == 1``
    every graph is connected.  For ``B > 1`` one connected graph is drawn per
    window of ``B`` iterations and its edges are scattered uniformly over the
    window, so only the window unions are guaranteed connected.

    Graph ``k`` depends only on ``(seed, k // B)``, never on access order.
    """

    def __init__(self, n, p=0.5, horizon=1000, seed=0, B=1, graphs=None):
        if n < 2:
            raise ValueError("n must be >= 2")
        if B < 1:
            raise ValueError("B must be >= 1")
        self.n = int(n)
        self.p = float(p)
        self.horizon = int(horizon)
        self.seed = int(seed)
        self.B = int(B)
        self._graphs = {}
        self._matrices = {}
        self._sigma2 = {}
        self._fixed = None
        if graphs is not None:
            graphs = list(graphs)
            if any(g.n != self.n for g in graphs):
                raise ValueError("all graphs must share n")
            self._fixed = graphs
            self.horizon = len(graphs)

    @classmethod
    def static(cls, graph: Graph, horizon: int, B=1):
        sched = cls(graph.n, p=float("nan"), horizon=horizon, seed=0, B=B)
        sched._fixed = graph
        return sched

    @classmethod
    def from_graphs(cls, graphs, seed=0, p=float("nan"), B=1):
        graphs = list(graphs)
        return cls(graphs[0].n, p=p, seed=seed, B=B, graphs=graphs)

    @property
    def is_static(self) -> bool:
        return isinstance(self._fixed, Graph)

    def __len__(self):
        return self.horizon

    def _check(self, k):
        if not 0 <= k < self.horizon:
            raise ScheduleExhausted(f"graph {k} requested but schedule horizon is {self.horizon}")

    def graph(self, k: int) -> Graph:
        self._check(k)
        if self.is_static:
            return self._fixed
        if self._fixed is not None:
            return self._fixed[k]
        g = self._graphs.get(k)
        if g is None:
            g = self._draw(k)
            self._graphs[k] = g
        return g

    def _draw(self, k):
        if self.B == 1:
            return random_connected_graph(self.n, self.p, np.random.default_rng([self.seed, GRAPH_STREAM, k]))
        window = k // self.B
        rng = np.random.default_rng([self.seed, WINDOW_STREAM, window, self.B])
        base = random_connected_graph(self.n, self.p, rng)
        edges = base.sorted_edges()
        slot = rng.integers(self.B, size=len(edges))
        mine = [e for e, s in zip(edges, slot) if s == k % self.B]
        return Graph(self.n, mine)

    def matrix(self, k: int) -> np.ndarray:
        key = 0 if self.is_static else k
        self._check(k)
        m = self._matrices.get(key)
        if m is None:
            m = lazy_metropolis(self.graph(k))
            self._matrices[key] = m
        return m

    def sigma2(self, k: int) -> float:
        key = 0 if self.is_static else k
        s = self._sigma2.get(key)
        if s is None:
            s = second_singular_value(self.matrix(k))
            self._sigma2[key] = s
        return s

    def graphs(self, K=None) -> list[Graph]:
        K = self.horizon if K is None else K
        return [self.graph(k) for k in range(K)]

    def export(self, path):
        """Write ``n K seed p`` then one ``k i j`` line per edge per iteration."""
        path = Path(path)
        with path.open("w") as fh:
            fh.write(f"{self.n} {self.horizon} {self.seed} {self.p!r}\n")
            for k in range(self.horizon):
                for i, j in self.graph(k).sorted_edges():
                    fh.write(f"{k} {i} {j}\n")

    @classmethod
    def load(cls, path, B=1):
        path = Path(path)
        with path.open() as fh:
            lines = fh.read().splitlines()
        if not lines:
            raise ParseError("empty schedule file", line=1)
        head = lines[0].split()
        if len(head) != 4:
            raise ParseError("header must be 'n K seed p'", line=1)
        try:
            n, K, seed, p = int(head[0]), int(head[1]), int(head[2]), float(head[3])
        except ValueError as exc:
            raise ParseError(str(exc), line=1) from None
        edges = [[] for _ in range(K)]
        for ln, text in enumerate(lines[1:], start=2):
            if not text.strip():
                continue
            parts = text.split()
            if len(parts) != 3:
                raise ParseError("expected 'k i j'", line=ln)
            try:
                k, i, j = (int(t) for t in parts)
            except ValueError as exc:
                raise ParseError(str(exc), line=ln) from None
            if not 0 <= k < K:
                raise ParseError(f"iteration {k} outside horizon {K}", line=ln, field="k")
            edges[k].append((i, j))
        graphs = [Graph(n, e) for e in edges]
        return cls.from_graphs(graphs, seed=seed, p=p, B=B)


def spectral_delta(schedule: GraphSchedule, K=None) -> float:
    """``min{(1 - 1/(4 n^3))^(1/B), max_k sigma_2(A(k))}`` over the first ``K`` matrices."""
    K = schedule.horizon if K is None else K
    n = schedule.n
    if schedule.is_static:
        worst = schedule.sigma2(0)
    else:
        worst = max(schedule.sigma2(k) for k in range(K))
    floor = (1.0 - 1.0 / (4.0 * n**3)) ** (1.0 / schedule.B)
    return min(floor, worst)
