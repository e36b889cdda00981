"""Built-in economic dispatch cases and the ``dislag-case v1`` file format.

File grammar (blank lines and ``#`` comments ignored)::

    dislag-case v1
    name <text>
    seed <int>                      # optional
    total_demand <float>
    node <id>
      cost quadratic2 a=<f> b=<f>   # a*x^2 + b*x
      cost quadratic3 a=<f> b=<f> c=<f>   # a + b*x + c*x^2
      lo <float>
      hi <float>
      b <float>
    end

Floats are written with 17 significant digits so a save/load round trip is
exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import InvariantViolation, ParseError, SlaterViolation
from .problem import Box, NodeSpec, Problem, Quadratic2, Quadratic3

MAGIC = "dislag-case v1"
DEMAND_TOL = 1e-9

IEEE14_GENERATORS = (
    # (a [MU/MW^2], b [MU/MW], Pmax [MW])
    (0.04, 2.0, 80.0),
    (0.03, 3.0, 90.0),
    (0.035, 4.0, 70.0),
    (0.03, 4.0, 70.0),
    (0.04, 2.5, 80.0),
)
IEEE14_DISPATCH = (40.0, 80.0, 60.0, 80.0, 40.0)

IEEE118_N = 54
IEEE118_DEMAND = 6000.0
IEEE118_RANGES = {
    "a": (6.78, 74.33),
    "b": (8.3391, 37.6968),
    "c": (0.0024, 0.0697),
    "pmin": (5.0, 150.0),
    "pmax": (150.0, 400.0),
}
IEEE118_MAX_DRAWS = 100


@dataclass(frozen=True)
class Case:
    name: str
    problem: Problem
    seed: Optional[int] = None

    @property
    def total_demand(self) -> float:
        return self.problem.total_demand


def ieee14() -> Problem:
    """Five generators; demand 300 MW split as the initial dispatch."""
    nodes = [
        NodeSpec(i, Quadratic2(a, b), Box(0.0, pmax), share)
        for i, ((a, b, pmax), share) in enumerate(zip(IEEE14_GENERATORS, IEEE14_DISPATCH))
    ]
    return Problem(nodes)


def ieee118(seed: int = 1) -> Problem:
    """54 generators with coefficients drawn uniformly from the published ranges.

    Each node carries an equal share of the 6000 MW demand.  Draws are
    repeated (same generator stream) until the instance is Slater feasible.
    """
    rng = np.random.default_rng(seed)
    share = IEEE118_DEMAND / IEEE118_N
    for _ in range(IEEE118_MAX_DRAWS):
        draw = {k: rng.uniform(lo, hi, IEEE118_N) for k, (lo, hi) in IEEE118_RANGES.items()}
        if draw["pmin"].sum() < IEEE118_DEMAND < draw["pmax"].sum():
            nodes = [
                NodeSpec(i, Quadratic3(draw["a"][i], draw["b"][i], draw["c"][i]),
                         Box(draw["pmin"][i], draw["pmax"][i]), share)
                for i in range(IEEE118_N)
            ]
            return Problem(nodes)
    raise SlaterViolation(f"no Slater-feasible IEEE-118 instance in {IEEE118_MAX_DRAWS} draws (seed {seed})")


def builtin(name: str, seed: int = 1) -> Case:
    if name == "ieee14":
        return Case("ieee14", ieee14())
    if name == "ieee118":
        return Case("ieee118", ieee118(seed), seed)
    raise KeyError(name)


def _g(x) -> str:
    return format(float(x), ".17g")


def save_case(problem: Problem, path, name: str = "case", seed: Optional[int] = None):
    lines = [MAGIC, f"name {name}"]
    if seed is not None:
        lines.append(f"seed {int(seed)}")
    lines.append(f"total_demand {_g(problem.b.sum())}")
    for nd in problem.nodes:
        cost = nd.cost
        if isinstance(cost, Quadratic2):
            cline = f"cost quadratic2 a={_g(cost.a)} b={_g(cost.b)}"
        elif isinstance(cost, Quadratic3):
            cline = f"cost quadratic3 a={_g(cost.a)} b={_g(cost.b)} c={_g(cost.c)}"
        else:
            raise TypeError(f"cost {cost!r} cannot be serialized")
        lines += [f"node {nd.id}", f"  {cline}", f"  lo {_g(nd.box.lo)}", f"  hi {_g(nd.box.hi)}",
                  f"  b {_g(nd.b)}", "end"]
    Path(path).write_text("\n".join(lines) + "\n")


_COST_FIELDS = {"quadratic2": ("a", "b"), "quadratic3": ("a", "b", "c")}


def _float(text, ln, field):
    try:
        return float(text)
    except ValueError:
        raise ParseError(f"not a number: {text!r}", line=ln, field=field) from None


def _parse_cost(parts, ln):
    if len(parts) < 2:
        raise ParseError("cost needs a kind", line=ln, field="cost")
    kind = parts[1]
    if kind not in _COST_FIELDS:
        raise ParseError(f"unknown cost kind {kind!r}", line=ln, field="cost")
    coef = {}
    for tok in parts[2:]:
        key, sep, val = tok.partition("=")
        if not sep:
            raise ParseError(f"expected key=value, got {tok!r}", line=ln, field="cost")
        coef[key] = _float(val, ln, key)
    for key in _COST_FIELDS[kind]:
        if key not in coef:
            raise ParseError(f"missing coefficient {key!r}", line=ln, field=key)
    try:
        return Quadratic2(coef["a"], coef["b"]) if kind == "quadratic2" else Quadratic3(coef["a"], coef["b"], coef["c"])
    except ValueError as exc:
        raise InvariantViolation(f"line {ln}: {exc}") from None


def load_case(path) -> Case:
    """Parse a case file; raises :class:`ParseError` or :class:`InvariantViolation`."""
    text = Path(path).read_text().splitlines()
    lines = [(i + 1, ln.split("#", 1)[0].strip()) for i, ln in enumerate(text)]
    lines = [(i, ln) for i, ln in lines if ln]
    if not lines or lines[0][1] != MAGIC:
        raise ParseError(f"first line must be {MAGIC!r}", line=lines[0][0] if lines else 1)
    name, seed, demand = None, None, None
    nodes = []
    cur = None
    for ln, line in lines[1:]:
        parts = line.split()
        key = parts[0]
        if cur is None:
            if key == "name":
                name = line.partition(" ")[2].strip()
            elif key == "seed":
                seed = int(_float(parts[1], ln, "seed")) if len(parts) == 2 else None
                if seed is None:
                    raise ParseError("seed takes one value", line=ln, field="seed")
            elif key == "total_demand":
                if len(parts) != 2:
                    raise ParseError("total_demand takes one value", line=ln, field="total_demand")
                demand = _float(parts[1], ln, "total_demand")
            elif key == "node":
                if len(parts) != 2:
                    raise ParseError("node takes one id", line=ln, field="node")
                try:
                    cur = {"id": int(parts[1]), "line": ln}
                except ValueError:
                    raise ParseError(f"bad node id {parts[1]!r}", line=ln, field="node") from None
            else:
                raise ParseError(f"unexpected {key!r}", line=ln)
        elif key == "cost":
            cur["cost"] = _parse_cost(parts, ln)
        elif key in ("lo", "hi", "b"):
            if len(parts) != 2:
                raise ParseError(f"{key} takes one value", line=ln, field=key)
            cur[key] = _float(parts[1], ln, key)
        elif key == "end":
            for req in ("cost", "lo", "hi", "b"):
                if req not in cur:
                    raise ParseError(f"node {cur['id']} is missing {req!r}", line=ln, field=req)
            try:
                box = Box(cur["lo"], cur["hi"])
            except ValueError as exc:
                raise InvariantViolation(f"node {cur['id']}: {exc}") from None
            nodes.append(NodeSpec(cur["id"], cur["cost"], box, cur["b"]))
            cur = None
        else:
            raise ParseError(f"unexpected {key!r} inside node block", line=ln)
    if cur is not None:
        raise ParseError(f"node {cur['id']} block not closed with 'end'", line=cur["line"])
    if name is None:
        raise ParseError("missing name", field="name")
    if demand is None:
        raise ParseError("missing total_demand", field="total_demand")
    if not nodes:
        raise ParseError("case has no nodes", field="node")
    ids = [nd.id for nd in nodes]
    if len(set(ids)) != len(ids):
        raise InvariantViolation("node ids must be unique")
    problem = Problem(nodes)
    if abs(problem.b.sum() - demand) > DEMAND_TOL:
        raise InvariantViolation(
            f"sum of b ({problem.b.sum():.17g}) differs from total_demand ({demand:.17g})"
        )
    return Case(name, problem, seed)
