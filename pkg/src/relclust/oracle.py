"""Brute-force ground truth: explicit joins, exact costs, exhaustive discrete optima.

Deliberately independent of the counting engine: plain dictionaries and
Python loops, nothing shared with ``relational`` beyond the input classes.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import BudgetExceeded, RelClustError

DEFAULT_BUDGET = 20_000
SUBSET_LIMIT = 10_000


@dataclass
class MaterializedJoin:
    attrs: tuple[str, ...]
    tuples: list[tuple[float, ...]]

    def __len__(self) -> int:
        return len(self.tuples)

    def project(self, attrs: Sequence[str]) -> list[tuple[float, ...]]:
        cols = [self.attrs.index(a) for a in attrs]
        return [tuple(t[c] for c in cols) for t in self.tuples]


def materialize(db, query=None, budget: int = DEFAULT_BUDGET) -> MaterializedJoin:
    """Join relations left to right with a hash on the shared attributes."""
    names = query.relation_names if query is not None else db.names
    order = list(query.attributes) if query is not None else []
    partial: list[dict[str, float]] = [{}]
    bound: set[str] = set()
    for name in names:
        rel = db[name]
        rows = [dict(zip(rel.attrs, map(float, row))) for row in rel.tuples.tolist()]
        shared = [a for a in rel.attrs if a in bound]
        index: dict[tuple, list[dict]] = {}
        for r in rows:
            index.setdefault(tuple(r[a] for a in shared), []).append(r)
        nxt = []
        for p in partial:
            for r in index.get(tuple(p[a] for a in shared), ()):
                merged = dict(p)
                merged.update(r)
                nxt.append(merged)
                if len(nxt) > budget:
                    raise BudgetExceeded(f"join exceeds the budget of {budget} tuples")
        partial = nxt
        bound.update(rel.attrs)
        order.extend(a for a in rel.attrs if a not in order)
    attrs = tuple(order)
    return MaterializedJoin(attrs, [tuple(p[a] for a in attrs) for p in partial])


def _dist(p, c) -> float:
    return math.sqrt(sum((a - b) ** 2 for a, b in zip(p, c)))


def point_cost(points, centers, objective: str) -> float:
    """Sum over ``points`` (with repetition) of distance (or squared distance) to the nearest center."""
    if not centers:
        raise RelClustError("no centers")
    total = 0.0
    for p in points:
        d = min(_dist(p, c) for c in centers)
        total += d if objective == "median" else d * d
    return total


def exact_cost(mjoin: MaterializedJoin, attrs: Sequence[str], centers, objective: str) -> float:
    centers = [tuple(float(x) for x in c) for c in np.asarray(centers, dtype=float).reshape(-1, len(attrs))]
    return point_cost(mjoin.project(attrs), centers, objective)


def discrete_opt(mjoin: MaterializedJoin, attrs: Sequence[str], k: int, objective: str,
                 limit: int = SUBSET_LIMIT) -> tuple[list[tuple[float, ...]], float]:
    """Best ``k`` centers chosen among the distinct projected points."""
    pts = mjoin.project(attrs)
    if not pts:
        raise RelClustError("empty point set")
    mult: dict[tuple, int] = {}
    for p in pts:
        mult[p] = mult.get(p, 0) + 1
    distinct = sorted(mult)
    k = min(k, len(distinct))
    if math.comb(len(distinct), k) > limit:
        raise BudgetExceeded(f"C({len(distinct)}, {k}) subsets exceed the limit {limit}")
    best, best_cost = None, math.inf
    for sub in itertools.combinations(distinct, k):
        cost = 0.0
        for p, m in mult.items():
            d = min(_dist(p, c) for c in sub)
            cost += m * (d if objective == "median" else d * d)
        if cost < best_cost:
            best, best_cost = list(sub), cost
    return best, best_cost


def weighted_discrete_opt(points, weights, k: int, objective: str) -> tuple[list[tuple[float, ...]], float]:
    """Same enumeration over an explicit weighted point list (used to cross-check solvers)."""
    mult: dict[tuple, float] = {}
    for p, w in zip(np.asarray(points, dtype=float).tolist(), np.asarray(weights, dtype=float).tolist()):
        mult[tuple(p)] = mult.get(tuple(p), 0.0) + w
    distinct = sorted(mult)
    k = min(k, len(distinct))
    best, best_cost = None, math.inf
    for sub in itertools.combinations(distinct, k):
        cost = 0.0
        for p, m in mult.items():
            d = min(_dist(p, c) for c in sub)
            cost += m * (d if objective == "median" else d * d)
        if cost < best_cost:
            best, best_cost = list(sub), cost
    return best, best_cost
