"""User-supplied tree decompositions: validation and bag materialization."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import BagTooLarge, GHDViolation
from .relational import Database, JoinQuery, Relation

DEFAULT_BAG_BUDGET = 1_000_000


@dataclass
class GHDSpec:
    """Bags of attributes, tree edges between bag indices, optional per-bag cover weights."""

    bags: list[tuple[str, ...]]
    edges: list[tuple[int, int]] = field(default_factory=list)
    cover: list[Mapping[str, float]] | None = None

    def __post_init__(self):
        self.bags = [tuple(b) for b in self.bags]
        self.edges = [(int(a), int(b)) for a, b in self.edges]


def _tree_ok(n: int, edges: Sequence[tuple[int, int]]) -> bool:
    if len(edges) != n - 1:
        return False
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in edges:
        if not (0 <= a < n and 0 <= b < n):
            return False
        ra, rb = find(a), find(b)
        if ra == rb:
            return False
        parent[ra] = rb
    return True


def validate_ghd(query: JoinQuery, ghd: GHDSpec) -> float | None:
    """Check coverage, connectivity and (if given) the cover constraints.

    Returns the width (largest bag cover weight) when cover weights are
    supplied, else None.  Raises GHDViolation on the first failed check.
    """
    n = len(ghd.bags)
    if n == 0:
        raise GHDViolation("decomposition has no bags")
    attrs = set(query.attributes)
    for i, bag in enumerate(ghd.bags):
        extra = set(bag) - attrs
        if extra:
            raise GHDViolation(f"bag {i} names unknown attributes {sorted(extra)}")
    if not _tree_ok(n, ghd.edges):
        raise GHDViolation("bag edges do not form a tree")
    for name, rattrs in query.schema:
        if not any(set(rattrs) <= set(bag) for bag in ghd.bags):
            raise GHDViolation(f"coverage: no bag contains all attributes of relation {name}")
    adj = {i: set() for i in range(n)}
    for a, b in ghd.edges:
        adj[a].add(b)
        adj[b].add(a)
    for attr in query.attributes:
        holders = {i for i, bag in enumerate(ghd.bags) if attr in bag}
        start = next(iter(holders))
        seen, stack = {start}, [start]
        while stack:
            u = stack.pop()
            for v in adj[u] & holders:
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        if seen != holders:
            raise GHDViolation(f"connectivity: bags holding {attr!r} are not connected")
    if ghd.cover is None:
        return None
    if len(ghd.cover) != n:
        raise GHDViolation("need one cover-weight map per bag")
    names = set(query.relation_names)
    width = 0.0
    for i, (bag, weights) in enumerate(zip(ghd.bags, ghd.cover)):
        for rel, x in weights.items():
            if rel not in names:
                raise GHDViolation(f"cover of bag {i} names unknown relation {rel!r}")
            if x < 0:
                raise GHDViolation(f"cover of bag {i} has a negative weight")
        for attr in bag:
            tot = sum(x for rel, x in weights.items() if attr in query.attrs_of(rel))
            if tot < 1 - 1e-9:
                raise GHDViolation(f"cover of bag {i} gives attribute {attr!r} weight {tot} < 1")
        width = max(width, float(sum(weights.values())))
    return width


@dataclass
class _Table:
    attrs: list[str]
    cols: np.ndarray  # (rows, len(attrs))
    mult: np.ndarray  # int64 multiplicity per row


def _distinct(rel: Relation, attrs: Sequence[str]) -> _Table:
    cols = rel.tuples[:, [rel.attrs.index(a) for a in attrs]]
    if len(cols):
        cols = np.unique(cols, axis=0)
    return _Table(list(attrs), cols.reshape(-1, len(attrs)), np.ones(len(cols), np.int64))


def _join(left: _Table, right: _Table, budget: int, bag: int) -> _Table:
    shared = [a for a in right.attrs if a in left.attrs]
    new = [a for a in right.attrs if a not in left.attrs]
    lk = left.cols[:, [left.attrs.index(a) for a in shared]]
    rk = right.cols[:, [right.attrs.index(a) for a in shared]]
    if shared:
        _, inv = np.unique(np.concatenate([lk, rk]), axis=0, return_inverse=True)
        inv = inv.reshape(-1)
    else:
        inv = np.zeros(len(lk) + len(rk), np.int64)
    lkey, rkey = inv[: len(lk)], inv[len(lk):]
    order = np.argsort(rkey, kind="stable")
    sk = rkey[order]
    start = np.searchsorted(sk, lkey, side="left")
    cnt = np.searchsorted(sk, lkey, side="right") - start
    total = int(cnt.sum())
    if total > budget:
        raise BagTooLarge(f"bag {bag} needs more than {budget} tuples")
    li = np.repeat(np.arange(len(lkey)), cnt)
    offs = np.arange(total) - np.repeat(np.cumsum(cnt) - cnt, cnt)
    ri = order[np.repeat(start, cnt) + offs]
    cols = np.concatenate([left.cols[li], right.cols[ri][:, [right.attrs.index(a) for a in new]]], axis=1)
    return _Table(left.attrs + new, cols, left.mult[li] * right.mult[ri])


def materialize_ghd_bags(db: Database, query: JoinQuery, ghd: GHDSpec,
                         budget: int = DEFAULT_BAG_BUDGET) -> tuple[JoinQuery, Database]:
    """One relation per bag whose natural join equals the original join, multiplicities included.

    Each base relation is owned by the first bag that contains it and
    contributes its multiplicities there; every other relation meeting a bag
    enters it only as a distinct projection, i.e. a filter.
    """
    validate_ghd(query, ghd)
    owner = {name: next(i for i, bag in enumerate(ghd.bags) if set(attrs) <= set(bag))
             for name, attrs in query.schema}
    rels = []
    for i, bag in enumerate(ghd.bags):
        bagset = set(bag)
        pieces = []
        for name, attrs in query.schema:
            rel = db[name]
            if owner[name] == i:
                rows, mult = (np.unique(rel.tuples, axis=0, return_counts=True) if len(rel)
                              else (rel.tuples, np.zeros(0, np.int64)))
                pieces.append((0, _Table(list(attrs), rows.reshape(-1, len(attrs)), mult.astype(np.int64))))
            elif bagset & set(attrs):
                pieces.append((1, _distinct(rel, [a for a in attrs if a in bagset])))
        # owned relations first, then whichever piece shares the most bound attributes
        pieces.sort(key=lambda p: p[0])
        table = pieces.pop(0)[1]
        while pieces:
            bound = set(table.attrs)
            best = max(range(len(pieces)), key=lambda q: (len(bound & set(pieces[q][1].attrs)), -pieces[q][0], -q))
            table = _join(table, pieces.pop(best)[1], budget, i)
        order = [a for a in query.attributes if a in bagset]
        cols = table.cols[:, [table.attrs.index(a) for a in order]]
        tuples = np.repeat(cols, table.mult, axis=0) if len(cols) else cols.reshape(0, len(order))
        if len(tuples) > budget:
            raise BagTooLarge(f"bag {i} holds {len(tuples)} tuples, budget {budget}")
        rels.append(Relation(f"bag{i}", tuple(order), tuples))
    new_db = Database(rels)
    return JoinQuery.from_database(new_db, attributes=query.attributes), new_db
