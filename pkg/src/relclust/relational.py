"""Relations, join trees and Yannakakis-style counting.

Relations are bags: a tuple may occur several times.  Internally every
relation is collapsed once into distinct rows plus multiplicities, and all
counting passes run over those rows with hash-encoded join keys.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import CountOverflow, NotAcyclic, RelClustError

log = logging.getLogger(__name__)

U64_MAX = 2**64 - 1
# float64 holds every integer up to 2**53 exactly
_FLOAT_EXACT = float(2**53)


@dataclass(frozen=True)
class Attribute:
    name: str
    index: int


@dataclass(frozen=True, eq=False)
class Relation:
    """A named bag of real-valued tuples over an ordered attribute list."""

    name: str
    attrs: tuple[str, ...]
    tuples: np.ndarray

    def __post_init__(self):
        attrs = tuple(self.attrs)
        if len(set(attrs)) != len(attrs):
            raise RelClustError(f"relation {self.name}: duplicate attribute names {attrs}")
        data = np.asarray(self.tuples, dtype=np.float64)
        if data.size == 0:
            data = data.reshape(0, len(attrs))
        if data.ndim != 2 or data.shape[1] != len(attrs):
            raise RelClustError(
                f"relation {self.name}: tuples must have {len(attrs)} coordinates, got shape {data.shape}"
            )
        if not np.all(np.isfinite(data)):
            raise RelClustError(f"relation {self.name}: non-finite value")
        # -0.0 and 0.0 must hash to the same join key
        data = data + 0.0
        data.setflags(write=False)
        object.__setattr__(self, "attrs", attrs)
        object.__setattr__(self, "tuples", data)

    def __len__(self) -> int:
        return self.tuples.shape[0]

    def column(self, attr: str) -> np.ndarray:
        return self.tuples[:, self.attrs.index(attr)]

    def with_tuples(self, tuples) -> "Relation":
        return Relation(self.name, self.attrs, tuples)

    def __repr__(self) -> str:
        return f"Relation({self.name!r}, {self.attrs}, n={len(self)})"


class Database:
    """An immutable, ordered collection of relations keyed by name."""

    def __init__(self, relations: Iterable[Relation]):
        self._rels: dict[str, Relation] = {}
        for rel in relations:
            if rel.name in self._rels:
                raise RelClustError(f"duplicate relation name {rel.name!r}")
            self._rels[rel.name] = rel

    @classmethod
    def from_dict(cls, spec: Mapping[str, tuple[Sequence[str], Sequence[Sequence[float]]]]) -> "Database":
        """Build from ``{name: (attrs, rows)}``; handy in tests."""
        return cls(Relation(name, tuple(attrs), np.asarray(rows, dtype=float)) for name, (attrs, rows) in spec.items())

    def __getitem__(self, name: str) -> Relation:
        return self._rels[name]

    def __contains__(self, name: str) -> bool:
        return name in self._rels

    def __iter__(self):
        return iter(self._rels.values())

    def __len__(self) -> int:
        return len(self._rels)

    @property
    def names(self) -> list[str]:
        return list(self._rels)

    def replace(self, **updates: Relation) -> "Database":
        return Database(updates.get(name, rel) for name, rel in self._rels.items())

    def max_relation_size(self) -> int:
        return max((len(r) for r in self), default=0)

    def __repr__(self) -> str:
        return f"Database({list(self._rels.values())})"


@dataclass(frozen=True)
class JoinQuery:
    """The natural join of ``relations``; ``attributes`` fixes the global order."""

    schema: tuple[tuple[str, tuple[str, ...]], ...]
    attributes: tuple[str, ...]

    def __post_init__(self):
        if not self.schema:
            raise RelClustError("a join query needs at least one relation")
        seen = {a for _, attrs in self.schema for a in attrs}
        if set(self.attributes) != seen or len(set(self.attributes)) != len(self.attributes):
            raise RelClustError(
                f"attribute order {self.attributes} must list each of {sorted(seen)} exactly once"
            )

    @classmethod
    def from_database(cls, db: Database, relations: Sequence[str] | None = None,
                      attributes: Sequence[str] | None = None) -> "JoinQuery":
        names = list(relations) if relations is not None else db.names
        schema = tuple((n, db[n].attrs) for n in names)
        if attributes is None:
            order: list[str] = []
            for _, attrs in schema:
                order.extend(a for a in attrs if a not in order)
            attributes = order
        return cls(schema, tuple(attributes))

    @property
    def relation_names(self) -> list[str]:
        return [n for n, _ in self.schema]

    def attrs_of(self, name: str) -> tuple[str, ...]:
        return dict(self.schema)[name]

    def attribute_list(self) -> list[Attribute]:
        return [Attribute(a, i) for i, a in enumerate(self.attributes)]

    @property
    def d(self) -> int:
        return len(self.attributes)


@dataclass
class JoinTree:
    """Undirected join tree over relation names, stored rooted at ``root``."""

    root: str
    parent: dict[str, str | None]
    order: list[str] = field(default_factory=list)

    def __post_init__(self):
        if not self.order:
            self.order = self._preorder()

    def children(self, name: str) -> list[str]:
        return [c for c in self.order if self.parent[c] == name]

    def _preorder(self) -> list[str]:
        kids: dict[str, list[str]] = {n: [] for n in self.parent}
        for n, p in self.parent.items():
            if p is not None:
                kids[p].append(n)
        out, stack = [], [self.root]
        while stack:
            n = stack.pop()
            out.append(n)
            stack.extend(reversed(kids[n]))
        return out

    @property
    def nodes(self) -> list[str]:
        return list(self.order)

    def edges(self) -> list[tuple[str, str]]:
        return [(n, p) for n, p in self.parent.items() if p is not None]

    def postorder(self) -> list[str]:
        return list(reversed(self.order))

    def rerooted(self, new_root: str) -> "JoinTree":
        if new_root not in self.parent:
            raise KeyError(new_root)
        adj: dict[str, list[str]] = {n: [] for n in self.parent}
        for a, b in self.edges():
            adj[a].append(b)
            adj[b].append(a)
        # keep declaration-ish order for determinism
        rank = {n: i for i, n in enumerate(self.parent)}
        parent: dict[str, str | None] = {new_root: None}
        stack = [new_root]
        while stack:
            n = stack.pop()
            for m in sorted(adj[n], key=rank.__getitem__):
                if m not in parent:
                    parent[m] = n
                    stack.append(m)
        parent = {n: parent[n] for n in self.parent}
        return JoinTree(new_root, parent)

    def check(self, query: JoinQuery) -> None:
        """Raise unless this is a join tree for ``query`` (connectedness per attribute)."""
        if set(self.parent) != set(query.relation_names):
            raise RelClustError("join tree nodes do not match the query relations")
        if len(self.order) != len(self.parent):
            raise RelClustError("join tree is not connected")
        for attr in query.attributes:
            holders = {n for n in self.parent if attr in query.attrs_of(n)}
            # a connected subtree has exactly one node whose parent lies outside it
            tops = [n for n in holders if self.parent[n] not in holders]
            if len(tops) != 1:
                raise RelClustError(f"attribute {attr!r} does not induce a connected subtree")


def build_join_tree(query: JoinQuery) -> JoinTree:
    """GYO ear removal; ties broken by declaration order.

    Raises NotAcyclic when no ear can be removed.
    """
    names = query.relation_names
    attrs = {n: set(query.attrs_of(n)) for n in names}
    alive = list(names)
    parent: dict[str, str | None] = {}
    while len(alive) > 1:
        for ear in alive:
            others = [o for o in alive if o != ear]
            shared = {a for a in attrs[ear] if any(a in attrs[o] for o in others)}
            witness = next((o for o in others if shared <= attrs[o]), None)
            if witness is not None:
                parent[ear] = witness
                alive.remove(ear)
                break
        else:
            raise NotAcyclic(f"GYO reduction stalled on relations {alive}")
    parent[alive[0]] = None
    tree = JoinTree(alive[0], {n: parent[n] for n in names})
    tree.check(query)
    return tree


def _encode_keys(left: np.ndarray, right: np.ndarray) -> tuple[np.ndarray, np.ndarray, int]:
    """Map rows of two key matrices to shared dense integer ids."""
    if left.shape[1] == 0:
        return np.zeros(len(left), np.int64), np.zeros(len(right), np.int64), 1
    both = np.concatenate([left, right])
    uniq, inv = np.unique(both, axis=0, return_inverse=True)
    inv = inv.reshape(-1)
    return inv[: len(left)], inv[len(left):], len(uniq)


@dataclass
class Stats:
    """Instrumentation shared by every engine built for one run."""

    rect_queries: int = 0
    passes: int = 0
    touched: int = 0
    samples: int = 0

    def as_dict(self) -> dict:
        return dict(rect_queries=self.rect_queries, passes=self.passes,
                    touched=self.touched, samples=self.samples)


class JoinIndex:
    """Hash-indexed view of an acyclic instance, ready for counting passes.

    Each relation is collapsed to distinct rows with multiplicities.  For every
    tree edge the shared attributes are encoded to dense key ids so a pass is a
    handful of ``bincount`` calls.
    """

    def __init__(self, db: Database, query: JoinQuery, tree: JoinTree, stats: Stats | None = None):
        tree.check(query)
        self.db = db
        self.query = query
        self.tree = tree
        self.stats = stats if stats is not None else Stats()
        self.rows: dict[str, np.ndarray] = {}
        self.mult: dict[str, np.ndarray] = {}
        self.cols: dict[str, dict[str, int]] = {}
        for name in tree.order:
            rel = db[name]
            if tuple(rel.attrs) != query.attrs_of(name):
                raise RelClustError(f"relation {name} attributes differ from the query schema")
            if len(rel):
                rows, counts = np.unique(rel.tuples, axis=0, return_counts=True)
            else:
                rows, counts = rel.tuples.reshape(0, len(rel.attrs)), np.zeros(0, np.int64)
            self.rows[name] = rows
            self.mult[name] = counts.astype(np.float64)
            self.cols[name] = {a: i for i, a in enumerate(rel.attrs)}
        # the loading pass touches every stored tuple once
        self.stats.touched += sum(len(db[n]) for n in tree.order)
        self.edge_keys: dict[str, tuple[np.ndarray, np.ndarray, int]] = {}
        self.shared: dict[str, list[str]] = {}
        for child in tree.order:
            par = tree.parent[child]
            if par is None:
                continue
            shared = [a for a in query.attributes if a in self.cols[child] and a in self.cols[par]]
            self.shared[child] = shared
            ck = self.rows[child][:, [self.cols[child][a] for a in shared]]
            pk = self.rows[par][:, [self.cols[par][a] for a in shared]]
            pkey, ckey, nk = _encode_keys(pk, ck)
            self.edge_keys[child] = (ckey, pkey, nk)
        self._postorder = tree.postorder()

    @property
    def entry_count(self) -> int:
        return sum(len(r) for r in self.rows.values())

    def relation_for(self, attr: str) -> str:
        """First relation (declaration order) holding ``attr``."""
        for name in self.query.relation_names:
            if attr in self.cols[name]:
                return name
        raise KeyError(attr)

    def subtree_weights(self, masks: Mapping[str, np.ndarray | None] | None = None, batch: int = 1,
                        exact: bool = False) -> dict[str, np.ndarray]:
        """Bottom-up pass; entry ``[q, i]`` counts partial results below row ``i`` under mask ``q``.

        With ``exact`` the arithmetic runs on Python integers and raises
        CountOverflow past 2**64 - 1.
        """
        masks = masks or {}
        self.stats.passes += batch
        self.stats.touched += batch * self.entry_count
        w: dict[str, np.ndarray] = {}
        for name in self._postorder:
            m = masks.get(name)
            base = np.broadcast_to(self.mult[name], (batch, len(self.mult[name])))
            cur = base * m if m is not None else base.copy()
            if exact:
                cur = cur.astype(np.int64).astype(object)
            w[name] = cur
        for child in self._postorder:
            par = self.tree.parent[child]
            if par is None:
                continue
            ckey, pkey, nk = self.edge_keys[child]
            if exact:
                msg = np.zeros((batch, nk), dtype=object)
                for q in range(batch):
                    for i, k in enumerate(ckey):
                        msg[q, k] += w[child][q, i]
                w[par] = w[par] * msg[:, pkey]
                if len(w[par]) and w[par].size and max(w[par].ravel().tolist(), default=0) > U64_MAX:
                    raise CountOverflow(f"partial join count under {par} exceeds 64 bits")
            else:
                flat = (np.arange(batch)[:, None] * nk + ckey[None, :]).ravel()
                msg = np.bincount(flat, weights=w[child].ravel(), minlength=batch * nk).reshape(batch, nk)
                w[par] = w[par] * msg[:, pkey]
        return w

    def _checked(self, masks, batch) -> tuple[dict[str, np.ndarray], bool]:
        w = self.subtree_weights(masks, batch)
        root = w[self.tree.root]
        big = root.sum(axis=1).max(initial=0.0) if root.size else 0.0
        if big >= _FLOAT_EXACT or any(v.max(initial=0.0) >= _FLOAT_EXACT for v in w.values() if v.size):
            # float path may have rounded: redo exactly
            self.stats.passes -= batch
            self.stats.touched -= batch * self.entry_count
            return self.subtree_weights(masks, batch, exact=True), True
        return w, False

    def count(self, masks: Mapping[str, np.ndarray | None] | None = None, batch: int = 1) -> list[int]:
        """Exact join sizes for ``batch`` masked sub-instances."""
        w, exact = self._checked(masks, batch)
        root = w[self.tree.root]
        if exact:
            out = [int(sum(row)) for row in root]
        else:
            out = [int(round(s)) for s in root.sum(axis=1)]
        for c in out:
            if c > U64_MAX:
                raise CountOverflow(f"join size {c} exceeds 64 bits")
        return out

    def root_counts(self) -> dict[tuple[float, ...], int]:
        """c(h) for each distinct row h of the root relation."""
        w, exact = self._checked(None, 1)
        root = self.tree.root
        vals = w[root][0]
        out = {}
        for row, v in zip(self.rows[root], vals):
            c = int(v) if exact else int(round(v))
            if c > U64_MAX:
                raise CountOverflow(f"c(h) = {c} exceeds 64 bits")
            out[tuple(float(x) for x in row)] = c
        return out


def _query_for(db: Database, tree: JoinTree, query: JoinQuery | None) -> JoinQuery:
    return query or JoinQuery.from_database(db, [n for n in db.names if n in tree.parent])


def count_join_results(db: Database, tree: JoinTree, query: JoinQuery | None = None,
                       stats: Stats | None = None) -> int:
    return JoinIndex(db, _query_for(db, tree, query), tree, stats).count()[0]


def root_tuple_counts(db: Database, tree: JoinTree, query: JoinQuery | None = None,
                      stats: Stats | None = None) -> dict[tuple[float, ...], int]:
    """Map each distinct tuple h of the root relation to |{t in q(D) : t extends h}|."""
    return JoinIndex(db, _query_for(db, tree, query), tree, stats).root_counts()


def semi_join_reduce(db: Database, tree: JoinTree, query: JoinQuery | None = None,
                     stats: Stats | None = None) -> Database:
    """Drop dangling tuples (those in no join result); duplicates are kept."""
    query = _query_for(db, tree, query)
    updates = {}
    for name in tree.order:
        counts = root_tuple_counts(db, tree.rerooted(name), query, stats)
        rel = db[name]
        keep = np.array([counts.get(tuple(row), 0) > 0 for row in rel.tuples], dtype=bool)
        if not keep.all():
            updates[name] = rel.with_tuples(rel.tuples[keep])
    return db.replace(**updates) if updates else db


def leaf_weighted_projection(db: Database, query: JoinQuery, tree: JoinTree, attr: str,
                             stats: Stats | None = None):
    """Distinct values of ``attr`` over q(D), weighted by how many join results carry them."""
    from .geometry import WeightedPointSet

    holder = next((n for n in query.relation_names if attr in query.attrs_of(n)), None)
    if holder is None:
        raise RelClustError(f"no relation holds attribute {attr!r}")
    counts = root_tuple_counts(db, tree.rerooted(holder), query, stats)
    col = query.attrs_of(holder).index(attr)
    acc: dict[float, int] = {}
    for row, c in counts.items():
        if c > 0:
            acc[row[col]] = acc.get(row[col], 0) + c
    vals = sorted(acc)
    return WeightedPointSet(np.array(vals, dtype=float).reshape(-1, 1),
                            np.array([acc[v] for v in vals], dtype=float))
