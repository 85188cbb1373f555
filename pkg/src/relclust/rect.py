"""Counting and uniform sampling of join results inside axis-parallel rectangles."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import EmptyRegion, RelClustError
from .geometry import Box
from .relational import Database, JoinIndex, JoinQuery, JoinTree, Stats

# cap on (rectangles x index entries) held in one batched pass
_BATCH_CELLS = 4_000_000


@dataclass(frozen=True)
class Rect:
    """Closed box ``lo <= t[a] <= hi`` on some attributes; the others are free."""

    bounds: Mapping[str, tuple[float, float]] = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for a, (lo, hi) in dict(self.bounds).items():
            lo = -np.inf if lo is None else float(lo)
            hi = np.inf if hi is None else float(hi)
            if lo > hi:
                raise RelClustError(f"rectangle side {a}: {lo} > {hi}")
            clean[a] = (lo, hi)
        object.__setattr__(self, "bounds", clean)

    @classmethod
    def from_box(cls, attrs: Sequence[str], box: Box) -> "Rect":
        """Closed rectangle with the same points as the half-open ``box``."""
        hi = np.nextafter(box.hi, -np.inf)
        return cls({a: (float(l), float(h)) for a, l, h in zip(attrs, box.lo, hi)})

    def contains(self, attrs: Sequence[str], t) -> bool:
        pos = {a: i for i, a in enumerate(attrs)}
        return all(lo <= t[pos[a]] <= hi for a, (lo, hi) in self.bounds.items())


@dataclass
class SampleSet:
    tuples: np.ndarray
    attrs: tuple[str, ...]
    seed: object = None

    def __len__(self) -> int:
        return len(self.tuples)


def _closed(hi: np.ndarray) -> np.ndarray:
    return np.nextafter(hi, -np.inf)


class RectEngine:
    """Rectangle counts and samples over one acyclic instance.

    Every call runs fresh counting passes; ``stats`` records how many passes
    ran and how many index entries they examined.
    """

    def __init__(self, db: Database, query: JoinQuery, tree: JoinTree, stats: Stats | None = None):
        self.index = JoinIndex(db, query, tree, stats)
        self.query = query
        self.stats = self.index.stats
        self._owner = {a: self.index.relation_for(a) for a in query.attributes}
        self._out_col = {a: i for i, a in enumerate(query.attributes)}

    def _masks(self, attrs: Sequence[str], lo: np.ndarray, hi: np.ndarray) -> dict[str, np.ndarray]:
        masks: dict[str, np.ndarray] = {}
        for k, a in enumerate(attrs):
            lo_k, hi_k = lo[:, k], hi[:, k]
            if np.all(np.isneginf(lo_k)) and np.all(np.isposinf(hi_k)):
                continue
            rel = self._owner[a]
            col = self.index.rows[rel][:, self.index.cols[rel][a]]
            m = (col[None, :] >= lo_k[:, None]) & (col[None, :] <= hi_k[:, None])
            masks[rel] = masks[rel] & m if rel in masks else m
        return masks

    def count_boxes(self, attrs: Sequence[str], lo, hi, half_open: bool = False) -> list[int]:
        """Join results inside each box ``lo[q] <= t[attrs] <= hi[q]``."""
        lo = np.atleast_2d(np.asarray(lo, dtype=float))
        hi = np.atleast_2d(np.asarray(hi, dtype=float))
        if half_open:
            hi = _closed(hi)
        Q = len(lo)
        self.stats.rect_queries += Q
        step = max(1, _BATCH_CELLS // max(1, self.index.entry_count))
        out: list[int] = []
        for s in range(0, Q, step):
            sl = slice(s, min(Q, s + step))
            out.extend(self.index.count(self._masks(attrs, lo[sl], hi[sl]), batch=len(lo[sl])))
        return out

    def count(self, rect: Rect | None = None) -> int:
        attrs, lo, hi = self._rect_arrays(rect)
        return self.count_boxes(attrs, lo, hi)[0]

    def _rect_arrays(self, rect: Rect | None):
        bounds = rect.bounds if rect is not None else {}
        for a in bounds:
            if a not in self._owner:
                raise RelClustError(f"rectangle names unknown attribute {a!r}")
        attrs = list(bounds)
        lo = np.array([[bounds[a][0] for a in attrs]], dtype=float).reshape(1, len(attrs))
        hi = np.array([[bounds[a][1] for a in attrs]], dtype=float).reshape(1, len(attrs))
        return attrs, lo, hi

    def sample_box(self, attrs: Sequence[str], lo, hi, z: int, rng: np.random.Generator,
                   half_open: bool = False) -> np.ndarray:
        """``z`` join results drawn uniformly with replacement from the box; rows over query attributes."""
        d = len(self.query.attributes)
        if z <= 0:
            return np.empty((0, d))
        lo = np.asarray(lo, dtype=float).reshape(1, -1)
        hi = np.asarray(hi, dtype=float).reshape(1, -1)
        if half_open:
            hi = _closed(hi)
        self.stats.rect_queries += 1
        idx = self.index
        w = idx.subtree_weights(self._masks(attrs, lo, hi), 1)
        w = {n: np.asarray(v[0], dtype=float) for n, v in w.items()}
        tree = idx.tree
        root = tree.root
        if w[root].sum() <= 0:
            raise EmptyRegion("no join result inside the sampling rectangle")
        out = np.empty((z, d))
        chosen: dict[str, np.ndarray] = {root: _draw(w[root], rng.random(z))}
        for name in tree.order:
            par = tree.parent[name]
            if par is not None:
                ckey, pkey, nk = idx.edge_keys[name]
                chosen[name] = _draw_grouped(w[name], ckey, pkey[chosen[par]], rng.random(z))
            rows = idx.rows[name][chosen[name]]
            for a, c in idx.cols[name].items():
                out[:, self._out_col[a]] = rows[:, c]
        self.stats.samples += z
        self.stats.touched += z * len(tree.order)
        return out

    def sample(self, rect: Rect | None, z: int, rng: np.random.Generator) -> np.ndarray:
        attrs, lo, hi = self._rect_arrays(rect)
        return self.sample_box(attrs, lo, hi, z, rng)


def _draw(weights: np.ndarray, u: np.ndarray) -> np.ndarray:
    cum = np.cumsum(weights)
    pick = np.searchsorted(cum, u * cum[-1], side="right")
    pick = np.minimum(pick, len(weights) - 1)
    return _last_positive(weights)[pick]


def _last_positive(weights: np.ndarray) -> np.ndarray:
    pos = np.where(weights > 0, np.arange(len(weights)), -1)
    return np.maximum.accumulate(pos)


def _draw_grouped(weights: np.ndarray, keys: np.ndarray, want: np.ndarray, u: np.ndarray) -> np.ndarray:
    """For each wanted key, pick an entry with that key proportionally to ``weights``."""
    order = np.argsort(keys, kind="stable")
    sk, sw = keys[order], weights[order]
    cum = np.cumsum(sw)
    start = np.searchsorted(sk, want, side="left")
    end = np.searchsorted(sk, want, side="right")
    base = np.where(start > 0, cum[np.maximum(start - 1, 0)], 0.0)
    total = cum[end - 1] - base
    pick = np.searchsorted(cum, base + u * total, side="right")
    pick = np.minimum(pick, end - 1)
    pick = _last_positive(sw)[pick]
    return order[pick]


def filter_by_rect(db: Database, rect: Rect) -> Database:
    """Drop every base tuple that violates a rectangle side on one of its attributes."""
    updates = {}
    for rel in db:
        keep = np.ones(len(rel), dtype=bool)
        for a, (lo, hi) in rect.bounds.items():
            if a in rel.attrs:
                col = rel.column(a)
                keep &= (col >= lo) & (col <= hi)
        if not keep.all():
            updates[rel.name] = rel.with_tuples(rel.tuples[keep])
    return db.replace(**updates) if updates else db


def _query_for(db: Database, tree: JoinTree, query: JoinQuery | None) -> JoinQuery:
    return query or JoinQuery.from_database(db, [n for n in db.names if n in tree.parent])


def count_rect(db: Database, tree: JoinTree, rect: Rect | None, query: JoinQuery | None = None) -> int:
    return RectEngine(db, _query_for(db, tree, query), tree).count(rect)


def sample_rect(db: Database, tree: JoinTree, rect: Rect | None, z: int, seed=None,
                query: JoinQuery | None = None) -> SampleSet:
    query = _query_for(db, tree, query)
    if z <= 0:
        return SampleSet(np.empty((0, query.d)), query.attributes, seed)
    rng = np.random.default_rng(seed)
    return SampleSet(RectEngine(db, query, tree).sample(rect, z, rng), query.attributes, seed)


def project_samples(samples: SampleSet, attrs: Sequence[str]) -> np.ndarray:
    """Multiset projection: one output row per sample, duplicates kept."""
    cols = [samples.attrs.index(a) for a in attrs]
    return samples.tuples[:, cols].reshape(len(samples), len(cols))
