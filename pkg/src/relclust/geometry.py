"""Points, boxes, exponential grids and box-complement partitions."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .errors import DegenerateScale, RelClustError


@dataclass
class WeightedPointSet:
    """Points in R^d with positive weights."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if len(pts) != len(w):
            raise RelClustError(f"{len(pts)} points but {len(w)} weights")
        if np.any(w <= 0):
            raise RelClustError("weights must be positive")
        self.points, self.weights = pts, w

    def __len__(self) -> int:
        return len(self.weights)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def total_weight(self) -> float:
        return float(self.weights.sum())

    def merged(self) -> "WeightedPointSet":
        """Collapse coincident points, summing their weights; result sorted lexicographically."""
        if len(self) == 0:
            return self
        uniq, inv = np.unique(self.points, axis=0, return_inverse=True)
        w = np.bincount(inv.reshape(-1), weights=self.weights, minlength=len(uniq))
        return WeightedPointSet(uniq, w)

    def as_dict(self) -> dict[tuple[float, ...], float]:
        out: dict[tuple[float, ...], float] = {}
        for p, w in zip(self.points, self.weights):
            key = tuple(float(x) for x in p)
            out[key] = out.get(key, 0.0) + float(w)
        return out


@dataclass(frozen=True, eq=False)
class Box:
    """Axis-parallel box ``[lo, hi)``; distances are taken to its closure."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float).reshape(-1)
        hi = np.asarray(self.hi, dtype=float).reshape(-1)
        if lo.shape != hi.shape:
            raise RelClustError("box corners differ in dimension")
        if np.any(lo > hi):
            raise RelClustError(f"box with lo > hi: {lo} {hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self) -> int:
        return len(self.lo)

    def contains(self, p) -> bool:
        p = np.asarray(p, dtype=float)
        return bool(np.all(self.lo <= p) and np.all(p < self.hi))

    def volume(self) -> float:
        return float(np.prod(self.hi - self.lo))

    def is_empty(self) -> bool:
        return bool(np.any(self.lo >= self.hi))

    def intersect(self, other: "Box") -> "Box | None":
        lo, hi = np.maximum(self.lo, other.lo), np.minimum(self.hi, other.hi)
        if np.any(lo >= hi):
            return None
        return Box(lo, hi)

    def __eq__(self, other) -> bool:
        return isinstance(other, Box) and np.array_equal(self.lo, other.lo) and np.array_equal(self.hi, other.hi)

    def __repr__(self) -> str:
        return f"Box({self.lo.tolist()}, {self.hi.tolist()})"


def point_box_distance(p, box: Box) -> float:
    p = np.asarray(p, dtype=float)
    gap = np.maximum(np.maximum(box.lo - p, p - box.hi), 0.0)
    return float(np.sqrt(np.dot(gap, gap)))


def points_box_distance(points: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Distance from each row of ``points`` to box ``[lo, hi]``."""
    gap = np.maximum(np.maximum(lo - points, points - hi), 0.0)
    return np.sqrt((gap * gap).sum(axis=1))


def points_box_farthest(points: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Largest distance from each row of ``points`` to a point of box ``[lo, hi]``."""
    far = np.maximum(np.abs(points - lo), np.abs(points - hi))
    return np.sqrt((far * far).sum(axis=1))


def box_diam(box: Box) -> float:
    side = box.hi - box.lo
    return float(np.sqrt(np.dot(side, side)))


def set_box_distance(X, box: Box) -> float:
    X = np.asarray(X, dtype=float).reshape(-1, box.dim)
    return float(points_box_distance(X, box.lo, box.hi).min())


def _split(lo: float, hi: float, parts: int) -> np.ndarray:
    pts = np.linspace(lo, hi, parts + 1)
    pts[0], pts[-1] = lo, hi
    return pts


@dataclass
class ExponentialGrid:
    """Nested cubes Q_j of side 2^j * phi around ``center``, each ring cut into equal cells.

    Level 0 is Q_0 itself split into ``k0`` cells per axis.  Level j >= 1
    covers Q_j minus Q_{j-1}: Q_j is split into ``4*ring`` cells per axis and
    the central ``2*ring`` block (which is exactly Q_{j-1}) is left out.
    Cells are half-open on the high side, so the cells of one grid tile
    Q_top without overlap.
    """

    center: np.ndarray
    phi: float
    levels: int
    k0: int
    ring: int
    nominal0: float

    @property
    def dim(self) -> int:
        return len(self.center)

    def half_side(self, j: int) -> float:
        return math.ldexp(self.phi, j - 1)

    def cube(self, j: int) -> Box:
        h = self.half_side(j)
        return Box(self.center - h, self.center + h)

    def per_axis(self, j: int) -> int:
        return self.k0 if j == 0 else 4 * self.ring

    def breakpoints(self, j: int) -> list[np.ndarray]:
        """Per-axis cell boundaries of level ``j``; length ``per_axis(j) + 1``."""
        out = []
        h = self.half_side(j)
        for c in self.center:
            if j == 0:
                out.append(_split(c - h, c + h, self.k0))
            else:
                hi_in = self.half_side(j - 1)
                a, b, e, f = c - h, c - hi_in, c + hi_in, c + h
                out.append(np.concatenate([
                    _split(a, b, self.ring)[:-1],
                    _split(b, e, 2 * self.ring)[:-1],
                    _split(e, f, self.ring),
                ]))
        return out

    def nominal_side(self, j: int) -> float:
        """Target side length ``eps' 2^j phi / (10 alpha d_u)``."""
        return math.ldexp(self.nominal0, j)

    def cell_side(self, j: int) -> float:
        """Actual side of a level-``j`` cell (never above the nominal side)."""
        return math.ldexp(self.phi, j) / self.per_axis(j)

    def cell_diam(self, j: int) -> float:
        return self.cell_side(j) * math.sqrt(self.dim) * (1 + 1e-12)

    def inner_range(self, j: int) -> tuple[int, int] | None:
        return None if j == 0 else (self.ring, 3 * self.ring)

    def is_ring_cell(self, j: int, idx: Sequence[int]) -> bool:
        inner = self.inner_range(j)
        if inner is None:
            return True
        return not all(inner[0] <= i < inner[1] for i in idx)

    def cell_box(self, j: int, idx: Sequence[int], bps: list[np.ndarray] | None = None) -> Box:
        bps = bps or self.breakpoints(j)
        lo = np.array([bps[a][i] for a, i in enumerate(idx)])
        hi = np.array([bps[a][i + 1] for a, i in enumerate(idx)])
        return Box(lo, hi)

    def cells(self, j: int) -> Iterator[tuple[tuple[int, ...], Box]]:
        """All cells of level ``j`` in lexicographic index order.  Only for small grids."""
        bps = self.breakpoints(j)
        for idx in np.ndindex(*([self.per_axis(j)] * self.dim)):
            if self.is_ring_cell(j, idx):
                yield idx, self.cell_box(j, idx, bps)

    def locate(self, p) -> tuple[int, tuple[int, ...]] | None:
        """(level, index) of the cell holding ``p``, or None outside Q_top."""
        p = np.asarray(p, dtype=float)
        for j in range(self.levels + 1):
            if not self.cube(j).contains(p):
                continue
            bps = self.breakpoints(j)
            idx = tuple(int(np.searchsorted(b, x, side="right")) - 1 for b, x in zip(bps, p))
            if self.is_ring_cell(j, idx):
                return j, idx
        return None


def level_count(alpha_n: float) -> int:
    """Top level index: ceil(2 log2(alpha n)), raised until Q_top strictly contains the ball of radius alpha n phi."""
    top = max(0, math.ceil(2 * math.log2(alpha_n))) if alpha_n > 0 else 0
    while math.ldexp(1.0, top - 1) <= alpha_n:
        top += 1
    return top


def build_exponential_grid(center, phi: float, alpha: float, n: float, eps: float, d_u: int) -> ExponentialGrid:
    if not phi > 0:
        raise DegenerateScale("grid scale phi must be positive")
    if n < 1 or alpha <= 0 or not 0 < eps < 1:
        raise RelClustError(f"bad grid parameters alpha={alpha} n={n} eps={eps}")
    center = np.asarray(center, dtype=float).reshape(-1)
    if len(center) != d_u:
        raise RelClustError("center dimension differs from d_u")
    ratio = 10 * alpha * d_u / eps
    k0 = math.ceil(ratio - 1e-9 * ratio)
    ring = math.ceil(ratio / 4 - 1e-9 * ratio)
    return ExponentialGrid(center, float(phi), level_count(alpha * n), max(k0, 1), max(ring, 1),
                           eps * phi / (10 * alpha * d_u))


def complement_partition(G: Sequence[Box], within: Box) -> list[Box]:
    """Disjoint boxes whose union is ``within`` minus the union of ``G`` (all half-open)."""
    if within.is_empty():
        return []
    boxes = [g.intersect(within) for g in G]
    boxes = [b for b in boxes if b is not None]
    if not boxes:
        return [within]
    lo = np.array([b.lo for b in boxes])
    hi = np.array([b.hi for b in boxes])
    parts = _complement(lo, hi, within.lo, within.hi, 0)
    return [Box(a, b) for a, b in parts]


def _complement(lo, hi, wlo, whi, axis):
    """Recursive slab sweep: returns list of (lo, hi) arrays over axes ``axis..``."""
    d = len(wlo)
    if len(lo) == 0:
        return [(wlo[axis:].copy(), whi[axis:].copy())]
    cuts = np.unique(np.concatenate([[wlo[axis], whi[axis]], lo[:, axis], hi[:, axis]]))
    cuts = cuts[(cuts >= wlo[axis]) & (cuts <= whi[axis])]
    out = []
    run_start, run_key, run_parts = None, None, None

    def flush(end):
        if run_start is None or not run_parts:
            return
        for plo, phi in run_parts:
            out.append((np.concatenate([[run_start], plo]), np.concatenate([[end], phi])))

    for a, b in zip(cuts[:-1], cuts[1:]):
        active = (lo[:, axis] <= a) & (a < hi[:, axis])
        if axis == d - 1:
            parts = [] if active.any() else [(np.empty(0), np.empty(0))]
        else:
            parts = _complement(lo[active], hi[active], wlo, whi, axis + 1)
        key = tuple((tuple(p.tolist()), tuple(q.tolist())) for p, q in parts)
        if key != run_key:
            flush(a)
            run_start, run_key, run_parts = a, key, parts
    flush(cuts[-1])
    return out
