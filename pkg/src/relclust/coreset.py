"""Weighted coresets for a projected join result, built from exponential grids.

Two builders share the same cell enumeration:

* ``build_coreset_slow`` weighs each admitted cell by the exact number of
  projected join results in it that no earlier cell has claimed, found by
  counting over a box partition of the unclaimed part.
* ``build_coreset_fast`` keeps only a list of heavy cells and estimates the
  unclaimed share of a cell from uniform samples.

Only cells holding at least one projected join result are visited.  An
empty cell adds nothing to the coreset and cannot shrink any later cell's
unclaimed population, so skipping it does not change the output.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .clustering import SolverSpec, clustering_cost, weighted_cluster
from .errors import EmptyJoin, RelClustError
from .geometry import (
    Box,
    ExponentialGrid,
    WeightedPointSet,
    box_diam,
    build_exponential_grid,
    complement_partition,
    point_box_distance,
    points_box_distance,
    points_box_farthest,
    set_box_distance,
)
from .rect import RectEngine

log = logging.getLogger(__name__)

# binomial draws need an int64 trial count
_MAX_TRIALS = 2**62
DEFAULT_MAX_SAMPLES = 4096


@dataclass
class CoresetParams:
    objective: str
    mode: str
    eps: float
    alpha: float
    r: float
    X: np.ndarray
    attrs: tuple[str, ...]

    def __post_init__(self):
        if self.objective not in ("median", "means"):
            raise RelClustError(f"unknown objective {self.objective!r}")
        if not 0 < self.eps < 1:
            raise RelClustError("eps must lie in (0, 1)")
        if self.alpha < 1:
            raise RelClustError("alpha must be at least 1")
        if self.r < 0:
            raise RelClustError("r must be nonnegative")
        self.attrs = tuple(self.attrs)
        X = np.asarray(self.X, dtype=float).reshape(-1, len(self.attrs))
        if len(X) == 0:
            raise RelClustError("the center set X is empty")
        self.X = X

    @property
    def d_u(self) -> int:
        return len(self.attrs)


def slow_grid_eps(objective: str, eps: float) -> float:
    return eps / 4 if objective == "median" else eps / 18


def fast_grid_eps(eps: float) -> float:
    return eps / 34


def scale_phi(params: CoresetParams, n: int) -> float:
    """Grid unit: r/(alpha n) for k-median, sqrt(r/(alpha n)) for k-means."""
    if n <= 0:
        raise EmptyJoin("the join result is empty")
    base = params.r / (params.alpha * n)
    return base if params.objective == "median" else math.sqrt(base)


def admit_cell(x_i, box: Box, X) -> bool:
    """A cell of x_i's grid is used only if x_i is nearly the closest center to it."""
    return point_box_distance(x_i, box) <= set_box_distance(X, box) + box_diam(box)


@dataclass
class CellRecord:
    center: int
    level: int
    index: tuple[int, ...]
    lo: np.ndarray
    hi: np.ndarray
    n_cell: int
    weight: float
    heavy: bool = True
    g: int | None = None
    trials: int | None = None

    @property
    def box(self) -> Box:
        return Box(self.lo, self.hi)


@dataclass
class CellLedger:
    """Admitted cells in processing order.

    For the slow builder every processed cell joins G; for the fast builder
    only heavy cells join B, light ones are recorded with ``heavy=False``.
    """

    records: list[CellRecord] = field(default_factory=list)
    cells_searched: int = 0

    def __post_init__(self):
        self._lo: list[np.ndarray] = []
        self._hi: list[np.ndarray] = []
        self._cache = None

    def add(self, rec: CellRecord, claims: bool) -> None:
        self.records.append(rec)
        if claims:
            self._lo.append(rec.lo)
            self._hi.append(rec.hi)
            self._cache = None

    def claimed(self) -> tuple[np.ndarray, np.ndarray]:
        if self._cache is None:
            if self._lo:
                self._cache = (np.array(self._lo), np.array(self._hi))
            else:
                self._cache = (np.empty((0, 0)), np.empty((0, 0)))
        return self._cache

    def overlapping(self, box: Box) -> list[Box]:
        """Claimed boxes that meet ``box`` (half-open intersection)."""
        lo, hi = self.claimed()
        if len(lo) == 0:
            return []
        hit = np.all(lo < box.hi, axis=1) & np.all(hi > box.lo, axis=1)
        return [Box(a, b) for a, b in zip(lo[hit], hi[hit])]

    @property
    def G(self) -> list[CellRecord]:
        return list(self.records)

    @property
    def B(self) -> list[CellRecord]:
        return [r for r in self.records if r.heavy]

    @property
    def admitted(self) -> int:
        return len(self.records)

    @property
    def heavy(self) -> int:
        return sum(r.heavy for r in self.records)

    @property
    def light(self) -> int:
        return self.admitted - self.heavy


def admitted_cells(engine: RectEngine, attrs: Sequence[str], grid: ExponentialGrid, i: int,
                   X: np.ndarray, ledger: CellLedger | None = None):
    """Nonempty admitted cells of ``grid`` as ``(level, index, box, count)``, in processing order.

    Cells are found by splitting index ranges and counting join results in
    each range; a range is dropped once it is empty, or once no cell in it
    can pass the admission test.
    """
    x_i = X[i]
    d = grid.dim
    for j in range(grid.levels + 1):
        bps = grid.breakpoints(j)
        per = grid.per_axis(j)
        inner = grid.inner_range(j)
        cdiam = grid.cell_diam(j)
        found = []
        frontier = [(np.zeros(d, np.int64), np.full(d, per, np.int64))]
        while frontier:
            live, LO, HI, ILO, IHI, has_inner = [], [], [], [], [], []
            for a, b in frontier:
                if inner is not None and np.all(a >= inner[0]) and np.all(b <= inner[1]):
                    continue
                lo = np.array([bps[t][a[t]] for t in range(d)])
                hi = np.array([bps[t][b[t]] for t in range(d)])
                near = float(points_box_distance(x_i[None], lo, hi)[0])
                reach = float(points_box_farthest(X, lo, hi).min()) + cdiam
                if near > reach * (1 + 1e-9):
                    continue
                live.append((a, b))
                LO.append(lo)
                HI.append(hi)
                if inner is not None:
                    ia, ib = np.maximum(a, inner[0]), np.minimum(b, inner[1])
                    if np.all(ia < ib):
                        ILO.append([bps[t][ia[t]] for t in range(d)])
                        IHI.append([bps[t][ib[t]] for t in range(d)])
                        has_inner.append(len(ILO) - 1)
                        continue
                has_inner.append(-1)
            if not live:
                break
            counts = engine.count_boxes(attrs, np.array(LO + ILO), np.array(HI + IHI), half_open=True)
            if ledger is not None:
                ledger.cells_searched += len(live)
            frontier = []
            for q, (a, b) in enumerate(live):
                c = counts[q]
                if has_inner[q] >= 0:
                    c -= counts[len(live) + has_inner[q]]
                if c <= 0:
                    continue
                if np.all(b - a == 1):
                    found.append((tuple(int(v) for v in a), Box(LO[q], HI[q]), c))
                    continue
                t = int(np.argmax(b - a > 1))
                mid = (a[t] + b[t]) // 2
                b1, a2 = b.copy(), a.copy()
                b1[t] = mid
                a2[t] = mid
                frontier.append((a, b1))
                frontier.append((a2, b))
        found.sort(key=lambda f: f[0])
        for idx, box, c in found:
            if admit_cell(x_i, box, X):
                yield j, idx, box, c


def _grids(params: CoresetParams, n: int, grid_eps: float) -> list[ExponentialGrid]:
    phi = scale_phi(params, n)
    return [build_exponential_grid(x, phi, params.alpha, n, grid_eps, params.d_u) for x in params.X]


def _zero_radius(engine: RectEngine, params: CoresetParams) -> tuple[WeightedPointSet, CellLedger]:
    """r = 0: every projected result sits on a center, so the centers with their counts are exact."""
    X = np.unique(params.X, axis=0)
    counts = engine.count_boxes(params.attrs, X, X)
    keep = [q for q, c in enumerate(counts) if c > 0]
    ledger = CellLedger()
    for q in keep:
        ledger.add(CellRecord(q, 0, (0,) * params.d_u, X[q], X[q], counts[q], float(counts[q])), True)
    if not keep:
        raise RelClustError("r = 0 but no projected join result lies on a center of X")
    return WeightedPointSet(X[keep], np.array([counts[q] for q in keep], dtype=float)), ledger


def _sample_one(engine: RectEngine, attrs, box: Box, rng) -> np.ndarray:
    row = engine.sample_box(attrs, box.lo, box.hi, 1, rng, half_open=True)[0]
    return _project(engine, attrs, row[None])[0]


def _project(engine: RectEngine, attrs, rows: np.ndarray) -> np.ndarray:
    cols = [engine.query.attributes.index(a) for a in attrs]
    return rows[:, cols]


def build_coreset_slow(engine: RectEngine, params: CoresetParams, seed=None) -> tuple[WeightedPointSet, CellLedger]:
    """Deterministic-weight coreset: each admitted cell weighs its exact unclaimed population."""
    n = engine.count()
    if n == 0:
        raise EmptyJoin("the join result is empty")
    if params.r == 0:
        return _zero_radius(engine, params)
    rng = np.random.default_rng(seed)
    eps = slow_grid_eps(params.objective, params.eps)
    ledger = CellLedger()
    pts, wts = [], []
    for i, grid in enumerate(_grids(params, n, eps)):
        for j, idx, box, n_cell in admitted_cells(engine, params.attrs, grid, i, params.X, ledger):
            prior = ledger.overlapping(box)
            if not prior:
                K, rep = n_cell, _sample_one(engine, params.attrs, box, rng)
            else:
                parts = complement_partition(prior, box)
                K, rep = 0, None
                if parts:
                    counts = engine.count_boxes(params.attrs, np.array([p.lo for p in parts]),
                                                np.array([p.hi for p in parts]), half_open=True)
                    K = sum(counts)
                    first = next((p for p, c in zip(parts, counts) if c > 0), None)
                    if first is not None:
                        rep = _sample_one(engine, params.attrs, first, rng)
            ledger.add(CellRecord(i, j, idx, box.lo, box.hi, n_cell, float(K)), True)
            if K > 0:
                pts.append(rep)
                wts.append(float(K))
    return WeightedPointSet(np.array(pts).reshape(-1, params.d_u), np.array(wts)), ledger


@dataclass(frozen=True)
class FastSettings:
    tau: float
    trials: int
    eps: float


def fast_settings(params: CoresetParams, N: int, d: int) -> FastSettings:
    """Heavy threshold tau and per-cell sample count M, with logs in base 2 and N floored at 2."""
    eps = fast_grid_eps(params.eps)
    logN = math.log2(max(N, 2))
    tau = 1.0 / (16 * len(params.X) * eps ** (-(params.d_u + 1)) * logN)
    M = 3.0 / (eps**2 * tau) * (1 + 10 * d * logN)
    return FastSettings(tau, int(min(math.ceil(M), _MAX_TRIALS)), eps)


def build_coreset_fast(engine: RectEngine, params: CoresetParams, seed=None, sampler: str = "binomial",
                       max_samples: int = DEFAULT_MAX_SAMPLES) -> tuple[WeightedPointSet, CellLedger]:
    """Sampled-weight coreset: cells whose unclaimed share looks at least 2 tau become heavy.

    ``sampler="binomial"`` draws the number g of the M samples that miss
    every heavy cell directly from its binomial law (exact unclaimed share
    from a box partition), which is distributed exactly like drawing all M
    samples.  ``sampler="explicit"`` really draws min(M, max_samples)
    samples and tests each against the heavy cells.
    """
    if sampler not in ("binomial", "explicit"):
        raise RelClustError(f"unknown sampler {sampler!r}")
    n = engine.count()
    if n == 0:
        raise EmptyJoin("the join result is empty")
    if params.r == 0:
        return _zero_radius(engine, params)
    rng = np.random.default_rng(seed)
    N = engine.index.db.max_relation_size()
    cfg = fast_settings(params, N, engine.query.d)
    ledger = CellLedger()
    pts, wts = [], []
    for i, grid in enumerate(_grids(params, n, cfg.eps)):
        for j, idx, box, n_cell in admitted_cells(engine, params.attrs, grid, i, params.X, ledger):
            prior = ledger.overlapping(box)
            if not prior:
                M, g = cfg.trials, cfg.trials
                rep = _sample_one(engine, params.attrs, box, rng)
            elif sampler == "binomial":
                M = cfg.trials
                parts = complement_partition(prior, box)
                counts = engine.count_boxes(params.attrs, np.array([p.lo for p in parts]).reshape(-1, params.d_u),
                                            np.array([p.hi for p in parts]).reshape(-1, params.d_u),
                                            half_open=True) if parts else []
                free = sum(counts)
                g = int(rng.binomial(M, free / n_cell)) if free else 0
                rep = None
                if g > 0:
                    pick = rng.choice(len(parts), p=np.asarray(counts, dtype=float) / free)
                    rep = _sample_one(engine, params.attrs, parts[pick], rng)
            else:
                M = min(cfg.trials, max_samples)
                rows = engine.sample_box(params.attrs, box.lo, box.hi, M, rng, half_open=True)
                S = _project(engine, params.attrs, rows)
                inside = np.zeros(M, dtype=bool)
                for b in prior:
                    inside |= np.all((S >= b.lo) & (S < b.hi), axis=1)
                g = int((~inside).sum())
                rep = S[np.argmax(~inside)] if g else None
            heavy = g / M >= 2 * cfg.tau
            w = n_cell * (g / M) / (1 - cfg.eps) if heavy else 0.0
            ledger.add(CellRecord(i, j, idx, box.lo, box.hi, n_cell, w, heavy, g, M), heavy)
            if heavy:
                pts.append(rep)
                wts.append(w)
    return WeightedPointSet(np.array(pts).reshape(-1, params.d_u), np.array(wts)), ledger


def r_u_factor(objective: str, builder: str, eps: float) -> float:
    """Multiplier turning the coreset cost of the chosen centers into an upper bound on their true cost."""
    if builder == "slow":
        return 1 / (1 - eps / 4) if objective == "median" else 1 / (1 - eps)
    if objective == "median":
        e = fast_grid_eps(eps)
        return (1 + 4 * e) / (1 - 9 * e)
    e = eps / 5
    return (1 + e) / (1 - e) ** 2


def solve_from_coreset(coreset: WeightedPointSet, k: int, params: CoresetParams, spec: SolverSpec,
                       builder: str = "fast") -> tuple[np.ndarray, float]:
    """Cluster the coreset and return (centers, r_u)."""
    if len(coreset) == 0:
        raise EmptyJoin("empty coreset")
    centers = weighted_cluster(coreset.points, coreset.weights, k, spec)
    cost = clustering_cost(coreset.points, coreset.weights, centers, params.objective)
    if params.r == 0:
        return centers, cost
    return centers, r_u_factor(params.objective, builder, params.eps) * cost
