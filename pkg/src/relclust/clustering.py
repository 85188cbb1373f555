"""Weighted k-median / k-means solvers for explicit point sets."""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import RelClustError, SolverFailure

log = logging.getLogger(__name__)

OBJECTIVES = ("median", "means")
MODES = ("geometric", "discrete")
STRATEGIES = ("auto", "exhaustive", "iterative")

# exhaustive search keeps an n x n distance table
_EXHAUSTIVE_MAX_POINTS = 2500
_CHUNK = 500_000


@dataclass(frozen=True)
class SolverSpec:
    objective: str = "median"
    mode: str = "geometric"
    strategy: str = "auto"
    restarts: int = 5
    max_iter: int = 100
    seed: int | None = 0
    subset_limit: int = 300_000

    def __post_init__(self):
        if self.objective not in OBJECTIVES:
            raise RelClustError(f"objective must be one of {OBJECTIVES}")
        if self.mode not in MODES:
            raise RelClustError(f"mode must be one of {MODES}")
        if self.strategy not in STRATEGIES:
            raise RelClustError(f"strategy must be one of {STRATEGIES}")

    @property
    def power(self) -> int:
        return 1 if self.objective == "median" else 2

    def resolve(self, n_distinct: int, k: int) -> str:
        """Concrete strategy for a set with ``n_distinct`` points."""
        fits = n_distinct <= _EXHAUSTIVE_MAX_POINTS and math.comb(n_distinct, min(k, n_distinct)) <= self.subset_limit
        if self.strategy == "auto":
            return "exhaustive" if fits else "iterative"
        if self.strategy == "exhaustive" and not fits:
            raise SolverFailure(
                f"exhaustive search over C({n_distinct}, {k}) subsets exceeds the limit {self.subset_limit}"
            )
        return self.strategy


def _dist_to(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """Distance from every point to every center, shape (n, k)."""
    diff = points[:, None, :] - centers[None, :, :]
    return np.sqrt((diff * diff).sum(axis=2))


def nearest(points: np.ndarray, centers: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(index, distance) of the nearest center per point; ties go to the lowest index."""
    n = len(points)
    idx = np.empty(n, dtype=np.int64)
    dist = np.empty(n)
    step = max(1, _CHUNK // max(1, len(centers) * points.shape[1]))
    for s in range(0, n, step):
        dd = _dist_to(points[s:s + step], centers)
        idx[s:s + step] = dd.argmin(axis=1)
        dist[s:s + step] = dd[np.arange(len(dd)), idx[s:s + step]]
    return idx, dist


def clustering_cost(points, weights, centers, objective: str) -> float:
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points.reshape(-1, 1)
    centers = np.asarray(centers, dtype=float).reshape(-1, points.shape[1])
    if len(centers) == 0:
        raise RelClustError("no centers")
    _, dist = nearest(points, centers)
    p = 1 if objective == "median" else 2
    return float(np.dot(np.asarray(weights, dtype=float), dist**p))


def _merge(points: np.ndarray, weights: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    uniq, inv = np.unique(points, axis=0, return_inverse=True)
    return uniq, np.bincount(inv.reshape(-1), weights=weights, minlength=len(uniq))


def weighted_cluster(points, weights, k: int, spec: SolverSpec) -> np.ndarray:
    """Centers for the weighted set: ``min(k, #distinct)`` rows; subset of ``points`` in discrete mode."""
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points.reshape(-1, 1)
    weights = np.asarray(weights, dtype=float).reshape(-1)
    if len(points) == 0:
        raise SolverFailure("cannot cluster an empty point set")
    if k < 1:
        raise RelClustError("k must be at least 1")
    P, W = _merge(points, weights)
    if k >= len(P):
        return P.copy()
    strategy = spec.resolve(len(P), k)
    if strategy == "exhaustive":
        centers = _exhaustive(P, W, k, spec.power)
        if spec.mode == "geometric":
            centers, _ = local_search(P, W, centers, spec.objective, "geometric", spec.max_iter)
        return centers
    return _iterative(P, W, k, spec)


def _exhaustive(P: np.ndarray, W: np.ndarray, k: int, power: int) -> np.ndarray:
    D = _dist_to(P, P) ** power
    n = len(P)
    best_cost, best = math.inf, None
    combos = itertools.combinations(range(n), k)
    step = max(1, _CHUNK // (k * n))
    while True:
        flat = np.fromiter(itertools.chain.from_iterable(itertools.islice(combos, step)), dtype=np.int64)
        if flat.size == 0:
            break
        C = flat.reshape(-1, k)
        cost = D[C].min(axis=1) @ W
        i = int(np.argmin(cost))
        if cost[i] < best_cost:
            best_cost, best = float(cost[i]), C[i]
    return P[best].copy()


def _seed(P: np.ndarray, W: np.ndarray, k: int, power: int, rng: np.random.Generator) -> np.ndarray:
    """D^p seeding: each next center drawn with probability proportional to w * dist^p."""
    chosen = [int(rng.choice(len(P), p=W / W.sum()))]
    dist = _dist_to(P, P[chosen[0]][None])[:, 0]
    for _ in range(1, k):
        score = W * dist**power
        if score.sum() <= 0:
            break
        c = int(rng.choice(len(P), p=score / score.sum()))
        chosen.append(c)
        dist = np.minimum(dist, _dist_to(P, P[c][None])[:, 0])
    return P[chosen].copy()


def _weiszfeld(P: np.ndarray, W: np.ndarray, start: np.ndarray, iters: int = 50) -> np.ndarray:
    y = start.copy()
    for _ in range(iters):
        d = np.sqrt(((P - y) ** 2).sum(axis=1))
        near = d < 1e-12
        if near.all():
            break
        inv = W[~near] / d[~near]
        T = (P[~near] * inv[:, None]).sum(axis=0) / inv.sum()
        if near.any():
            # modified step at a data point: stay unless the pull beats the point's own weight
            R = ((P[~near] - y) * inv[:, None]).sum(axis=0)
            r = np.sqrt(R @ R)
            wy = W[near].sum()
            if r <= wy:
                break
            T = y + max(0.0, 1 - wy / r) * (T - y)
        if np.allclose(T, y, rtol=0, atol=1e-12 * (1 + np.abs(y).max())):
            y = T
            break
        y = T
    return y


def _relocate(P: np.ndarray, W: np.ndarray, centers: np.ndarray, objective: str, mode: str) -> np.ndarray:
    """One assignment + update step."""
    idx, _ = nearest(P, centers)
    new = centers.copy()
    for c in range(len(centers)):
        members = idx == c
        if not members.any():
            continue
        Pm, Wm = P[members], W[members]
        if mode == "discrete":
            p = 1 if objective == "median" else 2
            # best member as a medoid
            step = max(1, _CHUNK // max(1, len(Pm)))
            best_i, best_c = 0, math.inf
            for s in range(0, len(Pm), step):
                costs = (_dist_to(Pm[s:s + step], Pm) ** p) @ Wm
                i = int(np.argmin(costs))
                if costs[i] < best_c:
                    best_i, best_c = s + i, float(costs[i])
            new[c] = Pm[best_i]
        elif objective == "means":
            new[c] = (Pm * Wm[:, None]).sum(axis=0) / Wm.sum()
        else:
            new[c] = _weiszfeld(Pm, Wm, centers[c])
    return new


def local_search(points, weights, centers, objective: str, mode: str, max_iter: int = 100,
                 rng: np.random.Generator | None = None) -> tuple[np.ndarray, list[float]]:
    """Improve ``centers``; returns the final centers and the (nonincreasing) cost after each accepted step.

    Geometric mode alternates assignment and Lloyd / Weiszfeld updates.
    Discrete mode adds single-swap moves against candidate input points.
    A step is kept only if it lowers the cost.
    """
    P = np.asarray(points, dtype=float)
    W = np.asarray(weights, dtype=float)
    cur = np.asarray(centers, dtype=float).copy()
    cost = clustering_cost(P, W, cur, objective)
    history = [cost]
    rng = rng or np.random.default_rng(0)
    for _ in range(max_iter):
        improved = False
        cand = _relocate(P, W, cur, objective, mode)
        c_cost = clustering_cost(P, W, cand, objective)
        if c_cost < cost * (1 - 1e-12):
            cur, cost, improved = cand, c_cost, True
        if mode == "discrete":
            swapped = _best_swap(P, W, cur, objective, rng)
            if swapped is not None:
                s_cost = clustering_cost(P, W, swapped, objective)
                if s_cost < cost * (1 - 1e-12):
                    cur, cost, improved = swapped, s_cost, True
        if not improved:
            break
        history.append(cost)
    return cur, history


def _best_swap(P, W, centers, objective, rng, max_candidates: int = 200):
    p = 1 if objective == "median" else 2
    cand = np.arange(len(P)) if len(P) <= max_candidates else rng.choice(len(P), max_candidates, replace=False)
    D = _dist_to(P, centers) ** p
    base = float(D.min(axis=1) @ W)
    best, best_cost = None, base
    DP = _dist_to(P, P[cand]) ** p
    for c in range(len(centers)):
        others = np.delete(D, c, axis=1)
        rest = others.min(axis=1) if others.shape[1] else np.full(len(P), np.inf)
        costs = np.minimum(rest[:, None], DP).T @ W
        i = int(np.argmin(costs))
        if costs[i] < best_cost:
            best_cost = float(costs[i])
            best = centers.copy()
            best[c] = P[cand[i]]
    return best


def _iterative(P: np.ndarray, W: np.ndarray, k: int, spec: SolverSpec) -> np.ndarray:
    seeds = np.random.SeedSequence(spec.seed).spawn(max(1, spec.restarts))
    best, best_cost = None, math.inf
    for ss in seeds:
        rng = np.random.default_rng(ss)
        start = _seed(P, W, k, spec.power, rng)
        centers, hist = local_search(P, W, start, spec.objective, spec.mode, spec.max_iter, rng)
        if hist[-1] < best_cost:
            best, best_cost = centers, hist[-1]
    if best is None:
        raise SolverFailure("no restart produced centers")
    return best


def discrete_from_geometric(points, weights, centers, objective: str) -> np.ndarray:
    """Replace each center by its nearest input point (lowest index on ties); duplicates dropped."""
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points.reshape(-1, 1)
    centers = np.asarray(centers, dtype=float).reshape(-1, points.shape[1])
    idx, _ = nearest(centers, points)
    keep = list(dict.fromkeys(idx.tolist()))
    return points[keep].copy()
