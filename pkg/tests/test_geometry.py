import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from relclust import Box, DegenerateScale, build_exponential_grid, complement_partition
from relclust.geometry import box_diam, level_count, point_box_distance, set_box_distance


class TestDistances:
    def test_point_box(self):
        assert point_box_distance([0, 0], Box([1, 1], [2, 2])) == pytest.approx(math.sqrt(2))
        assert point_box_distance([1.5, 1.2], Box([1, 1], [2, 2])) == 0
        assert point_box_distance([3], Box([0], [1])) == 2

    def test_diam(self):
        assert box_diam(Box([0, 0], [1, 1])) == pytest.approx(math.sqrt(2))
        assert box_diam(Box([3, 3], [3, 3])) == 0
        assert box_diam(Box([0] * 4, [2.5] * 4)) == pytest.approx(2.5 * 2)

    def test_set_box(self):
        box = Box([1, 1], [2, 2])
        assert set_box_distance([[0, 0], [5, 5]], box) == pytest.approx(math.sqrt(2))
        assert set_box_distance([[1.5, 1.5], [9, 9]], box) == 0
        assert set_box_distance([[0, 0]], box) == point_box_distance([0, 0], box)

    @settings(max_examples=200)
    @given(st.lists(st.floats(-10, 10), min_size=2, max_size=2),
           st.lists(st.floats(-10, 10), min_size=2, max_size=2),
           st.lists(st.floats(0, 5), min_size=2, max_size=2),
           st.lists(st.floats(0, 1), min_size=2, max_size=2))
    def test_cell_bounds(self, x, lo, side, frac):
        """For t in the box: d(t, x) <= d(x, box) + diam(box) and d(t, x) >= d(x, box)."""
        box = Box(lo, np.array(lo) + side)
        t = box.lo + np.array(frac) * (box.hi - box.lo)
        d = float(np.linalg.norm(t - np.array(x)))
        near = point_box_distance(x, box)
        assert near <= d + 1e-9
        assert d <= near + box_diam(box) + 1e-9


class TestGrid:
    def test_levels_and_outer_side(self):
        g = build_exponential_grid([0.0], phi=1.0, alpha=2.0, n=2, eps=0.25, d_u=1)
        assert g.levels == 4
        outer = g.cube(g.levels)
        assert outer.hi[0] - outer.lo[0] == 16

    def test_level_zero_cell_side(self):
        g = build_exponential_grid([0.0], phi=1.0, alpha=2.0, n=2, eps=0.25, d_u=1)
        assert g.nominal_side(0) == pytest.approx(0.0125)
        assert g.cell_side(0) == pytest.approx(0.0125)

    def test_cells_never_exceed_nominal_side(self):
        for eps in (0.3, 0.07, 0.01):
            for d_u in (1, 2, 3):
                g = build_exponential_grid([0.0] * d_u, 1.3, 2.8, 7, eps, d_u)
                for j in range(g.levels + 1):
                    assert g.cell_side(j) <= g.nominal_side(j) * (1 + 1e-12)

    def test_degenerate_scale(self):
        with pytest.raises(DegenerateScale):
            build_exponential_grid([0.0], 0.0, 2.0, 5, 0.25, 1)

    @pytest.mark.parametrize("alpha_n", [1.0, 1.5, 2.0, 3.0, 4.0, 100.0])
    def test_top_cube_strictly_contains_radius(self, alpha_n):
        top = level_count(alpha_n)
        assert top >= math.ceil(2 * math.log2(alpha_n))
        assert math.ldexp(1.0, top - 1) > alpha_n

    def test_point_within_reach_lies_in_a_cell(self):
        rng = np.random.default_rng(0)
        g = build_exponential_grid([0.5, -1.0], 0.7, 2.0, 3, 0.5, 2)
        reach = 2.0 * 3 * 0.7
        for _ in range(500):
            v = rng.normal(size=2)
            p = g.center + v / np.linalg.norm(v) * reach * rng.random()
            loc = g.locate(p)
            assert loc is not None
            j, idx = loc
            assert g.cell_box(j, idx).contains(p)

    def test_cells_tile_without_overlap(self):
        g = build_exponential_grid([0.0, 0.0], 1.0, 1.0, 1.2, 0.9, 2)
        boxes = [b for j in range(g.levels + 1) for _, b in g.cells(j)]
        total = sum(b.volume() for b in boxes)
        outer = g.cube(g.levels)
        assert total == pytest.approx(outer.volume())
        rng = np.random.default_rng(1)
        pts = outer.lo + rng.random((2000, 2)) * (outer.hi - outer.lo)
        lo = np.array([b.lo for b in boxes])
        hi = np.array([b.hi for b in boxes])
        inside = ((pts[:, None, :] >= lo) & (pts[:, None, :] < hi)).all(axis=2).sum(axis=1)
        assert np.all(inside == 1)

    def test_ring_cells_avoid_inner_cube(self):
        g = build_exponential_grid([0.0], 1.0, 1.0, 3, 0.9, 1)
        for j in range(1, g.levels + 1):
            inner = g.cube(j - 1)
            for _, b in g.cells(j):
                assert b.intersect(inner) is None


class TestComplement:
    def test_square_minus_corner(self):
        parts = complement_partition([Box([0, 0], [1, 1])], Box([0, 0], [2, 2]))
        assert len(parts) == 2
        assert sum(p.volume() for p in parts) == pytest.approx(3)

    def test_no_obstacles(self):
        w = Box([0, 0], [2, 2])
        assert complement_partition([], w) == [w]

    def test_fully_covered(self):
        assert complement_partition([Box([-1, -1], [3, 3])], Box([0, 0], [2, 2])) == []

    @settings(max_examples=60, deadline=None)
    @given(st.integers(1, 3), st.lists(st.tuples(st.floats(0, 4), st.floats(0, 4), st.floats(0.1, 3)),
                                       max_size=5), st.integers(0, 10**6))
    def test_monte_carlo_partition(self, d, raw, seed):
        rng = np.random.default_rng(seed)
        within = Box([0.5] * d, [3.5] * d)
        G = []
        for a, b, s in raw:
            lo = np.array([a, b, (a + b) / 2][:d])
            G.append(Box(lo, lo + s))
        parts = complement_partition(G, within)
        pts = within.lo + rng.random((10_000, d)) * (within.hi - within.lo)
        in_parts = np.zeros(len(pts), int)
        for p in parts:
            in_parts += np.all((pts >= p.lo) & (pts < p.hi), axis=1)
        in_G = np.zeros(len(pts), bool)
        for g in G:
            in_G |= np.all((pts >= g.lo) & (pts < g.hi), axis=1)
        assert np.all(in_parts <= 1)
        assert np.all((in_parts == 1) ^ in_G)
        covered = sum(p.volume() for p in parts)
        assert covered <= within.volume() + 1e-9
