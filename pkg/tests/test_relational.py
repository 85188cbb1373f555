import numpy as np
import pytest
from hypothesis import given, settings

from helpers import DB0_JOIN, chain_instances, db0, random_instance
from relclust import (
    CountOverflow,
    Database,
    JoinQuery,
    NotAcyclic,
    build_join_tree,
    count_join_results,
    leaf_weighted_projection,
    root_tuple_counts,
    semi_join_reduce,
)
from relclust.oracle import materialize


def _query(spec):
    db = Database.from_dict(spec)
    return db, JoinQuery.from_database(db)


class TestJoinTree:
    def test_two_relation_chain(self):
        _, q = _query({"R1": (("A", "B"), []), "R2": (("B", "C"), [])})
        tree = build_join_tree(q)
        assert sorted(tree.edges()) == [("R1", "R2")]

    def test_triangle_is_cyclic(self):
        _, q = _query({"R": (("A", "B"), []), "S": (("B", "C"), []), "T": (("A", "C"), [])})
        with pytest.raises(NotAcyclic):
            build_join_tree(q)

    def test_single_relation(self):
        _, q = _query({"R": (("A",), [(1,)])})
        tree = build_join_tree(q)
        assert tree.nodes == ["R"] and tree.edges() == []

    def test_star_and_reroot_keep_connectivity(self):
        _, q = _query({"R1": (("A", "B"), []), "R2": (("A", "C"), []), "R3": (("A", "D"), []),
                       "R4": (("D", "E"), [])})
        tree = build_join_tree(q)
        for name in q.relation_names:
            t = tree.rerooted(name)
            assert t.root == name
            t.check(q)

    def test_four_cycle_is_cyclic(self):
        _, q = _query({"R": (("A", "B"), []), "S": (("B", "C"), []), "T": (("C", "D"), []),
                       "U": (("D", "A"), [])})
        with pytest.raises(NotAcyclic):
            build_join_tree(q)


class TestCounting:
    def test_db0_count(self):
        db, q, tree = db0()
        assert len(materialize(db, q)) == 5
        assert count_join_results(db, tree, q) == 5

    def test_empty_relation(self):
        db, q, tree = db0(R2=(("B", "C"), []))
        assert count_join_results(db, tree, q) == 0

    def test_fan_out(self):
        db, q, tree = db0(R1=(("A", "B"), [(0, 0)]), R2=(("B", "C"), [(0, 1), (0, 2)]))
        assert count_join_results(db, tree, q) == len(materialize(db, q)) == 2

    def test_root_counts_db0(self):
        db, q, tree = db0()
        assert root_tuple_counts(db, tree.rerooted("R1"), q) == {(0.0, 0.0): 2, (1.0, 0.0): 2, (4.0, 2.0): 1}
        assert root_tuple_counts(db, tree.rerooted("R2"), q) == {(0.0, 1.0): 2, (0.0, 3.0): 2, (2.0, 5.0): 1}

    def test_dangling_root_tuple_counts_zero(self):
        db, q, tree = db0(R1=(("A", "B"), [(0, 0), (1, 0), (4, 2), (9, 9)]))
        assert root_tuple_counts(db, tree.rerooted("R1"), q)[(9.0, 9.0)] == 0

    def test_duplicates_are_bag_semantics(self):
        db, q, tree = db0(R1=(("A", "B"), [(0, 0), (0, 0), (4, 2)]))
        assert count_join_results(db, tree, q) == len(materialize(db, q)) == 5

    def test_large_counts_stay_exact(self):
        # 10^4 copies in each of four relations: 10^16 results, past float64's exact range
        rels = {f"R{i}": ((f"A{i}", f"A{i+1}"), np.zeros((10_000, 2))) for i in range(4)}
        db, q = _query(rels)
        assert count_join_results(db, build_join_tree(q), q) == 10**16

    def test_overflow_is_an_error(self):
        rels = {f"R{i}": ((f"A{i}", f"A{i+1}"), np.zeros((10_000, 2))) for i in range(5)}
        db, q = _query(rels)
        with pytest.raises(CountOverflow):
            count_join_results(db, build_join_tree(q), q)

    def test_random_instances_match_oracle(self):
        rng = np.random.default_rng(11)
        for _ in range(40):
            db, q, tree = random_instance(rng)
            assert count_join_results(db, tree, q) == len(materialize(db, q))

    @settings(max_examples=60, deadline=None)
    @given(chain_instances())
    def test_count_matches_oracle(self, inst):
        db, q, tree = inst
        assert count_join_results(db, tree, q) == len(materialize(db, q))

    @settings(max_examples=60, deadline=None)
    @given(chain_instances())
    def test_root_counts_sum_to_join_size(self, inst):
        db, q, tree = inst
        n = count_join_results(db, tree, q)
        for name in q.relation_names:
            assert sum(root_tuple_counts(db, tree.rerooted(name), q).values()) == n


class TestSemiJoin:
    def test_dangling_tuple_removed(self):
        db, q, tree = db0(R1=(("A", "B"), [(0, 0), (1, 0), (4, 2), (9, 9)]))
        red = semi_join_reduce(db, tree, q)
        assert (9.0, 9.0) not in {tuple(r) for r in red["R1"].tuples.tolist()}
        assert len(red["R1"]) == 3

    def test_clean_instance_unchanged(self):
        db, q, tree = db0()
        red = semi_join_reduce(db, tree, q)
        for name in q.relation_names:
            assert np.array_equal(red[name].tuples, db[name].tuples)

    def test_empty_partner_empties_everything(self):
        db, q, tree = db0(R2=(("B", "C"), []))
        red = semi_join_reduce(db, tree, q)
        assert len(red["R1"]) == 0 and len(red["R2"]) == 0

    @settings(max_examples=60, deadline=None)
    @given(chain_instances())
    def test_idempotent_and_join_preserving(self, inst):
        db, q, tree = inst
        once = semi_join_reduce(db, tree, q)
        twice = semi_join_reduce(once, tree, q)
        for name in q.relation_names:
            assert np.array_equal(once[name].tuples, twice[name].tuples)
        assert sorted(materialize(once, q).tuples) == sorted(materialize(db, q).tuples)
        # every survivor joins
        for name in q.relation_names:
            counts = root_tuple_counts(once, tree.rerooted(name), q)
            assert all(c > 0 for c in counts.values())


class TestProjection:
    @pytest.mark.parametrize("attr, expected", [
        ("A", {0.0: 2, 1.0: 2, 4.0: 1}),
        ("C", {1.0: 2, 3.0: 2, 5.0: 1}),
        ("B", {0.0: 4, 2.0: 1}),
    ])
    def test_db0(self, attr, expected):
        db, q, tree = db0()
        col = q.attributes.index(attr)
        oracle = {}
        for t in DB0_JOIN:
            oracle[float(t[col])] = oracle.get(float(t[col]), 0) + 1
        assert oracle == expected
        H = leaf_weighted_projection(db, q, tree, attr)
        assert {p[0]: w for p, w in H.as_dict().items()} == expected

    def test_weights_sum_to_join_size(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            db, q, tree = random_instance(rng, min_tuples=1)
            n = count_join_results(db, tree, q)
            for a in q.attributes:
                H = leaf_weighted_projection(db, q, tree, a)
                assert H.total_weight == n
                assert len(np.unique(H.points)) == len(H)
