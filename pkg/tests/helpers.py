"""Instance builders shared by the test modules."""

import numpy as np
from hypothesis import strategies as st

from relclust import Database, JoinQuery, build_join_tree

DB0_SPEC = {
    "R1": (("A", "B"), [(0, 0), (1, 0), (4, 2)]),
    "R2": (("B", "C"), [(0, 1), (0, 3), (2, 5)]),
}

# the five join results of DB0 over (A, B, C)
DB0_JOIN = [(0, 0, 1), (0, 0, 3), (1, 0, 1), (1, 0, 3), (4, 2, 5)]

SHAPES = {
    "single": [("R", ("A", "B"))],
    "chain2": [("R1", ("A", "B")), ("R2", ("B", "C"))],
    "chain3": [("R1", ("A", "B")), ("R2", ("B", "C")), ("R3", ("C", "D"))],
    "star3": [("R1", ("A", "B")), ("R2", ("A", "C")), ("R3", ("A", "D"))],
    "wide": [("R1", ("A", "B", "C")), ("R2", ("C", "D"))],
}


def db0(**overrides):
    spec = dict(DB0_SPEC)
    spec.update(overrides)
    db = Database.from_dict(spec)
    q = JoinQuery.from_database(db)
    return db, q, build_join_tree(q)


def random_instance(rng, shape=None, max_tuples=50, key_domain=4, value_domain=10, min_tuples=0):
    """Small random acyclic instance; join attributes draw from a narrow domain so joins are dense."""
    shape = shape or rng.choice(sorted(SHAPES))
    schema = SHAPES[shape]
    counts = {}
    for _, attrs in schema:
        for a in attrs:
            counts[a] = counts.get(a, 0) + 1
    spec = {}
    for name, attrs in schema:
        n = int(rng.integers(min_tuples, max_tuples + 1))
        cols = []
        for a in attrs:
            dom = key_domain if counts[a] > 1 else value_domain
            cols.append(rng.integers(0, dom, n).astype(float))
        spec[name] = (attrs, np.stack(cols, axis=1) if n else np.empty((0, len(attrs))))
    db = Database.from_dict(spec)
    q = JoinQuery.from_database(db)
    return db, q, build_join_tree(q)


@st.composite
def chain_instances(draw, max_tuples=12, domain=4):
    """Hypothesis strategy for R1(A,B) joined with R2(B,C) over tiny integer domains."""
    cell = st.integers(0, domain - 1)
    r1 = draw(st.lists(st.tuples(cell, cell), max_size=max_tuples))
    r2 = draw(st.lists(st.tuples(cell, cell), max_size=max_tuples))
    db = Database.from_dict({"R1": (("A", "B"), r1), "R2": (("B", "C"), r2)})
    q = JoinQuery.from_database(db)
    return db, q, build_join_tree(q)


def clustered_instance(rng, shape, n_rel=(5, 25), key_domain=3, n_clusters=3, spread=10.0, noise=0.01):
    """Acyclic instance whose non-join attributes form tight clusters, so coreset cells hold several points."""
    schema = SHAPES[shape]
    counts = {}
    for _, attrs in schema:
        for a in attrs:
            counts[a] = counts.get(a, 0) + 1
    spec = {}
    for name, attrs in schema:
        n = int(rng.integers(n_rel[0], n_rel[1] + 1))
        cols = []
        for a in attrs:
            if counts[a] > 1:
                cols.append(rng.integers(0, key_domain, n).astype(float))
            else:
                cols.append(rng.integers(0, n_clusters, n) * spread + rng.normal(0, noise, n))
        spec[name] = (attrs, np.stack(cols, axis=1))
    db = Database.from_dict(spec)
    q = JoinQuery.from_database(db)
    return db, q, build_join_tree(q)


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES = []
