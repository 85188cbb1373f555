"""Approximate k-median and k-means clustering of join results without materializing the join."""

from .clustering import SolverSpec, clustering_cost, discrete_from_geometric, weighted_cluster
from .coreset import CoresetParams, admit_cell, build_coreset_fast, build_coreset_slow, scale_phi, solve_from_coreset
from .errors import (RelClustError, NotAcyclic, CountOverflow, EmptyJoin, EmptyRegion, DegenerateScale, BudgetExceeded, BagTooLarge, GHDViolation, SolverFailure, SchemaMismatch, ParseError)
from .geometry import Box, WeightedPointSet, build_exponential_grid, complement_partition
from .ghd import GHDSpec, materialize_ghd_bags, validate_ghd
from .pipeline import ClusteringSolution, RunConfig, attribute_tree, run
from .rect import Rect, RectEngine, count_rect, filter_by_rect, project_samples, sample_rect
from .relational import (
    Database,
    JoinQuery,
    JoinTree,
    Relation,
    build_join_tree,
    count_join_results,
    leaf_weighted_projection,
    root_tuple_counts,
    semi_join_reduce,
)

__version__ = "0.1.0"
