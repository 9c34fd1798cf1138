"""Residual connectedness reliability: Monte Carlo estimators and exact counters."""

from .errors import ConfigError, GraphError, InvalidStateError, UndefinedResultError
from .estimators import METHODS, EstimatorConfig, EstimateResult, estimate
from .exact import CountVector, brute_force_counts, p_star, rcr_from_counts, tm_counts
from .graph import Graph, all_pairs_distances, build_grid, load_graph, parse_edge_list

__version__ = "0.1.0"
