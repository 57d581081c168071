"""Constant-query testing of H-freeness in the random neighbor model, plus the
copy-refinement toolkit (degree preservation, uniform coloring and layering)
that explains why the tester works on sparse graph classes."""

from .graph import Copy, CopySet, Graph, load_graph, read_graph
from .oracle import Oracle, QueryLog
from .tester import Verdict, random_bounded_bfs, test_family_freeness, test_h_freeness

__all__ = [
    "Copy",
    "CopySet",
    "Graph",
    "Oracle",
    "QueryLog",
    "Verdict",
    "load_graph",
    "random_bounded_bfs",
    "read_graph",
    "test_family_freeness",
    "test_h_freeness",
]
