"""Random bounded BFS and the one-sided H-freeness tester built on it."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .graph import Copy, Graph, edge_key, embed_with_isolated, find_copy
from .oracle import Oracle, QueryLog


@dataclass(frozen=True)
class ExploredSubgraph:
    start: int
    edges: frozenset[tuple[int, int]]
    bfs_layers: dict[int, int] = field(compare=False)

    @property
    def vertices(self) -> frozenset[int]:
        return frozenset(x for e in self.edges for x in e)


def bfs_query_budget(t: int, d: int) -> int:
    """Neighbor queries one BFS call may spend: round ``i`` has at most ``d**(i-1)`` vertices."""
    return sum(d ** i for i in range(1, t + 1))


def random_bounded_bfs(oracle: Oracle, t: int, d: int) -> ExploredSubgraph:
    """Breadth-``d``, depth-``t`` random BFS from a uniformly random start vertex.

    Uses the oracle's current random stream. The returned subgraph is the one
    spanned by every edge any query revealed.
    """
    if t < 1 or d < 1:
        raise ValueError("depth and breadth must be >= 1")
    v = oracle.random_vertex()
    layers = {v: 0}
    current = [v]
    final_edges: set[tuple[int, int]] = set()
    seen: set[int] = set()
    for step in range(1, t + 1):
        in_current = set(current)
        nxt: list[int] = []
        in_next: set[int] = set()
        for u in current:
            for _ in range(d):
                w = oracle.random_neighbor(u)
                if w is None:
                    continue
                if w not in seen and w not in in_current and w not in in_next:
                    in_next.add(w)
                    nxt.append(w)
                    layers[w] = step
                final_edges.add(edge_key(u, w))
            seen.add(u)
        current = nxt
    return ExploredSubgraph(v, frozenset(final_edges), layers)


def contains_with_isolated(explored: Iterable[tuple[int, int]] | ExploredSubgraph, H: Graph, host_size: int) -> Copy | None:
    """Copy of ``H`` whose edges all lie in ``explored``.

    Isolated vertices of ``H`` go to the smallest host ids not otherwise used,
    so a copy needs ``host_size >= |H|``.
    """
    if host_size < H.n:
        return None
    edges = explored.edges if isinstance(explored, ExploredSubgraph) else explored
    core, keep = H.without_isolated()
    core_image: dict[int, int] = {}
    if core.n:
        verts = sorted({x for e in edges for x in e})
        index = {x: i for i, x in enumerate(verts)}
        local = Graph(len(verts), [(index[u], index[v]) for u, v in edges])
        c = find_copy(local, core)
        if c is None:
            return None
        core_image = {keep[i]: verts[x] for i, x in enumerate(c.image)}
    return Copy(H, embed_with_isolated(host_size, H, core_image))


@dataclass
class Verdict:
    decision: str
    witness: Copy | None
    log: QueryLog

    @property
    def rejected(self) -> bool:
        return self.decision == "reject"

    def as_dict(self) -> dict:
        return {
            "decision": self.decision,
            "witness": list(self.witness.image) if self.witness else None,
            "queries": self.log.as_dict(),
        }


def tester_parameters(H: Graph) -> tuple[int, int, int]:
    """``(depth, breadth, components)`` the tester uses for pattern ``H``.

    Depth counts isolated pattern vertices too; only components with an
    edge get a BFS call.
    """
    core, _ = H.without_isolated()
    return H.n, H.max_degree(), len(core.components())


def tester_query_budget(H: Graph, n: int) -> int:
    t, d, comps = tester_parameters(H)
    if comps == 0:
        return 0
    return n * comps * bfs_query_budget(t, d)


def _check_args(eps: float, n: int) -> None:
    if not 0 < eps <= 1:
        raise ValueError(f"proximity parameter must lie in (0, 1], got {eps}")
    if n < 1:
        raise ValueError(f"repetition count must be >= 1, got {n}")


def test_h_freeness(oracle: Oracle, H: Graph, eps: float, n: int, pad: bool = True) -> Verdict:
    """One-sided tester for H-freeness.

    Every repetition runs one BFS per connected component of ``H`` (isolated
    vertices stripped) and rejects when the union of their outputs holds a copy
    of ``H``. All ``n`` repetitions always run; with ``pad`` each BFS call
    tops its neighbor queries up to the closed-form budget, so the count only
    depends on ``(n, H)``.
    """
    _check_args(eps, n)
    if H.n > oracle.n:
        return Verdict("accept", None, oracle.log)
    t, d, ncomp = tester_parameters(H)
    budget = bfs_query_budget(t, d) if ncomp else 0
    witness = None
    for _ in range(n):
        union: set[tuple[int, int]] = set()
        for _ in range(ncomp):
            oracle.new_stream()
            before = oracle.log.neighbor_queries
            explored = random_bounded_bfs(oracle, t, d)
            union |= explored.edges
            if pad:
                for _ in range(budget - (oracle.log.neighbor_queries - before)):
                    oracle.random_neighbor(explored.start)
        if witness is None:
            witness = contains_with_isolated(union, H, oracle.n)
    return Verdict("reject" if witness else "accept", witness, oracle.log)


def test_family_freeness(oracle: Oracle, family: Sequence[Graph], eps: float, n: int, pad: bool = True) -> Verdict:
    """Test freeness of every member at proximity ``eps / len(family)``; reject if any rejects."""
    if not family:
        raise ValueError("pattern family must be nonempty")
    _check_args(eps, n)
    witness = None
    for H in family:
        v = test_h_freeness(oracle, H, eps / len(family), n, pad=pad)
        if witness is None and v.witness is not None:
            witness = v.witness
    return Verdict("reject" if witness else "accept", witness, oracle.log)


# keep pytest from collecting these when imported into test modules
test_h_freeness.__test__ = False
test_family_freeness.__test__ = False
