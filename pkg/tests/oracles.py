"""Slow, obviously-correct references the tests compare against.

None of these share code with the package beyond the Graph container.
"""

import itertools
from fractions import Fraction

from htest.graph import Graph
from htest.tester import random_bounded_bfs


def all_copies(host: Graph, pattern: Graph):
    """Every injective edge-preserving map, by trying all vertex tuples."""
    out = []
    for image in itertools.permutations(range(host.n), pattern.n):
        if all(host.has_edge(image[a], image[b]) for a, b in pattern.edges()):
            out.append(image)
    return out


def has_copy(host: Graph, pattern: Graph) -> bool:
    return bool(all_copies(host, pattern))


def copy_edges(pattern, image):
    return {tuple(sorted((image[a], image[b]))) for a, b in pattern.edges()}


def max_edge_disjoint(host: Graph, pattern: Graph) -> int:
    """Largest set of pairwise edge-disjoint copies (exhaustive)."""
    edge_sets = {frozenset(copy_edges(pattern, im)) for im in all_copies(host, pattern)}
    edge_sets = sorted(edge_sets, key=sorted)
    best = 0

    def grow(i, used, count):
        nonlocal best
        best = max(best, count)
        for j in range(i, len(edge_sets)):
            if not edge_sets[j] & used:
                grow(j + 1, used | edge_sets[j], count + 1)

    grow(0, frozenset(), 0)
    return best


def min_deletions(host: Graph, pattern: Graph, limit: int | None = None) -> int | None:
    """Fewest edge deletions that remove every copy; None if more than ``limit`` are needed."""
    edges = host.edges()
    top = len(edges) if limit is None else min(limit, len(edges))
    for r in range(top + 1):
        for drop in itertools.combinations(edges, r):
            kept = [e for e in edges if e not in drop]
            if not has_copy(Graph(host.n, kept), pattern):
                return r
    return None


def treedepth_by_elimination(g: Graph) -> int:
    """Minimum over elimination orders, with no memo: pick a root, recurse on components."""

    def comps(verts):
        verts = set(verts)
        out = []
        while verts:
            stack = [verts.pop()]
            comp = set(stack)
            while stack:
                x = stack.pop()
                for y in g.adj[x]:
                    if y in verts:
                        verts.discard(y)
                        comp.add(y)
                        stack.append(y)
            out.append(comp)
        return out

    def td(verts):
        if not verts:
            return 0
        parts = comps(verts)
        if len(parts) > 1:
            return max(td(p) for p in parts)
        return 1 + min(td(verts - {v}) for v in verts)

    return td(frozenset(range(g.n)))


def connected(g: Graph) -> bool:
    return g.n > 0 and len(g.components()) == 1


def all_labelled_graphs(n: int):
    pairs = list(itertools.combinations(range(n), 2))
    for mask in range(1 << len(pairs)):
        yield Graph(n, [p for i, p in enumerate(pairs) if mask >> i & 1])


class _Scripted:
    """Oracle stand-in answering from a fixed list of choices; raises when it runs out."""

    class Branch(Exception):
        def __init__(self, options):
            self.options = options

    def __init__(self, graph, script):
        self.graph = graph
        self.n = graph.n
        self.script = list(script)
        self.pos = 0
        self.weight = Fraction(1)

    def _next(self, options):
        if self.pos == len(self.script):
            raise self.Branch(options)
        pick = self.script[self.pos]
        self.pos += 1
        self.weight /= len(options)
        return options[pick]

    def random_vertex(self):
        return self._next(list(range(self.n)))

    def random_neighbor(self, v):
        nb = self.graph.adj[v]
        if not nb:
            return None
        return self._next(list(nb))


def bfs_law_by_replay(g: Graph, t: int, d: int) -> dict:
    """Exact output law of the package BFS, replaying every answer sequence."""
    law = {}
    stack = [[]]
    while stack:
        script = stack.pop()
        o = _Scripted(g, script)
        try:
            e = random_bounded_bfs(o, t, d)
        except _Scripted.Branch as b:
            for i in range(len(b.options)):
                stack.append(script + [i])
            continue
        key = (e.start, e.edges)
        law[key] = law.get(key, Fraction(0)) + o.weight
    return law
