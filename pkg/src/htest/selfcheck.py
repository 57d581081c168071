"""Brute-force references and a quick comparison suite behind ``htest selfcheck``."""

from __future__ import annotations

import itertools
import random
from fractions import Fraction

from .experiments import (
    bfs_output_distribution,
    brute_force_eps_far,
    containment_probability,
    empirical_bfs_distribution,
    gen_p5_family,
    total_variation,
)
from .graph import Graph, complete_graph, cycle_graph, edge_key, find_copy, path_graph
from .pipeline import certify_eps_far, extract_edge_disjoint_copies
from .sparsity import treedepth_exact


def _forest_depths(n: int):
    """Every rooted forest on ``n`` labelled vertices as ``(parent, depth)``."""
    for parent in itertools.product(range(-1, n), repeat=n):
        depth = [0] * n
        ok = True
        for v in range(n):
            steps, x = 1, v
            while parent[x] != -1:
                x = parent[x]
                steps += 1
                if steps > n:
                    ok = False
                    break
            if not ok:
                break
            depth[v] = steps
        if ok:
            yield parent, max(depth, default=0)


def treedepth_brute_force(g: Graph) -> int:
    """Minimum depth over all rooted forests whose closure contains g (n <= 6)."""
    if g.n > 6:
        raise ValueError("brute force is limited to 6 vertices")
    if g.n == 0:
        return 0
    best = g.n
    edges = g.edges()
    for parent, depth in _forest_depths(g.n):
        if depth >= best:
            continue
        anc = []
        for v in range(g.n):
            s, x = {v}, v
            while parent[x] != -1:
                x = parent[x]
                s.add(x)
            anc.append(s)
        if all(u in anc[v] or v in anc[u] for u, v in edges):
            best = depth
    return best


def greedy_by_restarts(g: Graph, H: Graph) -> list[tuple[int, ...]]:
    """Greedy packing by calling find_copy from scratch each round."""
    forbidden: set[tuple[int, int]] = set()
    out = []
    while True:
        c = find_copy(g, H, forbidden)
        if c is None:
            return out
        out.append(c.image)
        forbidden.update(c.host_edges())


def run_selfcheck(seed: int = 0) -> list[tuple[str, bool]]:
    rng = random.Random(seed)
    results = []

    ok = True
    for _ in range(40):
        n = rng.randint(1, 6)
        g = Graph(n, [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < 0.5])
        ok &= treedepth_exact(g)[0] == treedepth_brute_force(g)
    results.append(("treedepth matches forest enumeration", ok))

    ok = True
    for H in (complete_graph(3), path_graph(4), cycle_graph(4)):
        for _ in range(10):
            n = rng.randint(4, 9)
            g = Graph(n, [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < 0.5])
            ok &= [c.image for c in extract_edge_disjoint_copies(g, H)] == greedy_by_restarts(g, H)
    results.append(("greedy extraction matches restarted search", ok))

    ok = True
    for _ in range(10):
        n = rng.randint(3, 7)
        g = Graph(n, [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < 0.6])
        H = complete_graph(3)
        copies = extract_edge_disjoint_copies(g, H)
        for eps in (0.1, 0.2, 0.3):
            if certify_eps_far(g, H, copies, eps):
                ok &= brute_force_eps_far(g, H, eps)
    results.append(("farness certificates are sound", ok))

    tri = complete_graph(3)
    exact = bfs_output_distribution(tri, 2, 2)
    tv = total_variation(exact, empirical_bfs_distribution(tri, 2, 2, 100000, seed))
    results.append((f"bfs law on the triangle (tv={tv:.4f})", tv < 0.01))

    inst = gen_p5_family(2)
    dist = bfs_output_distribution(inst.graph, 4, 1)
    target = frozenset(edge_key(*e) for e in inst.certificate.copies[0].host_edges())
    p = containment_probability(dist, target)
    results.append(("single planted path, exact walk probability 1/112", p == Fraction(1, 112)))
    return results
