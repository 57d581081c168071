"""Treedepth, tree embeddings and low-treedepth colorings.

Depth is counted in vertices along a root-to-leaf chain: a single vertex has
treedepth 1, an edge 2. ``TreeOrder.level`` is still the number of strict
ancestors (roots sit on level 0), so ``depth == max level + 1``.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass
from typing import Iterable, Mapping

from .graph import Graph

DEFAULT_CAP = 20


class TreedepthCapError(ValueError):
    """A component is too large for the exact subset recursion."""


@dataclass(frozen=True)
class TreeOrder:
    """Rooted forest order on a vertex set; ``parent[v] is None`` for roots."""

    parent: Mapping[int, int | None]
    level: Mapping[int, int]

    @classmethod
    def from_parents(cls, parent: Mapping[int, int | None]) -> TreeOrder:
        level: dict[int, int] = {}
        for v in parent:
            chain = []
            x = v
            while x is not None and x not in level:
                chain.append(x)
                if len(chain) > len(parent):
                    raise ValueError("parent links contain a cycle")
                x = parent[x]
            base = -1 if x is None else level[x]
            for y in reversed(chain):
                base += 1
                level[y] = base
        return cls(dict(parent), level)

    @property
    def vertices(self) -> list[int]:
        return sorted(self.parent)

    @property
    def depth(self) -> int:
        return max(self.level.values(), default=-1) + 1

    def ancestors(self, v: int) -> list[int]:
        out = []
        x = self.parent[v]
        while x is not None:
            out.append(x)
            x = self.parent[x]
        return out

    def comparable(self, a: int, b: int) -> bool:
        if self.level[a] > self.level[b]:
            a, b = b, a
        x = b
        for _ in range(self.level[b] - self.level[a]):
            x = self.parent[x]
        return x == a

    def restrict(self, keep: Iterable[int]) -> TreeOrder:
        """The induced order on ``keep``: each vertex hangs off its nearest kept ancestor."""
        keep = set(keep)
        parent = {}
        for v in keep:
            x = self.parent[v]
            while x is not None and x not in keep:
                x = self.parent[x]
            parent[v] = x
        return TreeOrder.from_parents(parent)


def is_tree_embedding(edges: Iterable[tuple[int, int]], t: TreeOrder) -> bool:
    return all(t.comparable(u, v) for u, v in edges)


def validate_tree_embedding(g: Graph, t: TreeOrder, d: int) -> bool:
    """True iff ``t`` is a tree order on V(g) of depth <= d in which every edge is comparable."""
    if set(t.parent) != set(range(g.n)) or set(t.level) != set(t.parent):
        raise ValueError("tree order does not cover exactly the graph's vertices")
    for v, p in t.parent.items():
        if p is None:
            if t.level[v] != 0:
                return False
        elif p not in t.parent or t.level[v] != t.level[p] + 1:
            return False
    return t.depth <= d and is_tree_embedding(g.edges(), t)


# Exact treedepth -------------------------------------------------------------------

class _SubsetTD:
    """Memoised ``td(G[S])`` over bitmask subsets of one graph."""

    def __init__(self, g: Graph):
        self.g = g
        self.nbr = [sum(1 << w for w in g.adj[v]) for v in range(g.n)]
        self.memo: dict[int, tuple[int, int]] = {}
        self.lower: dict[int, int] = {}

    def components(self, mask: int) -> list[int]:
        comps = []
        rest = mask
        while rest:
            low = rest & -rest
            comp = frontier = low
            while frontier:
                b = frontier & -frontier
                frontier ^= b
                new = self.nbr[b.bit_length() - 1] & mask & ~comp
                comp |= new
                frontier |= new
            comps.append(comp)
            rest &= ~comp
        return comps

    def connected_td(self, mask: int) -> tuple[int, int]:
        """``(td, best root)`` of a connected vertex subset."""
        self._bounded(mask, 1 << 30)
        return self.memo[mask]

    def _bounded(self, mask: int, limit: int) -> int:
        """Exact td of a connected subset if it is <= ``limit``, else a lower bound above ``limit``."""
        hit = self.memo.get(mask)
        if hit is not None:
            return hit[0]
        lb = self.lower.get(mask, 1)
        if lb > limit:
            return lb
        size = bin(mask).count("1")
        if size > 2:
            lb = max(lb, self._degeneracy(mask) + 1)
            if lb > limit:
                self.lower[mask] = lb
                return lb
        if size == 1:
            self.memo[mask] = (1, mask.bit_length() - 1)
            return 1
        deg = {v: bin(self.nbr[v] & mask).count("1") for v in _bits(mask)}
        if all(d == size - 1 for d in deg.values()):
            self.memo[mask] = (size, _lowest(mask))
            return size
        best, root = size + 1, -1
        tried: set[int] = set()
        for v in sorted(deg, key=lambda x: (-deg[x], x)):
            if size > 2 and deg[v] == 1:
                # rooting at a leaf is never better than rooting at its neighbor
                continue
            twin_open = self.nbr[v] & mask
            twin_closed = twin_open | (1 << v)
            if twin_open in tried or twin_closed in tried:
                continue
            tried.add(twin_open)
            tried.add(twin_closed)
            cap = min(limit, best - 1) - 1
            sub = mask & ~(1 << v)
            child = 0
            for c in self.components(sub):
                child = max(child, self._bounded(c, cap))
                if child > cap:
                    break
            if child <= cap and 1 + child < best:
                best, root = 1 + child, v
                if best <= max(lb, 2):
                    break
        if best <= limit:
            self.memo[mask] = (best, root)
            return best
        self.lower[mask] = limit + 1
        return limit + 1

    def _degeneracy(self, mask: int) -> int:
        d = 0
        rest = mask
        while rest:
            v = min(_bits(rest), key=lambda x: bin(self.nbr[x] & rest).count("1"))
            d = max(d, bin(self.nbr[v] & rest).count("1"))
            rest &= ~(1 << v)
        return d

    def build(self, mask: int, parent: dict, above: int | None) -> None:
        stack = [(mask, above)]
        while stack:
            m, p = stack.pop()
            for comp in self.components(m):
                _, root = self.connected_td(comp)
                parent[root] = p
                rest = comp & ~(1 << root)
                if rest:
                    stack.append((rest, root))


def _bits(mask: int):
    while mask:
        b = mask & -mask
        yield b.bit_length() - 1
        mask ^= b


def _lowest(mask: int) -> int:
    return (mask & -mask).bit_length() - 1


def treedepth_exact(g: Graph, cap: int = DEFAULT_CAP) -> tuple[int, TreeOrder]:
    """Exact treedepth with a witness embedding of that depth.

    Disconnected graphs take the max over components; ``cap`` bounds each
    component's size.
    """
    comps = g.components()
    for comp in comps:
        if len(comp) > cap:
            raise TreedepthCapError(
                f"component with {len(comp)} vertices exceeds the exact cap of {cap}; "
                "use heuristic_embedding for an upper bound"
            )
    solver = _SubsetTD(g)
    parent: dict[int, int | None] = {}
    depth = 0
    for comp in comps:
        mask = sum(1 << v for v in comp)
        depth = max(depth, solver.connected_td(mask)[0])
        solver.build(mask, parent, None)
    return depth, TreeOrder.from_parents(parent)


def treedepth(g: Graph, cap: int = DEFAULT_CAP) -> int:
    return treedepth_exact(g, cap)[0]


def heuristic_embedding(g: Graph) -> TreeOrder:
    """Tree embedding by repeatedly rooting each component at its max-degree vertex.

    Always valid; its depth is only an upper bound on the treedepth.
    """
    parent: dict[int, int | None] = {}
    stack: list[tuple[list[int], int | None]] = [(list(range(g.n)), None)]
    while stack:
        verts, above = stack.pop()
        inside = set(verts)
        for comp in _components_within(g, verts, inside):
            root = max(comp, key=lambda v: (sum(1 for w in g.adj[v] if w in inside), -v))
            parent[root] = above
            rest = [v for v in comp if v != root]
            if rest:
                stack.append((rest, root))
    return TreeOrder.from_parents(parent)


def _components_within(g: Graph, verts: list[int], inside: set[int]) -> list[list[int]]:
    seen: set[int] = set()
    comps = []
    for s in verts:
        if s in seen:
            continue
        seen.add(s)
        comp, stack = [], [s]
        while stack:
            x = stack.pop()
            comp.append(x)
            for y in g.adj[x]:
                if y in inside and y not in seen:
                    seen.add(y)
                    stack.append(y)
        comps.append(comp)
    return comps


def tree_embedding(g: Graph, cap: int = DEFAULT_CAP) -> TreeOrder:
    """Exact embedding when every component fits under ``cap``, heuristic otherwise."""
    if all(len(c) <= cap for c in g.components()):
        return treedepth_exact(g, cap)[1]
    return heuristic_embedding(g)


# Low-treedepth colorings -------------------------------------------------------------

@dataclass(frozen=True)
class TreedepthColoring:
    """``color[v]`` in ``0..num_colors-1``; claimed valid for color sets of size <= p.

    ``witness`` optionally carries a tree embedding of the whole graph; when
    present the validator first tries its restriction as a depth certificate.
    """

    color: tuple[int, ...]
    p: int
    num_colors: int
    witness: TreeOrder | None = None


def level_coloring(t: TreeOrder, p: int) -> TreedepthColoring:
    """Color every vertex by its level: any ``i`` colors induce depth <= ``i``."""
    n = len(t.parent)
    return TreedepthColoring(tuple(t.level[v] for v in range(n)), p, t.depth, t)


def _subset_depth_ok(g: Graph, verts: list[int], bound: int, witness: TreeOrder | None, cap: int) -> bool:
    if not verts:
        return True
    if witness is not None:
        sub = witness.restrict(verts)
        if sub.depth <= bound and is_tree_embedding(
            ((u, w) for u in verts for w in g.adj[u] if u < w and w in sub.parent), sub
        ):
            return True
    return treedepth_exact(g.subgraph(verts), cap)[0] <= bound


def validate_p_treedepth_coloring(g: Graph, c: TreedepthColoring, cap: int = DEFAULT_CAP) -> bool:
    """Exact check of every color set of size <= p.

    Raises :class:`TreedepthCapError` when an uncertified subset is too large.
    """
    if len(c.color) != g.n or any(not 0 <= x < c.num_colors for x in c.color):
        return False
    w = c.witness
    if (
        w is not None
        and set(w.parent) == set(range(g.n))
        and all(c.color[v] == w.level[v] for v in range(g.n))
        and is_tree_embedding(g.edges(), w)
    ):
        # colors are levels of a valid embedding: any i levels induce depth <= i
        return True
    classes: dict[int, list[int]] = {}
    for v, x in enumerate(c.color):
        classes.setdefault(x, []).append(v)
    used = sorted(classes)
    for i in range(1, min(c.p, len(used)) + 1):
        for S in itertools.combinations(used, i):
            verts = sorted(v for x in S for v in classes[x])
            if not _subset_depth_ok(g, verts, i, c.witness, cap):
                return False
    return True


def _greedy_coloring(g: Graph, p: int, budget: int, rng: random.Random, cap: int) -> list[int] | None:
    order = list(range(g.n))
    rng.shuffle(order)
    color = [-1] * g.n
    for v in order:
        for c in range(budget):
            color[v] = c
            if _local_ok(g, color, v, p, cap):
                break
        else:
            return None
    return color


def _local_ok(g: Graph, color: list[int], v: int, p: int, cap: int) -> bool:
    """Check only the color sets containing ``color[v]``, on the component through ``v``."""
    c = color[v]
    reach: set[int] = {v}
    stack = [v]
    while stack:
        x = stack.pop()
        for y in g.adj[x]:
            if color[y] >= 0 and y not in reach:
                reach.add(y)
                stack.append(y)
    others = sorted({color[x] for x in reach} - {c})
    for extra in range(0, min(p - 1, len(others)) + 1):
        for S in itertools.combinations(others, extra):
            allowed = set(S) | {c}
            comp, stack = {v}, [v]
            while stack:
                x = stack.pop()
                for y in g.adj[x]:
                    if y not in comp and color[y] in allowed:
                        comp.add(y)
                        stack.append(y)
            if len(comp) == 1:
                continue
            if len(comp) > cap:
                return False
            if treedepth_exact(g.subgraph(sorted(comp)), cap)[0] > len(allowed):
                return False
    return True


def p_treedepth_coloring(
    g: Graph,
    p: int,
    color_budget: int,
    restarts: int = 20,
    seed: int = 0,
    cap: int = DEFAULT_CAP,
) -> TreedepthColoring | None:
    """Randomized greedy search for a validated p-treedepth coloring.

    Falls back to coloring by the levels of a tree embedding. Returns None when
    nothing within ``color_budget`` colors validates; that is a search failure,
    not a proof that no such coloring exists.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    rng = random.Random(seed)
    best = None
    for _ in range(restarts):
        col = _greedy_coloring(g, p, color_budget, rng, cap)
        if col is None:
            continue
        used = sorted(set(col))
        relabel = {x: i for i, x in enumerate(used)}
        cand = TreedepthColoring(tuple(relabel[x] for x in col), p, len(used))
        if (best is None or cand.num_colors < best.num_colors) and validate_p_treedepth_coloring(g, cand, cap):
            best = cand
    if best is not None:
        return best
    cand = level_coloring(tree_embedding(g, cap), p)
    if cand.num_colors <= max(color_budget, 0) and validate_p_treedepth_coloring(g, cand, cap):
        return cand
    return None
