"""Immutable simple graphs, copies of patterns, and subgraph search."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence


class GraphFormatError(ValueError):
    """Raised when a graph file cannot be parsed."""


class CopyError(ValueError):
    """Raised when a vertex map is not a copy of its pattern."""


def edge_key(u: int, v: int) -> tuple[int, int]:
    return (u, v) if u < v else (v, u)


class Graph:
    """Simple undirected graph on vertices ``0..n-1``.

    Instances are immutable; every neighbor list is a strictly increasing tuple.
    """

    __slots__ = ("n", "adj", "_nbr_sets", "_m")

    def __init__(self, n: int, edges: Iterable[tuple[int, int]] = ()):
        if n < 0:
            raise ValueError("vertex count must be nonnegative")
        nbrs: list[set[int]] = [set() for _ in range(n)]
        for u, v in edges:
            if not (0 <= u < n and 0 <= v < n):
                raise ValueError(f"edge ({u}, {v}) out of range for n={n}")
            if u == v:
                raise ValueError(f"self-loop at vertex {u}")
            nbrs[u].add(v)
            nbrs[v].add(u)
        self.n = n
        self.adj: tuple[tuple[int, ...], ...] = tuple(tuple(sorted(s)) for s in nbrs)
        self._nbr_sets = tuple(frozenset(s) for s in nbrs)
        self._m = sum(len(s) for s in nbrs) // 2

    def __len__(self) -> int:
        return self.n

    def __repr__(self) -> str:
        return f"Graph(n={self.n}, m={self.m})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        return self.n == other.n and self.adj == other.adj

    def __hash__(self) -> int:
        return hash((self.n, self.adj))

    @property
    def m(self) -> int:
        return self._m

    def degree(self, v: int) -> int:
        return len(self.adj[v])

    def neighbors(self, v: int) -> tuple[int, ...]:
        return self.adj[v]

    def has_edge(self, u: int, v: int) -> bool:
        return v in self._nbr_sets[u]

    def edges(self) -> list[tuple[int, int]]:
        return [(u, v) for u in range(self.n) for v in self.adj[u] if u < v]

    def max_degree(self) -> int:
        return max((len(a) for a in self.adj), default=0)

    def isolated_vertices(self) -> list[int]:
        return [v for v in range(self.n) if not self.adj[v]]

    def components(self) -> list[list[int]]:
        """Connected components, each sorted, ordered by smallest vertex."""
        seen = [False] * self.n
        comps = []
        for s in range(self.n):
            if seen[s]:
                continue
            seen[s] = True
            stack, comp = [s], []
            while stack:
                x = stack.pop()
                comp.append(x)
                for y in self.adj[x]:
                    if not seen[y]:
                        seen[y] = True
                        stack.append(y)
            comps.append(sorted(comp))
        return comps

    def subgraph(self, vertices: Sequence[int]) -> Graph:
        """Induced subgraph, relabelled so that ``vertices[i]`` becomes ``i``."""
        index = {v: i for i, v in enumerate(vertices)}
        edges = [
            (index[u], index[w])
            for u in vertices
            for w in self.adj[u]
            if w in index and u < w
        ]
        return Graph(len(vertices), edges)

    def without_isolated(self) -> tuple[Graph, list[int]]:
        """Strip isolated vertices; returns the graph and the kept original ids."""
        keep = [v for v in range(self.n) if self.adj[v]]
        return self.subgraph(keep), keep

    def to_text(self, comments: Sequence[str] = ()) -> str:
        lines = [f"# {c}" for c in comments]
        edges = self.edges()
        lines.append(f"{self.n} {len(edges)}")
        lines.extend(f"{u} {v}" for u, v in edges)
        return "\n".join(lines) + "\n"


def load_graph(text: str) -> Graph:
    """Parse the ``n m`` header + edge-line format.

    Blank lines and text after ``#`` are ignored. Duplicate edge lines collapse
    and the header counts distinct edges.
    """
    header = None
    edges = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise GraphFormatError(f"line {lineno}: expected two integers, got {raw!r}")
        try:
            a, b = int(parts[0]), int(parts[1])
        except ValueError:
            raise GraphFormatError(f"line {lineno}: expected two integers, got {raw!r}") from None
        if header is None:
            if a < 0 or b < 0:
                raise GraphFormatError(f"line {lineno}: negative header value")
            header = (a, b, lineno)
            continue
        n = header[0]
        if not (0 <= a < n and 0 <= b < n):
            raise GraphFormatError(f"line {lineno}: vertex index out of range for n={n}")
        if a == b:
            raise GraphFormatError(f"line {lineno}: self-loop at vertex {a}")
        edges.append((a, b))
    if header is None:
        raise GraphFormatError("line 1: missing 'n m' header")
    n, m, lineno = header
    distinct = len({edge_key(a, b) for a, b in edges})
    if distinct != m:
        raise GraphFormatError(f"line {lineno}: header declares {m} edges, found {distinct} distinct")
    return Graph(n, edges)


def read_graph(path) -> Graph:
    with open(path) as fh:
        return load_graph(fh.read())


# Named patterns ---------------------------------------------------------------

def path_graph(k: int) -> Graph:
    return Graph(k, [(i, i + 1) for i in range(k - 1)])


def cycle_graph(k: int) -> Graph:
    return Graph(k, [(i, (i + 1) % k) for i in range(k)])


def complete_graph(k: int) -> Graph:
    return Graph(k, [(i, j) for i in range(k) for j in range(i + 1, k)])


def star_graph(leaves: int) -> Graph:
    return Graph(leaves + 1, [(0, i) for i in range(1, leaves + 1)])


def disjoint_union(*graphs: Graph) -> Graph:
    edges, offset = [], 0
    for g in graphs:
        edges.extend((u + offset, v + offset) for u, v in g.edges())
        offset += g.n
    return Graph(offset, edges)


BUILTIN_PATTERNS = {
    "triangle": lambda: complete_graph(3),
    "p5": lambda: path_graph(5),
    "c4": lambda: cycle_graph(4),
    "k4": lambda: complete_graph(4),
}


# Copies -------------------------------------------------------------------------

@dataclass(frozen=True)
class Copy:
    """An injective, edge-preserving map ``pattern -> host``; ``image[a]`` is the host vertex of ``a``."""

    pattern: Graph = field(repr=False)
    image: tuple[int, ...]

    def host_edges(self) -> list[tuple[int, int]]:
        return [edge_key(self.image[a], self.image[b]) for a, b in self.pattern.edges()]

    def vertices(self) -> tuple[int, ...]:
        return self.image

    def validate(self, host: Graph) -> None:
        validate_copy(host, self.pattern, self.image)


def validate_copy(host: Graph, pattern: Graph, image: Sequence[int]) -> None:
    """Raise :class:`CopyError` unless ``image`` is a copy of ``pattern`` in ``host``."""
    if len(image) != pattern.n:
        raise CopyError(f"image has {len(image)} entries for a pattern on {pattern.n} vertices")
    if len(set(image)) != len(image):
        raise CopyError("image is not injective")
    for x in image:
        if not 0 <= x < host.n:
            raise CopyError(f"host vertex {x} out of range")
    for a, b in pattern.edges():
        if not host.has_edge(image[a], image[b]):
            raise CopyError(f"pattern edge ({a}, {b}) maps to non-edge ({image[a]}, {image[b]})")


def is_copy(host: Graph, pattern: Graph, image: Sequence[int]) -> bool:
    try:
        validate_copy(host, pattern, image)
    except CopyError:
        return False
    return True


@dataclass(frozen=True)
class CopySet:
    """Copies of one pattern in one host, with structural flags."""

    pattern: Graph = field(repr=False)
    host: Graph = field(repr=False)
    copies: tuple[Copy, ...]
    edge_disjoint: bool = False
    uniformly_colored: bool = False

    def __len__(self) -> int:
        return len(self.copies)

    def __iter__(self) -> Iterator[Copy]:
        return iter(self.copies)

    def subset(self, indices: Iterable[int], **flags) -> CopySet:
        kept = tuple(self.copies[i] for i in indices)
        opts = {"edge_disjoint": self.edge_disjoint, "uniformly_colored": self.uniformly_colored}
        opts.update(flags)
        return CopySet(self.pattern, self.host, kept, **opts)

    def vertices(self) -> list[int]:
        return sorted({x for c in self.copies for x in c.image})

    def edges(self) -> list[tuple[int, int]]:
        return sorted({e for c in self.copies for e in c.host_edges()})

    def validate(self) -> None:
        """Check every copy and every flagged property."""
        for c in self.copies:
            if c.pattern != self.pattern:
                raise CopyError("copy of a different pattern in copy set")
            c.validate(self.host)
        if self.edge_disjoint and not is_edge_disjoint(self.copies):
            raise CopyError("copies flagged edge-disjoint share an edge")
        if self.uniformly_colored and not is_uniformly_colored(self.copies):
            raise CopyError("copies flagged uniformly colored disagree on a role")


def is_edge_disjoint(copies: Iterable[Copy]) -> bool:
    used: set[tuple[int, int]] = set()
    for c in copies:
        for e in c.host_edges():
            if e in used:
                return False
            used.add(e)
    return True


def role_conflicts(copies: Iterable[Copy]) -> list[tuple[int, int, int]]:
    """Host vertices playing two pattern roles, as ``(vertex, role, other_role)``."""
    role: dict[int, int] = {}
    bad = []
    for c in copies:
        for a, x in enumerate(c.image):
            r = role.setdefault(x, a)
            if r != a:
                bad.append((x, r, a))
    return bad


def is_uniformly_colored(copies: Iterable[Copy]) -> bool:
    return not role_conflicts(copies)


def induced_edge_subgraph(g: Graph, copies: CopySet) -> tuple[Graph, list[int]]:
    """The graph G[copies]: used vertices and edges only, relabelled.

    Returns the graph and ``mapping`` with ``mapping[local] == host vertex``.
    """
    mapping = copies.vertices()
    index = {x: i for i, x in enumerate(mapping)}
    edges = [(index[u], index[v]) for u, v in copies.edges()]
    return Graph(len(mapping), edges), mapping


# Degeneracy -----------------------------------------------------------------------

def degeneracy(g: Graph) -> tuple[int, list[int]]:
    """Min-degree peeling. Each vertex has at most ``d`` neighbors later in ``ordering``."""
    n = g.n
    deg = [g.degree(v) for v in range(n)]
    maxdeg = max(deg, default=0)
    buckets: list[set[int]] = [set() for _ in range(maxdeg + 1)]
    for v in range(n):
        buckets[deg[v]].add(v)
    removed = [False] * n
    ordering = []
    d = 0
    low = 0
    for _ in range(n):
        while not buckets[low]:
            low += 1
        v = min(buckets[low])
        buckets[low].remove(v)
        removed[v] = True
        ordering.append(v)
        d = max(d, low)
        for w in g.adj[v]:
            if not removed[w]:
                buckets[deg[w]].remove(w)
                deg[w] -= 1
                buckets[deg[w]].add(w)
        low = max(low - 1, 0)
    return d, ordering


# Subgraph search --------------------------------------------------------------------

def _search_order(pattern: Graph) -> list[int]:
    """Pattern vertices ordered so each one after a component root has an earlier neighbor."""
    order: list[int] = []
    placed = [False] * pattern.n
    for _ in range(pattern.n):
        best, key = -1, None
        for a in range(pattern.n):
            if placed[a]:
                continue
            links = sum(1 for b in pattern.adj[a] if placed[b])
            k = (links, pattern.degree(a), -a)
            if key is None or k > key:
                best, key = a, k
        placed[best] = True
        order.append(best)
    return order


def iter_copies(
    host: Graph,
    pattern: Graph,
    forbidden: set | frozenset = frozenset(),
    live_adj: list[set[int]] | None = None,
) -> Iterator[tuple[int, ...]]:
    """Enumerate copies avoiding ``forbidden`` edges, in deterministic order.

    Candidates for each pattern vertex are tried in ascending host-id order.
    ``forbidden`` is read live: callers may grow it between yields, and every
    yielded image avoids the set as it stands at that moment. ``live_adj``,
    when given, replaces the host adjacency and may likewise lose edges
    between yields; this is much faster than a growing ``forbidden`` set.
    """
    k = pattern.n
    if k == 0:
        yield ()
        return
    order = _search_order(pattern)
    back = []
    for i, a in enumerate(order):
        earlier = set(order[:i])
        back.append([b for b in pattern.adj[a] if b in earlier])
    pdeg = [pattern.degree(a) for a in order]
    pedges = pattern.edges()
    adj = live_adj if live_adj is not None else host._nbr_sets
    image = [-1] * k
    used: set[int] = set()

    def ok_edge(x, y):
        return y in adj[x] and (not forbidden or edge_key(x, y) not in forbidden)

    def still_ok(i):
        # edges may vanish while a copy is being yielded; drop dead partial maps
        return all(ok_edge(image[order[j]], image[b]) for j in range(1, i) for b in back[j])

    def extend(i):
        if i == k:
            if all(ok_edge(image[a], image[b]) for a, b in pedges):
                yield tuple(image)
            return
        a = order[i]
        nb = back[i]
        if nb:
            cands = sorted(adj[image[nb[0]]])
        else:
            cands = range(host.n)
        need = pdeg[i]
        for x in cands:
            if x in used or len(adj[x]) < need:
                continue
            if all(ok_edge(x, image[b]) for b in nb):
                image[a] = x
                used.add(x)
                yield from extend(i + 1)
                used.discard(x)
                image[a] = -1
                if not still_ok(i):
                    return

    yield from extend(0)


def find_copy(host: Graph, pattern: Graph, forbidden: Iterable[tuple[int, int]] = ()) -> Copy | None:
    """First copy of ``pattern`` in ``host`` avoiding ``forbidden`` edges, or None.

    The pattern must have no isolated vertices.
    """
    if pattern.isolated_vertices():
        raise ValueError("pattern has isolated vertices; strip them first")
    forb = frozenset(edge_key(u, v) for u, v in forbidden)
    for image in iter_copies(host, pattern, forb):
        return Copy(pattern, image)
    return None


def embed_with_isolated(host_n: int, pattern: Graph, core_image: dict[int, int]) -> tuple[int, ...] | None:
    """Extend a map on non-isolated pattern vertices by sending isolated ones to unused host vertices."""
    if host_n < pattern.n:
        return None
    used = set(core_image.values())
    spare = (x for x in range(host_n) if x not in used)
    image = []
    for a in range(pattern.n):
        if a in core_image:
            image.append(core_image[a])
        else:
            image.append(next(spare))
    return tuple(image)


def contains_copy(host: Graph, pattern: Graph) -> bool:
    if host.n < pattern.n:
        return False
    core, _ = pattern.without_isolated()
    if core.n == 0:
        return True
    return find_copy(host, core) is not None


def find_full_copy(host: Graph, pattern: Graph) -> Copy | None:
    """Like :func:`find_copy` but allows isolated pattern vertices."""
    if host.n < pattern.n:
        return None
    core, keep = pattern.without_isolated()
    core_image: dict[int, int] = {}
    if core.n:
        c = find_copy(host, core)
        if c is None:
            return None
        core_image = {keep[i]: x for i, x in enumerate(c.image)}
    image = embed_with_isolated(host.n, pattern, core_image)
    return Copy(pattern, image)
