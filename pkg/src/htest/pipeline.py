"""Refining a set of pattern copies until blind reconstruction works.

Stages, each returning a subset of its input copies:

* greedy edge-disjoint extraction (maximal packing);
* uniform coloring: every host vertex plays one pattern role;
* restriction to one color set of a low-treedepth coloring;
* uniform layering: every role sits on its own layer of a tree embedding;
* degree-preserving pruning.

Once layered, copies of a connected pattern component can be rebuilt from
pairwise compatible copies of its parallel parts.
"""

from __future__ import annotations

import heapq
import math
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, NamedTuple, Sequence

import numpy as np

from .graph import (
    Copy,
    CopySet,
    Graph,
    degeneracy,
    induced_edge_subgraph,
    is_edge_disjoint,
    is_uniformly_colored,
    iter_copies,
)
from .sparsity import (
    DEFAULT_CAP,
    TreedepthColoring,
    TreeOrder,
    is_tree_embedding,
    level_coloring,
    p_treedepth_coloring,
    tree_embedding,
    validate_p_treedepth_coloring,
)


class PipelineError(RuntimeError):
    """A stage's precondition or size bound failed."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"{stage}: {message}")
        self.stage = stage


class LayeringError(RuntimeError):
    pass


class AssemblyError(ValueError):
    pass


# Extraction and farness certificates ------------------------------------------------

def extract_edge_disjoint_copies(g: Graph, H: Graph) -> CopySet:
    """Greedy maximal set of edge-disjoint copies.

    Equivalent to calling ``find_copy`` again and again while forbidding the
    edges used so far: the enumeration order is fixed and deleting edges
    only removes copies, so resuming it gives the same sequence.
    """
    if H.isolated_vertices():
        raise PipelineError("extract", "pattern has isolated vertices")
    residual = [set(nb) for nb in g.adj]
    found = []
    for image in iter_copies(g, H, live_adj=residual):
        c = Copy(H, image)
        for x, y in c.host_edges():
            residual[x].discard(y)
            residual[y].discard(x)
        found.append(c)
    return CopySet(H, g, tuple(found), edge_disjoint=True)


def certify_eps_far(g: Graph, H: Graph, copies: CopySet, eps: float) -> bool:
    """Sufficient test for eps-farness: each edge-disjoint copy costs one deletion."""
    if not is_edge_disjoint(copies):
        raise ValueError("certificate copies must be edge-disjoint")
    return len(copies) > eps * g.n


# Degree preservation ---------------------------------------------------------------------

def subgraph_degrees(copies: CopySet) -> dict[int, int]:
    """Degree of each vertex of G[copies] (copies must be edge-disjoint)."""
    deg: dict[int, int] = defaultdict(int)
    pdeg = [copies.pattern.degree(a) for a in range(copies.pattern.n)]
    for c in copies:
        for a, x in enumerate(c.image):
            deg[x] += pdeg[a]
    return dict(deg)


def degree_preservation(g: Graph, copies: CopySet) -> tuple[Fraction, Fraction]:
    """``(min vertex degree ratio, vertex-count ratio)`` of G[copies] inside g."""
    deg = subgraph_degrees(copies)
    if not deg:
        return Fraction(1), Fraction(0)
    worst = min(Fraction(d, g.degree(v)) for v, d in deg.items())
    return worst, Fraction(len(deg), g.n)


def is_c_degree_preserving(g: Graph, copies: CopySet, c) -> bool:
    worst, size = degree_preservation(g, copies)
    c = Fraction(c)
    return worst >= c and size >= c


def degree_preserving_prune(g: Graph, copies: CopySet, alpha, d: int) -> CopySet:
    """Drop copies through poorly preserved vertices until none is left.

    While some vertex of G[copies] keeps less than ``alpha/4d`` of its degree
    in g, take the smallest such vertex and delete every copy through it.
    """
    H = copies.pattern
    alpha = Fraction(alpha)
    if H.m < 1:
        raise PipelineError("prune", "pattern needs at least one edge")
    if not is_edge_disjoint(copies):
        raise PipelineError("prune", "copies are not edge-disjoint")
    if d < 1 or d < degeneracy(g)[0]:
        raise PipelineError("prune", f"d={d} is not an upper bound on the degeneracy")
    if len(copies) < alpha * g.n:
        raise PipelineError("prune", f"|copies|={len(copies)} < alpha*|G|={float(alpha * g.n)}")
    c = alpha / (4 * d)
    pdeg = [H.degree(a) for a in range(H.n)]
    through: dict[int, list[int]] = defaultdict(list)
    deg: dict[int, int] = defaultdict(int)
    for i, cp in enumerate(copies):
        for a, x in enumerate(cp.image):
            through[x].append(i)
            deg[x] += pdeg[a]

    def failing(x):
        return deg[x] > 0 and deg[x] < c * g.degree(x)

    alive = [True] * len(copies)
    heap = [x for x in deg if failing(x)]
    heapq.heapify(heap)
    while heap:
        x = heapq.heappop(heap)
        if not failing(x):
            continue
        for i in through[x]:
            if not alive[i]:
                continue
            alive[i] = False
            for a, y in enumerate(copies.copies[i].image):
                deg[y] -= pdeg[a]
                if failing(y):
                    heapq.heappush(heap, y)
    out = copies.subset([i for i in range(len(copies)) if alive[i]])
    kept = subgraph_degrees(out)
    for v, dv in kept.items():
        if dv < c * g.degree(v):
            raise PipelineError("prune", f"vertex {v} is not {c}-degree preserved")
    if len(out) < alpha * g.n / 2:
        raise PipelineError("prune", f"|H'|={len(out)} < alpha|G|/2={float(alpha * g.n / 2)}")
    if len(kept) < alpha * g.n / (4 * d):
        raise PipelineError("prune", f"|G[H']|={len(kept)} < alpha|G|/4d={float(alpha * g.n / (4 * d))}")
    return out


# Uniform coloring ------------------------------------------------------------------------

def _greedy_role_map(copies: CopySet) -> np.ndarray:
    """Keep copies one by one while they agree with the roles fixed so far."""
    verts = copies.vertices()
    index = {x: i for i, x in enumerate(verts)}
    f = np.full(len(verts), -1, dtype=np.int64)
    for c in copies:
        idx = [index[x] for x in c.image]
        if all(f[j] in (-1, a) for a, j in enumerate(idx)):
            for a, j in enumerate(idx):
                f[j] = a
    f[f < 0] = 0
    return f


def uniform_coloring_extract(g: Graph, copies: CopySet, trials: int = 10**6, seed: int = 0) -> CopySet:
    """Largest compatible subset found for random role maps ``f: V(G[H]) -> V(H)``.

    A copy ``h`` is kept under ``f`` when ``f(h(a)) == a`` for every pattern
    vertex ``a``. The expected number kept is ``N/|H|^|H|``, so some map
    reaches that; the search stops as soon as one does. The greedy role map
    is tried before the random ones.
    """
    N, k = len(copies), copies.pattern.n
    if N < 1:
        raise PipelineError("uniform-coloring", "need at least one copy")
    if not is_edge_disjoint(copies):
        raise PipelineError("uniform-coloring", "copies are not edge-disjoint")
    bound = math.ceil(Fraction(N, k**k))
    verts = copies.vertices()
    index = {x: i for i, x in enumerate(verts)}
    img = np.array([[index[x] for x in c.image] for c in copies], dtype=np.int64)
    roles = np.arange(k)

    f = _greedy_role_map(copies)
    best = (f[img] == roles).all(axis=1)
    rng = np.random.default_rng(seed)
    batch = max(1, min(4096, 4_000_000 // max(1, N * k)))
    done = 0
    while best.sum() < bound and done < trials:
        b = min(batch, trials - done)
        fs = rng.integers(0, k, size=(b, len(verts)))
        kept = (fs[:, img] == roles).all(axis=2)
        counts = kept.sum(axis=1)
        j = int(np.argmax(counts))
        if counts[j] > best.sum():
            best = kept[j]
        done += b
    if best.sum() < bound:
        raise PipelineError(
            "uniform-coloring", f"best compatible set has {int(best.sum())} < {bound} copies after {done} trials"
        )
    out = copies.subset(np.flatnonzero(best).tolist(), uniformly_colored=True)
    if not is_uniformly_colored(out):
        raise PipelineError("uniform-coloring", "output is not uniformly colored")
    return out


# Low-treedepth color restriction -------------------------------------------------------------

def color_buckets(copies: CopySet, coloring: TreedepthColoring, mapping: Sequence[int]) -> dict[tuple[int, ...], list[int]]:
    """Copy indices grouped by the (sorted) set of colors their image uses."""
    index = {x: i for i, x in enumerate(mapping)}
    buckets: dict[tuple[int, ...], list[int]] = defaultdict(list)
    for i, c in enumerate(copies):
        key = tuple(sorted({coloring.color[index[x]] for x in c.image}))
        buckets[key].append(i)
    return dict(buckets)


def _largest_bucket(buckets: dict) -> tuple:
    return min(buckets, key=lambda key: (-len(buckets[key]), key))


def restrict_by_color_tuple(g: Graph, copies: CopySet, coloring: TreedepthColoring, cap: int = DEFAULT_CAP) -> CopySet:
    """Keep the copies using the most popular color set.

    ``coloring`` colors G[copies] in the local labelling of
    :func:`induced_edge_subgraph`, and must validate with ``p >= |H|``.
    """
    sub, mapping = induced_edge_subgraph(g, copies)
    if coloring.p < copies.pattern.n or not validate_p_treedepth_coloring(sub, coloring, cap):
        raise PipelineError("color-restrict", "coloring is not a valid |H|-treedepth coloring of G[H]")
    buckets = color_buckets(copies, coloring, mapping)
    if not buckets:
        return copies
    key = _largest_bucket(buckets)
    out = copies.subset(buckets[key])
    if len(out) * coloring.num_colors ** copies.pattern.n < len(copies):
        raise PipelineError("color-restrict", "pigeonhole bound violated")
    return out


# Uniform layering ------------------------------------------------------------------------------

@dataclass(frozen=True)
class LayeredCopies:
    """Uniformly colored edge-disjoint copies with a tree embedding of G[copies].

    ``layer`` refines tree levels so that each pattern vertex owns exactly one
    layer: ``color_of_level[i]`` is the pattern vertex whose images form layer
    ``i``. Layers strictly increase from parent to child.
    """

    copies: CopySet
    embedding: TreeOrder
    layer: dict[int, int] = field(repr=False)
    color_of_level: tuple[int, ...]

    @property
    def ordering(self) -> tuple[int, ...]:
        """Pattern vertices sorted by layer."""
        return self.color_of_level

    def validate(self) -> None:
        H = self.copies.pattern
        verts = set(self.copies.vertices())
        if set(self.embedding.parent) != verts:
            raise LayeringError("embedding does not cover exactly V(G[H])")
        if not is_uniformly_colored(self.copies) or not is_edge_disjoint(self.copies):
            raise LayeringError("copies are not uniformly colored and edge-disjoint")
        if not is_tree_embedding(self.copies.edges(), self.embedding):
            raise LayeringError("an edge of G[H] is not comparable")
        if self.embedding.depth > H.n:
            raise LayeringError(f"embedding depth {self.embedding.depth} exceeds |H|={H.n}")
        if sorted(self.color_of_level) != list(range(H.n)):
            raise LayeringError("color_of_level is not a permutation of V(H)")
        pos = {a: i for i, a in enumerate(self.color_of_level)}
        for c in self.copies:
            for a, x in enumerate(c.image):
                if self.layer[x] != pos[a]:
                    raise LayeringError(f"vertex {x} of color {a} is not on layer {pos[a]}")
        for v, p in self.embedding.parent.items():
            if p is not None and self.layer[p] >= self.layer[v]:
                raise LayeringError(f"layer does not increase from {p} to {v}")

    def restrict_to(self, kept: CopySet) -> LayeredCopies:
        """Layering survives dropping copies."""
        verts = kept.vertices()
        return LayeredCopies(
            kept, self.embedding.restrict(verts), {x: self.layer[x] for x in verts}, self.color_of_level
        )


def level_tuples(copies: CopySet, embedding: TreeOrder) -> dict[tuple[int, ...], list[int]]:
    buckets: dict[tuple[int, ...], list[int]] = defaultdict(list)
    for i, c in enumerate(copies):
        buckets[tuple(embedding.level[x] for x in c.image)].append(i)
    return dict(buckets)


def uniformly_layered_extract(g: Graph, copies: CopySet, embedding: TreeOrder) -> LayeredCopies:
    """Keep the copies whose roles sit on the most popular tuple of levels.

    Roles that share a level are split into sub-levels ordered by pattern
    vertex id; the result has exactly ``|H|`` layers.
    """
    H = copies.pattern
    if not copies.copies:
        raise PipelineError("layering", "no copies")
    if not is_uniformly_colored(copies):
        raise PipelineError("layering", "copies are not uniformly colored")
    if not all(x in embedding.parent for x in copies.vertices()) or not is_tree_embedding(copies.edges(), embedding):
        raise PipelineError("layering", "embedding is not a tree embedding of G[H]")
    buckets = level_tuples(copies, embedding)
    key = _largest_bucket(buckets)
    kept = copies.subset(buckets[key], uniformly_colored=True)
    if len(kept) * max(embedding.depth, 1) ** H.n < len(copies):
        raise PipelineError("layering", "pigeonhole bound violated")
    order = tuple(sorted(range(H.n), key=lambda a: (key[a], a)))
    pos = {a: i for i, a in enumerate(order)}
    layer = {}
    for c in kept:
        for a, x in enumerate(c.image):
            layer[x] = pos[a]
    verts = kept.vertices()
    out = LayeredCopies(kept, embedding.restrict(verts), layer, order)
    out.validate()
    return out


# Sources, parallel parts, and reconstruction ----------------------------------------------------

@dataclass(frozen=True)
class Decomposition:
    pattern: Graph = field(repr=False)
    ordering: tuple[int, ...]
    sources: frozenset[int]
    parts: tuple[frozenset[int], ...]
    part_sources: tuple[frozenset[int], ...]
    part_component: tuple[int, ...]

    def component_parts(self, part: int) -> list[int]:
        return [i for i, c in enumerate(self.part_component) if c == self.part_component[part]]


def decompose_sources_parts(H: Graph, ordering: Sequence[int]) -> Decomposition:
    """Sources have no earlier neighbor in ``ordering``; parts are the components of H minus sources."""
    if sorted(ordering) != list(range(H.n)):
        raise ValueError("ordering must be a permutation of V(H)")
    pos = {a: i for i, a in enumerate(ordering)}
    sources = frozenset(a for a in range(H.n) if all(pos[b] > pos[a] for b in H.adj[a]))
    inner = [a for a in range(H.n) if a not in sources]
    rest = H.subgraph(inner)
    parts = [frozenset(inner[i] for i in comp) for comp in rest.components()]
    parts.sort(key=lambda P: min(pos[a] for a in P))
    comp_of = {}
    for ci, comp in enumerate(H.components()):
        for a in comp:
            comp_of[a] = ci
    part_sources = tuple(frozenset(s for a in P for s in H.adj[a] if s in sources) for P in parts)
    return Decomposition(
        H, tuple(ordering), sources, tuple(parts), part_sources, tuple(comp_of[min(P)] for P in parts)
    )


class PartCopy(NamedTuple):
    """The image of parallel part ``part`` under copy number ``copy``."""

    part: int
    copy: int


class _Builder:
    def __init__(self, layered: LayeredCopies, decomp: Decomposition):
        self.layered = layered
        self.decomp = decomp
        self.images = [c.image for c in layered.copies]
        self.holders: dict[tuple[int, int], list[int]] = defaultdict(list)
        for i, im in enumerate(self.images):
            for s in decomp.sources:
                self.holders[(s, im[s])].append(i)

    def source_images(self, found: Sequence[PartCopy]) -> dict[int, int]:
        img: dict[int, int] = {}
        for pc in found:
            for s in self.decomp.part_sources[pc.part]:
                x = self.images[pc.copy][s]
                if img.setdefault(s, x) != x:
                    raise LayeringError(f"parts disagree on source {s}: {img[s]} vs {x}")
        return img

    def options(self, found: Sequence[PartCopy], todo: set[int]) -> list[list[PartCopy]]:
        """Candidate part copies, grouped by port, ports listed deepest layer first."""
        img = self.source_images(found)
        ports = [s for s in img if any(s in self.decomp.part_sources[q] for q in todo)]
        if not ports:
            raise LayeringError("no port leads to a missing part")
        layer = self.layered.layer
        top = max(layer[img[s]] for s in ports)
        groups = []
        for s in sorted((s for s in ports if layer[img[s]] == top), key=lambda s: img[s]):
            cands = sorted(
                PartCopy(q, c)
                for q in todo
                if s in self.decomp.part_sources[q]
                for c in self.holders[(s, img[s])]
            )
            cands.sort(key=lambda pc: (pc.copy, pc.part))
            if not cands:
                raise LayeringError("layering invariant violated: port without a part copy")
            groups.append(cands)
        return groups


def construct_component_copy(layered: LayeredCopies, decomp: Decomposition, seed_part: PartCopy) -> list[PartCopy]:
    """Grow pairwise compatible part copies from ``seed_part`` through deepest ports.

    Ties go to the port with the smallest host vertex, then to the candidate
    from the smallest-index copy.
    """
    b = _Builder(layered, decomp)
    found = [seed_part]
    todo = set(decomp.component_parts(seed_part.part)) - {seed_part.part}
    while todo:
        pick = b.options(found, todo)[0][0]
        found.append(pick)
        todo.discard(pick.part)
    b.source_images(found)
    return found


def iter_component_constructions(layered: LayeredCopies, decomp: Decomposition, seed_part: PartCopy) -> Iterator[list[PartCopy]]:
    """Every run of the construction, over all tie-break choices."""
    b = _Builder(layered, decomp)

    def grow(found, todo):
        if not todo:
            b.source_images(found)
            yield list(found)
            return
        for group in b.options(found, todo):
            for pick in group:
                found.append(pick)
                yield from grow(found, todo - {pick.part})
                found.pop()

    yield from grow([seed_part], frozenset(decomp.component_parts(seed_part.part)) - {seed_part.part})


def assemble_copy(parts: Sequence[PartCopy], decomp: Decomposition, layered: LayeredCopies) -> Copy:
    """Union of the part images and their sources, as a copy of the part's component.

    The component is relabelled in increasing vertex order.
    """
    H = decomp.pattern
    if not parts:
        raise AssemblyError("no parts given")
    comp_id = decomp.part_component[parts[0].part]
    expected = set(decomp.component_parts(parts[0].part))
    got = [pc.part for pc in parts]
    if sorted(got) != sorted(expected):
        raise AssemblyError(f"need one copy of each part {sorted(expected)}, got {got}")
    mapping: dict[int, int] = {}
    for pc in parts:
        im = layered.copies.copies[pc.copy].image
        for a in decomp.parts[pc.part] | decomp.part_sources[pc.part]:
            if mapping.setdefault(a, im[a]) != im[a]:
                raise AssemblyError(f"incompatible parts: source {a} maps to {mapping[a]} and {im[a]}")
    comp = H.components()[comp_id]
    if set(mapping) != set(comp):
        raise AssemblyError("assembled map does not cover the component")
    c = Copy(H.subgraph(comp), tuple(mapping[a] for a in comp))
    c.validate(layered.copies.host)
    return c


# Composition ----------------------------------------------------------------------------------

@dataclass
class StageReport:
    name: str
    size_in: int
    size_out: int
    bound: float | None
    ok: bool

    def as_dict(self) -> dict:
        return {"stage": self.name, "size_in": self.size_in, "size_out": self.size_out, "bound": self.bound, "ok": self.ok}


@dataclass
class PipelineReport:
    variant: str
    stages: list[StageReport]
    copies: CopySet
    layered: LayeredCopies | None = None
    preservation: float | None = None

    def as_dict(self) -> dict:
        out = {
            "variant": self.variant,
            "stages": [s.as_dict() for s in self.stages],
            "final_copies": len(self.copies),
            "degree_preservation": self.preservation,
        }
        if self.layered is not None:
            out["layer_order"] = list(self.layered.color_of_level)
            out["depth"] = self.layered.embedding.depth
        return out


def _stage(report: list, name: str, before: int, after: int, bound, strict: bool = False) -> None:
    ok = after > bound if strict else after >= bound
    report.append(StageReport(name, before, after, float(bound), ok))
    if not ok:
        raise PipelineError(name, f"kept {after} copies, bound {float(bound)}")


def run_pipeline(
    g: Graph,
    H: Graph,
    eps: float,
    variant: str = "treedepth",
    trials: int = 10**6,
    seed: int = 0,
    cap: int = DEFAULT_CAP,
) -> PipelineReport:
    """Apply the stages in order, checking each size bound.

    ``variant="treedepth"``: extract, uniform coloring, layering, pruning.
    ``variant="expansion"``: extract, color restriction, pruning.
    """
    if variant not in ("treedepth", "expansion"):
        raise ValueError(f"unknown pipeline variant {variant!r}")
    core, _ = H.without_isolated()
    stages: list[StageReport] = []
    h1 = extract_edge_disjoint_copies(g, core)
    if not certify_eps_far(g, core, h1, eps):
        raise PipelineError("extract", f"{len(h1)} edge-disjoint copies do not certify eps={eps} on |G|={g.n}")
    _stage(stages, "extract", 0, len(h1), Fraction(eps).limit_denominator(10**9) * g.n / core.m)

    layered = None
    if variant == "treedepth":
        h2 = uniform_coloring_extract(g, h1, trials=trials, seed=seed)
        _stage(stages, "uniform-coloring", len(h1), len(h2), math.ceil(Fraction(len(h1), core.n**core.n)))
        sub, mapping = induced_edge_subgraph(g, h2)
        local = tree_embedding(sub, cap)
        emb = TreeOrder.from_parents(
            {mapping[v]: (None if p is None else mapping[p]) for v, p in local.parent.items()}
        )
        lay = uniformly_layered_extract(g, h2, emb)
        _stage(stages, "layering", len(h2), len(lay.copies), Fraction(len(h2), max(emb.depth, 1) ** core.n))
        h3 = lay.copies
    else:
        sub, mapping = induced_edge_subgraph(g, h1)
        coloring = p_treedepth_coloring(sub, core.n, color_budget=2 * core.n, restarts=3, seed=seed, cap=cap)
        if coloring is None:
            coloring = level_coloring(tree_embedding(sub, cap), core.n)
        h3 = restrict_by_color_tuple(g, h1, coloring, cap)
        _stage(stages, "color-restrict", len(h1), len(h3), Fraction(len(h1), coloring.num_colors**core.n))

    d = max(degeneracy(g)[0], 1)
    alpha = Fraction(len(h3), g.n)
    h4 = degree_preserving_prune(g, h3, alpha, d)
    _stage(stages, "prune", len(h3), len(h4), alpha * g.n / 2)
    if variant == "treedepth":
        layered = lay.restrict_to(h4)
        layered.validate()
    worst, size = degree_preservation(g, h4)
    return PipelineReport(variant, stages, h4, layered, float(min(worst, size)))


def reduce_to_layered(g: Graph, H: Graph, eps: float, trials: int = 10**6, seed: int = 0, cap: int = DEFAULT_CAP) -> LayeredCopies:
    return run_pipeline(g, H, eps, "treedepth", trials, seed, cap).layered
