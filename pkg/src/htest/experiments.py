"""Instance generators, Monte-Carlo harness and exact BFS probability checks."""

from __future__ import annotations

import itertools
import math
import random
import time
from collections import Counter, defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from statsmodels.stats.proportion import proportion_confint

from .graph import (
    Copy,
    CopySet,
    Graph,
    complete_graph,
    contains_copy,
    disjoint_union,
    edge_key,
    find_copy,
    induced_edge_subgraph,
    path_graph,
)
from .oracle import Oracle, derive_seed
from .pipeline import LayeredCopies, certify_eps_far, decompose_sources_parts, is_c_degree_preserving
from .tester import random_bounded_bfs, test_h_freeness, tester_parameters

CI_ALPHA = 0.01


class GenerationError(RuntimeError):
    pass


@dataclass
class Instance:
    graph: Graph
    pattern: Graph
    eps: float
    certificate: CopySet | None = None
    certified_by: str | None = None  # "copies" or "brute-force"
    generator: str = "custom"
    params: dict = field(default_factory=dict)

    @property
    def max_certified_eps(self) -> float:
        """Certificates hold for every eps strictly below this value."""
        if self.certificate is None or self.graph.n == 0:
            return 0.0
        return len(self.certificate) / self.graph.n

    def certified(self) -> bool:
        if self.certified_by == "brute-force":
            return True
        if self.certificate is None:
            return False
        return certify_eps_far(self.graph, self.pattern, self.certificate, self.eps)

    def as_dict(self) -> dict:
        return {
            "generator": self.generator,
            "params": self.params,
            "n": self.graph.n,
            "m": self.graph.m,
            "eps": self.eps,
            "certified": self.certified(),
        }

    def to_text(self) -> str:
        """Graph file with the certificate as comment lines."""
        notes = [f"generator {self.generator} {self.params}", f"eps {self.eps}"]
        if self.certificate is not None:
            notes.append(f"certificate {len(self.certificate)} edge-disjoint copies")
            notes += ["copy " + " ".join(map(str, c.image)) for c in self.certificate]
        return self.graph.to_text(notes)


def _with_certificate(g: Graph, H: Graph, copies: list[Copy], generator: str, params: dict) -> Instance:
    cert = CopySet(H, g, tuple(copies), edge_disjoint=True)
    eps = len(copies) / (2 * g.n) if copies else 0.0
    return Instance(g, H, eps, cert, "copies" if copies else None, generator, params)


def gen_p5_family(k: int) -> Instance:
    """Hubs u=0, v=1, w=2; a_i = 3+i joins u and v, b_i = 3+k+i joins v and w."""
    if k < 1:
        raise ValueError("k must be >= 1")
    edges = []
    copies = []
    P5 = path_graph(5)
    for i in range(k):
        a, b = 3 + i, 3 + k + i
        edges += [(0, a), (a, 1), (1, b), (b, 2)]
        copies.append(Copy(P5, (0, a, 1, b, 2)))
    return _with_certificate(Graph(3 + 2 * k, edges), P5, copies, "p5", {"k": k})


def gen_planted_union(H: Graph, m: int, pad: int | Graph = 0) -> Instance:
    """``m`` vertex-disjoint copies of ``H`` followed by padding (a path of ``pad`` vertices)."""
    if m < 1:
        raise ValueError("m must be >= 1")
    extra = pad if isinstance(pad, Graph) else path_graph(pad)
    g = disjoint_union(*([H] * m), extra)
    copies = [Copy(H, tuple(range(i * H.n, (i + 1) * H.n))) for i in range(m)]
    pad_desc = pad if isinstance(pad, int) else f"graph:{pad.n}"
    return _with_certificate(g, H, copies, "planted", {"pattern_n": H.n, "m": m, "pad": pad_desc})


def gen_bounded_degree_planted(
    H: Graph,
    n: int,
    degree_cap: int,
    m: int,
    seed: int = 0,
    extra_edges: int | None = None,
    max_tries: int = 1000,
) -> Instance:
    """Random host of max degree ``degree_cap`` with ``m`` planted edge-disjoint copies.

    Each copy lands on random distinct vertices, resampled until it adds only
    new edges and respects the cap. Then up to ``extra_edges`` (default n/2)
    random edges are added where the cap allows.
    """
    if degree_cap < H.max_degree():
        raise ValueError("degree_cap must be at least the pattern's max degree")
    if n < H.n and m > 0:
        raise ValueError("host too small for the pattern")
    rng = random.Random(seed)
    deg = [0] * n
    edges: set[tuple[int, int]] = set()
    copies = []
    pedges = H.edges()
    for _ in range(m):
        for _ in range(max_tries):
            img = rng.sample(range(n), H.n)
            new = [edge_key(img[a], img[b]) for a, b in pedges]
            if any(e in edges for e in new):
                continue
            if any(deg[img[a]] + H.degree(a) > degree_cap for a in range(H.n)):
                continue
            break
        else:
            raise GenerationError(f"could not plant copy {len(copies) + 1} of {m} after {max_tries} tries")
        for x, y in new:
            deg[x] += 1
            deg[y] += 1
        edges.update(new)
        copies.append(Copy(H, tuple(img)))
    for _ in range(n // 2 if extra_edges is None else extra_edges):
        x, y = rng.randrange(n), rng.randrange(n)
        e = edge_key(x, y)
        if x == y or e in edges or deg[x] >= degree_cap or deg[y] >= degree_cap:
            continue
        edges.add(e)
        deg[x] += 1
        deg[y] += 1
    g = Graph(n, sorted(edges))
    params = {"pattern_n": H.n, "n": n, "degree_cap": degree_cap, "m": m, "seed": seed}
    return _with_certificate(g, H, copies, "bounded", params)


def min_deletions_to_free(g: Graph, H: Graph, limit: int) -> int | None:
    """Fewest edge deletions making ``g`` H-free, if at most ``limit``; else None."""
    edges = g.edges()
    for r in range(limit + 1):
        for drop in itertools.combinations(edges, r):
            gone = set(drop)
            if not contains_copy(Graph(g.n, [e for e in edges if e not in gone]), H):
                return r
    return None


def brute_force_eps_far(g: Graph, H: Graph, eps: float) -> bool:
    """Exact farness for tiny hosts: no set of at most eps*|G| deletions removes every copy."""
    return min_deletions_to_free(g, H, math.floor(eps * g.n)) is None


# Monte-Carlo estimation ----------------------------------------------------------------------

def wilson(successes: int, trials: int, alpha: float = CI_ALPHA) -> tuple[float, float]:
    lo, hi = proportion_confint(successes, trials, alpha=alpha, method="wilson")
    return float(lo), float(hi)


@dataclass
class TrialReport:
    trials: int
    rejections: int
    queries_per_trial: int
    seed_base: int
    wall_time: float
    n_reps: int = 0

    @property
    def rejection_rate(self) -> float:
        return self.rejections / self.trials

    @property
    def interval(self) -> tuple[float, float]:
        return wilson(self.rejections, self.trials)

    def as_dict(self) -> dict:
        lo, hi = self.interval
        return {
            "trials": self.trials,
            "rejections": self.rejections,
            "rejection_rate": self.rejection_rate,
            "ci_low": lo,
            "ci_high": hi,
            "queries_per_trial": self.queries_per_trial,
        }


def _run_trials(g: Graph, H: Graph, eps: float, n_reps: int, seed: int, start: int, stop: int) -> tuple[int, list[int]]:
    rejections = 0
    queries = set()
    for i in range(start, stop):
        oracle = Oracle(g, derive_seed(seed, i))
        v = test_h_freeness(oracle, H, eps, n_reps)
        if v.rejected:
            v.witness.validate(g)
            rejections += 1
        queries.add(oracle.log.neighbor_queries)
    return rejections, sorted(queries)


def _chunks(trials: int, jobs: int) -> list[tuple[int, int]]:
    jobs = max(1, min(jobs, trials))
    step = math.ceil(trials / jobs)
    return [(s, min(s + step, trials)) for s in range(0, trials, step)]


def estimate_rejection(instance: Instance, n_reps: int, trials: int, seed: int = 0, jobs: int = 1) -> TrialReport:
    """Run the tester ``trials`` times; trial ``i`` uses seed ``derive_seed(seed, i)``.

    Results do not depend on ``jobs``: chunks are reduced in trial order.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    t0 = time.perf_counter()
    args = (instance.graph, instance.pattern, instance.eps, n_reps, seed)
    chunks = _chunks(trials, jobs)
    if jobs > 1 and len(chunks) > 1:
        with ProcessPoolExecutor(max_workers=len(chunks)) as pool:
            parts = list(pool.map(_run_trials, *zip(*[args + c for c in chunks])))
    else:
        parts = [_run_trials(*args, *c) for c in chunks]
    rejections = sum(r for r, _ in parts)
    queries = sorted({q for _, qs in parts for q in qs})
    if len(queries) != 1:
        raise AssertionError(f"query count varied across trials: {queries}")
    return TrialReport(trials, rejections, queries[0], seed, time.perf_counter() - t0, n_reps)


def calibrate_reps(
    instance: Instance, target: float = 0.75, trials: int = 1000, seed: int = 0, max_reps: int = 4096, jobs: int = 1
) -> int:
    """Smallest repetition count whose observed rejection rate reaches ``target``.

    Rates over a fixed seed set are monotone in the repetition count (the
    first n repetitions of a trial are the same whatever n is), so binary
    search is exact.
    """
    def rate(n):
        return estimate_rejection(instance, n, trials, seed, jobs).rejection_rate

    hi = 1
    while rate(hi) < target:
        hi *= 2
        if hi > max_reps:
            raise RuntimeError(f"no repetition count up to {max_reps} reaches rate {target}")
    lo = hi // 2  # rate(lo) < target, or lo == 0
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if rate(mid) >= target:
            hi = mid
        else:
            lo = mid
    return hi


def amplified_reps(single: float, target: float = 2 / 3) -> int:
    """Repetitions needed so that independent attempts succeeding with ``single`` reach ``target``."""
    if not 0 < single <= 1:
        raise ValueError("single-attempt probability must lie in (0, 1]")
    if single == 1:
        return 1
    return max(1, math.ceil(math.log(1 - target) / math.log(1 - single)))


GENERATORS = ("p5", "planted", "bounded")


def instance_for_size(generator: str, size: int, seed: int = 0, pattern: Graph | None = None) -> Instance:
    """Instance with about ``size`` vertices from a named generator.

    ``planted`` packs ``size/10`` copies of the pattern (default: triangle)
    and pads with a path; ``bounded`` plants as many copies in a random host
    of max degree 5.
    """
    if generator == "p5":
        if pattern is not None and pattern != path_graph(5):
            raise ValueError("the p5 generator only supports the 5-vertex path")
        return gen_p5_family(max(1, (size - 3) // 2))
    H = pattern if pattern is not None else complete_graph(3)
    if generator == "planted":
        m = max(1, size // 10)
        if m * H.n > size:
            raise ValueError(f"size {size} too small for {m} copies of a {H.n}-vertex pattern")
        return gen_planted_union(H, m, pad=size - H.n * m)
    if generator == "bounded":
        return gen_bounded_degree_planted(H, size, max(5, H.max_degree()), max(1, size // 10), seed=seed)
    raise ValueError(f"unknown generator {generator!r}; choose from {', '.join(GENERATORS)}")


def query_sweep(
    generator: str,
    sizes: Sequence[int],
    n_reps: int,
    trials: int,
    seed: int = 0,
    jobs: int = 1,
    pattern: Graph | None = None,
) -> list[dict]:
    """One row per size; the query column must not change with size."""
    if not sizes:
        raise ValueError("sizes must be nonempty")
    rows = []
    for size in sizes:
        inst = instance_for_size(generator, size, seed, pattern)
        rep = estimate_rejection(inst, n_reps, trials, seed, jobs)
        lo, hi = rep.interval
        rows.append(
            {"size": inst.graph.n, "queries": rep.queries_per_trial, "reject_rate": rep.rejection_rate, "ci_low": lo, "ci_high": hi}
        )
    if len({r["queries"] for r in rows}) != 1:
        raise AssertionError("query count depends on the host size")
    return rows


SWEEP_HEADER = "size,queries,reject_rate,ci_low,ci_high"


def sweep_csv(rows: Sequence[dict]) -> str:
    lines = [SWEEP_HEADER]
    for r in rows:
        lines.append(f"{r['size']},{r['queries']},{r['reject_rate']:.6f},{r['ci_low']:.6f},{r['ci_high']:.6f}")
    return "\n".join(lines) + "\n"


def report_json(instance: Instance, report: TrialReport, seed: int) -> dict:
    t, d, _ = tester_parameters(instance.pattern)
    return {
        "schema": 1,
        "instance": instance.as_dict(),
        "tester": {"pattern": instance.pattern.edges(), "n_reps": report.n_reps, "depth": t, "breadth": d},
        "results": report.as_dict(),
        "seed": seed,
    }


# Exact distribution of the bounded BFS ----------------------------------------------------------

BFSOutcome = tuple[int, frozenset]  # (start vertex, explored edges)


def _hit_sets(g: Graph, u: int, d: int) -> dict[frozenset, Fraction]:
    """Distribution of the set of neighbors hit by ``d`` draws from ``u``."""
    nb = g.adj[u]
    if not nb:
        return {frozenset(): Fraction(1)}
    out: dict[frozenset, Fraction] = defaultdict(Fraction)
    w = Fraction(1, len(nb) ** d)
    for seq in itertools.product(nb, repeat=d):
        out[frozenset(seq)] += w
    return dict(out)


def bfs_output_distribution(g: Graph, t: int, d: int) -> dict[BFSOutcome, Fraction]:
    """Exact law of ``(start, edges)`` for the bounded BFS, by walking the probability tree.

    Within a round the next frontier is the set of hit neighbors outside the
    seen and current vertices, whatever order the current vertices go in, so
    states can be kept as sets.
    """
    if g.n == 0:
        raise ValueError("empty host")
    cache = {}

    def hits(u):
        if u not in cache:
            cache[u] = _hit_sets(g, u, d)
        return cache[u]

    states: dict[tuple, Fraction] = defaultdict(Fraction)
    for v in range(g.n):
        states[(v, frozenset([v]), frozenset(), frozenset())] += Fraction(1, g.n)
    for _ in range(t):
        nxt: dict[tuple, Fraction] = defaultdict(Fraction)
        for (start, current, seen, edges), p in states.items():
            if not current:
                nxt[(start, current, seen, edges)] += p
                continue
            closed = seen | current
            per_vertex = [[(u, hs, q) for hs, q in hits(u).items()] for u in sorted(current)]
            for combo in itertools.product(*per_vertex):
                q = p
                new_edges = set(edges)
                frontier = set()
                for u, hs, qu in combo:
                    q *= qu
                    for w in hs:
                        new_edges.add(edge_key(u, w))
                        if w not in closed:
                            frontier.add(w)
                nxt[(start, frozenset(frontier), closed, frozenset(new_edges))] += q
        states = nxt
    dist: dict[BFSOutcome, Fraction] = defaultdict(Fraction)
    for (start, _, _, edges), p in states.items():
        dist[(start, edges)] += p
    return dict(dist)


def empirical_bfs_distribution(g: Graph, t: int, d: int, runs: int, seed: int = 0) -> Counter:
    oracle = Oracle(g, seed)
    counts: Counter = Counter()
    for _ in range(runs):
        e = random_bounded_bfs(oracle, t, d)
        counts[(e.start, e.edges)] += 1
    return counts


def total_variation(exact: dict, counts: Counter) -> float:
    runs = sum(counts.values())
    keys = set(exact) | set(counts)
    return 0.5 * sum(abs(float(exact.get(k, 0)) - counts.get(k, 0) / runs) for k in keys)


def containment_probability(dist: dict[BFSOutcome, Fraction], target: frozenset) -> Fraction:
    return sum((p for (_, edges), p in dist.items() if target <= edges), Fraction(0))


# Transfer of hit probabilities to degree-preserving subgraphs -----------------------------------------

def _local_problem(g: Graph, copies: CopySet, target):
    sub, mapping = induced_edge_subgraph(g, copies)
    back = {x: i for i, x in enumerate(mapping)}
    if target is None:
        target = copies.copies[0].host_edges()
    target = frozenset(edge_key(*e) for e in target)
    if any(x not in back for e in target for x in e) or any(not sub.has_edge(back[x], back[y]) for x, y in target):
        raise ValueError("target edges must lie in G[copies]")
    local = frozenset(edge_key(back[x], back[y]) for x, y in target)
    return sub, target, local


def verify_probability_transfer(
    g: Graph, copies: CopySet, c, t: int, d: int, trials: int, seed: int = 0, target=None
) -> dict:
    """Monte-Carlo check that BFS on g finds ``target`` nearly as often as on G[copies].

    ``q`` is the rate at which BFS on G[copies] returns a subgraph containing
    the target edges and ``p`` the rate on g. Passes when
    ``p >= c**(d**t + 1) * q - 3 sigma``.
    """
    if not is_c_degree_preserving(g, copies, c):
        raise ValueError(f"G[copies] is not {c}-degree preserving")
    sub, target, local = _local_problem(g, copies, target)
    factor = float(Fraction(c) ** (d**t + 1))
    hits_g = hits_sub = 0
    og, osub = Oracle(g, derive_seed(seed, 0)), Oracle(sub, derive_seed(seed, 1))
    for _ in range(trials):
        hits_g += target <= random_bounded_bfs(og, t, d).edges
        hits_sub += local <= random_bounded_bfs(osub, t, d).edges
    p, q = hits_g / trials, hits_sub / trials
    sigma = math.sqrt((p * (1 - p) + factor**2 * q * (1 - q)) / trials)
    return {"p": p, "q": q, "factor": factor, "sigma": sigma, "holds": p >= factor * q - 3 * sigma}


def exact_probability_transfer(g: Graph, copies: CopySet, c, t: int, d: int, target=None) -> dict:
    """Same comparison with both probabilities computed exactly."""
    if not is_c_degree_preserving(g, copies, c):
        raise ValueError(f"G[copies] is not {c}-degree preserving")
    sub, target, local = _local_problem(g, copies, target)
    factor = Fraction(c) ** (d**t + 1)
    p = containment_probability(bfs_output_distribution(g, t, d), target)
    q = containment_probability(bfs_output_distribution(sub, t, d), local)
    return {"p": p, "q": q, "factor": factor, "holds": p >= factor * q}


# Step events on layered copies ----------------------------------------------------------------------

EVENTS = ("neighborhood", "part_entry", "part_capture", "component_capture")


def layered_event_frequencies(layered: LayeredCopies, trials: int, seed: int = 0) -> dict[str, float]:
    """How often one tester-sized BFS on the host achieves each reconstruction step.

    * neighborhood: the start is an inner-vertex image and all its pattern edges were explored;
    * part_entry: an edge from a source image into its part was explored;
    * part_capture: every edge of some part plus its sources was explored;
    * component_capture: the explored edges hold a copy of a pattern component.
    """
    copies = layered.copies
    g, H = copies.host, copies.pattern
    decomp = decompose_sources_parts(H, layered.ordering)
    t, d, _ = tester_parameters(H)
    owner = {}
    for i, cp in enumerate(copies):
        for e in cp.host_edges():
            owner[e] = i
    inner = set(range(H.n)) - decomp.sources
    part_edges = [
        [(a, b) for a, b in H.edges() if a in P or b in P] for P in decomp.parts
    ]
    entry_edges = [
        [(a, b) for a, b in H.edges() if (a in P and b in decomp.sources) or (b in P and a in decomp.sources)]
        for P in decomp.parts
    ]
    comps = [H.subgraph(c) for c in H.components() if len(c) > 1]
    counts = dict.fromkeys(EVENTS, 0)
    oracle = Oracle(g, seed)
    for _ in range(trials):
        oracle.new_stream()
        ex = random_bounded_bfs(oracle, t, d)
        found = ex.edges
        cand = sorted({owner[e] for e in found if e in owner})
        ims = [copies.copies[i].image for i in cand]

        def covered(im, pairs):
            return all(edge_key(im[a], im[b]) in found for a, b in pairs)

        if any(
            im[a] == ex.start and covered(im, [(a, b) for b in H.adj[a]]) for im in ims for a in inner
        ):
            counts["neighborhood"] += 1
        if any(any(edge_key(im[a], im[b]) in found for a, b in pe) for im in ims for pe in entry_edges):
            counts["part_entry"] += 1
        if any(covered(im, pe) for im in ims for pe in part_edges):
            counts["part_capture"] += 1
        if found:
            verts = sorted({x for e in found for x in e})
            idx = {x: i for i, x in enumerate(verts)}
            local = Graph(len(verts), [(idx[x], idx[y]) for x, y in found])
            if any(find_copy(local, C) is not None for C in comps):
                counts["component_capture"] += 1
    return {k: v / trials for k, v in counts.items()}
