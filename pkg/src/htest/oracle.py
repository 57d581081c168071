"""Random-neighbor oracle: the tester's only window onto the host graph."""

from __future__ import annotations

import os
import random
from dataclasses import dataclass, field

import numpy as np

from .graph import Graph

SEED_ENV = "HTEST_SEED"
MASK64 = (1 << 64) - 1


def seed_from_env(default: int | None = None) -> int:
    """Root seed from ``HTEST_SEED``, else ``default``, else a fresh random value."""
    raw = os.environ.get(SEED_ENV)
    if raw is not None and raw.strip():
        return int(raw) & MASK64
    if default is not None:
        return default & MASK64
    return random.SystemRandom().getrandbits(64)


def derive_seed(seed: int, *path: int) -> int:
    """Independent 64-bit child seed addressed by ``path`` (splittable scheme)."""
    ss = np.random.SeedSequence(seed & MASK64, spawn_key=tuple(path))
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass
class QueryLog:
    neighbor_queries: int = 0
    vertex_samples: int = 0
    transcript: list[tuple[int | None, int | None]] | None = None

    @property
    def total(self) -> int:
        return self.neighbor_queries + self.vertex_samples

    def as_dict(self) -> dict:
        out = {"neighbor_queries": self.neighbor_queries, "vertex_samples": self.vertex_samples}
        if self.transcript is not None:
            out["transcript"] = [list(t) for t in self.transcript]
        return out


class OracleError(ValueError):
    pass


@dataclass
class Oracle:
    """Random-neighbor access to ``graph``.

    Vertex samples are logged as ``(None, v)`` transcript entries, neighbor
    queries as ``(v, w)`` with ``w is None`` for a vertex without neighbors.
    Not safe for concurrent use; make one oracle per trial.
    """

    graph: Graph
    seed: int = 0
    record: bool = False
    log: QueryLog = field(default_factory=QueryLog)

    def __post_init__(self):
        self.seed &= MASK64
        if self.record and self.log.transcript is None:
            self.log.transcript = []
        self._streams = 0
        self._rng = random.Random(derive_seed(self.seed))

    @property
    def n(self) -> int:
        """Number of host vertices (known to the tester up front)."""
        return self.graph.n

    def new_stream(self) -> None:
        """Switch to the next independent random stream derived from the root seed."""
        self._streams += 1
        self._rng = random.Random(derive_seed(self.seed, self._streams))

    def random_vertex(self) -> int:
        if self.graph.n == 0:
            raise OracleError("cannot sample a vertex of an empty graph")
        v = self._rng.randrange(self.graph.n)
        self.log.vertex_samples += 1
        if self.log.transcript is not None:
            self.log.transcript.append((None, v))
        return v

    def random_neighbor(self, v: int) -> int | None:
        if not 0 <= v < self.graph.n:
            raise OracleError(f"vertex {v} out of range for n={self.graph.n}")
        nbrs = self.graph.adj[v]
        w = nbrs[self._rng.randrange(len(nbrs))] if nbrs else None
        self.log.neighbor_queries += 1
        if self.log.transcript is not None:
            self.log.transcript.append((v, w))
        return w
