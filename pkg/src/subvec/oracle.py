"""Brute-force shifted co-occurrence matrix and the overlap lower bound.

Contexts are length-``w`` walks (node repetition allowed).  For a corpus of
walks the subgraph-by-context count matrix is built by sliding a window of
``w`` over every walk.  Entry ``(i, j)`` of the shifted matrix is

    log(#(j in i) / #(j in D)) + log(|D| * w / (k * l))

where it is observed and 0 otherwise.  For two subgraphs sharing ``x``
contexts, the dot product of their rows is compared against

    statement bound:  x * log^2(|D| w / (N k l))
    proof bound:      x * log^2(|D| w / (N k l^2))

with ``N`` the number of subgraphs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import DomainError
from .graph import Subgraph, SubgraphSet
from .walks import Walk, WalkCorpus

DEFAULT_CAP = 10**6
TOLERANCE = 1e-9


def enumerate_contexts(sg: Subgraph, w: int, cap: int = DEFAULT_CAP) -> set[tuple[int, ...]]:
    """All length-``w`` walks in ``sg`` as tuples of host ids (depth-first)."""
    if w < 1:
        raise DomainError(f"context length must be >= 1, got {w}")
    out: set[tuple[int, ...]] = set()
    path: list[int] = []

    def extend(i):
        path.append(i)
        if len(path) == w:
            out.add(tuple(int(sg.nodes[p]) for p in path))
            if len(out) > cap:
                raise DomainError(f"more than {cap} contexts in subgraph {sg.sid}")
        else:
            for j in sg.local_neighbors(i):
                extend(int(j))
        path.pop()

    for i in range(sg.n):
        extend(i)
    return out


def exhaustive_corpus(sset: SubgraphSet, w: int, cap: int = DEFAULT_CAP) -> WalkCorpus:
    """One length-``w`` walk per context of every subgraph, each exactly once."""
    walks = []
    for sg in sset:
        for ctx in sorted(enumerate_contexts(sg, w, cap)):
            walks.append(Walk(sg.sid, np.asarray(ctx, dtype=np.int64)))
    return WalkCorpus(walks, w, 0, len(sset), sset.vocabulary(), None,
                      list(sset.names), sset.host.labels)


@dataclass(eq=False)
class CoocMatrix:
    contexts: list[tuple[int, ...]]
    counts: np.ndarray  # (n_subgraphs, n_contexts)
    w: int
    k: float
    l: float

    @property
    def totals(self) -> np.ndarray:
        return self.counts.sum(axis=0)

    @property
    def D(self) -> int:
        return int(self.counts.sum())

    @property
    def N(self) -> int:
        return self.counts.shape[0]

    def support(self, i: int) -> set[tuple[int, ...]]:
        return {self.contexts[j] for j in np.flatnonzero(self.counts[i])}


def count_context_corpus(corpus: WalkCorpus, w: int, k: float = 1,
                         l: float | None = None) -> CoocMatrix:
    """Count every sliding window of ``w`` tokens per subgraph.

    ``l`` defaults to the corpus walk length.
    """
    col: dict[tuple[int, ...], int] = {}
    cells: dict[tuple[int, int], int] = {}
    for walk in corpus.walks:
        seq = [int(v) for v in walk.seq]
        for t in range(len(seq) - w + 1):
            ctx = tuple(seq[t:t + w])
            j = col.setdefault(ctx, len(col))
            cells[walk.sid, j] = cells.get((walk.sid, j), 0) + 1
    contexts = sorted(col)
    remap = {col[c]: j for j, c in enumerate(contexts)}
    counts = np.zeros((corpus.n_subgraphs, len(contexts)), dtype=np.int64)
    for (i, j), c in cells.items():
        counts[i, remap[j]] = c
    return CoocMatrix(contexts, counts, w, k, corpus.walk_length if l is None else l)


@dataclass(eq=False)
class MZero:
    values: np.ndarray
    cooc: CoocMatrix

    def row(self, i: int) -> np.ndarray:
        return self.values[i]


def build_m_zero(cm: CoocMatrix) -> MZero:
    counts = cm.counts.astype(float)
    totals = cm.totals.astype(float)
    shift = math.log(cm.D * cm.w / (cm.k * cm.l)) if cm.D else 0.0
    vals = np.zeros_like(counts)
    nz = counts > 0
    vals[nz] = np.log(counts[nz] / np.broadcast_to(totals, counts.shape)[nz]) + shift
    return MZero(vals, cm)


def overlap_paths(ga: Subgraph, gb: Subgraph, w: int, cap: int = DEFAULT_CAP) -> int:
    if ga.host is not gb.host:
        raise DomainError("subgraphs must share a host graph")
    return len(enumerate_contexts(ga, w, cap) & enumerate_contexts(gb, w, cap))


@dataclass(frozen=True)
class BoundReport:
    a: int
    b: int
    x: int
    lhs: float
    rhs_statement: float
    rhs_proof: float
    holds_statement: bool
    holds_proof: bool
    conclusive: bool

    HEADER = ("pair", "x", "lhs", "rhs_statement", "rhs_proof",
              "holds_statement", "holds_proof", "conclusive")

    def row(self, names=None) -> tuple:
        pair = f"{names[self.a]}-{names[self.b]}" if names else f"{self.a}-{self.b}"
        return (pair, self.x, repr(self.lhs), repr(self.rhs_statement), repr(self.rhs_proof),
                self.holds_statement, self.holds_proof, self.conclusive)


def bounds(x: int, D: int, w: int, N: int, k: float, l: float) -> tuple[float, float]:
    """Right-hand sides (statement form, proof form) for ``x`` shared contexts."""
    if x == 0:
        return 0.0, 0.0
    stmt = x * math.log(D * w / (N * k * l)) ** 2
    proof = x * math.log(D * w / (N * k * l * l)) ** 2
    return stmt, proof


def bound_check(mz: MZero, a: int, b: int, x: int, covered: bool = True) -> BoundReport:
    """Compare the row dot product of ``a`` and ``b`` against both bounds.

    ``covered`` states whether the corpus visited every context of both
    subgraphs; when it did not, the report is marked inconclusive.
    """
    cm = mz.cooc
    lhs = float(mz.values[a] @ mz.values[b])
    stmt, proof = bounds(x, cm.D, cm.w, cm.N, cm.k, cm.l)
    return BoundReport(a, b, x, lhs, stmt, proof, lhs >= stmt - TOLERANCE,
                        lhs >= proof - TOLERANCE, covered)


def verify_pairs(sset: SubgraphSet, corpus: WalkCorpus, w: int, k: float = 1,
                 l: float | None = None, cap: int = DEFAULT_CAP) -> list[BoundReport]:
    """Run :func:`bound_check` on every unordered pair of subgraphs."""
    cm = count_context_corpus(corpus, w, k, l)
    mz = build_m_zero(cm)
    ctx = [enumerate_contexts(sg, w, cap) for sg in sset]
    covered = [cm.support(i) == ctx[i] for i in range(len(sset))]
    return [bound_check(mz, a, b, len(ctx[a] & ctx[b]), covered[a] and covered[b])
            for a, b in combinations(range(len(sset)), 2)]
