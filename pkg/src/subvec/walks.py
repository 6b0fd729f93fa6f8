"""Subgraph-truncated random walks.

Each walk is confined to the edges of one subgraph.  Randomness for walk
``idx`` of subgraph ``sid`` comes from its own stream derived from
``(seed, sid, idx)``, so the corpus does not depend on generation order or on
how many workers produced it.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import DomainError
from .graph import Subgraph, SubgraphSet

DEFAULT_WALK_LENGTH = 1000
DEFAULT_WALKS_PER_SUBGRAPH = 1


@njit(cache=True, nogil=True)
def _walk_kernel(indptr, indices, us, out):
    n = len(indptr) - 1
    cur = min(int(us[0] * n), n - 1)
    out[0] = cur
    for t in range(1, len(out)):
        a = indptr[cur]
        deg = indptr[cur + 1] - a
        # isolated node inside the subgraph: stay put
        if deg > 0:
            cur = indices[a + min(int(us[t] * deg), deg - 1)]
        out[t] = cur


def walk_rng(seed: int, sid: int, idx: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(sid, idx)))


@dataclass(frozen=True, eq=False)
class Walk:
    sid: int
    seq: np.ndarray  # host node ids

    def __len__(self):
        return len(self.seq)


def random_walk(sg: Subgraph, length: int, rng: np.random.Generator) -> Walk:
    """Uniform start node, then uniform steps to subgraph neighbors."""
    if sg.n == 0:
        raise DomainError(f"subgraph {sg.sid} is empty")
    if length < 1:
        raise DomainError(f"walk length must be >= 1, got {length}")
    us = rng.random(length)
    out = np.empty(length, dtype=np.int64)
    _walk_kernel(sg.indptr, sg.indices, us, out)
    return Walk(sg.sid, sg.nodes[out])


@dataclass(eq=False)
class WalkCorpus:
    walks: list[Walk]
    walk_length: int
    walks_per_subgraph: int
    n_subgraphs: int
    vocab: np.ndarray  # sorted host ids of the union of subgraph nodes
    seed: int | None = None
    names: list[str] | None = None  # subgraph names, indexed by sid
    labels: tuple[str, ...] | None = None  # host node labels, indexed by host id
    _arrays: tuple | None = field(default=None, repr=False)

    def __len__(self):
        return len(self.walks)

    @property
    def token_count(self) -> int:
        return sum(len(w) for w in self.walks)

    def arrays(self):
        """Flat ``(tokens, offsets, sids)`` arrays; tokens are host ids."""
        if self._arrays is None:
            lens = np.array([len(w) for w in self.walks], dtype=np.int64)
            offsets = np.zeros(len(lens) + 1, dtype=np.int64)
            np.cumsum(lens, out=offsets[1:])
            tokens = (np.concatenate([w.seq for w in self.walks]).astype(np.int64)
                      if self.walks else np.zeros(0, dtype=np.int64))
            sids = np.array([w.sid for w in self.walks], dtype=np.int64)
            self._arrays = (tokens, offsets, sids)
        return self._arrays

    def frequencies(self) -> np.ndarray:
        """Token counts indexed like ``vocab``."""
        tokens, _, _ = self.arrays()
        return np.bincount(np.searchsorted(self.vocab, tokens), minlength=len(self.vocab))

    def dump(self, fh) -> None:
        """Write ``sid: token token ...`` lines."""
        labels, names = self.labels, self.names
        for w in self.walks:
            sid = names[w.sid] if names is not None else w.sid
            toks = (labels[v] for v in w.seq) if labels is not None else map(str, w.seq)
            fh.write(f"{sid}: {' '.join(toks)}\n")


def _subgraph_walks(sg: Subgraph, length: int, r: int, seed: int) -> list[Walk]:
    try:
        return [random_walk(sg, length, walk_rng(seed, sg.sid, i)) for i in range(r)]
    except DomainError as e:
        raise DomainError(f"subgraph {sg.sid}: {e}") from None


def build_corpus(sset: SubgraphSet, length: int = DEFAULT_WALK_LENGTH,
                 r: int = DEFAULT_WALKS_PER_SUBGRAPH, seed: int = 0,
                 workers: int = 1) -> WalkCorpus:
    if r < 0:
        raise DomainError(f"walks per subgraph must be >= 0, got {r}")
    if workers > 1 and len(sset) > 1:
        with ThreadPoolExecutor(workers) as ex:
            chunks = list(ex.map(lambda sg: _subgraph_walks(sg, length, r, seed), sset))
    else:
        chunks = [_subgraph_walks(sg, length, r, seed) for sg in sset]
    walks = [w for chunk in chunks for w in chunk]
    return WalkCorpus(walks, length, r, len(sset), sset.vocabulary(), seed,
                      list(sset.names), sset.host.labels)
