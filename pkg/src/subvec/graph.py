"""Undirected host graphs, node-induced subgraphs, ego-nets and link-prediction splits.

Nodes are identified internally by dense integer ids ``0..n-1``; the original
string tokens from input files are kept as labels.  Adjacency is stored in CSR
form (``indptr``/``indices``) with sorted neighbor lists.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError, ParseError

log = logging.getLogger(__name__)

COMMENT_PREFIXES = ("#", "%")


def _csr_from_pairs(n: int, us: np.ndarray, vs: np.ndarray):
    """Symmetric CSR with sorted rows from unique undirected pairs."""
    src = np.concatenate([us, vs])
    dst = np.concatenate([vs, us])
    order = np.lexsort((dst, src))
    src, dst = src[order], dst[order]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(indptr, src + 1, 1)
    np.cumsum(indptr, out=indptr)
    return indptr, dst.astype(np.int64)


class Graph:
    """Immutable simple undirected graph in CSR form."""

    __slots__ = ("n", "indptr", "indices", "labels", "_index", "self_loops_dropped")

    def __init__(self, indptr, indices, labels=None, self_loops_dropped=0):
        self.indptr = np.asarray(indptr, dtype=np.int64)
        self.indices = np.asarray(indices, dtype=np.int64)
        self.indptr.setflags(write=False)
        self.indices.setflags(write=False)
        self.n = len(self.indptr) - 1
        if labels is None:
            labels = [str(i) for i in range(self.n)]
        if len(labels) != self.n:
            raise DomainError(f"{len(labels)} labels for {self.n} nodes")
        self.labels = tuple(labels)
        self._index = {lab: i for i, lab in enumerate(self.labels)}
        if len(self._index) != self.n:
            raise DomainError("node labels must be unique")
        self.self_loops_dropped = self_loops_dropped

    @classmethod
    def from_edges(cls, edges: Iterable[tuple[int, int]], n: int | None = None,
                   labels: Sequence[str] | None = None) -> "Graph":
        """Build from integer pairs; self-loops and duplicates are discarded."""
        arr = np.asarray(list(edges), dtype=np.int64).reshape(-1, 2)
        if n is None:
            n = len(labels) if labels is not None else (int(arr.max()) + 1 if len(arr) else 0)
        if len(arr) and (arr.min() < 0 or arr.max() >= n):
            raise DomainError("edge endpoint outside 0..n-1")
        arr = arr[arr[:, 0] != arr[:, 1]]
        arr = np.sort(arr, axis=1)
        arr = np.unique(arr, axis=0) if len(arr) else arr
        indptr, indices = _csr_from_pairs(n, arr[:, 0], arr[:, 1])
        return cls(indptr, indices, labels)

    @property
    def m(self) -> int:
        return len(self.indices) // 2

    def neighbors(self, v: int) -> np.ndarray:
        return self.indices[self.indptr[v]:self.indptr[v + 1]]

    def degree(self, v: int) -> int:
        return int(self.indptr[v + 1] - self.indptr[v])

    @property
    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def has_edge(self, u: int, v: int) -> bool:
        nb = self.neighbors(u)
        i = np.searchsorted(nb, v)
        return bool(i < len(nb) and nb[i] == v)

    def edges(self) -> np.ndarray:
        """Edge array of shape (m, 2) with ``u < v``, lexicographically sorted."""
        src = np.repeat(np.arange(self.n, dtype=np.int64), self.degrees)
        mask = src < self.indices
        return np.stack([src[mask], self.indices[mask]], axis=1)

    def id_of(self, label: str) -> int:
        try:
            return self._index[label]
        except KeyError:
            raise DomainError(f"unknown node label {label!r}") from None

    def check_node(self, v: int) -> None:
        if not 0 <= v < self.n:
            raise DomainError(f"node id {v} outside 0..{self.n - 1}")

    def is_connected(self) -> bool:
        if self.n == 0:
            return True
        return len(_bfs_component(self.indptr, self.indices, 0)) == self.n

    def write_edge_list(self, fh) -> None:
        for u, v in self.edges():
            fh.write(f"{self.labels[u]} {self.labels[v]}\n")

    def __repr__(self):
        return f"Graph(n={self.n}, m={self.m})"


def _bfs_component(indptr, indices, start) -> list[int]:
    seen = {start}
    queue = deque([start])
    while queue:
        u = queue.popleft()
        for w in indices[indptr[u]:indptr[u + 1]]:
            w = int(w)
            if w not in seen:
                seen.add(w)
                queue.append(w)
    return list(seen)


def parse_edge_list(lines: Iterable[str]) -> Graph:
    """Parse whitespace-separated edge lines into a :class:`Graph`.

    Lines starting with ``#`` or ``%`` and blank lines are skipped.  Reversed
    and repeated edges collapse into one; self-loops are dropped but their
    endpoint still becomes a node.
    """
    index: dict[str, int] = {}
    labels: list[str] = []
    pairs: list[tuple[int, int]] = []
    loops = 0

    def node(tok):
        i = index.get(tok)
        if i is None:
            i = index[tok] = len(labels)
            labels.append(tok)
        return i

    for lineno, line in enumerate(lines, 1):
        s = line.strip()
        if not s or s.startswith(COMMENT_PREFIXES):
            continue
        toks = s.split()
        if len(toks) != 2:
            raise ParseError(f"expected 2 node tokens, got {len(toks)}", lineno)
        u, v = node(toks[0]), node(toks[1])
        if u == v:
            loops += 1
            continue
        pairs.append((u, v))

    if loops:
        log.warning("dropped %d self-loop line(s)", loops)
    g = Graph.from_edges(pairs, n=len(labels), labels=labels)
    g.self_loops_dropped = loops
    return g


def read_edge_list(path) -> Graph:
    with open(path) as fh:
        return parse_edge_list(fh)


@dataclass(frozen=True, eq=False)
class Subgraph:
    """Node-induced subgraph of ``host``.

    ``nodes`` holds sorted host ids; ``indptr``/``indices`` is the local CSR
    adjacency where ``indices`` refer to positions in ``nodes``.
    """

    sid: int
    nodes: np.ndarray
    indptr: np.ndarray
    indices: np.ndarray
    host: Graph = field(repr=False)

    @property
    def n(self) -> int:
        return len(self.nodes)

    @property
    def m(self) -> int:
        return len(self.indices) // 2

    def edges(self) -> np.ndarray:
        """Edges as host-id pairs ``(u, v)`` with ``u < v``."""
        src = np.repeat(np.arange(self.n), np.diff(self.indptr))
        mask = src < self.indices
        return np.stack([self.nodes[src[mask]], self.nodes[self.indices[mask]]], axis=1)

    def local_neighbors(self, i: int) -> np.ndarray:
        return self.indices[self.indptr[i]:self.indptr[i + 1]]

    def node_key(self) -> bytes:
        return self.nodes.tobytes()


def induced_subgraph(g: Graph, nodes: Iterable[int], sid: int = 0) -> Subgraph:
    nodes = np.unique(np.fromiter((int(v) for v in nodes), dtype=np.int64))
    if len(nodes) == 0:
        raise DomainError("subgraph node set is empty")
    if nodes[0] < 0 or nodes[-1] >= g.n:
        raise DomainError(f"subgraph node ids must lie in 0..{g.n - 1}")
    local = np.full(g.n, -1, dtype=np.int64)
    local[nodes] = np.arange(len(nodes))
    starts, ends = g.indptr[nodes], g.indptr[nodes + 1]
    rows = [local[g.indices[a:b]] for a, b in zip(starts, ends)]
    rows = [r[r >= 0] for r in rows]
    indptr = np.zeros(len(nodes) + 1, dtype=np.int64)
    indptr[1:] = np.cumsum([len(r) for r in rows])
    indices = np.concatenate(rows) if rows else np.zeros(0, dtype=np.int64)
    return Subgraph(sid, nodes, indptr, indices.astype(np.int64), g)


def ego_net(g: Graph, center: int, hops: int = 1, sid: int | None = None) -> Subgraph:
    """Subgraph induced by ``center`` and every node within ``hops`` (1 or 2) steps."""
    g.check_node(center)
    if hops not in (1, 2):
        raise DomainError(f"hops must be 1 or 2, got {hops}")
    members = {center}
    frontier = [center]
    for _ in range(hops):
        nxt = []
        for u in frontier:
            for w in g.neighbors(u):
                w = int(w)
                if w not in members:
                    members.add(w)
                    nxt.append(w)
        frontier = nxt
    return induced_subgraph(g, members, center if sid is None else sid)


class SubgraphSet:
    """Ordered subgraphs of one host with contiguous sids ``0..n-1``."""

    def __init__(self, subgraphs: Sequence[Subgraph], host: Graph,
                 names: Sequence[str] | None = None):
        self.subgraphs = list(subgraphs)
        self.host = host
        for i, sg in enumerate(self.subgraphs):
            if sg.sid != i:
                raise DomainError(f"subgraph at position {i} has sid {sg.sid}")
            if sg.host is not host:
                raise DomainError("all subgraphs must share the same host graph")
        self.names = [str(i) for i in range(len(self.subgraphs))] if names is None else list(names)
        if len(self.names) != len(self.subgraphs) or len(set(self.names)) != len(self.names):
            raise DomainError("subgraph names must be unique, one per subgraph")

    def __len__(self):
        return len(self.subgraphs)

    def __iter__(self):
        return iter(self.subgraphs)

    def __getitem__(self, i) -> Subgraph:
        return self.subgraphs[i]

    @classmethod
    def from_node_sets(cls, g: Graph, node_sets, names=None) -> "SubgraphSet":
        return cls([induced_subgraph(g, ns, i) for i, ns in enumerate(node_sets)], g, names)

    @classmethod
    def ego_nets(cls, g: Graph, hops: int = 1, centers=None) -> "SubgraphSet":
        centers = range(g.n) if centers is None else list(centers)
        subs = [ego_net(g, c, hops, sid=i) for i, c in enumerate(centers)]
        return cls(subs, g, [g.labels[c] for c in centers])

    def vocabulary(self) -> np.ndarray:
        """Sorted union of member node ids across all subgraphs."""
        if not self.subgraphs:
            return np.zeros(0, dtype=np.int64)
        return np.unique(np.concatenate([sg.nodes for sg in self.subgraphs]))

    def write(self, fh) -> None:
        for name, sg in zip(self.names, self.subgraphs):
            fh.write(" ".join([name] + [self.host.labels[v] for v in sg.nodes]) + "\n")


def parse_subgraph_set(lines: Iterable[str], host: Graph) -> SubgraphSet:
    """Parse ``sid label label ...`` lines."""
    names, node_sets = [], []
    for lineno, line in enumerate(lines, 1):
        s = line.strip()
        if not s or s.startswith(COMMENT_PREFIXES):
            continue
        toks = s.split()
        if len(toks) < 2:
            raise ParseError("subgraph line needs an id and at least one node", lineno)
        if toks[0] in names:
            raise ParseError(f"duplicate subgraph id {toks[0]!r}", lineno)
        try:
            node_sets.append([host.id_of(t) for t in toks[1:]])
        except DomainError as e:
            raise ParseError(str(e), lineno) from None
        names.append(toks[0])
    return SubgraphSet.from_node_sets(host, node_sets, names)


def parse_communities(lines: Iterable[str], host: Graph) -> dict[int, str]:
    """Parse ``node_label community_label`` lines into ``{node id: community}``."""
    truth: dict[int, str] = {}
    for lineno, line in enumerate(lines, 1):
        s = line.strip()
        if not s or s.startswith(COMMENT_PREFIXES):
            continue
        toks = s.split()
        if len(toks) != 2:
            raise ParseError(f"expected 'node community', got {len(toks)} tokens", lineno)
        try:
            v = host.id_of(toks[0])
        except DomainError as e:
            raise ParseError(str(e), lineno) from None
        if v in truth:
            raise ParseError(f"node {toks[0]!r} listed twice", lineno)
        truth[v] = toks[1]
    return truth


@dataclass(frozen=True)
class LinkSplit:
    original: Graph
    train_graph: Graph
    hidden_edges: frozenset
    fraction_p: float
    target: int
    shortfall: bool


def _reachable_without(adj: list[set], u: int, v: int) -> bool:
    """BFS from u looking for v; caller has already removed edge (u, v)."""
    seen = {u}
    queue = deque([u])
    while queue:
        a = queue.popleft()
        for b in adj[a]:
            if b == v:
                return True
            if b not in seen:
                seen.add(b)
                queue.append(b)
    return False


def make_link_split(g: Graph, p: float, seed: int) -> LinkSplit:
    """Hide ``max(1, floor(p/100 * m))`` edges without disconnecting the graph.

    Edges are shuffled once with ``seed`` and scanned in order; an edge is
    hidden only if its endpoints stay connected after removal.  If the scan
    runs out first, the split is returned with ``shortfall=True``.
    """
    if not 0 < p < 100:
        raise DomainError(f"hide percentage must lie in (0, 100), got {p}")
    if not g.is_connected():
        raise DomainError("link split requires a connected graph")
    target = max(1, int(p * g.m // 100))
    edges = g.edges()
    order = np.random.default_rng(seed).permutation(len(edges))
    adj = [set(int(w) for w in g.neighbors(v)) for v in range(g.n)]
    hidden = []
    for idx in order:
        if len(hidden) >= target:
            break
        u, v = (int(x) for x in edges[idx])
        adj[u].discard(v)
        adj[v].discard(u)
        if _reachable_without(adj, u, v):
            hidden.append((u, v))
        else:
            adj[u].add(v)
            adj[v].add(u)
    hidden_set = frozenset(hidden)
    keep = [tuple(e) for e in edges.tolist() if tuple(e) not in hidden_set]
    train = Graph.from_edges(keep, n=g.n, labels=g.labels)
    return LinkSplit(g, train, hidden_set, float(p), target, len(hidden) < target)


def planted_partition(n_blocks: int, block_size: int, p_in: float, p_out: float,
                      seed: int) -> tuple[Graph, np.ndarray]:
    """Planted-partition random graph and its block labels."""
    rng = np.random.default_rng(seed)
    n = n_blocks * block_size
    blocks = np.repeat(np.arange(n_blocks), block_size)
    iu, ju = np.triu_indices(n, k=1)
    prob = np.where(blocks[iu] == blocks[ju], p_in, p_out)
    keep = rng.random(len(iu)) < prob
    g = Graph.from_edges(zip(iu[keep].tolist(), ju[keep].tolist()), n=n)
    return g, blocks
