"""Community detection and link prediction on top of ego-net embeddings."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Mapping

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import DomainError
from .graph import Graph, LinkSplit, SubgraphSet, ego_net
from .train import EmbeddingModel, TrainConfig, train
from .walks import DEFAULT_WALK_LENGTH, DEFAULT_WALKS_PER_SUBGRAPH, build_corpus

DENSE_DEGREE = 10.0


def default_hops(g: Graph) -> int:
    """1-hop ego-nets for dense graphs (average degree >= 10), 2-hop otherwise."""
    avg = 2.0 * g.m / g.n if g.n else 0.0
    return 1 if avg >= DENSE_DEGREE else 2


# -- k-means ----------------------------------------------------------------

@dataclass
class KMeansResult:
    labels: np.ndarray
    centroids: np.ndarray
    inertia: list[float]  # after every Lloyd update
    n_iter: int


def _normalize_rows(X: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(X, axis=1, keepdims=True)
    return np.divide(X, norms, out=np.zeros_like(X), where=norms > 0)


def _sq_dists(X, C):
    return ((X[:, None, :] - C[None, :, :]) ** 2).sum(axis=2)


def _plusplus(X, k, rng):
    n = len(X)
    centers = [int(rng.integers(n))]
    d2 = ((X - X[centers[0]]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total > 0:
            nxt = int(np.searchsorted(np.cumsum(d2) / total, rng.random(), side="right"))
            nxt = min(nxt, n - 1)
        else:
            rest = np.setdiff1d(np.arange(n), centers)
            nxt = int(rng.choice(rest))
        centers.append(nxt)
        d2 = np.minimum(d2, ((X - X[nxt]) ** 2).sum(axis=1))
    return X[centers].copy()


def kmeans_fit(vectors, k: int, iters: int = 100, seed: int = 0,
               n_init: int = 10) -> KMeansResult:
    """Lloyd's algorithm on L2-normalized rows with k-means++ seeding.

    Runs ``n_init`` independently seeded restarts and keeps the one with the
    lowest final inertia.  An empty cluster is re-seeded at the point
    farthest from its current centroid.
    """
    X = _normalize_rows(np.asarray(vectors, dtype=float))
    n = len(X)
    if k < 1 or n < k:
        raise DomainError(f"k-means needs 1 <= k <= n, got k={k}, n={n}")
    if n_init < 1:
        raise DomainError("n_init must be >= 1")
    rng = np.random.default_rng(seed)
    runs = [_lloyd(X, k, iters, rng) for _ in range(n_init)]
    return min(runs, key=lambda r: r.inertia[-1] if r.inertia else np.inf)


def _lloyd(X, k, iters, rng) -> KMeansResult:
    n = len(X)
    C = _plusplus(X, k, rng)
    labels = np.argmin(_sq_dists(X, C), axis=1)
    inertia = []
    it = 0
    for it in range(1, iters + 1):
        for c in range(k):
            members = labels == c
            if members.any():
                C[c] = X[members].mean(axis=0)
        for c in range(k):
            if not (labels == c).any():
                far = int(np.argmax(((X - C[labels]) ** 2).sum(axis=1)))
                C[c] = X[far]
                labels[far] = c
        inertia.append(float(((X - C[labels]) ** 2).sum()))
        D = _sq_dists(X, C)
        new = np.argmin(D, axis=1)
        # keep the current label on ties so assignments can settle
        rows = np.arange(n)
        new = np.where(D[rows, new] < D[rows, labels], new, labels)
        if np.array_equal(new, labels):
            break
        labels = new
    return KMeansResult(labels, C, inertia, it)


def kmeans(vectors, k: int, iters: int = 100, seed: int = 0, n_init: int = 10) -> np.ndarray:
    return kmeans_fit(vectors, k, iters, seed, n_init).labels


# -- ego-net embeddings -----------------------------------------------------

@dataclass
class EgoEmbedding:
    vectors: np.ndarray  # one row per host node
    model: EmbeddingModel
    row_of: np.ndarray  # host node -> row in model.S
    hops: int


def embed_ego_nets(g: Graph, hops: int, cfg: TrainConfig,
                   walk_length: int = DEFAULT_WALK_LENGTH,
                   walks_per_subgraph: int = DEFAULT_WALKS_PER_SUBGRAPH) -> EgoEmbedding:
    """Embed the ``hops`` ego-net of every node.

    Ego-nets with identical node sets are trained once and share a vector.
    """
    egos = [ego_net(g, v, hops) for v in range(g.n)]
    unique: dict[bytes, int] = {}
    row_of = np.empty(g.n, dtype=np.int64)
    reps = []
    for v, sg in enumerate(egos):
        key = sg.node_key()
        if key not in unique:
            unique[key] = len(reps)
            reps.append(replace(sg, sid=len(reps)))
        row_of[v] = unique[key]
    names = [g.labels[int(np.flatnonzero(row_of == i)[0])] for i in range(len(reps))]
    sset = SubgraphSet(reps, g, names)
    corpus = build_corpus(sset, walk_length, walks_per_subgraph, seed=cfg.seed,
                          workers=cfg.workers)
    model = train(corpus, cfg)
    return EgoEmbedding(model.S[row_of], model, row_of, hops)


# -- community detection ----------------------------------------------------

@dataclass
class CommunityAssignment:
    labels: np.ndarray  # host node id -> cluster id in 0..k-1
    k: int
    embedding: EgoEmbedding | None = field(default=None, repr=False)


def detect_communities(g: Graph, k: int, hops: int | None = None,
                       cfg: TrainConfig | None = None,
                       walk_length: int = DEFAULT_WALK_LENGTH,
                       walks_per_subgraph: int = DEFAULT_WALKS_PER_SUBGRAPH,
                       kmeans_iters: int = 100) -> CommunityAssignment:
    if k < 2:
        raise DomainError("community detection needs k >= 2")
    cfg = cfg or TrainConfig()
    hops = default_hops(g) if hops is None else hops
    emb = embed_ego_nets(g, hops, cfg, walk_length, walks_per_subgraph)
    labels = kmeans(emb.vectors, k, kmeans_iters, seed=cfg.seed)
    return CommunityAssignment(labels, k, emb)


@dataclass(frozen=True)
class PRFReport:
    precision: float
    recall: float
    f1: float
    matching: dict  # predicted cluster -> truth community

    def as_lines(self) -> list[str]:
        return [f"precision: {self.precision!r}", f"recall: {self.recall!r}",
                f"f1: {self.f1!r}"]


def community_prf(pred: Mapping[int, object] | np.ndarray,
                  truth: Mapping[int, object]) -> PRFReport:
    """Precision/recall/F-1 under a maximum-overlap one-to-one cluster matching.

    Matched overlaps are summed and divided by the total size of the matched
    predicted clusters (precision) and matched truth communities (recall).
    """
    if isinstance(pred, CommunityAssignment):
        pred = pred.labels
    if not isinstance(pred, Mapping):
        pred = dict(enumerate(np.asarray(pred).tolist()))
    if set(pred) != set(truth):
        raise DomainError("prediction and ground truth cover different node sets")
    nodes = sorted(pred)
    p_ids = sorted({pred[v] for v in nodes}, key=repr)
    t_ids = sorted({truth[v] for v in nodes}, key=repr)
    p_ix = {c: i for i, c in enumerate(p_ids)}
    t_ix = {c: i for i, c in enumerate(t_ids)}
    table = np.zeros((len(p_ids), len(t_ids)), dtype=np.int64)
    for v in nodes:
        table[p_ix[pred[v]], t_ix[truth[v]]] += 1
    rows, cols = linear_sum_assignment(table, maximize=True)
    hit = table[rows, cols].sum()
    p_den = table[rows].sum()
    r_den = table[:, cols].sum()
    precision = hit / p_den if p_den else 0.0
    recall = hit / r_den if r_den else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    matching = {p_ids[r]: t_ids[c] for r, c in zip(rows, cols)}
    return PRFReport(float(precision), float(recall), float(f1), matching)


# -- link prediction --------------------------------------------------------

@dataclass
class LinkRanking:
    """Ranked non-neighbor candidates for every query node."""

    candidates: dict[int, np.ndarray]
    scores: dict[int, np.ndarray]
    hidden: dict[int, set]

    @property
    def queries(self) -> list[int]:
        return sorted(self.candidates)


Scorer = Callable[[int, np.ndarray], np.ndarray]


def hidden_by_node(split: LinkSplit) -> dict[int, set]:
    out: dict[int, set] = {}
    for u, v in split.hidden_edges:
        out.setdefault(u, set()).add(v)
        out.setdefault(v, set()).add(u)
    return out


def rank_links(split: LinkSplit, scorer: Scorer) -> LinkRanking:
    """Score every non-neighbor of each node touching a hidden edge.

    Rankings are by descending score, ties broken by ascending node id.
    """
    g = split.train_graph
    hidden = hidden_by_node(split)
    cands, scores = {}, {}
    for v in sorted(hidden):
        mask = np.ones(g.n, dtype=bool)
        mask[v] = False
        mask[g.neighbors(v)] = False
        c = np.flatnonzero(mask)
        s = np.asarray(scorer(v, c), dtype=float)
        order = np.lexsort((c, -s))
        cands[v], scores[v] = c[order], s[order]
    return LinkRanking(cands, scores, hidden)


def cosine_scorer(vectors: np.ndarray) -> Scorer:
    unit = _normalize_rows(np.asarray(vectors, dtype=float))
    return lambda v, c: unit[c] @ unit[v]


def degree_product_scorer(g: Graph) -> Scorer:
    deg = g.degrees.astype(float)
    return lambda v, c: deg[v] * deg[c]


def random_scorer(seed: int) -> Scorer:
    rng = np.random.default_rng(seed)
    return lambda v, c: rng.random(len(c))


def predict_links(split: LinkSplit, hops: int | None = None, cfg: TrainConfig | None = None,
                  walk_length: int = DEFAULT_WALK_LENGTH,
                  walks_per_subgraph: int = DEFAULT_WALKS_PER_SUBGRAPH) -> LinkRanking:
    """Rank candidate links by cosine similarity of ego-net vectors on the train graph."""
    cfg = cfg or TrainConfig()
    g = split.train_graph
    hops = default_hops(g) if hops is None else hops
    emb = embed_ego_nets(g, hops, cfg, walk_length, walks_per_subgraph)
    return rank_links(split, cosine_scorer(emb.vectors))


def precision_at_k(ranked, k: int, hidden) -> float:
    """Fraction of the top ``k`` ranked candidates that are hidden neighbors."""
    if k < 1:
        raise DomainError("k must be >= 1")
    top = list(ranked[:k])
    return sum(1 for u in top if u in hidden) / k


def average_precision(ranked, hidden) -> float:
    hits = 0
    total = 0.0
    for i, u in enumerate(ranked, 1):
        if u in hidden:
            hits += 1
            total += hits / i
    if hits == 0:
        raise DomainError("no hidden neighbor appears in the ranking")
    return total / hits


def map_score(ranking: LinkRanking) -> float:
    q = ranking.queries
    if not q:
        raise DomainError("no query nodes")
    return float(sum(average_precision(ranking.candidates[v], ranking.hidden[v]) for v in q) / len(q))
