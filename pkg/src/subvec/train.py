"""Subgraph vectors trained with negative sampling under the DBON and DM objectives.

DBON pairs every walk token with its subgraph vector alone (skip-gram style).
DM predicts each token from its subgraph vector combined with the node
vectors of the surrounding window (CBOW style), either averaged or
concatenated.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from . import _kernels as K
from .errors import DomainError, FormatError, InvariantError
from .walks import WalkCorpus

log = logging.getLogger(__name__)

MODES = ("dbon", "dm")
COMBINERS = ("avg", "concat")
NOISE_POWER = 0.75


@dataclass(frozen=True)
class TrainConfig:
    dim: int = 128
    window: int = 5
    negatives: int = 5
    epochs: int = 10
    lr0: float = 0.025
    lr_min: float = 1e-4
    mode: str = "dbon"
    combiner: str = "avg"
    symmetric: bool = True
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.dim < 1:
            raise DomainError("dim must be >= 1")
        if self.window < 1:
            raise DomainError("window must be >= 1")
        if self.negatives < 1:
            raise DomainError("negatives must be >= 1")
        if self.epochs < 0:
            raise DomainError("epochs must be >= 0")
        if not self.lr0 > self.lr_min > 0:
            raise DomainError("learning rates must satisfy lr0 > lr_min > 0")
        if self.mode not in MODES:
            raise DomainError(f"mode must be one of {MODES}")
        if self.combiner not in COMBINERS:
            raise DomainError(f"combiner must be one of {COMBINERS}")
        if self.combiner == "concat" and self.mode != "dm":
            raise DomainError("the concat combiner only applies to DM")
        if self.workers < 1:
            raise DomainError("workers must be >= 1")

    @property
    def concat(self) -> bool:
        return self.mode == "dm" and self.combiner == "concat"

    @property
    def output_width(self) -> int:
        # concat feeds the subgraph vector plus `window` preceding node vectors
        return self.dim * (self.window + 1) if self.concat else self.dim


@dataclass(eq=False)
class EmbeddingModel:
    S: np.ndarray  # subgraph vectors, one row per sid
    M: np.ndarray  # node input vectors, rows follow node_ids
    U: np.ndarray  # node output vectors
    config: TrainConfig
    node_ids: np.ndarray  # sorted host ids of the node vocabulary
    names: list[str] = field(default_factory=list)
    node_labels: list[str] = field(default_factory=list)
    epoch_losses: list[float] = field(default_factory=list)

    def vector(self, sid: int) -> np.ndarray:
        return self.S[sid]

    def node_row(self, node: int) -> int:
        i = int(np.searchsorted(self.node_ids, node))
        if i >= len(self.node_ids) or self.node_ids[i] != node:
            raise DomainError(f"node {node} is not in the model vocabulary")
        return i

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.S).all() and np.isfinite(self.M).all()
                    and np.isfinite(self.U).all())


@dataclass(frozen=True)
class TrainingPair:
    sid: int
    target: int  # model row index of the predicted node
    context: tuple = ()  # model row indices of the window (DM only)
    mode: str = "dbon"


def sigmoid(x):
    """Logistic function with its input clamped to [-6, 6]."""
    x = np.clip(x, -K.MAX_EXP, K.MAX_EXP)
    return 1.0 / (1.0 + np.exp(-x))


def cosine(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.clip(a @ b / (na * nb), -1.0, 1.0))


class NoiseTable:
    """Negative-sampling distribution: unigram counts raised to 0.75."""

    def __init__(self, counts, power: float = NOISE_POWER):
        counts = np.asarray(counts, dtype=float)
        if counts.sum() <= 0:
            raise DomainError("noise table needs at least one observed token")
        weights = counts ** power
        self.probs = weights / weights.sum()
        self.cdf = np.cumsum(self.probs)
        self.cdf[-1] = 1.0

    def __len__(self):
        return len(self.probs)

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        idx = np.searchsorted(self.cdf, rng.random(size), side="right")
        return np.minimum(idx, len(self.cdf) - 1)


def build_noise_table(corpus: WalkCorpus) -> NoiseTable:
    if corpus.token_count == 0:
        raise DomainError("corpus is empty")
    return NoiseTable(corpus.frequencies())


def _targets(pair: TrainingPair, negatives) -> np.ndarray:
    return np.concatenate([[pair.target], np.asarray(negatives, dtype=np.int64)]).astype(np.int64)


def dbon_step(model: EmbeddingModel, pair: TrainingPair, lr: float, negatives=()) -> float:
    """One DBON update on ``(pair.sid -> pair.target)``; returns the loss before the step."""
    if pair.mode != "dbon":
        raise DomainError("dbon_step needs a DBON pair")
    targets = _targets(pair, negatives)
    g = np.empty(len(targets))
    grad = np.empty(model.U.shape[1])
    return float(K.dbon_update(model.S, model.U, pair.sid, targets, float(lr), g, grad))


def dm_step(model: EmbeddingModel, pair: TrainingPair, lr: float, negatives=()) -> float:
    """One DM update predicting ``pair.target`` from ``pair.context`` and ``pair.sid``."""
    if pair.mode != "dm":
        raise DomainError("dm_step needs a DM pair")
    if len(pair.context) == 0:
        raise DomainError("DM pair needs a nonempty context window")
    concat = model.config.concat
    if concat and len(pair.context) != model.config.window:
        raise DomainError(f"concat DM needs exactly {model.config.window} context nodes")
    targets = _targets(pair, negatives)
    width = model.U.shape[1]
    ctx = np.asarray(pair.context, dtype=np.int64)
    return float(K.dm_update(model.S, model.M, model.U, pair.sid, ctx, concat, targets,
                             float(lr), np.empty(len(targets)), np.empty(width), np.empty(width)))


def dm_input(model: EmbeddingModel, sid: int, context: Sequence[int]) -> np.ndarray:
    """The combined DM input vector for a subgraph and its context window."""
    ctx = model.M[np.asarray(context, dtype=np.int64)]
    if model.config.concat:
        return np.concatenate([model.S[sid], ctx.ravel()])
    return 0.5 * (ctx.mean(axis=0) + model.S[sid])


def init_model(corpus: WalkCorpus, cfg: TrainConfig) -> EmbeddingModel:
    rng = np.random.default_rng(cfg.seed)
    d = cfg.dim
    n_nodes = len(corpus.vocab)
    S = rng.uniform(-0.5 / d, 0.5 / d, size=(corpus.n_subgraphs, d))
    M = rng.uniform(-0.5 / d, 0.5 / d, size=(n_nodes, d))
    U = np.zeros((n_nodes, cfg.output_width))
    names = list(corpus.names) if corpus.names else [str(i) for i in range(corpus.n_subgraphs)]
    labels = ([corpus.labels[v] for v in corpus.vocab] if corpus.labels
              else [str(v) for v in corpus.vocab])
    return EmbeddingModel(S, M, U, cfg, corpus.vocab.copy(), names, labels)


def train(corpus: WalkCorpus, cfg: TrainConfig | None = None) -> EmbeddingModel:
    """Run SGD over every window of every walk for ``cfg.epochs`` passes.

    The learning rate decays linearly from ``lr0`` to ``lr_min`` across all
    scheduled positions.  With ``workers == 1`` results are bit-reproducible;
    with more workers updates race on shared rows and only the statistics
    are reproducible.
    """
    cfg = cfg or TrainConfig()
    if len(corpus) == 0 or corpus.token_count == 0:
        raise DomainError("cannot train on an empty corpus")
    model = init_model(corpus, cfg)
    if cfg.epochs == 0:
        return model
    tokens, offsets, sids = corpus.arrays()
    local = np.searchsorted(corpus.vocab, tokens).astype(np.int64)
    cdf = build_noise_table(corpus).cdf
    mode = K.DM if cfg.mode == "dm" else K.DBON
    total = float(cfg.epochs * len(tokens))
    seed = np.uint64(cfg.seed & 0xFFFFFFFFFFFFFFFF)
    losses = np.zeros(len(sids))
    counts = np.zeros(len(sids), dtype=np.int64)
    if cfg.workers > 1:
        from numba import set_num_threads
        set_num_threads(min(cfg.workers, _max_threads()))
        epoch_fn = K.train_epoch_parallel
    else:
        epoch_fn = K.train_epoch_serial
    for epoch in range(cfg.epochs):
        epoch_fn(mode, cfg.concat, cfg.symmetric, local, offsets, sids, model.S, model.M,
                 model.U, cdf, cfg.negatives, cfg.window, cfg.lr0, cfg.lr_min, epoch,
                 total, seed, losses, counts)
        if not model.is_finite():
            raise InvariantError(f"non-finite model entries after epoch {epoch}")
        n = counts.sum()
        model.epoch_losses.append(float(losses.sum() / n) if n else 0.0)
        log.debug("epoch %d mean loss %.6f", epoch, model.epoch_losses[-1])
    return model


def _max_threads() -> int:
    import numba
    return numba.config.NUMBA_NUM_THREADS


# -- text model files -------------------------------------------------------

def write_matrix(path, ids: Sequence[str], X: np.ndarray) -> None:
    with open(path, "w") as fh:
        fh.write(f"{X.shape[0]} {X.shape[1]}\n")
        for name, row in zip(ids, X):
            fh.write(name + " " + " ".join(repr(float(v)) for v in row) + "\n")


def read_matrix(path) -> tuple[list[str], np.ndarray]:
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise FormatError("header must be 'count dim'", 1)
        try:
            count, dim = int(header[0]), int(header[1])
        except ValueError:
            raise FormatError("header must hold two integers", 1) from None
        ids, X = [], np.empty((count, dim))
        for lineno, line in enumerate(fh, 2):
            toks = line.split()
            if not toks:
                continue
            if len(ids) >= count:
                raise FormatError(f"more than {count} rows", lineno)
            if len(toks) != dim + 1:
                raise FormatError(f"expected id plus {dim} values, got {len(toks)} tokens", lineno)
            try:
                X[len(ids)] = [float(t) for t in toks[1:]]
            except ValueError:
                raise FormatError("non-numeric value", lineno) from None
            ids.append(toks[0])
    if len(ids) != count:
        raise FormatError(f"header promises {count} rows, found {len(ids)}")
    return ids, X


def model_paths(path) -> dict[str, str]:
    path = str(path)
    return {"S": path, "M": path + ".nodes", "U": path + ".out", "meta": path + ".json"}


def save_model(model: EmbeddingModel, path, extra_meta: dict | None = None) -> dict[str, str]:
    """Write subgraph vectors to ``path`` plus node/output matrices and metadata."""
    paths = model_paths(path)
    write_matrix(paths["S"], model.names, model.S)
    write_matrix(paths["M"], model.node_labels, model.M)
    write_matrix(paths["U"], model.node_labels, model.U)
    meta = {"config": asdict(model.config), "node_ids": [int(v) for v in model.node_ids],
            "epoch_losses": model.epoch_losses}
    meta.update(extra_meta or {})
    with open(paths["meta"], "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
    return paths


def load_model(path) -> EmbeddingModel:
    paths = model_paths(path)
    names, S = read_matrix(paths["S"])
    labels, M = read_matrix(paths["M"])
    labels_u, U = read_matrix(paths["U"])
    if labels_u != labels:
        raise FormatError("node and output matrices list different nodes")
    with open(paths["meta"]) as fh:
        meta = json.load(fh)
    cfg = TrainConfig(**meta["config"])
    if S.shape[1] != cfg.dim or U.shape[1] != cfg.output_width:
        raise FormatError("matrix widths disagree with the stored config")
    return EmbeddingModel(S, M, U, cfg, np.asarray(meta["node_ids"], dtype=np.int64), names,
                          labels, list(meta.get("epoch_losses", [])))
