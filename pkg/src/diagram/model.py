"""Three-channel shared autoencoder over directed attributed graphs.

Each node u gets three k-dim embeddings:

* ``z`` (content channel): reconstructs the concatenation of u's
  undirected neighborhood row A_u and its feature row D_u,
* ``o`` (out channel): reconstructs the outgoing adjacency row M_u,
* ``i`` (in channel): reconstructs the incoming row (M^T)_u.

All channels share one encoder trunk, one embedding layer, and one
decoder trunk. The content channel owns its input and reconstruction
heads (its width n+d differs); the two directed channels share a single
input head and a single reconstruction head of width n. That sharing is
load-bearing: the edge trainer swaps u's incoming-reconstruction target
for v's actual incoming neighborhood, and only a common directed readout
turns that loss into pressure that moves o_u toward i_v (with separate
heads the decoder can serve the two channels from disjoint latent
subspaces and the learned proximity dot(o_u, i_v) stays at chance).
Gradients from all channels accumulate into every shared layer.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
from dataclasses import dataclass, field

import numpy as np

from . import nn
from .data import DirectedGraph, FeatureMatrix, build_undirected_union, dataset_fingerprint
from .exceptions import EmbeddingFormatError, TrainingError
from .nn import Adam, Linear, dropout_mask, masked_sq_error

CHANNELS = ("content", "out", "in")

DEFAULT_TRUNK = (512, 256)
DEFAULT_EMBEDDING_DIM = 128
DEFAULT_NODE_EPOCHS = 30
DEFAULT_EDGE_EPOCHS_TRANSFER = 2
DEFAULT_EDGE_EPOCHS_SCRATCH = 30


@dataclass
class TrainConfig:
    """Training hyperparameters; ``epochs=None`` picks the variant default."""

    epochs: int | None = None
    batch_size: int = 64
    learning_rate: float = 1e-4
    dropout: float = 0.2
    mu: float = 10.0
    seed: int = 0
    embedding_dim: int = DEFAULT_EMBEDDING_DIM
    trunk_dims: tuple[int, ...] = DEFAULT_TRUNK
    transfer_from: object = None  # path or DiagramModel
    check_finite: bool = False

    def __post_init__(self):
        if self.epochs is not None and self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.batch_size <= 0:
            raise ValueError("batch_size must be positive")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")
        if self.mu <= 1.0:
            raise ValueError("mu must be > 1")
        if self.embedding_dim <= 0 or any(t <= 0 for t in self.trunk_dims):
            raise ValueError("layer dimensions must be positive")

    def as_dict(self) -> dict:
        d = {k: v for k, v in self.__dict__.items() if k != "transfer_from"}
        d["trunk_dims"] = list(self.trunk_dims)
        d["transfer_from"] = (
            str(self.transfer_from) if isinstance(self.transfer_from, (str, os.PathLike))
            else bool(self.transfer_from is not None)
        )
        return d


class DiagramModel:
    """The shared autoencoder: per-channel heads around a common trunk."""

    def __init__(self, node_count: int, feature_dim: int,
                 trunk_dims: tuple[int, ...] = DEFAULT_TRUNK,
                 embedding_dim: int = DEFAULT_EMBEDDING_DIM,
                 rng: np.random.Generator | None = None):
        if node_count <= 0 or feature_dim < 0:
            raise ValueError("need at least one node and a nonnegative feature dim")
        self.node_count = node_count
        self.feature_dim = feature_dim
        self.trunk_dims = tuple(int(t) for t in trunk_dims)
        self.embedding_dim = int(embedding_dim)
        if not self.trunk_dims:
            raise ValueError("trunk_dims must not be empty")

        n, d, k = node_count, feature_dim, self.embedding_dim
        t = self.trunk_dims
        self.channel_dims = {"content": n + d, "out": n, "in": n}

        # Layer creation order is fixed: it defines the rng draw order and
        # therefore the reproducibility of seeded initialization.
        self.heads = {
            "content": Linear(n + d, t[0], "tanh", rng),
            "directed": Linear(n, t[0], "tanh", rng),
        }
        self.encoder_trunk = [Linear(t[i], t[i + 1], "tanh", rng) for i in range(len(t) - 1)]
        self.embed = Linear(t[-1], k, "tanh", rng)
        dec_dims = tuple(reversed(t))
        dims = (k,) + dec_dims
        self.decoder_trunk = [Linear(dims[i], dims[i + 1], "tanh", rng) for i in range(len(dec_dims))]
        self.recon_heads = {
            "content": Linear(t[0], n + d, "tanh", rng),
            "directed": Linear(t[0], n, "tanh", rng),
        }

    @staticmethod
    def _head_key(channel: str) -> str:
        return "content" if channel == "content" else "directed"

    def head_for(self, channel: str) -> Linear:
        return self.heads[self._head_key(channel)]

    def recon_for(self, channel: str) -> Linear:
        return self.recon_heads[self._head_key(channel)]

    def named_layers(self):
        for key in ("content", "directed"):
            yield f"{key}_head", self.heads[key]
        for i, layer in enumerate(self.encoder_trunk):
            yield f"enc_trunk.{i}", layer
        yield "embed", self.embed
        for i, layer in enumerate(self.decoder_trunk):
            yield f"dec_trunk.{i}", layer
        for key in ("content", "directed"):
            yield f"{key}_recon", self.recon_heads[key]

    def parameters(self) -> dict[str, np.ndarray]:
        out = {}
        for name, layer in self.named_layers():
            out[f"{name}.W"] = layer.W
            out[f"{name}.b"] = layer.b
        return out

    def gradients(self) -> dict[str, np.ndarray]:
        out = {}
        for name, layer in self.named_layers():
            out[f"{name}.W"] = layer.grad_W
            out[f"{name}.b"] = layer.grad_b
        return out

    def zero_grad(self) -> None:
        for _, layer in self.named_layers():
            layer.zero_grad()

    def copy(self) -> "DiagramModel":
        clone = DiagramModel(self.node_count, self.feature_dim, self.trunk_dims,
                             self.embedding_dim)
        src, dst = self.parameters(), clone.parameters()
        for name, arr in src.items():
            dst[name][...] = arr
        return clone

    # -- forward / backward ------------------------------------------------

    def _forward(self, channel: str, x: np.ndarray, training: bool,
                 dropout: float, rng: np.random.Generator | None):
        """Run one channel; returns (embedding, reconstruction, backward ctx).

        Dropout is applied to every encoder activation (head output and
        each encoder-trunk output), never to inputs, the embedding, or the
        decoder side.
        """
        if channel not in CHANNELS:
            raise ValueError(f"unknown channel {channel!r}")
        steps = []

        def run(layer, h, with_dropout):
            out, cache = layer.forward(h)
            mask = None
            if with_dropout and training and dropout > 0.0:
                mask = dropout_mask(out.shape, dropout, rng)
                out = out * mask
            steps.append((layer, cache, mask))
            return out

        h = run(self.head_for(channel), np.asarray(x, dtype=np.float64), True)
        for layer in self.encoder_trunk:
            h = run(layer, h, True)
        emb = run(self.embed, h, False)
        h = emb
        for layer in self.decoder_trunk:
            h = run(layer, h, False)
        recon = run(self.recon_for(channel), h, False)
        return emb, recon, steps

    def _backward(self, steps, d_recon: np.ndarray) -> np.ndarray:
        d = d_recon
        for layer, cache, mask in reversed(steps):
            if mask is not None:
                d = d * mask
            d = layer.backward(cache, d)
        return d

    def channel_forward(self, channel: str, x: np.ndarray, training: bool = False,
                        dropout: float = 0.0, rng: np.random.Generator | None = None):
        """Embedding and reconstruction batches for one channel."""
        emb, recon, _ = self._forward(channel, x, training, dropout, rng)
        return emb, recon


@dataclass
class EmbeddingSet:
    """Per-node embedding triple (z, o, i), each of shape (n, k)."""

    z: np.ndarray
    o: np.ndarray
    i: np.ndarray
    node_ids: list[str]
    variant: str = "node"
    fingerprint: str = ""

    def __post_init__(self):
        shapes = {self.z.shape, self.o.shape, self.i.shape}
        if len(shapes) != 1 or self.z.shape[0] != len(self.node_ids):
            raise ValueError("embedding matrices must share shape (n, k)")

    @property
    def n(self) -> int:
        return self.z.shape[0]

    @property
    def k(self) -> int:
        return self.z.shape[1]


# -- loss assembly ----------------------------------------------------------


def penalty_weights(target: np.ndarray, mu: float) -> np.ndarray:
    """Per-coordinate weights: mu on the target's support, 1 elsewhere."""
    return np.where(target > 0, float(mu), 1.0)


@dataclass
class _ChannelBatch:
    x: np.ndarray
    target: np.ndarray
    weight: np.ndarray
    # Optional second loss term on a row slice of the same reconstruction:
    # (row slice, target, weight). Used by the edge model's adjusted term.
    extra: tuple | None = None


def _node_batches(idx, M, MT, A, D) -> dict[str, _ChannelBatch]:
    idx = np.asarray(idx, dtype=np.int64)
    a = np.asarray(A[idx].todense(), dtype=np.float64)
    dd = np.asarray(D[idx].todense(), dtype=np.float64)
    content = np.hstack([a, dd])
    out = np.asarray(M[idx].todense(), dtype=np.float64)
    inc = np.asarray(MT[idx].todense(), dtype=np.float64)
    return {
        "content": _ChannelBatch(content, content, None),
        "out": _ChannelBatch(out, out, None),
        "in": _ChannelBatch(inc, inc, None),
    }


def _edge_batches(u_idx, v_idx, M, MT, A, D) -> dict[str, _ChannelBatch]:
    """Batched edge-model targets for edges (u, v).

    Content and out channels run on [u; v]; the in channel runs on v only.
    The u rows of the out channel carry the adjusted extra term against
    v's incoming neighborhood (M^T)_v.
    """
    u_idx = np.asarray(u_idx, dtype=np.int64)
    v_idx = np.asarray(v_idx, dtype=np.int64)
    both = np.concatenate([u_idx, v_idx])
    a = np.asarray(A[both].todense(), dtype=np.float64)
    dd = np.asarray(D[both].todense(), dtype=np.float64)
    content = np.hstack([a, dd])
    out = np.asarray(M[both].todense(), dtype=np.float64)
    in_v = np.asarray(MT[v_idx].todense(), dtype=np.float64)
    batches = {
        "content": _ChannelBatch(content, content, None),
        "out": _ChannelBatch(out, out, None, extra=(slice(0, len(u_idx)), in_v, None)),
        "in": _ChannelBatch(in_v, in_v, None),
    }
    return batches


def _run_batches(model: DiagramModel, batches: dict[str, _ChannelBatch], mu: float,
                 training: bool = False, dropout: float = 0.0,
                 rng: np.random.Generator | None = None,
                 with_grad: bool = False) -> float:
    total = 0.0
    for channel in CHANNELS:  # fixed order keeps rng consumption reproducible
        cb = batches.get(channel)
        if cb is None:
            continue
        weight = cb.weight if cb.weight is not None else penalty_weights(cb.target, mu)
        emb, recon, steps = model._forward(channel, cb.x, training, dropout, rng)
        loss, grad = masked_sq_error(recon, cb.target, weight)
        if cb.extra is not None:
            rows, target2, weight2 = cb.extra
            if weight2 is None:
                weight2 = penalty_weights(target2, mu)
            extra_loss, extra_grad = masked_sq_error(recon[rows], target2, weight2)
            loss += extra_loss
            if with_grad:
                grad[rows] += extra_grad
        total += loss
        if with_grad:
            model._backward(steps, grad)
    return total


def node_loss(model: DiagramModel, nodes, M, A, D, mu: float = 10.0) -> float:
    """Sum of the three per-channel reconstruction losses over a node batch."""
    MT = M.T.tocsr()
    return _run_batches(model, _node_batches(nodes, M, MT, A, D), mu)


def edge_loss(model: DiagramModel, edge, M, A, D, mu: float = 10.0,
              adjusted: bool = True) -> float:
    """Edge-model loss for one directed edge (u, v).

    Both endpoints contribute their full node losses, except that with
    ``adjusted=True`` (the edge model proper) u's incoming-reconstruction
    term is replaced by comparing u's out-channel reconstruction against
    v's actual incoming neighborhood. With ``adjusted=False`` this is
    exactly node_loss(u) + node_loss(v).
    """
    u, v = int(edge[0]), int(edge[1])
    if M[u, v] == 0:
        raise TrainingError(f"edge ({u}, {v}) not present in graph")
    MT = M.T.tocsr()
    if adjusted:
        in_v = np.asarray(MT[[v]].todense(), dtype=np.float64)
        u_batches = _node_batches([u], M, MT, A, D)
        u_batches["out"].extra = (slice(0, 1), in_v, None)
        del u_batches["in"]
    else:
        u_batches = _node_batches([u], M, MT, A, D)
    loss_u = _run_batches(model, u_batches, mu)
    loss_v = _run_batches(model, _node_batches([v], M, MT, A, D), mu)
    return loss_u + loss_v


# -- training ---------------------------------------------------------------


@dataclass
class TrainResult:
    model: DiagramModel
    embeddings: EmbeddingSet
    loss_trace: list[float]
    variant: str
    config: dict = field(default_factory=dict)


def _check_params_finite(model, epoch, batch):
    for name, arr in model.parameters().items():
        if not np.all(np.isfinite(arr)):
            raise TrainingError(
                f"non-finite parameter {name!r} after epoch {epoch} batch {batch}"
            )


def _graph_tensors(graph: DirectedGraph, features: FeatureMatrix):
    if features.node_count != graph.node_count:
        raise TrainingError(
            f"feature rows ({features.node_count}) != nodes ({graph.node_count})"
        )
    return (graph.out_adjacency, graph.in_adjacency,
            build_undirected_union(graph), features.values)


def compute_embeddings(model: DiagramModel, graph: DirectedGraph,
                       features: FeatureMatrix, variant: str,
                       chunk: int = 256) -> EmbeddingSet:
    """Inference-mode embeddings for every node (no dropout)."""
    M, MT, A, D = _graph_tensors(graph, features)
    n, k = graph.node_count, model.embedding_dim
    z = np.empty((n, k))
    o = np.empty((n, k))
    i = np.empty((n, k))
    for start in range(0, n, chunk):
        idx = np.arange(start, min(start + chunk, n))
        batches = _node_batches(idx, M, MT, A, D)
        z[idx], _ = model.channel_forward("content", batches["content"].x)
        o[idx], _ = model.channel_forward("out", batches["out"].x)
        i[idx], _ = model.channel_forward("in", batches["in"].x)
    return EmbeddingSet(z, o, i, list(graph.node_ids), variant,
                        dataset_fingerprint(graph, features))


def train_node_model(graph: DirectedGraph, features: FeatureMatrix,
                     cfg: TrainConfig) -> TrainResult:
    """Mini-batch training over nodes; returns model, embeddings, loss trace."""
    M, MT, A, D = _graph_tensors(graph, features)
    n = graph.node_count
    rng = np.random.default_rng(cfg.seed)
    model = DiagramModel(n, features.dim, cfg.trunk_dims, cfg.embedding_dim, rng)
    opt = Adam(cfg.learning_rate)
    epochs = DEFAULT_NODE_EPOCHS if cfg.epochs is None else cfg.epochs
    trace = []
    for epoch in range(1, epochs + 1):
        order = rng.permutation(n)
        total = 0.0
        for b, start in enumerate(range(0, n, cfg.batch_size)):
            idx = order[start:start + cfg.batch_size]
            model.zero_grad()
            batches = _node_batches(idx, M, MT, A, D)
            loss = _run_batches(model, batches, cfg.mu, training=True,
                                dropout=cfg.dropout, rng=rng, with_grad=True)
            if not np.isfinite(loss):
                raise TrainingError(f"non-finite loss at epoch {epoch}, batch {b}")
            opt.step(model.parameters(), model.gradients())
            if cfg.check_finite:
                _check_params_finite(model, epoch, b)
            total += loss
        trace.append(total / n)
    emb = compute_embeddings(model, graph, features, "node")
    return TrainResult(model, emb, trace, "node", cfg.as_dict())


def _resolve_transfer(cfg: TrainConfig, graph, features):
    src = cfg.transfer_from
    if isinstance(src, DiagramModel):
        base = src.copy()
    else:
        base, _meta = load_model(src)
    expected = (graph.node_count, features.dim, tuple(cfg.trunk_dims), cfg.embedding_dim)
    got = (base.node_count, base.feature_dim, base.trunk_dims, base.embedding_dim)
    if expected != got:
        raise TrainingError(
            f"transfer checkpoint architecture {got} does not match "
            f"requested {expected}"
        )
    return base


def train_edge_model(graph: DirectedGraph, features: FeatureMatrix,
                     cfg: TrainConfig) -> TrainResult:
    """Edge-iteration training with the adjusted incoming-target trick.

    With ``cfg.transfer_from`` set, parameters start from the given node
    checkpoint and two epochs suffice; from scratch the default is 30.
    """
    M, MT, A, D = _graph_tensors(graph, features)
    edges = graph.edge_list
    m = edges.shape[0]
    if m == 0:
        raise TrainingError("edge model needs at least one edge")
    rng = np.random.default_rng(cfg.seed)
    if cfg.transfer_from is not None:
        model = _resolve_transfer(cfg, graph, features)
        epochs = DEFAULT_EDGE_EPOCHS_TRANSFER if cfg.epochs is None else cfg.epochs
    else:
        model = DiagramModel(graph.node_count, features.dim, cfg.trunk_dims,
                             cfg.embedding_dim, rng)
        epochs = DEFAULT_EDGE_EPOCHS_SCRATCH if cfg.epochs is None else cfg.epochs
    opt = Adam(cfg.learning_rate)
    trace = []
    for epoch in range(1, epochs + 1):
        order = rng.permutation(m)
        total = 0.0
        for b, start in enumerate(range(0, m, cfg.batch_size)):
            rows = edges[order[start:start + cfg.batch_size]]
            model.zero_grad()
            batches = _edge_batches(rows[:, 0], rows[:, 1], M, MT, A, D)
            loss = _run_batches(model, batches, cfg.mu, training=True,
                                dropout=cfg.dropout, rng=rng, with_grad=True)
            if not np.isfinite(loss):
                raise TrainingError(f"non-finite loss at epoch {epoch}, batch {b}")
            opt.step(model.parameters(), model.gradients())
            if cfg.check_finite:
                _check_params_finite(model, epoch, b)
            total += loss
        trace.append(total / m)
    emb = compute_embeddings(model, graph, features, "edge")
    return TrainResult(model, emb, trace, "edge", cfg.as_dict())


def mean_edge_loss(model: DiagramModel, graph: DirectedGraph,
                   features: FeatureMatrix, mu: float = 10.0,
                   batch_size: int = 256) -> float:
    """Inference-mode edge-model loss averaged over all directed edges."""
    M, MT, A, D = _graph_tensors(graph, features)
    edges = graph.edge_list
    total = 0.0
    for start in range(0, edges.shape[0], batch_size):
        rows = edges[start:start + batch_size]
        batches = _edge_batches(rows[:, 0], rows[:, 1], M, MT, A, D)
        total += _run_batches(model, batches, mu)
    return total / edges.shape[0]


# -- model checkpoints -------------------------------------------------------


def save_model(path, model: DiagramModel, meta: dict | None = None) -> None:
    header = {
        "kind": "diagram-model",
        "node_count": model.node_count,
        "feature_dim": model.feature_dim,
        "trunk_dims": list(model.trunk_dims),
        "embedding_dim": model.embedding_dim,
    }
    header.update(meta or {})
    nn.save_checkpoint(path, model.parameters(), header)


def load_model(path):
    tensors, meta = nn.load_checkpoint(path)
    if meta.get("kind") != "diagram-model":
        raise EmbeddingFormatError(f"{path} is not a model checkpoint")
    model = DiagramModel(meta["node_count"], meta["feature_dim"],
                         tuple(meta["trunk_dims"]), meta["embedding_dim"])
    params = model.parameters()
    if set(params) != set(tensors):
        raise EmbeddingFormatError(f"{path}: tensor names do not match architecture")
    for name, arr in tensors.items():
        if params[name].shape != arr.shape:
            raise EmbeddingFormatError(f"{path}: shape mismatch for {name}")
        params[name][...] = arr
    return model, meta


# -- embedding files ---------------------------------------------------------

_TEXT_MAGIC = "DIAGRAM v1"
_BIN_MAGIC = b"DGRMEMB1"


def _atomic_write(path, payload: bytes) -> None:
    path = os.fspath(path)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(path) or ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def export_embeddings(emb: EmbeddingSet, path, fmt: str = "text") -> None:
    """Write an embedding set; ``fmt`` is "text" or "binary".

    Text: header ``DIAGRAM v1 <n> <k> <variant> <fingerprint>`` followed by
    one ``<id> <z..> <o..> <i..>`` line per node (full float64 precision).
    Binary: magic + length-prefixed JSON header + raw little-endian
    float64 blocks for z, o, i (bit-exact round-trip).
    """
    if fmt == "text":
        fp = emb.fingerprint or "-"
        lines = [f"{_TEXT_MAGIC} {emb.n} {emb.k} {emb.variant} {fp}"]
        for r, nid in enumerate(emb.node_ids):
            vals = np.concatenate([emb.z[r], emb.o[r], emb.i[r]])
            lines.append(nid + " " + " ".join(f"{v:.17g}" for v in vals))
        _atomic_write(path, ("\n".join(lines) + "\n").encode("utf-8"))
    elif fmt == "binary":
        header = json.dumps({
            "n": emb.n, "k": emb.k, "variant": emb.variant,
            "fingerprint": emb.fingerprint, "node_ids": emb.node_ids,
        }, sort_keys=True).encode("utf-8")
        blocks = [struct.pack("<Q", len(header)), header]
        for mat in (emb.z, emb.o, emb.i):
            raw = np.ascontiguousarray(mat, dtype="<f8").tobytes()
            blocks.append(struct.pack("<Q", len(raw)))
            blocks.append(raw)
        _atomic_write(path, _BIN_MAGIC + b"".join(blocks))
    else:
        raise ValueError(f"unknown embedding format {fmt!r}")


def _import_text(text: str, path) -> EmbeddingSet:
    lines = text.splitlines()
    if not lines:
        raise EmbeddingFormatError(f"{path}: empty embedding file")
    head = lines[0].split()
    if len(head) < 6 or " ".join(head[:2]) != _TEXT_MAGIC:
        raise EmbeddingFormatError(f"{path}: bad header {lines[0]!r}")
    n, k = int(head[2]), int(head[3])
    variant, fingerprint = head[4], head[5]
    if fingerprint == "-":
        fingerprint = ""
    body = [ln for ln in lines[1:] if ln.strip()]
    if len(body) != n:
        raise EmbeddingFormatError(f"{path}: expected {n} rows, found {len(body)}")
    ids = []
    z = np.empty((n, k))
    o = np.empty((n, k))
    i = np.empty((n, k))
    for r, ln in enumerate(body):
        parts = ln.split()
        if len(parts) != 1 + 3 * k:
            raise EmbeddingFormatError(
                f"{path}: row {r} has {len(parts) - 1} values, header says k={k}"
            )
        ids.append(parts[0])
        vals = np.array([float(tok) for tok in parts[1:]])
        z[r], o[r], i[r] = vals[:k], vals[k:2 * k], vals[2 * k:]
    return EmbeddingSet(z, o, i, ids, variant, fingerprint)


def _import_binary(raw: bytes, path) -> EmbeddingSet:
    def take(buf, off, size):
        if off + size > len(buf):
            raise EmbeddingFormatError(f"{path}: truncated embedding file")
        return buf[off:off + size], off + size

    off = len(_BIN_MAGIC)
    chunk, off = take(raw, off, 8)
    hlen = struct.unpack("<Q", chunk)[0]
    chunk, off = take(raw, off, hlen)
    header = json.loads(chunk.decode("utf-8"))
    n, k = header["n"], header["k"]
    mats = []
    for _ in range(3):
        chunk, off = take(raw, off, 8)
        blen = struct.unpack("<Q", chunk)[0]
        if blen != n * k * 8:
            raise EmbeddingFormatError(
                f"{path}: block length {blen} inconsistent with n={n}, k={k}"
            )
        chunk, off = take(raw, off, blen)
        mats.append(np.frombuffer(chunk, dtype="<f8").reshape(n, k).copy())
    return EmbeddingSet(mats[0], mats[1], mats[2], list(header["node_ids"]),
                        header["variant"], header.get("fingerprint", ""))


def import_embeddings(path) -> EmbeddingSet:
    """Read an embedding set written by :func:`export_embeddings`."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw.startswith(_BIN_MAGIC):
        return _import_binary(raw, path)
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise EmbeddingFormatError(f"{path}: not a recognized embedding file") from exc
    return _import_text(text, path)
