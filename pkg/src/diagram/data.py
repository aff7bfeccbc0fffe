"""Citation-network ingestion: directed graphs, node features, labels.

Datasets follow the common two-file layout: a ``.content`` file with one
row per node (``<id> <f_1 .. f_d> <label>``) and a ``.cites`` file with
one row per citation (``<cited_id> <citing_id>``). Citation rows are
normalized to citing->cited edges; the convention is recorded in the
graph metadata so downstream direction-sensitive results are unambiguous.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .exceptions import DatasetError

# Fields are split on ASCII whitespace only; ids are opaque strings.
_WS = re.compile(r"[ \t\r\n\x0b\x0c]+")

EDGE_DIRECTION = "citing->cited"


def _split(line: str) -> list[str]:
    return [tok for tok in _WS.split(line) if tok]


class DirectedGraph:
    """A directed graph with a sparse out-adjacency matrix and its transpose.

    Parameters
    ----------
    node_ids : list of str
        External id for each dense node index.
    edges : array-like of shape (m, 2)
        Directed edges as (source, target) dense-index pairs, already
        deduplicated.
    metadata : dict, optional
        Provenance notes (edge direction convention, drop counts, ...).
    """

    def __init__(self, node_ids, edges, metadata=None):
        self.node_ids = list(node_ids)
        n = len(self.node_ids)
        if n == 0:
            raise DatasetError("graph has no nodes")
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        self.edge_list = edges
        m = edges.shape[0]
        data = np.ones(m, dtype=np.float64)
        self.out_adjacency = sp.csr_matrix(
            (data, (edges[:, 0], edges[:, 1])), shape=(n, n)
        )
        if self.out_adjacency.nnz != m:
            raise DatasetError("duplicate directed edges in edge list")
        self.in_adjacency = self.out_adjacency.T.tocsr()
        self.id_to_index = {nid: i for i, nid in enumerate(self.node_ids)}
        if len(self.id_to_index) != n:
            raise DatasetError("duplicate node ids")
        self.metadata = dict(metadata or {})

    @property
    def node_count(self) -> int:
        return len(self.node_ids)

    @property
    def edge_count(self) -> int:
        return self.edge_list.shape[0]

    def out_rows(self, idx) -> np.ndarray:
        """Dense rows of M (outgoing neighborhoods) for the given indices."""
        return np.asarray(self.out_adjacency[idx].todense(), dtype=np.float64)

    def in_rows(self, idx) -> np.ndarray:
        """Dense rows of M^T (incoming neighborhoods) for the given indices."""
        return np.asarray(self.in_adjacency[idx].todense(), dtype=np.float64)

    def has_edge(self, u: int, v: int) -> bool:
        return bool(self.out_adjacency[u, v] != 0)

    def transpose(self) -> "DirectedGraph":
        """Graph with every edge reversed (shares node ids)."""
        rev = self.edge_list[:, ::-1].copy()
        return DirectedGraph(self.node_ids, rev, dict(self.metadata))

    def validate(self) -> None:
        """Check structural invariants; raises DatasetError on violation."""
        m = self.out_adjacency
        if self.edge_list.shape[0] != m.nnz:
            raise DatasetError("edge list length disagrees with stored nonzeros")
        if m.nnz and m.data.min() < 0:
            raise DatasetError("negative adjacency entries")
        if (abs(m.T - self.in_adjacency)).nnz != 0:
            raise DatasetError("transpose view out of sync with adjacency")


@dataclass
class FeatureMatrix:
    """Node-content matrix (n x d), binary 0/1, raw counts, or TF-IDF."""

    values: sp.csr_matrix
    mode: str  # "binary" | "count" | "tfidf"
    vocabulary: list[str] = field(default_factory=list)
    all_zero: bool = False

    def __post_init__(self):
        self.values = self.values.tocsr()
        self.values.eliminate_zeros()
        if self.mode not in ("binary", "count", "tfidf"):
            raise DatasetError(f"unknown feature mode {self.mode!r}")
        if self.values.nnz:
            if self.values.data.min() < 0:
                raise DatasetError("negative feature values")
            if self.mode == "binary" and not np.all(self.values.data == 1.0):
                raise DatasetError("binary feature matrix has non-unit entries")
        if not self.vocabulary:
            self.vocabulary = [f"w{j}" for j in range(self.values.shape[1])]

    @property
    def node_count(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    def rows(self, idx) -> np.ndarray:
        return np.asarray(self.values[idx].todense(), dtype=np.float64)


@dataclass
class LabelVector:
    """One class label per node, encoded as ints over ordered class names."""

    labels: np.ndarray
    class_names: list[str]

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        k = len(self.class_names)
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= k):
            raise DatasetError("label index outside class range")

    @property
    def n_classes(self) -> int:
        return len(self.class_names)


def _parse_content(content_path: Path):
    ids: list[str] = []
    label_strs: list[str] = []
    rows, cols, vals = [], [], []
    width = None
    seen: dict[str, int] = {}
    with open(content_path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            fields = _split(raw)
            if not fields:
                continue
            if len(fields) < 2:
                raise DatasetError(
                    f"{content_path}:{lineno}: expected '<id> <features..> <label>', "
                    f"got {len(fields)} fields"
                )
            nid, feats, label = fields[0], fields[1:-1], fields[-1]
            if width is None:
                width = len(feats)
            elif len(feats) != width:
                raise DatasetError(
                    f"{content_path}:{lineno}: inconsistent feature width "
                    f"(expected {width}, got {len(feats)})"
                )
            if nid in seen:
                raise DatasetError(
                    f"{content_path}:{lineno}: duplicate node id {nid!r} "
                    f"(first seen at line {seen[nid]})"
                )
            seen[nid] = lineno
            row = len(ids)
            for j, tok in enumerate(feats):
                try:
                    v = float(tok)
                except ValueError as exc:
                    raise DatasetError(
                        f"{content_path}:{lineno}: non-numeric feature {tok!r}"
                    ) from exc
                if v != 0.0:
                    rows.append(row)
                    cols.append(j)
                    vals.append(v)
            ids.append(nid)
            label_strs.append(label)
    if not ids:
        raise DatasetError(f"{content_path}: empty dataset")
    d = width or 0
    mat = sp.csr_matrix(
        (np.asarray(vals, dtype=np.float64), (rows, cols)), shape=(len(ids), d)
    )
    return ids, mat, label_strs


def _parse_cites(cites_path: Path, id_to_index: dict[str, int]):
    edges: list[tuple[int, int]] = []
    seen: set[tuple[int, int]] = set()
    dropped = dup = self_loops = 0
    with open(cites_path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            fields = _split(raw)
            if not fields:
                continue
            if len(fields) != 2:
                raise DatasetError(
                    f"{cites_path}:{lineno}: expected '<cited_id> <citing_id>', "
                    f"got {len(fields)} fields"
                )
            cited, citing = fields
            if cited not in id_to_index or citing not in id_to_index:
                dropped += 1
                continue
            u, v = id_to_index[citing], id_to_index[cited]
            if (u, v) in seen:
                dup += 1
                continue
            seen.add((u, v))
            edges.append((u, v))
            if u == v:
                self_loops += 1
    return edges, dropped, dup, self_loops


def load_citation_dataset(content_path, cites_path):
    """Load a ``.content``/``.cites`` dataset.

    Returns
    -------
    (DirectedGraph, FeatureMatrix, LabelVector)
        Edges are oriented citing->cited. Citation rows referencing ids
        absent from the content file are dropped (counted in metadata),
        as are duplicate directed edges. Self-citations are preserved.
    """
    content_path = Path(content_path)
    cites_path = Path(cites_path)
    ids, mat, label_strs = _parse_content(content_path)
    id_to_index = {nid: i for i, nid in enumerate(ids)}
    edges, dropped, dup, self_loops = _parse_cites(cites_path, id_to_index)
    metadata = {
        "edge_direction": EDGE_DIRECTION,
        "dropped_unknown_id_edges": dropped,
        "deduplicated_edges": dup,
        "self_loops": self_loops,
        "content_file": str(content_path),
        "cites_file": str(cites_path),
    }
    graph = DirectedGraph(ids, np.asarray(edges, dtype=np.int64).reshape(-1, 2), metadata)
    graph.validate()

    binary = mat.nnz == 0 or bool(np.all(mat.data == 1.0))
    features = FeatureMatrix(mat, mode="binary" if binary else "count")

    class_names = sorted(set(label_strs))
    name_to_idx = {c: i for i, c in enumerate(class_names)}
    labels = LabelVector(
        np.array([name_to_idx[s] for s in label_strs], dtype=np.int64), class_names
    )
    return graph, features, labels


def build_undirected_union(graph: DirectedGraph) -> sp.csr_matrix:
    """Symmetric binary union A of the adjacency pattern of M and M^T.

    A[u, v] = 1 wherever M[u, v] or M[v, u] is nonzero; entries are
    binarized even if M carries weights.
    """
    u = (graph.out_adjacency + graph.in_adjacency).tocsr()
    u.eliminate_zeros()
    u.data = np.ones_like(u.data)
    return u


def compute_tfidf(raw_counts, vocabulary=None) -> FeatureMatrix:
    """TF-IDF weighting of a nonnegative count matrix.

    tf is the raw count, idf(w) = ln((1 + n) / (1 + df_w)) + 1 (smoothed),
    and every nonempty row is L2-normalized. An all-zero input comes back
    all-zero with ``all_zero`` set.
    """
    if isinstance(raw_counts, FeatureMatrix):
        vocabulary = vocabulary or raw_counts.vocabulary
        raw_counts = raw_counts.values
    counts = sp.csr_matrix(raw_counts, dtype=np.float64)
    counts.eliminate_zeros()
    if counts.nnz and counts.data.min() < 0:
        raise DatasetError("negative counts in TF-IDF input")
    n = counts.shape[0]
    if counts.nnz == 0:
        return FeatureMatrix(
            counts, mode="tfidf", vocabulary=list(vocabulary or []), all_zero=True
        )
    df = np.bincount(counts.indices, minlength=counts.shape[1])
    idf = np.log((1.0 + n) / (1.0 + df)) + 1.0
    out = counts.copy()
    out.data = out.data * idf[out.indices]
    row_norms = np.sqrt(out.multiply(out).sum(axis=1)).A.ravel()
    scale = np.divide(1.0, row_norms, out=np.zeros_like(row_norms), where=row_norms > 0)
    out = sp.diags(scale).dot(out).tocsr()
    return FeatureMatrix(out, mode="tfidf", vocabulary=list(vocabulary or []))


@dataclass
class DatasetSummary:
    node_count: int
    edge_count: int
    feature_dim: int
    n_classes: int
    feature_mode: str
    self_loops: int
    max_out_degree: int
    max_in_degree: int
    mean_out_degree: float

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def dataset_summary(graph: DirectedGraph, features: FeatureMatrix, labels: LabelVector) -> DatasetSummary:
    """Counts used by the CLI ``info`` command."""
    out_deg = np.diff(graph.out_adjacency.indptr)
    in_deg = np.diff(graph.in_adjacency.indptr)
    return DatasetSummary(
        node_count=graph.node_count,
        edge_count=graph.edge_count,
        feature_dim=features.dim,
        n_classes=labels.n_classes,
        feature_mode=features.mode,
        self_loops=int(graph.metadata.get("self_loops", 0)),
        max_out_degree=int(out_deg.max(initial=0)),
        max_in_degree=int(in_deg.max(initial=0)),
        mean_out_degree=float(out_deg.mean()) if out_deg.size else 0.0,
    )


def export_edge_list(graph: DirectedGraph, path) -> None:
    """Write edges as ``<src_id>\\t<dst_id>`` lines (external ids)."""
    with open(path, "w", encoding="utf-8") as fh:
        for u, v in graph.edge_list:
            fh.write(f"{graph.node_ids[u]}\t{graph.node_ids[v]}\n")


def load_edge_list(path, node_ids) -> DirectedGraph:
    """Rebuild a graph from an exported edge list over a known node universe."""
    node_ids = list(node_ids)
    index = {nid: i for i, nid in enumerate(node_ids)}
    edges: list[tuple[int, int]] = []
    seen: set[tuple[int, int]] = set()
    dropped = dup = 0
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            fields = _split(raw)
            if not fields:
                continue
            if len(fields) != 2:
                raise DatasetError(f"{path}:{lineno}: expected 2 fields")
            src, dst = fields
            if src not in index or dst not in index:
                dropped += 1
                continue
            e = (index[src], index[dst])
            if e in seen:
                dup += 1
                continue
            seen.add(e)
            edges.append(e)
    meta = {
        "edge_direction": EDGE_DIRECTION,
        "dropped_unknown_id_edges": dropped,
        "deduplicated_edges": dup,
        "self_loops": sum(1 for u, v in edges if u == v),
        "edge_list_file": str(path),
    }
    return DirectedGraph(node_ids, np.asarray(edges, dtype=np.int64).reshape(-1, 2), meta)


def export_feature_triplets(features: FeatureMatrix, path) -> None:
    """Write the feature matrix as ``row\\tcol\\tvalue`` sparse triplets."""
    coo = features.values.tocoo()
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# {coo.shape[0]} {coo.shape[1]} {features.mode}\n")
        for r, c, v in zip(coo.row, coo.col, coo.data):
            fh.write(f"{r}\t{c}\t{float(v)!r}\n")


def dataset_fingerprint(graph: DirectedGraph, features: FeatureMatrix | None = None) -> str:
    """Stable hash of the graph structure (and features, if given).

    Used to tie checkpoints / embedding files / reports back to the exact
    dataset they were produced from.
    """
    h = hashlib.sha256()
    h.update(f"n={graph.node_count};m={graph.edge_count};".encode())
    h.update(np.ascontiguousarray(graph.edge_list).tobytes())
    for nid in graph.node_ids:
        h.update(nid.encode("utf-8"))
        h.update(b"\x00")
    if features is not None:
        v = features.values
        h.update(f"d={features.dim};mode={features.mode};".encode())
        h.update(v.indptr.astype(np.int64).tobytes())
        h.update(v.indices.astype(np.int64).tobytes())
        h.update(v.data.astype(np.float64).tobytes())
    return h.hexdigest()
