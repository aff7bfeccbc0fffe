"""Evaluation protocols: network reconstruction, link prediction, classification.

All three protocols consume an :class:`~diagram.model.EmbeddingSet` and a
graph. Directed scoring uses sigmoid(dot(o_u, i_v)); direction-oblivious
scoring uses sigmoid(dot(z_u, z_v)). The binary/multiclass classifiers and
the AUC / F1 metrics are implemented here so results do not depend on an
external ML stack.
"""

from __future__ import annotations

import csv
import json
import math
import os
import tempfile
from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .data import DirectedGraph, FeatureMatrix
from .exceptions import EvaluationError, SamplingError
from .model import EmbeddingSet, TrainConfig, train_edge_model, train_node_model

EDGE_CONSTRUCTORS = ("average", "hadamard", "w-l1", "w-l2")
SCORER_MODES = ("directed", "symmetric")


@dataclass
class ProximityScorer:
    """Pair scorer; "directed" uses (o, i), "symmetric" uses z only."""

    mode: str = "directed"

    def __post_init__(self):
        if self.mode not in SCORER_MODES:
            raise ValueError(f"scorer mode must be one of {SCORER_MODES}")


def proximity(scorer: ProximityScorer, emb: EmbeddingSet, u: int, v: int) -> float:
    """sigmoid(dot(o_u, i_v)) or sigmoid(dot(z_u, z_v)); always in (0, 1)."""
    if scorer.mode == "directed":
        d = float(np.dot(emb.o[u], emb.i[v]))
    else:
        d = float(np.dot(emb.z[u], emb.z[v]))
    return float(expit(d))


# -- network reconstruction ---------------------------------------------------


def network_reconstruction(emb: EmbeddingSet, graph: DirectedGraph, k_list,
                           mode: str = "directed") -> "EvalReport":
    """Precision-at-K over all ordered node pairs (u, v), u != v.

    Pairs are ranked by proximity descending with lexicographic (u, v)
    tie-breaking, and P@K counts how many of the top K are ground-truth
    directed edges. Self-pairs are never candidates.
    """
    scorer = ProximityScorer(mode)
    n = emb.n
    if graph.node_count != n:
        raise EvaluationError("embedding and graph disagree on node count")
    k_list = [int(k) for k in k_list]
    max_pairs = n * n - n
    for k in k_list:
        if k <= 0:
            raise EvaluationError(f"K must be positive, got {k}")
        if k > max_pairs:
            raise EvaluationError(f"K={k} exceeds candidate pair count {max_pairs}")

    if scorer.mode == "directed":
        dots = emb.o @ emb.i.T
    else:
        dots = emb.z @ emb.z.T
    u_idx = np.repeat(np.arange(n, dtype=np.int32), n)
    v_idx = np.tile(np.arange(n, dtype=np.int32), n)
    keep = u_idx != v_idx
    u_idx, v_idx = u_idx[keep], v_idx[keep]
    scores = expit(dots.ravel()[keep])
    del dots
    order = np.lexsort((v_idx, u_idx, -scores))

    is_edge = np.zeros((n, n), dtype=bool)
    e = graph.edge_list
    is_edge[e[:, 0], e[:, 1]] = True
    top = order[: max(k_list)]
    hits = np.cumsum(is_edge[u_idx[top], v_idx[top]])
    table = [{"K": k, "precision": float(hits[k - 1] / k)} for k in sorted(k_list)]
    report = EvalReport(
        kind="network_reconstruction",
        columns=["K", "precision"],
        table=table,
        details={"mode": scorer.mode, "edge_count": int(graph.edge_count)},
        config={"k_list": sorted(k_list), "mode": scorer.mode,
                "variant": emb.variant},
        fingerprint=emb.fingerprint,
    )
    report.validate()
    return report


# -- link-prediction sampling -------------------------------------------------


@dataclass
class LinkSample:
    """Balanced true/false ordered pairs plus the residual training graph."""

    pairs: np.ndarray  # (2q, 2) true samples first
    labels: np.ndarray  # (2q,) 1 then 0
    residual_graph: DirectedGraph
    seed: int
    percent: float

    @property
    def true_pairs(self) -> np.ndarray:
        q = int(self.labels.sum())
        return self.pairs[:q]

    @property
    def false_pairs(self) -> np.ndarray:
        q = int(self.labels.sum())
        return self.pairs[q:]


def _bfs_connected(adj, src, dst) -> bool:
    if src == dst:
        return True
    seen = {src}
    queue = deque([src])
    while queue:
        cur = queue.popleft()
        for nxt in adj[cur]:
            if nxt == dst:
                return True
            if nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    return False


def weak_component_count(node_count: int, edges) -> int:
    """Number of weakly connected components (isolated nodes count)."""
    adj = [[] for _ in range(node_count)]
    for u, v in np.asarray(edges, dtype=np.int64).reshape(-1, 2):
        if u != v:
            adj[u].append(v)
            adj[v].append(u)
    seen = np.zeros(node_count, dtype=bool)
    comps = 0
    for start in range(node_count):
        if seen[start]:
            continue
        comps += 1
        seen[start] = True
        queue = deque([start])
        while queue:
            cur = queue.popleft()
            for nxt in adj[cur]:
                if not seen[nxt]:
                    seen[nxt] = True
                    queue.append(nxt)
    return comps


def sample_link_prediction(graph: DirectedGraph, percent: float, seed: int) -> LinkSample:
    """Remove ceil(percent * m / 100) edges without breaking weak connectivity.

    Candidate edges are visited in a seeded shuffled order; an edge is
    removed only if its endpoints stay weakly connected in the residual
    (so the weak-component structure of the graph is preserved exactly).
    Equally many uniform ordered non-edges are drawn as false samples.
    """
    m = graph.edge_count
    n = graph.node_count
    quota = math.ceil(percent * m / 100.0)
    if quota <= 0:
        raise SamplingError(f"percent={percent} requests zero edges from m={m}")
    if n * n - n - m < quota:
        raise SamplingError("not enough non-edges for balanced false samples")

    edges = graph.edge_list
    adj: list[set] = [set() for _ in range(n)]
    pair_count: dict[tuple[int, int], int] = {}
    for u, v in edges:
        if u == v:
            continue
        key = (u, v) if u < v else (v, u)
        c = pair_count.get(key, 0)
        if c == 0:
            adj[u].add(v)
            adj[v].add(u)
        pair_count[key] = c + 1

    rng = np.random.default_rng(seed)
    order = rng.permutation(m)
    removed: list[int] = []
    for ei in order:
        if len(removed) == quota:
            break
        u, v = int(edges[ei, 0]), int(edges[ei, 1])
        if u == v:
            removed.append(ei)  # self-loop removal cannot disconnect anything
            continue
        key = (u, v) if u < v else (v, u)
        if pair_count[key] == 2:
            pair_count[key] = 1  # reciprocal partner keeps the pair connected
            removed.append(ei)
            continue
        adj[u].discard(v)
        adj[v].discard(u)
        if _bfs_connected(adj, u, v):
            pair_count[key] = 0
            removed.append(ei)
        else:
            adj[u].add(v)
            adj[v].add(u)
    if len(removed) < quota:
        raise SamplingError(
            f"requested {quota} removable edges but only achieved {len(removed)}"
        )

    existing = {(int(u), int(v)) for u, v in edges}
    false_pairs: list[tuple[int, int]] = []
    chosen: set[tuple[int, int]] = set()
    while len(false_pairs) < quota:
        draw = rng.integers(0, n, size=(max(4 * (quota - len(false_pairs)), 16), 2))
        for u, v in draw:
            u, v = int(u), int(v)
            if u == v or (u, v) in existing or (u, v) in chosen:
                continue
            chosen.add((u, v))
            false_pairs.append((u, v))
            if len(false_pairs) == quota:
                break

    removed_set = set(int(i) for i in removed)
    kept = np.array([i for i in range(m) if i not in removed_set], dtype=np.int64)
    meta = dict(graph.metadata)
    meta.update({"link_prediction_removed": quota, "link_prediction_seed": int(seed),
                 "link_prediction_percent": float(percent)})
    residual = DirectedGraph(graph.node_ids, edges[kept], meta)

    true_pairs = edges[np.array(sorted(removed_set), dtype=np.int64)]
    pairs = np.vstack([true_pairs, np.array(false_pairs, dtype=np.int64)])
    labels = np.concatenate([np.ones(quota, dtype=np.int64),
                             np.zeros(quota, dtype=np.int64)])
    return LinkSample(pairs, labels, residual, int(seed), float(percent))


# -- edge features ------------------------------------------------------------


def _endpoint_vectors(emb: EmbeddingSet, pairs: np.ndarray, mode: str):
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    if mode == "directed":
        return emb.o[pairs[:, 0]], emb.i[pairs[:, 1]]
    if mode == "symmetric":
        return emb.z[pairs[:, 0]], emb.z[pairs[:, 1]]
    raise ValueError(f"scorer mode must be one of {SCORER_MODES}")


def edge_feature_matrix(emb: EmbeddingSet, pairs, constructor: str,
                        mode: str = "directed") -> np.ndarray:
    """Stack per-pair edge features; rows follow ``pairs`` order."""
    a, b = _endpoint_vectors(emb, pairs, mode)
    c = constructor.lower()
    if c == "average":
        return (a + b) / 2.0
    if c == "hadamard":
        return a * b
    if c == "w-l1":
        return np.abs(a - b)
    if c == "w-l2":
        return (a - b) ** 2
    raise ValueError(f"unknown edge-feature constructor {constructor!r}")


def edge_features(emb: EmbeddingSet, pair, constructor: str,
                  mode: str = "directed") -> np.ndarray:
    """Feature vector of length k for one (u, v) pair."""
    return edge_feature_matrix(emb, [pair], constructor, mode)[0]


# -- built-in classifier and metrics ------------------------------------------


def logistic_regression_fit(X, y, l2: float = 1.0, max_iter: int = 200,
                            tol: float = 1e-6) -> np.ndarray:
    """L2-regularized logistic regression via damped Newton iterations.

    Returns weights of length d+1 with the (unpenalized) intercept first.
    Deterministic: full-batch updates from a zero start, stopping when the
    gradient norm drops below ``tol``.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    if X.ndim != 2 or X.shape[0] != y.size:
        raise ValueError(f"bad shapes X{X.shape}, y{y.shape}")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ValueError("non-finite values in classifier input")
    nb = np.hstack([np.ones((X.shape[0], 1)), X])
    w = np.zeros(nb.shape[1])
    pen = np.ones_like(w)
    pen[0] = 0.0

    def objective(wv):
        s = nb @ wv
        return float(np.sum(np.logaddexp(0.0, s) - y * s) + 0.5 * l2 * np.sum(pen * wv * wv))

    obj = objective(w)
    for _ in range(max_iter):
        s = nb @ w
        prob = expit(s)
        g = nb.T @ (prob - y) + l2 * pen * w
        if np.linalg.norm(g) < tol:
            break
        r = prob * (1.0 - prob)
        h = (nb * r[:, None]).T @ nb
        h[np.diag_indices_from(h)] += l2 * pen + 1e-10
        try:
            step = np.linalg.solve(h, g)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(h, g, rcond=None)[0]
        # Backtrack if the full Newton step overshoots (near-separable data).
        for _ in range(30):
            cand = w - step
            cand_obj = objective(cand)
            if cand_obj <= obj + 1e-12:
                w, obj = cand, cand_obj
                break
            step = step / 2.0
        else:
            break
    return w


def logistic_predict_proba(weights: np.ndarray, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    return expit(weights[0] + X @ weights[1:])


def auc_score(labels, scores) -> float:
    """Mann-Whitney AUC with half credit for tied scores."""
    labels = np.asarray(labels).astype(np.int64).ravel()
    scores = np.asarray(scores, dtype=np.float64).ravel()
    if labels.size == 0 or labels.size != scores.size:
        raise EvaluationError("AUC needs matching nonempty labels and scores")
    pos = int(labels.sum())
    neg = labels.size - pos
    if pos == 0 or neg == 0:
        raise EvaluationError("AUC undefined with a single class")
    order = np.argsort(scores, kind="mergesort")
    s = scores[order]
    ranks = np.empty(labels.size, dtype=np.float64)
    i = 0
    while i < labels.size:
        j = i
        while j + 1 < labels.size and s[j + 1] == s[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    pos_rank_sum = float(ranks[labels == 1].sum())
    return (pos_rank_sum - pos * (pos + 1) / 2.0) / (pos * neg)


def binary_f1(labels, preds) -> float:
    """F1 of the positive class; 0 when precision+recall degenerate."""
    labels = np.asarray(labels).astype(np.int64).ravel()
    preds = np.asarray(preds).astype(np.int64).ravel()
    tp = int(np.sum((labels == 1) & (preds == 1)))
    fp = int(np.sum((labels == 0) & (preds == 1)))
    fn = int(np.sum((labels == 1) & (preds == 0)))
    denom = 2 * tp + fp + fn
    return 2.0 * tp / denom if denom else 0.0


def micro_macro_f1(true, pred, n_classes: int) -> tuple[float, float]:
    """Micro-F1 from pooled counts; macro-F1 as the unweighted class mean.

    A class with neither true nor predicted samples contributes F1 = 0.
    """
    true = np.asarray(true).astype(np.int64).ravel()
    pred = np.asarray(pred).astype(np.int64).ravel()
    if true.size == 0 or true.size != pred.size:
        raise EvaluationError("micro/macro F1 needs matching nonempty arrays")
    tp_sum = fp_sum = fn_sum = 0
    per_class = []
    for c in range(n_classes):
        tp = int(np.sum((true == c) & (pred == c)))
        fp = int(np.sum((true != c) & (pred == c)))
        fn = int(np.sum((true == c) & (pred != c)))
        tp_sum += tp
        fp_sum += fp
        fn_sum += fn
        denom = 2 * tp + fp + fn
        per_class.append(2.0 * tp / denom if denom else 0.0)
    micro_denom = 2 * tp_sum + fp_sum + fn_sum
    micro = 2.0 * tp_sum / micro_denom if micro_denom else 0.0
    macro = float(np.mean(per_class)) if per_class else 0.0
    return micro, macro


# -- cross-validation helpers --------------------------------------------------


def stratified_fold_indices(y, n_folds: int, rng: np.random.Generator):
    """Deal each class's shuffled indices round-robin into ``n_folds`` test sets."""
    y = np.asarray(y).astype(np.int64).ravel()
    folds: list[list[int]] = [[] for _ in range(n_folds)]
    for c in np.unique(y):
        idx = np.flatnonzero(y == c)
        idx = rng.permutation(idx)
        for pos, i in enumerate(idx):
            folds[pos % n_folds].append(int(i))
    return [np.array(sorted(f), dtype=np.int64) for f in folds]


def stratified_split(y, train_fraction: float, rng: np.random.Generator,
                     max_retries: int = 10):
    """Per-class random split with at least one training sample per class."""
    y = np.asarray(y).astype(np.int64).ravel()
    classes = np.unique(y)
    for _ in range(max_retries):
        train: list[int] = []
        test: list[int] = []
        for c in classes:
            idx = rng.permutation(np.flatnonzero(y == c))
            n_train = max(1, int(round(train_fraction * idx.size)))
            n_train = min(n_train, idx.size)
            train.extend(int(i) for i in idx[:n_train])
            test.extend(int(i) for i in idx[n_train:])
        train_arr = np.array(sorted(train), dtype=np.int64)
        test_arr = np.array(sorted(test), dtype=np.int64)
        if set(np.unique(y[train_arr])) == set(classes.tolist()):
            return train_arr, test_arr
    raise EvaluationError("could not build a training split covering every class")


# -- protocol: link prediction --------------------------------------------------


def link_prediction_eval(emb: EmbeddingSet, sample: LinkSample,
                         constructors=EDGE_CONSTRUCTORS, mode: str = "directed",
                         seed: int = 0, n_folds: int = 3, l2: float = 1.0,
                         max_iter: int = 200, folds=None) -> "EvalReport":
    """Stratified 3-fold CV of a binary classifier on edge features.

    Reports the mean and standard deviation over folds of both AUC and the
    positive-class F1, per feature constructor.
    """
    y = sample.labels
    if int(y.sum()) * 2 != y.size:
        raise EvaluationError("link sample must be balanced")
    if folds is None:
        folds = stratified_fold_indices(y, n_folds, np.random.default_rng(seed))
    all_idx = np.arange(y.size)
    table = []
    details: dict = {}
    for ctor in constructors:
        feats = edge_feature_matrix(emb, sample.pairs, ctor, mode)
        aucs, f1s = [], []
        for test_idx in folds:
            train_mask = np.ones(y.size, dtype=bool)
            train_mask[test_idx] = False
            train_idx = all_idx[train_mask]
            if len(np.unique(y[train_idx])) < 2 or len(np.unique(y[test_idx])) < 2:
                raise EvaluationError("degenerate single-class fold")
            w = logistic_regression_fit(feats[train_idx], y[train_idx], l2, max_iter)
            proba = logistic_predict_proba(w, feats[test_idx])
            aucs.append(auc_score(y[test_idx], proba))
            f1s.append(binary_f1(y[test_idx], (proba >= 0.5).astype(int)))
        table.append({
            "constructor": ctor,
            "auc_mean": float(np.mean(aucs)),
            "auc_std": float(np.std(aucs)),
            "f1_mean": float(np.mean(f1s)),
            "f1_std": float(np.std(f1s)),
        })
        details[ctor] = {"auc": aucs, "f1": f1s}
    report = EvalReport(
        kind="link_prediction",
        columns=["constructor", "auc_mean", "auc_std", "f1_mean", "f1_std"],
        table=table,
        details=details,
        config={"mode": mode, "seed": seed, "n_folds": n_folds, "l2": l2,
                "percent": sample.percent, "sample_seed": sample.seed,
                "variant": emb.variant},
        fingerprint=emb.fingerprint,
    )
    report.validate()
    return report


def run_link_prediction_protocol(graph: DirectedGraph, features: FeatureMatrix,
                                 percent: float, seed: int, variant: str = "edge",
                                 cfg: TrainConfig | None = None,
                                 constructors=EDGE_CONSTRUCTORS,
                                 modes=("directed",)):
    """Full protocol: sample edges, train on the residual graph, evaluate.

    Returns (reports keyed by scorer mode, sample, train result).
    """
    sample = sample_link_prediction(graph, percent, seed)
    cfg = cfg or TrainConfig(seed=seed)
    if variant == "node":
        result = train_node_model(sample.residual_graph, features, cfg)
    elif variant == "edge":
        node_cfg = TrainConfig(**{**cfg.__dict__, "transfer_from": None, "epochs": None})
        node_res = train_node_model(sample.residual_graph, features, node_cfg)
        edge_cfg = TrainConfig(**{**cfg.__dict__, "transfer_from": node_res.model})
        result = train_edge_model(sample.residual_graph, features, edge_cfg)
    else:
        raise ValueError(f"unknown variant {variant!r}")
    reports = {
        mode: link_prediction_eval(result.embeddings, sample, constructors,
                                   mode=mode, seed=seed)
        for mode in modes
    }
    for report in reports.values():
        report.config["train"] = dict(result.config)
    return reports, sample, result


# -- protocol: node classification ----------------------------------------------


def _ovr_predict(X_train, y_train, X_test, classes, l2, max_iter):
    scores = np.empty((X_test.shape[0], len(classes)))
    for ci, c in enumerate(classes):
        w = logistic_regression_fit(X_train, (y_train == c).astype(np.float64),
                                    l2, max_iter)
        scores[:, ci] = logistic_predict_proba(w, X_test)
    return classes[np.argmax(scores, axis=1)]


def node_classification_eval(emb: EmbeddingSet, labels, train_ratios=(10, 30, 50),
                             repetitions: int = 10, features: str = "z",
                             seed: int = 0, l2: float = 1.0,
                             max_iter: int = 200) -> "EvalReport":
    """One-vs-rest logistic regression over repeated stratified holdouts.

    ``train_ratios`` may be percentages (10, 30, 50) or fractions; each
    ratio gets ``repetitions`` seeded splits and the report carries the
    mean and std of micro- and macro-F1.
    """
    y = labels.labels if hasattr(labels, "labels") else np.asarray(labels, dtype=np.int64)
    if y.size != emb.n:
        raise EvaluationError("labels must cover every embedded node")
    if features == "z":
        X = emb.z
    elif features in ("zoi", "concat"):
        X = np.hstack([emb.z, emb.o, emb.i])
    else:
        raise ValueError(f"unknown feature selection {features!r}")
    classes = np.unique(y)
    rng = np.random.default_rng(seed)
    table = []
    details: dict = {}
    for ratio in train_ratios:
        frac = float(ratio) / 100.0 if ratio > 1 else float(ratio)
        micros, macros = [], []
        for _ in range(repetitions):
            train_idx, test_idx = stratified_split(y, frac, rng)
            if test_idx.size == 0:
                raise EvaluationError(f"train ratio {ratio} leaves no test data")
            pred = _ovr_predict(X[train_idx], y[train_idx], X[test_idx], classes,
                                l2, max_iter)
            micro, macro = micro_macro_f1(y[test_idx], pred, int(classes.max()) + 1)
            micros.append(micro)
            macros.append(macro)
        table.append({
            "train_ratio": float(ratio),
            "micro_f1_mean": float(np.mean(micros)),
            "micro_f1_std": float(np.std(micros)),
            "macro_f1_mean": float(np.mean(macros)),
            "macro_f1_std": float(np.std(macros)),
        })
        details[str(ratio)] = {"micro_f1": micros, "macro_f1": macros}
    report = EvalReport(
        kind="node_classification",
        columns=["train_ratio", "micro_f1_mean", "micro_f1_std",
                 "macro_f1_mean", "macro_f1_std"],
        table=table,
        details=details,
        config={"features": features, "repetitions": repetitions, "seed": seed,
                "l2": l2, "variant": emb.variant},
        fingerprint=emb.fingerprint,
    )
    report.validate()
    return report


# -- report container ------------------------------------------------------------


@dataclass
class EvalReport:
    """Structured metric results with JSON and CSV writers."""

    kind: str
    columns: list[str]
    table: list[dict]
    details: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)
    fingerprint: str = ""

    def validate(self) -> None:
        for row in self.table:
            for key, val in row.items():
                if isinstance(val, float) and ("precision" in key or "auc" in key
                                               or "f1" in key):
                    if not (-1e-12 <= val <= 1.0 + 1e-12):
                        raise EvaluationError(f"metric {key}={val} outside [0, 1]")

    def as_dict(self) -> dict:
        return {
            "kind": self.kind,
            "columns": self.columns,
            "table": self.table,
            "details": self.details,
            "config": self.config,
            "fingerprint": self.fingerprint,
        }

    def to_json(self, path) -> None:
        _atomic_text(path, json.dumps(self.as_dict(), sort_keys=True, indent=2) + "\n")

    def to_csv(self, path) -> None:
        out = []
        w = csv.writer(_ListIO(out), lineterminator="\n")
        w.writerow(self.columns)
        for row in self.table:
            w.writerow([row[c] for c in self.columns])
        _atomic_text(path, "".join(out))

    def to_plot_csv(self, path, metric: str = "auc") -> None:
        """Plot-ready (label, mean, std) rows for the report's lead metric."""
        label_col = self.columns[0]
        out = []
        w = csv.writer(_ListIO(out), lineterminator="\n")
        w.writerow([label_col, "mean", "std"])
        for row in self.table:
            w.writerow([row[label_col], row.get(f"{metric}_mean", ""),
                        row.get(f"{metric}_std", "")])
        _atomic_text(path, "".join(out))


class _ListIO:
    def __init__(self, sink):
        self.sink = sink

    def write(self, s):
        self.sink.append(s)


def _atomic_text(path, text: str) -> None:
    path = os.fspath(path)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(path) or ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
