"""Minimal dense-tensor NN core with hand-written reverse-mode gradients.

Everything runs in float64: the datasets are small enough that memory is
a non-issue and the gradient checks need the precision. The architecture
is fixed upstream, so layers expose an explicit (cache in, gradient out)
backward instead of a general autodiff graph.
"""

from __future__ import annotations

import json
import os
import tempfile

import numpy as np

from .exceptions import EmbeddingFormatError, TrainingError


def glorot_uniform(rng: np.random.Generator, out_dim: int, in_dim: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (in_dim + out_dim))
    return rng.uniform(-limit, limit, size=(out_dim, in_dim))


class Linear:
    """Dense layer ``y = act(x @ W.T + b)`` with W stored (out, in).

    ``forward`` returns the output plus an opaque cache; ``backward``
    consumes the cache, accumulates into ``grad_W`` / ``grad_b`` and
    returns the gradient w.r.t. the input. Accumulation (rather than
    assignment) is what lets several channels share one trunk layer.
    """

    def __init__(self, in_dim: int, out_dim: int, activation: str = "tanh",
                 rng: np.random.Generator | None = None):
        if activation not in ("tanh", "identity"):
            raise ValueError(f"unknown activation {activation!r}")
        if in_dim <= 0 or out_dim <= 0:
            raise ValueError("layer dimensions must be positive")
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.activation = activation
        if rng is None:
            self.W = np.zeros((out_dim, in_dim))
        else:
            self.W = glorot_uniform(rng, out_dim, in_dim)
        self.b = np.zeros(out_dim)
        self.grad_W = np.zeros_like(self.W)
        self.grad_b = np.zeros_like(self.b)

    def forward(self, x: np.ndarray):
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.in_dim:
            raise ValueError(
                f"input shape {x.shape} incompatible with layer "
                f"({self.out_dim}, {self.in_dim})"
            )
        z = x @ self.W.T + self.b
        y = np.tanh(z) if self.activation == "tanh" else z
        return y, (x, y)

    def backward(self, cache, dout: np.ndarray) -> np.ndarray:
        x, y = cache
        if dout.shape != y.shape:
            raise ValueError(
                f"gradient shape {dout.shape} incompatible with output {y.shape}"
            )
        dz = dout * (1.0 - y * y) if self.activation == "tanh" else dout
        self.grad_W += dz.T @ x
        self.grad_b += dz.sum(axis=0)
        return dz @ self.W

    def zero_grad(self) -> None:
        self.grad_W[...] = 0.0
        self.grad_b[...] = 0.0


def forward_layer(layer: Linear, x: np.ndarray) -> np.ndarray:
    """Forward pass discarding the backward cache."""
    y, _ = layer.forward(x)
    return y


def masked_sq_error(pred: np.ndarray, target: np.ndarray, weight: np.ndarray):
    """Weighted squared error ``sum(((pred - target) * weight) ** 2)``.

    Returns (loss, gradient w.r.t. pred); the gradient is
    ``2 * (pred - target) * weight**2``.
    """
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    weight = np.asarray(weight, dtype=np.float64)
    if pred.shape != target.shape or pred.shape != weight.shape:
        raise ValueError(
            f"shape mismatch: pred {pred.shape}, target {target.shape}, "
            f"weight {weight.shape}"
        )
    resid = (pred - target) * weight
    loss = float(np.sum(resid * resid))
    grad = 2.0 * (pred - target) * weight * weight
    return loss, grad


def dropout_mask(shape, rate: float, rng: np.random.Generator) -> np.ndarray:
    """Inverted-dropout scale mask: 0 with probability ``rate``, else 1/(1-rate)."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    keep = rng.random(shape) >= rate
    return keep / (1.0 - rate)


def apply_dropout(x: np.ndarray, rate: float, rng: np.random.Generator | None,
                  training: bool) -> np.ndarray:
    """Inverted dropout; the exact identity outside training or at rate 0."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return x
    return x * dropout_mask(x.shape, rate, rng)


class Adam:
    """Bias-corrected adaptive-moment optimizer, updating params in place."""

    def __init__(self, lr: float = 1e-4, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m: dict[str, np.ndarray] = {}
        self._v: dict[str, np.ndarray] = {}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        b1t = 1.0 - self.beta1 ** self.t
        b2t = 1.0 - self.beta2 ** self.t
        for name, p in params.items():
            g = grads[name]
            if g.shape != p.shape:
                raise ValueError(f"gradient shape mismatch for {name}")
            if not np.all(np.isfinite(g)):
                raise TrainingError(f"non-finite gradient for parameter {name!r}")
            m = self._m.setdefault(name, np.zeros_like(p))
            v = self._v.setdefault(name, np.zeros_like(p))
            m += (1.0 - self.beta1) * (g - m)
            v += (1.0 - self.beta2) * (g * g - v)
            mhat = m / b1t
            vhat = v / b2t
            p -= self.lr * mhat / (np.sqrt(vhat) + self.eps)


def finite_diff_check(loss_fn, params, grads, eps: float = 1e-5,
                      max_coords: int | None = None,
                      rng: np.random.Generator | None = None) -> float:
    """Central-difference check of analytic gradients.

    ``loss_fn`` is a zero-argument closure re-evaluating the loss from the
    current (temporarily perturbed) parameter arrays; it must be
    deterministic, so dropout has to be off. Returns the max over checked
    coordinates of ``|g_a - g_n| / max(1, |g_a|, |g_n|)``.
    """
    params = list(params)
    grads = list(grads)
    coords = [(ai, i) for ai, arr in enumerate(params) for i in range(arr.size)]
    if max_coords is not None and len(coords) > max_coords:
        rng = rng or np.random.default_rng(0)
        picks = rng.choice(len(coords), size=max_coords, replace=False)
        coords = [coords[i] for i in picks]
    worst = 0.0
    for ai, i in coords:
        arr = params[ai]
        orig = arr.flat[i]
        arr.flat[i] = orig + eps
        lp = loss_fn()
        arr.flat[i] = orig - eps
        lm = loss_fn()
        arr.flat[i] = orig
        g_num = (lp - lm) / (2.0 * eps)
        g_ana = grads[ai].flat[i]
        rel = abs(g_ana - g_num) / max(1.0, abs(g_ana), abs(g_num))
        worst = max(worst, rel)
    return worst


CHECKPOINT_VERSION = 1


def save_checkpoint(path, tensors: dict[str, np.ndarray], meta: dict) -> None:
    """Named-tensor container with a JSON meta block; written atomically."""
    payload = dict(tensors)
    header = {"version": CHECKPOINT_VERSION, **meta}
    payload["__meta__"] = np.frombuffer(
        json.dumps(header, sort_keys=True).encode("utf-8"), dtype=np.uint8
    )
    path = os.fspath(path)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(path) or ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            np.savez(fh, **payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_checkpoint(path):
    """Inverse of :func:`save_checkpoint`; returns (tensors, meta)."""
    try:
        with np.load(path) as npz:
            arrays = {k: npz[k] for k in npz.files}
    except (OSError, ValueError) as exc:
        raise EmbeddingFormatError(f"cannot read checkpoint {path}: {exc}") from exc
    raw = arrays.pop("__meta__", None)
    if raw is None:
        raise EmbeddingFormatError(f"checkpoint {path} has no meta block")
    meta = json.loads(raw.tobytes().decode("utf-8"))
    if meta.get("version") != CHECKPOINT_VERSION:
        raise EmbeddingFormatError(
            f"checkpoint {path} has version {meta.get('version')}, "
            f"expected {CHECKPOINT_VERSION}"
        )
    return arrays, meta
