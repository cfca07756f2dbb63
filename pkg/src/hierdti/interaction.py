"""Hierarchical drug/protein attention, the classifier head and the loss.

For each drug level ``x`` (atoms, motifs, global node)::

    Attn_x = ReLU(H_P @ W_x @ H_x.T)         # l x n_x
    A_x    = row means of Attn_x            # length l
    B_P    = sum_x softmax(A_x)
    F_P    = H_P.T @ B_P                    # length d

The prediction is ``MLP([H_g ; F_P])`` squashed by a sigmoid.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import nd
from .drug import glorot
from .nd import Parameter, Tensor

BCE_EPS = 1e-12


def attn_level(H_P: Tensor, H_x: Tensor, W: Tensor) -> Tensor:
    """Non-negative ``l x n`` affinity between protein segments and drug nodes."""
    if H_P.ndim != 2 or H_x.ndim != 2 or W.shape != (H_P.shape[1], H_x.shape[1]):
        raise nd.ShapeMismatch(f"attn_level: {H_P.shape}, {W.shape}, {H_x.shape}")
    return nd.relu(nd.matmul(nd.matmul(H_P, W), nd.transpose(H_x)))


def fuse_protein(H_P: Tensor, attns: Sequence[Tensor]) -> tuple[Tensor, Tensor, list[Tensor]]:
    """Weight protein rows by summed per-level softmax attention.

    Returns ``(F_P, B_P, softmaxes)``.
    """
    l = H_P.shape[0]  # noqa: E741
    for a in attns:
        if a.shape[0] != l:
            raise nd.ShapeMismatch(f"attention matrix has {a.shape[0]} rows, expected {l}")
    parts = [nd.softmax_vec(nd.mean_rows(a)) for a in attns]
    B_P = parts[0]
    for p in parts[1:]:
        B_P = B_P + p
    F_P = nd.matmul(nd.transpose(H_P), B_P)
    return F_P, B_P, parts


def drug_attention_vectors(attn_a: Tensor, attn_m: Optional[Tensor]) -> tuple[Tensor, Optional[Tensor]]:
    """Column means: one importance score per atom and per motif."""
    B_a = nd.mean_cols(attn_a)
    B_m = nd.mean_cols(attn_m) if attn_m is not None and attn_m.shape[1] else None
    return B_a, B_m


class Classifier:
    """``2d -> d -> d/2 -> 1`` MLP with ReLU, sigmoid output."""

    def __init__(self, d: int, rng: np.random.Generator, prefix: str = "clf"):
        dims = [2 * d, d, d // 2, 1]
        self.weights = [Parameter(f"{prefix}.fc{i}.W", glorot(rng, dims[i], dims[i + 1]))
                        for i in range(3)]
        self.biases = [Parameter(f"{prefix}.fc{i}.b", np.zeros(dims[i + 1])) for i in range(3)]

    def parameters(self) -> list[Parameter]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def logits(self, z: Tensor) -> Tensor:
        h = z
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = nd.matmul(h, w) + b
            if i < 2:
                h = nd.relu(h)
        return h

    def __call__(self, z: Tensor) -> Tensor:
        return nd.sigmoid(self.logits(z))


def predict(H_g: Tensor, F_P: Tensor, clf: Classifier) -> Tensor:
    """Interaction probability from the drug summary and attended protein summary.

    Accepts one pair (``H_g``: ``1 x d`` or ``d``; ``F_P``: ``d``) or a batch
    (both ``B x d``). Returns shape ``(B,)``.
    """
    if F_P.ndim == 1:
        z = nd.concat([H_g.reshape(-1), F_P]).reshape(1, -1)
    else:
        z = nd.concat([H_g, F_P], axis=1)
    return clf(z).reshape(-1)


def bce_loss(probs: Tensor, labels) -> Tensor:
    """Mean binary cross-entropy with probabilities clamped to ``[eps, 1 - eps]``."""
    y = np.asarray(labels, dtype=np.float64).reshape(-1)
    p = probs.data.reshape(-1)
    if p.shape != y.shape:
        raise nd.ShapeMismatch(f"bce_loss: {p.shape} probabilities vs {y.shape} labels")
    pc = np.clip(p, BCE_EPS, 1.0 - BCE_EPS)
    n = len(y)
    loss = -np.mean(y * np.log(pc) + (1.0 - y) * np.log(1.0 - pc))
    inside = (p >= BCE_EPS) & (p <= 1.0 - BCE_EPS)
    shape = probs.shape

    def fn(g):
        grad = (-(y / pc) + (1.0 - y) / (1.0 - pc)) / n * inside
        return ((float(g) * grad).reshape(shape),)

    return nd._record(np.array(loss), (probs,), fn)


@dataclass
class AttentionReport:
    B_P: np.ndarray
    B_a: np.ndarray
    B_m: np.ndarray
    attn: dict[str, np.ndarray] = field(default_factory=dict)
    softmaxes: list[np.ndarray] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "B_P": self.B_P.tolist(),
            "B_a": self.B_a.tolist(),
            "B_m": self.B_m.tolist(),
        }
