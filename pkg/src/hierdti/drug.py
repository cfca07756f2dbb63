"""GIN message passing over hierarchical molecular graphs.

Update rule for node ``v`` at layer ``l``::

    h_v = MLP_l( h_v + sum_{u -> v} ( h_u + E_l[type(u, v)] ) )

where the sum runs over in-neighbours under the directed edge set and
``E_l`` is a learned 6 x d edge-type embedding. With ``strict=True`` the
neighbour term uses ``h_v`` instead of ``h_u`` (a literal reading of the
update rule with the centre node inside the sum). That variant discards
neighbour features and is kept only for comparison.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import nd
from .hiergraph import N_EDGE_TYPES, HierGraph
from .nd import Parameter, Tensor


@dataclass
class GinLayerParams:
    w1: Parameter
    b1: Parameter
    w2: Parameter
    b2: Parameter
    edge_embed: Parameter

    def mlp(self, z: Tensor) -> Tensor:
        hidden = nd.relu(nd.matmul(z, self.w1) + self.b1)
        return nd.matmul(hidden, self.w2) + self.b2

    def parameters(self) -> list[Parameter]:
        return [self.w1, self.b1, self.w2, self.b2, self.edge_embed]


@dataclass
class DrugEmbedding:
    H_a: Tensor
    H_m: Tensor
    H_g: Tensor


@dataclass
class GraphBatch:
    """Several graphs glued into one by offsetting node indices."""

    features: np.ndarray
    src: np.ndarray
    dst: np.ndarray
    etype: np.ndarray
    offsets: list[int]
    graphs: list[HierGraph]

    @property
    def n_nodes(self) -> int:
        return self.features.shape[0]

    @classmethod
    def from_graphs(cls, graphs: Sequence[HierGraph], features: Sequence[np.ndarray]) -> "GraphBatch":
        offsets, src, dst, et = [], [], [], []
        base = 0
        for g in graphs:
            offsets.append(base)
            src.append(g.src + base)
            dst.append(g.dst + base)
            et.append(g.etype)
            base += g.n_nodes
        cat = lambda parts: np.concatenate(parts) if parts else np.zeros(0, dtype=np.int64)  # noqa: E731
        return cls(np.vstack(features), cat(src), cat(dst), cat(et), offsets, list(graphs))


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int, shape=None) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape or (fan_in, fan_out))


class DrugEncoder:
    def __init__(self, n_features: int, d: int, n_layers: int, rng: np.random.Generator,
                 strict: bool = False, prefix: str = "drug"):
        if n_layers < 2:
            raise ValueError("the GIN needs at least two layers to reach the global node")
        self.d = d
        self.strict = strict
        self.w_in = Parameter(f"{prefix}.input.W", glorot(rng, n_features, d))
        self.b_in = Parameter(f"{prefix}.input.b", np.zeros(d))
        self.layers = [
            GinLayerParams(
                Parameter(f"{prefix}.gin{i}.mlp.W1", glorot(rng, d, d)),
                Parameter(f"{prefix}.gin{i}.mlp.b1", np.zeros(d)),
                Parameter(f"{prefix}.gin{i}.mlp.W2", glorot(rng, d, d)),
                Parameter(f"{prefix}.gin{i}.mlp.b2", np.zeros(d)),
                Parameter(f"{prefix}.gin{i}.edge_embed", glorot(rng, N_EDGE_TYPES, d)),
            )
            for i in range(n_layers)
        ]

    def parameters(self) -> list[Parameter]:
        out = [self.w_in, self.b_in]
        for layer in self.layers:
            out += layer.parameters()
        return out

    def project_inputs(self, raw: np.ndarray | Tensor) -> Tensor:
        """One affine map shared by atom, motif and global rows."""
        raw = nd.as_tensor(raw)
        if raw.shape[-1] != self.w_in.shape[0]:
            raise nd.ShapeMismatch(f"expected {self.w_in.shape[0]} raw features, got {raw.shape[-1]}")
        return nd.matmul(raw, self.w_in) + self.b_in

    def propagate(self, h: Tensor, src: np.ndarray, dst: np.ndarray, etype: np.ndarray) -> Tensor:
        return gin_forward(h, src, dst, etype, self.layers, self.strict)

    def encode_batch(self, batch: GraphBatch, raw: Tensor | None = None) -> list[DrugEmbedding]:
        h0 = self.project_inputs(batch.features if raw is None else raw)
        h = self.propagate(h0, batch.src, batch.dst, batch.etype)
        return [split_embedding(h, g, off) for g, off in zip(batch.graphs, batch.offsets)]

    def encode(self, g: HierGraph, raw: np.ndarray | Tensor) -> DrugEmbedding:
        h0 = self.project_inputs(raw)
        return split_embedding(self.propagate(h0, g.src, g.dst, g.etype), g, 0)


def gin_forward(h: Tensor, src: np.ndarray, dst: np.ndarray, etype: np.ndarray,
                layers: Sequence[GinLayerParams], strict: bool = False) -> Tensor:
    """Run every GIN layer; returns the final node embeddings."""
    n = h.shape[0]
    type_counts = np.zeros((n, N_EDGE_TYPES))
    np.add.at(type_counts, (dst, etype), 1.0)
    in_degree = type_counts.sum(axis=1, keepdims=True)
    for layer in layers:
        edge_term = nd.matmul(nd.Tensor(type_counts), layer.edge_embed)
        if strict:
            neighbour = h * in_degree
        else:
            neighbour = nd.scatter_add(h, src, dst, n)
        h = layer.mlp(h + neighbour + edge_term)
    return h


def split_embedding(h: Tensor, g: HierGraph, offset: int) -> DrugEmbedding:
    a0, m0 = offset, offset + g.n_atoms
    H_a = h[a0:m0]
    H_m = h[m0:m0 + g.n_motifs]
    if g.has_global:
        gi = offset + g.global_index
        H_g = h[gi:gi + 1]
    else:
        H_g = nd.mean_cols(H_a).reshape(1, -1)
    return DrugEmbedding(H_a, H_m, H_g)
