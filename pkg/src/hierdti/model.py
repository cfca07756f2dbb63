"""End-to-end drug/target interaction model and its ablated variants."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np

from . import nd
from .drug import DrugEncoder, GraphBatch, glorot
from .fragment import MotifPartition, fragment
from .hiergraph import (
    N_NODE_FEATURES,
    HierGraph,
    build_atom_global_graph,
    build_atom_graph,
    build_hiergraph,
    initial_features,
)
from .interaction import AttentionReport, Classifier, attn_level, drug_attention_vectors, fuse_protein
from .nd import Parameter, Tensor
from .smiles import Molecule, parse_smiles
from .target import VOCAB_SIZE, ProteinTokens, TargetEncoder, tokenize

ABLATIONS = ("none", "no_ff", "no_hi", "no_hc", "no_ml")


@dataclass(frozen=True)
class ModelConfig:
    d: int = 64
    gin_layers: int = 3
    conv_kernel: int = 15
    aff_ratio: int = 4
    ablation: str = "none"
    strict_eq2: bool = False
    vocab_buckets: Optional[int] = None

    def __post_init__(self):
        if self.ablation not in ABLATIONS:
            raise ValueError(f"unknown ablation {self.ablation!r}; expected one of {ABLATIONS}")
        if self.d % 8:
            raise ValueError("d must be divisible by 8")


@dataclass
class Sample:
    """A featurised drug/protein pair, cached across epochs."""

    mol: Molecule
    partition: MotifPartition
    graph: HierGraph
    features: np.ndarray
    tokens: ProteinTokens
    label: Optional[int] = None


def attention_levels(ablation: str) -> tuple[str, ...]:
    """Drug levels that take part in the protein attention for a wiring."""
    if ablation == "no_hi":
        return ()
    if ablation in ("no_hc", "no_ml"):
        return ("a", "g")
    return ("a", "m", "g")


class DTIModel:
    def __init__(self, config: ModelConfig = ModelConfig(), seed: int = 0):
        self.config = config
        rng = np.random.default_rng(seed)
        d = config.d
        self.drug = DrugEncoder(N_NODE_FEATURES, d, config.gin_layers, rng, config.strict_eq2)
        vocab = config.vocab_buckets or VOCAB_SIZE
        self.target = TargetEncoder(d, rng, config.conv_kernel, config.aff_ratio,
                                    fusion=config.ablation != "no_ff", vocab_size=vocab)
        self.levels = attention_levels(config.ablation)
        self.attn_w = {lvl: Parameter(f"head.W_{lvl}", glorot(rng, d, d)) for lvl in self.levels}
        self.clf = Classifier(d, rng)

    # -- registry -------------------------------------------------------------

    def parameters(self) -> list[Parameter]:
        params = self.drug.parameters() + self.target.parameters()
        params += list(self.attn_w.values()) + self.clf.parameters()
        return params

    def named_parameters(self) -> dict[str, Parameter]:
        out = {}
        for p in self.parameters():
            if p.name in out:
                raise ValueError(f"duplicate parameter name {p.name}")
            out[p.name] = p
        return out

    def n_parameters(self) -> int:
        return sum(p.size for p in self.parameters())

    def state_dict(self) -> dict[str, np.ndarray]:
        out = {name: p.data.copy() for name, p in self.named_parameters().items()}
        for norm in self.target.norms():
            out[f"{norm.name}.running_mean"] = norm.state.running_mean.copy()
            out[f"{norm.name}.running_var"] = norm.state.running_var.copy()
        return out

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        params = self.named_parameters()
        expected = set(params) | {f"{n.name}.{s}" for n in self.target.norms()
                                  for s in ("running_mean", "running_var")}
        if set(state) != expected:
            missing = sorted(expected - set(state))[:5]
            extra = sorted(set(state) - expected)[:5]
            raise ValueError(f"state mismatch; missing {missing}, unexpected {extra}")
        for name, p in params.items():
            if state[name].shape != p.shape:
                raise ValueError(f"{name}: shape {state[name].shape} != {p.shape}")
            p.data = np.array(state[name], dtype=np.float64)
        for norm in self.target.norms():
            norm.state.running_mean = np.array(state[f"{norm.name}.running_mean"])
            norm.state.running_var = np.array(state[f"{norm.name}.running_var"])

    def config_dict(self) -> dict:
        return asdict(self.config)

    # -- featurisation ----------------------------------------------------------

    def build_graph(self, mol: Molecule, part: MotifPartition) -> HierGraph:
        if self.config.ablation == "no_hc":
            return build_atom_graph(mol)
        if self.config.ablation == "no_ml":
            return build_atom_global_graph(mol)
        return build_hiergraph(mol, part)

    def featurize(self, smiles: str, sequence: str, label: Optional[int] = None) -> Sample:
        mol = parse_smiles(smiles)
        return self.featurize_molecule(mol, sequence, label)

    def featurize_molecule(self, mol: Molecule, sequence: str, label: Optional[int] = None) -> Sample:
        part = fragment(mol)
        g = self.build_graph(mol, part)
        X, _ = initial_features(g, mol)
        return Sample(mol, part, g, X, tokenize(sequence, self.config.vocab_buckets), label)

    # -- forward ------------------------------------------------------------------

    def forward(self, samples: Sequence[Sample], training: bool = False,
                explain: bool = False) -> tuple[Tensor, list[AttentionReport]]:
        """Interaction probabilities, shape ``(B,)``, plus optional attention reports."""
        batch = GraphBatch.from_graphs([s.graph for s in samples], [s.features for s in samples])
        drugs = self.drug.encode_batch(batch)
        tgt = self.target.forward([s.tokens for s in samples], training)
        rows, reports = [], []
        for i, (emb, length) in enumerate(zip(drugs, tgt.lengths)):
            H_P = tgt.H_P[i, :length]
            if not self.levels:
                F_P = nd.mean_cols(H_P)
                if explain:
                    reports.append(AttentionReport(np.zeros(0), np.zeros(0), np.zeros(0)))
            else:
                drug_rows = {"a": emb.H_a, "m": emb.H_m, "g": emb.H_g}
                attns = {lvl: attn_level(H_P, drug_rows[lvl], self.attn_w[lvl]) for lvl in self.levels}
                F_P, B_P, parts = fuse_protein(H_P, list(attns.values()))
                if explain:
                    B_a, B_m = drug_attention_vectors(attns["a"], attns.get("m"))
                    reports.append(AttentionReport(
                        B_P.data.copy(),
                        B_a.data.copy(),
                        B_m.data.copy() if B_m is not None else np.zeros(0),
                        {k: v.data.copy() for k, v in attns.items()},
                        [p.data.copy() for p in parts],
                    ))
            rows.append(nd.concat([emb.H_g.reshape(-1), F_P]))
        probs = self.clf(nd.stack(rows)).reshape(-1)
        return probs, reports

    def predict_proba(self, samples: Sequence[Sample], batch_size: int = 64) -> np.ndarray:
        out = []
        for start in range(0, len(samples), batch_size):
            probs, _ = self.forward(samples[start:start + batch_size], training=False)
            out.append(probs.data.copy())
        return np.concatenate(out) if out else np.zeros(0)

    def explain(self, sample: Sample) -> tuple[float, AttentionReport]:
        probs, reports = self.forward([sample], training=False, explain=True)
        return float(probs.data[0]), reports[0]


def apply_ablation(config: ModelConfig, seed: int = 0) -> DTIModel:
    """Build the model wired for ``config.ablation``.

    ``no_ff`` keeps the last conv output (projected to ``d``); ``no_hi``
    drops the three bilinear attention matrices and uses the mean protein
    row; ``no_hc`` uses the plain atom graph with mean-pooled atoms as the
    drug vector; ``no_ml`` links atoms straight to the global node.
    """
    return DTIModel(config, seed)
