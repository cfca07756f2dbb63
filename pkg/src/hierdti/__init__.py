"""Hierarchical molecular graphs and attention for drug/target interaction prediction."""

from .data import DtiRecord, load_corpus
from .fragment import MotifPartition, fragment
from .hiergraph import HierGraph, build_hiergraph
from .metrics import EvalResult, average_precision, roc_auc
from .model import DTIModel, ModelConfig
from .smiles import Molecule, parse_smiles
from .trainer import TrainConfig, evaluate, load_model, save_model, train

__version__ = "0.1.0"

__all__ = [
    "DTIModel",
    "DtiRecord",
    "EvalResult",
    "HierGraph",
    "ModelConfig",
    "Molecule",
    "MotifPartition",
    "TrainConfig",
    "average_precision",
    "build_hiergraph",
    "evaluate",
    "fragment",
    "load_corpus",
    "load_model",
    "parse_smiles",
    "roc_auc",
    "save_model",
    "train",
]
