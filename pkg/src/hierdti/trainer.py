"""Training loop, model selection by validation AUC, evaluation and checkpoints."""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import IO, Optional, Sequence

import numpy as np

from . import nd
from .data import DtiRecord
from .interaction import bce_loss
from .metrics import EvalResult, SingleClassOnly, evaluate_scores, roc_auc
from .model import ABLATIONS, DTIModel, ModelConfig, Sample
from .smiles import SmilesError
from .target import SequenceTooShort

log = logging.getLogger(__name__)


class AllRecordsDropped(ValueError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    d: int = 64
    gin_layers: int = 3
    conv_kernel: int = 15
    aff_ratio: int = 4
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    batch_size: int = 32
    max_epochs: int = 100
    patience: int = 10
    seed: int = 0
    ablation: str = "none"
    strict_eq2: bool = False
    vocab_buckets: Optional[int] = None
    eval_train: bool = False

    def __post_init__(self):
        if self.d % 8:
            raise ValueError("d must be divisible by 8")
        if self.patience > self.max_epochs:
            raise ValueError("patience cannot exceed max_epochs")
        if self.ablation not in ABLATIONS:
            raise ValueError(f"unknown ablation {self.ablation!r}")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")

    def model_config(self) -> ModelConfig:
        return ModelConfig(self.d, self.gin_layers, self.conv_kernel, self.aff_ratio,
                           self.ablation, self.strict_eq2, self.vocab_buckets)


def _coerce(text: str, kind):
    text = text.strip()
    if kind is bool or kind == "bool":
        if text.lower() in ("1", "true", "yes", "on"):
            return True
        if text.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {text!r}")
    if kind in (int, "int"):
        return int(text)
    if kind in (float, "float"):
        return float(text)
    if kind in ("Optional[int]",):
        return None if text.lower() in ("", "none") else int(text)
    return text


def parse_config_text(text: str, base: TrainConfig = TrainConfig()) -> TrainConfig:
    """``key = value`` lines; ``#`` starts a comment. Keys are TrainConfig fields."""
    types = {f.name: f.type for f in fields(TrainConfig)}
    updates = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or key not in types:
            raise ValueError(f"config line {lineno}: unknown or malformed entry {raw!r}")
        updates[key] = _coerce(value, types[key])
    return replace(base, **updates)


def load_config(path, base: TrainConfig = TrainConfig()) -> TrainConfig:
    return parse_config_text(Path(path).read_text(encoding="utf-8"), base)


def featurize_records(model: DTIModel, records: Sequence[DtiRecord]) -> tuple[list[Sample], int]:
    """Featurise every record; unparseable ones are dropped and counted."""
    samples, dropped = [], 0
    for r in records:
        try:
            samples.append(model.featurize(r.smiles, r.sequence, r.label))
        except (SmilesError, SequenceTooShort) as exc:
            dropped += 1
            log.debug("dropping %r: %s", r.smiles, exc)
    if dropped:
        log.warning("dropped %d unparseable record(s)", dropped)
    return samples, dropped


@dataclass
class TrainResult:
    model: DTIModel
    history: list[dict]
    optimizer: nd.Adam
    best_epoch: int
    best_val_auc: float
    dropped: int = 0
    extra: dict = field(default_factory=dict)

    def __iter__(self):
        # allows ``model, history = train(...)``
        return iter((self.model, self.history))


def _labels(samples: Sequence[Sample]) -> np.ndarray:
    return np.array([s.label for s in samples], dtype=np.float64)


def _mean_bce(probs: np.ndarray, labels: np.ndarray) -> float:
    return float(bce_loss(nd.Tensor(probs), labels).data)


def train_step(model: DTIModel, batch: Sequence[Sample], opt: nd.Adam) -> float:
    params = model.parameters()
    with nd.Tape() as tape:
        probs, _ = model.forward(batch, training=True)
        loss = bce_loss(probs, _labels(batch))
        nd.backward(loss, tape)
    opt.step(params)
    opt.zero_grad(params)
    return float(loss.data)


def train(
    train_records: Sequence[DtiRecord],
    val_records: Sequence[DtiRecord],
    config: TrainConfig = TrainConfig(),
    events: Optional[IO[str]] = None,
    train_samples: Optional[list[Sample]] = None,
    val_samples: Optional[list[Sample]] = None,
) -> TrainResult:
    """Adam on mean BCE; keep the weights with the best validation AUC.

    Stops after ``patience`` consecutive epochs without a validation AUC
    improvement (``patience=0`` runs exactly one epoch). ``events`` receives
    one JSON object per line per epoch.
    """
    model = DTIModel(config.model_config(), config.seed)
    dropped = 0
    if train_samples is None:
        train_samples, d1 = featurize_records(model, train_records)
        dropped += d1
    if val_samples is None:
        val_samples, d2 = featurize_records(model, val_records)
        dropped += d2
    if not train_samples or not val_samples:
        raise AllRecordsDropped("no usable records left in the training or validation split")
    if len(set(s.label for s in val_samples)) < 2:
        raise SingleClassOnly("validation split holds a single label value, so its AUC is undefined")
    opt = nd.Adam(lr=config.lr, betas=(config.beta1, config.beta2), eps=config.adam_eps)
    rng = np.random.default_rng(config.seed)
    y_val = _labels(val_samples)
    history: list[dict] = []
    best_auc, best_epoch, best_state, stale = -1.0, 0, model.state_dict(), 0

    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(len(train_samples))
        losses, sizes = [], []
        for start in range(0, len(order), config.batch_size):
            batch = [train_samples[i] for i in order[start:start + config.batch_size]]
            losses.append(train_step(model, batch, opt))
            sizes.append(len(batch))
        val_probs = model.predict_proba(val_samples)
        entry = {
            "event": "epoch",
            "epoch": epoch,
            "train_loss": float(np.average(losses, weights=sizes)),
            "val_auc": roc_auc(val_probs, y_val),
            "val_loss": _mean_bce(val_probs, y_val),
        }
        if config.eval_train:
            tr_probs = model.predict_proba(train_samples)
            y_tr = _labels(train_samples)
            entry["train_auc"] = roc_auc(tr_probs, y_tr)
            entry["train_bce"] = _mean_bce(tr_probs, y_tr)
        history.append(entry)
        if events is not None:
            events.write(json.dumps(entry) + "\n")
        log.info("epoch %d loss %.4f val_auc %.4f", epoch, entry["train_loss"], entry["val_auc"])
        if entry["val_auc"] > best_auc:
            best_auc, best_epoch, best_state, stale = entry["val_auc"], epoch, model.state_dict(), 0
        else:
            stale += 1
        if stale >= config.patience:
            break

    model.load_state_dict(best_state)
    if events is not None:
        events.write(json.dumps({"event": "done", "best_epoch": best_epoch,
                                 "best_val_auc": best_auc, "dropped": dropped}) + "\n")
    return TrainResult(model, history, opt, best_epoch, best_auc, dropped)


def evaluate(model: DTIModel, records: Sequence[DtiRecord] | Sequence[Sample],
             threshold: float = 0.5) -> EvalResult:
    if not records:
        raise ValueError("evaluate() needs at least one record")
    if isinstance(records[0], Sample):
        samples = list(records)
    else:
        samples, _ = featurize_records(model, records)
    probs = model.predict_proba(samples)
    return evaluate_scores(probs, _labels(samples), threshold)


# -- checkpoints ------------------------------------------------------------------------


def save_model(path, model: DTIModel, config: TrainConfig, optimizer: Optional[nd.Adam] = None,
               metrics: Optional[dict] = None) -> None:
    meta = {"train_config": asdict(config), "metrics": metrics or {}}
    nd.save_checkpoint(path, model.state_dict(), meta, optimizer)


def load_model(path) -> tuple[DTIModel, TrainConfig, dict]:
    state, meta, _ = nd.load_checkpoint(path)
    config = TrainConfig(**meta["train_config"])
    model = DTIModel(config.model_config(), config.seed)
    model.load_state_dict(state)
    return model, config, meta
