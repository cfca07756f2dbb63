"""Corpus loading, affinity thresholding and split protocols."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

AFFINITY_THRESHOLD = 6.0


class ParseError(ValueError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class EmptyCorpus(ValueError):
    pass


class TooFewRecords(ValueError):
    pass


@dataclass(frozen=True)
class DtiRecord:
    smiles: str
    sequence: str
    label: int


@dataclass(frozen=True)
class CorpusSummary:
    targets: int
    drugs: int
    interactions: int
    positives: int
    negatives: int
    duplicate_pairs: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _parse_label(raw: str, lineno: int) -> int:
    try:
        value = float(raw)
    except ValueError:
        raise ParseError(lineno, f"label {raw!r} is not a number") from None
    if value not in (0.0, 1.0):
        raise ParseError(lineno, f"label must be 0 or 1, got {raw!r}")
    return int(value)


def load_corpus(path, fmt: str = "auto") -> list[DtiRecord]:
    """Read ``smiles<TAB>sequence<TAB>label`` lines (or the space-separated legacy layout).

    A first line whose label column is the word ``label`` is treated as a
    header. Blank lines are skipped; anything else malformed raises
    :class:`ParseError` carrying the 1-based line number.
    """
    if fmt not in ("auto", "tsv", "legacy"):
        raise ValueError(f"unknown corpus format {fmt!r}")
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            use_tab = fmt == "tsv" or (fmt == "auto" and "\t" in line)
            fields = line.split("\t") if use_tab else line.split()
            if len(fields) != 3:
                raise ParseError(lineno, f"expected 3 fields, found {len(fields)}")
            smiles, seq, raw = (f.strip() for f in fields)
            if lineno == 1 and raw.lower() == "label":
                continue
            if not smiles or not seq:
                raise ParseError(lineno, "empty SMILES or sequence")
            records.append(DtiRecord(smiles, seq, _parse_label(raw, lineno)))
    if not records:
        raise EmptyCorpus(f"{path} contains no records")
    return records


def write_corpus(path, records: Sequence[DtiRecord]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(f"{r.smiles}\t{r.sequence}\t{r.label}\n")


def summarize(records: Sequence[DtiRecord]) -> CorpusSummary:
    pairs = [(r.smiles, r.sequence) for r in records]
    pos = sum(r.label for r in records)
    return CorpusSummary(
        targets=len({r.sequence for r in records}),
        drugs=len({r.smiles for r in records}),
        interactions=len(records),
        positives=pos,
        negatives=len(records) - pos,
        duplicate_pairs=len(pairs) - len(set(pairs)),
    )


def affinity_to_label(score: float, threshold: float = AFFINITY_THRESHOLD) -> int:
    """1 when the affinity score reaches the threshold (inclusive)."""
    if not math.isfinite(score):
        raise ValueError("affinity score must be finite")
    return int(score >= threshold)


# -- splits -------------------------------------------------------------------------

SPLIT_MODES = ("ratio_8_1_1", "kfold", "fixed_files", "train_carve_20")


@dataclass(frozen=True)
class SplitSpec:
    mode: str = "ratio_8_1_1"
    seed: int = 0
    k: int = 5

    def __post_init__(self):
        if self.mode not in SPLIT_MODES:
            raise ValueError(f"unknown split mode {self.mode!r}")
        if self.mode == "kfold" and self.k < 2:
            raise ValueError("k-fold split needs k >= 2")

    @classmethod
    def parse(cls, text: str, seed: int = 0) -> "SplitSpec":
        """``ratio``, ``kfold:K``, ``carve20`` or ``fixed``."""
        if text in ("ratio", "ratio_8_1_1"):
            return cls("ratio_8_1_1", seed)
        if text.startswith("kfold"):
            _, _, k = text.partition(":")
            return cls("kfold", seed, int(k or 5))
        if text in ("carve20", "train_carve_20"):
            return cls("train_carve_20", seed)
        if text in ("fixed", "fixed_files"):
            return cls("fixed_files", seed)
        raise ValueError(f"unknown split {text!r}")


@dataclass(frozen=True)
class Split:
    train: list[int]
    val: list[int]
    test: list[int]

    def to_dict(self) -> dict:
        return {"train": self.train, "val": self.val, "test": self.test}


def _ratio(n: int, rng: np.random.Generator) -> Split:
    if n < 10:
        raise TooFewRecords(f"8:1:1 split needs at least 10 records, got {n}")
    perm = rng.permutation(n).tolist()
    n_test = int(round(n * 0.1))
    n_val = int(round(n * 0.1))
    n_train = n - n_val - n_test
    return Split(sorted(perm[:n_train]), sorted(perm[n_train:n_train + n_val]),
                 sorted(perm[n_train + n_val:]))


def _carve(indices: list[int], fraction: float, rng: np.random.Generator) -> tuple[list[int], list[int]]:
    perm = [indices[i] for i in rng.permutation(len(indices))]
    n_val = int(round(len(indices) * fraction))
    return sorted(perm[n_val:]), sorted(perm[:n_val])


def kfold(n: int, k: int, seed: int) -> list[Split]:
    """``k`` folds; each record lands in exactly one test fold.

    The non-test part of every fold is cut 8:1 into train and validation.
    """
    if n < k:
        raise TooFewRecords(f"{k}-fold split needs at least {k} records, got {n}")
    rng = np.random.default_rng(seed)
    folds = np.array_split(rng.permutation(n), k)
    out = []
    for i in range(k):
        rest = sorted(int(x) for j, f in enumerate(folds) if j != i for x in f)
        train, val = _carve(rest, 1.0 / 9.0, rng)
        out.append(Split(train, val, sorted(int(x) for x in folds[i])))
    return out


def split(records: Sequence, spec: SplitSpec, test: Optional[Sequence] = None,
          val: Optional[Sequence] = None):
    """Index-level split of ``records`` according to ``spec``.

    ``ratio_8_1_1`` returns a single :class:`Split`; ``kfold`` a list of
    them. ``train_carve_20`` moves a random 20% of ``records`` (the provided
    training file) into validation and leaves ``test`` (indices into the
    separate test file) untouched. ``fixed_files`` keeps all of ``records``
    for training and the provided files for validation and test.
    """
    n = len(records)
    rng = np.random.default_rng(spec.seed)
    if spec.mode == "ratio_8_1_1":
        return _ratio(n, rng)
    if spec.mode == "kfold":
        return kfold(n, spec.k, spec.seed)
    if spec.mode == "train_carve_20":
        if n < 2:
            raise TooFewRecords("need at least 2 training records to carve a validation set")
        train, val_idx = _carve(list(range(n)), 0.2, rng)
        return Split(train, val_idx, list(range(len(test))) if test is not None else [])
    return Split(list(range(n)),
                 list(range(len(val))) if val is not None else [],
                 list(range(len(test))) if test is not None else [])


def write_manifest(path, split_result, spec: SplitSpec) -> None:
    if isinstance(split_result, Split):
        body = {"mode": spec.mode, "seed": spec.seed, **split_result.to_dict()}
    else:
        body = {"mode": spec.mode, "seed": spec.seed, "k": spec.k,
                "folds": [s.to_dict() for s in split_result]}
    Path(path).write_text(json.dumps(body, indent=1) + "\n", encoding="utf-8")
