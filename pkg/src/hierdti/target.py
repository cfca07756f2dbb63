"""Protein encoder: overlapping 3-gram tokens, a channel-halving conv stack,
and attentional feature fusion (AFF) of the three conv outputs.

Layout for embedding size ``d``::

    X0 (l x d) -conv-> X1 (d/2) -conv-> X2 (d/4) -conv-> X3 (d/8)
    F23 = AFF(up(X3) -> d/4, X2)
    F12 = AFF(up(F23) -> d/2, X1)
    H_P = F12 @ P            (d/2 -> d)

Every conv is stride 1 with same padding, so all lengths stay ``l``.
Batches are padded to the longest sequence and carry a ``B x L`` mask;
padded rows are held at zero and never enter normalisation statistics.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import nd
from .drug import glorot
from .nd import BatchNormState, Parameter, Tensor

ALPHABET = "ACDEFGHIKLMNPQRSTVWY" + "BZUOX"
_INDEX = {ch: i for i, ch in enumerate(ALPHABET)}
VOCAB_SIZE = len(ALPHABET) ** 3


class SequenceTooShort(ValueError):
    pass


@dataclass(frozen=True)
class ProteinTokens:
    tokens: np.ndarray

    @property
    def l(self) -> int:  # noqa: E743
        return len(self.tokens)


def tokenize(sequence: str, buckets: Optional[int] = None) -> ProteinTokens:
    """Overlapping stride-1 trigrams; unknown residues read as ``X``.

    Index of trigram ``(c1, c2, c3)`` is ``c1*625 + c2*25 + c3`` over the
    fixed 25-letter alphabet; with ``buckets`` it is reduced modulo that
    count.
    """
    seq = sequence.strip().upper()
    if len(seq) < 3:
        raise SequenceTooShort(f"need at least 3 residues, got {len(seq)}")
    x = _INDEX["X"]
    codes = np.array([_INDEX.get(ch, x) for ch in seq], dtype=np.int64)
    n = len(ALPHABET)
    tokens = codes[:-2] * n * n + codes[1:-1] * n + codes[2:]
    if buckets is not None:
        tokens = tokens % buckets
    return ProteinTokens(tokens)


def pad_tokens(batch: Sequence[ProteinTokens]) -> tuple[np.ndarray, np.ndarray]:
    L = max(t.l for t in batch)
    tokens = np.zeros((len(batch), L), dtype=np.int64)
    mask = np.zeros((len(batch), L), dtype=bool)
    for i, t in enumerate(batch):
        tokens[i, :t.l] = t.tokens
        mask[i, :t.l] = True
    return tokens, mask


class _Norm:
    """BatchNorm parameters plus running statistics."""

    def __init__(self, name: str, c: int):
        self.gamma = Parameter(f"{name}.gamma", np.ones(c))
        self.beta = Parameter(f"{name}.beta", np.zeros(c))
        self.state = BatchNormState.fresh(c)
        self.name = name

    def __call__(self, x: Tensor, training: bool, mask=None) -> Tensor:
        return nd.batchnorm(x, self.gamma, self.beta, self.state, training, mask)

    def parameters(self) -> list[Parameter]:
        return [self.gamma, self.beta]


class ConvLayer:
    def __init__(self, name: str, c_in: int, c_out: int, k: int, rng: np.random.Generator):
        self.name = name
        self.w = Parameter(f"{name}.W", glorot(rng, c_in * k, c_out * k, (k, c_in, c_out)))
        self.b = Parameter(f"{name}.b", np.zeros(c_out))
        self.bn = _Norm(f"{name}.bn", c_out)

    def __call__(self, x: Tensor, training: bool, mask) -> Tensor:
        return nd.relu(self.bn(nd.conv1d(x, self.w, self.b), training, mask))

    def parameters(self) -> list[Parameter]:
        return [self.w, self.b] + self.bn.parameters()


class LocalContext:
    """``BN(PW2(ReLU(BN(PW1(x)))))`` with a ``c -> c/r -> c`` bottleneck."""

    def __init__(self, name: str, c: int, r: int, rng: np.random.Generator):
        if c % r:
            raise ValueError(f"AFF reduction ratio {r} must divide channel count {c}")
        inner = c // r
        self.name = name
        self.w1 = Parameter(f"{name}.pw1.W", glorot(rng, c, inner))
        self.b1 = Parameter(f"{name}.pw1.b", np.zeros(inner))
        self.bn1 = _Norm(f"{name}.bn1", inner)
        self.w2 = Parameter(f"{name}.pw2.W", glorot(rng, inner, c))
        self.b2 = Parameter(f"{name}.pw2.b", np.zeros(c))
        self.bn2 = _Norm(f"{name}.bn2", c)

    def __call__(self, x: Tensor, training: bool, mask=None) -> Tensor:
        h = nd.relu(self.bn1(nd.pwconv(x, self.w1, self.b1), training, mask))
        return self.bn2(nd.pwconv(h, self.w2, self.b2), training, mask)

    def parameters(self) -> list[Parameter]:
        return ([self.w1, self.b1] + self.bn1.parameters()
                + [self.w2, self.b2] + self.bn2.parameters())


class AffParams:
    """One fusion step: up-projection of the high-level input plus the gate."""

    def __init__(self, name: str, c_high: int, c: int, r: int, rng: np.random.Generator):
        self.up_w = Parameter(f"{name}.tconv.W", glorot(rng, c_high, c))
        self.up_b = Parameter(f"{name}.tconv.b", np.zeros(c))
        self.local = LocalContext(f"{name}.local", c, r, rng)
        self.glob = LocalContext(f"{name}.global", c, r, rng)

    def parameters(self) -> list[Parameter]:
        return [self.up_w, self.up_b] + self.local.parameters() + self.glob.parameters()


def _maskf(mask: Optional[np.ndarray], shape) -> np.ndarray:
    if mask is None:
        return np.ones(shape[:-1] + (1,))
    return mask.astype(np.float64)[..., None]


def aff_gate(i: Tensor, params: AffParams, training: bool, mask=None) -> Tensor:
    """``sigmoid(L(I) (+) L(mean over positions of I))`` with broadcast addition."""
    batched = i.ndim == 3
    xb = i if batched else i.reshape(1, *i.shape)
    m = mask if mask is not None else np.ones(xb.shape[:2], dtype=bool)
    local = params.local(xb, training, m)
    pooled = nd.masked_mean(xb, m)
    # a single pooled row has no batch statistics; fall back to running moments
    glob = params.glob(pooled, training and pooled.shape[0] > 1)
    gate = nd.sigmoid(local + glob.reshape(glob.shape[0], 1, glob.shape[1]))
    return gate if batched else gate.reshape(*i.shape)


def aff_fuse(i1: Tensor, i2: Tensor, params: AffParams, training: bool = False,
             mask: Optional[np.ndarray] = None) -> Tensor:
    """Blend ``i1`` (high level, already channel-aligned) and ``i2`` (low level).

    ``O = M * I1 + (1 - M) * I2`` with ``M = aff_gate(I1 + I2)``, evaluated as
    ``I2 + M * (I1 - I2)`` so that equal inputs come back bit-for-bit.
    """
    if i1.shape != i2.shape:
        raise nd.ShapeMismatch(f"aff_fuse: {i1.shape} vs {i2.shape}")
    gate = aff_gate(i1 + i2, params, training, mask)
    return i2 + gate * (i1 - i2)


@dataclass
class TargetOutputs:
    H_P: Tensor
    mask: np.ndarray
    lengths: list[int]


class TargetEncoder:
    def __init__(self, d: int, rng: np.random.Generator, kernel: int = 15, ratio: int = 4,
                 fusion: bool = True, vocab_size: int = VOCAB_SIZE, prefix: str = "target"):
        if d % 8:
            raise ValueError("embedding size must be divisible by 8")
        self.d = d
        self.fusion = fusion
        self.embed = Parameter(f"{prefix}.embed", rng.normal(0.0, 1.0, size=(vocab_size, d)))
        chans = [d, d // 2, d // 4, d // 8]
        self.convs = [ConvLayer(f"{prefix}.conv{i}", chans[i], chans[i + 1], kernel, rng)
                      for i in range(3)]
        if fusion:
            self.aff23 = AffParams(f"{prefix}.aff23", d // 8, d // 4, ratio, rng)
            self.aff12 = AffParams(f"{prefix}.aff12", d // 4, d // 2, ratio, rng)
            c_out = d // 2
        else:
            c_out = d // 8
        self.proj_w = Parameter(f"{prefix}.proj.W", glorot(rng, c_out, d))
        self.proj_b = Parameter(f"{prefix}.proj.b", np.zeros(d))

    def parameters(self) -> list[Parameter]:
        out = [self.embed]
        for c in self.convs:
            out += c.parameters()
        if self.fusion:
            out += self.aff23.parameters() + self.aff12.parameters()
        return out + [self.proj_w, self.proj_b]

    def norms(self) -> list[_Norm]:
        out = [c.bn for c in self.convs]
        if self.fusion:
            for a in (self.aff23, self.aff12):
                out += [a.local.bn1, a.local.bn2, a.glob.bn1, a.glob.bn2]
        return out

    def conv_stack(self, x0: Tensor, training: bool, mask=None) -> tuple[Tensor, Tensor, Tensor]:
        x1 = self.convs[0](x0, training, mask)
        x2 = self.convs[1](x1, training, mask)
        x3 = self.convs[2](x2, training, mask)
        return x1, x2, x3

    def _up(self, x: Tensor, params: AffParams, mfloat: np.ndarray) -> Tensor:
        return nd.tconv_channels(x, params.up_w, params.up_b) * mfloat

    def forward(self, tokens: Sequence[ProteinTokens], training: bool = False) -> TargetOutputs:
        ids, mask = pad_tokens(tokens)
        mf = _maskf(mask, ids.shape + (1,))
        x0 = nd.embedding(self.embed, ids) * mf
        x1, x2, x3 = self.conv_stack(x0, training, mask)
        if self.fusion:
            f23 = aff_fuse(self._up(x3, self.aff23, mf), x2, self.aff23, training, mask)
            top = aff_fuse(self._up(f23, self.aff12, mf), x1, self.aff12, training, mask)
        else:
            top = x3
        H = nd.pwconv(top, self.proj_w, self.proj_b) * mf
        return TargetOutputs(H, mask, [t.l for t in tokens])


def encode_target(encoder: TargetEncoder, tokens: ProteinTokens, training: bool = False) -> Tensor:
    """``l x d`` embedding of a single sequence."""
    out = encoder.forward([tokens], training)
    return out.H_P[0]
