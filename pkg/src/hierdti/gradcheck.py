"""Central finite-difference check of the end-to-end loss gradient.

Used by the test-suite and the acceptance run. Each parameter group is
compared as a whole: ``||fd - tape|| / max(||fd||, ||tape||)``.

Biases feeding straight into a training-mode batch norm have an exactly
zero gradient (the normalisation removes any constant shift), so for them
the ratio is 0/0 and measures round-off only. Such groups are reported as
``zero`` and pass when both norms sit below ``zero_tol``.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import nd
from .interaction import bce_loss
from .model import DTIModel, Sample


@dataclass(frozen=True)
class GroupCheck:
    name: str
    size: int
    checked: int
    tape_norm: float
    fd_norm: float
    rel_err: float
    zero: bool

    def passed(self, tol: float, zero_tol: float) -> bool:
        if self.zero:
            return max(self.tape_norm, self.fd_norm) < zero_tol
        return self.rel_err < tol


def jitter_offsets(model: DTIModel, scale: float = 0.1, seed: int = 0) -> None:
    """Move zero-initialised biases and BN shifts off zero.

    With all offsets at zero, post-ReLU zeros propagate into whole zero rows
    and the attention ReLU sits exactly on its kink, where a central
    difference sees a one-sided slope.
    """
    rng = np.random.default_rng(seed)
    for p in model.parameters():
        if p.name.endswith((".b", ".beta")):
            p.data = p.data + rng.normal(0.0, scale, p.shape)


def _bn_cancelled(model: DTIModel) -> set[str]:
    """Names of biases whose output is immediately batch-normalised."""
    names = {f"{c.name}.b" for c in model.target.convs}
    if model.target.fusion:
        for a in (model.target.aff23, model.target.aff12):
            names |= {f"{a.local.name}.pw1.b", f"{a.local.name}.pw2.b",
                      f"{a.glob.name}.pw1.b", f"{a.glob.name}.pw2.b"}
    return names


def check_model_gradients(
    model: DTIModel,
    samples: Sequence[Sample],
    h: float = 1e-5,
    max_per_group: Optional[int] = None,
    seed: int = 0,
    training: bool = True,
) -> list[GroupCheck]:
    """Compare tape and finite-difference gradients of the mean BCE.

    Embedding tables are probed only on rows the batch looks up (the rest
    have no influence on the loss). ``max_per_group`` caps the number of
    probed entries per group, chosen at random.
    """
    labels = np.array([s.label for s in samples], dtype=np.float64)
    norms = model.target.norms()
    saved = [copy.deepcopy(n.state) for n in norms]

    def restore():
        for n, s in zip(norms, saved):
            n.state = copy.deepcopy(s)

    def loss_value() -> float:
        restore()
        probs, _ = model.forward(samples, training=training)
        return float(bce_loss(probs, labels).data)

    params = model.parameters()
    for p in params:
        p.grad = None
    restore()
    with nd.Tape() as tape:
        probs, _ = model.forward(samples, training=training)
        nd.backward(bce_loss(probs, labels), tape)
    restore()

    rng = np.random.default_rng(seed)
    zero_groups = _bn_cancelled(model)
    used_rows = np.unique(np.concatenate([s.tokens.tokens for s in samples]))
    out = []
    for p in params:
        grad = p.grad if p.grad is not None else np.zeros(p.shape)
        flat = p.data.reshape(-1)
        if p is model.target.embed:
            width = p.shape[1]
            candidates = (used_rows[:, None] * width + np.arange(width)).reshape(-1)
        else:
            candidates = np.arange(flat.size)
        if max_per_group is not None and len(candidates) > max_per_group:
            candidates = rng.choice(candidates, max_per_group, replace=False)
        fd = np.empty(len(candidates))
        for k, i in enumerate(candidates):
            old = flat[i]
            flat[i] = old + h
            up = loss_value()
            flat[i] = old - h
            down = loss_value()
            flat[i] = old
            fd[k] = (up - down) / (2.0 * h)
        tape_vals = grad.reshape(-1)[candidates]
        t_norm, f_norm = float(np.linalg.norm(tape_vals)), float(np.linalg.norm(fd))
        denom = max(t_norm, f_norm)
        rel = float(np.linalg.norm(fd - tape_vals) / denom) if denom > 0 else 0.0
        out.append(GroupCheck(p.name, flat.size, len(candidates), t_norm, f_norm, rel,
                              p.name in zero_groups))
    restore()
    return out
