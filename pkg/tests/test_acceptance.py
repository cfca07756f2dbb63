"""Acceptance criteria 1-10, one check each.

Run under pytest (a summary section lists one line per criterion) or
directly with ``python tests/test_acceptance.py``. Criterion 10 needs the
Human corpus via ``HIERDTI_HUMAN_CORPUS`` and is reported only.
"""

from __future__ import annotations

import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from hierdti.data import SplitSpec, load_corpus, split, summarize
from hierdti.drug import DrugEncoder, gin_forward
from hierdti.fragment import fragment, partition_to_dict
from hierdti.gradcheck import check_model_gradients, jitter_offsets
from hierdti.hiergraph import (
    N_NODE_FEATURES,
    build_atom_global_graph,
    build_hiergraph,
    initial_features,
)
from hierdti.interaction import attn_level, bce_loss, drug_attention_vectors, fuse_protein
from hierdti.metrics import roc_auc
from hierdti.model import DTIModel, ModelConfig, apply_ablation
from hierdti.nd import Tensor
from hierdti.smiles import parse_smiles
from hierdti.synthetic import random_corpus, separable_pairs
from hierdti.target import AffParams, aff_fuse
from hierdti.trainer import TrainConfig, train

FIXTURES = Path(__file__).parent / "fixtures"

GRADCHECK_PROTEINS = [("MKVLAEWQ", 1), ("GHTRSPLN", 0), ("ACDKEYWV", 1),
                      ("PPGLIWKR", 0), ("TTSNRDEQ", 1), ("YFMHGACL", 0)]


def check_1():
    """Tape vs central differences on a d=8 model, toluene, proteins of l=6."""
    t0 = time.perf_counter()
    model = DTIModel(ModelConfig(d=8, gin_layers=3, conv_kernel=15, aff_ratio=1), seed=0)
    jitter_offsets(model)
    samples = [model.featurize("Cc1ccccc1", seq, y) for seq, y in GRADCHECK_PROTEINS]
    assert all(s.tokens.l == 6 for s in samples)
    groups = check_model_gradients(model, samples, h=1e-5)
    elapsed = time.perf_counter() - t0
    failed = [g.name for g in groups if not g.passed(1e-4, 1e-8)]
    worst = max(g.rel_err for g in groups if not g.zero)
    n_zero = sum(g.zero for g in groups)
    ok = not failed and elapsed < 60
    return ok, (f"{len(groups)} groups, max rel err {worst:.2e} (< 1e-4), "
                f"{n_zero} batch-norm-cancelled bias groups at zero, {elapsed:.1f} s (< 60 s)"
                + (f"; failing: {failed}" if failed else ""))


def check_2():
    """Overfit the 32-pair separable fixture."""
    t0 = time.perf_counter()
    pairs = separable_pairs(32, seed=0)
    cfg = TrainConfig(d=64, max_epochs=200, patience=200, eval_train=True, seed=0)
    res = train(pairs, pairs, cfg)
    elapsed = time.perf_counter() - t0
    hit = next((h["epoch"] for h in res.history
                if h["train_auc"] == 1.0 and h["train_bce"] < 0.05), None)
    ok = hit is not None and elapsed < 300
    last = res.history[-1]
    return ok, (f"train AUC 1.0 and BCE < 0.05 first at epoch {hit} (<= 200); final epoch "
                f"{last['epoch']} AUC {last['train_auc']:.3f} BCE {last['train_bce']:.2e}; "
                f"{elapsed:.1f} s (< 300 s)")


def check_3():
    t0 = time.perf_counter()
    rows = [line.split("\t") for line in (FIXTURES / "fragment_reference.tsv").read_text().splitlines()]
    waived = {line.split("\t")[0] for line in
              (FIXTURES / "fragment_waivers.tsv").read_text().splitlines()[1:] if line.strip()}
    disagree = []
    for smiles, body in rows:
        ref = json.loads(body)
        m = parse_smiles(smiles)
        got = partition_to_dict(m, fragment(m))
        if got["motifs"] != ref["motifs"] or got["cut_bonds"] != ref["cut_bonds"]:
            disagree.append(smiles)
    elapsed = time.perf_counter() - t0
    agree = len(rows) - len(disagree)
    unwaived = [s for s in disagree if s not in waived]
    ok = len(rows) == 50 and agree >= 45 and not unwaived and elapsed < 10
    return ok, (f"{agree}/{len(rows)} exact partitions (>= 45), {len(unwaived)} unwaived "
                f"disagreements, {elapsed:.2f} s (< 10 s)")


def check_4():
    t0 = time.perf_counter()
    corpus = random_corpus(10000, seed=0)
    bad = 0
    for smi in corpus:
        m = parse_smiles(smi)
        part = fragment(m)
        g = build_hiergraph(m, part)
        a, k = m.n_atoms, part.n_motifs
        if g.n_nodes != a + k + 1 or g.n_edges != 2 * len(m.bonds) + a + k:
            bad += 1
    elapsed = time.perf_counter() - t0
    ok = len(corpus) == 10000 and bad == 0 and elapsed < 30
    return ok, f"{len(corpus)} molecules, {bad} count violations, {elapsed:.1f} s (< 30 s)"


def _layers(enc, g, h0):
    out, h = [], Tensor(h0)
    for layer in enc.layers:
        h = gin_forward(h, g.src, g.dst, g.etype, [layer])
        out.append(h.data)
    return out


def check_5():
    rng = np.random.default_rng(5)
    enc = DrugEncoder(N_NODE_FEATURES, 16, 3, rng)
    for layer in enc.layers:
        layer.b1.data = rng.normal(scale=0.1, size=16)
    violations, n_mol = 0, 0
    for smi in random_corpus(100, seed=5):
        m = parse_smiles(smi)
        g = build_hiergraph(m, fragment(m))
        X, _ = initial_features(g, m)
        base = _layers(enc, g, enc.project_inputs(X).data)
        for rows, keep in ((list(g.motif_nodes()), g.n_atoms), ([g.global_index], g.global_index)):
            Xp = X.copy()
            Xp[rows] += rng.normal(size=(len(rows), X.shape[1]))
            pert = _layers(enc, g, enc.project_inputs(Xp).data)
            violations += sum(not np.array_equal(a[:keep], b[:keep]) for a, b in zip(base, pert))
        n_mol += 1
    return violations == 0, (f"{n_mol} molecules x 3 layers, {violations} layers where atom "
                             "(or, for global perturbations, atom and motif) rows changed")


def check_6():
    rng = np.random.default_rng(6)
    enc = DrugEncoder(N_NODE_FEATURES, 16, 3, rng)
    worst = 0.0
    for smi in random_corpus(20, seed=6):
        m = parse_smiles(smi)
        g = build_hiergraph(m, fragment(m))
        ref = enc.encode(g, initial_features(g, m)[0]).H_g.data
        for _ in range(20):
            m2 = m.permuted(rng.permutation(m.n_atoms).tolist())
            g2 = build_hiergraph(m2, fragment(m2))
            H = enc.encode(g2, initial_features(g2, m2)[0]).H_g.data
            worst = max(worst, float(np.max(np.abs(H - ref))))
    return worst < 1e-9, f"20 molecules x 20 relabelings, max |dH_g| {worst:.1e} (< 1e-9)"


def check_7():
    rng = np.random.default_rng(7)
    worst_bp, worst_sm, negative, aff_bad = 0.0, 0.0, 0, 0
    for _ in range(1000):
        l, d = int(rng.integers(1, 40)), int(rng.choice([4, 8, 16]))
        na, nm = int(rng.integers(1, 30)), int(rng.integers(1, 10))
        scale = float(rng.choice([0.1, 1.0, 5.0]))
        H_P = Tensor(rng.normal(scale=scale, size=(l, d)))
        levels = [Tensor(rng.normal(size=(n, d))) for n in (na, nm, 1)]
        attns = [attn_level(H_P, H, Tensor(rng.normal(size=(d, d)))) for H in levels]
        _, B_P, parts = fuse_protein(H_P, attns)
        B_a, B_m = drug_attention_vectors(attns[0], attns[1])
        worst_bp = max(worst_bp, abs(float(B_P.data.sum()) - 3.0))
        worst_sm = max(worst_sm, max(abs(float(p.data.sum()) - 1.0) for p in parts))
        negative += int((B_P.data < 0).any() or (B_a.data < 0).any() or (B_m.data < 0).any())
        c = int(rng.choice([2, 4, 8]))
        params = AffParams("aff", c, c, int(rng.choice([1, 2])), rng)
        for p in params.parameters():
            p.data = p.data + rng.normal(size=p.shape)
        I = Tensor(rng.normal(scale=scale, size=(max(l, 2), c)))  # noqa: E741
        aff_bad += int(not np.array_equal(aff_fuse(I, I, params, bool(rng.integers(2))).data, I.data))
    ok = worst_bp <= 1e-9 and worst_sm <= 1e-12 and negative == 0 and aff_bad == 0
    return ok, (f"1000 trials: max |sum B_P - 3| {worst_bp:.1e}, max |sum softmax - 1| {worst_sm:.1e}, "
                f"{negative} negative entries, {aff_bad} aff_fuse(I, I) != I")


def check_8():
    rng = np.random.default_rng(8)
    worst, n = 0.0, 0
    while n < 100:
        size = int(rng.integers(2, 51))
        y = rng.integers(0, 2, size=size)
        if not 0 < y.sum() < size:
            continue
        s = np.round(rng.uniform(size=size), int(rng.integers(1, 4)))
        pos, neg = s[y == 1], s[y == 0]
        brute = sum(1.0 if p > q else 0.5 if p == q else 0.0 for p in pos for q in neg)
        worst = max(worst, abs(roc_auc(s, y) - brute / (len(pos) * len(neg))))
        n += 1
    ln2 = abs(float(bce_loss(Tensor(np.full(4, 0.5)), [1, 0, 0, 1]).data) - math.log(2))
    pair = float(bce_loss(Tensor([0.9, 0.2]), [1, 0]).data)
    ok = worst <= 1e-12 and ln2 <= 1e-12 and abs(pair - 0.164252) <= 1e-6
    return ok, (f"AUC vs brute force max err {worst:.1e} over 100 instances; "
                f"|BCE(0.5) - ln 2| {ln2:.1e}; two-element batch {pair:.6f}")


def check_9():
    pairs = separable_pairs(32, seed=0)
    errors = []
    for ablation in ("no_ff", "no_hi", "no_hc", "no_ml"):
        try:
            res = train(pairs[:24], pairs[24:], TrainConfig(d=16, max_epochs=1, patience=1, ablation=ablation))
            if len(res.history) != 1 or not np.isfinite(res.history[0]["train_loss"]):
                errors.append(ablation)
        except Exception as exc:  # report any failure as a criterion miss
            errors.append(f"{ablation}: {exc}")
    diffs = {d: apply_ablation(ModelConfig(d=d)).n_parameters()
             - apply_ablation(ModelConfig(d=d, ablation="no_hi")).n_parameters() for d in (16, 64)}
    bad_counts = 0
    for smi in random_corpus(200, seed=9):
        m = parse_smiles(smi)
        g = build_atom_global_graph(m)
        bad_counts += int(g.n_nodes != m.n_atoms + 1 or g.n_edges != 2 * len(m.bonds) + m.n_atoms
                          or g.n_motifs != 0)
    ok = not errors and all(v == 3 * d * d for d, v in diffs.items()) and bad_counts == 0
    return ok, (f"4 ablations trained 1 epoch ({len(errors)} failures{': ' + str(errors) if errors else ''}); "
                f"no_hi parameter gap {diffs} (= 3 d^2); no_ml count formula violated on {bad_counts}/200")


def check_10():
    path = os.environ.get("HIERDTI_HUMAN_CORPUS")
    if not path:
        return None, "skipped: set HIERDTI_HUMAN_CORPUS to a Human corpus TSV to run"
    records = load_corpus(path)
    s = summarize(records)
    stats_ok = (s.interactions, s.positives, s.negatives) == (6738, 3369, 3369)
    parts = split(records, SplitSpec(seed=0))
    pick = lambda idx: [records[i] for i in idx]  # noqa: E731
    res = train(pick(parts.train), pick(parts.val), TrainConfig(d=64, max_epochs=20, patience=20))
    return (stats_ok and res.best_val_auc > 0.80), (
        f"corpus statistics (6738 pairs, 3369 positive) match: {stats_ok}; best val AUC {res.best_val_auc:.3f} "
        f"(target > 0.80) at epoch {res.best_epoch} of <= 20")


CHECKS = {i: globals()[f"check_{i}"] for i in range(1, 11)}


def _line(i, ok, detail):
    status = "PASS" if ok else ("SKIP" if ok is None else "FAIL")
    suffix = " (non-gating)" if i == 10 else ""
    return f"criterion {i:2d}{suffix}: {status} - {detail}"


def _record(i):
    from conftest import ACCEPTANCE_LINES

    ok, detail = CHECKS[i]()
    ACCEPTANCE_LINES[i] = _line(i, ok, detail)
    print(ACCEPTANCE_LINES[i])
    return ok, detail


@pytest.mark.parametrize("i", range(1, 10))
def test_criterion(i):
    ok, detail = _record(i)
    assert ok, detail


def test_criterion_10_reported_only():
    _record(10)


if __name__ == "__main__":
    sys.path.insert(0, str(Path(__file__).parent))
    results = []
    for i, fn in CHECKS.items():
        ok, detail = fn()
        results.append(ok)
        print(_line(i, ok, detail), flush=True)
    sys.exit(0 if all(r is not False for r in results[:9]) else 1)
