import math

import numpy as np
import pytest

from hierdti import nd
from hierdti.interaction import (
    Classifier,
    attn_level,
    bce_loss,
    drug_attention_vectors,
    fuse_protein,
    predict,
)
from hierdti.nd import Parameter, Tensor

from conftest import numeric_grad, tape_grads


def softmax(x):
    e = np.exp(x - x.max())
    return e / e.sum()


def test_attn_level_examples(rng):
    out = attn_level(Tensor([[1.0, 0.0]]), Tensor([[1.0, 2.0]]), Tensor(np.eye(2))).data
    assert np.array_equal(out, [[1.0]])
    assert attn_level(Tensor([[1.0, 0.0]]), Tensor([[0.0, 3.0]]), Tensor(np.eye(2))).data[0, 0] == 0.0
    P, H, W = rng.normal(size=(3, 2)), rng.normal(size=(4, 2)), rng.normal(size=(2, 2))
    out = attn_level(Tensor(P), Tensor(H), Tensor(W)).data
    assert out.shape == (3, 4)
    assert np.allclose(out, np.maximum(P @ W @ H.T, 0), rtol=0, atol=1e-15)
    with pytest.raises(nd.ShapeMismatch):
        attn_level(Tensor(P), Tensor(H), Tensor(np.eye(3)))


def test_fuse_protein_single_segment(rng):
    H = rng.normal(size=(1, 4))
    attns = [Tensor(rng.uniform(size=(1, n))) for n in (5, 2, 1)]
    F, B, parts = fuse_protein(Tensor(H), attns)
    assert np.array_equal(B.data, [3.0])
    assert np.allclose(F.data, 3 * H[0], rtol=0, atol=1e-15)


def test_fuse_protein_constant_attention(rng):
    H = rng.normal(size=(6, 4))
    attns = [Tensor(np.full((6, n), 0.7)) for n in (5, 2, 1)]
    _, B, _ = fuse_protein(Tensor(H), attns)
    assert np.allclose(B.data, 0.5, rtol=0, atol=1e-15)


def test_fuse_protein_oracle(rng):
    H = rng.normal(size=(5, 4))
    mats = [np.maximum(rng.normal(size=(5, n)), 0) for n in (7, 3, 1)]
    F, B, parts = fuse_protein(Tensor(H), [Tensor(m) for m in mats])
    B_ref = sum(softmax(m.mean(axis=1)) for m in mats)
    assert np.allclose(B.data, B_ref, rtol=0, atol=1e-14)
    assert np.allclose(F.data, H.T @ B_ref, rtol=0, atol=1e-13)
    assert abs(B.data.sum() - 3) < 1e-9 and np.all(B.data >= 0) and np.all(B.data < 3)
    assert all(abs(p.data.sum() - 1) <= 1e-12 for p in parts)
    with pytest.raises(nd.ShapeMismatch):
        fuse_protein(Tensor(H), [Tensor(np.ones((4, 2)))])


def test_drug_attention_vectors(rng):
    row = rng.uniform(size=(1, 4))
    B_a, B_m = drug_attention_vectors(Tensor(row), Tensor(np.full((1, 3), 2.0)))
    assert np.array_equal(B_a.data, row[0]) and np.array_equal(B_m.data, [2.0, 2.0, 2.0])
    A, M = rng.uniform(size=(5, 4)), rng.uniform(size=(5, 2))
    B_a, B_m = drug_attention_vectors(Tensor(A), Tensor(M))
    assert np.allclose(B_a.data, A.mean(axis=0)) and np.allclose(B_m.data, M.mean(axis=0))
    assert drug_attention_vectors(Tensor(A), None)[1] is None


def test_classifier_shapes_and_zero_weights(rng):
    clf = Classifier(8, rng)
    assert [w.shape for w in clf.weights] == [(16, 8), (8, 4), (4, 1)]
    for p in clf.parameters():
        p.data[:] = 0
    assert predict(Tensor(rng.normal(size=(1, 8))), Tensor(rng.normal(size=8)), clf).data[0] == 0.5


def test_predict_monotone_in_final_bias(rng):
    clf = Classifier(8, rng)
    Hg, F = Tensor(rng.normal(size=(1, 8))), Tensor(rng.normal(size=8))
    probs = []
    for b in np.linspace(-5, 30, 15):
        clf.biases[2].data[:] = b
        probs.append(predict(Hg, F, clf).data[0])
    assert all(x < y for x, y in zip(probs, probs[1:]))
    assert probs[-1] > 1 - 1e-12 and 0 < probs[0]


def test_predict_oracle_and_batch(rng):
    clf = Classifier(4, rng)
    for b in clf.biases:
        b.data = rng.normal(size=b.shape)
    Hg, F = rng.normal(size=(3, 4)), rng.normal(size=(3, 4))
    z = np.hstack([Hg, F])
    relu = lambda x: np.maximum(x, 0)  # noqa: E731
    W, B = [w.data for w in clf.weights], [b.data for b in clf.biases]
    h = relu(relu(z @ W[0] + B[0]) @ W[1] + B[1]) @ W[2] + B[2]
    ref = 1 / (1 + np.exp(-h[:, 0]))
    assert np.allclose(predict(Tensor(Hg), Tensor(F), clf).data, ref, rtol=0, atol=1e-15)
    single = predict(Tensor(Hg[1:2]), Tensor(F[1]), clf).data
    assert np.allclose(single, ref[1:2])


def test_bce_examples():
    assert bce_loss(Tensor([1.0, 0.0]), [1, 0]).data < 1e-11
    assert abs(float(bce_loss(Tensor([0.5, 0.5, 0.5]), [1, 0, 1]).data) - math.log(2)) < 1e-15
    val = float(bce_loss(Tensor([0.9, 0.2]), [1, 0]).data)
    assert abs(val - 0.164252) < 1e-6
    assert abs(val + (math.log(0.9) + math.log(0.8)) / 2) < 1e-15
    with pytest.raises(nd.ShapeMismatch):
        bce_loss(Tensor([0.5]), [1, 0])


def test_bce_gradient(rng):
    p = Parameter("p", rng.uniform(0.05, 0.95, size=6))
    y = rng.integers(0, 2, size=6)
    (g,) = tape_grads(lambda: bce_loss(p, y), [p])
    fd = numeric_grad(lambda: float(bce_loss(p, y).data), p.data, 1e-7)
    assert np.max(np.abs(g - fd) / np.abs(fd)) < 1e-6
