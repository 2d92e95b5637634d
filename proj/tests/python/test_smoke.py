import numpy as np
import pytest

import matforge as mf


def test_relu_and_fc():
    x = np.array([[-1.0, 2.0, -3.0, 4.0]])
    assert np.array_equal(mf.relu(x), [[0.0, 2.0, 0.0, 4.0]])

    w = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [0.0, 0.0]])
    b = np.array([1.0, -1.0])
    y = mf.fc(x, w, b)
    assert np.allclose(y, [[-1.0 + -3.0 + 1.0, 2.0 + -3.0 - 1.0]])


def test_conv2d_identity_kernel():
    x = np.arange(9, dtype=float).reshape(1, 1, 3, 3)
    w = np.zeros((1, 1, 1, 1))
    w[0, 0, 0, 0] = 2.0
    b = np.zeros(1)
    assert np.allclose(mf.conv2d(x, w, b), 2.0 * x)


def test_maxpool_ramp():
    x = np.arange(16, dtype=float).reshape(1, 1, 4, 4)
    out, argmax = mf.maxpool(x, 2, 2)
    assert np.array_equal(out.reshape(-1), [5, 7, 13, 15])
    assert argmax == [5, 7, 13, 15]


def test_softmax_rows_sum_to_one():
    logits = np.random.default_rng(0).normal(size=(4, 10))
    probs = mf.softmax(logits)
    assert np.allclose(probs.sum(axis=1), 1.0)
    loss, probs2, grad = mf.softmax_loss(logits, [0, 1, 2, 3])
    assert loss > 0
    assert np.allclose(probs, probs2)
    assert np.allclose(grad.sum(axis=1), 0.0, atol=1e-12)


def test_lr_schedule():
    assert mf.lr_at(0) == pytest.approx(1e-4)
    assert mf.lr_at(999) == pytest.approx(1e-4)
    assert mf.lr_at(1000) == pytest.approx(1e-5)


def test_adagrad_scalar():
    p, a = mf.adagrad_step(np.array([1.0]), np.array([2.0]), np.array([0.0]), lr=0.5)
    assert a[0] == pytest.approx(4.0)
    assert p[0] == pytest.approx(1.0 - 0.5 * 2.0 / 2.0, rel=1e-6)


def test_architecture_shapes():
    shapes = mf.infer_shapes(mf.vanilla_spec(227))
    assert [1, 96, 55, 55] in shapes
    assert [1, 7776] in shapes
    deep = mf.infer_shapes(mf.deep_spec(227))
    assert [1, 96, 55, 55] in deep
    assert [1, 384, 6, 6] in deep
    branched = mf.infer_shapes(mf.branched_spec())
    assert [1, 8192] in branched

    with pytest.raises(ValueError):
        mf.vanilla_spec(5)


def test_forward_probabilities():
    spec = mf.vanilla_spec(35)
    batch = np.random.default_rng(1).random((2, 3, 35, 35)).astype(np.float32)
    probs = mf.forward(spec, 7, batch)
    assert probs.shape == (2, 10)
    assert np.allclose(probs.sum(axis=1), 1.0, atol=1e-5)
    assert np.allclose(probs, mf.forward(spec, 7, batch))  # deterministic


def test_train_overfits_tiny_set():
    rng = np.random.default_rng(2)
    images, labels = [], []
    for cls in range(10):
        color = np.array([(cls * 7) % 10, (cls * 3) % 10, cls], dtype=np.float32) / 10.0
        for _ in range(2):
            img = np.tile(color[:, None, None], (1, 40, 40))
            img += rng.normal(0, 0.02, size=img.shape).astype(np.float32)
            images.append(img.astype(np.float32))
            labels.append(cls)
    losses, acc = mf.train(mf.vanilla_spec(35), images, labels, iterations=1500, lr=3e-3, seed=9)
    assert losses[-1] < losses[0]
    assert acc >= 0.9


def test_decompose_reconstructs():
    img = np.random.default_rng(3).random((3, 24, 24)).astype(np.float32)
    shading, reflectance = mf.decompose(img)
    assert shading.shape == (1, 24, 24)
    assert reflectance.shape == (3, 24, 24)
    assert np.abs(shading * reflectance - img).max() <= 1e-6

    six = mf.select_input(img, "branched")
    assert six.shape == (6, 24, 24)


def test_gaussian_blur_constant():
    plane = np.full((1, 9, 9), 0.4, dtype=np.float32)
    assert np.allclose(mf.gaussian_blur(plane, 3.0), 0.4, atol=1e-6)


def test_lm_bank_and_patch_features():
    bank = mf.lm_bank()
    assert bank.shape == (48, 49, 49)
    sums = bank.reshape(48, -1).sum(axis=1)
    assert np.abs(sums[:44]).max() < 1e-10
    assert np.allclose(sums[44:], 1.0)

    feat = mf.patch_features(np.full((60, 60), 0.5))
    assert np.abs(feat[:44]).max() < 1e-10
    assert np.allclose(feat[44:], 0.5)


def test_pca_rank2():
    rng = np.random.default_rng(4)
    u = np.array([1.0, 1.0, 0, 0, 0]) / np.sqrt(2)
    v = np.array([0, 0, 1.0, 1.0, 0]) / np.sqrt(2)
    data = np.outer(rng.normal(0, 3, 100), u) + np.outer(rng.normal(0, 1, 100), v)
    mean, comps, ev = mf.pca_fit(data)
    assert np.allclose(comps @ comps.T, np.eye(2), atol=1e-9)
    assert ev[0] > ev[1] > 0
    x, y = mf.pca_project(mean, comps, data[0])
    rec = mean + x * comps[0] + y * comps[1]
    assert np.allclose(rec, data[0], atol=1e-8)


def test_confusion_row_stochastic():
    rows, counts = mf.confusion([0, 0, 1, 1], [0, 1, 1, 1])
    assert rows[0, 0] == 0.5 and rows[0, 1] == 0.5
    assert rows[1, 1] == 1.0
    assert counts[0] == 2 and counts[1] == 2
