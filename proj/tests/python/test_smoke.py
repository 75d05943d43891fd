"""Smoke tests for the python bindings: every major operation gets exercised
once against known values; the deep numerical checks live in the C++ suites."""

import math

import numpy as np
import pytest

import noisylab as nl


def test_transition_matrix_constructors():
    t = nl.TransitionMatrix.known_matrix("fashion05")
    assert t.n_classes == 3
    e = t.entries()
    assert e.shape == (3, 3)
    assert e[0, 0] == pytest.approx(0.5)
    assert np.allclose(e.sum(axis=1), 1.0)
    assert t.flip_rates() == pytest.approx([0.5, 0.5, 0.5])

    sym = nl.TransitionMatrix.symmetric(3, 0.6)
    assert sym == nl.TransitionMatrix.known_matrix("fashion06")

    with pytest.raises(ValueError):
        nl.TransitionMatrix.known_matrix("cifar")
    with pytest.raises(ValueError):
        nl.TransitionMatrix.from_rows(np.array([[0.9, 0.2], [0.5, 0.5]]))


def test_inject_noise_identity_and_determinism():
    labels = np.array([0, 1, 2, 1, 0] * 20)
    identity = nl.TransitionMatrix.identity(3)
    noisy, record = nl.inject_noise(labels, identity, seed=7)
    assert np.array_equal(noisy, labels)
    assert record["n_flipped"] == 0

    t = nl.TransitionMatrix.known_matrix("fashion05")
    a, _ = nl.inject_noise(labels, t, seed=7)
    b, _ = nl.inject_noise(labels, t, seed=7)
    c, _ = nl.inject_noise(labels, t, seed=8)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_synthetic_data_and_split():
    ds = nl.generate_synthetic(samples_per_class=20, seed=3)
    assert len(ds) == 60
    assert ds.images.shape == (60, 16, 16, 1)
    assert ds.quality == "clean"
    counts = np.bincount(ds.labels, minlength=3)
    assert (counts == 20).all()

    train, val = nl.split(ds, 0.8, seed=4)
    assert len(train) == 48 and len(val) == 12


def test_normalize():
    out = nl.normalize(np.array([0.0, 255.0, 51.0]))
    assert out == pytest.approx([0.0, 1.0, 0.2])
    with pytest.raises(ValueError):
        nl.normalize(np.array([300.0]))


def test_mse_published_value():
    true05 = np.array([[0.5, 0.2, 0.3], [0.3, 0.5, 0.2], [0.2, 0.3, 0.5]])
    est05 = np.array([
        [0.50795323, 0.20026277, 0.3369517],
        [0.29097453, 0.51545948, 0.24141385],
        [0.20107204, 0.28427809, 0.42163846],
    ])
    assert abs(nl.mse(true05, est05) - 0.001094796813976767) < 1e-12


def test_losses_and_beta():
    probs = np.array([[0.7, 0.2, 0.1]])
    labels = np.array([0])
    ce = nl.cross_entropy(probs, labels)
    assert ce["value"] == pytest.approx(-math.log(0.7))
    assert ce["grad_logits"].shape == (1, 3)

    t = nl.TransitionMatrix.known_matrix("fashion05")
    beta = nl.beta_weight(probs, labels, t, epsilon=0.0)
    assert beta[0] == pytest.approx(0.7 / 0.43)

    rw = nl.reweighted_ce(probs, labels, t, epsilon=0.0)
    assert rw["value"] == pytest.approx((0.7 / 0.43) * -math.log(0.7))
    assert rw["weights"][0] == pytest.approx(0.7 / 0.43)

    inv = nl.stabilized_inverse(t)
    assert not inv["mixed"]
    assert np.abs(inv["inverse"] @ t.entries() - np.eye(3)).max() < 1e-9

    bw = nl.backward_corrected(probs, labels, t)
    assert math.isfinite(bw["value"])


def test_train_predict_evaluate_roundtrip(tmp_path):
    ds = nl.generate_synthetic(samples_per_class=40, height=8, width=8, seed=11)
    train_set, val_set = nl.split(ds, 0.8, seed=12)

    model = nl.Model.build("small_cnn", (8, 8, 1), 3, seed=13)
    assert model.parameter_count > 0
    history = nl.train(model, train_set, val_set, loss="cross_entropy",
                       batch_size=16, max_epochs=3, seed=14)
    assert len(history.epochs) <= 3
    assert history.to_csv().startswith("epoch,train_loss,val_loss")

    probs = model.predict_proba(val_set.images)
    assert probs.shape == (len(val_set), 3)
    assert np.allclose(probs.sum(axis=1), 1.0)

    scores = nl.evaluate(model, val_set)
    assert 0.0 <= scores["accuracy"] <= 1.0

    path = str(tmp_path / "model.nlmd")
    model.save(path)
    again = nl.Model.load(path)
    assert np.array_equal(again.predict_proba(val_set.images), probs)


def test_dataset_file_roundtrip(tmp_path):
    ds = nl.generate_synthetic(samples_per_class=5, height=8, width=8, seed=21)
    path = str(tmp_path / "data.nlds")
    ds.save(path)
    back = nl.LabeledDataset.load(path)
    assert np.array_equal(back.images, ds.images)
    assert np.array_equal(back.labels, ds.labels)


def test_metrics():
    cm = nl.confusion(np.array([0, 0, 1]), np.array([0, 1, 1]), 2)
    assert cm[0, 0] == 1 and cm[0, 1] == 1 and cm[1, 1] == 1
    report = nl.compute_metrics(cm)
    assert report["accuracy"] == pytest.approx(2 / 3)
    assert nl.growth_rate(0.5, 0.6) == pytest.approx(20.0)


def test_fgsm_bound():
    model = nl.Model.build("small_cnn", (8, 8, 1), 3, seed=31)
    x = np.random.default_rng(32).random((8, 8, 1))
    adv = nl.fgsm_example(model, x, 1, eps=0.05)
    assert np.abs(adv - x).max() <= 0.05 + 1e-15
    assert adv.min() >= 0.0 and adv.max() <= 1.0


def test_run_experiment_minimal():
    config = """{
      "dataset": {"synthetic": {"samples_per_class": 30, "test_per_class": 20,
                   "height": 8, "width": 8}},
      "noise": {"source": "fashion05"},
      "methods": ["ce_baseline", "backward"],
      "n_runs": 2,
      "base_seed": 3,
      "train": {"batch_size": 16, "max_epochs": 2}
    }"""
    result = nl.run_experiment(config)
    assert "ce_baseline" in result["csv"]
    assert "| Score |" in result["markdown"]
    assert '"methods"' in result["json"]
