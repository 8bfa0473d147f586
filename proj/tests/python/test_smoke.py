import math

import numpy as np
import pytest

import arcstab


def test_tone_features():
    t = np.arange(200) / 10000.0
    x = 100.0 * np.sin(2 * np.pi * 50.0 * t + np.pi / 4)
    f = arcstab.features(x)
    assert list(f) == arcstab.FEATURE_NAMES
    assert f["rms"] == pytest.approx(100 / math.sqrt(2), rel=1e-9)
    assert f["zcr"] == 2 / 199


def test_psd_parseval():
    rng = np.random.default_rng(1)
    x = rng.normal(size=200)
    p = arcstab.psd(x)
    w = np.hanning(200)
    assert p.shape == (2049,)
    assert p.sum() * 10000.0 / 4096 == pytest.approx(np.sum((w * x) ** 2) / np.sum(w**2), rel=1e-9)


def test_generation_is_seeded():
    a = arcstab.generate_phase("Transient", seed=3)
    b = arcstab.generate_phase("Transient", seed=3)
    assert a.shape == (10000,)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, arcstab.generate_phase("Transient", seed=4))


def test_dataset_train_predict():
    x, labels = arcstab.extract()
    assert x.shape == (147, 10)
    assert sorted(set(labels)) == ["Extinction", "Stable", "Transient"]
    model = arcstab.train(x, labels)
    hits = sum(model.predict(row)[0] == y for row, y in zip(x, labels))
    assert hits / len(labels) > 0.9
    again = arcstab.Model.from_json(model.to_json())
    assert again.predict(x[0]) == model.predict(x[0])


def test_evaluate_report():
    x, labels = arcstab.extract()
    report = arcstab.evaluate(x, labels)
    assert report["dataset"]["windows"] == 147
    assert report["holdout"]["accuracy"] >= 0.9


def test_ci():
    low, high = arcstab.binomial_ci(0.8707, 147)
    assert low == pytest.approx(0.8165, abs=5e-4)
    assert high == pytest.approx(0.9250, abs=5e-4)


def test_monitor_chunking():
    x, labels = arcstab.extract()
    model = arcstab.train(x, labels)
    stream = arcstab.generate_phase("Extinction", {"duration_s": 0.3}, seed=9)
    whole = arcstab.Monitor(model, asi_threshold=10.0).step(stream)
    mon = arcstab.Monitor(model, asi_threshold=10.0)
    pieces = [e for i in range(0, len(stream), 333) for e in mon.step(stream[i : i + 333])]
    assert whole == pieces
    assert [e["window_index"] for e in whole] == list(range(len(whole)))


def test_errors():
    with pytest.raises(arcstab.ArcstabError, match="config_error"):
        arcstab.config_hash({"sede": 1})
    with pytest.raises(ValueError):
        arcstab.features(np.zeros(200))
    assert len(arcstab.config_hash()) == 16
    assert arcstab.config_hash(arcstab.default_config()) == arcstab.config_hash()
