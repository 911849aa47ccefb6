import itertools
import json

import numpy as np
import pytest

import lotnet


def test_bound_example():
    assert lotnet.theorem_bound(beta=1, eps=0.1, R=1, n=1000, delta=0.05) == pytest.approx(0.8842, abs=1e-3)
    with pytest.raises(lotnet.ConfigError):
        lotnet.theorem_bound(delta=2.0)


def test_exact_ot_matches_brute_force():
    rng = np.random.default_rng(0)
    x, y = rng.normal(size=(5, 2)), rng.normal(size=(5, 2))
    cost, matching = lotnet.exact_ot(x, y)
    brute = min(np.mean(np.sum((x - y[list(p)]) ** 2, axis=1)) for p in itertools.permutations(range(5)))
    assert cost == pytest.approx(brute, abs=1e-12)
    assert sorted(matching) == list(range(5))


def test_gaussian_w2():
    assert lotnet.gaussian_w2([0, 0], [1, 1], [2, 2], [0.25, 0.25]) == pytest.approx(np.sqrt(8 + 0.5))


def test_shift_map_and_distance():
    rng = np.random.default_rng(1)
    base = rng.normal(size=(500, 2))
    a = lotnet.train_map(base + [1.0, 0.0], iterations=1500, seed=1)
    b = lotnet.train_map(base - [1.0, 0.0], iterations=1500, seed=2)
    assert isinstance(a, lotnet.DualPair)
    assert a.dim == 2 and a.iterations == 1500
    sample = rng.normal(size=(2000, 2))
    assert a.transport(sample).shape == (2000, 2)
    assert lotnet.lot_distance(a, b, sample) == pytest.approx(2.0, rel=0.15)


def test_dimension_errors_are_raised():
    a = lotnet.train_map(np.zeros((10, 2)) + 1.0, iterations=0)
    with pytest.raises(lotnet.DimensionError):
        a.transport(np.zeros((4, 3)))


def test_synthetic_generation_is_seeded():
    clouds, labels = lotnet.gen_synthetic(2, 30, seed=4)
    again, _ = lotnet.gen_synthetic(2, 30, seed=4)
    assert len(clouds) == 4 and sorted(labels) == [0, 0, 1, 1]
    assert clouds[0].shape == (30, 2)
    assert all(np.array_equal(c, d) for c, d in zip(clouds, again))


def test_commands_round_trip(tmp_path):
    cfg = json.loads(lotnet.default_config())
    cfg["seed"] = 3
    cfg["data"].update(clouds_per_class=4, points_per_cloud=60, subsample_n=60)
    cfg["solver"].update(batch_size=32, widths=[8])
    cfg["schedule"].update(total_epochs=4, ot_epochs_per_phase=1, clf_epochs_per_phase=1, ot_iters_per_epoch=5)
    cfg["classifier"].update(hidden=[8], sample_size=100)
    cfg["deepsets"].update(phi_hidden=[8], pooled_dim=4, rho_hidden=[4], bagging_models=2, epochs=2)
    cfg["resamples"] = 2

    lotnet.gen(tmp_path / "data", cfg)
    out = lotnet.train(tmp_path / "data", tmp_path / "run", cfg)
    assert out["phases"] == 2
    bundle = tmp_path / "run" / "bundle.json"
    ev = lotnet.evaluate(bundle, tmp_path / "data", resamples=2, subset="all", out=tmp_path / "eval")
    assert len(ev["ids"]) == 8
    assert 0.0 <= ev["metrics_resampled"]["accuracy"] <= 1.0
    d = lotnet.distances(bundle, tmp_path / "dist.csv")
    assert d.shape[0] == d.shape[1] and np.allclose(d, d.T)
    base = lotnet.baseline(tmp_path / "data", tmp_path / "base", cfg)
    assert set(base) == {"single", "bagging"}

    with pytest.raises(lotnet.ConfigError):
        lotnet.train(tmp_path / "data", tmp_path / "x", {"nonsense": 1})
