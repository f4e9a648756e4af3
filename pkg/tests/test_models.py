"""The uniform model layer: specs, fitting, input shaping, persistence."""
import numpy as np
import pytest

from eventcast.models import (
    MODEL_KINDS,
    ModelSpec,
    fit_model,
    load_model,
    save_model,
)
from eventcast.neural import OptimizerConfig

FAST_OPT = OptimizerConfig(learning_rate=1e-2, batch_size=16, epochs=3)


def flat_toy(seed=53, n=60, m=4):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, m))
    y = (X[:, 0] > 0.2).astype(np.int64)
    return X, y


def seq_toy(seed=54, n=50, dt=3, m=4):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, dt, m))
    y = (X[:, -1, 0] > 0.2).astype(np.int64)
    return X, y


def small_spec(kind):
    return ModelSpec(kind=kind, estimators=5, iterations=5, hidden=4,
                     per_feature_hidden=2, opt=FAST_OPT)


class TestModelSpec:
    def test_kind_catalog(self):
        assert MODEL_KINDS == ("random", "rf", "ada", "ffnn1", "ffnn2",
                               "lstm", "rnn")
        with pytest.raises(ValueError):
            ModelSpec(kind="svm")
        with pytest.raises(ValueError):
            ModelSpec(kind="rf", estimators=0)

    def test_net_spec_mapping(self):
        assert ModelSpec(kind="lstm").net_spec().cell == "gated"
        assert ModelSpec(kind="rnn").net_spec().cell == "simple"
        assert ModelSpec(kind="ffnn1").net_spec().arch == "ffnn1"
        with pytest.raises(ValueError):
            ModelSpec(kind="rf").net_spec()

    def test_is_neural(self):
        neural = {k for k in MODEL_KINDS if ModelSpec(kind=k).is_neural}
        assert neural == {"ffnn1", "ffnn2", "lstm", "rnn"}

    def test_fingerprint_carries_only_relevant_knobs(self):
        fp_rf = ModelSpec(kind="rf", estimators=10).fingerprint()
        assert fp_rf == {"kind": "rf", "estimators": 10, "subspace": None}
        fp_net = ModelSpec(kind="ffnn2", hidden=8).fingerprint()
        assert fp_net["optimizer"]["schedule"] == "inverse_time"
        assert fp_net["per_feature_hidden"] == 8
        assert ModelSpec(kind="random").fingerprint() == {"kind": "random"}


class TestFitPredict:
    @pytest.mark.parametrize("kind", MODEL_KINDS)
    def test_every_kind_fits_flat_input(self, kind):
        X, y = flat_toy()
        model = fit_model(small_spec(kind), X, y, seed=7)
        p = model.predict_proba(X)
        assert p.shape == (X.shape[0],)
        assert np.all((p >= 0.0) & (p <= 1.0))

    @pytest.mark.parametrize("kind", MODEL_KINDS)
    def test_every_kind_fits_sequence_input(self, kind):
        X, y = seq_toy()
        model = fit_model(small_spec(kind), X, y, seed=8)
        p = model.predict_proba(X)
        assert p.shape == (X.shape[0],)
        assert np.all((p >= 0.0) & (p <= 1.0))

    def test_random_kind_is_constant_half(self):
        X, y = flat_toy()
        model = fit_model(small_spec("random"), X, y, seed=0)
        assert np.array_equal(model.predict_proba(X), np.full(len(X), 0.5))

    def test_neural_records_alpha_and_losses(self):
        X, y = flat_toy()
        model = fit_model(small_spec("ffnn1"), X, y, seed=9)
        assert model.train_alpha == pytest.approx(y.mean())
        assert len(model.epoch_losses) == FAST_OPT.epochs

    def test_neural_single_class_rejected(self):
        X, _ = flat_toy()
        with pytest.raises(ValueError, match="both classes"):
            fit_model(small_spec("ffnn1"), X, np.zeros(len(X), np.int64),
                      seed=0)

    def test_deterministic_in_seed(self):
        X, y = flat_toy()
        for kind in ("rf", "ada", "ffnn1"):
            a = fit_model(small_spec(kind), X, y, seed=11)
            b = fit_model(small_spec(kind), X, y, seed=11)
            assert np.array_equal(a.predict_proba(X), b.predict_proba(X))


class TestSaveLoad:
    @pytest.mark.parametrize("kind", MODEL_KINDS)
    def test_round_trip_predictions_bit_equal(self, kind, tmp_path):
        X, y = seq_toy(seed=55)
        model = fit_model(small_spec(kind), X, y, seed=12)
        path = tmp_path / f"{kind}.npz"
        save_model(model, path)
        back = load_model(path)
        assert back.spec == model.spec
        assert back.seed == 12
        assert np.array_equal(back.predict_proba(X), model.predict_proba(X))

    def test_neural_metadata_survives(self, tmp_path):
        X, y = flat_toy(seed=56)
        model = fit_model(small_spec("lstm"), X, y, seed=13)
        path = tmp_path / "m.npz"
        save_model(model, path)
        back = load_model(path)
        assert back.train_alpha == model.train_alpha
        assert back.epoch_losses == model.epoch_losses

    def test_foreign_file_rejected(self, tmp_path):
        path = tmp_path / "junk.npz"
        np.savez(path, format=np.array("something-else"))
        with pytest.raises(ValueError, match="format"):
            load_model(path)
