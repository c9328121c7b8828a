import numpy as np
import pytest
from sklearn.base import clone

from ftnn.data import synthetic_images
from ftnn.estimator import FaultTolerantClassifier


def small_clf(**kw):
    defaults = dict(arch="a1_mini", method="none", latent_dim=8, minibatch=16,
                    epochs_phase1=1, epochs_phase2=2, seed=0)
    defaults.update(kw)
    return FaultTolerantClassifier(**defaults)


@pytest.fixture(scope="module")
def image_data():
    train = synthetic_images(200, seed=1)
    test = synthetic_images(80, seed=2, split="test")
    return train, test


class TestSklearnProtocol:
    def test_get_set_params_round_trip(self):
        clf = small_clf(lam=0.5)
        params = clf.get_params()
        assert params["lam"] == 0.5
        clf.set_params(lam=0.25)
        assert clf.get_params()["lam"] == 0.25

    def test_clone(self):
        clf = small_clf(method="tikhonov", lam=1e-3)
        dup = clone(clf)
        assert dup.get_params() == clf.get_params()
        assert not hasattr(dup, "network_")

    def test_unfitted_predict_raises(self):
        with pytest.raises(RuntimeError, match="fit"):
            small_clf().predict(np.zeros((1, 1, 28, 28)))


class TestFitPredict:
    def test_fit_predict_shapes(self, image_data):
        train, test = image_data
        clf = small_clf().fit(train.images, train.labels)
        preds = clf.predict(test.images)
        assert preds.shape == (len(test),)
        assert set(np.unique(preds)) <= set(range(10))

    def test_flat_input_reshaped(self):
        train = synthetic_images(100, seed=3)
        flat = train.images.reshape(len(train), -1)
        clf = small_clf().fit(flat, train.labels)
        assert clf.predict(flat).shape == (len(train),)

    def test_decision_function_shape(self, image_data):
        train, test = image_data
        clf = small_clf().fit(train.images, train.labels)
        scores = clf.decision_function(test.images)
        assert scores.shape == (len(test), 10)
        assert np.array_equal(np.argmax(scores, axis=1), clf.predict(test.images))

    def test_seed_determinism(self, image_data):
        train, test = image_data
        a = small_clf(seed=7).fit(train.images, train.labels).predict(test.images)
        b = small_clf(seed=7).fit(train.images, train.labels).predict(test.images)
        assert np.array_equal(a, b)

    def test_adversarial_method_runs(self, image_data):
        train, test = image_data
        clf = small_clf(method="adversarial", disc_hidden=16)
        clf.fit(train.images, train.labels)
        assert clf.predict(test.images).shape == (len(test),)

    def test_training_beats_chance(self):
        train = synthetic_images(600, seed=4)
        clf = small_clf(epochs_phase2=5).fit(train.images, train.labels)
        acc = np.mean(clf.predict(train.images) == train.labels) * 100.0
        assert acc > 50.0


class TestValidation:
    def test_nan_input_rejected(self):
        X = np.full((4, 8), np.nan)
        with pytest.raises(ValueError, match="NaN"):
            small_clf().fit(X, np.zeros(4, dtype=int))

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            small_clf().fit(np.zeros((4, 8)), np.zeros(3, dtype=int))

    def test_bad_method_rejected_at_fit(self):
        with pytest.raises(ValueError):
            small_clf(method="bogus").fit(np.zeros((16, 8), dtype=np.float32),
                                          np.zeros(16, dtype=int))


class TestDegradationCurve:
    def test_curve_from_estimator(self, image_data):
        train, test = image_data
        clf = small_clf().fit(train.images, train.labels)
        curve = clf.degradation_curve(test.images, test.labels,
                                      fractions=(0.0, 0.5), trials=2)
        assert len(curve.summary) == 2
        frac0 = curve.summary[0]
        assert frac0[3] == 0.0  # epsilon at p=0
