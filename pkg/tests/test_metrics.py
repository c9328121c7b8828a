import numpy as np
import pytest

from ftnn import metrics, networks
from ftnn.autodiff import Tensor
from ftnn.data import Dataset, synthetic_images
from ftnn.metrics import (MetricsRecord, accuracy, emit_report, generalization_error,
                          param_distribution_stats, parse_comparison_csv, predict_labels)


class _StubNet:
    """Deterministic forward for accuracy oracles."""

    def __init__(self, logits):
        self.logits = np.asarray(logits, dtype=np.float32)

    def forward(self, x):
        return Tensor(self.logits[: len(x)])


class TestPredictLabels:
    def test_argmax(self):
        net = _StubNet([[0.1, 0.9], [0.8, 0.2]])
        labels = predict_labels(net.forward, np.zeros((2, 1)))
        assert list(labels) == [1, 0]

    def test_tie_breaks_to_lowest_index(self):
        net = _StubNet([[0.5, 0.5, 0.5]])
        assert predict_labels(net.forward, np.zeros((1, 1)))[0] == 0

    def test_empty_input(self):
        net = _StubNet(np.zeros((0, 3)))
        assert len(predict_labels(net.forward, np.zeros((0, 1)))) == 0

    def test_chunking_consistent(self):
        rng = np.random.default_rng(0)
        logits = rng.random((metrics.EVAL_CHUNK + 13, 4)).astype(np.float32)

        calls = []

        def forward(x):
            calls.append(len(x))
            start = sum(calls[:-1])
            return Tensor(logits[start:start + len(x)])

        labels = predict_labels(forward, np.zeros((len(logits), 1)))
        assert len(calls) == 2
        assert np.array_equal(labels, np.argmax(logits, axis=1))


class TestAccuracy:
    def test_percent_scale(self):
        net = _StubNet([[1, 0], [1, 0], [0, 1], [1, 0]])
        ds = Dataset(np.zeros((4, 1, 1, 1), dtype=np.float32),
                     np.array([0, 1, 1, 0]), "test", classes=2)
        assert accuracy(net, ds) == 75.0

    def test_empty_dataset_rejected(self):
        ds = Dataset(np.zeros((0, 1, 1, 1), dtype=np.float32),
                     np.zeros(0, dtype=int), "test", classes=2)
        with pytest.raises(ValueError):
            accuracy(_StubNet(np.zeros((0, 2))), ds)


class TestGeneralizationError:
    def test_reference_values(self):
        # published comparison rows: 98.60/88.90 -> 9.70, 96.77/89.53 -> 7.24
        assert generalization_error(98.60, 88.90) == pytest.approx(9.70)
        assert generalization_error(96.77, 89.53) == pytest.approx(7.24)

    def test_sign_convention(self):
        assert generalization_error(50.0, 60.0) == -10.0

    def test_record_property_is_exact_subtraction(self):
        rec = MetricsRecord("none", "a1", 0, 98.60, 88.90, 0.0, 0.1)
        assert rec.generalization_error == 98.60 - 88.90


class TestParamDistributionStats:
    def test_population_std_hand_value(self):
        net = networks.Network("x", [{"kind": "dense", "name": "l", "in": 2, "out": 2,
                                      "activation": None}],
                               {"l.weight": Tensor(np.array([[0.0, 0.0], [1.0, 1.0]],
                                                            dtype=np.float32),
                                                   requires_grad=True),
                                "l.bias": Tensor(np.full(2, 99.0, dtype=np.float32),
                                                 requires_grad=True)})
        stats = param_distribution_stats(net)
        # population std of (0,0,1,1) is 0.5; biases must not contribute
        assert stats["std"] == 0.5
        assert stats["mean"] == 0.5
        assert stats["count"] == 4

    def test_histogram_bins(self):
        net = networks.build_feature_extractor("a1_mini", 8, seed=0)
        counts, edges = param_distribution_stats(net, bins=50)["histogram"]
        assert len(counts) == 50 and len(edges) == 51
        assert counts.sum() == param_distribution_stats(net)["count"]

    def test_matches_numpy_oracle(self):
        net = networks.build_feature_extractor("a1_mini", 8, seed=3)
        values = np.concatenate([net.params[n].data.ravel()
                                 for n in net.weight_names()])
        stats = param_distribution_stats(net)
        assert stats["mean"] == pytest.approx(values.mean())
        assert stats["std"] == pytest.approx(values.std())


class TestEmitReport:
    def _records(self):
        return [MetricsRecord("none", "a1_mini", 0, 98.60, 88.90, 0.001, 0.452404),
                MetricsRecord("adversarial", "a1_mini", 0, 96.77, 89.53, 0.0, 0.04772)]

    def test_round_trip(self, tmp_path):
        path = tmp_path / "cmp.csv"
        emit_report(self._records(), [], path)
        rows = parse_comparison_csv(path)
        assert len(rows) == 2
        assert rows[0]["gen_error"] == "9.70"
        assert rows[1]["gen_error"] == "7.24"
        assert rows[1]["param_std"] == "0.047720"

    def test_byte_identity(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        emit_report(self._records(), [], a)
        emit_report(self._records(), [], b)
        assert a.read_bytes() == b.read_bytes()

    def test_schema_mismatch_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("method,arch\nnone,a1\n")
        with pytest.raises(ValueError, match="schema"):
            parse_comparison_csv(path)

    def test_curves_written_alongside(self, tmp_path):
        from ftnn.faults import degradation_sweep
        fe = networks.build_feature_extractor("a1_mini", 8, seed=1)
        head = networks.build_classifier_head(8, hidden=16, seed=2)
        net = networks.compose(fe, head)
        data = synthetic_images(16, seed=0, split="test")
        curve = degradation_sweep(net, "weight", [0.0, 0.5], 2, data, seed=3)
        path = tmp_path / "cmp.csv"
        emit_report(self._records(), [curve], path)
        lines = (tmp_path / "cmp_curves.csv").read_text().splitlines()
        assert lines[0] == "fault_kind,fraction,mean_accuracy,std_accuracy,epsilon_max"
        assert len(lines) == 3
