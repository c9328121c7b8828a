import numpy as np
import pytest

from ftnn import networks
from ftnn.networks import (
    CheckpointError,
    build_classifier_head,
    build_discriminator,
    build_feature_extractor,
    build_generator,
    compose,
    load_checkpoint,
    save_checkpoint,
)


def dense_widths(net):
    return [l["in"] for l in net.layers if l["kind"] == "dense"] + \
        [[l for l in net.layers if l["kind"] == "dense"][-1]["out"]]


class TestFeatureExtractor:
    def test_a1_widths(self):
        fe = build_feature_extractor("a1", latent_dim=64)
        assert dense_widths(fe) == [784, 512, 1024, 512, 64]

    def test_a4_conv_hyperparams(self):
        fe = build_feature_extractor("a4")
        convs = [l for l in fe.layers if l["kind"] == "conv"]
        assert [c["out"] for c in convs] == [64, 128, 128]
        assert all(c["kernel"] == 3 and c["stride"] == 2 for c in convs)

    def test_dense_parameter_count(self):
        head = build_classifier_head(2, hidden=3, classes=2)
        first = head.params["cls_fc1.weight"].data.size + head.params["cls_fc1.bias"].data.size
        assert first == 9  # 2*3 + 3

    def test_unknown_arch(self):
        with pytest.raises(ValueError):
            build_feature_extractor("a9")

    @pytest.mark.parametrize("arch,input_shape", [
        ("a1", (2, 1, 28, 28)),
        ("a1_mini", (2, 1, 28, 28)),
        ("a2", (2, 1, 28, 28)),
        ("a4", (2, 3, 32, 32)),
        ("a4_mini", (2, 3, 32, 32)),
    ])
    def test_forward_shape_soundness(self, arch, input_shape):
        fe = build_feature_extractor(arch, latent_dim=16, seed=3)
        head = build_classifier_head(16, hidden=32, classes=10, seed=4)
        x = np.random.default_rng(0).random(input_shape, dtype=np.float32)
        logits = head.forward(fe.forward(x))
        assert logits.shape == (input_shape[0], 10)

    def test_a3_forward_shape(self):
        fe = build_feature_extractor("a3", latent_dim=8, seed=3)
        x = np.random.default_rng(0).random((1, 3, 32, 32), dtype=np.float32)
        assert fe.forward(x).shape == (1, 8)


class TestClassifierHead:
    def test_default_head(self):
        head = build_classifier_head(64)
        assert dense_widths(head) == [64, 512, 10]

    def test_minimal_head(self):
        head = build_classifier_head(1, hidden=1, classes=2)
        assert head.parameter_count() == 6

    def test_zero_parameters_give_zero_logits(self):
        head = build_classifier_head(4, hidden=3, classes=5)
        for p in head.params.values():
            p.data[...] = 0.0
        out = head.forward(np.ones((2, 4), dtype=np.float32))
        assert np.all(out.data == 0.0)

    def test_too_few_classes(self):
        with pytest.raises(ValueError):
            build_classifier_head(4, classes=1)


class TestGenerator:
    def test_a1_widths(self):
        gen = build_generator("a1", latent_dim=64)
        assert dense_widths(gen) == [64, 512, 512, 784]

    def test_output_range(self):
        gen = build_generator("a1_mini", latent_dim=8, seed=1)
        z = np.random.default_rng(2).normal(size=(4, 8)).astype(np.float32)
        out = gen.forward(z)
        assert np.all(out.data >= 0.0) and np.all(out.data <= 1.0)

    def test_conv_generator_spatial_trace(self):
        # 2x2 seed map upsampled x2 four times -> 32x32
        gen = build_generator("a4", latent_dim=16, seed=1)
        z = np.random.default_rng(0).normal(size=(2, 16)).astype(np.float32)
        out = gen.forward(z)
        assert out.shape == (2, 3, 32, 32)
        assert np.all(out.data >= 0.0) and np.all(out.data <= 1.0)


class TestDiscriminator:
    def test_widths(self):
        disc = build_discriminator(32)
        assert dense_widths(disc) == [32, 512, 512, 1]

    def test_output_probability(self):
        disc = build_discriminator(8, seed=5)
        z = np.random.default_rng(1).normal(size=(16, 8)).astype(np.float32)
        out = disc.forward(z)
        assert np.all(out.data > 0.0) and np.all(out.data < 1.0)

    def test_zero_dropout_deterministic(self):
        disc = build_discriminator(8, dropout_rate=0.0, seed=5)
        z = np.random.default_rng(1).normal(size=(4, 8)).astype(np.float32)
        a = disc.forward(z, train=True, rng=np.random.default_rng(0)).data
        b = disc.forward(z, train=True, rng=np.random.default_rng(99)).data
        assert np.array_equal(a, b)

    def test_bad_dropout_rate(self):
        with pytest.raises(ValueError):
            build_discriminator(8, dropout_rate=1.0)


class TestComposite:
    def test_composite_equivalence(self):
        fe = build_feature_extractor("a1_mini", latent_dim=16, seed=7)
        head = build_classifier_head(16, hidden=32, classes=10, seed=8)
        comp = compose(fe, head)
        x = np.random.default_rng(3).random((5, 1, 28, 28), dtype=np.float32)
        chained = head.forward(fe.forward(x)).data
        fused = comp.forward(x).data
        assert np.allclose(chained, fused, atol=1e-6)

    def test_parameters_are_shared(self):
        fe = build_feature_extractor("a1_mini", latent_dim=16, seed=7)
        head = build_classifier_head(16, hidden=32, classes=10, seed=8)
        comp = compose(fe, head)
        assert comp.params["fe_fc1.weight"] is fe.params["fe_fc1.weight"]


class TestCheckpoint:
    def test_round_trip_bytes(self, tmp_path):
        net = build_feature_extractor("a1_mini", latent_dim=16, seed=11)
        p1, p2 = tmp_path / "a.ftnn", tmp_path / "b.ftnn"
        save_checkpoint(net, p1)
        save_checkpoint(load_checkpoint(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_forward_equality_after_reload(self, tmp_path):
        net = build_feature_extractor("a1_mini", latent_dim=16, seed=11)
        path = tmp_path / "net.ftnn"
        save_checkpoint(net, path)
        loaded = load_checkpoint(path)
        x = np.random.default_rng(1).random((3, 1, 28, 28), dtype=np.float32)
        assert np.array_equal(net.forward(x).data, loaded.forward(x).data)

    def test_truncated_file(self, tmp_path):
        net = build_classifier_head(4, hidden=3, classes=2)
        path = tmp_path / "net.ftnn"
        save_checkpoint(net, path)
        path.write_bytes(path.read_bytes()[:-10])
        with pytest.raises(CheckpointError, match="truncated"):
            load_checkpoint(path)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "net.ftnn"
        path.write_bytes(b"XXXX" + b"\x00" * 64)
        with pytest.raises(CheckpointError, match="magic"):
            load_checkpoint(path)

    def test_version_mismatch(self, tmp_path):
        net = build_classifier_head(4, hidden=3, classes=2)
        path = tmp_path / "net.ftnn"
        save_checkpoint(net, path)
        raw = bytearray(path.read_bytes())
        raw[4:8] = (99).to_bytes(4, "little")
        path.write_bytes(bytes(raw))
        with pytest.raises(CheckpointError, match="version"):
            load_checkpoint(path)

    def test_descriptor_tensor_shape_mismatch(self, tmp_path):
        net = build_classifier_head(4, hidden=3, classes=2)
        path = tmp_path / "net.ftnn"
        save_checkpoint(net, path)
        loaded = load_checkpoint(path)
        loaded.layers[0]["out"] = 7  # corrupt descriptor, then re-save by hand
        save_checkpoint(loaded, path)
        with pytest.raises(CheckpointError, match="shape"):
            load_checkpoint(path)
