import numpy as np
import pytest

from plnnverify import datagen
from plnnverify.datagen import TwinStreamSpec, conv_to_linear, sparsity
from plnnverify.network import Atom, eval_network


class TestTwinStream:
    def test_constant_output(self):
        spec = TwinStreamSpec(input_dim=4, widths=(3, 3), depth=3, margin=10.0, seed=1)
        net, box, prop = datagen.gen_twinstream(spec)
        rng = np.random.default_rng(0)
        for _ in range(100):
            x = rng.uniform(box.lower, box.upper)
            assert abs(eval_network(net, x)[0] - 10.0) <= 1e-9

    def test_negative_margin_sat_everywhere(self):
        spec = TwinStreamSpec(input_dim=2, widths=(2,), depth=2, margin=-1.0, seed=2)
        net, box, prop = datagen.gen_twinstream(spec)
        assert eval_network(net, np.zeros(2))[0] == pytest.approx(-1.0, abs=1e-12)
        assert isinstance(prop, Atom)

    def test_minimal_width_one(self):
        spec = TwinStreamSpec(input_dim=1, widths=(1,), depth=2, margin=3.0, seed=3)
        net, box, _ = datagen.gen_twinstream(spec)
        # Two copies of one hidden unit; output = s - s + 3 for any input.
        for x in (-1.0, 0.0, 0.7):
            assert eval_network(net, np.array([x]))[0] == pytest.approx(3.0, abs=1e-12)

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            TwinStreamSpec(input_dim=2, widths=(2,), depth=1, margin=1.0)
        with pytest.raises(ValueError):
            TwinStreamSpec(input_dim=2, widths=(2, 2), depth=2, margin=1.0)


class TestToyNetwork:
    def test_hand_values(self):
        net, box, prop = datagen.toy_network()
        assert eval_network(net, np.zeros(2))[0] == 0.0
        assert eval_network(net, np.array([2.0, 2.0]))[0] == pytest.approx(-4.0)
        assert prop.b == -5.0

    def test_box(self):
        _, box, _ = datagen.toy_network()
        assert box.lower == pytest.approx([-2.0, -2.0])
        assert box.upper == pytest.approx([2.0, 2.0])


class TestRandomNet:
    def test_deterministic(self):
        a = datagen.gen_random_net(3, (3, 4, 1), seed=5)
        b = datagen.gen_random_net(3, (3, 4, 1), seed=5)
        for la, lb in zip(a.layers, b.layers):
            if hasattr(la, "weights"):
                assert np.array_equal(la.weights, lb.weights)

    def test_shapes(self):
        net = datagen.gen_random_net(2, (2, 3, 1), seed=0)
        linears = [l for l in net.layers if hasattr(l, "weights")]
        assert linears[0].weights.shape == (3, 2)
        assert linears[1].weights.shape == (1, 3)

    def test_glorot_bound(self):
        net = datagen.gen_random_net(4, (4, 8, 2), seed=9)
        linears = [l for l in net.layers if hasattr(l, "weights")]
        for lin in linears:
            fan_out, fan_in = lin.weights.shape
            bound = np.sqrt(6.0 / (fan_in + fan_out))
            assert np.all(np.abs(lin.weights) <= bound)

    def test_zero_bias_default(self):
        net = datagen.gen_random_net(2, (2, 3, 1), seed=1)
        for lin in (net.layers[0], net.layers[2]):
            assert np.all(lin.bias == 0.0)

    def test_widths_must_start_with_input(self):
        with pytest.raises(ValueError):
            datagen.gen_random_net(2, (3, 3, 1), seed=0)


class TestNNet:
    def fixture_text(self):
        # Hand-written 2-2-1 network with identity normalization.
        return "\n".join(
            [
                "// tiny fixture",
                "2,2,1,2,",
                "2,2,1,",
                "0,",
                "-1.0,-1.0,",
                "1.0,1.0,",
                "0.0,0.0,0.0,",
                "1.0,1.0,1.0,",
                "1.0,2.0,",
                "-3.0,4.0,",
                "0.5,",
                "-0.5,",
                "1.0,-1.0,",
                "0.25,",
            ]
        )

    def test_fixture_weights_exact(self):
        net, box = datagen.parse_nnet(self.fixture_text())
        linears = [l for l in net.layers if hasattr(l, "weights")]
        assert linears[0].weights == pytest.approx(np.array([[1.0, 2.0], [-3.0, 4.0]]))
        assert linears[0].bias == pytest.approx([0.5, -0.5])
        assert linears[1].weights == pytest.approx(np.array([[1.0, -1.0]]))
        assert linears[1].bias == pytest.approx([0.25])
        assert box.lower == pytest.approx([-1.0, -1.0])
        assert box.upper == pytest.approx([1.0, 1.0])

    def test_normalization_folded(self):
        lines = self.fixture_text().splitlines()
        lines[6] = "0.5,0.25,2.0,"   # input means + output mean
        lines[7] = "2.0,4.0,3.0,"    # input ranges + output range
        net, _ = datagen.parse_nnet("\n".join(lines))
        raw_net, _ = datagen.parse_nnet(self.fixture_text())
        x = np.array([0.3, -0.8])
        x_norm = (x - np.array([0.5, 0.25])) / np.array([2.0, 4.0])
        want = eval_network(raw_net, x_norm)[0] * 3.0 + 2.0
        assert eval_network(net, x)[0] == pytest.approx(want, abs=1e-12)

    def test_wrong_weight_count_names_line(self):
        lines = self.fixture_text().splitlines()
        lines[8] = "1.0,"  # first weight row truncated
        with pytest.raises(datagen.NNetError) as err:
            datagen.parse_nnet("\n".join(lines))
        assert "line 9" in str(err.value)

    def test_roundtrip_through_writer(self):
        net, box, _ = datagen.toy_network()
        text = datagen.write_nnet(net, box)
        parsed_net, parsed_box = datagen.parse_nnet(text)
        for la, lb in zip(net.layers, parsed_net.layers):
            if hasattr(la, "weights"):
                assert np.array_equal(la.weights, lb.weights)
                assert np.array_equal(la.bias, lb.bias)
        assert np.array_equal(box.lower, parsed_box.lower)
        assert np.array_equal(box.upper, parsed_box.upper)


class TestConvToLinear:
    def test_one_by_one_kernel_is_scaled_identity(self):
        kernel = np.ones((1, 1, 1, 1)) * 2.0
        lin = conv_to_linear(kernel, (3, 3))
        assert lin.weights == pytest.approx(2.0 * np.eye(9))

    def test_matches_direct_convolution(self):
        rng = np.random.default_rng(4)
        kernel = rng.normal(size=(2, 1, 2, 2))
        lin = conv_to_linear(kernel, (4, 4), stride=2)
        for _ in range(100):
            x = rng.normal(size=16)
            img = x.reshape(4, 4)
            direct = np.zeros((2, 2, 2))
            for oc in range(2):
                for oy in range(2):
                    for ox in range(2):
                        patch = img[oy * 2 : oy * 2 + 2, ox * 2 : ox * 2 + 2]
                        direct[oc, oy, ox] = (patch * kernel[oc, 0]).sum()
            assert lin.weights @ x == pytest.approx(direct.ravel(), abs=1e-12)

    def test_padding(self):
        rng = np.random.default_rng(5)
        kernel = rng.normal(size=(1, 1, 3, 3))
        lin = conv_to_linear(kernel, (3, 3), stride=1, padding=1)
        assert lin.weights.shape == (9, 9)
        x = rng.normal(size=9)
        img = np.pad(x.reshape(3, 3), 1)
        want = np.zeros((3, 3))
        for oy in range(3):
            for ox in range(3):
                want[oy, ox] = (img[oy : oy + 3, ox : ox + 3] * kernel[0, 0]).sum()
        assert lin.weights @ x == pytest.approx(want.ravel(), abs=1e-12)

    def test_sparsity_of_wide_conv(self):
        kernel = np.ones((16, 1, 2, 2))
        lin = conv_to_linear(kernel, (8, 8), stride=2)
        assert sparsity(lin) > 0.9

    def test_geometry_mismatch(self):
        with pytest.raises(ValueError):
            conv_to_linear(np.ones((1, 1, 5, 5)), (3, 3))
