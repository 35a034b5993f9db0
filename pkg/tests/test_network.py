import numpy as np
import pytest

from plnnverify.network import (
    MAXPOOL,
    RELU,
    ActivationLayer,
    And,
    Atom,
    Box,
    CanonicalProblem,
    LinearLayer,
    Network,
    Or,
    canonicalize,
    eval_network,
    eval_property,
    maxpool_to_relu,
    validate_counterexample,
)


def toy_net():
    # Two inputs feed hidden units a = relu(x1+x2), b = relu(-x1-x2); y = -a-b.
    return Network(
        (
            LinearLayer(np.array([[1.0, 1.0], [-1.0, -1.0]]), np.zeros(2)),
            ActivationLayer(RELU),
            LinearLayer(np.array([[-1.0, -1.0]]), np.zeros(1)),
        )
    )


def toy_box():
    return Box(np.array([-2.0, -2.0]), np.array([2.0, 2.0]))


def interval_provider(box):
    """Lower bounds of a layer prefix via plain interval propagation."""

    def provider(layers):
        lo, hi = box.lower, box.upper
        for layer in layers:
            if isinstance(layer, LinearLayer):
                wp = np.maximum(layer.weights, 0.0)
                wm = np.minimum(layer.weights, 0.0)
                lo, hi = (
                    wp @ lo + wm @ hi + layer.bias,
                    wp @ hi + wm @ lo + layer.bias,
                )
            elif layer.kind == RELU:
                lo, hi = np.maximum(lo, 0.0), np.maximum(hi, 0.0)
            else:
                lo = np.array([max(lo[list(g)]) for g in layer.groups])
                hi = np.array([max(hi[list(g)]) for g in layer.groups])
        return lo

    return provider


class TestEval:
    def test_toy_origin(self):
        assert eval_network(toy_net(), np.zeros(2))[0] == 0.0

    def test_toy_hand_values(self):
        net = toy_net()
        assert eval_network(net, np.array([2.0, 2.0]))[0] == pytest.approx(-4.0)
        assert eval_network(net, np.array([-1.0, 3.0]))[0] == pytest.approx(-2.0)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            eval_network(toy_net(), np.zeros(3))

    def test_piecewise_linearity(self):
        # On a segment with a fixed activation pattern the output is affine.
        net = toy_net()
        rng = np.random.default_rng(0)
        for _ in range(20):
            x = rng.uniform(-1.5, 1.5, size=2)
            d = rng.normal(size=2)
            ts = np.array([0.0, 1e-4, 2e-4])
            pats = []
            vals = []
            for t in ts:
                pre = net.layers[0].weights @ (x + t * d) + net.layers[0].bias
                pats.append(tuple(pre > 0))
                vals.append(eval_network(net, x + t * d)[0])
            if pats[0] == pats[1] == pats[2]:
                assert vals[1] == pytest.approx((vals[0] + vals[2]) / 2, abs=1e-12)


class TestNetworkValidation:
    def test_rejects_adjacent_linear(self):
        with pytest.raises(ValueError):
            Network(
                (
                    LinearLayer(np.eye(2), np.zeros(2)),
                    LinearLayer(np.eye(2), np.zeros(2)),
                )
            )

    def test_rejects_width_mismatch(self):
        with pytest.raises(ValueError):
            Network(
                (
                    LinearLayer(np.eye(2), np.zeros(2)),
                    ActivationLayer(RELU),
                    LinearLayer(np.eye(3), np.zeros(3)),
                )
            )

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            LinearLayer(np.array([[np.inf]]), np.zeros(1))

    def test_maxpool_groups_must_partition(self):
        lin = LinearLayer(np.eye(3), np.zeros(3))
        with pytest.raises(ValueError):
            Network(
                (lin, ActivationLayer(MAXPOOL, ((0, 1),)), LinearLayer(np.eye(1), np.zeros(1)))
            )


class TestCanonicalize:
    def test_toy_margin_property(self):
        # Proving y > -5 turns into minimizing y + 5.
        prob = canonicalize(toy_net(), Atom(np.array([1.0]), -5.0), toy_box())
        assert prob.net.output_dim == 1
        for x in [np.zeros(2), np.array([2.0, 2.0]), np.array([-1.0, 1.5])]:
            y = eval_network(toy_net(), x)[0]
            assert eval_network(prob.net, x)[0] == pytest.approx(y + 5.0)

    def test_identity_atom(self):
        prob = canonicalize(toy_net(), Atom(np.array([1.0]), 0.0), toy_box())
        for x in [np.zeros(2), np.array([1.0, -0.5])]:
            assert eval_network(prob.net, x)[0] == pytest.approx(
                eval_network(toy_net(), x)[0]
            )

    def test_or_is_max(self):
        net = Network((LinearLayer(np.eye(2), np.zeros(2)),))
        prop = Or((Atom(np.array([1.0, 0.0]), 0.0), Atom(np.array([0.0, 1.0]), 0.0)))
        prob = canonicalize(net, prop, Box(-np.ones(2), np.ones(2)))
        assert eval_network(prob.net, np.array([-1.0, 3.0]))[0] == pytest.approx(3.0)
        rng = np.random.default_rng(1)
        for _ in range(50):
            x = rng.uniform(-1, 1, size=2)
            assert eval_network(prob.net, x)[0] == pytest.approx(max(x[0], x[1]))

    def test_and_is_min(self):
        net = Network((LinearLayer(np.eye(2), np.zeros(2)),))
        prop = And((Atom(np.array([1.0, 0.0]), 0.0), Atom(np.array([0.0, 1.0]), 0.0)))
        prob = canonicalize(net, prop, Box(-np.ones(2), np.ones(2)))
        rng = np.random.default_rng(2)
        for _ in range(50):
            x = rng.uniform(-1, 1, size=2)
            assert eval_network(prob.net, x)[0] == pytest.approx(min(x[0], x[1]))

    def test_canonical_soundness_sampled(self):
        # Positive canonical output must coincide with the property's truth
        # value at the network output, for nested formulas too.
        rng = np.random.default_rng(3)
        net = Network(
            (
                LinearLayer(rng.normal(size=(3, 2)), rng.normal(size=3)),
                ActivationLayer(RELU),
                LinearLayer(rng.normal(size=(2, 3)), rng.normal(size=2)),
            )
        )
        prop = Or(
            (
                And(
                    (
                        Atom(np.array([1.0, -1.0]), 0.1),
                        Atom(np.array([0.5, 0.5]), -0.2),
                    )
                ),
                Atom(np.array([-1.0, 0.3]), 0.4),
            )
        )
        box = Box(-2 * np.ones(2), 2 * np.ones(2))
        prob = canonicalize(net, prop, box)
        for _ in range(1000):
            x = rng.uniform(box.lower, box.upper)
            y = eval_network(net, x)
            g = eval_network(prob.net, x)[0]
            assert (g > 0) == eval_property(prop, y)

    def test_empty_formula_rejected(self):
        with pytest.raises(ValueError):
            Or(())

    def test_atom_dimension_mismatch(self):
        with pytest.raises(ValueError):
            canonicalize(toy_net(), Atom(np.array([1.0, 2.0]), 0.0), toy_box())


class TestMaxpoolToRelu:
    def pairwise_net(self):
        # Identity into a 2-way max; output = max(x1, x2).
        return Network(
            (
                LinearLayer(np.eye(2), np.zeros(2)),
                ActivationLayer(MAXPOOL, ((0, 1),)),
                LinearLayer(np.eye(1), np.zeros(1)),
            )
        )

    def test_pairwise_hand_value(self):
        box = Box(np.array([-1.0, -1.0]), np.array([3.0, 3.0]))
        converted = maxpool_to_relu(self.pairwise_net(), interval_provider(box))
        assert not converted.has_maxpool()
        # max(2,0) + max(1-(-1),0) + (-1) = 3 at the point (3, 1)
        assert eval_network(converted, np.array([3.0, 1.0]))[0] == pytest.approx(3.0)

    def test_max_with_constant_zero_is_relu(self):
        # Second input pinned to 0 reduces the pairwise max to a plain relu.
        net = Network(
            (
                LinearLayer(np.array([[1.0], [0.0]]), np.zeros(2)),
                ActivationLayer(MAXPOOL, ((0, 1),)),
                LinearLayer(np.eye(1), np.zeros(1)),
            )
        )
        box = Box(np.array([-5.0]), np.array([5.0]))
        converted = maxpool_to_relu(net, interval_provider(box))
        for v in [-3.0, -0.5, 0.0, 2.0]:
            assert eval_network(converted, np.array([v]))[0] == pytest.approx(max(v, 0.0))

    def test_four_way_group_matches_sampling(self):
        rng = np.random.default_rng(4)
        net = Network(
            (
                LinearLayer(rng.normal(size=(4, 3)), rng.normal(size=4)),
                ActivationLayer(MAXPOOL, ((0, 1, 2, 3),)),
                LinearLayer(np.array([[2.0]]), np.array([0.5])),
            )
        )
        box = Box(-np.ones(3), np.ones(3))
        converted = maxpool_to_relu(net, interval_provider(box))
        assert not converted.has_maxpool()
        for _ in range(1000):
            x = rng.uniform(box.lower, box.upper)
            assert eval_network(converted, x) == pytest.approx(
                eval_network(net, x), abs=1e-9
            )

    def test_mixed_groups_and_relu_stages(self):
        rng = np.random.default_rng(5)
        net = Network(
            (
                LinearLayer(rng.normal(size=(5, 2)), rng.normal(size=5)),
                ActivationLayer(MAXPOOL, ((0, 2), (1,), (3, 4))),
                LinearLayer(rng.normal(size=(3, 3)), rng.normal(size=3)),
                ActivationLayer(RELU),
                LinearLayer(rng.normal(size=(1, 3)), rng.normal(size=1)),
            )
        )
        box = Box(-np.ones(2), np.ones(2))
        converted = maxpool_to_relu(net, interval_provider(box))
        assert not converted.has_maxpool()
        for _ in range(500):
            x = rng.uniform(box.lower, box.upper)
            assert eval_network(converted, x) == pytest.approx(
                eval_network(net, x), abs=1e-9
            )


class TestValidateCounterexample:
    def problem(self, b=-5.0):
        return canonicalize(toy_net(), Atom(np.array([1.0]), b), toy_box())

    def test_satisfying_point_rejected(self):
        # y(2,2) = -4 so y+5 = 1 > 0: not a counterexample of y > -5.
        assert not validate_counterexample(self.problem(), np.array([2.0, 2.0]), 1e-7)

    def test_outside_box_rejected(self):
        assert not validate_counterexample(self.problem(), np.array([3.0, 0.0]), 1e-7)

    def test_true_counterexample_accepted(self):
        # Against y > -3 the point (2,2) gives margin -1 <= 0.
        assert validate_counterexample(self.problem(b=-3.0), np.array([2.0, 2.0]), 1e-7)

    def test_dimension_mismatch_is_false(self):
        assert not validate_counterexample(self.problem(), np.zeros(3), 1e-7)
