import numpy as np
import pytest

from plnnverify import bounds as B
from plnnverify import datagen, oracle
from plnnverify.bounds import interval_propagate, lp_lower_bound, wk_dual_bound
from plnnverify.network import Atom, Box, canonicalize, eval_network


def toy_problem():
    net, box, prop = datagen.toy_network()
    return canonicalize(net, prop, box)


def random_problem(seed):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(2, 5))
    net = datagen.gen_random_net(d, (d, 6, 1), seed=seed, bias_scale=0.5)
    return canonicalize(net, Atom(np.array([1.0]), 0.0), Box(-np.ones(d), np.ones(d)))


def test_toy_minimum_and_witness():
    prob = toy_problem()
    ib = interval_propagate(prob)
    val, x = oracle.enumerate_min(prob, ib)
    assert val == pytest.approx(1.0, abs=1e-9)
    # Argmin is any corner with |x1+x2| = 4; the value there must match.
    assert abs(x.sum()) == pytest.approx(4.0, abs=1e-7)
    assert eval_network(prob.net, x)[0] == pytest.approx(val, abs=1e-7)


def test_no_ambiguity_single_lp():
    # Strictly positive pre-activations: enumeration equals the relaxation
    # exactly because there is nothing to relax.
    lin1 = datagen.LinearLayer(np.array([[1.0], [0.5]]), np.array([3.0, 2.0]))
    lin2 = datagen.LinearLayer(np.array([[1.0, -2.0]]), np.array([0.0]))
    net = datagen.Network((lin1, datagen.ActivationLayer("relu"), lin2))
    prob = canonicalize(net, Atom(np.array([1.0]), 0.0), Box(np.array([-1.0]), np.array([1.0])))
    ib = interval_propagate(prob)
    assert len(B.ambiguous_units(prob, ib)) == 0
    val, _ = oracle.enumerate_min(prob, ib)
    res = lp_lower_bound(prob, ib)
    assert val == pytest.approx(res.value, abs=1e-8)


def test_cap_enforced():
    prob = random_problem(0)
    ib = interval_propagate(prob)
    with pytest.raises(ValueError):
        oracle.enumerate_min(prob, ib, cap=1)


def test_sandwich_property():
    # Every bound sits below the exact minimum, every sample above it.
    for seed in range(50):
        prob = random_problem(seed)
        ib = interval_propagate(prob)
        exact, witness = oracle.enumerate_min(prob, ib)
        assert wk_dual_bound(prob, ib) <= exact + 1e-6
        assert lp_lower_bound(prob, ib).value <= exact + 1e-6
        sampled, _ = oracle.sample_min(prob, 200, seed=seed)
        assert sampled >= exact - 1e-7


def test_witness_reproduces_minimum():
    for seed in range(30):
        prob = random_problem(seed)
        ib = interval_propagate(prob)
        exact, witness = oracle.enumerate_min(prob, ib)
        assert prob.domain.contains(witness, tol=1e-7)
        assert eval_network(prob.net, witness)[0] == pytest.approx(exact, abs=1e-6)


def test_sample_min_deterministic():
    prob = toy_problem()
    a = oracle.sample_min(prob, 1, seed=42)
    b = oracle.sample_min(prob, 1, seed=42)
    assert a[0] == b[0]
    assert np.array_equal(a[1], b[1])


def test_toy_sampling_converges():
    # Statistical check, generous envelope: min 1 approached from above.
    prob = toy_problem()
    val, _ = oracle.sample_min(prob, 100000, seed=7)
    assert 1.0 - 1e-9 <= val <= 1.06


def test_maxpool_rejected():
    lin = datagen.LinearLayer(np.eye(2), np.zeros(2))
    pool = datagen.ActivationLayer("maxpool", ((0, 1),))
    out = datagen.LinearLayer(np.eye(1), np.zeros(1))
    prob = canonicalize(
        datagen.Network((lin, pool, out)),
        Atom(np.array([1.0]), 0.0),
        Box(-np.ones(2), np.ones(2)),
    )
    ib = interval_propagate(prob)
    with pytest.raises(ValueError):
        oracle.enumerate_min(prob, ib)
