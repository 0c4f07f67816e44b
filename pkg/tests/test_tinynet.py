import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from complexca.tinynet import (
    DenseNet,
    Layer,
    TrainConfig,
    forward,
    grad_check,
    init_net,
    load_net,
    loss,
    save_net,
    sgd_step,
    train_sgd,
)


def make(sizes, acts, seed=0, groups=None):
    return init_net(sizes, acts, np.random.Generator(np.random.Philox(seed)), groups)


class TestForward:
    def test_identity_layer(self):
        net = DenseNet([Layer(np.eye(3), np.zeros(3))])
        x = np.array([1.0, -2.0, 3.5])
        assert np.array_equal(forward(net, x), x)

    def test_softmax_of_zero_logits(self):
        net = DenseNet([Layer(np.zeros((5, 2)), np.zeros(5), "softmax")])
        assert np.allclose(forward(net, np.ones(2)), 0.2)

    def test_hand_evaluated_342(self):
        net = make([3, 4, 2], ["relu", "identity"], seed=7)
        x = np.array([0.3, -1.2, 0.8])
        w1, b1 = net.layers[0].weight, net.layers[0].bias
        w2, b2 = net.layers[1].weight, net.layers[1].bias
        h = [max(0.0, sum(w1[i, j] * x[j] for j in range(3)) + b1[i]) for i in range(4)]
        expect = [sum(w2[i, j] * h[j] for j in range(4)) + b2[i] for i in range(2)]
        assert np.allclose(forward(net, x), expect, rtol=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            forward(make([3, 2], ["softmax"]), np.ones(4))

    def test_layers_must_chain(self):
        with pytest.raises(ValueError):
            DenseNet([Layer(np.zeros((4, 3)), np.zeros(4)), Layer(np.zeros((2, 5)), np.zeros(2))])

    def test_init_bounds(self):
        net = make([16, 8], ["softmax"])
        assert np.abs(net.layers[0].weight).max() <= 0.25
        assert not net.layers[0].bias.any()

    def test_grouped_softmax_sums_per_group(self):
        net = make([4, 6], ["softmax"], groups=[3])
        out = forward(net, np.ones(4)).reshape(3, 2)
        assert np.allclose(out.sum(axis=1), 1.0)


@settings(max_examples=50, deadline=None)
@given(logits=st.lists(st.floats(-50, 50), min_size=2, max_size=12))
def test_softmax_normalized(logits):
    z = np.array(logits)
    net = DenseNet([Layer(np.zeros((z.size, 1)), z, "softmax")])
    assert abs(forward(net, np.zeros(1)).sum() - 1.0) < 1e-6


class TestTraining:
    def test_memorize_one_example(self):
        net = make([4, 3], ["softmax"])
        cfg = TrainConfig(learning_rate=0.5, epochs=500, batch_size=1)
        net, _ = train_sgd(net, np.array([[1.0, 0, 1, 0]]), np.array([2]), cfg)
        assert loss(net, np.array([[1.0, 0, 1, 0]]), np.array([2])) < 1e-3

    def test_xor(self):
        x = np.array([[0, 0], [0, 1], [1, 0], [1, 1]], dtype=float)
        y = np.array([0, 1, 1, 0])
        net = make([2, 10, 2], ["relu", "softmax"], seed=3)
        net, _ = train_sgd(net, x, y, TrainConfig(learning_rate=0.5, epochs=2000, batch_size=4))
        assert (forward(net, x).argmax(axis=1) == y).all()

    def test_trace_nonincreasing_on_separable_set(self):
        x = np.array([[1.0, 0.0], [0.0, 1.0], [0.9, 0.1], [0.2, 0.8]])
        y = np.array([0, 1, 0, 1])
        net = make([2, 2], ["softmax"])
        _, trace = train_sgd(net, x, y, TrainConfig(learning_rate=0.1, epochs=50, batch_size=4, shuffle=False))
        assert all(b <= a + 1e-12 for a, b in zip(trace, trace[1:]))

    def test_weight_decay_geometric(self):
        # zero input and balanced targets: the weight gradient vanishes
        net = make([3, 2], ["softmax"], seed=1)
        w0 = net.layers[0].weight.copy()
        lr, wd = 0.1, 0.5
        for _ in range(10):
            sgd_step(net, np.zeros((2, 3)), np.array([0, 1]), lr, wd)
        assert np.allclose(net.layers[0].weight, w0 * (1 - lr * wd) ** 10, rtol=1e-12)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            train_sgd(make([2, 2], ["softmax"]), np.zeros((0, 2)), np.zeros(0, dtype=int), TrainConfig())

    def test_bad_target(self):
        with pytest.raises(ValueError):
            loss(make([2, 2], ["softmax"]), np.ones((1, 2)), np.array([2]))

    @pytest.mark.parametrize("kw", [dict(learning_rate=0), dict(weight_decay=-1), dict(epochs=0), dict(batch_size=0)])
    def test_config_validation(self, kw):
        with pytest.raises(ValueError):
            TrainConfig(**kw)

    def test_deterministic(self, rng):
        x = rng.normal(size=(30, 5))
        y = rng.integers(0, 3, 30)
        a, ta = train_sgd(make([5, 4, 3], ["relu", "softmax"]), x, y, TrainConfig(epochs=5, seed=4))
        b, tb = train_sgd(make([5, 4, 3], ["relu", "softmax"]), x, y, TrainConfig(epochs=5, seed=4))
        assert ta == tb
        assert all(np.array_equal(p, q) for p, q in zip(a.params(), b.params()))

    def test_training_does_not_mutate_input_net(self, rng):
        net = make([3, 2], ["softmax"])
        before = [p.copy() for p in net.params()]
        train_sgd(net, rng.normal(size=(4, 3)), np.array([0, 1, 0, 1]), TrainConfig(epochs=2))
        assert all(np.array_equal(p, q) for p, q in zip(before, net.params()))


class TestGradCheck:
    def test_linear_softmax(self, rng):
        net = make([6, 4], ["softmax"])
        assert grad_check(net, rng.normal(size=6), 2) < 1e-5

    def test_hidden_relu(self, rng):
        net = make([5, 7, 3], ["relu", "softmax"], seed=2)
        # keep pre-activations away from the kink
        net.layers[0].bias[:] = 0.5
        assert grad_check(net, np.abs(rng.normal(size=5)), 1) < 1e-4

    def test_grouped_softmax_bottleneck(self, rng):
        net = make([8, 3, 8], ["softmax", "softmax"], groups=[1, 4])
        x = np.eye(2)[rng.integers(0, 2, 4)].reshape(8)
        assert grad_check(net, x, np.array([0, 1, 1, 0])) < 1e-4

    def test_empty_parameter_net(self):
        net = DenseNet([Layer(np.zeros((2, 0)), np.zeros(2), "softmax")])
        assert grad_check(net, np.zeros(0), 0) < 1e-4


def test_checkpoint_round_trip(tmp_path):
    net = make([4, 5, 3], ["relu", "softmax"], groups=[1, 1])
    save_net(net, tmp_path / "net.json")
    back = load_net(tmp_path / "net.json")
    assert all(np.array_equal(p, q) for p, q in zip(net.params(), back.params()))
    assert [l.activation for l in back.layers] == ["relu", "softmax"]
