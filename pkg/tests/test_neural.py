# SPDX-License-Identifier: MIT

from typing import NamedTuple

import numpy as np
import pytest

from gsimpute.exceptions import (
    BadMagic,
    DimensionMismatch,
    DivergedLoss,
    InvalidArchitecture,
    ShapeMismatch,
    StaleTape,
    TruncatedFile,
)
from gsimpute.neural import (
    AdamState,
    DenseNet,
    Layer,
    adam_step,
    backward,
    forward,
    init_params,
    load_checkpoint,
    save_checkpoint,
)

from .helpers import numeric_grad, rel_err


class Case(NamedTuple):
    """
    A one-layer network on a scalar and its expected output.
    """

    name: str
    weight: float
    bias: float
    activation: str
    x: float
    y: float


CASES = [
    Case("tanh", 2.0, 1.0, "tanh", 0.0, np.tanh(1.0)),
    Case("tanh_affine", 2.0, 1.0, "tanh", -0.5, 0.0),
    Case("sigmoid_zero", 3.0, 0.0, "sigmoid", 0.0, 0.5),
    Case("sigmoid_large", 1.0, 0.0, "sigmoid", 800.0, 1.0),
    Case("identity", 2.0, 1.0, "identity", 3.0, 7.0),
]


def scalar_net(case):
    return DenseNet([Layer([[case.weight]], [case.bias], case.activation)])


class TestForward:
    @pytest.mark.parametrize("case", CASES, ids=[c.name for c in CASES])
    def test_scalar_examples(self, case):
        out, _ = forward(scalar_net(case), [[case.x]])

        assert case.y == pytest.approx(out[0, 0])

    def test_zero_network(self):
        net = init_params((4, 3, 2), ("tanh", "tanh"), 0, zero=True)
        out, _ = forward(net, np.ones((5, 4)))

        assert np.array_equal(np.zeros((5, 2)), out)

    def test_single_row_is_promoted(self):
        net = init_params((3, 2), ("identity",), 1)
        out, tape = forward(net, [1.0, 2.0, 3.0])

        assert (1, 2) == out.shape
        assert 1 == tape.batch_size

    def test_wrong_width(self):
        net = init_params((3, 2), ("identity",), 1)

        with pytest.raises(DimensionMismatch):
            forward(net, np.ones((2, 4)))

    def test_properties(self):
        net = init_params((6, 5, 4), ("tanh", "sigmoid"), 2, role="discriminator")

        assert (6, 5, 4) == net.dims
        assert ("tanh", "sigmoid") == net.activations
        assert 4 == len(net.params())


class TestBackward:
    @pytest.mark.parametrize(
        "acts", [("tanh", "tanh", "sigmoid"), ("identity", "sigmoid", "tanh")]
    )
    def test_matches_finite_differences(self, acts):
        rng = np.random.default_rng(3)
        net = init_params((3, 5, 4, 2), acts, 4)
        for layer in net.layers:
            layer.bias[:] = rng.normal(scale=0.3, size=layer.bias.shape)
        batch = rng.normal(size=(6, 3))
        weights = rng.normal(size=(6, 2))

        def loss():
            return float(np.sum(forward(net, batch)[0] * weights))

        _, tape = forward(net, batch)
        grads, input_grad = backward(net, tape, weights)

        for p, g in zip(net.params(), grads):
            assert rel_err(numeric_grad(loss, p), g) < 1e-4
        assert rel_err(numeric_grad(loss, batch), input_grad) < 1e-4

    def test_identity_squared_error(self):
        """
        Mean half squared error of an identity layer, with the 1/B folded
        into the output gradient.
        """
        net = DenseNet([Layer([[1.0, 2.0]], [0.5], "identity")])
        batch = np.eye(2)
        target = np.zeros((2, 1))
        out, tape = forward(net, batch)

        (g_w, g_b), g_in = backward(net, tape, (out - target) / 2)

        assert np.allclose([[0.75, 1.25]], g_w)
        assert np.allclose([2.0], g_b)
        assert np.allclose([[0.75, 1.5], [1.25, 2.5]], g_in)

    def test_gradients_sum_over_batch(self):
        net = init_params((2, 3), ("tanh",), 5)
        row = np.array([[0.3, -0.7]])
        _, tape_one = forward(net, row)
        _, tape_two = forward(net, np.vstack([row, row]))

        (g1, _), _ = backward(net, tape_one, np.ones((1, 3)))
        (g2, _), _ = backward(net, tape_two, np.ones((2, 3)))

        assert np.allclose(2 * g1, g2)

    def test_stale_tape_other_network(self):
        _, tape = forward(init_params((3, 4), ("tanh",), 0), np.ones((2, 3)))

        with pytest.raises(StaleTape):
            backward(init_params((3, 5), ("tanh",), 0), tape, np.ones((2, 5)))

    def test_stale_tape_other_batch(self):
        net = init_params((3, 4), ("tanh",), 0)
        _, tape = forward(net, np.ones((2, 3)))

        with pytest.raises(StaleTape):
            backward(net, tape, np.ones((3, 4)))


class TestAdam:
    def test_first_step_moves_by_lr(self):
        net = init_params((3, 2), ("identity",), 6)
        before = [p.copy() for p in net.params()]
        grads = [np.full_like(p, 0.5) for p in net.params()]
        grads[0][0, 0] = -3.0
        state = AdamState.for_net(net, lr=0.01)

        adam_step(net, state, grads)

        for b, p, g in zip(before, net.params(), grads):
            assert np.allclose(b - 0.01 * np.sign(g), p, atol=1e-8)
        assert 1 == state.t

    def test_zero_gradient_is_a_no_op(self):
        net = init_params((3, 2), ("tanh",), 7)
        before = [p.copy() for p in net.params()]
        state = AdamState.for_net(net)

        for _ in range(3):
            adam_step(net, state, [np.zeros_like(p) for p in net.params()])

        for b, p in zip(before, net.params()):
            assert np.array_equal(b, p)

    def test_descends_quadratic(self):
        net = DenseNet([Layer([[4.0]], [0.0], "identity")])
        state = AdamState.for_net(net, lr=0.1)

        for _ in range(200):
            adam_step(net, state, [2 * net.layers[0].weight, np.zeros(1)])

        assert abs(net.layers[0].weight[0, 0]) < 0.1

    def test_shape_mismatch(self):
        net = init_params((3, 2), ("tanh",), 8)
        state = AdamState.for_net(net)

        with pytest.raises(ShapeMismatch):
            adam_step(net, state, [np.zeros((2, 3))])
        with pytest.raises(ShapeMismatch):
            adam_step(net, state, [np.zeros((3, 2)), np.zeros(2)])

    def test_infinite_gradient_diverges(self):
        net = init_params((3, 2), ("tanh",), 9, role="discriminator")
        state = AdamState.for_net(net)
        grads = [np.zeros_like(p) for p in net.params()]
        grads[1][0] = np.inf

        with np.errstate(invalid="ignore"), pytest.raises(DivergedLoss) as ei:
            adam_step(net, state, grads)

        assert 1 == ei.value.step
        assert "discriminator" in str(ei.value)

    def test_invalid_hyperparameters(self):
        net = init_params((3, 2), ("tanh",), 0)

        with pytest.raises(ValueError):
            AdamState.for_net(net, lr=-1.0)
        with pytest.raises(ValueError):
            AdamState.for_net(net, beta1=1.0)


class TestInit:
    def test_deterministic(self):
        a = init_params((5, 4, 3), ("tanh", "sigmoid"), 42)
        b = init_params((5, 4, 3), ("tanh", "sigmoid"), 42)
        c = init_params((5, 4, 3), ("tanh", "sigmoid"), 43)

        assert all(np.array_equal(p, q) for p, q in zip(a.params(), b.params()))
        assert not np.array_equal(a.params()[0], c.params()[0])

    def test_glorot_uniform(self):
        net = init_params((256, 256), ("tanh",), 0)
        w, b = net.params()
        bound = np.sqrt(6.0 / 512)

        assert np.array_equal(np.zeros(256), b)
        assert np.abs(w).max() <= bound
        assert abs(w.mean()) < 0.01
        assert w.std() == pytest.approx(bound / np.sqrt(3.0), rel=0.02)

    @pytest.mark.parametrize(
        ("dims", "acts"),
        [
            ((4,), ()),
            ((4, 0), ("tanh",)),
            ((4, 3), ("tanh", "tanh")),
            ((4, 3), ("relu",)),
        ],
    )
    def test_invalid_architecture(self, dims, acts):
        with pytest.raises(InvalidArchitecture):
            init_params(dims, acts, 0)

    def test_layers_must_chain(self):
        with pytest.raises(InvalidArchitecture):
            DenseNet([Layer(np.ones((3, 2)), np.zeros(3), "tanh"), Layer(np.ones((1, 4)), [0.0], "tanh")])
        with pytest.raises(InvalidArchitecture):
            Layer(np.ones((3, 2)), np.zeros(2), "tanh")

    def test_copy_is_independent(self):
        net = init_params((3, 2), ("tanh",), 1)
        snap = net.copy()
        net.layers[0].weight += 1.0

        assert not np.array_equal(net.params()[0], snap.params()[0])


class TestCheckpoint:
    def test_roundtrip(self, tmp_path):
        net = init_params((7, 5, 3), ("tanh", "sigmoid"), 11, role="discriminator")
        path = tmp_path / "d.gsnn"
        save_checkpoint(net, path)

        back = load_checkpoint(path, role="discriminator")

        assert net.dims == back.dims
        assert net.activations == back.activations
        assert "discriminator" == back.role
        assert all(np.array_equal(p, q) for p, q in zip(net.params(), back.params()))

    def test_loaded_network_is_trainable(self, tmp_path):
        path = tmp_path / "g.gsnn"
        save_checkpoint(init_params((2, 2), ("identity",), 0), path)
        net = load_checkpoint(path)

        net.layers[0].weight[0, 0] = 1.0

        assert 1.0 == net.params()[0][0, 0]

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "x.gsnn"
        path.write_bytes(b"GSOB1\x00\x00\x00\x00")

        with pytest.raises(BadMagic):
            load_checkpoint(path)

    @pytest.mark.parametrize("keep", [7, 12, 40])
    def test_truncated(self, tmp_path, keep):
        path = tmp_path / "g.gsnn"
        save_checkpoint(init_params((3, 2), ("tanh",), 0), path)
        path.write_bytes(path.read_bytes()[:keep])

        with pytest.raises(TruncatedFile):
            load_checkpoint(path)
