#!/usr/bin/env python3
"""
Tests for the tensors module (primitives, tape, backward, grad_check).
"""

import numpy as np
import pytest

from fivcmmcan.tensors import (
    DimensionError,
    GradientError,
    Module,
    Tape,
    Tensor,
    add,
    backward,
    concat,
    dropout,
    grad_check,
    init_constant,
    init_weight,
    is_grad_enabled,
    layer_norm_rows,
    log,
    matmul,
    mean_rows,
    mul,
    no_grad,
    relu,
    reshape,
    scale,
    sigmoid,
    softmax_rows,
    sub,
    sum_all,
    sum_rows,
    take_rows,
    tanh,
    transpose,
    zero_grads,
)


def _param(rng, shape):
    return Tensor(rng.normal(size=shape), requires_grad=True)


def _naive_matmul(a, b):
    out = np.zeros((a.shape[0], b.shape[1]))
    for i in range(a.shape[0]):
        for j in range(b.shape[1]):
            for k in range(a.shape[1]):
                out[i, j] += a[i, k] * b[k, j]
    return out


class TestMatmul:
    """Test matrix products."""

    def test_identity(self):
        """Test identity times a column."""
        out = matmul(Tensor(np.eye(2)), Tensor([[5.0], [6.0]]))
        np.testing.assert_array_equal(out.data, [[5.0], [6.0]])

    def test_small_product(self):
        """Test a hand-computed product."""
        out = matmul(Tensor([[1.0, 2.0], [3.0, 4.0]]), Tensor([[5.0], [6.0]]))
        np.testing.assert_array_equal(out.data, [[17.0], [39.0]])

    def test_zero_operand(self):
        """Test zeros times anything is zeros."""
        rng = np.random.default_rng(0)
        out = matmul(Tensor(np.zeros((2, 3))), Tensor(rng.normal(size=(3, 4))))
        np.testing.assert_array_equal(out.data, np.zeros((2, 4)))

    def test_against_triple_loop(self):
        """Test agreement with a naive triple loop."""
        rng = np.random.default_rng(1)
        a, b = rng.normal(size=(5, 7)), rng.normal(size=(7, 3))
        np.testing.assert_allclose(matmul(Tensor(a), Tensor(b)).data, _naive_matmul(a, b), atol=1e-12)

    def test_shape_mismatch_names_both_shapes(self):
        """Test the dimension error message."""
        with pytest.raises(DimensionError, match=r"\(2, 3\).*\(4, 2\)"):
            matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((4, 2))))

    def test_gradients(self):
        """Test dA = dOut B^T for f = sum(A B)."""
        rng = np.random.default_rng(2)
        a, b = _param(rng, (3, 4)), _param(rng, (4, 2))
        backward(sum_all(matmul(a, b)))
        np.testing.assert_allclose(a.grad, np.ones((3, 2)) @ b.data.T)
        np.testing.assert_allclose(b.grad, a.data.T @ np.ones((3, 2)))


class TestSoftmax:
    """Test row softmax."""

    def test_symmetric(self):
        """Test equal logits give equal weights."""
        np.testing.assert_allclose(softmax_rows(Tensor([[0.0, 0.0]])).data, [[0.5, 0.5]])

    def test_analytic(self):
        """Test [ln 2, ln 4] -> [1/3, 2/3]."""
        out = softmax_rows(Tensor([[np.log(2.0), np.log(4.0)]]))
        np.testing.assert_allclose(out.data, [[1 / 3, 2 / 3]], atol=1e-15)

    def test_large_logits(self):
        """Test max-shift stabilization."""
        np.testing.assert_allclose(softmax_rows(Tensor([[1000.0, 1000.0]])).data, [[0.5, 0.5]])

    def test_rows_sum_to_one_and_shift_invariance(self):
        """Test the softmax contract on random rows."""
        rng = np.random.default_rng(3)
        x = rng.normal(size=(6, 5)) * 4
        out = softmax_rows(Tensor(x)).data
        np.testing.assert_allclose(out.sum(axis=-1), np.ones(6), atol=1e-12)
        shifted = softmax_rows(Tensor(x + 7.5)).data
        np.testing.assert_allclose(out, shifted, atol=1e-12)

    def test_softmax_cross_entropy_gradient(self):
        """Test gradient on logits is p - y at one-hot y."""
        logits = Tensor([[0.3, -1.2, 2.0]], requires_grad=True)
        y = np.array([[0.0, 1.0, 0.0]])
        probs = softmax_rows(logits)
        backward(scale(sum_all(mul(log(probs), Tensor(y))), -1.0))
        np.testing.assert_allclose(logits.grad, probs.data - y, atol=1e-12)


class TestLayerNorm:
    """Test row layer normalization."""

    def test_constant_row(self):
        """Test a constant row normalizes to zeros."""
        out = layer_norm_rows(Tensor([[3.0, 3.0, 3.0]]), Tensor(np.ones(3)), Tensor(np.zeros(3)))
        np.testing.assert_allclose(out.data, np.zeros((1, 3)))

    def test_already_normalized(self):
        """Test [1, -1] is a fixed point with tiny eps."""
        out = layer_norm_rows(
            Tensor([[1.0, -1.0]]), Tensor(np.ones(2)), Tensor(np.zeros(2)), eps=1e-12
        )
        np.testing.assert_allclose(out.data, [[1.0, -1.0]], atol=1e-6)

    def test_zero_gamma(self):
        """Test gamma = 0 yields beta on every row."""
        rng = np.random.default_rng(4)
        beta = np.array([0.5, -2.0, 1.0])
        out = layer_norm_rows(Tensor(rng.normal(size=(4, 3))), Tensor(np.zeros(3)), Tensor(beta))
        np.testing.assert_allclose(out.data, np.tile(beta, (4, 1)))

    def test_mean_zero_variance_one(self):
        """Test normalized statistics."""
        rng = np.random.default_rng(5)
        out = layer_norm_rows(
            Tensor(rng.normal(size=(3, 8)) * 5 + 2), Tensor(np.ones(8)), Tensor(np.zeros(8))
        ).data
        np.testing.assert_allclose(out.mean(axis=-1), np.zeros(3), atol=1e-12)
        np.testing.assert_allclose(out.var(axis=-1), np.ones(3), atol=1e-5)


class TestSigmoid:
    """Test the logistic function."""

    def test_zero(self):
        """Test sigmoid(0) = 0.5."""
        assert sigmoid(Tensor([0.0])).data[0] == 0.5

    def test_symmetry(self):
        """Test sigmoid(x) + sigmoid(-x) = 1."""
        x = np.array([-3.0, 1.0, 7.0])
        np.testing.assert_allclose(sigmoid(Tensor(x)).data + sigmoid(Tensor(-x)).data, 1.0)

    def test_saturation(self):
        """Test sigmoid(50) = 1 within 1e-12."""
        assert abs(sigmoid(Tensor([50.0])).data[0] - 1.0) < 1e-12


class TestBackward:
    """Test the reverse sweep and its errors."""

    def test_non_scalar_loss(self):
        """Test backward rejects a non-scalar loss."""
        x = Tensor(np.ones((2, 2)), requires_grad=True)
        with pytest.raises(GradientError, match="scalar"):
            backward(scale(x, 2.0))

    def test_detached_loss(self):
        """Test backward rejects a loss without a tape."""
        with pytest.raises(GradientError, match="detached"):
            backward(Tensor(1.0))

    def test_second_backward_raises(self):
        """Test a consumed tape cannot be swept again."""
        x = Tensor([1.0, 2.0], requires_grad=True)
        loss = sum_all(mul(x, x))
        backward(loss)
        with pytest.raises(GradientError, match="already ran"):
            backward(loss)

    def test_accumulates_into_shared_inputs(self):
        """Test additive accumulation for an input used twice."""
        x = Tensor([1.0, 2.0, 3.0], requires_grad=True)
        backward(sum_all(add(mul(x, x), x)))
        np.testing.assert_allclose(x.grad, 2 * x.data + 1)

    def test_grads_accumulate_until_zeroed(self):
        """Test buffers accumulate across passes until zero_grads."""
        x = Tensor([1.0, -1.0], requires_grad=True)
        backward(sum_all(scale(x, 3.0)))
        backward(sum_all(scale(x, 3.0)))
        np.testing.assert_allclose(x.grad, [6.0, 6.0])
        zero_grads([x])
        np.testing.assert_array_equal(x.grad, [0.0, 0.0])

    def test_tape_is_topological(self):
        """Test every record's inputs are produced earlier on the tape."""
        rng = np.random.default_rng(6)
        a, b = _param(rng, (2, 3)), _param(rng, (3, 2))
        loss = sum_all(relu(add(matmul(a, b), Tensor(np.ones(2)))))
        tape = Tape.trace(loss)
        produced = set()
        for record in tape:
            for t in record.inputs:
                if t._record is not None:
                    assert id(t) in produced
            produced.add(id(record.output))
        assert tape.records[-1].output is loss

    def test_no_grad_records_nothing(self):
        """Test no_grad disables recording."""
        x = Tensor([1.0], requires_grad=True)
        with no_grad():
            assert not is_grad_enabled()
            y = mul(x, x)
        assert is_grad_enabled()
        assert not y.requires_grad

    def test_forward_is_deterministic(self):
        """Test repeated forward passes are bit-identical."""
        rng = np.random.default_rng(7)
        a, b = rng.normal(size=(4, 4)), rng.normal(size=(4, 4))
        first = softmax_rows(matmul(Tensor(a), Tensor(b))).data
        second = softmax_rows(matmul(Tensor(a), Tensor(b))).data
        assert first.tobytes() == second.tobytes()


class TestGradCheck:
    """Test finite-difference verification of every primitive."""

    def test_polynomial(self):
        """Test f = sum(x^2) at [1, 2, 3]."""
        x = Tensor([1.0, 2.0, 3.0], requires_grad=True)
        assert grad_check(lambda t: sum_all(mul(t, t)), x) < 1e-8

    def test_sigmoid(self):
        """Test f = sum(sigmoid(x))."""
        x = Tensor([0.5, -1.0, 2.0], requires_grad=True)
        assert grad_check(lambda t: sum_all(sigmoid(t)), x) < 1e-6

    def test_restores_grad(self):
        """Test the input's grad buffer is left as it was."""
        x = Tensor([1.0, 2.0], requires_grad=True)
        x.grad = np.array([7.0, 7.0])
        grad_check(lambda t: sum_all(mul(t, t)), x)
        np.testing.assert_array_equal(x.grad, [7.0, 7.0])

    @pytest.mark.parametrize("point", range(10))
    def test_primitives_at_random_points(self, point):
        """Test every differentiable primitive against central differences."""
        rng = np.random.default_rng(100 + point)
        weights = Tensor(rng.normal(size=(3, 4)))
        other = Tensor(rng.normal(size=(3, 4)))
        row = Tensor(rng.normal(size=(4,)))
        gamma, beta = Tensor(rng.normal(size=(4,))), Tensor(rng.normal(size=(4,)))
        table_ids = np.array([[0, 2, 2], [1, 0, 2]])
        projection = Tensor(rng.normal(size=(4,)))

        functions = {
            "add": lambda t: sum_all(mul(add(t, row), other)),
            "sub": lambda t: sum_all(mul(sub(t, other), other)),
            "mul_broadcast": lambda t: sum_all(mul(mul(t, row), other)),
            "scale": lambda t: sum_all(mul(scale(t, -1.7), other)),
            "matmul": lambda t: sum_all(mul(matmul(t, transpose(other)), Tensor(np.ones((3, 3))))),
            "concat": lambda t: sum_all(mul(concat([t, other]), concat([other, t]))),
            "reshape": lambda t: sum_all(mul(reshape(t, (4, 3)), reshape(other, (4, 3)))),
            "relu": lambda t: sum_all(mul(relu(t), other)),
            "tanh": lambda t: sum_all(mul(tanh(t), other)),
            "softmax": lambda t: sum_all(mul(softmax_rows(t), other)),
            "layer_norm": lambda t: sum_all(mul(layer_norm_rows(t, gamma, beta), other)),
            "mean_rows": lambda t: sum_all(mul(mean_rows(t), row)),
            "sum_rows": lambda t: sum_all(mul(sum_rows(t), Tensor(np.arange(3.0)))),
            "log": lambda t: sum_all(log(add(mul(t, t), Tensor(0.5)))),
            "take_rows": lambda t: sum_all(mul(take_rows(t, table_ids), projection)),
        }
        for name, f in functions.items():
            x = Tensor(rng.normal(size=(3, 4)), requires_grad=True)
            error = grad_check(f, x)
            assert error < 1e-4, f"{name}: relative error {error}"

    def test_random_two_layer_net(self):
        """Test every parameter of a small 3x4 network."""
        rng = np.random.default_rng(8)
        x = Tensor(rng.normal(size=(5, 3)))
        w1, b1 = _param(rng, (3, 4)), _param(rng, (4,))
        w2, b2 = _param(rng, (4, 2)), _param(rng, (2,))
        y = Tensor(np.eye(2)[rng.integers(2, size=5)])

        def loss(_):
            hidden = tanh(add(matmul(x, w1), b1))
            probs = softmax_rows(add(matmul(hidden, w2), b2))
            return scale(sum_all(mul(log(probs), y)), -1.0 / 5)

        for p in (w1, b1, w2, b2):
            assert grad_check(loss, p) < 1e-4

    def test_dropout_with_frozen_mask(self):
        """Test dropout's gradient with a fixed keep mask."""
        rng = np.random.default_rng(9)
        mask = rng.random((3, 4)) >= 0.4
        other = Tensor(rng.normal(size=(3, 4)))
        x = Tensor(rng.normal(size=(3, 4)), requires_grad=True)
        f = lambda t: sum_all(mul(dropout(t, 0.4, True, mask=mask), other))  # noqa: E731
        assert grad_check(f, x) < 1e-4


class TestDropout:
    """Test inverted dropout."""

    def test_eval_is_identity(self):
        """Test eval mode passes values through."""
        x = Tensor(np.arange(6.0).reshape(2, 3))
        np.testing.assert_array_equal(dropout(x, 0.4, train=False).data, x.data)

    def test_inverted_scaling(self):
        """Test kept values are divided by the keep probability."""
        rng = np.random.default_rng(10)
        out = dropout(Tensor(np.ones((50, 50))), 0.4, train=True, rng=rng).data
        assert set(np.unique(out)) <= {0.0, 1.0 / 0.6}

    def test_invalid_rate(self):
        """Test the rate must be in [0, 1)."""
        with pytest.raises(ValueError):
            dropout(Tensor(np.ones(3)), 1.0, train=True, rng=np.random.default_rng(0))


class TestModule:
    """Test parameter discovery and state dicts."""

    class _Pair(Module):
        def __init__(self, rng):
            self.weight = init_weight(rng, (2, 3))
            self.bias = init_constant((3,))
            self.children = [Module()]
            self._cache = init_weight(rng, (5, 5))

    def test_named_parameters_skip_private(self):
        """Test underscore-prefixed attributes are not parameters."""
        module = self._Pair(np.random.default_rng(0))
        assert [name for name, _ in module.named_parameters()] == ["weight", "bias"]

    def test_state_dict_round_trip(self):
        """Test load_state_dict restores copied values."""
        module = self._Pair(np.random.default_rng(0))
        state = module.state_dict()
        module.weight.data = module.weight.data + 1.0
        module.load_state_dict(state)
        np.testing.assert_array_equal(module.weight.data, state["weight"])

    def test_load_state_dict_mismatch(self):
        """Test strict loading reports missing names and shape errors."""
        module = self._Pair(np.random.default_rng(0))
        with pytest.raises(KeyError, match="missing"):
            module.load_state_dict({"weight": np.zeros((2, 3))})
        with pytest.raises(DimensionError):
            module.load_state_dict({"weight": np.zeros((3, 2)), "bias": np.zeros(3)})

    def test_freeze(self):
        """Test frozen modules expose no parameters."""
        module = self._Pair(np.random.default_rng(0))
        module.freeze()
        assert module.parameters() == []
