"""
Testes do motor de diferenciação automática.
"""
import numpy as np
import pytest

from raq.autodiff import ops
from raq.autodiff.gradcheck import max_relative_error
from raq.autodiff.tensor import Tape, Tensor, backward, default_dtype, enable_grad, get_default_dtype, no_grad
from raq.untils.errors import NonFiniteError, RaqError, ShapeError

TOL = 1e-4
CASES = range(100)


def _param(rng, shape, low=-1.0, high=1.0, name="w"):
    return Tensor(rng.uniform(low, high, size=shape), requires_grad=True, name=name)


def _weighted_sum(out: Tensor, weights: np.ndarray) -> Tensor:
    """Projeta a saída num escalar com pesos fixos (gradiente de saída não trivial)."""
    return ops.sum_(ops.mul(out, Tensor(weights)))


@pytest.mark.usefixtures("float64")
class TestElementwiseGradients:
    @pytest.mark.parametrize("case", CASES)
    @pytest.mark.parametrize("op", ["add", "sub", "mul", "div"])
    def test_binary(self, op, case):
        rng = np.random.default_rng(case)
        a = _param(rng, (3, 4), name="a")
        b = _param(rng, (3, 4), 0.5, 2.0, name="b")
        weights = rng.normal(size=(3, 4))
        fn = lambda: _weighted_sum(ops.elementwise(op, a, b), weights)
        assert max_relative_error(fn, [a, b]) < TOL

    @pytest.mark.parametrize("case", CASES)
    @pytest.mark.parametrize("op", ["neg", "sigmoid", "tanh", "exp", "square"])
    def test_unary(self, op, case):
        rng = np.random.default_rng(case)
        a = _param(rng, (2, 5))
        weights = rng.normal(size=(2, 5))
        assert max_relative_error(lambda: _weighted_sum(ops.elementwise(op, a), weights), [a]) < TOL

    @pytest.mark.parametrize("case", CASES)
    def test_log_on_positive_inputs(self, case):
        rng = np.random.default_rng(case)
        a = _param(rng, (4,), 0.5, 3.0)
        weights = rng.normal(size=4)
        assert max_relative_error(lambda: _weighted_sum(ops.log(a), weights), [a]) < TOL

    @pytest.mark.parametrize("case", CASES)
    def test_relu_away_from_kink(self, case):
        rng = np.random.default_rng(case)
        values = rng.uniform(0.1, 1.0, size=(3, 3)) * rng.choice([-1.0, 1.0], size=(3, 3))
        a = Tensor(values, requires_grad=True)
        weights = rng.normal(size=(3, 3))
        assert max_relative_error(lambda: _weighted_sum(ops.relu(a), weights), [a]) < TOL

    @pytest.mark.parametrize("case", CASES)
    def test_scalar_operand(self, case):
        rng = np.random.default_rng(case)
        a = _param(rng, (3,))
        s = Tensor(rng.uniform(0.5, 2.0), requires_grad=True, name="s")
        fn = lambda: ops.sum_(ops.mul(ops.add(a, s), s))
        assert max_relative_error(fn, [a, s]) < TOL


@pytest.mark.usefixtures("float64")
class TestStructuredGradients:
    @pytest.mark.parametrize("case", CASES)
    def test_matmul(self, case):
        rng = np.random.default_rng(case)
        a = _param(rng, (3, 4), name="a")
        b = _param(rng, (4, 2), name="b")
        weights = rng.normal(size=(3, 2))
        assert max_relative_error(lambda: _weighted_sum(ops.matmul(a, b), weights), [a, b]) < TOL

    @pytest.mark.parametrize("case", CASES)
    def test_softmax_rows(self, case):
        rng = np.random.default_rng(case)
        a = _param(rng, (3, 5), -2.0, 2.0)
        weights = rng.normal(size=(3, 5))
        assert max_relative_error(lambda: _weighted_sum(ops.softmax(a, axis=1), weights), [a]) < TOL

    @pytest.mark.parametrize("case", CASES)
    def test_reductions_and_shapes(self, case):
        rng = np.random.default_rng(case)
        a = _param(rng, (2, 3, 4))
        weights = rng.normal(size=(4, 2))

        def fn():
            x = ops.permute(a, (2, 0, 1))
            x = ops.mean(x, axis=2)
            return _weighted_sum(ops.reshape(x, (4, 2)), weights)

        assert max_relative_error(fn, [a]) < TOL

    @pytest.mark.parametrize("case", CASES)
    def test_slice_concat_expand(self, case):
        rng = np.random.default_rng(case)
        a = _param(rng, (4, 3), name="a")
        b = _param(rng, (1, 3), name="b")
        weights = rng.normal(size=(5, 3))

        def fn():
            top = a[1:3, :]
            wide = ops.expand(b, (3, 3))
            return _weighted_sum(ops.concat([top, wide], axis=0), weights)

        assert max_relative_error(fn, [a, b]) < TOL

    @pytest.mark.parametrize("case", CASES)
    def test_take_rows_with_repeats(self, case):
        rng = np.random.default_rng(case)
        table = _param(rng, (5, 3))
        indices = rng.integers(0, 5, size=(2, 4))
        weights = rng.normal(size=(2, 4, 3))
        assert max_relative_error(lambda: _weighted_sum(ops.take_rows(table, indices), weights), [table]) < TOL

    @pytest.mark.parametrize("case", CASES)
    def test_pairwise_sq_dists(self, case):
        rng = np.random.default_rng(case)
        a = _param(rng, (4, 3), name="a")
        b = _param(rng, (2, 3), name="b")
        weights = rng.normal(size=(4, 2))
        assert max_relative_error(lambda: _weighted_sum(ops.pairwise_sq_dists(a, b), weights), [a, b]) < TOL

    @pytest.mark.parametrize("case", range(5))
    @pytest.mark.parametrize("stride,pad,kernel", [(1, 0, 3), (1, 1, 3), (2, 1, 4), (1, 0, 1)])
    def test_conv2d(self, case, stride, pad, kernel):
        rng = np.random.default_rng(case)
        x = _param(rng, (2, 2, 6, 6), name="x")
        w = _param(rng, (3, 2, kernel, kernel), name="k")
        out_shape = ops.conv2d(x, w, stride, pad).shape
        weights = rng.normal(size=out_shape)
        assert max_relative_error(lambda: _weighted_sum(ops.conv2d(x, w, stride, pad), weights), [x, w]) < TOL

    @pytest.mark.parametrize("case", range(5))
    @pytest.mark.parametrize("stride,pad,kernel", [(1, 0, 3), (2, 1, 4), (2, 0, 2)])
    def test_conv_transpose2d(self, case, stride, pad, kernel):
        rng = np.random.default_rng(case)
        x = _param(rng, (2, 3, 3, 3), name="x")
        w = _param(rng, (3, 2, kernel, kernel), name="k")
        out_shape = ops.conv_transpose2d(x, w, stride, pad).shape
        weights = rng.normal(size=out_shape)
        fn = lambda: _weighted_sum(ops.conv_transpose2d(x, w, stride, pad), weights)
        assert max_relative_error(fn, [x, w]) < TOL

    def test_channel_and_row_bias(self, rng):
        x = _param(rng, (2, 3, 2, 2), name="x")
        cb = _param(rng, (3,), name="cb")
        m = _param(rng, (4, 3), name="m")
        rb = _param(rng, (3,), name="rb")
        w1 = rng.normal(size=(2, 3, 2, 2))
        w2 = rng.normal(size=(4, 3))
        fn = lambda: ops.add(_weighted_sum(ops.channel_bias(x, cb), w1), _weighted_sum(ops.row_bias(m, rb), w2))
        assert max_relative_error(fn, [x, cb, m, rb]) < TOL


class TestConvShapes:
    def test_stride2_halves_resolution(self):
        x = Tensor(np.zeros((1, 1, 16, 16)))
        k = Tensor(np.zeros((4, 1, 4, 4)))
        assert ops.conv2d(x, k, stride=2, pad=1).shape == (1, 4, 8, 8)

    def test_transpose_doubles_resolution(self):
        x = Tensor(np.zeros((1, 4, 4, 4)))
        k = Tensor(np.zeros((4, 2, 4, 4)))
        assert ops.conv_transpose2d(x, k, stride=2, pad=1).shape == (1, 2, 8, 8)

    def test_non_integral_output_is_error(self):
        x = Tensor(np.zeros((1, 1, 5, 5)))
        k = Tensor(np.zeros((1, 1, 2, 2)))
        with pytest.raises(ShapeError):
            ops.conv2d(x, k, stride=2)

    def test_channel_mismatch_is_error(self):
        with pytest.raises(ShapeError):
            ops.conv2d(Tensor(np.zeros((1, 2, 4, 4))), Tensor(np.zeros((1, 3, 3, 3))))


class TestTape:
    def test_each_node_visited_once_with_shared_subexpression(self):
        a = Tensor([2.0], requires_grad=True)
        b = ops.mul(a, a)
        c = ops.add(b, b)
        loss = ops.sum_(c)
        tape = Tape.record(loss)
        assert len(tape.nodes) == len({id(n) for n in tape.nodes}) == 4
        assert len(tape) == sum(1 for n in tape.nodes if not n.is_leaf) == 3
        backward(loss)
        np.testing.assert_allclose(a.grad, [8.0])

    def test_backward_populates_intermediate_tensors(self):
        a = Tensor([1.0, 2.0], requires_grad=True)
        h = ops.mul(a, 3.0)
        loss = ops.sum_(ops.square(h))
        backward(loss)
        np.testing.assert_allclose(h.grad, 2.0 * h.data)
        np.testing.assert_allclose(a.grad, 6.0 * h.data)

    def test_repeated_backward_accumulates(self):
        a = Tensor([1.0], requires_grad=True)
        backward(ops.sum_(ops.mul(a, 2.0)))
        backward(ops.sum_(ops.mul(a, 2.0)))
        np.testing.assert_allclose(a.grad, [4.0])

    def test_constants_receive_no_gradient(self):
        a = Tensor([1.0], requires_grad=True)
        c = Tensor([5.0])
        backward(ops.sum_(ops.mul(a, c)))
        assert c.grad is None

    def test_non_scalar_loss_is_error(self):
        a = Tensor([1.0, 2.0], requires_grad=True)
        with pytest.raises(ShapeError):
            backward(ops.mul(a, 2.0))

    def test_loss_without_graph_is_error(self):
        with pytest.raises(RaqError):
            backward(ops.sum_(Tensor([1.0, 2.0])))

    def test_backward_uses_values_from_forward(self):
        # atualizar o parâmetro depois do forward não altera o backward já gravado
        w = Tensor([3.0], requires_grad=True)
        x = Tensor([2.0], requires_grad=True)
        loss = ops.sum_(ops.mul(w, x))
        w.data = np.array([100.0], dtype=w.data.dtype)
        backward(loss)
        np.testing.assert_allclose(x.grad, [3.0])


class TestModes:
    def test_no_grad_skips_recording(self):
        a = Tensor([1.0], requires_grad=True)
        with no_grad():
            out = ops.mul(a, 2.0)
        assert not out.requires_grad
        assert out.is_leaf

    def test_enable_grad_records_inside_no_grad(self):
        a = Tensor([3.0], requires_grad=True)
        with no_grad():
            with enable_grad():
                loss = ops.sum_(ops.square(a))
            skipped = ops.mul(a, 2.0)
        assert loss.requires_grad
        assert not skipped.requires_grad
        backward(loss)
        np.testing.assert_allclose(a.grad, [6.0])

    def test_default_dtype_is_restored(self):
        assert get_default_dtype() is np.float32
        with default_dtype(np.float64):
            assert Tensor([1.0]).dtype == np.float64
        assert Tensor([1.0]).dtype == np.float32

    def test_non_finite_is_error(self):
        a = Tensor([0.0], requires_grad=True)
        with pytest.raises(NonFiniteError):
            ops.log(a)

    def test_non_finite_input_is_error(self):
        with pytest.raises(NonFiniteError):
            Tensor([np.nan])

    def test_unknown_elementwise_op(self):
        with pytest.raises(ValueError):
            ops.elementwise("cbrt", Tensor([1.0]))

    def test_mismatched_shapes_are_error(self):
        with pytest.raises(ShapeError):
            ops.add(Tensor(np.zeros((2, 3))), Tensor(np.zeros((3, 2))))

    def test_detach_cuts_graph(self):
        a = Tensor([1.0], requires_grad=True)
        d = ops.mul(a, 2.0).detach()
        assert not d.requires_grad
        np.testing.assert_allclose(d.data, [2.0])
