"""
Testes dos otimizadores.
"""
import numpy as np
import pytest

from raq.autodiff import ops
from raq.autodiff.optim import AdamW, sgd_step, zero_grad
from raq.autodiff.tensor import Tensor, backward
from raq.untils.errors import MissingGradientError


def _quadratic(w: Tensor, target: np.ndarray) -> Tensor:
    return ops.sum_(ops.square(ops.sub(w, Tensor(target, dtype=w.dtype))))


@pytest.mark.usefixtures("float64")
class TestSgd:
    def test_single_step(self):
        w = Tensor([1.0, -2.0], requires_grad=True)
        backward(_quadratic(w, np.zeros(2)))
        sgd_step([w], lr=0.25)
        np.testing.assert_allclose(w.data, [0.5, -1.0])

    def test_missing_gradient_is_error(self):
        w = Tensor([1.0], requires_grad=True, name="w")
        with pytest.raises(MissingGradientError):
            sgd_step([w], lr=0.1)


@pytest.mark.usefixtures("float64")
class TestAdamW:
    def test_converges_on_convex_problem(self):
        target = np.array([0.3, -0.7, 1.2])
        w = Tensor(np.zeros(3), requires_grad=True, name="w")
        opt = AdamW(lr=0.05, weight_decay=0.0)
        for _ in range(300):
            zero_grad([w])
            backward(_quadratic(w, target))
            opt.step([w])
        np.testing.assert_allclose(w.data, target, atol=5e-2)

    def test_first_step_moves_by_learning_rate(self):
        # com correção de viés, o primeiro passo tem módulo lr por coordenada
        w = Tensor([1.0, -1.0], requires_grad=True, name="w")
        backward(_quadratic(w, np.zeros(2)))
        AdamW(lr=0.1, weight_decay=0.0).step([w])
        np.testing.assert_allclose(w.data, [0.9, -0.9], atol=1e-6)

    def test_weight_decay_is_decoupled(self):
        w = Tensor([2.0], requires_grad=True, name="w")
        w.grad = np.zeros(1)
        AdamW(lr=0.1, weight_decay=0.5).step([w])
        np.testing.assert_allclose(w.data, [2.0 * (1 - 0.1 * 0.5)])

    def test_step_counts_are_per_parameter(self):
        a = Tensor([1.0], requires_grad=True, name="a")
        b = Tensor([1.0], requires_grad=True, name="b")
        opt = AdamW()
        for p in (a, b):
            p.grad = np.ones(1)
        opt.step([a, b])
        a.grad = np.ones(1)
        opt.step([a])
        assert opt.state.steps == {"a": 2, "b": 1}

    def test_state_arrays_roundtrip(self):
        w = Tensor([1.0, 2.0], requires_grad=True, name="w")
        opt = AdamW()
        w.grad = np.array([0.5, -0.5])
        opt.step([w])
        restored = AdamW()
        restored.load_state_arrays(opt.state_arrays())
        assert restored.state.steps == opt.state.steps
        np.testing.assert_array_equal(restored.state.exp_avg["w"], opt.state.exp_avg["w"])
        np.testing.assert_array_equal(restored.state.exp_avg_sq["w"], opt.state.exp_avg_sq["w"])
