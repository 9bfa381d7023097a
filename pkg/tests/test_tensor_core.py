"""Tests for the Tensor, Grad_Tape and the differentiable operations."""

from unittest import TestCase

import numpy as np

from lm_memorization.lm_memorization_exceptions.LM_Memorization_Exception import Config_Exception, Input_Exception, Numeric_Exception, Tape_Consumed_Exception, Undefined_Loss_Exception
from lm_memorization.tensor_core.gradient_check import GRADIENT_FLOOR, finite_difference_check
from lm_memorization.tensor_core.Grad_Tape import Grad_Tape
from lm_memorization.tensor_core.operations import add, cross_entropy, embedding, gelu, layer_norm, matmul, mul, softmax, tensor_sum
from lm_memorization.tensor_core.Tensor import Tensor


def _float64(shape: tuple[int, ...], seed: int = 0) -> Tensor:
    return Tensor(np.random.default_rng(seed).normal(size=shape), requires_grad=True, dtype=np.float64)


class TestTensor(TestCase):

    def test_integer_data_takes_training_precision(self):
        self.assertEqual(Tensor([1, 2, 3]).dtype, np.float32)

    def test_float_data_keeps_precision(self):
        self.assertEqual(Tensor(np.zeros(3, dtype=np.float64)).dtype, np.float64)

    def test_grad_present_iff_requires_grad(self):
        self.assertIsNone(Tensor([1.0]).grad)
        self.assertTrue(np.array_equal(Tensor([1.0, 2.0], requires_grad=True).grad, np.zeros(2, dtype=np.float32)))

    def test_operations_outside_tape_do_not_require_grad(self):
        a = _float64((2, 3))
        self.assertFalse(add(a, a).requires_grad)


class TestGradTape(TestCase):

    def test_broadcast_add_gradient_sums_over_broadcast_axes(self):
        a = _float64((2, 3))
        b = _float64((3,), seed=1)
        with Grad_Tape() as tape:
            loss = tensor_sum(add(a, b))
        tape.backward(loss)
        self.assertTrue(np.allclose(a.grad, np.ones((2, 3))))
        self.assertTrue(np.allclose(b.grad, np.full(3, 2.0)))

    def test_matmul_gradient_matches_closed_form(self):
        a = _float64((2, 3))
        b = _float64((3, 4), seed=1)
        with Grad_Tape() as tape:
            loss = tensor_sum(matmul(a, b))
        tape.backward(loss)
        self.assertTrue(np.allclose(a.grad, np.ones((2, 4)) @ b.data.T))
        self.assertTrue(np.allclose(b.grad, a.data.T @ np.ones((2, 4))))

    def test_shared_operand_accumulates(self):
        a = _float64((3,))
        with Grad_Tape() as tape:
            loss = tensor_sum(mul(a, a))
        tape.backward(loss)
        self.assertTrue(np.allclose(a.grad, 2.0 * a.data))

    def test_second_backward_raises(self):
        a = _float64((3,))
        with Grad_Tape() as tape:
            loss = tensor_sum(a)
        tape.backward(loss)
        with self.assertRaises(Tape_Consumed_Exception):
            tape.backward(loss)

    def test_consumed_tape_cannot_be_reentered(self):
        a = _float64((3,))
        with Grad_Tape() as tape:
            loss = tensor_sum(a)
        tape.backward(loss)
        with self.assertRaises(Tape_Consumed_Exception):
            with tape:
                pass

    def test_non_scalar_loss_raises(self):
        a = _float64((3,))
        with Grad_Tape() as tape:
            out = mul(a, 2.0)
        with self.assertRaises(Input_Exception):
            tape.backward(out)

    def test_no_tape_is_active_after_block(self):
        with Grad_Tape():
            self.assertIsNotNone(Grad_Tape.current())
        self.assertIsNone(Grad_Tape.current())


class TestOperations(TestCase):

    def test_softmax_rows_sum_to_one_and_respect_mask(self):
        x = _float64((4, 4))
        mask = np.tril(np.ones((4, 4), dtype=bool))
        probabilities = softmax(x, axis=-1, mask=mask).data
        self.assertTrue(np.allclose(probabilities.sum(axis=-1), 1.0))
        self.assertTrue(np.all(probabilities[~mask] == 0.0))

    def test_layer_norm_output_is_standardized(self):
        x = _float64((5, 8))
        out = layer_norm(x, Tensor(np.ones(8), dtype=np.float64), Tensor(np.zeros(8), dtype=np.float64)).data
        self.assertTrue(np.allclose(out.mean(axis=-1), 0.0, atol=1e-7))
        self.assertTrue(np.allclose(out.std(axis=-1), 1.0, atol=1e-3))

    def test_embedding_gathers_rows(self):
        weight = _float64((6, 3))
        out = embedding(weight, np.array([[0, 5], [5, 5]]))
        self.assertTrue(np.array_equal(out.data[0, 1], weight.data[5]))

    def test_cross_entropy_of_uniform_logits(self):
        logits = Tensor(np.zeros((3, 10)), dtype=np.float64)
        loss = cross_entropy(logits, [1, 2, 3])
        self.assertAlmostEqual(loss.item(), np.log(10.0))

    def test_cross_entropy_ignores_masked_positions(self):
        logits = Tensor(np.array([[10.0, 0.0], [0.0, 10.0]]), dtype=np.float64)
        kept = cross_entropy(logits, [0, 0], ignore_mask=[False, True])
        self.assertAlmostEqual(kept.item(), np.log1p(np.exp(-10.0)))

    def test_cross_entropy_all_ignored_is_undefined(self):
        logits = Tensor(np.zeros((2, 4)))
        with self.assertRaises(Undefined_Loss_Exception):
            cross_entropy(logits, [0, 1], ignore_mask=[True, True])

    def test_cross_entropy_target_out_of_range(self):
        with self.assertRaises(Input_Exception):
            cross_entropy(Tensor(np.zeros((2, 4))), [0, 4])

    def test_non_finite_forward_raises(self):
        with self.assertRaises(Numeric_Exception):
            mul(Tensor([np.inf]), 0.0)


class TestFiniteDifferenceCheck(TestCase):

    def test_gelu_gradient(self):
        x = _float64((4, 5))
        self.assertLess(finite_difference_check(lambda t: tensor_sum(gelu(t)), x), 1e-4)

    def test_layer_norm_gradient(self):
        x = _float64((3, 6))
        gain = Tensor(np.random.default_rng(2).normal(size=6), dtype=np.float64)
        bias = Tensor(np.zeros(6), dtype=np.float64)
        weights = np.random.default_rng(3).normal(size=(3, 6))
        self.assertLess(finite_difference_check(lambda t: tensor_sum(mul(layer_norm(t, gain, bias), weights)), x), 1e-4)

    def test_cross_entropy_gradient(self):
        logits = _float64((4, 7))
        self.assertLess(finite_difference_check(lambda t: cross_entropy(t, [0, 3, 6, 2], ignore_mask=[False, True, False, False]), logits), 1e-4)

    def test_single_precision_is_rejected(self):
        with self.assertRaises(Config_Exception):
            finite_difference_check(lambda t: tensor_sum(t), Tensor(np.zeros(3), requires_grad=True, dtype=np.float32))

    def test_tensor_without_grad_is_rejected(self):
        with self.assertRaises(Config_Exception):
            finite_difference_check(lambda t: tensor_sum(t), Tensor(np.zeros(3), dtype=np.float64))

    def test_floor_defaults_to_float64_round_off(self):
        self.assertEqual(GRADIENT_FLOOR, 1e-8)

    def test_larger_floor_never_raises_the_error(self):
        x = _float64((2, 3))
        weights = np.random.default_rng(4).normal(size=(2, 3))

        def loss(t: Tensor) -> Tensor:
            return tensor_sum(mul(softmax(t), weights))

        self.assertLessEqual(finite_difference_check(loss, x, floor=1e-6), finite_difference_check(loss, x))
        self.assertLess(finite_difference_check(loss, x, floor=1e-6), 1e-4)
