"""
Tests for the autodiff tensor and its primitives.
"""

import math

import numpy as np
import pytest
from dialattn.exceptions import ContractError, DimensionError, NumericError, ValidationError
from dialattn.gradcheck import check_gradients
from dialattn.tensor import GRADIENT_RULES, Tape, Tensor, add, backward, concat, cosine
from dialattn.tensor import cross_entropy, dot, dropout, elementwise, matmul, maximum, mul
from dialattn.tensor import no_grad, override_gradient_rule, reduce_sum, row, scale, sigmoid
from dialattn.tensor import softmax, stack, sub, tanh, transpose


def leaf(values):
    return Tensor(values, requires_grad=True)


class TestTensorBasics:
    """Tests for Tensor storage."""

    def test_values_are_float64(self):
        """Integer input is stored as float64."""
        t = Tensor([1, 2, 3])
        assert t.values.dtype == np.float64
        assert t.shape == (3,)
        assert t.ndim == 1

    def test_item_scalar(self):
        """item() returns a Python float."""
        assert Tensor(2.5).item() == 2.5

    def test_item_non_scalar(self):
        """item() on a vector is a contract violation."""
        with pytest.raises(ContractError):
            Tensor([1.0, 2.0]).item()

    def test_detach_copies(self):
        """detach() returns an independent untracked copy."""
        t = leaf([1.0, 2.0])
        d = t.detach()
        d.values[0] = 9.0
        assert t.values[0] == 1.0
        assert not d.requires_grad


class TestMatmul:
    """Tests for matrix products."""

    def test_forward(self):
        """Matrix times matrix and matrix times vector."""
        a = Tensor([[1.0, 2.0], [3.0, 4.0]])
        b = Tensor([[5.0], [6.0]])
        np.testing.assert_allclose(matmul(a, b).values, [[17.0], [39.0]])
        np.testing.assert_allclose(matmul(a, Tensor([1.0, 1.0])).values, [3.0, 7.0])

    def test_shape_mismatch(self):
        """Inner dimensions must agree."""
        with pytest.raises(DimensionError):
            matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 2))))

    def test_gradient_matches_finite_differences(self, rng):
        """3×4 · 4×2 gradients agree with central differences to 1e-6."""
        a = leaf(rng.uniform(-0.5, 0.5, (3, 4)))
        b = leaf(rng.uniform(-0.5, 0.5, (4, 2)))
        weights = Tensor(rng.uniform(-1.0, 1.0, (3, 2)))
        report = check_gradients(
            lambda: reduce_sum(mul(matmul(a, b), weights)), {'a': a, 'b': b}, tol=1e-6
        )
        assert report.passed, report.to_text()

    def test_transpose_gradient(self, rng):
        """Transpose routes gradients back transposed."""
        a = leaf(rng.uniform(-0.5, 0.5, (2, 3)))
        x = Tensor(rng.uniform(-0.5, 0.5, 2))
        report = check_gradients(lambda: reduce_sum(tanh(matmul(transpose(a), x))), {'a': a})
        assert report.passed, report.to_text()


class TestElementwise:
    """Tests for pointwise primitives."""

    def test_dispatch(self):
        """elementwise() dispatches by name."""
        a = Tensor([1.0, -2.0])
        b = Tensor([3.0, 4.0])
        np.testing.assert_allclose(elementwise('add', a, b).values, [4.0, 2.0])
        np.testing.assert_allclose(elementwise('sub', a, b).values, [-2.0, -6.0])
        np.testing.assert_allclose(elementwise('mul', a, b).values, [3.0, -8.0])
        np.testing.assert_allclose(elementwise('scale', a, 2.0).values, [2.0, -4.0])
        np.testing.assert_allclose(elementwise('tanh', a).values, np.tanh([1.0, -2.0]))
        np.testing.assert_allclose(elementwise('sigmoid', a).values, 1.0 / (1.0 + np.exp([-1.0, 2.0])))

    def test_unknown_op(self):
        """Unknown names are rejected."""
        with pytest.raises(ValueError):
            elementwise('relu', Tensor([1.0]))

    def test_shape_mismatch(self):
        """Operands must share a shape."""
        with pytest.raises(DimensionError):
            add(Tensor([1.0, 2.0]), Tensor([1.0, 2.0, 3.0]))

    def test_tanh_limits(self):
        """tanh(0) = 0 and saturates to ±1."""
        np.testing.assert_allclose(tanh(Tensor([0.0, 50.0, -50.0])).values, [0.0, 1.0, -1.0])

    def test_sigmoid_stable(self):
        """Sigmoid of a huge negative input is 0 without overflow."""
        out = sigmoid(Tensor([-1000.0, 0.0, 1000.0])).values
        np.testing.assert_allclose(out, [0.0, 0.5, 1.0])
        assert np.all(np.isfinite(out))

    def test_pointwise_gradients(self, rng):
        """Gradients of the pointwise chain agree with central differences."""
        a = leaf(rng.uniform(-0.5, 0.5, 5))
        b = leaf(rng.uniform(-0.5, 0.5, 5))
        s = leaf(0.7)

        def loss():
            h = sigmoid(add(mul(a, b), scale(tanh(sub(a, b)), s)))
            return reduce_sum(scale(h, 1.3))

        report = check_gradients(loss, {'a': a, 'b': b, 's': s}, tol=1e-6)
        assert report.passed, report.to_text()

    def test_maximum_ties_route_to_first(self):
        """Equal elements send the whole gradient to the first operand."""
        a = leaf([1.0, 2.0, 3.0])
        b = leaf([1.0, 5.0, 0.0])
        with Tape() as tape:
            loss = reduce_sum(maximum(a, b))
        tape.backward(loss)
        np.testing.assert_array_equal(a.grad, [1.0, 0.0, 1.0])
        np.testing.assert_array_equal(b.grad, [0.0, 1.0, 0.0])


class TestSoftmax:
    """Tests for softmax and cross-entropy."""

    def test_analytic_fixture(self):
        """softmax([ln 2, 0, 0]) = [0.5, 0.25, 0.25]."""
        p = softmax(Tensor([math.log(2.0), 0.0, 0.0])).values
        np.testing.assert_allclose(p, [0.5, 0.25, 0.25], atol=1e-12)

    def test_shift_invariance(self, rng):
        """Adding a constant to every logit changes nothing."""
        x = rng.normal(size=6)
        np.testing.assert_allclose(softmax(Tensor(x)).values, softmax(Tensor(x + 100.0)).values, atol=1e-12)

    def test_large_logits(self):
        """Large logits do not overflow."""
        p = softmax(Tensor([1000.0, 999.0])).values
        assert np.all(np.isfinite(p))
        assert abs(p.sum() - 1.0) < 1e-12

    def test_mask_gives_exact_zero(self):
        """Masked positions get probability exactly 0."""
        p = softmax(Tensor([1.0, 2.0, 3.0]), mask=np.array([True, False, True])).values
        assert p[1] == 0.0
        assert abs(p.sum() - 1.0) < 1e-12

    def test_all_masked(self):
        """An empty support is a validation error."""
        with pytest.raises(ValidationError):
            softmax(Tensor([1.0, 2.0]), mask=np.array([False, False]))

    def test_nan_input(self):
        """NaN logits raise NumericError."""
        with pytest.raises(NumericError):
            softmax(Tensor([1.0, np.nan]))

    def test_gradient(self, rng):
        """Softmax gradient agrees with central differences to 1e-6."""
        x = leaf(rng.uniform(-0.5, 0.5, 5))
        w = Tensor(rng.uniform(-1.0, 1.0, 5))
        report = check_gradients(lambda: dot(softmax(x), w), {'x': x}, tol=1e-6)
        assert report.passed, report.to_text()

    def test_masked_gradient_is_zero_outside_support(self, rng):
        """Masked logits receive no gradient."""
        x = leaf(rng.uniform(-0.5, 0.5, 4))
        mask = np.array([True, True, False, True])
        w = Tensor(rng.uniform(-1.0, 1.0, 4))
        with Tape() as tape:
            loss = dot(softmax(x, mask), w)
        tape.backward(loss)
        assert x.grad[2] == 0.0

    def test_cross_entropy_matches_log_softmax(self, rng):
        """Cross-entropy is -log softmax at the target."""
        x = rng.normal(size=7)
        expected = -math.log(softmax(Tensor(x)).values[3])
        assert abs(cross_entropy(Tensor(x), 3).item() - expected) < 1e-12

    def test_cross_entropy_confident(self):
        """A dominant correct logit gives loss 0."""
        assert cross_entropy(Tensor([1000.0, 0.0, 0.0]), 0).item() == 0.0

    def test_cross_entropy_gradient(self, rng):
        """Logit gradient agrees with central differences."""
        x = leaf(rng.uniform(-0.5, 0.5, 6))
        report = check_gradients(lambda: cross_entropy(x, 2), {'x': x}, tol=1e-6)
        assert report.passed, report.to_text()

    def test_cross_entropy_bad_target(self):
        """Target ids outside the vocabulary are rejected."""
        with pytest.raises(DimensionError):
            cross_entropy(Tensor([0.0, 1.0]), 2)


class TestCosine:
    """Tests for the cosine primitive."""

    def test_parallel_and_orthogonal(self):
        """cos of parallel vectors is 1 and of orthogonal vectors 0."""
        assert abs(cosine(Tensor([1.0, 2.0]), Tensor([2.0, 4.0])).item() - 1.0) < 1e-12
        assert cosine(Tensor([1.0, 0.0]), Tensor([0.0, 3.0])).item() == 0.0

    def test_zero_norm(self):
        """A zero vector gives cosine 0 and zero gradients."""
        a = leaf([0.0, 0.0])
        b = leaf([1.0, 2.0])
        with Tape() as tape:
            loss = cosine(a, b)
        tape.backward(loss)
        assert loss.item() == 0.0
        np.testing.assert_array_equal(a.grad, [0.0, 0.0])
        np.testing.assert_array_equal(b.grad, [0.0, 0.0])

    def test_gradient(self, rng):
        """Cosine gradient agrees with central differences."""
        a = leaf(rng.uniform(-0.5, 0.5, 4))
        b = leaf(rng.uniform(-0.5, 0.5, 4))
        report = check_gradients(lambda: cosine(a, b), {'a': a, 'b': b}, tol=1e-6)
        assert report.passed, report.to_text()


class TestLayout:
    """Tests for stack, concat and row."""

    def test_concat_and_stack_gradients(self, rng):
        """Layout primitives pass gradients through unchanged."""
        a = leaf(rng.uniform(-0.5, 0.5, 3))
        b = leaf(rng.uniform(-0.5, 0.5, 2))
        m = leaf(rng.uniform(-0.5, 0.5, (4, 5)))
        w = Tensor(rng.uniform(-1.0, 1.0, (2, 5)))

        def loss():
            joined = concat([a, b])
            rows = stack([row(m, 1), row(m, 3)])
            return add(reduce_sum(tanh(joined)), reduce_sum(mul(rows, w)))

        report = check_gradients(loss, {'a': a, 'b': b, 'm': m}, tol=1e-6)
        assert report.passed, report.to_text()

    def test_row_gradient_is_sparse(self):
        """Only the selected embedding row receives gradient."""
        m = leaf(np.ones((3, 2)))
        with Tape() as tape:
            loss = reduce_sum(row(m, 1))
        tape.backward(loss)
        np.testing.assert_array_equal(m.grad, [[0.0, 0.0], [1.0, 1.0], [0.0, 0.0]])

    def test_row_out_of_range(self):
        """Row indices are bounds-checked."""
        with pytest.raises(DimensionError):
            row(Tensor(np.ones((3, 2))), 3)

    def test_concat_rejects_matrices(self):
        """Only vectors can be concatenated."""
        with pytest.raises(DimensionError):
            concat([Tensor(np.ones((2, 2)))])


class TestTape:
    """Tests for recording and reverse traversal."""

    def test_dot_example(self):
        """d/dx (x·x) = 2x."""
        x = leaf([1.0, 2.0, 3.0])
        with Tape() as tape:
            loss = dot(x, x)
        tape.backward(loss)
        np.testing.assert_array_equal(x.grad, [2.0, 4.0, 6.0])
        assert loss.grad == 1.0

    def test_shared_subexpression_accumulates(self):
        """A tensor used twice collects both contributions."""
        x = leaf(3.0)
        with Tape() as tape:
            y = mul(x, x)
            loss = add(y, scale(x, 2.0))
        tape.backward(loss)
        assert float(x.grad) == pytest.approx(8.0)

    def test_module_backward(self):
        """The module-level backward finds the producing tape."""
        x = leaf([1.0, -1.0])
        with Tape():
            loss = reduce_sum(mul(x, x))
        backward(loss)
        np.testing.assert_array_equal(x.grad, [2.0, -2.0])

    def test_non_scalar_loss(self):
        """backward needs a scalar."""
        x = leaf([1.0, 2.0])
        with Tape() as tape:
            y = tanh(x)
        with pytest.raises(ContractError):
            tape.backward(y)

    def test_foreign_loss(self):
        """A loss from another tape is rejected."""
        x = leaf([1.0, 2.0])
        with Tape():
            loss = dot(x, x)
        with pytest.raises(ContractError):
            Tape().backward(loss)

    def test_untracked_loss(self):
        """Without tracked inputs nothing is recorded."""
        with Tape() as tape:
            loss = dot(Tensor([1.0]), Tensor([2.0]))
        assert len(tape) == 0
        with pytest.raises(ContractError):
            backward(loss)

    def test_no_grad(self):
        """Primitives under no_grad are not recorded."""
        x = leaf([1.0, 2.0])
        with Tape() as tape:
            with no_grad():
                dot(x, x)
            assert len(tape) == 0
            dot(x, x)
        assert len(tape) == 1

    def test_override_gradient_rule_restores(self):
        """A replaced rule is used inside the block and restored after it."""
        original = GRADIENT_RULES['tanh']
        x = leaf([0.3])
        with override_gradient_rule('tanh', lambda g, node: (2.0 * g,)):
            with Tape() as tape:
                loss = reduce_sum(tanh(x))
            tape.backward(loss)
        assert x.grad[0] == 2.0
        assert GRADIENT_RULES['tanh'] is original

    def test_override_unknown_rule(self):
        """Only registered primitives can be overridden."""
        with pytest.raises(KeyError):
            with override_gradient_rule('nope', lambda g, node: (g,)):
                pass


class TestDropout:
    """Tests for inverted dropout."""

    def test_identity_without_rng(self):
        """No generator or zero rate leaves the input untouched."""
        x = Tensor([1.0, 2.0])
        assert dropout(x, 0.5, None) is x
        assert dropout(x, 0.0, np.random.default_rng(0)) is x

    def test_kept_values_are_rescaled(self):
        """Kept entries are divided by the keep probability."""
        out = dropout(Tensor(np.ones(1000)), 0.5, np.random.default_rng(0)).values
        assert set(np.unique(out)) <= {0.0, 2.0}
        assert 0.4 < (out > 0).mean() < 0.6
