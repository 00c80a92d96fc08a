"""
Tests for finite-difference gradient checking.
"""

import numpy as np
import pytest
from dialattn.config import ModelConfig
from dialattn.corpus import EOS
from dialattn.gradcheck import ERROR_FLOOR, GradCheckReport, ParameterCheck, central_difference
from dialattn.gradcheck import check_gradients, describe, gradcheck_model, relative_error, run_suite
from dialattn.gradcheck import suite_configs, synthetic_session
from dialattn.tensor import GRADIENT_RULES, Tensor, dot, override_gradient_rule, reduce_sum, tanh


def tiny(attention, **kw):
    defaults = {'heads': 1, 'embedding_dim': 5, 'hidden_size': 6, 'pad_len': 5, 'dropout': 0.0}
    return ModelConfig(attention=attention, **{**defaults, **kw})


class TestRelativeError:
    """Tests for the error measure."""

    def test_floor(self):
        """Both near zero compares against the floor."""
        assert relative_error(1e-9, 0.0) == pytest.approx(1e-9 / ERROR_FLOOR)

    def test_symmetric(self):
        """Swapping the arguments gives the same error."""
        assert relative_error(3.0, 2.0) == relative_error(2.0, 3.0)


class TestCentralDifference:
    """Tests for the numerical gradient."""

    def test_quadratic(self):
        """The central difference of x.x is 2x."""
        x = Tensor([1.0, -2.0, 0.5], requires_grad=True)
        grad = central_difference(lambda: float(x.values @ x.values), x)
        np.testing.assert_allclose(grad, 2.0 * x.values, rtol=1e-8)

    def test_restores_values(self):
        """Perturbation leaves the parameter exactly as it was."""
        x = Tensor([0.1, 0.2], requires_grad=True)
        before = x.values.copy()
        central_difference(lambda: float(np.sum(np.sin(x.values))), x)
        np.testing.assert_array_equal(x.values, before)

    def test_sampled_indices(self):
        """Unsampled elements stay 0."""
        x = Tensor([1.0, 2.0, 3.0], requires_grad=True)
        grad = central_difference(lambda: float(np.sum(x.values)), x, indices=np.array([1]))
        np.testing.assert_allclose(grad, [0.0, 1.0, 0.0])


class TestCheckGradients:
    """Tests for comparing tape and numerical gradients."""

    def test_passes_for_correct_rules(self, rng):
        """A composition of correct primitives passes."""
        a = Tensor(rng.normal(size=4), requires_grad=True)
        b = Tensor(rng.normal(size=4), requires_grad=True)
        report = check_gradients(lambda: dot(tanh(a), b), {'a': a, 'b': b}, label='dot-tanh')
        assert report.passed
        assert [c.name for c in report.checks] == ['a', 'b']
        assert report.to_text().startswith('PASS dot-tanh')

    def test_corrupted_rule_fails(self, rng):
        """A wrong gradient rule is detected and named."""
        a = Tensor(rng.normal(size=4), requires_grad=True)
        original = GRADIENT_RULES['tanh']

        def broken(g, node):
            return tuple(2.0 * gi for gi in original(g, node))

        with override_gradient_rule('tanh', broken):
            report = check_gradients(lambda: reduce_sum(tanh(a)), {'a': a})
        assert not report.passed
        assert report.worst.name == 'a'
        assert report.to_text().startswith('FAIL')
        assert GRADIENT_RULES['tanh'] is original

    def test_sampling(self, rng):
        """sample limits the checked elements per tensor."""
        a = Tensor(rng.normal(size=(5, 5)), requires_grad=True)
        report = check_gradients(lambda: reduce_sum(tanh(a)), {'a': a}, sample=7)
        assert report.checks[0].checked == 7

    def test_gradients_cleared(self, rng):
        """Parameters carry no gradient afterwards."""
        a = Tensor(rng.normal(size=3), requires_grad=True)
        check_gradients(lambda: reduce_sum(tanh(a)), {'a': a})
        assert a.grad is None or not np.any(a.grad)


class TestReport:
    """Tests for report aggregation."""

    def test_worst(self):
        """The worst check has the largest relative error."""
        report = GradCheckReport('x', 1e-4, [
            ParameterCheck('a', (2,), 2, 1e-6, 1e-8),
            ParameterCheck('b', (2,), 2, 1e-3, 1e-5),
        ])
        assert report.worst.name == 'b'
        assert not report.passed
        assert 'at b' in report.to_text()

    def test_empty(self):
        """No checks passes trivially."""
        assert GradCheckReport('x', 1e-4).passed


class TestModelGradients:
    """Finite-difference checks of full models."""

    def test_synthetic_session(self, rng):
        """Synthetic utterances are padded and avoid reserved ids."""
        session = synthetic_session(rng, vocab_size=12, num_utterances=4, pad_len=5)
        assert len(session.context_ids) == 4
        for ids in session.context_ids + [session.response_ids]:
            assert len(ids) == 5 and ids.count(EOS) == 1
            assert all(i >= 4 for i in ids[: ids.index(EOS)])

    @pytest.mark.parametrize('attention', ['static', 'dynamic', 'concat', 'sum', 'learnable', 'attention',
                                           'max', 'mean'])
    def test_every_mode(self, attention):
        """Every attention mode has correct gradients."""
        report = gradcheck_model(tiny(attention), vocab_size=12, sample=10)
        assert report.passed, report.to_text()

    @pytest.mark.parametrize('attention,overrides', [
        ('dynamic', {'heads': 2}),
        ('static', {'token_level': 'replace'}),
        ('sum', {'token_level': 'concat'}),
        ('dynamic', {'direction': 'bi'}),
        ('attention', {'decoder_hidden_size': 4}),
    ])
    def test_variants(self, attention, overrides):
        """Heads, token levels, directions and mixed widths."""
        report = gradcheck_model(tiny(attention, **overrides), vocab_size=12, sample=10)
        assert report.passed, report.to_text()

    def test_describe(self):
        """Labels name the non-default switches."""
        assert describe(tiny('dynamic', decoder_hidden_size=4)) == 'dynamic heads=1 uni d_s=4'

    def test_suite_coverage(self):
        """The suite covers every mode plus the structural variants."""
        configs = suite_configs()
        assert {c.attention.value for c in configs} >= {
            'static', 'dynamic', 'concat', 'sum', 'learnable', 'attention', 'max', 'mean'
        }
        assert {c.heads for c in configs} == {1, 2, 4}
        assert {c.token_level.value for c in configs} == {'off', 'replace', 'concat'}
        assert any(c.decoder_size != c.hidden_size for c in configs)

    def test_small_suite(self):
        """A reduced suite passes end to end."""
        configs = suite_configs(embedding_dim=4, hidden_size=6, pad_len=4)[:3]
        reports = run_suite(vocab_size=10, num_utterances=2, sample=6, configs=configs)
        assert len(reports) == 3
        assert all(r.passed for r in reports), [r.to_text() for r in reports]
