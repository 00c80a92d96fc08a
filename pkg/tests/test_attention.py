"""
Tests for static, dynamic, multi-head, hybrid and token-level attention.
"""

import numpy as np
import pytest
from dialattn.attention import AttentionParams, DynamicAttnParams, HybridConfig, MultiHeadParams
from dialattn.attention import StaticAttnParams, attend, dynamic_context, flatten_token_states
from dialattn.attention import hybrid_context, multi_head_context, static_context, token_level_context
from dialattn.corpus import pad_utterance
from dialattn.encoder import EncoderParams, encode_utterance
from dialattn.enums import AttentionKind, HybridMode, TokenLevel
from dialattn.exceptions import ContractError, DimensionError, ValidationError
from dialattn.gradcheck import check_gradients
from dialattn.params import named_parameters
from dialattn.tensor import Tensor, reduce_sum, tanh
from scipy.spatial.distance import cosine
from scipy.special import softmax

D = 4


def entries(rng, n=3, d=D):
    return [Tensor(rng.normal(size=d)) for _ in range(n)]


def reference_weights(h_list, query, params):
    """Numpy additive attention weights."""
    scores = [params.v.values @ np.tanh(params.w.values @ h.values + params.u.values @ query) for h in h_list]
    return softmax(scores)


class TestStaticAttention:
    """Tests for attention anchored on the last utterance."""

    def test_weights_match_formula(self, rng):
        """Scores use the last entry as the query."""
        params = StaticAttnParams.init(rng, D, D, scale=0.5)
        h = entries(rng)
        c, alpha = static_context(h, params)
        expected = reference_weights(h, h[-1].values, params)
        np.testing.assert_allclose(alpha.values, expected, rtol=1e-12)
        np.testing.assert_allclose(c.values, sum(a * x.values for a, x in zip(expected, h)), rtol=1e-12)

    def test_weights_sum_to_one(self, rng):
        """Weights are a distribution."""
        params = StaticAttnParams.init(rng, D, D, scale=0.5)
        _, alpha = static_context(entries(rng, 5), params)
        assert alpha.values.sum() == pytest.approx(1.0)
        assert np.all(alpha.values > 0.0)

    def test_single_utterance(self, rng):
        """One utterance gets all the weight."""
        params = StaticAttnParams.init(rng, D, D)
        h = entries(rng, 1)
        c, alpha = static_context(h, params)
        np.testing.assert_allclose(alpha.values, [1.0])
        np.testing.assert_allclose(c.values, h[0].values)

    def test_mask_moves_anchor(self, rng):
        """Masked entries get weight 0 and the anchor is the last unmasked one."""
        params = StaticAttnParams.init(rng, D, D, scale=0.5)
        h = entries(rng, 4)
        mask = np.array([True, True, True, False])
        _, alpha = static_context(h, params, mask)
        assert alpha.values[3] == 0.0
        np.testing.assert_allclose(alpha.values[:3], reference_weights(h[:3], h[2].values, params))

    def test_permutation_equivariance(self, rng):
        """Shuffling the earlier utterances shuffles their weights; c and the anchor stay put."""
        params = StaticAttnParams.init(rng, D, D, scale=0.5)
        h = entries(rng, 5)
        order = [3, 0, 2, 1, 4]
        c, alpha = static_context(h, params)
        c_perm, alpha_perm = static_context([h[i] for i in order], params)
        np.testing.assert_allclose(alpha_perm.values, alpha.values[order], rtol=0.0, atol=1e-12)
        np.testing.assert_allclose(c_perm.values, c.values, rtol=0.0, atol=1e-12)

    def test_context_is_convex_combination(self, rng):
        """Every component of c lies between the smallest and largest entry component."""
        for _ in range(20):
            params = StaticAttnParams.init(rng, D, D, scale=1.0)
            h = entries(rng, int(rng.integers(1, 7)))
            c, _ = static_context(h, params)
            stacked = np.stack([x.values for x in h])
            assert np.all(c.values >= stacked.min(axis=0) - 1e-12)
            assert np.all(c.values <= stacked.max(axis=0) + 1e-12)

    def test_empty_and_fully_masked(self, rng):
        """There must be something to attend over."""
        params = StaticAttnParams.init(rng, D, D)
        with pytest.raises(ValidationError):
            static_context([], params)
        with pytest.raises(ValidationError):
            static_context(entries(rng, 2), params, np.array([False, False]))

    def test_mask_length(self, rng):
        """Mask and entries must align."""
        params = StaticAttnParams.init(rng, D, D)
        with pytest.raises(DimensionError):
            static_context(entries(rng, 2), params, np.array([True]))


class TestDynamicAttention:
    """Tests for attention queried by the decoder state."""

    def test_zero_query_matrix_matches_static(self, rng):
        """With U = 0 and shared V, W both kinds give the same context."""
        base = StaticAttnParams.init(rng, D, D, scale=0.5)
        base.u.values[:] = 0.0
        dyn = DynamicAttnParams(base.v, base.w, base.u)
        h = entries(rng)
        c_static, _ = static_context(h, base)
        c_dynamic, _ = dynamic_context(h, Tensor(rng.normal(size=D)), dyn)
        np.testing.assert_allclose(c_dynamic.values, c_static.values, rtol=1e-12)

    def test_last_state_query_matches_static(self, rng):
        """Querying with h_S reproduces static attention."""
        params = AttentionParams.init(rng, D, D, scale=0.5)
        h = entries(rng)
        np.testing.assert_allclose(
            dynamic_context(h, h[-1], params)[1].values, static_context(h, params)[1].values
        )

    def test_weights_follow_query(self, rng):
        """Different decoder states give different weights."""
        params = DynamicAttnParams.init(rng, D, D, scale=0.5)
        h = entries(rng)
        a1 = dynamic_context(h, Tensor(rng.normal(size=D)), params)[1].values
        a2 = dynamic_context(h, Tensor(rng.normal(size=D)), params)[1].values
        assert not np.allclose(a1, a2)

    def test_mixed_widths(self, rng):
        """The query may be wider than the entries."""
        params = DynamicAttnParams.init(rng, D, D + 2, scale=0.5)
        h = entries(rng)
        s = rng.normal(size=D + 2)
        _, alpha = dynamic_context(h, Tensor(s), params)
        np.testing.assert_allclose(alpha.values, reference_weights(h, s, params), rtol=1e-12)

    def test_requires_state(self, rng):
        """attend() needs s_{t-1} for dynamic attention."""
        params = DynamicAttnParams.init(rng, D, D)
        with pytest.raises(ContractError):
            attend(entries(rng), params, AttentionKind.DYNAMIC)


class TestMultiHead:
    """Tests for multi-head attention."""

    def test_concat_and_project(self, rng):
        """Heads are concatenated and projected by W^O."""
        params = MultiHeadParams.init(rng, AttentionKind.STATIC, 2, D, D, scale=0.5)
        h = entries(rng)
        heads = [static_context(h, p)[0].values for p in params.heads]
        out = multi_head_context(h, None, params, AttentionKind.STATIC)
        np.testing.assert_allclose(out.values, params.output.values @ np.concatenate(heads), rtol=1e-12)
        assert out.shape == (D,)

    def test_heads_are_independent(self, rng):
        """Each head has its own parameters."""
        params = MultiHeadParams.init(rng, AttentionKind.DYNAMIC, 4, D, D)
        assert params.num_heads == 4
        assert all(isinstance(p, DynamicAttnParams) for p in params.heads)
        assert len({id(p.v) for p in params.heads}) == 4
        assert params.output.shape == (D, 4 * D)

    def test_dynamic_needs_state(self, rng):
        """Dynamic heads need the decoder state."""
        params = MultiHeadParams.init(rng, AttentionKind.DYNAMIC, 2, D, D)
        with pytest.raises(ContractError):
            multi_head_context(entries(rng), None, params, AttentionKind.DYNAMIC)

    def test_projection_shape(self, rng):
        """W^O must be d_h×(H·d_h)."""
        params = MultiHeadParams.init(rng, AttentionKind.STATIC, 2, D, D)
        with pytest.raises(DimensionError):
            MultiHeadParams(params.heads, Tensor(np.zeros((D, D))))

    def test_gradients(self, rng):
        """Tape gradients through two dynamic heads."""
        params = MultiHeadParams.init(rng, AttentionKind.DYNAMIC, 2, D, D, scale=0.5)
        h = entries(rng)
        s = Tensor(rng.normal(size=D))
        report = check_gradients(
            lambda: reduce_sum(tanh(multi_head_context(h, s, params, AttentionKind.DYNAMIC))),
            dict(named_parameters(params)),
        )
        assert report.passed, report.to_text()


class TestHybrid:
    """Tests for combining static and dynamic contexts."""

    @pytest.fixture
    def contexts(self, rng):
        return Tensor(rng.normal(size=D)), Tensor(rng.normal(size=D)), Tensor(rng.normal(size=D))

    def test_concat(self, contexts):
        """Concat stacks the two contexts."""
        c, ct, s = contexts
        out = hybrid_context(c, ct, s, HybridConfig(HybridMode.CONCAT))
        np.testing.assert_array_equal(out.values, np.concatenate([c.values, ct.values]))
        assert HybridConfig(HybridMode.CONCAT).output_size(D) == 2 * D

    def test_sum_and_learnable_start_equal(self, contexts):
        """Learnable starts at alpha = beta = 1, which is the sum."""
        c, ct, s = contexts
        learnable = HybridConfig.create(HybridMode.LEARNABLE)
        assert learnable.alpha.item() == 1.0 and learnable.beta.item() == 1.0
        np.testing.assert_allclose(
            hybrid_context(c, ct, s, learnable).values,
            hybrid_context(c, ct, s, HybridConfig(HybridMode.SUM)).values,
        )

    def test_learnable_weights(self, contexts):
        """alpha and beta scale each context."""
        c, ct, s = contexts
        cfg = HybridConfig.create(HybridMode.LEARNABLE)
        cfg.alpha.values[...] = 0.25
        cfg.beta.values[...] = 2.0
        out = hybrid_context(c, ct, s, cfg)
        np.testing.assert_allclose(out.values, 0.25 * c.values + 2.0 * ct.values)

    def test_max_and_mean(self, contexts):
        """Elementwise pooling; the mean of a context with itself is itself."""
        c, ct, s = contexts
        np.testing.assert_array_equal(
            hybrid_context(c, ct, s, HybridConfig(HybridMode.MAX)).values, np.maximum(c.values, ct.values)
        )
        np.testing.assert_allclose(hybrid_context(c, c, s, HybridConfig(HybridMode.MEAN)).values, c.values)

    def test_attention_mode(self, contexts):
        """Each context is weighted by its cosine with the decoder state."""
        c, ct, s = contexts
        hybrid = HybridConfig.create(HybridMode.ATTENTION, context_size=D, query_size=D)
        out = hybrid_context(c, ct, s, hybrid)
        w1 = 1.0 - cosine(c.values, s.values)
        w2 = 1.0 - cosine(ct.values, s.values)
        np.testing.assert_allclose(out.values, w1 * c.values + w2 * ct.values, rtol=1e-10)

    def test_attention_mode_projects_wider_state(self, rng, contexts):
        """A decoder state of another width is projected first."""
        c, ct, _ = contexts
        cfg = HybridConfig.create(HybridMode.ATTENTION, rng, context_size=D, query_size=D + 2)
        assert cfg.query_projection.shape == (D, D + 2)
        s = Tensor(rng.normal(size=D + 2))
        q = cfg.query_projection.values @ s.values
        expected = (1.0 - cosine(c.values, q)) * c.values + (1.0 - cosine(ct.values, q)) * ct.values
        np.testing.assert_allclose(hybrid_context(c, ct, s, cfg).values, expected, rtol=1e-10)

    def test_attention_mode_needs_state(self, contexts):
        """The attention hybrid reads s_{t-1}."""
        c, ct, _ = contexts
        with pytest.raises(ContractError):
            hybrid_context(c, ct, None, HybridConfig(HybridMode.ATTENTION))

    def test_shape_mismatch(self, rng):
        """Both contexts must have the same width."""
        with pytest.raises(DimensionError):
            hybrid_context(Tensor(np.zeros(3)), Tensor(np.zeros(4)), None, HybridConfig(HybridMode.SUM))

    @pytest.mark.parametrize('mode', list(HybridMode))
    def test_gradients(self, rng, mode):
        """Every hybrid mode differentiates correctly."""
        static = StaticAttnParams.init(rng, D, D, scale=0.5)
        dynamic = DynamicAttnParams.init(rng, D, D, scale=0.5)
        cfg = HybridConfig.create(mode, rng, D, D)
        h = entries(rng)
        s = Tensor(rng.normal(size=D))

        def loss():
            c = static_context(h, static)[0]
            ct = dynamic_context(h, s, dynamic)[0]
            return reduce_sum(tanh(hybrid_context(c, ct, s, cfg)))

        params = dict(named_parameters(static, 'static'))
        params.update(named_parameters(dynamic, 'dynamic'))
        params.update(named_parameters(cfg, 'hybrid'))
        report = check_gradients(loss, params)
        assert report.passed, report.to_text()


class TestTokenLevel:
    """Tests for attention over per-token encoder states."""

    @pytest.fixture
    def states(self, rng):
        params = EncoderParams.init(rng, 10, 3, D, scale=0.5)
        return [encode_utterance(pad_utterance(ids, 5), params) for ids in ([4, 5], [6, 7, 8])]

    def test_flatten(self, states):
        """Token states and masks are concatenated across utterances."""
        flat, mask = flatten_token_states(states)
        assert len(flat) == 10
        assert mask.tolist() == [True] * 3 + [False] * 2 + [True] * 4 + [False]

    def test_replace_ignores_padding(self, rng, states):
        """REPLACE attends over non-PAD token states only."""
        params = StaticAttnParams.init(rng, D, D, scale=0.5)
        flat, mask = flatten_token_states(states)
        expected = static_context([t for t, m in zip(flat, mask) if m], params)[0]
        got = token_level_context(states, TokenLevel.REPLACE, params)
        np.testing.assert_allclose(got.values, expected.values, rtol=1e-12)

    def test_concat_entries(self, rng, states):
        """CONCAT appends a token summary to each utterance vector."""
        params = StaticAttnParams.init(rng, D, D, scale=0.5)
        out = token_level_context(states, TokenLevel.CONCAT, params)
        assert len(out) == 2
        for entry, s in zip(out, states):
            assert entry.shape == (2 * D,)
            np.testing.assert_array_equal(entry.values[:D], s.h.values)
            summary = static_context(s.token_states, params, s.mask)[0]
            np.testing.assert_allclose(entry.values[D:], summary.values)

    def test_off_rejected(self, rng, states):
        """OFF is not a token-level mode."""
        params = StaticAttnParams.init(rng, D, D)
        with pytest.raises(ValueError):
            token_level_context(states, TokenLevel.OFF, params)

    def test_empty(self, rng):
        """An empty context has no tokens."""
        with pytest.raises(ValidationError):
            token_level_context([], TokenLevel.REPLACE, StaticAttnParams.init(rng, D, D))
