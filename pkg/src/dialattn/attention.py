"""
Context attention over encoded utterances.

Static attention scores every utterance against the last one,

    e_i = V^T tanh(W h_i + U h_S),   alpha = softmax(e),   c = sum_i alpha_i h_i

once per session. Dynamic attention replaces h_S with the previous decoder
state s_{t-1} and is recomputed at every decoding step. Hybrid modes combine
the two contexts, multi-head attention concatenates independent heads and
projects them back, and the token-level variants attend over per-token
encoder states.
"""

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .encoder import UtteranceStates
from .enums import AttentionKind, HybridMode, TokenLevel
from .exceptions import ContractError, DimensionError, ValidationError
from .params import INIT_SCALE, constant, uniform
from .tensor import Tensor, add, concat, cosine, dot, matmul, maximum, scale
from .tensor import softmax, stack, tanh, transpose


@dataclass
class AttentionParams:
    """
    Additive attention parameters.

    Attributes
        v: [d_a]
        w: [d_a×d_h] applied to each memory entry
        u: [d_a×d_q] applied to the query (h_S or s_{t-1})
    """

    v: Tensor
    w: Tensor
    u: Tensor

    def __post_init__(self):
        d_a = self.v.shape[0]
        if self.w.shape[0] != d_a or self.u.shape[0] != d_a:
            raise DimensionError(f'attention: v {self.v.shape}, w {self.w.shape}, u {self.u.shape}')

    @property
    def entry_size(self) -> int:
        return self.w.shape[1]

    @property
    def query_size(self) -> int:
        return self.u.shape[1]

    @classmethod
    def init(
        cls,
        rng: np.random.Generator,
        entry_size: int,
        query_size: int,
        attn_size: int | None = None,
        scale: float = INIT_SCALE,
    ):
        attn_size = attn_size or entry_size
        return cls(
            v=uniform(rng, (attn_size,), scale),
            w=uniform(rng, (attn_size, entry_size), scale),
            u=uniform(rng, (attn_size, query_size), scale),
        )


@dataclass
class StaticAttnParams(AttentionParams):
    """Static attention parameters; u reads h_S."""


@dataclass
class DynamicAttnParams(AttentionParams):
    """Dynamic attention parameters, independent of the static set; u reads s_{t-1}."""


@dataclass
class MultiHeadParams:
    """
    H independent attention heads plus the output projection W^O.

    Attributes
        heads: One parameter set per head
        output: [d_h×(H·d_h)]
    """

    heads: list[AttentionParams]
    output: Tensor

    def __post_init__(self):
        if not self.heads:
            raise ValidationError('multi-head attention needs at least one head')
        width = self.heads[0].entry_size
        if self.output.shape != (width, width * len(self.heads)):
            raise DimensionError(
                f'W^O {self.output.shape} vs expected {(width, width * len(self.heads))}'
            )

    @property
    def num_heads(self) -> int:
        return len(self.heads)

    @classmethod
    def init(
        cls,
        rng: np.random.Generator,
        kind: AttentionKind,
        num_heads: int,
        entry_size: int,
        query_size: int,
        scale: float = INIT_SCALE,
    ) -> 'MultiHeadParams':
        head_cls = StaticAttnParams if kind is AttentionKind.STATIC else DynamicAttnParams
        heads = [head_cls.init(rng, entry_size, query_size, scale=scale) for _ in range(num_heads)]
        return cls(heads, uniform(rng, (entry_size, entry_size * num_heads), scale))


@dataclass
class HybridConfig:
    """
    Combination rule for the static and dynamic contexts.

    Attributes
        mode: One of the six hybrid modes
        alpha, beta: Trainable interpolation scalars (learnable mode, start at 1.0)
        query_projection: Maps s_{t-1} into the context width for the cosine
            weights of attention mode when the widths differ
    """

    mode: HybridMode
    alpha: Tensor | None = None
    beta: Tensor | None = None
    query_projection: Tensor | None = None

    @classmethod
    def create(
        cls,
        mode: HybridMode,
        rng: np.random.Generator | None = None,
        context_size: int | None = None,
        query_size: int | None = None,
        scale: float = INIT_SCALE,
    ) -> 'HybridConfig':
        if mode is HybridMode.LEARNABLE:
            return cls(mode, alpha=constant(1.0), beta=constant(1.0))
        needs_projection = context_size is not None and query_size not in (None, context_size)
        if mode is HybridMode.ATTENTION and needs_projection:
            if rng is None:
                raise ContractError('attention hybrid with mixed widths needs an rng for its projection')
            return cls(mode, query_projection=uniform(rng, (context_size, query_size), scale))
        return cls(mode)

    def output_size(self, context_size: int) -> int:
        return 2 * context_size if self.mode is HybridMode.CONCAT else context_size


def _anchor_index(mask: np.ndarray | None, n: int) -> int:
    if mask is None:
        return n - 1
    support = np.flatnonzero(mask)
    if support.size == 0:
        raise ValidationError('attention support is empty: every position is masked')
    return int(support[-1])


def _attend(
    h_list: Sequence[Tensor],
    query_term: Tensor,
    params: AttentionParams,
    mask: np.ndarray | None,
) -> tuple[Tensor, Tensor]:
    """Shared body: score entries against a projected query, normalise, pool."""
    scores = []
    for i, h in enumerate(h_list):
        if mask is not None and not mask[i]:
            scores.append(Tensor(0.0))
            continue
        scores.append(dot(params.v, tanh(add(matmul(params.w, h), query_term))))
    weights = softmax(stack(scores), mask)
    context = matmul(transpose(stack(h_list)), weights)
    return context, weights


def static_context(
    h_list: Sequence[Tensor],
    params: AttentionParams,
    mask: np.ndarray | None = None,
) -> tuple[Tensor, Tensor]:
    """
    Static context c and weights alpha over the memory entries.

    The anchor h_S is the last entry in the support. Masked entries receive
    weight exactly 0.

    Raises
        ValidationError: If h_list is empty or fully masked
    """
    if not h_list:
        raise ValidationError('static attention over an empty context')
    if mask is not None and len(mask) != len(h_list):
        raise DimensionError(f'mask length {len(mask)} vs {len(h_list)} entries')
    anchor = h_list[_anchor_index(mask, len(h_list))]
    return _attend(h_list, matmul(params.u, anchor), params, mask)


def dynamic_context(
    h_list: Sequence[Tensor],
    s_prev: Tensor,
    params: AttentionParams,
    mask: np.ndarray | None = None,
) -> tuple[Tensor, Tensor]:
    """
    Dynamic context c_t and weights alpha_t for decoder state s_{t-1}.

    Raises
        ValidationError: If h_list is empty or fully masked
    """
    if not h_list:
        raise ValidationError('dynamic attention over an empty context')
    if mask is not None and len(mask) != len(h_list):
        raise DimensionError(f'mask length {len(mask)} vs {len(h_list)} entries')
    _anchor_index(mask, len(h_list))
    return _attend(h_list, matmul(params.u, s_prev), params, mask)


def multi_head_context(
    h_list: Sequence[Tensor],
    s_prev: Tensor | None,
    params: MultiHeadParams,
    kind: AttentionKind,
    mask: np.ndarray | None = None,
) -> Tensor:
    """
    Concatenate H independent heads of one attention kind and project with W^O.

    Raises
        ContractError: If kind is dynamic and no decoder state is given
    """
    if kind is AttentionKind.DYNAMIC and s_prev is None:
        raise ContractError('dynamic multi-head attention needs the previous decoder state')
    if kind is AttentionKind.STATIC:
        heads = [static_context(h_list, p, mask)[0] for p in params.heads]
    else:
        heads = [dynamic_context(h_list, s_prev, p, mask)[0] for p in params.heads]
    return matmul(params.output, concat(heads))


def attend(
    h_list: Sequence[Tensor],
    params: AttentionParams | MultiHeadParams,
    kind: AttentionKind,
    s_prev: Tensor | None = None,
    mask: np.ndarray | None = None,
) -> Tensor:
    """Context vector from a single- or multi-head attention of either kind."""
    if isinstance(params, MultiHeadParams):
        return multi_head_context(h_list, s_prev, params, kind, mask)
    if kind is AttentionKind.STATIC:
        return static_context(h_list, params, mask)[0]
    if s_prev is None:
        raise ContractError('dynamic attention needs the previous decoder state')
    return dynamic_context(h_list, s_prev, params, mask)[0]


def hybrid_context(c: Tensor, c_t: Tensor, s_prev: Tensor | None, cfg: HybridConfig) -> Tensor:
    """
    Combine the static context c with the dynamic context c_t.

    concat -> [c; c_t], sum -> c + c_t, learnable -> alpha c + beta c_t,
    attention -> cos(c, s) c + cos(c_t, s) c_t, max/mean -> elementwise pooling.
    """
    if c.shape != c_t.shape:
        raise DimensionError(f'hybrid: static context {c.shape} vs dynamic context {c_t.shape}')
    mode = cfg.mode
    if mode is HybridMode.CONCAT:
        return concat([c, c_t])
    if mode is HybridMode.SUM:
        return add(c, c_t)
    if mode is HybridMode.LEARNABLE:
        return add(scale(c, cfg.alpha), scale(c_t, cfg.beta))
    if mode is HybridMode.ATTENTION:
        if s_prev is None:
            raise ContractError('attention hybrid needs the previous decoder state')
        query = s_prev if cfg.query_projection is None else matmul(cfg.query_projection, s_prev)
        return add(scale(c, cosine(c, query)), scale(c_t, cosine(c_t, query)))
    if mode is HybridMode.MAX:
        return maximum(c, c_t)
    if mode is HybridMode.MEAN:
        return scale(add(c, c_t), 0.5)
    raise ValueError(f'Unknown hybrid mode: {mode}')


def flatten_token_states(states: Sequence[UtteranceStates]) -> tuple[list[Tensor], np.ndarray]:
    """All per-token states across the context with the joint PAD mask."""
    entries = [t for s in states for t in s.token_states]
    mask = np.concatenate([s.mask for s in states])
    return entries, mask


def token_level_context(
    states: Sequence[UtteranceStates],
    mode: TokenLevel,
    params: AttentionParams | MultiHeadParams,
    kind: AttentionKind = AttentionKind.STATIC,
    s_prev: Tensor | None = None,
):
    """
    Bring per-token encoder states into the context attention.

    replace: attention of the given kind runs over every non-PAD token state
        of the context; returns the context vector.
    concat: for each utterance a static token-attention summary (anchored on
        the utterance's EOS state, h_i) is appended to h_i; returns the list
        of [h_i; summary_i] entries of width 2·d_h for utterance-level
        attention.

    Raises
        ValidationError: If every position is masked
    """
    if not states:
        raise ValidationError('token-level attention over an empty context')
    if mode is TokenLevel.REPLACE:
        entries, mask = flatten_token_states(states)
        return attend(entries, params, kind, s_prev, mask)
    if mode is TokenLevel.CONCAT:
        out = []
        for s in states:
            summary = attend(s.token_states, params, AttentionKind.STATIC, None, s.mask)
            out.append(concat([s.h, summary]))
        return out
    raise ValueError(f'token_level_context needs replace or concat, got {mode}')
