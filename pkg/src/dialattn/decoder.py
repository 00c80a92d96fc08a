"""
GRU decoder and greedy generation.

At every step the decoder GRU reads the previous token's embedding
concatenated with the context vector for that step:

    s_t = GRU([emb(y_{t-1}); context_t], s_{t-1})
    logits_t = W_out s_t + b_out
"""

from dataclasses import dataclass
from typing import Protocol

import numpy as np

from .corpus import EOS, PAD, SOS, PreparedSession
from .encoder import GRUParams, embed, gru_step
from .exceptions import DimensionError
from .params import INIT_SCALE, uniform, zeros
from .tensor import Tensor, add, concat, matmul, no_grad


@dataclass
class DecoderParams:
    """
    Attributes
        gru: Decoder GRU with input width d_emb + d_ctx
        w_out: Output projection [|V|×d_s]
        b_out: Output bias [|V|]
        embedding: Token embedding (the encoder's matrix when shared)
        init_projection: [d_s×d_h] map from h_S to s_0 when d_s != d_h
    """

    gru: GRUParams
    w_out: Tensor
    b_out: Tensor
    embedding: Tensor
    init_projection: Tensor | None = None

    def __post_init__(self):
        if self.w_out.shape != (self.b_out.shape[0], self.gru.hidden_size):
            raise DimensionError(f'W_out {self.w_out.shape} vs decoder state {self.gru.hidden_size}')
        if self.context_size < 1:
            raise DimensionError('decoder GRU input must be wider than the embedding')

    @property
    def state_size(self) -> int:
        return self.gru.hidden_size

    @property
    def context_size(self) -> int:
        return self.gru.input_size - self.embedding.shape[1]

    @classmethod
    def init(
        cls,
        rng: np.random.Generator,
        embedding: Tensor,
        context_size: int,
        state_size: int,
        encoder_size: int,
        scale: float = INIT_SCALE,
    ) -> 'DecoderParams':
        vocab_size, emb_dim = embedding.shape
        gru = GRUParams.init(rng, emb_dim + context_size, state_size, scale)
        projection = None if state_size == encoder_size else uniform(rng, (state_size, encoder_size), scale)
        return cls(
            gru=gru,
            w_out=uniform(rng, (vocab_size, state_size), scale),
            b_out=zeros((vocab_size,)),
            embedding=embedding,
            init_projection=projection,
        )


@dataclass
class DecodeState:
    """Decoder state s_t, the previous token y_{t-1} and the step counter t."""

    s: Tensor
    prev_token: int
    step: int


def init_state(h_last: Tensor, params: DecoderParams) -> DecodeState:
    """s_0 = P h_S (P learned when d_s != d_h, identity otherwise); y_0 = SOS; t = 1."""
    s0 = h_last if params.init_projection is None else matmul(params.init_projection, h_last)
    if s0.shape != (params.state_size,):
        raise DimensionError(f'initial state {s0.shape} vs decoder width {params.state_size}')
    return DecodeState(s=s0, prev_token=SOS, step=1)


def decode_step(
    state: DecodeState,
    context: Tensor,
    params: DecoderParams,
    dropout_rate: float = 0.0,
    rng: np.random.Generator | None = None,
) -> tuple[Tensor, Tensor]:
    """
    Advance the decoder one step.

    Returns
        (logits over the vocabulary, new state s_t)

    Raises
        DimensionError: If the context width differs from the configured one
    """
    if context.shape != (params.context_size,):
        raise DimensionError(f'decoder context {context.shape} vs expected ({params.context_size},)')
    x = concat([embed(params.embedding, state.prev_token, dropout_rate, rng), context])
    s_t = gru_step(x, state.s, params.gru)
    logits = add(matmul(params.w_out, s_t), params.b_out)
    return logits, s_t


class ContextModel(Protocol):
    """What greedy generation needs from a model."""

    def encode(self, session: PreparedSession, rng=None): ...

    def init_state(self, memory) -> DecodeState: ...

    def step(self, state: DecodeState, memory, rng=None) -> tuple[Tensor, Tensor]: ...


def generate(session: PreparedSession, model: ContextModel, max_len: int) -> list[int]:
    """
    Greedy decoding from s_0 until EOS or `max_len` steps.

    Ties in the argmax go to the lowest token id. The returned ids exclude
    SOS, EOS and PAD.
    """
    if max_len < 1:
        raise ValueError(f'max_len must be >= 1, got {max_len}')
    out = []
    with no_grad():
        memory = model.encode(session)
        state = model.init_state(memory)
        for _ in range(max_len):
            logits, s_t = model.step(state, memory)
            token = int(np.argmax(logits.values))
            state = DecodeState(s=s_t, prev_token=token, step=state.step + 1)
            if token == EOS:
                break
            if token not in (PAD, SOS):
                out.append(token)
    return out
