"""
Utterance encoding with a GRU.

Each context utterance is embedded token by token and run through a GRU in
isolation; there is no recurrence across utterances. The utterance vector
h_i is the state at the EOS position, so PAD positions never affect it.
"""

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .config import ModelConfig
from .corpus import EOS, PreparedSession
from .enums import Direction
from .exceptions import ContractError, DimensionError, ValidationError
from .params import INIT_SCALE, uniform, zeros
from .tensor import Tensor, add, concat, dropout, matmul, mul, row, sigmoid, sub, tanh


@dataclass
class GRUParams:
    """
    Gate parameters of one GRU.

    Attributes
        w_z, w_r, w_h: Input matrices [d_h×d_in]
        u_z, u_r, u_h: Recurrent matrices [d_h×d_h]
        b_z, b_r, b_h: Biases [d_h]
    """

    w_z: Tensor
    w_r: Tensor
    w_h: Tensor
    u_z: Tensor
    u_r: Tensor
    u_h: Tensor
    b_z: Tensor
    b_r: Tensor
    b_h: Tensor

    def __post_init__(self):
        d_h, d_in = self.w_z.shape
        for w in (self.w_r, self.w_h):
            if w.shape != (d_h, d_in):
                raise DimensionError(f'GRU input matrix {w.shape} vs {(d_h, d_in)}')
        for u in (self.u_z, self.u_r, self.u_h):
            if u.shape != (d_h, d_h):
                raise DimensionError(f'GRU recurrent matrix {u.shape} vs {(d_h, d_h)}')
        for b in (self.b_z, self.b_r, self.b_h):
            if b.shape != (d_h,):
                raise DimensionError(f'GRU bias {b.shape} vs {(d_h,)}')

    @property
    def input_size(self) -> int:
        return self.w_z.shape[1]

    @property
    def hidden_size(self) -> int:
        return self.w_z.shape[0]

    @classmethod
    def init(
        cls,
        rng: np.random.Generator,
        input_size: int,
        hidden_size: int,
        scale: float = INIT_SCALE,
    ) -> 'GRUParams':
        """Uniform(-scale, scale) matrices and zero biases."""
        return cls(
            w_z=uniform(rng, (hidden_size, input_size), scale),
            w_r=uniform(rng, (hidden_size, input_size), scale),
            w_h=uniform(rng, (hidden_size, input_size), scale),
            u_z=uniform(rng, (hidden_size, hidden_size), scale),
            u_r=uniform(rng, (hidden_size, hidden_size), scale),
            u_h=uniform(rng, (hidden_size, hidden_size), scale),
            b_z=zeros((hidden_size,)),
            b_r=zeros((hidden_size,)),
            b_h=zeros((hidden_size,)),
        )


@dataclass
class EncoderParams:
    """
    Token embedding plus forward (and optional backward) GRU.

    Attributes
        embedding: [|V|×d_emb]
        forward: Left-to-right GRU
        backward: Right-to-left GRU (bidirectional only)
        merge: [d_h×2d_h] projection of concatenated directions (bidirectional only)
    """

    embedding: Tensor
    forward: GRUParams
    backward: GRUParams | None = None
    merge: Tensor | None = None

    def __post_init__(self):
        if (self.backward is None) != (self.merge is None):
            raise ValidationError('bidirectional encoder needs both backward GRU and merge matrix')
        if self.forward.input_size != self.embedding.shape[1]:
            raise DimensionError(
                f'GRU input {self.forward.input_size} vs embedding width {self.embedding.shape[1]}'
            )

    @property
    def direction(self) -> Direction:
        return Direction.UNI if self.backward is None else Direction.BI

    @property
    def hidden_size(self) -> int:
        return self.forward.hidden_size

    @classmethod
    def init(
        cls,
        rng: np.random.Generator,
        vocab_size: int,
        embedding_dim: int,
        hidden_size: int,
        direction: Direction = Direction.UNI,
        scale: float = INIT_SCALE,
    ) -> 'EncoderParams':
        embedding = uniform(rng, (vocab_size, embedding_dim), scale)
        forward = GRUParams.init(rng, embedding_dim, hidden_size, scale)
        if direction is Direction.UNI:
            return cls(embedding, forward)
        backward = GRUParams.init(rng, embedding_dim, hidden_size, scale)
        merge = uniform(rng, (hidden_size, 2 * hidden_size), scale)
        return cls(embedding, forward, backward, merge)


@dataclass
class UtteranceStates:
    """
    Encoder output for one utterance.

    Attributes
        h: Utterance representation (state at the EOS position)
        token_states: One state per padded position; PAD positions hold zeros
        mask: True at positions up to and including EOS
    """

    h: Tensor
    token_states: list[Tensor]
    mask: np.ndarray

    @property
    def eos_position(self) -> int:
        return int(np.flatnonzero(self.mask)[-1])


def gru_step(x: Tensor, h_prev: Tensor, params: GRUParams) -> Tensor:
    """
    One GRU update.

        z = sigmoid(W_z x + U_z h + b_z)
        r = sigmoid(W_r x + U_r h + b_r)
        h~ = tanh(W_h x + U_h (r * h) + b_h)
        h' = (1 - z) * h + z * h~
    """
    if x.shape != (params.input_size,) or h_prev.shape != (params.hidden_size,):
        raise DimensionError(
            f'gru_step: x {x.shape}, h {h_prev.shape} vs params '
            f'({params.input_size},), ({params.hidden_size},)'
        )
    z = sigmoid(add(add(matmul(params.w_z, x), matmul(params.u_z, h_prev)), params.b_z))
    r = sigmoid(add(add(matmul(params.w_r, x), matmul(params.u_r, h_prev)), params.b_r))
    candidate = tanh(add(add(matmul(params.w_h, x), matmul(params.u_h, mul(r, h_prev))), params.b_h))
    # (1 - z) * h + z * h~  ==  h + z * (h~ - h)
    return add(h_prev, mul(z, sub(candidate, h_prev)))


def embed(
    embedding: Tensor,
    token_id: int,
    dropout_rate: float = 0.0,
    rng: np.random.Generator | None = None,
) -> Tensor:
    """Embedding row for a token, with dropout when training."""
    return dropout(row(embedding, token_id), dropout_rate, rng)


def _run(params: GRUParams, inputs: Sequence[Tensor]) -> list[Tensor]:
    h = Tensor(np.zeros(params.hidden_size))
    states = []
    for x in inputs:
        h = gru_step(x, h, params)
        states.append(h)
    return states


def encode_utterance(
    ids: Sequence[int],
    params: EncoderParams,
    direction: Direction | None = None,
    dropout_rate: float = 0.0,
    rng: np.random.Generator | None = None,
) -> UtteranceStates:
    """
    Encode one padded utterance.

    Only positions up to the first EOS are run; the bidirectional backward
    GRU starts at EOS and walks to the first token, and the two directions
    are merged per position by the learned merge matrix.

    Raises
        ContractError: If the sequence contains no EOS
    """
    direction = direction or params.direction
    if direction is Direction.BI and params.backward is None:
        raise ContractError('bidirectional encoding needs backward GRU parameters')
    ids = list(ids)
    if EOS not in ids:
        raise ContractError('utterance has no EOS; pad it with pad_utterance first')
    eos = ids.index(EOS)

    inputs = [embed(params.embedding, tok, dropout_rate, rng) for tok in ids[: eos + 1]]
    states = _run(params.forward, inputs)
    if direction is Direction.BI:
        reverse = _run(params.backward, inputs[::-1])[::-1]
        states = [matmul(params.merge, concat([f, b])) for f, b in zip(states, reverse)]

    d_h = params.hidden_size
    padding = [Tensor(np.zeros(d_h)) for _ in range(len(ids) - eos - 1)]
    mask = np.zeros(len(ids), dtype=bool)
    mask[: eos + 1] = True
    return UtteranceStates(h=states[eos], token_states=states + padding, mask=mask)


def encode_context(
    session: PreparedSession,
    params: EncoderParams,
    config: ModelConfig | None = None,
    rng: np.random.Generator | None = None,
) -> list[UtteranceStates]:
    """
    Encode every context utterance independently; the last entry carries h_S.

    Args:
        session: Prepared (padded) session
        params: Encoder parameters
        config: Supplies direction and dropout rate (defaults to the params' direction, no dropout)
        rng: Dropout mask source; None disables dropout

    Returns
        One UtteranceStates per context utterance, in order
    """
    if not session.context_ids:
        raise ValidationError('cannot encode an empty context')
    direction = config.direction if config is not None else params.direction
    rate = config.dropout if config is not None else 0.0
    return [encode_utterance(ids, params, direction, rate, rng) for ids in session.context_ids]
