"""
High-level dialogue model.

Builds the encoder, attention and decoder parameter groups from a
ModelConfig and exposes the per-session operations the trainer and the
generator need.
"""

from dataclasses import dataclass

import numpy as np

from .attention import DynamicAttnParams, HybridConfig, MultiHeadParams, StaticAttnParams
from .attention import attend, flatten_token_states, hybrid_context, token_level_context
from .config import ModelConfig
from .corpus import PAD, PreparedSession
from .decoder import DecodeState, DecoderParams, decode_step, generate, init_state
from .encoder import EncoderParams, UtteranceStates, encode_context
from .enums import AttentionKind, TokenLevel
from .exceptions import ArchitectureMismatchError
from .params import named_parameters, uniform
from .tensor import Tensor, cross_entropy


@dataclass
class SessionMemory:
    """
    Encoded context of one session.

    Attributes
        states: Per-utterance encoder output
        entries: Attention memory (utterance vectors, token states, or [h_i; summary_i])
        mask: Support mask over entries (token replace mode only)
        h_last: h_S, the last utterance representation
        static_context: The static context c, fixed for the whole decode
    """

    states: list[UtteranceStates]
    entries: list[Tensor]
    mask: np.ndarray | None
    h_last: Tensor
    static_context: Tensor | None


class DialogueModel:
    """
    Static, dynamic or hybrid utterance-attention encoder-decoder.

    Example:
        >>> model = DialogueModel(ModelConfig(attention='static', hidden_size=16,
        ...                                   embedding_dim=8, heads=1), vocab_size=30)
        >>> ids = model.generate(prepared_session)
    """

    def __init__(
        self,
        config: ModelConfig,
        vocab_size: int,
        rng: np.random.Generator | None = None,
        seed: int = 0,
    ):
        """
        Initialise all parameters.

        Args:
            config: Architecture hyperparameters
            vocab_size: Vocabulary size including reserved tokens
            rng: Source of initial values (default: seeded from `seed`)
            seed: Seed used when no rng is given
        """
        rng = rng if rng is not None else np.random.default_rng(seed)
        self.config = config
        self.vocab_size = vocab_size
        scale = config.init_scale
        d_h = config.hidden_size
        d_s = config.decoder_size
        mode = config.attention

        self.encoder = EncoderParams.init(
            rng, vocab_size, config.embedding_dim, d_h, config.direction, scale
        )

        entry_size = d_h
        self.token_summary = None
        if config.token_level is TokenLevel.CONCAT:
            self.token_summary = StaticAttnParams.init(rng, d_h, d_h, scale=scale)
            entry_size = 2 * d_h
        self.entry_size = entry_size

        self.static_attn = (
            self._attention(rng, AttentionKind.STATIC, entry_size, entry_size) if mode.uses_static else None
        )
        self.dynamic_attn = (
            self._attention(rng, AttentionKind.DYNAMIC, entry_size, d_s) if mode.uses_dynamic else None
        )
        self.hybrid = None
        context_size = entry_size
        if mode.hybrid is not None:
            self.hybrid = HybridConfig.create(mode.hybrid, rng, entry_size, d_s, scale)
            context_size = self.hybrid.output_size(entry_size)

        embedding = self.encoder.embedding
        if not config.share_embeddings:
            embedding = uniform(rng, (vocab_size, config.embedding_dim), scale)
        self.decoder = DecoderParams.init(rng, embedding, context_size, d_s, d_h, scale)

    def _attention(self, rng, kind: AttentionKind, entry_size: int, query_size: int):
        scale = self.config.init_scale
        if self.config.heads > 1:
            return MultiHeadParams.init(rng, kind, self.config.heads, entry_size, query_size, scale)
        cls = StaticAttnParams if kind is AttentionKind.STATIC else DynamicAttnParams
        return cls.init(rng, entry_size, query_size, scale=scale)

    @property
    def context_size(self) -> int:
        return self.decoder.context_size

    def parameters(self) -> dict[str, Tensor]:
        """All trainable tensors by dotted name; a shared embedding appears once."""
        out: dict[str, Tensor] = {}
        seen: set[int] = set()
        groups = (
            ('encoder', self.encoder),
            ('token_summary', self.token_summary),
            ('static_attn', self.static_attn),
            ('dynamic_attn', self.dynamic_attn),
            ('hybrid', self.hybrid),
            ('decoder', self.decoder),
        )
        for prefix, group in groups:
            for name, tensor in named_parameters(group, prefix):
                if id(tensor) not in seen:
                    seen.add(id(tensor))
                    out[name] = tensor
        return out

    def zero_grad(self) -> None:
        for p in self.parameters().values():
            p.zero_grad()

    def state_arrays(self) -> dict[str, np.ndarray]:
        """Copies of every parameter's values."""
        return {name: p.values.copy() for name, p in self.parameters().items()}

    def load_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        """
        Overwrite parameter values in place.

        Raises
            ArchitectureMismatchError: If names or shapes differ
        """
        params = self.parameters()
        if list(arrays) != list(params):
            missing = sorted(set(params) ^ set(arrays))
            raise ArchitectureMismatchError(f'parameter names differ: {missing}')
        for name, p in params.items():
            if arrays[name].shape != p.shape:
                raise ArchitectureMismatchError(
                    f'{name}: checkpoint shape {arrays[name].shape} vs model shape {p.shape}'
                )
        for name, p in params.items():
            p.values[...] = arrays[name]

    def encode(self, session: PreparedSession, rng: np.random.Generator | None = None) -> SessionMemory:
        """Encode the context and compute the static context once."""
        states = encode_context(session, self.encoder, self.config, rng)
        mask = None
        if self.config.token_level is TokenLevel.REPLACE:
            entries, mask = flatten_token_states(states)
        elif self.config.token_level is TokenLevel.CONCAT:
            entries = token_level_context(states, TokenLevel.CONCAT, self.token_summary)
        else:
            entries = [s.h for s in states]
        static_c = None
        if self.static_attn is not None:
            static_c = attend(entries, self.static_attn, AttentionKind.STATIC, None, mask)
        return SessionMemory(states, entries, mask, states[-1].h, static_c)

    def init_state(self, memory: SessionMemory) -> DecodeState:
        return init_state(memory.h_last, self.decoder)

    def context_at(self, memory: SessionMemory, state: DecodeState) -> Tensor:
        """Context vector fed to the decoder at this step."""
        if self.dynamic_attn is None:
            return memory.static_context
        c_t = attend(memory.entries, self.dynamic_attn, AttentionKind.DYNAMIC, state.s, memory.mask)
        if self.static_attn is None:
            return c_t
        return hybrid_context(memory.static_context, c_t, state.s, self.hybrid)

    def step(
        self,
        state: DecodeState,
        memory: SessionMemory,
        rng: np.random.Generator | None = None,
    ) -> tuple[Tensor, Tensor]:
        """Logits and next decoder state for one step."""
        context = self.context_at(memory, state)
        return decode_step(state, context, self.decoder, self.config.dropout, rng)

    def position_losses(
        self,
        session: PreparedSession,
        rng: np.random.Generator | None = None,
    ) -> list[Tensor]:
        """Teacher-forced -log p(gold) for every non-PAD response position."""
        memory = self.encode(session, rng)
        state = self.init_state(memory)
        losses = []
        for target in session.response_ids:
            if target == PAD:
                continue
            logits, s_t = self.step(state, memory, rng)
            losses.append(cross_entropy(logits, target))
            state = DecodeState(s=s_t, prev_token=target, step=state.step + 1)
        return losses

    def generate(self, session: PreparedSession, max_len: int | None = None) -> list[int]:
        """Greedy response ids (max_len defaults to pad_len)."""
        return generate(session, self, max_len or self.config.pad_len)
