"""
Model and training configuration.

Defaults: hidden state 512 (static) or
1024 (dynamic), padding length 15, word embeddings of dimension 200,
learning rate 0.001 with weight decay 1e-5, dropout 0.5, mini-batches of 80,
10 passes over the training set and 4 attention heads.
"""

import hashlib
import json
from dataclasses import asdict, dataclass, fields, replace

from .enums import AttentionMode, Direction, TokenLevel
from .exceptions import ValidationError


@dataclass
class ModelConfig:
    """
    Architecture hyperparameters.

    Attributes
        attention: Static, dynamic or one of the six hybrid modes
        heads: Number of attention heads (1 disables the output projection)
        direction: Unidirectional or bidirectional utterance GRU
        token_level: Whether per-token states enter the attention
        embedding_dim: Word embedding width
        hidden_size: Utterance encoder and attention width (d_h)
        decoder_hidden_size: Decoder state width (d_s); None means d_h
        pad_len: Fixed utterance length after padding
        dropout: Dropout rate on embedding outputs during training
        share_embeddings: Decoder reuses the encoder embedding matrix
        max_context: Keep only the last K context utterances (None keeps all)
        lowercase: Lowercase text while tokenizing
        init_scale: Half-width of the uniform initialisation interval
    """

    attention: AttentionMode = AttentionMode.STATIC
    heads: int = 4
    direction: Direction = Direction.UNI
    token_level: TokenLevel = TokenLevel.OFF
    embedding_dim: int = 200
    hidden_size: int = 512
    decoder_hidden_size: int | None = None
    pad_len: int = 15
    dropout: float = 0.5
    share_embeddings: bool = True
    max_context: int | None = None
    lowercase: bool = True
    init_scale: float = 0.08

    def __post_init__(self):
        if isinstance(self.attention, str):
            self.attention = AttentionMode.from_string(self.attention)
        if isinstance(self.direction, str):
            self.direction = Direction.from_string(self.direction)
        if isinstance(self.token_level, str):
            self.token_level = TokenLevel.from_string(self.token_level)

        if self.heads < 1:
            raise ValidationError(f'heads must be >= 1, got {self.heads}')
        if self.embedding_dim < 1 or self.hidden_size < 1:
            raise ValidationError('embedding_dim and hidden_size must be positive')
        if self.decoder_hidden_size is not None and self.decoder_hidden_size < 1:
            raise ValidationError('decoder_hidden_size must be positive')
        if self.pad_len < 2:
            raise ValidationError(f'pad_len must be >= 2, got {self.pad_len}')
        if not 0.0 <= self.dropout < 1.0:
            raise ValidationError(f'dropout must be in [0, 1), got {self.dropout}')
        if self.max_context is not None and self.max_context < 1:
            raise ValidationError(f'max_context must be >= 1, got {self.max_context}')
        if self.init_scale <= 0.0:
            raise ValidationError('init_scale must be positive')

    @property
    def decoder_size(self) -> int:
        """Resolved decoder state width."""
        return self.decoder_hidden_size or self.hidden_size

    @classmethod
    def reference_defaults(cls, attention: AttentionMode | str, **overrides) -> 'ModelConfig':
        """
        Reference widths for an attention mode.

        Static models use 512 throughout and dynamic models 1024. Hybrid
        models keep the static 512-wide encoder and a 1024-wide decoder; the
        dynamic attention's U matrix projects that decoder state into the
        512-wide attention space.
        """
        mode = AttentionMode.from_string(attention) if isinstance(attention, str) else attention
        if mode is AttentionMode.STATIC:
            widths = {'hidden_size': 512, 'decoder_hidden_size': None}
        elif mode is AttentionMode.DYNAMIC:
            widths = {'hidden_size': 1024, 'decoder_hidden_size': None}
        else:
            widths = {'hidden_size': 512, 'decoder_hidden_size': 1024}
        widths.update(overrides)
        return cls(attention=mode, **widths)

    def to_dict(self) -> dict:
        out = asdict(self)
        for key in ('attention', 'direction', 'token_level'):
            out[key] = out[key].value
        return out

    @classmethod
    def from_dict(cls, data: dict) -> 'ModelConfig':
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in data.items() if k in known})

    def with_overrides(self, **overrides) -> 'ModelConfig':
        """Copy with the non-None overrides applied."""
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})


@dataclass
class TrainConfig:
    """
    Optimisation hyperparameters.

    Attributes
        learning_rate: Adam step size
        weight_decay: Decoupled weight decay coefficient
        batch_size: Sessions per optimisation step
        epochs: Passes over the training set
        seed: Seed for initialisation, shuffling and dropout masks
        clip_norm: Global gradient-norm clipping threshold
        beta1: Adam first-moment decay
        beta2: Adam second-moment decay
        eps: Adam denominator epsilon
        min_count: Minimum token frequency for the vocabulary
    """

    learning_rate: float = 0.001
    weight_decay: float = 1e-5
    batch_size: int = 80
    epochs: int = 10
    seed: int = 0
    clip_norm: float = 5.0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    min_count: int = 1

    def __post_init__(self):
        if self.learning_rate < 0.0 or self.weight_decay < 0.0:
            raise ValidationError('learning_rate and weight_decay must be non-negative')
        if self.batch_size < 1:
            raise ValidationError(f'batch_size must be >= 1, got {self.batch_size}')
        if self.epochs < 0:
            raise ValidationError(f'epochs must be >= 0, got {self.epochs}')
        if self.clip_norm <= 0.0 or self.eps <= 0.0:
            raise ValidationError('clip_norm and eps must be positive')
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ValidationError('Adam betas must lie in [0, 1)')
        if self.min_count < 1:
            raise ValidationError(f'min_count must be >= 1, got {self.min_count}')

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> 'TrainConfig':
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in data.items() if k in known})

    def with_overrides(self, **overrides) -> 'TrainConfig':
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})


def canonical_json(data) -> str:
    """Key-sorted compact JSON used for digests and echo files."""
    return json.dumps(data, sort_keys=True, separators=(',', ':'))


def config_digest(model_config: ModelConfig) -> str:
    """SHA-256 of the canonical architecture description."""
    return hashlib.sha256(canonical_json(model_config.to_dict()).encode('utf-8')).hexdigest()
