"""
Dialogue Attention - Pure Python Implementation

Static, dynamic and hybrid utterance-level attention for multi-turn dialogue
generation, built on a small reverse-mode autodiff tensor, plus the
automatic evaluation suite for generated responses.

Basic Usage:
    >>> from dialattn import DialogueModel, ModelConfig, Vocabulary, prepare_session
    >>>
    >>> config = ModelConfig(attention='learnable', heads=1, embedding_dim=16,
    ...                      hidden_size=32, pad_len=10, dropout=0.0)
    >>> model = DialogueModel(config, vocab_size=len(vocab), seed=0)
    >>>
    >>> prepared = prepare_session(session, vocab, config.pad_len)
    >>> print(' '.join(vocab.decode(model.generate(prepared), strip_special=True)))
"""

__version__ = '1.0.0'

# Attention
from .attention import AttentionParams, DynamicAttnParams, HybridConfig, MultiHeadParams
from .attention import StaticAttnParams, attend, dynamic_context, hybrid_context
from .attention import multi_head_context, static_context, token_level_context
# Configuration
from .config import ModelConfig, TrainConfig, config_digest
# Corpus and vocabulary
from .corpus import EOS, PAD, SOS, UNK, DialogueSession, EmbeddingTable, GenerationRecord
from .corpus import PreparedSession, Vocabulary, build_vocab, load_embeddings
from .corpus import load_generations, load_sessions, load_stop_words, pad_utterance
from .corpus import prepare_session, write_generations
# Decoder
from .decoder import DecodeState, DecoderParams, decode_step, generate, init_state
# Encoder
from .encoder import EncoderParams, GRUParams, UtteranceStates, encode_context
from .encoder import encode_utterance, gru_step
# Enumerations
from .enums import AttentionKind, AttentionMode, Direction, ExitCode, HybridMode
from .enums import TokenLevel
# Exceptions
from .exceptions import ArchitectureMismatchError, CheckpointError, ContractError
from .exceptions import DialogueError, DimensionError, NumericError, ParseError
from .exceptions import UsageError, ValidationError
# Gradient checking
from .gradcheck import GradCheckReport, check_gradients, gradcheck_model, relative_error
from .gradcheck import run_suite
# Metrics
from .metrics import EvalReport, SentencePair, collocation_rate, corpus_diversity
from .metrics import distinct_n, diversity, embedding_average, embedding_extrema
from .metrics import embedding_greedy, evaluate, token_frequency
# Model
from .model import DialogueModel, SessionMemory
# Tensor
from .tensor import Tape, Tensor, backward, no_grad, override_gradient_rule
# Training
from .trainer import Adam, Checkpoint, TrainResult, batch_loss, load_checkpoint
from .trainer import model_from_checkpoint, save_checkpoint, train

__all__ = [
    # Version
    '__version__',
    # Model API
    'DialogueModel',
    'SessionMemory',
    'ModelConfig',
    'TrainConfig',
    'config_digest',
    # Tensor
    'Tensor',
    'Tape',
    'backward',
    'no_grad',
    'override_gradient_rule',
    # Corpus
    'PAD',
    'SOS',
    'EOS',
    'UNK',
    'DialogueSession',
    'PreparedSession',
    'Vocabulary',
    'EmbeddingTable',
    'GenerationRecord',
    'build_vocab',
    'load_sessions',
    'load_embeddings',
    'load_stop_words',
    'load_generations',
    'write_generations',
    'pad_utterance',
    'prepare_session',
    # Encoder
    'GRUParams',
    'EncoderParams',
    'UtteranceStates',
    'gru_step',
    'encode_utterance',
    'encode_context',
    # Attention
    'AttentionParams',
    'StaticAttnParams',
    'DynamicAttnParams',
    'MultiHeadParams',
    'HybridConfig',
    'static_context',
    'dynamic_context',
    'multi_head_context',
    'hybrid_context',
    'token_level_context',
    'attend',
    # Decoder
    'DecoderParams',
    'DecodeState',
    'init_state',
    'decode_step',
    'generate',
    # Training
    'Adam',
    'Checkpoint',
    'TrainResult',
    'batch_loss',
    'train',
    'save_checkpoint',
    'load_checkpoint',
    'model_from_checkpoint',
    # Gradient checking
    'GradCheckReport',
    'check_gradients',
    'gradcheck_model',
    'relative_error',
    'run_suite',
    # Metrics
    'SentencePair',
    'EvalReport',
    'embedding_average',
    'embedding_greedy',
    'embedding_extrema',
    'distinct_n',
    'diversity',
    'corpus_diversity',
    'collocation_rate',
    'token_frequency',
    'evaluate',
    # Enums
    'AttentionKind',
    'AttentionMode',
    'HybridMode',
    'Direction',
    'TokenLevel',
    'ExitCode',
    # Exceptions
    'DialogueError',
    'DimensionError',
    'NumericError',
    'ContractError',
    'ValidationError',
    'ParseError',
    'CheckpointError',
    'ArchitectureMismatchError',
    'UsageError',
]
