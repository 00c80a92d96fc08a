#!/usr/bin/env python3
"""
Static, Dynamic and Hybrid Attention
====================================

This example shows how the attention modes distribute weight over the
context utterances of one session.

Static attention scores every utterance against the last one and keeps the
result for the whole response. Dynamic attention re-scores the utterances
from the decoder state at every step. The hybrid modes combine both.
"""

import numpy as np

from dialattn import AttentionMode, DialogueModel, DialogueSession, ModelConfig, build_vocab
from dialattn import prepare_session
from dialattn.attention import dynamic_context, static_context
from dialattn.decoder import DecodeState

session = DialogueSession(
    [['hi'], ['did', 'you', 'see', 'the', 'game'], ['who', 'won', 'it']],
    ['the', 'home', 'team'],
)
vocab = build_vocab([session])
prepared = prepare_session(session, vocab, pad_len=8)

print('=' * 70)
print('Utterance Attention - Attention Modes')
print('=' * 70)
print()

# =============================================================================
# Static Weights
# =============================================================================

print('-' * 70)
print('Static Attention Weights (computed once per session)')
print('-' * 70)
print()

config = ModelConfig(attention='static', heads=1, embedding_dim=8, hidden_size=12, pad_len=8,
                     dropout=0.0, init_scale=0.5)
model = DialogueModel(config, len(vocab), seed=3)
memory = model.encode(prepared)
_, alpha = static_context(memory.entries, model.static_attn)

for utterance, weight in zip(session.context, alpha.values):
    print(f"  {weight:6.3f}  {' '.join(utterance)}")
print()

# =============================================================================
# Dynamic Weights
# =============================================================================

print('-' * 70)
print('Dynamic Attention Weights (recomputed at every decoding step)')
print('-' * 70)
print()

config = config.with_overrides(attention='dynamic')
model = DialogueModel(config, len(vocab), seed=3)
memory = model.encode(prepared)
state = model.init_state(memory)

print(f"{'Step':<6}" + ''.join(f'{f"u{i + 1}":>9}' for i in range(len(session.context))))
print('-' * (6 + 9 * len(session.context)))
for target in prepared.response_ids[:4]:
    _, alpha = dynamic_context(memory.entries, state.s, model.dynamic_attn)
    print(f'{state.step:<6}' + ''.join(f'{w:>9.3f}' for w in alpha.values))
    _, s_t = model.step(state, memory)
    state = DecodeState(s=s_t, prev_token=target, step=state.step + 1)
print()

# =============================================================================
# Hybrid Context Widths
# =============================================================================

print('-' * 70)
print('Context Vector per Mode')
print('-' * 70)
print()

print(f"{'Mode':<12} {'Width':>6} {'Parameters':>12} {'|context|':>10}")
print('-' * 44)
for mode in AttentionMode:
    m = DialogueModel(config.with_overrides(attention=mode.value), len(vocab), seed=3)
    mem = m.encode(prepared)
    ctx = m.context_at(mem, m.init_state(mem))
    n_params = sum(p.size for p in m.parameters().values())
    print(f'{mode.value:<12} {m.context_size:>6} {n_params:>12} {np.linalg.norm(ctx.values):>10.4f}')

print()
print('=' * 70)
print('Example Complete')
print('=' * 70)
