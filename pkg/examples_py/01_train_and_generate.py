#!/usr/bin/env python3
"""
Training and Greedy Generation
==============================

This example trains a small static-attention model on a handful of
multi-turn sessions and decodes a response for each of them.

Every session is a list of context utterances plus a gold response. The
encoder reads each utterance separately, attention pools the utterance
vectors into a context vector, and the decoder generates token by token.
"""

from dialattn import DialogueSession, ModelConfig, TrainConfig, build_vocab, prepare_session
from dialattn.trainer import train

# =============================================================================
# Corpus Setup
# =============================================================================

sessions = [
    DialogueSession([['hi', 'there'], ['how', 'are', 'you']], ['fine', 'thanks']),
    DialogueSession([['what', 'time', 'is', 'it']], ['it', 'is', 'late']),
    DialogueSession([['hi'], ['hello'], ['how', 'is', 'work']], ['work', 'is', 'fine']),
    DialogueSession([['are', 'you', 'there']], ['yes']),
    DialogueSession([['thanks'], ['you', 'are', 'welcome']], ['bye']),
]

vocab = build_vocab(sessions)

model_config = ModelConfig(
    attention='static',
    heads=1,
    embedding_dim=16,
    hidden_size=24,
    pad_len=6,
    dropout=0.0,
)
train_config = TrainConfig(learning_rate=0.02, weight_decay=0.0, batch_size=1, epochs=60, seed=1)

prepared = [prepare_session(s, vocab, model_config.pad_len) for s in sessions]

print('=' * 70)
print('Utterance Attention - Training and Generation')
print('=' * 70)
print()
print(f'Sessions:       {len(sessions)}')
print(f'Vocabulary:     {len(vocab)} ids (4 reserved)')
print(f'Attention:      {model_config.attention.value}')
print()

# =============================================================================
# Train
# =============================================================================

print('-' * 70)
print('Training')
print('-' * 70)
print()

result = train(prepared, vocab, model_config, train_config)

print(f"{'Epoch':<8} {'Loss':>10}")
print('-' * 20)
for epoch, loss in enumerate(result.loss_history, start=1):
    if epoch == 1 or epoch % 10 == 0:
        print(f'{epoch:<8} {loss:>10.4f}')
print()

# =============================================================================
# Generate
# =============================================================================

print('-' * 70)
print('Greedy Responses')
print('-' * 70)
print()

for session, p in zip(sessions, prepared):
    hypothesis = ' '.join(vocab.decode(result.model.generate(p), strip_special=True))
    print(f"Context:    {' | '.join(' '.join(u) for u in session.context)}")
    print(f"Reference:  {' '.join(session.response)}")
    print(f'Generated:  {hypothesis}')
    print()

print('=' * 70)
print('Example Complete')
print('=' * 70)
