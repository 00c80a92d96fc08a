#!/usr/bin/env python3
"""
Gradient Checking
=================

This example verifies the reverse-mode gradients of every attention mode
against central finite differences, then shows that a deliberately broken
gradient rule is caught.
"""

from dialattn import ModelConfig, gradcheck_model, override_gradient_rule
from dialattn.tensor import GRADIENT_RULES

print('=' * 70)
print('Utterance Attention - Gradient Checks')
print('=' * 70)
print()

# =============================================================================
# Every Mode
# =============================================================================

print('-' * 70)
print('Finite-Difference Checks per Attention Mode')
print('-' * 70)
print()

base = ModelConfig(heads=1, embedding_dim=6, hidden_size=8, pad_len=5, dropout=0.0)
for mode in ['static', 'dynamic', 'concat', 'sum', 'learnable', 'attention', 'max', 'mean']:
    report = gradcheck_model(base.with_overrides(attention=mode), vocab_size=15, sample=12)
    print(f'  {report.to_text()}')
print()

# =============================================================================
# A Broken Rule
# =============================================================================

print('-' * 70)
print('Sigmoid Gradient Scaled by 1.5')
print('-' * 70)
print()

original = GRADIENT_RULES['sigmoid']


def broken(g, node):
    return tuple(1.5 * gi for gi in original(g, node))


with override_gradient_rule('sigmoid', broken):
    report = gradcheck_model(base, vocab_size=15, sample=12)
print(f'  {report.to_text()}')

print()
print('=' * 70)
print('Example Complete')
print('=' * 70)
