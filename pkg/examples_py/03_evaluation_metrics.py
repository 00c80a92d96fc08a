#!/usr/bin/env python3
"""
Evaluating Generated Responses
==============================

This example scores a few generated responses with the embedding-based
relevance metrics, Distinct-n, diversity and the collocation rate.

Word vectors normally come from a pretrained text file; a tiny table is
built inline here.
"""

import numpy as np

from dialattn import EmbeddingTable, GenerationRecord, SentencePair, evaluate
from dialattn.metrics import embedding_average, embedding_extrema, embedding_greedy

vectors = {
    'cat': [1.0, 0.0, 0.0],
    'kitten': [0.9, 0.1, 0.0],
    'dog': [0.0, 1.0, 0.0],
    'puppy': [0.1, 0.9, 0.0],
    'food': [0.0, 0.0, 1.0],
    'hungry': [0.2, 0.2, 0.9],
}
table = EmbeddingTable.from_vectors({k: np.array(v) for k, v in vectors.items()}, dim=3)

print('=' * 70)
print('Utterance Attention - Evaluation Metrics')
print('=' * 70)
print()

# =============================================================================
# Single Pairs
# =============================================================================

print('-' * 70)
print('Embedding Scores for Single Pairs')
print('-' * 70)
print()

pairs = [
    SentencePair(['cat'], ['kitten']),
    SentencePair(['dog', 'food'], ['puppy', 'hungry']),
    SentencePair(['cat'], ['food']),
]

print(f"{'Hypothesis':<16} {'Reference':<16} {'Average':>8} {'Greedy':>8} {'Extrema':>8}")
print('-' * 60)
for p in pairs:
    print(
        f"{' '.join(p.hypothesis):<16} {' '.join(p.reference):<16} "
        f'{embedding_average(p, table):>8.4f} {embedding_greedy(p, table):>8.4f} '
        f'{embedding_extrema(p, table):>8.4f}'
    )
print()

# =============================================================================
# Corpus Report
# =============================================================================

print('-' * 70)
print('Corpus Report')
print('-' * 70)
print()

records = [
    GenerationRecord(['my cat is hungry'], 'feed the kitten', 'feed the cat'),
    GenerationRecord(['the dog barks'], 'the puppy wants food', 'the dog wants food'),
    GenerationRecord(['hello'], 'hi', 'hello hello'),
]
report = evaluate(records, table, stop_words=frozenset({'the', 'is', 'my'}))
print(report.to_text(top_tokens=5))

print('=' * 70)
print('Example Complete')
print('=' * 70)
