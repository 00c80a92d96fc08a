"""
Automatic evaluation of generated responses.

Embedding-based relevance (Average, Greedy, Extrema) compares each
hypothesis with its reference through word vectors. Distinct-n and the
diversity score measure how varied the generated responses are, the
collocation rate measures how many of the reference (message token,
response token) pairs the model reproduces, and the token-frequency table
shows which words dominate the output.

Tokens without a vector are skipped. A pair with no embeddable token on
either side is left out of the embedding scores and counted as excluded.
Degenerate cases (zero-norm vectors, empty n-gram or collocation sets) score
0 and are tallied in an optional `flags` counter.
"""

import json
import logging
from collections import Counter
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field

import numpy as np

from .corpus import EmbeddingTable, GenerationRecord
from .exceptions import ValidationError

logger = logging.getLogger(__name__)


@dataclass
class SentencePair:
    """A generated response and its ground-truth reference, as token lists."""

    hypothesis: list[str]
    reference: list[str]

    def embeddable(self, table: EmbeddingTable) -> bool:
        """True when both sides keep at least one token with a vector."""
        return bool(table.known(self.hypothesis)) and bool(table.known(self.reference))


def _flag(flags: Counter | None, name: str) -> None:
    if flags is not None:
        flags[name] += 1


def _cosine(u: np.ndarray, v: np.ndarray, flags: Counter | None = None) -> float:
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        _flag(flags, 'zero_norm')
        return 0.0
    return float(np.clip(np.dot(u, v) / (nu * nv), -1.0, 1.0))


def _vectors(pair: SentencePair, table: EmbeddingTable) -> tuple[np.ndarray, np.ndarray]:
    hyp = table.matrix(pair.hypothesis)
    ref = table.matrix(pair.reference)
    if len(hyp) == 0 or len(ref) == 0:
        raise ValidationError('pair has no embeddable token on one side')
    return hyp, ref


def embedding_average(pair: SentencePair, table: EmbeddingTable, flags: Counter | None = None) -> float:
    """Cosine of the mean hypothesis vector and the mean reference vector."""
    hyp, ref = _vectors(pair, table)
    return _cosine(hyp.mean(axis=0), ref.mean(axis=0), flags)


def _unit_rows(m: np.ndarray, flags: Counter | None) -> np.ndarray:
    norms = np.linalg.norm(m, axis=1, keepdims=True)
    if flags is not None:
        flags['zero_norm'] += int(np.sum(norms == 0.0))
    return np.divide(m, norms, out=np.zeros_like(m), where=norms > 0.0)


def embedding_greedy(pair: SentencePair, table: EmbeddingTable, flags: Counter | None = None) -> float:
    """
    Greedy matching averaged over both directions.

    Each hypothesis token is matched with its most similar reference token
    and vice versa; the score is the mean of the two per-direction averages.
    """
    hyp, ref = _vectors(pair, table)
    sims = np.clip(_unit_rows(hyp, flags) @ _unit_rows(ref, flags).T, -1.0, 1.0)
    return float(0.5 * (sims.max(axis=1).mean() + sims.max(axis=0).mean()))


def embedding_extrema(pair: SentencePair, table: EmbeddingTable, flags: Counter | None = None) -> float:
    """Cosine of the per-dimension maxima of the two sentences' vectors."""
    hyp, ref = _vectors(pair, table)
    return _cosine(hyp.max(axis=0), ref.max(axis=0), flags)


def ngrams(tokens: Sequence[str], n: int) -> list[tuple[str, ...]]:
    """
    Examples:
        >>> ngrams(['a', 'b', 'a'], 2)
        [('a', 'b'), ('b', 'a')]
    """
    return [tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1)]


def distinct_n(hypotheses: Iterable[Sequence[str]], n: int, flags: Counter | None = None) -> float:
    """
    Corpus-level Distinct-n: distinct n-grams over all n-grams, pooled
    across every hypothesis (n-grams never span two hypotheses).
    """
    if n < 1:
        raise ValidationError(f'n must be >= 1, got {n}')
    counts: Counter = Counter()
    for hyp in hypotheses:
        counts.update(ngrams(hyp, n))
    total = sum(counts.values())
    if total == 0:
        _flag(flags, f'no_{n}grams')
        return 0.0
    return len(counts) / total


def diversity(context: Sequence[Sequence[str]], hypothesis: Sequence[str]) -> float:
    """
    Share of the session's distinct tokens contributed by the hypothesis:
    |distinct hypothesis tokens| / |distinct tokens of context and hypothesis|.
    """
    hyp = set(hypothesis)
    if not hyp:
        return 0.0
    vocab = hyp.union(*(set(u) for u in context))
    return len(hyp) / len(vocab)


def corpus_diversity(records: Sequence[GenerationRecord]) -> float:
    """Mean per-session diversity."""
    if not records:
        return 0.0
    return float(np.mean([diversity(r.context_tokens, r.hypothesis_tokens) for r in records]))


def collocations(
    message: Iterable[str],
    response: Iterable[str],
    stop_words: frozenset[str] = frozenset(),
) -> set[tuple[str, str]]:
    """Distinct (message token, response token) pairs, stop words removed from both sides."""
    msg = {t for t in message if t not in stop_words}
    resp = {t for t in response if t not in stop_words}
    return {(m, r) for m in msg for r in resp}


def collocation_rate(
    messages: Sequence[Sequence[str]],
    references: Sequence[Sequence[str]],
    hypotheses: Sequence[Sequence[str]],
    stop_words: frozenset[str] = frozenset(),
    flags: Counter | None = None,
) -> float:
    """
    Fraction of the reference collocations the model also produces.

    The reference set pairs each test message with its gold response, as a
    type-level union over the corpus. A reference collocation counts as
    produced when some session has it in its own message x reference pairs
    and in its own message x hypothesis pairs; one session's hypothesis never
    matches another session's reference.
    """
    if not len(messages) == len(references) == len(hypotheses):
        raise ValidationError(
            f'collocation inputs differ in length: {len(messages)}, {len(references)}, {len(hypotheses)}'
        )
    ref_set: set[tuple[str, str]] = set()
    matched: set[tuple[str, str]] = set()
    for msg, ref, hyp in zip(messages, references, hypotheses):
        session_refs = collocations(msg, ref, stop_words)
        ref_set |= session_refs
        matched |= session_refs & collocations(msg, hyp, stop_words)
    if not ref_set:
        _flag(flags, 'empty_reference_collocations')
        return 0.0
    return len(matched) / len(ref_set)


def token_frequency(hypotheses: Iterable[Sequence[str]], stop_words: frozenset[str] = frozenset()) -> Counter:
    """Counts of non-stop tokens over all hypotheses."""
    return Counter(t for hyp in hypotheses for t in hyp if t not in stop_words)


def frequency_table(counts: Counter) -> list[tuple[str, int]]:
    """Entries by descending count, ties broken alphabetically."""
    return sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))


@dataclass
class EvalReport:
    """
    Attributes
        average, greedy, extrema: Mean embedding scores over included pairs
        distinct1, distinct2: Corpus-level ratios in [0, 1]
        diversity: Mean per-session diversity
        collocation_rate: Share of reference collocations reproduced
        token_freq: Non-stop token counts over the hypotheses
        excluded_pair_count: Pairs with no embeddable token on one side
        pair_count: All evaluated pairs
        flags: Degenerate-case tallies
    """

    average: float
    greedy: float
    extrema: float
    distinct1: float
    distinct2: float
    diversity: float
    collocation_rate: float
    token_freq: Counter = field(default_factory=Counter)
    excluded_pair_count: int = 0
    pair_count: int = 0
    flags: Counter = field(default_factory=Counter)

    def to_text(self, top_tokens: int = 20) -> str:
        """`key: value` lines; Distinct values as percentages."""
        lines = [
            f'pairs: {self.pair_count}',
            f'excluded_pairs: {self.excluded_pair_count}',
            f'average: {self.average:.6f}',
            f'greedy: {self.greedy:.6f}',
            f'extrema: {self.extrema:.6f}',
            f'distinct1_percent: {100.0 * self.distinct1:.4f}',
            f'distinct2_percent: {100.0 * self.distinct2:.4f}',
            f'diversity: {self.diversity:.6f}',
            f'collocation_rate: {self.collocation_rate:.6f}',
        ]
        for name, count in sorted(self.flags.items()):
            lines.append(f'flag_{name}: {count}')
        for token, count in frequency_table(self.token_freq)[:top_tokens]:
            lines.append(f'token {token}: {count}')
        return '\n'.join(lines) + '\n'

    def to_record(self) -> str:
        """Single-line JSON with every score and count."""
        return json.dumps({
            'average': self.average,
            'greedy': self.greedy,
            'extrema': self.extrema,
            'distinct1': self.distinct1,
            'distinct2': self.distinct2,
            'diversity': self.diversity,
            'collocation_rate': self.collocation_rate,
            'excluded_pair_count': self.excluded_pair_count,
            'pair_count': self.pair_count,
            'flags': dict(sorted(self.flags.items())),
            'token_freq': dict(frequency_table(self.token_freq)),
        }, ensure_ascii=False)


def evaluate(
    records: Sequence[GenerationRecord],
    table: EmbeddingTable,
    stop_words: frozenset[str] = frozenset(),
    last_utterance_only: bool = False,
) -> EvalReport:
    """
    Score a generated-output file.

    Args:
        records: Context, reference and hypothesis per session
        table: Word vectors for the embedding metrics
        stop_words: Excluded from collocations and token frequencies
        last_utterance_only: Build collocations from the last context
            utterance instead of the whole context

    Returns
        EvalReport
    """
    flags: Counter = Counter()
    pairs = [SentencePair(r.hypothesis_tokens, r.reference_tokens) for r in records]
    included = [p for p in pairs if p.embeddable(table)]
    excluded = len(pairs) - len(included)
    if excluded:
        logger.warning('%d of %d pairs have no embeddable token and are excluded', excluded, len(pairs))

    if included:
        average = float(np.mean([embedding_average(p, table, flags) for p in included]))
        greedy = float(np.mean([embedding_greedy(p, table, flags) for p in included]))
        extrema = float(np.mean([embedding_extrema(p, table, flags) for p in included]))
    else:
        _flag(flags, 'no_embeddable_pairs')
        average = greedy = extrema = 0.0

    hypotheses = [r.hypothesis_tokens for r in records]
    if last_utterance_only:
        messages = [r.context_tokens[-1] if r.context else [] for r in records]
    else:
        messages = [[t for u in r.context_tokens for t in u] for r in records]

    return EvalReport(
        average=average,
        greedy=greedy,
        extrema=extrema,
        distinct1=distinct_n(hypotheses, 1, flags),
        distinct2=distinct_n(hypotheses, 2, flags),
        diversity=corpus_diversity(records),
        collocation_rate=collocation_rate(
            messages, [r.reference_tokens for r in records], hypotheses, stop_words, flags
        ),
        token_freq=token_frequency(hypotheses, stop_words),
        excluded_pair_count=excluded,
        pair_count=len(pairs),
        flags=flags,
    )
