"""
Dialogue corpus ingestion.

Sessions file: UTF-8, one JSON record per line,
    {"context": ["utt 1 text", ...], "response": "text"}

Embedding file: UTF-8, headerless word2vec text, one `token v1 ... vd` row per line.

Vocabulary dump: one token per line in id order, reserved tokens first.
"""

import json
import logging
import pathlib
from collections import Counter
from collections.abc import Iterable, Iterator, Sequence
from dataclasses import dataclass, field

import numpy as np
from gensim.models import KeyedVectors

from .exceptions import ParseError, ValidationError

logger = logging.getLogger(__name__)

PAD = 0
SOS = 1
EOS = 2
UNK = 3
RESERVED_TOKENS = ('<pad>', '<sos>', '<eos>', '<unk>')

PathLike = str | pathlib.Path


def tokenize(text: str, lowercase: bool = True) -> list[str]:
    """Whitespace tokenization with optional lowercasing."""
    if lowercase:
        text = text.lower()
    return text.split()


@dataclass
class DialogueSession:
    """
    One training or test sample: context utterances plus the gold response.

    Attributes
        context: Ordered utterances, each a token list
        response: Gold response tokens
    """

    context: list[list[str]]
    response: list[str]

    def __post_init__(self):
        if not self.context:
            raise ValidationError('session context is empty')
        if any(not utt for utt in self.context):
            raise ValidationError('session contains an empty utterance')
        if not self.response:
            raise ValidationError('session response is empty')

    @property
    def message(self) -> list[str]:
        """The last context utterance."""
        return self.context[-1]


@dataclass
class PreparedSession:
    """
    A session mapped to padded id sequences.

    Every utterance and the response hold exactly pad_len ids with one EOS.
    """

    context_ids: list[list[int]]
    response_ids: list[int]
    source: DialogueSession | None = field(default=None, compare=False, repr=False)

    @property
    def num_targets(self) -> int:
        """Number of non-PAD response positions (tokens plus EOS)."""
        return sum(1 for i in self.response_ids if i != PAD)


class Vocabulary:
    """
    Bidirectional token/id map with reserved PAD, SOS, EOS and UNK ids.

    Corpus text never produces a reserved id: literal reserved strings in the
    text encode to UNK like any other unknown token.
    """

    def __init__(self, tokens: Sequence[str], counts: dict[str, int] | None = None):
        """
        Args:
            tokens: Non-reserved tokens in id order (ids start at 4)
            counts: Optional corpus frequencies
        """
        self._itos = list(RESERVED_TOKENS) + list(tokens)
        self._stoi = {tok: i + len(RESERVED_TOKENS) for i, tok in enumerate(tokens)}
        if len(self._stoi) != len(tokens) or any(t in RESERVED_TOKENS for t in tokens):
            raise ValidationError('vocabulary tokens must be unique and non-reserved')
        self.counts = dict(counts or {})

    def __len__(self) -> int:
        return len(self._itos)

    def __contains__(self, token: str) -> bool:
        return token in self._stoi

    @property
    def tokens(self) -> list[str]:
        """Non-reserved tokens in id order."""
        return self._itos[len(RESERVED_TOKENS):]

    def token_to_id(self, token: str) -> int:
        return self._stoi.get(token, UNK)

    def id_to_token(self, idx: int) -> str:
        return self._itos[idx]

    def encode(self, tokens: Iterable[str]) -> list[int]:
        return [self._stoi.get(tok, UNK) for tok in tokens]

    def decode(self, ids: Iterable[int], strip_special: bool = False) -> list[str]:
        """Map ids back to tokens, optionally dropping PAD/SOS/EOS."""
        out = []
        for i in ids:
            if strip_special and i in (PAD, SOS, EOS):
                continue
            out.append(self._itos[i])
        return out

    def save(self, path: PathLike) -> None:
        """Write the vocabulary dump (one token per line, id order)."""
        pathlib.Path(path).write_text(''.join(f'{tok}\n' for tok in self._itos), encoding='utf-8')

    @classmethod
    def load(cls, path: PathLike) -> 'Vocabulary':
        """Read a vocabulary dump written by `save`."""
        lines = pathlib.Path(path).read_text(encoding='utf-8').splitlines()
        if tuple(lines[: len(RESERVED_TOKENS)]) != RESERVED_TOKENS:
            raise ParseError(f'{path}: vocabulary dump must start with {RESERVED_TOKENS}')
        return cls(lines[len(RESERVED_TOKENS):])


def parse_session_record(line: str, line_number: int, lowercase: bool = True) -> DialogueSession:
    """
    Parse one JSON session record.

    Raises
        ParseError: If the record is not valid JSON of the expected shape
        ValidationError: If the context or response is empty
    """
    try:
        record = json.loads(line)
    except json.JSONDecodeError as e:
        raise ParseError(f'malformed JSON ({e.msg})', line_number) from e
    if not isinstance(record, dict):
        raise ParseError('record must be a JSON object', line_number)
    context = record.get('context')
    response = record.get('response')
    if not isinstance(context, list) or not all(isinstance(u, str) for u in context):
        raise ParseError('"context" must be a list of strings', line_number)
    if not isinstance(response, str):
        raise ParseError('"response" must be a string', line_number)
    try:
        return DialogueSession(
            context=[tokenize(u, lowercase) for u in context],
            response=tokenize(response, lowercase),
        )
    except ValidationError as e:
        raise ValidationError(f'line {line_number}: {e}') from e


def load_sessions(path: PathLike, lowercase: bool = True) -> list[DialogueSession]:
    """
    Load dialogue sessions from a line-delimited JSON file.

    Args:
        path: Sessions file
        lowercase: Lowercase text while tokenizing

    Returns
        Sessions in file order (blank lines are skipped)
    """
    sessions = []
    with pathlib.Path(path).open(encoding='utf-8') as f:
        for line_number, line in enumerate(f, start=1):
            if not line.strip():
                continue
            sessions.append(parse_session_record(line, line_number, lowercase))
    logger.info('Loaded %d sessions from %s', len(sessions), path)
    return sessions


def session_tokens(session: DialogueSession) -> Iterator[str]:
    for utt in session.context:
        yield from utt
    yield from session.response


def build_vocab(sessions: Iterable[DialogueSession], min_count: int = 1) -> Vocabulary:
    """
    Build a vocabulary from corpus frequencies.

    Tokens occurring at least `min_count` times get ids in descending
    frequency, ties broken lexicographically; everything else encodes to UNK.
    """
    if min_count < 1:
        raise ValidationError(f'min_count must be >= 1, got {min_count}')
    counts = Counter()
    for session in sessions:
        counts.update(tok for tok in session_tokens(session) if tok not in RESERVED_TOKENS)
    kept = sorted((tok for tok, c in counts.items() if c >= min_count), key=lambda t: (-counts[t], t))
    return Vocabulary(kept, counts)


def pad_utterance(ids: Sequence[int], pad_len: int) -> list[int]:
    """
    Truncate to pad_len - 1 ids (keeping the head), append EOS, then pad.

    Examples:
        >>> pad_utterance([7, 8, 9], 6)
        [7, 8, 9, 2, 0, 0]
    """
    if pad_len < 2:
        raise ValidationError(f'pad_len must be >= 2, got {pad_len}')
    head = list(ids[: pad_len - 1])
    return head + [EOS] + [PAD] * (pad_len - 1 - len(head))


def prepare_session(
    session: DialogueSession,
    vocab: Vocabulary,
    pad_len: int,
    max_context: int | None = None,
) -> PreparedSession:
    """Encode and pad a session, optionally keeping only the last utterances."""
    context = session.context if max_context is None else session.context[-max_context:]
    return PreparedSession(
        context_ids=[pad_utterance(vocab.encode(utt), pad_len) for utt in context],
        response_ids=pad_utterance(vocab.encode(session.response), pad_len),
        source=session,
    )


def batches(items: Sequence, batch_size: int, rng: np.random.Generator | None = None) -> Iterator[list]:
    """Yield consecutive batches, in a seeded random order when `rng` is given."""
    order = rng.permutation(len(items)) if rng is not None else np.arange(len(items))
    for start in range(0, len(items), batch_size):
        yield [items[int(i)] for i in order[start:start + batch_size]]


@dataclass
class EmbeddingTable:
    """
    Word vectors used by the embedding metrics.

    Attributes
        keyed: gensim KeyedVectors holding one float64 vector per token
        duplicate_count: Rows whose token appeared earlier (last one wins)
    """

    keyed: KeyedVectors
    duplicate_count: int = 0

    @classmethod
    def from_vectors(cls, vectors: dict[str, np.ndarray], dim: int) -> 'EmbeddingTable':
        """Build a table from an in-memory token -> vector mapping."""
        for tok, vec in vectors.items():
            if np.shape(vec) != (dim,):
                raise ValidationError(f'vector for {tok!r} has shape {np.shape(vec)}, expected ({dim},)')
        keyed = KeyedVectors(dim, dtype=np.float64)
        if vectors:
            weights = np.array([np.asarray(v, dtype=np.float64) for v in vectors.values()])
            keyed.add_vectors(list(vectors), weights)
        return cls(keyed)

    @property
    def dim(self) -> int:
        return self.keyed.vector_size

    def __contains__(self, token: str) -> bool:
        return token in self.keyed.key_to_index

    def __len__(self) -> int:
        return len(self.keyed.index_to_key)

    def __getitem__(self, token: str) -> np.ndarray:
        return self.keyed.vectors[self.keyed.key_to_index[token]]

    def known(self, tokens: Iterable[str]) -> list[str]:
        """The tokens that have a vector, in order (OOV tokens are skipped)."""
        return [tok for tok in tokens if tok in self]

    def matrix(self, tokens: Iterable[str]) -> np.ndarray:
        """Stack the vectors of the known tokens into an [n×dim] array."""
        known = self.known(tokens)
        if not known:
            return np.zeros((0, self.dim))
        return self.keyed.vectors[[self.keyed.key_to_index[tok] for tok in known]]


def _scan_embedding_rows(path: PathLike) -> tuple[dict[str, list[str]], int]:
    """
    Check row shapes, collect the last row of every repeated token and count
    the repeated rows.

    The dimension is taken from the first row; every row must be
    `token v1 ... vd` separated by single spaces.
    """
    dim = None
    seen: set[str] = set()
    repeated: dict[str, list[str]] = {}
    duplicates = 0
    with pathlib.Path(path).open(encoding='utf-8') as f:
        for line_number, line in enumerate(f, start=1):
            parts = line.rstrip().split(' ')
            if parts == ['']:
                raise ParseError('blank line', line_number)
            token, raw = parts[0], parts[1:]
            if dim is None:
                dim = len(raw)
                if dim == 0:
                    raise ParseError('first row has no vector components', line_number)
            if len(raw) != dim or '' in raw:
                raise ParseError(f'expected {dim} components, found {len(raw)}', line_number)
            if token in seen:
                repeated[token] = raw
                duplicates += 1
            seen.add(token)
    if dim is None:
        raise ParseError(f'{path}: empty embedding file, cannot infer dimension')
    return repeated, duplicates


def load_embeddings(path: PathLike) -> EmbeddingTable:
    """
    Load a headerless text word-vector file.

    The dimension is inferred from the first line. Duplicate tokens keep the
    last vector and are counted in `duplicate_count`.

    Raises
        ParseError: Empty file, blank line, unparsable float or inconsistent
            row length
    """
    repeated, duplicates = _scan_embedding_rows(path)
    try:
        keyed = KeyedVectors.load_word2vec_format(
            str(path), binary=False, no_header=True, datatype=np.float64
        )
    except ValueError as e:
        raise ParseError(f'{path}: bad vector component ({e})') from e
    # gensim keeps the first occurrence
    for token, raw in repeated.items():
        keyed.vectors[keyed.key_to_index[token]] = np.asarray(raw, dtype=np.float64)
    if duplicates:
        logger.warning('%s: %d duplicate tokens (last occurrence kept)', path, duplicates)
    return EmbeddingTable(keyed, duplicates)


def load_stop_words(path: PathLike | None) -> frozenset[str]:
    """Read a stop-word list (one token per line); None gives an empty set."""
    if path is None:
        return frozenset()
    text = pathlib.Path(path).read_text(encoding='utf-8')
    return frozenset(line.strip() for line in text.splitlines() if line.strip())


@dataclass
class GenerationRecord:
    """One line of the generated-output file."""

    context: list[str]
    reference: str
    hypothesis: str

    @property
    def context_tokens(self) -> list[list[str]]:
        return [u.split() for u in self.context]

    @property
    def reference_tokens(self) -> list[str]:
        return self.reference.split()

    @property
    def hypothesis_tokens(self) -> list[str]:
        return self.hypothesis.split()


def write_generations(path: PathLike, records: Iterable[GenerationRecord]) -> int:
    """Write generated-output records as JSON lines; returns the count."""
    n = 0
    with pathlib.Path(path).open('w', encoding='utf-8') as f:
        for rec in records:
            line = json.dumps(
                {'context': rec.context, 'reference': rec.reference, 'hypothesis': rec.hypothesis},
                ensure_ascii=False,
            )
            f.write(line + '\n')
            n += 1
    return n


def load_generations(path: PathLike) -> list[GenerationRecord]:
    """Read a generated-output file."""
    records = []
    with pathlib.Path(path).open(encoding='utf-8') as f:
        for line_number, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                data = json.loads(line)
                records.append(GenerationRecord(
                    context=list(data['context']),
                    reference=str(data['reference']),
                    hypothesis=str(data['hypothesis']),
                ))
            except (json.JSONDecodeError, KeyError, TypeError) as e:
                raise ParseError(f'malformed generation record ({e})', line_number) from e
    return records
