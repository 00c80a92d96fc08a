"""
Shared test fixtures for dialogue attention tests.
"""

import json
import os
import pathlib
import sys

import numpy as np
import pytest

# Add src to path for imports
sys.path.insert(0, os.path.join(pathlib.Path(__file__).parent, '..', 'src'))

from dialattn.config import ModelConfig  # noqa: E402
from dialattn.corpus import DialogueSession, build_vocab, prepare_session  # noqa: E402

DATA_DIR = pathlib.Path(__file__).parent / 'data'


@pytest.fixture
def data_dir():
    """Committed fixture files."""
    return DATA_DIR


@pytest.fixture
def rng():
    """Seeded generator for random test instances."""
    return np.random.default_rng(1234)


@pytest.fixture
def toy_sessions():
    """Five short sessions over a small vocabulary."""
    return [
        DialogueSession([['hi', 'there'], ['how', 'are', 'you']], ['fine', 'thanks']),
        DialogueSession([['what', 'time', 'is', 'it']], ['it', 'is', 'late']),
        DialogueSession([['hi'], ['hello'], ['how', 'is', 'work']], ['work', 'is', 'fine']),
        DialogueSession([['are', 'you', 'there']], ['yes']),
        DialogueSession([['thanks'], ['you', 'are', 'welcome']], ['bye']),
    ]


@pytest.fixture
def toy_vocab(toy_sessions):
    """Vocabulary built from toy_sessions."""
    return build_vocab(toy_sessions)


@pytest.fixture
def toy_prepared(toy_sessions, toy_vocab):
    """toy_sessions padded to length 6."""
    return [prepare_session(s, toy_vocab, pad_len=6) for s in toy_sessions]


@pytest.fixture
def tiny_config():
    """Small static single-head configuration without dropout."""
    return ModelConfig(
        attention='static', heads=1, embedding_dim=6, hidden_size=8, pad_len=6, dropout=0.0,
    )


@pytest.fixture
def sessions_file(tmp_path, toy_sessions):
    """toy_sessions written as a line-delimited JSON corpus."""
    path = tmp_path / 'sessions.jsonl'
    lines = [
        json.dumps({'context': [' '.join(u) for u in s.context], 'response': ' '.join(s.response)})
        for s in toy_sessions
    ]
    path.write_text('\n'.join(lines) + '\n', encoding='utf-8')
    return path
