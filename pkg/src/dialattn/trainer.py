"""
Teacher-forced training, Adam with decoupled weight decay, and checkpoints.

Checkpoint layout (all integers little-endian):

    magic       8 bytes   b'DLGATTN\\x00'
    version     uint32
    header_len  uint32
    header      header_len bytes of key-sorted UTF-8 JSON
    payload     float64 LE: every parameter, then Adam m, then Adam v,
                in the order listed by the header's `tensors` entry

The header records the configs, vocabulary, epoch, optimiser step, RNG
state, loss histories and the SHA-256 and size of the payload.
"""

import hashlib
import json
import logging
import math
import pathlib
import struct
from collections.abc import Sequence
from dataclasses import dataclass, field
from os import PathLike

import numpy as np
from tqdm import tqdm

from .config import ModelConfig, TrainConfig, canonical_json, config_digest
from .corpus import PreparedSession, Vocabulary, batches
from .exceptions import ArchitectureMismatchError, CheckpointError, NumericError, ValidationError
from .model import DialogueModel
from .tensor import Tape, Tensor, no_grad, reduce_sum, scale, stack

logger = logging.getLogger(__name__)

MAGIC = b'DLGATTN\x00'
FORMAT_VERSION = 1
_PREFIX = struct.Struct('<II')


class Adam:
    """
    Adam with decoupled weight decay.

        m <- b1 m + (1 - b1) g
        v <- b2 v + (1 - b2) g^2
        p <- p - lr (m_hat / (sqrt(v_hat) + eps) + wd p)

    Parameters are updated in place so tensors shared between groups stay shared.
    """

    def __init__(self, params: dict[str, Tensor], config: TrainConfig):
        self.params = params
        self.config = config
        self.step_count = 0
        self.m = {name: np.zeros_like(p.values) for name, p in params.items()}
        self.v = {name: np.zeros_like(p.values) for name, p in params.items()}

    def step(self) -> None:
        cfg = self.config
        self.step_count += 1
        bias1 = 1.0 - cfg.beta1 ** self.step_count
        bias2 = 1.0 - cfg.beta2 ** self.step_count
        for name, p in self.params.items():
            g = p.grad if p.grad is not None else np.zeros_like(p.values)
            m = self.m[name]
            v = self.v[name]
            m *= cfg.beta1
            m += (1.0 - cfg.beta1) * g
            v *= cfg.beta2
            v += (1.0 - cfg.beta2) * g * g
            update = (m / bias1) / (np.sqrt(v / bias2) + cfg.eps) + cfg.weight_decay * p.values
            p.values -= cfg.learning_rate * update

    def load_state(self, m: dict[str, np.ndarray], v: dict[str, np.ndarray], step_count: int) -> None:
        for name in self.params:
            self.m[name] = m[name].copy()
            self.v[name] = v[name].copy()
        self.step_count = step_count


def clip_grad_norm(params: dict[str, Tensor], max_norm: float) -> float:
    """Rescale all gradients so their joint L2 norm is at most max_norm; returns the norm before clipping."""
    grads = [p.grad for p in params.values() if p.grad is not None]
    total = math.sqrt(sum(float(np.sum(g * g)) for g in grads))
    if total > max_norm:
        factor = max_norm / total
        for g in grads:
            g *= factor
    return total


def batch_loss(
    batch: Sequence[PreparedSession],
    model: DialogueModel,
    rng: np.random.Generator | None = None,
) -> Tensor:
    """
    Mean cross-entropy over every non-PAD response position of the batch.

    Raises
        ValidationError: If the batch has no target positions
    """
    terms = []
    for session in batch:
        terms.extend(model.position_losses(session, rng))
    if not terms:
        raise ValidationError('batch has no response positions to score')
    return scale(reduce_sum(stack(terms)), 1.0 / len(terms))


def evaluate_loss(sessions: Sequence[PreparedSession], model: DialogueModel) -> float:
    """Per-target mean loss without dropout or gradient tracking."""
    total = 0.0
    count = 0
    with no_grad():
        for session in sessions:
            for term in model.position_losses(session):
                total += term.item()
                count += 1
    if count == 0:
        raise ValidationError('no response positions to evaluate')
    return total / count


@dataclass
class Checkpoint:
    """Complete training state."""

    model_config: ModelConfig
    train_config: TrainConfig
    vocab_tokens: list[str]
    parameters: dict[str, np.ndarray]
    adam_m: dict[str, np.ndarray]
    adam_v: dict[str, np.ndarray]
    adam_step: int
    epoch: int
    rng_state: dict
    loss_history: list[float] = field(default_factory=list)
    dev_history: list[float] = field(default_factory=list)

    @property
    def vocab(self) -> Vocabulary:
        return Vocabulary(self.vocab_tokens)


@dataclass
class TrainResult:
    """
    Attributes
        model: Model after the last epoch
        last: Checkpoint after the last epoch
        best: Checkpoint with the lowest dev loss (the last one without dev data)
        loss_history: Mean training loss per epoch, across resumes
        dev_history: Dev loss per epoch (empty without dev data)
    """

    model: DialogueModel
    last: Checkpoint
    best: Checkpoint
    loss_history: list[float]
    dev_history: list[float]


def _snapshot(model, optimizer, vocab, train_config, epoch, rng, history, dev_history) -> Checkpoint:
    return Checkpoint(
        model_config=model.config,
        train_config=train_config,
        vocab_tokens=list(vocab.tokens),
        parameters=model.state_arrays(),
        adam_m={k: a.copy() for k, a in optimizer.m.items()},
        adam_v={k: a.copy() for k, a in optimizer.v.items()},
        adam_step=optimizer.step_count,
        epoch=epoch,
        rng_state=rng.bit_generator.state,
        loss_history=list(history),
        dev_history=list(dev_history),
    )


def model_from_checkpoint(ckpt: Checkpoint) -> DialogueModel:
    """Rebuild the model described by a checkpoint and load its parameters."""
    model = DialogueModel(ckpt.model_config, len(ckpt.vocab), rng=np.random.default_rng(0))
    model.load_arrays(ckpt.parameters)
    return model


def train(
    sessions: Sequence[PreparedSession],
    vocab: Vocabulary,
    model_config: ModelConfig,
    train_config: TrainConfig,
    dev: Sequence[PreparedSession] | None = None,
    resume: Checkpoint | None = None,
    progress: bool = False,
) -> TrainResult:
    """
    Train a dialogue model with teacher forcing.

    A single generator seeded from `train_config.seed` drives initialisation,
    shuffling and dropout, so two runs with equal inputs produce equal loss
    histories. Resuming restores parameters, optimiser moments and the
    generator state, and continues up to `train_config.epochs`.

    Args:
        sessions: Prepared training sessions
        vocab: Vocabulary the sessions were encoded with
        model_config: Architecture
        train_config: Optimisation settings
        dev: Optional held-out sessions scored after every epoch
        resume: Checkpoint to continue from
        progress: Show a progress bar over epochs

    Returns
        TrainResult with the final model and the last and best checkpoints

    Raises
        ValidationError: If there are no training sessions
        NumericError: If a batch loss is not finite
        ArchitectureMismatchError: If `resume` was written for another architecture
    """
    if not sessions:
        raise ValidationError('no training sessions')

    if resume is not None:
        if config_digest(resume.model_config) != config_digest(model_config):
            raise ArchitectureMismatchError('resume checkpoint was written for a different architecture')
        if resume.vocab_tokens != list(vocab.tokens):
            raise ArchitectureMismatchError('resume checkpoint vocabulary differs')
        model = model_from_checkpoint(resume)
        rng = np.random.default_rng()
        rng.bit_generator.state = resume.rng_state
        optimizer = Adam(model.parameters(), train_config)
        optimizer.load_state(resume.adam_m, resume.adam_v, resume.adam_step)
        history = list(resume.loss_history)
        dev_history = list(resume.dev_history)
        start = resume.epoch
    else:
        rng = np.random.default_rng(train_config.seed)
        model = DialogueModel(model_config, len(vocab), rng=rng)
        optimizer = Adam(model.parameters(), train_config)
        history, dev_history = [], []
        start = 0

    params = optimizer.params
    last = _snapshot(model, optimizer, vocab, train_config, start, rng, history, dev_history)
    best = last
    best_score = evaluate_loss(dev, model) if dev else math.inf
    logger.info(
        'training %s model: %d parameters, %d sessions, epochs %d..%d',
        model_config.attention.value, sum(p.size for p in params.values()),
        len(sessions), start + 1, train_config.epochs,
    )

    for epoch in tqdm(range(start, train_config.epochs), desc='epochs', disable=not progress):
        losses = []
        for batch_index, batch in enumerate(batches(sessions, train_config.batch_size, rng)):
            model.zero_grad()
            try:
                with Tape() as tape:
                    loss = batch_loss(batch, model, rng)
            except NumericError as e:
                raise NumericError(f'epoch {epoch + 1}, batch {batch_index}: {e}') from e
            value = loss.item()
            if not math.isfinite(value):
                raise NumericError(f'epoch {epoch + 1}, batch {batch_index}: loss is {value}')
            tape.backward(loss)
            norm = clip_grad_norm(params, train_config.clip_norm)
            optimizer.step()
            losses.append(value)
            logger.debug('epoch %d batch %d loss %.6f grad-norm %.4f', epoch + 1, batch_index, value, norm)

        history.append(float(np.mean(losses)))
        message = f'epoch {epoch + 1}: train loss {history[-1]:.6f}'
        if dev:
            dev_history.append(evaluate_loss(dev, model))
            message += f', dev loss {dev_history[-1]:.6f}'
        logger.info(message)

        last = _snapshot(model, optimizer, vocab, train_config, epoch + 1, rng, history, dev_history)
        if not dev:
            best = last
        elif dev_history[-1] < best_score:
            best, best_score = last, dev_history[-1]

    return TrainResult(model, last, best, history, dev_history)


def save_checkpoint(path: PathLike | str, ckpt: Checkpoint) -> None:
    """
    Write a checkpoint. Equal checkpoints produce byte-identical files.
    """
    names = list(ckpt.parameters)
    arrays = [ckpt.parameters[n] for n in names]
    arrays += [ckpt.adam_m[n] for n in names] + [ckpt.adam_v[n] for n in names]
    payload = b''.join(np.ascontiguousarray(a, dtype='<f8').tobytes() for a in arrays)
    header = {
        'version': FORMAT_VERSION,
        'config_digest': config_digest(ckpt.model_config),
        'model_config': ckpt.model_config.to_dict(),
        'train_config': ckpt.train_config.to_dict(),
        'vocab': list(ckpt.vocab_tokens),
        'epoch': ckpt.epoch,
        'adam_step': ckpt.adam_step,
        'rng_state': ckpt.rng_state,
        'loss_history': list(ckpt.loss_history),
        'dev_history': list(ckpt.dev_history),
        'tensors': [[n, list(ckpt.parameters[n].shape)] for n in names],
        'payload_size': len(payload),
        'payload_sha256': hashlib.sha256(payload).hexdigest(),
    }
    header_bytes = canonical_json(header).encode('utf-8')
    data = MAGIC + _PREFIX.pack(FORMAT_VERSION, len(header_bytes)) + header_bytes + payload
    pathlib.Path(path).write_bytes(data)
    logger.debug('wrote checkpoint %s (%d bytes)', path, len(data))


def load_checkpoint(path: PathLike | str) -> Checkpoint:
    """
    Read a checkpoint written by save_checkpoint.

    Raises
        CheckpointError: On a missing file, bad magic, unknown version,
            truncation, corrupted payload or inconsistent header
    """
    try:
        data = pathlib.Path(path).read_bytes()
    except OSError as e:
        raise CheckpointError(f'cannot read checkpoint {path}: {e}') from e

    start = len(MAGIC) + _PREFIX.size
    if len(data) < start or data[: len(MAGIC)] != MAGIC:
        raise CheckpointError(f'{path}: not a checkpoint file')
    version, header_len = _PREFIX.unpack_from(data, len(MAGIC))
    if version != FORMAT_VERSION:
        raise CheckpointError(f'{path}: unsupported checkpoint version {version}')
    if len(data) < start + header_len:
        raise CheckpointError(f'{path}: truncated header')

    try:
        header = json.loads(data[start:start + header_len].decode('utf-8'))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError(f'{path}: malformed header ({e})') from e

    payload = data[start + header_len:]
    try:
        if len(payload) != header['payload_size']:
            raise CheckpointError(
                f'{path}: payload is {len(payload)} bytes, header says {header["payload_size"]}'
            )
        if hashlib.sha256(payload).hexdigest() != header['payload_sha256']:
            raise CheckpointError(f'{path}: payload checksum mismatch')
        model_config = ModelConfig.from_dict(header['model_config'])
        if config_digest(model_config) != header['config_digest']:
            raise CheckpointError(f'{path}: config digest mismatch')

        tensors = [(name, tuple(shape)) for name, shape in header['tensors']]
        expected = 3 * 8 * sum(int(np.prod(shape)) for _, shape in tensors)
        if expected != len(payload):
            raise CheckpointError(f'{path}: tensor list does not match payload size')
        values = np.frombuffer(payload, dtype='<f8').astype(np.float64)
        sections: list[dict[str, np.ndarray]] = [{}, {}, {}]
        offset = 0
        for section in sections:
            for name, shape in tensors:
                n = int(np.prod(shape))
                section[name] = values[offset:offset + n].reshape(shape).copy()
                offset += n

        return Checkpoint(
            model_config=model_config,
            train_config=TrainConfig.from_dict(header['train_config']),
            vocab_tokens=list(header['vocab']),
            parameters=sections[0],
            adam_m=sections[1],
            adam_v=sections[2],
            adam_step=int(header['adam_step']),
            epoch=int(header['epoch']),
            rng_state=header['rng_state'],
            loss_history=[float(x) for x in header['loss_history']],
            dev_history=[float(x) for x in header['dev_history']],
        )
    except (KeyError, TypeError, ValueError, ValidationError) as e:
        raise CheckpointError(f'{path}: inconsistent header ({e})') from e


def write_loss_history(path: PathLike | str, history: Sequence[float]) -> None:
    """One `epoch<TAB>loss` line per epoch, epochs counted from 1."""
    lines = [f'{epoch}\t{loss!r}\n' for epoch, loss in enumerate(history, start=1)]
    pathlib.Path(path).write_text(''.join(lines), encoding='utf-8')
