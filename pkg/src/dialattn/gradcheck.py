"""
Finite-difference verification of reverse-mode gradients.

Every parameter element is perturbed by +/- eps and the central difference

    (L(p + eps) - L(p - eps)) / (2 eps)

is compared with the tape gradient by the relative error

    |a - n| / max(|a|, |n|, floor)

The floor keeps elements whose true gradient is zero from dividing by zero.
"""

import logging
from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np

from .config import ModelConfig
from .corpus import PreparedSession, pad_utterance
from .exceptions import ContractError, ValidationError
from .model import DialogueModel
from .tensor import Tape, Tensor, no_grad
from .trainer import batch_loss

logger = logging.getLogger(__name__)

DEFAULT_EPS = 1e-5
DEFAULT_TOL = 1e-4
ERROR_FLOOR = 1e-5


def relative_error(analytic, numeric, floor: float = ERROR_FLOOR) -> np.ndarray:
    """
    Elementwise |a - n| / max(|a|, |n|, floor).

    Examples:
        >>> float(relative_error(1.0, 1.0))
        0.0
        >>> float(relative_error(2.0, 1.0))
        0.5
    """
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    return np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)


def central_difference(
    f: Callable[[], float],
    tensor: Tensor,
    eps: float = DEFAULT_EPS,
    indices: np.ndarray | None = None,
) -> np.ndarray:
    """
    Numerical gradient of f with respect to `tensor`, perturbing in place.

    Args:
        f: Recomputes the scalar loss from the current parameter values
        tensor: Parameter to perturb; restored exactly afterwards
        eps: Perturbation size
        indices: Flat element indices to perturb (default: all); the rest stay 0

    Returns
        Array with the shape of `tensor`
    """
    if eps <= 0.0:
        raise ValidationError(f'eps must be positive, got {eps}')
    flat = tensor.values.reshape(-1)
    if not np.shares_memory(flat, tensor.values):
        raise ContractError('parameter values must be contiguous to perturb in place')
    grad = np.zeros(tensor.size)
    for i in range(tensor.size) if indices is None else indices:
        original = flat[i]
        flat[i] = original + eps
        plus = f()
        flat[i] = original - eps
        minus = f()
        flat[i] = original
        grad[i] = (plus - minus) / (2.0 * eps)
    return grad.reshape(tensor.shape)


@dataclass
class ParameterCheck:
    """Comparison result for one parameter tensor."""

    name: str
    shape: tuple[int, ...]
    checked: int
    max_rel_error: float
    max_abs_error: float


@dataclass
class GradCheckReport:
    """
    Outcome of a gradient check.

    Attributes
        label: Configuration description
        tolerance: Maximum accepted relative error
        checks: One entry per parameter tensor
    """

    label: str
    tolerance: float
    checks: list[ParameterCheck] = field(default_factory=list)

    @property
    def max_rel_error(self) -> float:
        return max((c.max_rel_error for c in self.checks), default=0.0)

    @property
    def worst(self) -> ParameterCheck | None:
        return max(self.checks, key=lambda c: c.max_rel_error, default=None)

    @property
    def passed(self) -> bool:
        return self.max_rel_error <= self.tolerance

    def to_text(self) -> str:
        status = 'PASS' if self.passed else 'FAIL'
        worst = self.worst
        where = f' at {worst.name}' if worst is not None else ''
        return f'{status} {self.label}: max relative error {self.max_rel_error:.3e}{where}'


def check_gradients(
    loss_fn: Callable[[], Tensor],
    params: dict[str, Tensor],
    eps: float = DEFAULT_EPS,
    tol: float = DEFAULT_TOL,
    label: str = '',
    sample: int | None = None,
    rng: np.random.Generator | None = None,
) -> GradCheckReport:
    """
    Compare tape gradients of `loss_fn` against central differences.

    Args:
        loss_fn: Builds the scalar loss from the current parameter values
        params: Parameters to check, by name
        eps: Perturbation size
        tol: Accepted relative error
        label: Report label
        sample: Check at most this many elements per tensor (default: all)
        rng: Chooses the sampled elements

    Returns
        GradCheckReport; inspect `passed`
    """
    for p in params.values():
        p.zero_grad()
    with Tape() as tape:
        loss = loss_fn()
    tape.backward(loss)
    analytic = {name: (p.grad if p.grad is not None else np.zeros(p.shape)) for name, p in params.items()}

    def value() -> float:
        with no_grad():
            return loss_fn().item()

    rng = rng if rng is not None else np.random.default_rng(0)
    report = GradCheckReport(label=label, tolerance=tol)
    for name, p in params.items():
        indices = None
        if sample is not None and p.size > sample:
            indices = np.sort(rng.choice(p.size, size=sample, replace=False))
        numeric = central_difference(value, p, eps, indices)
        a = analytic[name]
        if indices is not None:
            a = a.reshape(-1)[indices]
            numeric = numeric.reshape(-1)[indices]
        rel = relative_error(a, numeric)
        report.checks.append(ParameterCheck(
            name=name,
            shape=p.shape,
            checked=int(rel.size),
            max_rel_error=float(rel.max()) if rel.size else 0.0,
            max_abs_error=float(np.max(np.abs(a - numeric))) if rel.size else 0.0,
        ))
        logger.debug('%s %s: max rel error %.3e', label, name, report.checks[-1].max_rel_error)
    for p in params.values():
        p.zero_grad()
    return report


def synthetic_session(
    rng: np.random.Generator,
    vocab_size: int = 20,
    num_utterances: int = 3,
    pad_len: int = 6,
) -> PreparedSession:
    """Random session of non-reserved ids with utterances of varying length."""
    if vocab_size <= 4:
        raise ValidationError('synthetic sessions need non-reserved ids (vocab_size > 4)')

    def utterance() -> list[int]:
        length = int(rng.integers(1, pad_len))
        return pad_utterance(rng.integers(4, vocab_size, size=length).tolist(), pad_len)

    return PreparedSession(
        context_ids=[utterance() for _ in range(num_utterances)],
        response_ids=utterance(),
    )


def gradcheck_model(
    config: ModelConfig,
    vocab_size: int = 20,
    num_utterances: int = 3,
    seed: int = 0,
    eps: float = DEFAULT_EPS,
    tol: float = DEFAULT_TOL,
    sample: int | None = None,
    label: str | None = None,
) -> GradCheckReport:
    """
    Gradient check of the full teacher-forced loss of one model configuration.

    Parameters are drawn from uniform(-0.5, 0.5) and dropout is disabled.
    """
    config = config.with_overrides(init_scale=0.5, dropout=0.0)
    rng = np.random.default_rng(seed)
    model = DialogueModel(config, vocab_size, rng=rng)
    session = synthetic_session(rng, vocab_size, num_utterances, config.pad_len)
    return check_gradients(
        lambda: batch_loss([session], model),
        model.parameters(),
        eps=eps,
        tol=tol,
        label=label or describe(config),
        sample=sample,
        rng=rng,
    )


def describe(config: ModelConfig) -> str:
    parts = [config.attention.value, f'heads={config.heads}', config.direction.value]
    if config.token_level.value != 'off':
        parts.append(f'tokens={config.token_level.value}')
    if config.decoder_size != config.hidden_size:
        parts.append(f'd_s={config.decoder_size}')
    return ' '.join(parts)


def suite_configs(
    embedding_dim: int = 8,
    hidden_size: int = 12,
    pad_len: int = 6,
) -> list[ModelConfig]:
    """
    Configurations covered by the gradient-check suite: every attention mode,
    1, 2 and 4 heads, both token-level variants, both directions and mixed
    encoder/decoder widths.
    """
    base = ModelConfig(embedding_dim=embedding_dim, hidden_size=hidden_size, pad_len=pad_len,
                       heads=1, dropout=0.0)
    modes = ['static', 'dynamic', 'concat', 'sum', 'learnable', 'attention', 'max', 'mean']
    configs = [base.with_overrides(attention=m) for m in modes]
    for heads in (2, 4):
        configs.append(base.with_overrides(attention='static', heads=heads))
        configs.append(base.with_overrides(attention='dynamic', heads=heads))
    configs.append(base.with_overrides(attention='static', token_level='replace'))
    configs.append(base.with_overrides(attention='dynamic', token_level='replace'))
    configs.append(base.with_overrides(attention='static', token_level='concat'))
    configs.append(base.with_overrides(attention='concat', token_level='concat'))
    configs.append(base.with_overrides(attention='static', direction='bi'))
    configs.append(base.with_overrides(attention='dynamic', direction='bi'))
    configs.append(base.with_overrides(attention='attention', decoder_hidden_size=hidden_size - 2))
    configs.append(base.with_overrides(attention='concat', decoder_hidden_size=hidden_size + 2))
    return configs


def run_suite(
    vocab_size: int = 20,
    num_utterances: int = 3,
    seed: int = 0,
    eps: float = DEFAULT_EPS,
    tol: float = DEFAULT_TOL,
    sample: int | None = 24,
    configs: list[ModelConfig] | None = None,
) -> list[GradCheckReport]:
    """Gradient-check every suite configuration; logs one line per configuration."""
    reports = []
    for config in configs or suite_configs():
        report = gradcheck_model(config, vocab_size, num_utterances, seed, eps, tol, sample)
        log = logger.info if report.passed else logger.error
        log(report.to_text())
        reports.append(report)
    return reports
