"""
Dense float64 tensors with tape-based reverse-mode differentiation.

Every primitive below computes its result with numpy and, when a tape is
active and at least one operand is tracked, appends a node to the tape naming
the gradient rule to replay. `Tape.backward` walks the recorded nodes in
reverse, so each node is visited exactly once.

Basic Usage:
    >>> x = Tensor([1.0, 2.0, 3.0], requires_grad=True)
    >>> with Tape() as tape:
    ...     loss = dot(x, x)
    >>> tape.backward(loss)
    >>> x.grad
    array([2., 4., 6.])
"""

import contextlib
import contextvars
from collections.abc import Callable, Iterator, Sequence
from dataclasses import dataclass

import numpy as np
from scipy import special

from .exceptions import ContractError, DimensionError, NumericError, ValidationError

_ACTIVE_TAPE: contextvars.ContextVar['Tape | None'] = contextvars.ContextVar(
    'dialattn_active_tape', default=None
)


class Tensor:
    """
    A dense row-major float64 array with an optional gradient slot.

    Attributes
        values: numpy array holding the data
        grad: accumulated gradient (same shape as values) or None
        requires_grad: True for leaves whose gradient should be populated
        tape_id: index of the node that produced this tensor on its tape
    """

    __slots__ = ('values', 'grad', 'requires_grad', 'tape_id', 'name', '_tape')

    def __init__(self, values, requires_grad: bool = False, name: str | None = None):
        self.values = np.array(values, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.tape_id: int | None = None
        self.name = name
        self._tape: Tape | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape

    @property
    def ndim(self) -> int:
        return self.values.ndim

    @property
    def size(self) -> int:
        return self.values.size

    def item(self) -> float:
        """Return the value of a single-element tensor as a float."""
        if self.values.size != 1:
            raise ContractError(f'item() needs a single element, got shape {self.shape}')
        return float(self.values.reshape(()))

    def zero_grad(self) -> None:
        self.grad = None

    def detach(self) -> 'Tensor':
        """Return an untracked copy of this tensor."""
        return Tensor(self.values.copy())

    def __repr__(self) -> str:
        label = f' {self.name!r}' if self.name else ''
        return f'Tensor{label}(shape={self.shape}, requires_grad={self.requires_grad})'


@dataclass
class Node:
    """One recorded primitive: inputs, output and saved forward values."""

    op: str
    inputs: tuple[Tensor, ...]
    output: Tensor
    saved: tuple = ()


class Tape:
    """
    Ordered record of primitive operations for reverse-mode differentiation.

    A tape is confined to the worker that created it. Use it as a context
    manager so that primitives evaluated inside the block are recorded.
    """

    def __init__(self):
        self.nodes: list[Node] = []
        self._tokens: list[contextvars.Token] = []

    def __enter__(self) -> 'Tape':
        self._tokens.append(_ACTIVE_TAPE.set(self))
        return self

    def __exit__(self, *exc) -> None:
        _ACTIVE_TAPE.reset(self._tokens.pop())

    def __len__(self) -> int:
        return len(self.nodes)

    def tracks(self, t: Tensor) -> bool:
        return t.requires_grad or t._tape is self

    def record(self, op: str, inputs: tuple[Tensor, ...], output: Tensor, saved: tuple) -> None:
        output.tape_id = len(self.nodes)
        output._tape = self
        self.nodes.append(Node(op, inputs, output, saved))

    def backward(self, loss: Tensor) -> None:
        """
        Populate `grad` on every tracked leaf reachable from `loss`.

        Gradients accumulate into leaves across repeated calls; reset them
        with `zero_grad` between optimisation steps.

        Raises
            ContractError: If loss is not a scalar recorded on this tape
        """
        if loss.shape != ():
            raise ContractError(f'backward needs a scalar loss, got shape {loss.shape}')
        if loss._tape is not self or loss.tape_id is None:
            raise ContractError('loss was not produced on this tape')

        pending: dict[int, np.ndarray] = {id(loss): np.array(1.0)}
        for node in reversed(self.nodes[: loss.tape_id + 1]):
            g = pending.pop(id(node.output), None)
            if g is None:
                continue
            input_grads = GRADIENT_RULES[node.op](g, node)
            for t, gi in zip(node.inputs, input_grads):
                if gi is None or not self.tracks(t):
                    continue
                if t.requires_grad:
                    t.grad = gi.copy() if t.grad is None else t.grad + gi
                else:
                    prev = pending.get(id(t))
                    pending[id(t)] = gi if prev is None else prev + gi
        loss.grad = np.array(1.0)


def active_tape() -> Tape | None:
    """Return the tape currently recording in this context, if any."""
    return _ACTIVE_TAPE.get()


@contextlib.contextmanager
def no_grad() -> Iterator[None]:
    """Evaluate primitives without recording them on any tape."""
    token = _ACTIVE_TAPE.set(None)
    try:
        yield
    finally:
        _ACTIVE_TAPE.reset(token)


def backward(loss: Tensor) -> None:
    """Run reverse-mode differentiation from `loss` on the tape that produced it."""
    if loss._tape is None:
        raise ContractError('loss was not produced on an active tape')
    loss._tape.backward(loss)


GradientRule = Callable[[np.ndarray, Node], tuple]
GRADIENT_RULES: dict[str, GradientRule] = {}


def _rule(op: str):
    def register(fn: GradientRule) -> GradientRule:
        GRADIENT_RULES[op] = fn
        return fn
    return register


@contextlib.contextmanager
def override_gradient_rule(op: str, rule: GradientRule) -> Iterator[None]:
    """Temporarily replace the gradient rule of a primitive."""
    if op not in GRADIENT_RULES:
        raise KeyError(f'Unknown primitive: {op}')
    original = GRADIENT_RULES[op]
    GRADIENT_RULES[op] = rule
    try:
        yield
    finally:
        GRADIENT_RULES[op] = original


def _emit(op: str, values: np.ndarray, inputs: tuple[Tensor, ...], saved: tuple = ()) -> Tensor:
    out = Tensor(values)
    tape = _ACTIVE_TAPE.get()
    if tape is not None and any(tape.tracks(t) for t in inputs):
        tape.record(op, inputs, out, saved)
    return out


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _same_shape(op: str, a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape:
        raise DimensionError(f'{op}: shape mismatch {a.shape} vs {b.shape}')


# Linear algebra

def matmul(a: Tensor, b: Tensor) -> Tensor:
    """
    Matrix product of a [m×k] with b [k×n] (or a k-vector).

    Raises
        DimensionError: If the inner dimensions differ
    """
    if a.ndim != 2 or b.ndim not in (1, 2) or a.shape[1] != b.shape[0]:
        raise DimensionError(f'matmul: cannot multiply {a.shape} by {b.shape}')
    return _emit('matmul', a.values @ b.values, (a, b))


@_rule('matmul')
def _matmul_grad(g, node):
    a, b = node.inputs
    if b.ndim == 1:
        return np.outer(g, b.values), a.values.T @ g
    return g @ b.values.T, a.values.T @ g


def transpose(a: Tensor) -> Tensor:
    if a.ndim != 2:
        raise DimensionError(f'transpose: expected a matrix, got shape {a.shape}')
    return _emit('transpose', a.values.T.copy(), (a,))


@_rule('transpose')
def _transpose_grad(g, node):
    return (g.T,)


def dot(a: Tensor, b: Tensor) -> Tensor:
    """Inner product of two vectors as a scalar tensor."""
    if a.ndim != 1:
        raise DimensionError(f'dot: expected vectors, got shape {a.shape}')
    _same_shape('dot', a, b)
    return _emit('dot', np.array(a.values @ b.values), (a, b))


@_rule('dot')
def _dot_grad(g, node):
    a, b = node.inputs
    return g * b.values, g * a.values


# Elementwise

def add(a: Tensor, b: Tensor) -> Tensor:
    _same_shape('add', a, b)
    return _emit('add', a.values + b.values, (a, b))


@_rule('add')
def _add_grad(g, node):
    return g, g


def sub(a: Tensor, b: Tensor) -> Tensor:
    _same_shape('sub', a, b)
    return _emit('sub', a.values - b.values, (a, b))


@_rule('sub')
def _sub_grad(g, node):
    return g, -g


def mul(a: Tensor, b: Tensor) -> Tensor:
    _same_shape('mul', a, b)
    return _emit('mul', a.values * b.values, (a, b))


@_rule('mul')
def _mul_grad(g, node):
    a, b = node.inputs
    return g * b.values, g * a.values


def scale(a: Tensor, s: 'Tensor | float') -> Tensor:
    """Multiply every element of `a` by a scalar (a float or a scalar tensor)."""
    if isinstance(s, Tensor):
        if s.shape != ():
            raise DimensionError(f'scale: factor must be a scalar, got shape {s.shape}')
        return _emit('scale', a.values * s.values, (a, s))
    return _emit('scale_const', a.values * float(s), (a,), (float(s),))


@_rule('scale')
def _scale_grad(g, node):
    a, s = node.inputs
    return g * s.values, np.array(np.sum(g * a.values))


@_rule('scale_const')
def _scale_const_grad(g, node):
    return (g * node.saved[0],)


def tanh(a: Tensor) -> Tensor:
    return _emit('tanh', np.tanh(a.values), (a,))


@_rule('tanh')
def _tanh_grad(g, node):
    y = node.output.values
    return (g * (1.0 - y * y),)


def sigmoid(a: Tensor) -> Tensor:
    return _emit('sigmoid', special.expit(a.values), (a,))


@_rule('sigmoid')
def _sigmoid_grad(g, node):
    y = node.output.values
    return (g * y * (1.0 - y),)


def maximum(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise maximum; ties route the gradient to `a`."""
    _same_shape('maximum', a, b)
    take_a = a.values >= b.values
    return _emit('maximum', np.where(take_a, a.values, b.values), (a, b), (take_a,))


@_rule('maximum')
def _maximum_grad(g, node):
    take_a = node.saved[0]
    return np.where(take_a, g, 0.0), np.where(take_a, 0.0, g)


_ELEMENTWISE = {
    'add': add,
    'sub': sub,
    'mul': mul,
    'scale': scale,
    'tanh': tanh,
    'sigmoid': sigmoid,
}


def elementwise(op: str, *args) -> Tensor:
    """Dispatch a pointwise primitive by name."""
    if op not in _ELEMENTWISE:
        raise ValueError(f'Unknown elementwise op: {op}')
    return _ELEMENTWISE[op](*args)


# Reductions and layout

def reduce_sum(a: Tensor) -> Tensor:
    """Sum of all elements as a scalar tensor."""
    return _emit('reduce_sum', np.array(a.values.sum()), (a,))


@_rule('reduce_sum')
def _reduce_sum_grad(g, node):
    return (np.full(node.inputs[0].shape, float(g)),)


def stack(tensors: Sequence[Tensor]) -> Tensor:
    """Stack equally shaped tensors along a new leading axis."""
    if not tensors:
        raise ValidationError('stack: nothing to stack')
    for t in tensors[1:]:
        _same_shape('stack', tensors[0], t)
    return _emit('stack', np.stack([t.values for t in tensors]), tuple(tensors))


@_rule('stack')
def _stack_grad(g, node):
    return tuple(g[i] for i in range(len(node.inputs)))


def concat(tensors: Sequence[Tensor]) -> Tensor:
    """Concatenate vectors end to end."""
    if not tensors:
        raise ValidationError('concat: nothing to concatenate')
    for t in tensors:
        if t.ndim != 1:
            raise DimensionError(f'concat: expected vectors, got shape {t.shape}')
    return _emit('concat', np.concatenate([t.values for t in tensors]), tuple(tensors))


@_rule('concat')
def _concat_grad(g, node):
    bounds = np.cumsum([t.size for t in node.inputs])[:-1]
    return tuple(np.split(g, bounds))


def row(matrix: Tensor, index: int) -> Tensor:
    """Select one row of a matrix (embedding lookup)."""
    if matrix.ndim != 2 or not 0 <= index < matrix.shape[0]:
        raise DimensionError(f'row: index {index} out of range for shape {matrix.shape}')
    return _emit('row', matrix.values[index].copy(), (matrix,), (index,))


@_rule('row')
def _row_grad(g, node):
    full = np.zeros(node.inputs[0].shape)
    full[node.saved[0]] = g
    return (full,)


# Normalisation and losses

def _check_finite(op: str, values: np.ndarray) -> None:
    if not np.all(np.isfinite(values)):
        raise NumericError(f'{op}: non-finite input {values}')


def softmax(logits: Tensor, mask: np.ndarray | None = None) -> Tensor:
    """
    Max-shifted softmax over a vector, optionally restricted to `mask`.

    Masked-out positions receive probability exactly 0.

    Raises
        NumericError: If any logit in the support is NaN or infinite
        ValidationError: If the mask excludes every position
    """
    if logits.ndim != 1 or logits.size < 1:
        raise DimensionError(f'softmax: expected a non-empty vector, got shape {logits.shape}')
    if mask is None:
        _check_finite('softmax', logits.values)
        probs = special.softmax(logits.values)
    else:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != logits.shape:
            raise DimensionError(f'softmax: mask shape {mask.shape} vs logits {logits.shape}')
        if not mask.any():
            raise ValidationError('softmax: every position is masked')
        _check_finite('softmax', logits.values[mask])
        probs = np.zeros(logits.shape)
        probs[mask] = special.softmax(logits.values[mask])
    return _emit('softmax', probs, (logits,))


@_rule('softmax')
def _softmax_grad(g, node):
    p = node.output.values
    return (p * (g - np.dot(g, p)),)


def cross_entropy(logits: Tensor, target: int) -> Tensor:
    """Negative log-probability of `target` under softmax(logits), as a scalar."""
    if logits.ndim != 1 or not 0 <= target < logits.size:
        raise DimensionError(f'cross_entropy: target {target} for logits {logits.shape}')
    _check_finite('cross_entropy', logits.values)
    lse = special.logsumexp(logits.values)
    return _emit('cross_entropy', np.array(lse - logits.values[target]), (logits,), (target, lse))


@_rule('cross_entropy')
def _cross_entropy_grad(g, node):
    target, lse = node.saved
    grad = np.exp(node.inputs[0].values - lse)
    grad[target] -= 1.0
    return (g * grad,)


def cosine(a: Tensor, b: Tensor) -> Tensor:
    """Cosine similarity of two vectors; 0 when either has zero norm."""
    _same_shape('cosine', a, b)
    na = float(np.linalg.norm(a.values))
    nb = float(np.linalg.norm(b.values))
    if na == 0.0 or nb == 0.0:
        return _emit('cosine', np.array(0.0), (a, b), (na, nb))
    value = float(a.values @ b.values) / (na * nb)
    return _emit('cosine', np.array(value), (a, b), (na, nb))


@_rule('cosine')
def _cosine_grad(g, node):
    a, b = node.inputs
    na, nb = node.saved
    if na == 0.0 or nb == 0.0:
        return np.zeros(a.shape), np.zeros(b.shape)
    cos = float(node.output.values)
    da = b.values / (na * nb) - cos * a.values / (na * na)
    db = a.values / (na * nb) - cos * b.values / (nb * nb)
    return g * da, g * db


def dropout(a: Tensor, rate: float, rng: np.random.Generator | None) -> Tensor:
    """Inverted dropout; identity when `rng` is None or the rate is 0."""
    if rng is None or rate <= 0.0:
        return a
    keep = (rng.random(a.shape) >= rate) / (1.0 - rate)
    return mul(a, Tensor(keep))
