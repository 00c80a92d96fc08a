"""
Parameter creation and traversal.

Parameter groups are plain dataclasses whose fields are tensors, nested
groups, lists of groups, or None. `named_parameters` flattens a group into
dotted names in field order, which fixes the order used by the optimiser,
checkpoints and gradient checks.
"""

import dataclasses
from collections.abc import Iterator

import numpy as np

from .tensor import Tensor

INIT_SCALE = 0.08


def uniform(
    rng: np.random.Generator,
    shape: tuple[int, ...],
    scale: float = INIT_SCALE,
) -> Tensor:
    """Trainable tensor drawn from uniform(-scale, scale)."""
    return Tensor(rng.uniform(-scale, scale, size=shape), requires_grad=True)


def zeros(shape: tuple[int, ...]) -> Tensor:
    """Trainable tensor of zeros (biases)."""
    return Tensor(np.zeros(shape), requires_grad=True)


def constant(value: float, shape: tuple[int, ...] = ()) -> Tensor:
    """Trainable tensor filled with `value`."""
    return Tensor(np.full(shape, value), requires_grad=True)


def named_parameters(group, prefix: str = '') -> Iterator[tuple[str, Tensor]]:
    """
    Yield (dotted_name, tensor) for every tensor reachable from `group`.

    Args:
        group: A Tensor, a dataclass of parameters, or a list of those
        prefix: Name prefix for the yielded entries

    Returns
        Iterator over (name, Tensor) in declaration order
    """
    if group is None:
        return
    if isinstance(group, Tensor):
        yield prefix, group
        return
    if isinstance(group, (list, tuple)):
        for i, item in enumerate(group):
            yield from named_parameters(item, f'{prefix}.{i}' if prefix else str(i))
        return
    if dataclasses.is_dataclass(group):
        for f in dataclasses.fields(group):
            value = getattr(group, f.name)
            if isinstance(value, (Tensor, list, tuple)) or dataclasses.is_dataclass(value):
                yield from named_parameters(value, f'{prefix}.{f.name}' if prefix else f.name)
