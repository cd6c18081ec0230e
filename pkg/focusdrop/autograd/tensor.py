"""
Tensor and reverse-mode tape

Dense numpy-backed tensors that remember the differentiable operation which
produced them. ``Tensor.backward()`` collects the reachable operations into a
Tape, replays them in exact reverse execution order and accumulates gradients
additively into the leaves.
"""

import contextlib
import itertools
import logging
import threading
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..exceptions import NonFiniteError, ShapeError

logger = logging.getLogger(__name__)

_state = threading.local()
_sequence = itertools.count()

ArrayLike = Union['Tensor', np.ndarray, float, int, Sequence]


# =============================================================================
# Precision and grad mode
# =============================================================================

def get_default_dtype() -> np.dtype:
    """dtype new tensors take (float32 unless inside ``precision``)."""
    return getattr(_state, 'dtype', np.dtype(np.float32))


@contextlib.contextmanager
def precision(dtype):
    """Temporarily change the default dtype, e.g. ``precision('float64')`` for gradient checks."""
    previous = get_default_dtype()
    _state.dtype = np.dtype(dtype)
    try:
        yield
    finally:
        _state.dtype = previous


def is_grad_enabled() -> bool:
    return getattr(_state, 'grad_enabled', True)


@contextlib.contextmanager
def no_grad():
    """Ops run inside record nothing; used for evaluation."""
    previous = is_grad_enabled()
    _state.grad_enabled = False
    try:
        yield
    finally:
        _state.grad_enabled = previous


def check_finite(array: np.ndarray, where: str):
    if not np.all(np.isfinite(array)):
        bad = int(np.size(array) - np.count_nonzero(np.isfinite(array)))
        raise NonFiniteError(f"{where}: {bad} non-finite value(s) in array of shape {np.shape(array)}")


def unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` back down to ``shape`` after numpy broadcasting."""
    if grad.shape == tuple(shape):
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, size in enumerate(shape) if size == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


# =============================================================================
# Function
# =============================================================================

class Function:
    """
    Base class for differentiable operations.

    Subclasses implement ``forward`` on raw arrays and ``backward`` returning
    one gradient array (or None) per tensor input. Non-tensor arguments
    (stride, padding, labels) are passed as keyword arguments.
    """

    name = 'op'

    def __init__(self, *inputs: 'Tensor'):
        self.inputs = inputs
        self.output: Optional['Tensor'] = None
        self.seq = -1

    def forward(self, *arrays: np.ndarray, **kwargs: Any) -> np.ndarray:
        raise NotImplementedError("Subclasses must implement forward()")

    def backward(self, grad: np.ndarray) -> Tuple[Optional[np.ndarray], ...]:
        raise NotImplementedError("Subclasses must implement backward()")

    @classmethod
    def apply(cls, *inputs: ArrayLike, **kwargs: Any) -> 'Tensor':
        tensors = tuple(as_tensor(x) for x in inputs)
        fn = cls(*tensors)
        data = fn.forward(*(t.data for t in tensors), **kwargs)
        check_finite(data, cls.name)

        requires_grad = is_grad_enabled() and any(t.requires_grad for t in tensors)
        out = Tensor._wrap(data, requires_grad=requires_grad)
        if requires_grad:
            fn.seq = next(_sequence)
            fn.output = out
            out._ctx = fn
        return out


# =============================================================================
# Tape
# =============================================================================

class Tape:
    """Ordered record of the operations that produced an output"""

    def __init__(self, functions: List[Function]):
        self.functions = sorted(functions, key=lambda fn: fn.seq)

    @classmethod
    def from_output(cls, output: 'Tensor') -> 'Tape':
        seen = set()
        functions = []
        stack = [output._ctx] if output._ctx is not None else []
        while stack:
            fn = stack.pop()
            if id(fn) in seen:
                continue
            seen.add(id(fn))
            functions.append(fn)
            for tensor in fn.inputs:
                if tensor._ctx is not None and id(tensor._ctx) not in seen:
                    stack.append(tensor._ctx)
        return cls(functions)

    def __len__(self) -> int:
        return len(self.functions)

    def __iter__(self) -> Iterator[Function]:
        return iter(self.functions)

    def backward(self, output: 'Tensor', grad: Optional[np.ndarray] = None):
        """
        Propagate ``grad`` (default ones) from ``output`` to every leaf.

        Gradients are not checked for NaN/Inf here; the optimizer step does
        that and names the parameter.
        """
        if grad is None:
            grad = np.ones_like(output.data)
        grad = np.asarray(grad, dtype=output.data.dtype)
        if grad.shape != output.shape:
            raise ShapeError(f"backward: gradient shape {grad.shape} does not match output shape {output.shape}")

        if output._ctx is None:
            output._accumulate(grad)
            return

        pending: Dict[int, np.ndarray] = {id(output): grad}
        for fn in reversed(self.functions):
            out_grad = pending.pop(id(fn.output), None)
            if out_grad is None:
                continue
            in_grads = fn.backward(out_grad)
            for tensor, g in zip(fn.inputs, in_grads):
                if g is None or not tensor.requires_grad:
                    continue
                if tensor._ctx is None:
                    tensor._accumulate(g)
                elif id(tensor) in pending:
                    pending[id(tensor)] = pending[id(tensor)] + g
                else:
                    pending[id(tensor)] = g


# =============================================================================
# Tensor
# =============================================================================

class Tensor:
    """n-dimensional array with optional gradient tracking"""

    def __init__(self, data: ArrayLike, requires_grad: bool = False, dtype=None):
        if isinstance(data, Tensor):
            data = data.data
        self.data = np.array(data, dtype=dtype or get_default_dtype())
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self._ctx: Optional[Function] = None

    @classmethod
    def _wrap(cls, array: np.ndarray, requires_grad: bool = False) -> 'Tensor':
        tensor = cls.__new__(cls)
        tensor.data = array
        tensor.requires_grad = requires_grad
        tensor.grad = None
        tensor._ctx = None
        return tensor

    # -- properties ----------------------------------------------------------

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return self.data.item()

    # -- gradients -----------------------------------------------------------

    def _accumulate(self, grad: np.ndarray):
        if self.grad is None:
            self.grad = np.array(grad, dtype=self.data.dtype, copy=True)
        else:
            self.grad += grad

    def zero_grad(self):
        self.grad = None

    def backward(self, grad: Optional[np.ndarray] = None):
        Tape.from_output(self).backward(self, grad)

    # -- operators -----------------------------------------------------------

    def __add__(self, other: ArrayLike) -> 'Tensor':
        from . import ops
        return ops.add(self, other)

    def __radd__(self, other: ArrayLike) -> 'Tensor':
        from . import ops
        return ops.add(other, self)

    def __sub__(self, other: ArrayLike) -> 'Tensor':
        from . import ops
        return ops.add(self, ops.neg(other))

    def __rsub__(self, other: ArrayLike) -> 'Tensor':
        from . import ops
        return ops.add(other, ops.neg(self))

    def __mul__(self, other: ArrayLike) -> 'Tensor':
        from . import ops
        return ops.mul(self, other)

    def __rmul__(self, other: ArrayLike) -> 'Tensor':
        from . import ops
        return ops.mul(other, self)

    def __neg__(self) -> 'Tensor':
        from . import ops
        return ops.neg(self)

    def __matmul__(self, other: ArrayLike) -> 'Tensor':
        from . import ops
        return ops.matmul(self, other)

    def relu(self) -> 'Tensor':
        from . import ops
        return ops.relu(self)

    def sum(self, axis=None, keepdims: bool = False) -> 'Tensor':
        from . import ops
        return ops.sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims: bool = False) -> 'Tensor':
        from . import ops
        return ops.mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape: int) -> 'Tensor':
        from . import ops
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return ops.reshape(self, shape)

    def flatten(self, start_dim: int = 1) -> 'Tensor':
        return self.reshape(self.shape[:start_dim] + (-1,))

    def __repr__(self) -> str:
        grad = ', requires_grad=True' if self.requires_grad else ''
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{grad})"


def as_tensor(value: ArrayLike) -> Tensor:
    """Pass tensors through; wrap anything else as a constant in the default dtype."""
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


def ones_like(tensor: Tensor) -> Tensor:
    return Tensor(np.ones_like(tensor.data), dtype=tensor.dtype)
