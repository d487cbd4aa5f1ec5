import typing as t

import numpy as np

from genloop import errors

Operand: t.TypeAlias = t.Union['Tensor', float, int, np.ndarray]
"""Anything an op accepts. Non-tensor operands are lifted to constants with
the dtype of the tensor they are combined with."""

BackwardFn: t.TypeAlias = t.Callable[[np.ndarray], None]


def _as_array(values: t.Any) -> np.ndarray:
    data = np.asarray(values)
    if data.dtype != np.float32 and data.dtype != np.float64:
        data = data.astype(np.float32)
    return data


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to the operand shape."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Tensor:
    """A node on the reverse-mode tape. The forward value lives in `data`;
    `grad` is filled by `backward` for every node that requires a gradient.
    Values are 32-bit by default; a tensor built from 64-bit data stays
    64-bit and promotes every op it takes part in."""

    __slots__ = ('data', 'grad', 'requires_grad', '_parents', '_backward')

    def __init__(
        self,
        values: t.Any,
        requires_grad: bool = False,
        parents: tuple['Tensor', ...] = (),
    ) -> None:
        self.data: np.ndarray = _as_array(values)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad or any(
            p.requires_grad for p in parents)
        self._parents = parents
        self._backward: BackwardFn | None = None

    def __repr__(self) -> str:
        return f'<Tensor shape={self.shape} dtype={self.data.dtype}>'

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data

    def accumulate(self, grad: np.ndarray) -> None:
        """Add an incoming gradient, reduced to this tensor's shape."""
        if not self.requires_grad:
            return
        grad = _unbroadcast(np.asarray(grad), self.data.shape)
        if self.grad is None:
            self.grad = grad.astype(self.data.dtype, copy=True)
        else:
            self.grad = self.grad + grad

    def backward(self) -> None:
        """Run the tape backwards from this scalar.

        Raises:
            errors.ContractError: when the tensor is not a scalar.
        """
        if self.data.size != 1:
            raise errors.ContractError(
                f'backward needs a scalar loss, got shape {self.shape}')
        order: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if parent.requires_grad and id(parent) not in visited:
                    stack.append((parent, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # Operator sugar. Every operator delegates to a module level op.

    def __add__(self, other: Operand) -> 'Tensor':
        return add(self, other)

    def __radd__(self, other: Operand) -> 'Tensor':
        return add(lift(other, self), self)

    def __sub__(self, other: Operand) -> 'Tensor':
        return sub(self, other)

    def __rsub__(self, other: Operand) -> 'Tensor':
        return sub(lift(other, self), self)

    def __mul__(self, other: Operand) -> 'Tensor':
        return mul(self, other)

    def __rmul__(self, other: Operand) -> 'Tensor':
        return mul(lift(other, self), self)

    def __truediv__(self, other: Operand) -> 'Tensor':
        return div(self, other)

    def __neg__(self) -> 'Tensor':
        return mul(self, -1.0)

    def __matmul__(self, other: 'Tensor') -> 'Tensor':
        return matmul(self, other)

    def __getitem__(self, index: t.Any) -> 'Tensor':
        return getitem(self, index)

    def reshape(self, *shape: int) -> 'Tensor':
        return reshape(self, shape)

    def transpose(self, *axes: int) -> 'Tensor':
        return transpose(self, axes)

    def sum(self, axis: int | None = None, keepdims: bool = False) -> 'Tensor':
        return reduce_sum(self, axis, keepdims)

    def mean(
        self,
        axis: int | None = None,
        keepdims: bool = False
    ) -> 'Tensor':
        return reduce_mean(self, axis, keepdims)


def lift(value: Operand, like: Tensor) -> Tensor:
    """Wrap a constant so it can join an op with `like`."""
    if isinstance(value, Tensor):
        return value
    return Tensor(np.asarray(value, dtype=like.data.dtype))


def _node(
    data: np.ndarray,
    parents: tuple[Tensor, ...],
    backward: BackwardFn,
) -> Tensor:
    out = Tensor(data, parents=parents)
    if out.requires_grad:
        out._backward = backward
    return out


def add(a: Tensor, b: Operand) -> Tensor:
    b = lift(b, a)

    def _backward(grad: np.ndarray) -> None:
        a.accumulate(grad)
        b.accumulate(grad)

    return _node(a.data + b.data, (a, b), _backward)


def sub(a: Tensor, b: Operand) -> Tensor:
    b = lift(b, a)

    def _backward(grad: np.ndarray) -> None:
        a.accumulate(grad)
        b.accumulate(-grad)

    return _node(a.data - b.data, (a, b), _backward)


def mul(a: Tensor, b: Operand) -> Tensor:
    b = lift(b, a)

    def _backward(grad: np.ndarray) -> None:
        a.accumulate(grad * b.data)
        b.accumulate(grad * a.data)

    return _node(a.data * b.data, (a, b), _backward)


def div(a: Tensor, b: Operand) -> Tensor:
    b = lift(b, a)

    def _backward(grad: np.ndarray) -> None:
        a.accumulate(grad / b.data)
        b.accumulate(-grad * a.data / (b.data * b.data))

    return _node(a.data / b.data, (a, b), _backward)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Batched matrix product over the last two axes. Both operands need at
    least two dimensions; leading axes broadcast."""
    if a.ndim < 2 or b.ndim < 2:
        raise errors.ContractError(
            f'matmul needs operands of rank >= 2, got {a.shape} @ {b.shape}')
    if a.shape[-1] != b.shape[-2]:
        raise errors.ConfigError(
            f'dimension mismatch: {a.shape} @ {b.shape}')

    def _backward(grad: np.ndarray) -> None:
        a.accumulate(np.matmul(grad, np.swapaxes(b.data, -1, -2)))
        b.accumulate(np.matmul(np.swapaxes(a.data, -1, -2), grad))

    return _node(np.matmul(a.data, b.data), (a, b), _backward)


def tanh(x: Tensor) -> Tensor:
    y = np.tanh(x.data)

    def _backward(grad: np.ndarray) -> None:
        x.accumulate(grad * (1.0 - y * y))

    return _node(y, (x,), _backward)


def _sigmoid(values: np.ndarray) -> np.ndarray:
    out = np.empty_like(values)
    pos = values >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-values[pos]))
    shifted = np.exp(values[~pos])
    out[~pos] = shifted / (1.0 + shifted)
    return out


def sigmoid(x: Tensor) -> Tensor:
    y = _sigmoid(x.data)

    def _backward(grad: np.ndarray) -> None:
        x.accumulate(grad * y * (1.0 - y))

    return _node(y, (x,), _backward)


def exp(x: Tensor) -> Tensor:
    y = np.exp(x.data)

    def _backward(grad: np.ndarray) -> None:
        x.accumulate(grad * y)

    return _node(y, (x,), _backward)


def log(x: Tensor) -> Tensor:
    def _backward(grad: np.ndarray) -> None:
        x.accumulate(grad / x.data)

    return _node(np.log(x.data), (x,), _backward)


def square(x: Tensor) -> Tensor:
    def _backward(grad: np.ndarray) -> None:
        x.accumulate(grad * 2.0 * x.data)

    return _node(x.data * x.data, (x,), _backward)


def _softmax(values: np.ndarray, axis: int) -> np.ndarray:
    shifted = values - values.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    y = _softmax(x.data, axis)

    def _backward(grad: np.ndarray) -> None:
        dot = (grad * y).sum(axis=axis, keepdims=True)
        x.accumulate(y * (grad - dot))

    return _node(y, (x,), _backward)


def log_softmax(x: Tensor, axis: int = -1) -> Tensor:
    """Fused log(softmax(x)) along `axis`."""
    peak = x.data.max(axis=axis, keepdims=True)
    shifted = x.data - peak
    lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    y = shifted - lse

    def _backward(grad: np.ndarray) -> None:
        total = grad.sum(axis=axis, keepdims=True)
        x.accumulate(grad - np.exp(y) * total)

    return _node(y, (x,), _backward)


def reduce_sum(
    x: Tensor,
    axis: int | None = None,
    keepdims: bool = False
) -> Tensor:
    # Accumulate in 64 bit, store in the input dtype.
    total = np.sum(x.data, axis=axis, dtype=np.float64, keepdims=keepdims)
    total = np.asarray(total).astype(x.data.dtype)

    def _backward(grad: np.ndarray) -> None:
        if axis is not None and not keepdims:
            grad = np.expand_dims(grad, axis)
        x.accumulate(np.broadcast_to(grad, x.data.shape))

    return _node(total, (x,), _backward)


def reduce_mean(
    x: Tensor,
    axis: int | None = None,
    keepdims: bool = False
) -> Tensor:
    count = x.data.size if axis is None else x.data.shape[axis]
    return mul(reduce_sum(x, axis, keepdims), 1.0 / count)


def reshape(x: Tensor, shape: tuple[int, ...]) -> Tensor:
    def _backward(grad: np.ndarray) -> None:
        x.accumulate(grad.reshape(x.data.shape))

    return _node(x.data.reshape(shape), (x,), _backward)


def transpose(x: Tensor, axes: tuple[int, ...]) -> Tensor:
    inverse = tuple(np.argsort(axes))

    def _backward(grad: np.ndarray) -> None:
        x.accumulate(np.transpose(grad, inverse))

    return _node(np.transpose(x.data, axes), (x,), _backward)


def getitem(x: Tensor, index: t.Any) -> Tensor:
    def _backward(grad: np.ndarray) -> None:
        full = np.zeros_like(x.data)
        np.add.at(full, index, grad)
        x.accumulate(full)

    return _node(x.data[index], (x,), _backward)


def embedding(table: Tensor, ids: np.ndarray) -> Tensor:
    """Row lookup `table[ids]`; repeated ids accumulate their gradients."""
    ids = np.asarray(ids, dtype=np.int64)

    def _backward(grad: np.ndarray) -> None:
        full = np.zeros_like(table.data)
        np.add.at(full, ids, grad)
        table.accumulate(full)

    return _node(table.data[ids], (table,), _backward)


def gather_last(x: Tensor, ids: np.ndarray) -> Tensor:
    """Pick one entry per row along the last axis: out[..] = x[.., ids[..]]."""
    ids = np.asarray(ids, dtype=np.int64)[..., None]

    def _backward(grad: np.ndarray) -> None:
        full = np.zeros_like(x.data)
        np.put_along_axis(full, ids, grad[..., None], axis=-1)
        x.accumulate(full)

    out = np.take_along_axis(x.data, ids, axis=-1)[..., 0]
    return _node(out, (x,), _backward)


def concat(tensors: t.Sequence[Tensor], axis: int = 0) -> Tensor:
    sizes = [tensor.shape[axis] for tensor in tensors]
    splits = np.cumsum(sizes)[:-1]

    def _backward(grad: np.ndarray) -> None:
        for tensor, part in zip(tensors, np.split(grad, splits, axis=axis)):
            tensor.accumulate(part)

    data = np.concatenate([tensor.data for tensor in tensors], axis=axis)
    return _node(data, tuple(tensors), _backward)


def minimum(a: Tensor, b: Operand) -> Tensor:
    """Elementwise minimum; ties route the gradient to `a`."""
    b = lift(b, a)
    take_a = a.data <= b.data

    def _backward(grad: np.ndarray) -> None:
        a.accumulate(np.where(take_a, grad, 0.0))
        b.accumulate(np.where(take_a, 0.0, grad))

    return _node(np.minimum(a.data, b.data), (a, b), _backward)


def clip(x: Tensor, low: float, high: float) -> Tensor:
    inside = (x.data >= low) & (x.data <= high)

    def _backward(grad: np.ndarray) -> None:
        x.accumulate(np.where(inside, grad, 0.0))

    return _node(np.clip(x.data, low, high), (x,), _backward)
