import copy
import hashlib
import typing as t

import numpy as np

from genloop.neuralcore import tensor


class ParamSet:
    """A named collection of trainable tensors together with the optimizer
    state that belongs to them. The architecture descriptor is a JSON
    compatible mapping stored in checkpoints so a net can be rebuilt."""

    def __init__(
        self,
        arrays: t.Mapping[str, np.ndarray],
        descriptor: t.Mapping[str, t.Any] | None = None,
    ) -> None:
        self.tensors: dict[str, tensor.Tensor] = {
            name: tensor.Tensor(np.array(value), requires_grad=True)
            for name, value in arrays.items()
        }
        self.descriptor: dict[str, t.Any] = dict(descriptor or {})
        self.step: int = 0
        """Number of optimizer updates applied so far."""
        self.moments: dict[str, tuple[np.ndarray, np.ndarray]] = {}
        """First and second Adam moments per parameter name."""

    def __getitem__(self, name: str) -> tensor.Tensor:
        return self.tensors[name]

    def __contains__(self, name: str) -> bool:
        return name in self.tensors

    def __repr__(self) -> str:
        return f'<ParamSet params={len(self.tensors)} step={self.step}>'

    @property
    def names(self) -> list[str]:
        return list(self.tensors)

    @property
    def dtype(self) -> np.dtype:
        return next(iter(self.tensors.values())).data.dtype

    def size(self) -> int:
        return sum(p.data.size for p in self.tensors.values())

    def zero_grad(self) -> None:
        for param in self.tensors.values():
            param.grad = None

    def grads(self) -> dict[str, np.ndarray]:
        """Collected gradients; parameters the loss never touched get
        zeros."""
        return {
            name: (p.grad if p.grad is not None else np.zeros_like(p.data))
            for name, p in self.tensors.items()
        }

    def arrays(self) -> dict[str, np.ndarray]:
        return {name: p.data for name, p in self.tensors.items()}

    def copy(self) -> 'ParamSet':
        clone = ParamSet(
            {name: p.data.copy() for name, p in self.tensors.items()},
            copy.deepcopy(self.descriptor))
        clone.step = self.step
        clone.moments = {
            name: (m.copy(), v.copy()) for name, (m, v) in self.moments.items()
        }
        return clone

    def astype(self, dtype: t.Any) -> 'ParamSet':
        """A copy with every parameter cast to `dtype`. Optimizer state is
        not carried over."""
        return ParamSet(
            {name: p.data.astype(dtype) for name, p in self.tensors.items()},
            copy.deepcopy(self.descriptor))

    def checksum(self) -> str:
        digest = hashlib.sha256()
        for name in sorted(self.tensors):
            digest.update(name.encode())
            digest.update(np.ascontiguousarray(self.tensors[name].data))
        return digest.hexdigest()
