import typing as t

import numpy as np
import pydantic

from genloop import errors
from genloop.neuralcore import params as params_
from genloop.neuralcore import tensor

Activation: t.TypeAlias = t.Literal['tanh', 'sigmoid', 'linear']


class LayerSpec(pydantic.BaseModel):
    """Architecture descriptor of a dense net. `widths` lists the input
    width followed by every layer's output width; `activations` holds one
    nonlinearity per layer."""
    model_config = pydantic.ConfigDict(frozen=True)

    widths: tuple[int, ...]
    activations: tuple[Activation, ...]
    prefix: str = 'mlp'

    @pydantic.model_validator(mode='after')
    def _check(self) -> 'LayerSpec':
        if len(self.widths) < 2:
            raise ValueError('need an input width and at least one layer')
        if any(w <= 0 for w in self.widths):
            raise ValueError('widths must be positive')
        if len(self.activations) != len(self.widths) - 1:
            raise ValueError('one activation per layer is required')
        return self

    def weight(self, layer: int) -> str:
        return f'{self.prefix}.{layer}.weight'

    def bias(self, layer: int) -> str:
        return f'{self.prefix}.{layer}.bias'


def init_mlp(
    spec: LayerSpec,
    rng: np.random.Generator,
    scale: float = 1.0,
) -> dict[str, np.ndarray]:
    """Draw weights with std `scale / sqrt(fan_in)` and zero biases."""
    arrays: dict[str, np.ndarray] = {}
    for layer, (fan_in, fan_out) in enumerate(
            zip(spec.widths[:-1], spec.widths[1:])):
        std = scale / np.sqrt(fan_in)
        arrays[spec.weight(layer)] = rng.normal(
            0.0, std, size=(fan_in, fan_out)).astype(np.float32)
        arrays[spec.bias(layer)] = np.zeros(fan_out, dtype=np.float32)
    return arrays


def activate(x: tensor.Tensor, kind: Activation) -> tensor.Tensor:
    if kind == 'tanh':
        return tensor.tanh(x)
    if kind == 'sigmoid':
        return tensor.sigmoid(x)
    return x


def linear(
    x: tensor.Tensor,
    weight: tensor.Tensor,
    bias: tensor.Tensor | None = None,
) -> tensor.Tensor:
    out = tensor.matmul(x, weight)
    if bias is not None:
        out = out + bias
    return out


def mlp_forward(
    params: params_.ParamSet,
    inputs: tensor.Tensor | np.ndarray,
    spec: LayerSpec,
) -> tensor.Tensor:
    """Run a dense net described by `spec` on a vector or a batch of rows.

    Args:
        params: Parameters holding `spec.weight(i)` and `spec.bias(i)`.
        inputs: A vector of width `spec.widths[0]` or a `(batch, width)`
            matrix.
        spec: The architecture descriptor.

    Raises:
        errors.ConfigError: when the input width does not match the first
            layer or a parameter is missing.

    Returns:
        The output of the final layer, vector in, vector out.
    """
    x = inputs if isinstance(inputs, tensor.Tensor) else tensor.Tensor(inputs)
    if x.shape[-1] != spec.widths[0]:
        raise errors.ConfigError(
            f'input width {x.shape[-1]} does not match layer width '
            f'{spec.widths[0]}')
    vector = x.ndim == 1
    if vector:
        x = x.reshape(1, x.shape[0])
    for layer, kind in enumerate(spec.activations):
        try:
            weight = params[spec.weight(layer)]
            bias = params[spec.bias(layer)]
        except KeyError as ex:
            raise errors.ConfigError(f'missing parameter {ex}') from ex
        x = activate(linear(x, weight, bias), kind)
    if vector:
        x = x.reshape(spec.widths[-1])
    return x
