import typing as t

import numpy as np
import pydantic

from genloop import errors
from genloop.neuralcore import params as params_


class AdamConfig(pydantic.BaseModel):
    """Adam hyperparameters. No published values exist for this setup; the
    defaults are the usual ones."""
    model_config = pydantic.ConfigDict(frozen=True)

    lr: float = pydantic.Field(default=1e-3, gt=0)
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = pydantic.Field(default=1e-8, gt=0)

    @pydantic.field_validator('betas')
    @classmethod
    def _check_betas(cls, value: tuple[float, float]) -> tuple[float, float]:
        if not all(0.0 <= b < 1.0 for b in value):
            raise ValueError('betas must lie in [0, 1)')
        return value


def adam_step(
    params: params_.ParamSet,
    grads: t.Mapping[str, np.ndarray],
    lr: float = 1e-3,
    betas: tuple[float, float] = (0.9, 0.999),
    eps: float = 1e-8,
) -> params_.ParamSet:
    """Apply one bias-corrected Adam update in place.

    Args:
        params: The parameters to update; moments live on the set.
        grads: Gradient per parameter name. Missing names count as zero.
        lr: Step size.
        betas: Decay rates of the first and second moments.
        eps: Denominator guard.

    Raises:
        errors.TrainingError: when a gradient holds NaN or Inf.
        errors.ContractError: when a gradient shape differs from its
            parameter.

    Returns:
        The same parameter set, with the step counter incremented.
    """
    for name, grad in grads.items():
        if name not in params:
            raise errors.ContractError(f'gradient for unknown param {name}')
        if grad.shape != params[name].shape:
            raise errors.ContractError(
                f'gradient shape {grad.shape} does not match parameter '
                f'{name} {params[name].shape}')
        if not np.all(np.isfinite(grad)):
            raise errors.TrainingError(
                f'non-finite gradient for parameter {name}')
    beta1, beta2 = betas
    params.step += 1
    correction1 = 1.0 - beta1 ** params.step
    correction2 = 1.0 - beta2 ** params.step
    for name in params.names:
        param = params[name]
        grad = np.asarray(
            grads.get(name, np.zeros_like(param.data)), dtype=np.float64)
        first, second = params.moments.get(
            name, (np.zeros_like(param.data), np.zeros_like(param.data)))
        first = beta1 * first.astype(np.float64) + (1.0 - beta1) * grad
        second = beta2 * second.astype(np.float64) + (1.0 - beta2) * grad**2
        update = lr * (first / correction1) / (
            np.sqrt(second / correction2) + eps)
        param.data = (param.data - update).astype(param.data.dtype)
        params.moments[name] = (
            first.astype(param.data.dtype), second.astype(param.data.dtype))
    return params


def adam(
    params: params_.ParamSet,
    config: AdamConfig,
) -> params_.ParamSet:
    """Step `params` with its own collected gradients."""
    return adam_step(
        params, params.grads(), config.lr, config.betas, config.eps)
