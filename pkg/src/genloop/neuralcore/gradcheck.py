import typing as t

import numpy as np

from genloop.neuralcore import params as params_
from genloop.neuralcore import tensor

LossFn: t.TypeAlias = t.Callable[[params_.ParamSet], tensor.Tensor]

# Five-point central stencil: f'(x) ~ (f(-2h) - 8f(-h) + 8f(h) - f(2h)) / 12h
_OFFSETS = (-2.0, -1.0, 1.0, 2.0)
_WEIGHTS = (1.0, -8.0, 8.0, -1.0)


def numeric_gradient(
    params: params_.ParamSet,
    loss_fn: LossFn,
    name: str,
    index: tuple[int, ...],
    step: float,
) -> float:
    data = params[name].data
    original = data[index]
    total = 0.0
    for offset, weight in zip(_OFFSETS, _WEIGHTS):
        data[index] = original + offset * step
        total += weight * loss_fn(params).item()
    data[index] = original
    return total / (12.0 * step)


def finite_diff_check(
    params: params_.ParamSet,
    loss_fn: LossFn,
    step: float = 1e-3,
    max_entries: int | None = None,
    seed: int = 0,
) -> float:
    """Compare tape gradients against central finite differences.

    Both are evaluated on a float64 copy of `params`, so the result
    measures the analytic gradient rather than rounding.

    Args:
        params: The parameters to check; left untouched.
        loss_fn: Builds a scalar loss from a parameter set. Must be
            deterministic.
        step: Finite difference step.
        max_entries: When set, check a seeded random subset of this many
            entries per parameter.
        seed: Seed of the subset selection.

    Returns:
        The maximum over checked entries of
        |analytic - numeric| / (|numeric| + 1e-8).
    """
    wide = params.astype(np.float64)
    wide.zero_grad()
    loss_fn(wide).backward()
    analytic = {name: grad.copy() for name, grad in wide.grads().items()}
    rng = np.random.default_rng(seed)
    worst = 0.0
    for name in wide.names:
        shape = wide[name].shape
        indices = list(np.ndindex(*shape))
        if max_entries is not None and len(indices) > max_entries:
            picks = rng.choice(len(indices), size=max_entries, replace=False)
            indices = [indices[i] for i in sorted(picks)]
        for index in indices:
            numeric = numeric_gradient(wide, loss_fn, name, index, step)
            error = abs(analytic[name][index] - numeric) / (
                abs(numeric) + 1e-8)
            worst = max(worst, float(error))
    return worst
