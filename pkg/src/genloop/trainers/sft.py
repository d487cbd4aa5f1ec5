"""Supervised next-token training of the policy on reward filtered data."""
import logging
import typing as t

import numpy as np
import pydantic

from genloop import errors
from genloop import neuralcore
from genloop import policy as policy_
from genloop import synthworld
from genloop.neuralcore import tensor

logger = logging.getLogger(__name__)


class SftConfig(pydantic.BaseModel):
    model_config = pydantic.ConfigDict(frozen=True)

    epochs: int = pydantic.Field(default=30, gt=0)
    batch_size: int = pydantic.Field(default=32, gt=0)
    lr: float = pydantic.Field(default=3e-3, gt=0)
    seed: int = pydantic.Field(default=1, gt=0)
    rationale: bool = True
    """Train on the THINK span too. False strips it from every answer."""


def training_answer(
    item: synthworld.VqaTriplet,
    rationale: bool = True,
) -> tuple[str, ...]:
    return item.answer if rationale else synthworld.strip_rationale(
        item.answer)


def sft_loss(
    net: policy_.PolicyNet,
    prompts: t.Sequence[policy_.Prompt],
    answers: t.Sequence[t.Sequence[str]],
) -> tensor.Tensor:
    """Negative mean sequence log-probability of a batch."""
    logp, mask = policy_.token_logprobs(net, prompts, answers)
    return -((logp * mask).sum() * (1.0 / len(answers)))


def run_sft(
    net: policy_.PolicyNet,
    data: t.Sequence[synthworld.VqaTriplet],
    config: SftConfig,
) -> tuple[policy_.PolicyNet, list[float]]:
    """Fit the policy to the answers in `data`.

    Data is ordered by sample key before the seeded shuffles, so the same
    set trains identically whatever order it arrives in.

    Returns:
        A trained copy of `net` and the mean negative log-likelihood per
        sequence of every epoch.

    Raises:
        errors.ContractError: when `data` is empty.
        errors.TrainingError: on a non-finite loss.
    """
    if not data:
        raise errors.ContractError('no SFT data')
    trained = net.copy()
    ordered = sorted(data, key=lambda item: item.key)
    prompts = [(item.image, item.question.tokens) for item in ordered]
    answers = [training_answer(item, config.rationale) for item in ordered]
    rng = np.random.default_rng([config.seed, 0x5F7])
    adam = neuralcore.AdamConfig(lr=config.lr)
    losses = []
    for epoch in range(config.epochs):
        order = rng.permutation(len(ordered))
        total = 0.0
        for start in range(0, len(order), config.batch_size):
            rows = order[start:start + config.batch_size]
            trained.params.zero_grad()
            loss = sft_loss(
                trained, [prompts[i] for i in rows], [answers[i] for i in rows])
            value = loss.item()
            if not np.isfinite(value):
                raise errors.TrainingError(
                    f'non-finite SFT loss at epoch {epoch}')
            loss.backward()
            neuralcore.adam(trained.params, adam)
            total += value * len(rows)
        losses.append(total / len(ordered))
        logger.debug('sft epoch %d loss %.4f', epoch, losses[-1])
    logger.info('sft finished on %d samples, final loss %.4f',
                len(ordered), losses[-1])
    return trained, losses
