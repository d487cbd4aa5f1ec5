"""Group relative policy optimization under a composite reward: the
weighted reward model score of a sampled answer plus a bonus when its
extracted value matches the reference answer."""
import logging
import typing as t

import numpy as np
import pydantic

from genloop import errors
from genloop import neuralcore
from genloop import policy as policy_
from genloop import rewardmodel
from genloop import synthworld
from genloop.neuralcore import tensor
from genloop.synthworld import answer as answer_
from genloop.synthworld import oracle

logger = logging.getLogger(__name__)

AdvantageMode: t.TypeAlias = t.Literal['std', 'mean_only']
Scorer: t.TypeAlias = t.Union[
    rewardmodel.RewardNet, t.Callable[[synthworld.VqaTriplet], float]]


class GrpoConfig(pydantic.BaseModel):
    model_config = pydantic.ConfigDict(frozen=True)

    group_size: int = pydantic.Field(default=8, ge=2)
    clip_ratio: float = pydantic.Field(default=0.2, gt=0.0, lt=1.0)
    kl_coef: float = pydantic.Field(default=0.04, ge=0.0)
    alpha: float = pydantic.Field(default=0.8, ge=0.0)
    beta: float = pydantic.Field(default=0.2, ge=0.0)
    temperature: float = pydantic.Field(default=1.0, ge=0.0)
    steps: int = pydantic.Field(default=100, gt=0)
    prompts_per_step: int = pydantic.Field(default=8, gt=0)
    lr: float = pydantic.Field(default=5e-4, gt=0)
    seed: int = 2
    adv_eps: float = pydantic.Field(default=1e-6, gt=0.0)
    advantage_mode: AdvantageMode = 'std'
    eval_every: int = pydantic.Field(default=0, ge=0)
    """Greedy validation accuracy cadence in steps; 0 disables it."""


class RewardFn(t.Protocol):
    """Rewards of a group of answers to one prompt. `item` holds the
    prompt and its oracle answer."""

    def __call__(
        self,
        item: synthworld.VqaTriplet,
        answers: t.Sequence[t.Sequence[str]],
    ) -> list[float]:
        ...


def _match(answer: t.Sequence[str], reference: t.Sequence[str]) -> bool:
    value = answer_.extract_answer(answer)
    return value != answer_.INVALID and (
        value == answer_.extract_answer(reference))


def composite_reward(
    rm: Scorer,
    item: synthworld.VqaTriplet,
    answer: t.Sequence[str],
    reference: t.Sequence[str],
    alpha: float = 0.8,
    beta: float = 0.2,
) -> float:
    """Weighted reward score plus a bonus for matching the reference.

    alpha * rm(item, answer)
    + beta * [extract(answer) == extract(reference)]

    The indicator needs both extracts to be valid.
    """
    candidate = item.with_answer(answer, 'policy')
    if isinstance(rm, rewardmodel.RewardNet):
        value = rewardmodel.score(rm, candidate)
    else:
        value = rm(candidate)
    return alpha * value + beta * float(_match(answer, reference))


class CompositeReward:
    """The composite reward of a whole group, scored in one batch."""

    def __init__(
        self,
        rm: rewardmodel.RewardNet,
        alpha: float = 0.8,
        beta: float = 0.2,
    ) -> None:
        self.rm = rm
        self.alpha = alpha
        self.beta = beta

    def __call__(
        self,
        item: synthworld.VqaTriplet,
        answers: t.Sequence[t.Sequence[str]],
    ) -> list[float]:
        reference = oracle.compose_answer(item.oracle_value())
        scores = rewardmodel.score_batch(
            self.rm, [item.with_answer(a, 'policy') for a in answers])
        return [
            self.alpha * float(s) + self.beta * float(_match(a, reference))
            for s, a in zip(scores, answers)
        ]


def group_advantages(
    rewards: t.Sequence[float],
    eps: float = 1e-6,
    mode: AdvantageMode = 'std',
) -> np.ndarray:
    """Standardize rewards within their group.

    `std` returns (r - mean) / (std + eps) with the population std, and all
    zeros when the std is below eps. `mean_only` subtracts the mean.

    Raises:
        errors.ContractError: for groups of fewer than two rewards.
    """
    values = np.asarray(rewards, dtype=np.float64)
    if values.size < 2:
        raise errors.ContractError('a group needs at least two rewards')
    centered = values - values.mean()
    if mode == 'mean_only':
        return centered
    std = values.std()
    if std < eps:
        return np.zeros_like(values)
    return centered / (std + eps)


class GroupRollout(pydantic.BaseModel):
    """G completions of one prompt with their rewards and advantages."""
    model_config = pydantic.ConfigDict(frozen=True)

    item: synthworld.VqaTriplet
    completions: tuple[policy_.Completion, ...]
    rewards: tuple[float, ...]
    advantages: tuple[float, ...]

    @pydantic.model_validator(mode='after')
    def _check(self) -> 'GroupRollout':
        size = len(self.completions)
        if not len(self.rewards) == len(self.advantages) == size:
            raise ValueError('rollout fields must hold one entry per '
                             'completion')
        return self

    @property
    def prompt(self) -> policy_.Prompt:
        return self.item.image, self.item.question.tokens


def collect_rollout(
    net: policy_.PolicyNet,
    item: synthworld.VqaTriplet,
    reward_fn: RewardFn,
    config: GrpoConfig,
    seed: int,
) -> GroupRollout:
    """Sample a group from `net` for one prompt and score it."""
    seeds = np.random.default_rng(seed).integers(
        0, 2**62, size=config.group_size)
    completions = policy_.sample_group(
        net, item.image, item.question.tokens, config.temperature,
        [int(s) for s in seeds])
    rewards = reward_fn(item, [c.tokens for c in completions])
    advantages = group_advantages(
        rewards, config.adv_eps, config.advantage_mode)
    return GroupRollout(
        item=item,
        completions=tuple(completions),
        rewards=tuple(float(r) for r in rewards),
        advantages=tuple(float(a) for a in advantages),
    )


class LossParts(t.NamedTuple):
    loss: tensor.Tensor
    surrogate: float
    kl: float


def rollout_batch(
    rollouts: t.Sequence[GroupRollout],
) -> tuple[list[policy_.Prompt], list[tuple[str, ...]], np.ndarray]:
    """Flatten rollouts into prompts, answers and per-answer advantages."""
    prompts, answers, advantages = [], [], []
    for rollout in rollouts:
        for completion, advantage in zip(
                rollout.completions, rollout.advantages):
            prompts.append(rollout.prompt)
            answers.append(completion.tokens)
            advantages.append(advantage)
    return prompts, answers, np.asarray(advantages, dtype=np.float64)


def grpo_loss(
    net: policy_.PolicyNet,
    ref: policy_.PolicyNet,
    rollouts: t.Sequence[GroupRollout],
    config: GrpoConfig,
    old_logprobs: np.ndarray | None = None,
) -> LossParts:
    """Clipped surrogate plus KL penalty, averaged over every sampled token.

    The ratio compares `net` with the snapshot that sampled the rollouts.
    Without `old_logprobs` the snapshot is `net` itself, as it is for the
    single update made per rollout batch, and every ratio is exactly one.
    The KL term uses exp(q - p) - (q - p) - 1 with p the new and q the
    reference log-probability of each token.

    Args:
        net: The policy being optimized.
        ref: The frozen reference policy.
        rollouts: Sampled groups.
        config: Clip ratio and KL coefficient.
        old_logprobs: Optional `(answers, tokens)` snapshot log-probs laid
            out like the flattened rollouts.

    Raises:
        errors.TrainingError: when a probability ratio is not finite.
    """
    prompts, answers, advantages = rollout_batch(rollouts)
    new, mask = policy_.token_logprobs(net, prompts, answers)
    dtype = new.data.dtype
    ref_lp, _ = policy_.token_logprobs(ref, prompts, answers)
    old = new.data if old_logprobs is None else old_logprobs
    ratio = tensor.exp(new - tensor.Tensor(np.asarray(old, dtype=dtype)))
    if not np.all(np.isfinite(ratio.data)):
        raise errors.TrainingError('non-finite probability ratio')
    advantage = tensor.Tensor(advantages.astype(dtype)[:, None])
    eps = config.clip_ratio
    surrogate = tensor.minimum(
        ratio * advantage,
        tensor.clip(ratio, 1.0 - eps, 1.0 + eps) * advantage)
    diff = tensor.Tensor(ref_lp.data.astype(dtype)) - new
    kl = tensor.exp(diff) - diff - 1.0
    count = 1.0 / float(mask.sum())
    surrogate_mean = (surrogate * mask).sum() * count
    kl_mean = (kl * mask).sum() * count
    loss = kl_mean * config.kl_coef - surrogate_mean
    return LossParts(loss, surrogate_mean.item(), kl_mean.item())


class GrpoStep(pydantic.BaseModel):
    """One row of the GRPO training trace."""
    step: int
    mean_reward: float
    loss: float
    kl: float
    accuracy: float | None = None


def greedy_accuracy(
    net: policy_.PolicyNet,
    items: t.Sequence[synthworld.VqaTriplet],
) -> float:
    answers = policy_.greedy_answers(
        net, [(item.image, item.question.tokens) for item in items])
    hits = sum(
        answer_.extract_answer(answer) == item.oracle_value()
        for answer, item in zip(answers, items))
    return hits / len(items)


def run_grpo(
    net: policy_.PolicyNet,
    ref: policy_.PolicyNet,
    reward_fn: RewardFn,
    prompts: t.Sequence[synthworld.VqaTriplet],
    config: GrpoConfig,
    val: t.Sequence[synthworld.VqaTriplet] = (),
) -> tuple[policy_.PolicyNet, list[GrpoStep]]:
    """Optimize the policy with one Adam step per rollout batch.

    `ref` is read only. Every step samples `prompts_per_step` prompts, a
    group of completions for each, and updates on the combined loss.

    Returns:
        A trained copy of `net` and the per-step trace.
    """
    if not prompts:
        raise errors.ContractError('no GRPO prompts')
    trained = net.copy()
    adam = neuralcore.AdamConfig(lr=config.lr)
    rng = np.random.default_rng([config.seed, 0x6A0])
    trace = []
    for step in range(config.steps):
        size = min(config.prompts_per_step, len(prompts))
        picks = rng.choice(len(prompts), size=size, replace=False)
        rollouts = [
            collect_rollout(
                trained, prompts[int(i)], reward_fn, config,
                seed=int(rng.integers(2**62)))
            for i in picks
        ]
        trained.params.zero_grad()
        parts = grpo_loss(trained, ref, rollouts, config)
        if not np.isfinite(parts.loss.item()):
            raise errors.TrainingError(f'non-finite GRPO loss at step {step}')
        parts.loss.backward()
        neuralcore.adam(trained.params, adam)
        accuracy = None
        if val and config.eval_every and (step + 1) % config.eval_every == 0:
            accuracy = greedy_accuracy(trained, val)
        trace.append(GrpoStep(
            step=step,
            mean_reward=float(np.mean([r for ro in rollouts
                                       for r in ro.rewards])),
            loss=parts.loss.item(),
            kl=parts.kl,
            accuracy=accuracy,
        ))
        logger.debug('grpo step %d reward %.3f', step, trace[-1].mean_reward)
    return trained, trace
