"""Loop state, the per-run context and the set operations of one iteration:
threshold filtering, overlap removal and corpus merging."""
import math
import typing as t

import numpy as np
import pydantic

from genloop import config as config_
from genloop import errors
from genloop import generator
from genloop import gradecorpus
from genloop import policy as policy_
from genloop import rewardmodel
from genloop import synthworld

STAGES = (
    'generate', 'score', 'filter', 'merge', 'sft', 'grpo',
    'preferences', 'reward', 'generator', 'evaluate', 'init',
)
"""Every stage a seed can be derived for, in loop order."""

Stage: t.TypeAlias = t.Literal[
    'generate', 'score', 'filter', 'merge', 'sft', 'grpo',
    'preferences', 'reward', 'generator', 'evaluate', 'init',
]


def stage_seed(master: int, iteration: int, stage: Stage) -> int:
    """A positive seed for `stage` of `iteration`, derived from the master
    seed only."""
    sequence = np.random.SeedSequence(
        [master, iteration, STAGES.index(stage)])
    return int(sequence.generate_state(1, dtype=np.uint32)[0]) + 1


class MetricsRow(pydantic.BaseModel):
    """What one iteration did and how well the policy it produced does on
    the test split."""
    model_config = pydantic.ConfigDict(frozen=True)

    iteration: int = pydantic.Field(ge=0)
    dgen_size: int
    dcand_size: int
    dhigh_size: int
    dpref_size: int
    sft_loss: float | None = None
    grpo_reward: float | None = None
    rm_pref_mse: float | None = None
    """Squared error of the updated reward model on this iteration's
    preference records."""
    accuracy: float
    balanced_accuracy: float
    macro_f1: float
    auroc: float | None = None
    generator_updates: int


class LoopState(pydantic.BaseModel):
    """Everything iteration t hands to iteration t + 1. States are never
    mutated; every stage returns a copy."""
    model_config = pydantic.ConfigDict(
        frozen=True, arbitrary_types_allowed=True)

    iteration: int = pydantic.Field(default=0, ge=0)
    d_seed: tuple[synthworld.VqaTriplet, ...]
    d_gen: tuple[synthworld.VqaTriplet, ...]
    d_cand: tuple[synthworld.VqaTriplet, ...] = ()
    d_high: tuple[synthworld.VqaTriplet, ...] = ()
    d_pref: tuple[rewardmodel.PreferenceRecord, ...] = ()
    policy: policy_.PolicyNet
    rm: rewardmodel.RewardNet
    gen: generator.GenState
    history: tuple[MetricsRow, ...] = ()

    def __repr__(self) -> str:
        return (f'<LoopState t={self.iteration} '
                f'dgen={len(self.d_gen)} dhigh={len(self.d_high)}>')

    def advance(self, **update: t.Any) -> 'LoopState':
        return self.model_copy(update=update)


class LoopContext:
    """Read-only inputs shared by every iteration of a run, rebuilt from
    the configuration alone: the oracle splits, the graded replay corpus
    and the generator."""

    def __init__(self, config: config_.LoopConfig) -> None:
        self.config = config
        self.split = synthworld.make_split(config.split, config.seed)
        self.replay = gradecorpus.build_graded_dataset(
            self.split.train, config.grade,
            stage_seed(config.seed, 0, 'init'))
        self.generator = generator.Generator(config.generator)
        self.summaries: dict[int, dict[str, dict[str, t.Any]]] = {}
        """Stage summaries by iteration, filled from bus events."""

    def __repr__(self) -> str:
        return f'<LoopContext {self.config.name}>'


def initial_state(context: LoopContext) -> LoopState:
    """Iteration 0: the reward model trained on the graded corpus, D_seed
    scored by it, a policy that has seen nothing and a uniform generator.
    """
    config = context.config
    seed = stage_seed(config.seed, 0, 'init')
    rm, _ = rewardmodel.train_rm(
        rewardmodel.RewardNet.create(config.reward, seed),
        context.replay, config.reward.epochs, config.reward.lr, seed)
    seeds = context.split.train[:config.seed_size]
    scores = rewardmodel.score_batch(rm, seeds)
    d_seed = tuple(
        item.model_copy(update={'score': float(s), 'iteration': 0})
        for item, s in zip(seeds, scores))
    return LoopState(
        iteration=0,
        d_seed=d_seed,
        d_gen=d_seed,
        policy=policy_.PolicyNet.create(config.policy, seed),
        rm=rm,
        gen=generator.GenState.uniform(
            tuple(s.kind for s in config.generator.strategies)),
    )


def score_candidates(
    rm: rewardmodel.RewardNet,
    candidates: t.Sequence[synthworld.VqaTriplet],
) -> tuple[synthworld.VqaTriplet, ...]:
    scores = rewardmodel.score_batch(rm, candidates)
    return tuple(
        item.model_copy(update={'score': float(s)})
        for item, s in zip(candidates, scores))


def filter_high(
    candidates: t.Sequence[synthworld.VqaTriplet],
    tau: float,
) -> tuple[synthworld.VqaTriplet, ...]:
    """Keep the candidates scoring strictly above `tau`.

    Raises:
        errors.ContractError: when a candidate carries no score.
    """
    for item in candidates:
        if item.score is None or not math.isfinite(item.score):
            raise errors.ContractError(f'unscored candidate {item.key}')
    return tuple(item for item in candidates if item.score > tau)


def dedup(
    d_high: t.Sequence[synthworld.VqaTriplet],
    d_gen: t.Sequence[synthworld.VqaTriplet],
) -> tuple[synthworld.VqaTriplet, ...]:
    """D_high without samples whose key is already in D_gen or earlier in
    D_high. Order is kept."""
    seen = {item.key for item in d_gen}
    kept = []
    for item in d_high:
        if item.key in seen:
            continue
        seen.add(item.key)
        kept.append(item)
    return tuple(kept)


def merge_corpus(
    d_gen: t.Sequence[synthworld.VqaTriplet],
    d_high: t.Sequence[synthworld.VqaTriplet],
    iteration: int,
) -> tuple[synthworld.VqaTriplet, ...]:
    """Append D_high to D_gen, tagging each admitted sample with the
    iteration it entered at."""
    admitted = (
        item.model_copy(update={'iteration': iteration}) for item in d_high)
    return (*d_gen, *admitted)
