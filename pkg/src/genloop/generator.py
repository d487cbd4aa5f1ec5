"""The candidate generator: quality strategies over a categorical sampling
distribution that is reweighted by reward feedback."""
import collections
import logging
import math
import typing as t

import numpy as np
import pydantic

from genloop import errors
from genloop import synthworld
from genloop.synthworld import oracle
from genloop.synthworld import question as question_
from genloop.synthworld import vocab

logger = logging.getLogger(__name__)

StrategyKind: t.TypeAlias = t.Literal[
    'direct', 'step_by_step', 'meta_cognitive']
RationalePolicy: t.TypeAlias = t.Literal[
    'none', 'oracle-trace', 'oracle-trace-with-self-check']
Cell: t.TypeAlias = tuple[str, str, str]
"""(strategy, template id, modality)."""

RATIONALE_POLICIES: dict[str, RationalePolicy] = {
    'direct': 'none',
    'step_by_step': 'oracle-trace',
    'meta_cognitive': 'oracle-trace-with-self-check',
}
DEFAULT_CORRECTNESS: dict[str, float] = {
    'direct': 0.6,
    'step_by_step': 0.75,
    'meta_cognitive': 0.9,
}


class GenStrategy(pydantic.BaseModel):
    """A prompting strategy reduced to how often it answers correctly and
    how it explains itself."""
    model_config = pydantic.ConfigDict(frozen=True)

    kind: StrategyKind
    p: float = pydantic.Field(ge=0.0, le=1.0)

    @property
    def rationale(self) -> RationalePolicy:
        return RATIONALE_POLICIES[self.kind]


class GeneratorConfig(pydantic.BaseModel):
    model_config = pydantic.ConfigDict(frozen=True)

    strategies: tuple[GenStrategy, ...] = tuple(
        GenStrategy(kind=kind, p=p) for kind, p in DEFAULT_CORRECTNESS.items())
    eta: float = pydantic.Field(default=0.1, ge=0.0)
    update_every: int = pydantic.Field(default=1, ge=1)
    """Self-update cadence in loop iterations."""

    @pydantic.model_validator(mode='after')
    def _check(self) -> 'GeneratorConfig':
        kinds = [s.kind for s in self.strategies]
        if len(set(kinds)) != len(kinds):
            raise ValueError('strategies must be distinct')
        by_kind = {s.kind: s.p for s in self.strategies}
        ordered = [by_kind[k] for k in DEFAULT_CORRECTNESS if k in by_kind]
        if any(a >= b for a, b in zip(ordered, ordered[1:])):
            raise ValueError(
                'correctness must increase from direct to step_by_step to '
                'meta_cognitive')
        return self

    def strategy(self, kind: str) -> GenStrategy:
        for strategy in self.strategies:
            if strategy.kind == kind:
                return strategy
        raise errors.ConfigError(f'unknown strategy {kind!r}')


class GenState(pydantic.BaseModel):
    """Categorical weights over (strategy, template, modality) cells."""
    model_config = pydantic.ConfigDict(frozen=True)

    cells: tuple[Cell, ...]
    weights: tuple[float, ...]
    updates: int = 0

    @pydantic.model_validator(mode='after')
    def _check(self) -> 'GenState':
        if len(self.cells) != len(self.weights) or not self.cells:
            raise ValueError('one weight per cell is required')
        if any(w <= 0.0 for w in self.weights):
            raise ValueError('weights must be positive')
        if abs(math.fsum(self.weights) - 1.0) > 1e-9:
            raise ValueError('weights must sum to 1')
        return self

    @classmethod
    def uniform(
        cls,
        strategies: t.Sequence[str] = tuple(DEFAULT_CORRECTNESS),
        templates: t.Sequence[str] = tuple(question_.TEMPLATES),
        modalities: t.Sequence[str] = vocab.MODALITIES,
    ) -> 'GenState':
        cells = tuple(
            (s, tid, m) for s in strategies for tid in templates
            for m in modalities)
        return cls(cells=cells, weights=(1.0 / len(cells),) * len(cells))

    def weight(self, cell: Cell) -> float:
        return self.weights[self.cells.index(cell)]


def render_rationale(
    img: synthworld.SynthImage,
    question: synthworld.Question,
    policy: RationalePolicy,
) -> list[str]:
    """Rationale tokens (the span between THINK markers) for a policy.

    The plain trace enumerates findings or names the rule applied; the
    self-check variant appends the expected answer type.
    """
    if policy == 'none':
        return []
    trace = oracle.oracle_trace(img, question)
    if policy == 'oracle-trace-with-self-check':
        trace += oracle.self_check(question.task)
    return trace


def _draw(weights: np.ndarray, u: float) -> int:
    index = int(np.searchsorted(np.cumsum(weights), u, side='right'))
    return min(index, len(weights) - 1)


class Generator:
    """Candidate generator. Stateless apart from its configuration; the
    sampling distribution is carried in an immutable `GenState`."""

    def __init__(self, config: GeneratorConfig | None = None) -> None:
        self.config = config or GeneratorConfig()

    def generate_candidates(
        self,
        state: GenState,
        n: int,
        seed: int,
    ) -> list[synthworld.VqaTriplet]:
        """Produce `n` candidate triplets.

        Each answer is the oracle value with probability p of the cell's
        strategy, else a uniformly drawn wrong value from the task domain.
        Meta-cognitive items cycle through the tasks in order.

        Raises:
            errors.ContractError: when n is not positive.
        """
        if n <= 0:
            raise errors.ContractError('n must be positive')
        weights = np.asarray(state.weights)
        item_rngs = [np.random.default_rng([seed, i]) for i in range(n)]
        picks = [_draw(weights, float(rng.random())) for rng in item_rngs]
        meta_turn = 0
        items = []
        for rng, pick in zip(item_rngs, picks):
            kind, template_id, modality = state.cells[pick]
            task = question_.TEMPLATES[template_id][0]
            if kind == 'meta_cognitive':
                task = vocab.TASKS[meta_turn % len(vocab.TASKS)]
                meta_turn += 1
                template_id = self._template_for(
                    state, kind, modality, task, rng)
            items.append(self._candidate(
                rng, self.config.strategy(kind), template_id, modality, task))
        return items

    @staticmethod
    def _template_for(
        state: GenState,
        kind: str,
        modality: str,
        task: str,
        rng: np.random.Generator,
    ) -> str:
        options = question_.templates_for(task)
        weights = np.array([
            state.weight((kind, tid, modality))
            if (kind, tid, modality) in state.cells else 0.0
            for tid in options])
        if weights.sum() <= 0.0:
            weights = np.ones(len(options))
        return options[_draw(weights / weights.sum(), float(rng.random()))]

    @staticmethod
    def _candidate(
        rng: np.random.Generator,
        strategy: GenStrategy,
        template_id: str,
        modality: str,
        task: str,
    ) -> synthworld.VqaTriplet:
        img = synthworld.image_for(int(rng.integers(2**62)), modality)
        question = question_.render_question(task, template_id, img)
        value = oracle.answer_value(img, question)
        if rng.random() >= strategy.p:
            wrong = [v for v in oracle.VALUE_DOMAINS[task] if v != value]
            value = wrong[int(rng.integers(len(wrong)))]
        rationale = None
        if strategy.rationale != 'none':
            rationale = render_rationale(img, question, strategy.rationale)
        return synthworld.VqaTriplet(
            image=img,
            question=question,
            answer=oracle.compose_answer(value, rationale),
            provenance='generated',
            strategy=strategy.kind,
        )

    def self_update(
        self,
        state: GenState,
        accepted: t.Sequence[tuple[synthworld.VqaTriplet, float]],
    ) -> GenState:
        """Reweight cells by exp(eta * mean reward of their accepted
        samples) and renormalize.

        Raises:
            errors.ContractError: when a reward lies outside [-6, 10].
        """
        if not accepted:
            return state
        rewards: dict[Cell, list[float]] = collections.defaultdict(list)
        for item, reward in accepted:
            if not -6.0 <= reward <= 10.0:
                raise errors.ContractError(
                    f'reward {reward} outside [-6, 10]')
            cell = (item.strategy or '', item.question.template_id,
                    item.image.modality)
            rewards[cell].append(reward)
        log_weights = np.log(np.asarray(state.weights))
        for cell, values in rewards.items():
            if cell in state.cells:
                log_weights[state.cells.index(cell)] += (
                    self.config.eta * float(np.mean(values)))
        weights = np.exp(log_weights - log_weights.max())
        weights = np.maximum(weights / weights.sum(), np.finfo(float).tiny)
        weights = weights / weights.sum()
        logger.debug('generator update %d over %d cells',
                     state.updates + 1, len(rewards))
        return GenState(
            cells=state.cells,
            weights=tuple(float(w) for w in weights),
            updates=state.updates + 1,
        )
