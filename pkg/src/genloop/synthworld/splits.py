import itertools
import typing as t

import numpy as np
import pydantic

from genloop import errors
from genloop.synthworld import image as image_
from genloop.synthworld import question as question_
from genloop.synthworld import triplet as triplet_
from genloop.synthworld import vocab

QUESTIONS_PER_IMAGE = sum(
    len(question_.PRESENCE_TARGETS) if task == 'presence' else 1
    for task, _ in question_.TEMPLATES.values())
"""Distinct (template, target) prompts one image supports."""


class SplitConfig(pydantic.BaseModel):
    """Sizes of the oracle splits and the image seed pool they draw from."""
    model_config = pydantic.ConfigDict(frozen=True)

    train: int = pydantic.Field(default=2000, gt=0)
    val: int = pydantic.Field(default=200, gt=0)
    test: int = pydantic.Field(default=640, gt=0)
    balanced_test: bool = True
    image_pool: int = pydantic.Field(default=1_000_000, gt=0)
    mixture: dict[str, float] = pydantic.Field(
        default_factory=lambda: dict(image_.DEFAULT_MIXTURE))
    tasks: tuple[str, ...] = vocab.TASKS

    @pydantic.field_validator('tasks')
    @classmethod
    def _check_tasks(cls, value: tuple[str, ...]) -> tuple[str, ...]:
        if not value or any(task not in vocab.TASKS for task in value):
            raise ValueError(f'tasks must be a non-empty subset of '
                             f'{vocab.TASKS}')
        return value


class Split(pydantic.BaseModel):
    model_config = pydantic.ConfigDict(frozen=True)

    train: tuple[triplet_.VqaTriplet, ...]
    val: tuple[triplet_.VqaTriplet, ...]
    test: tuple[triplet_.VqaTriplet, ...]


def sample_prompt(
    rng: np.random.Generator,
    img: image_.SynthImage,
    tasks: t.Sequence[str] = vocab.TASKS,
) -> question_.Question:
    task = tasks[int(rng.integers(len(tasks)))]
    templates = question_.templates_for(task)
    template_id = templates[int(rng.integers(len(templates)))]
    return question_.render_question(task, template_id, img)


class _Drawer:
    """Draws oracle triplets with globally unique prompt keys."""

    def __init__(self, config: SplitConfig, seed: int) -> None:
        self._config = config
        self._rng = np.random.default_rng([seed, 0x5EED])
        self._seen: set[triplet_.SampleKey] = set()
        self._budget = 50 * (config.train + config.val + config.test)

    def _next_seed(self) -> int:
        self._budget -= 1
        if self._budget < 0:
            raise errors.ConfigError(
                'could not draw enough unique prompts from the image pool')
        return int(self._rng.integers(self._config.image_pool))

    def _admit(self, item: triplet_.VqaTriplet) -> bool:
        if item.prompt_key in self._seen:
            return False
        self._seen.add(item.prompt_key)
        return True

    def draw(self, mixture: t.Mapping[str, float], task: str | None = None
             ) -> triplet_.VqaTriplet:
        tasks = self._config.tasks if task is None else (task,)
        while True:
            img = image_.sample_image(self._next_seed(), mixture)
            question = sample_prompt(self._rng, img, tasks)
            item = triplet_.oracle_triplet(img, question)
            if self._admit(item):
                return item


def make_split(config: SplitConfig, seed: int) -> Split:
    """Draw disjoint train, val and test sets of oracle triplets.

    With `balanced_test` the test set cycles through every (task, modality)
    cell, so cell counts differ by at most one.

    Raises:
        errors.ConfigError: when the requested sizes exceed what the image
            pool can supply, or the mixture is invalid.
    """
    image_.validate_mixture(config.mixture)
    total = config.train + config.val + config.test
    if total > config.image_pool * QUESTIONS_PER_IMAGE:
        raise errors.ConfigError(
            f'{total} prompts requested but the image pool supports at most '
            f'{config.image_pool * QUESTIONS_PER_IMAGE}')
    drawer = _Drawer(config, seed)
    train = [drawer.draw(config.mixture) for _ in range(config.train)]
    val = [drawer.draw(config.mixture) for _ in range(config.val)]
    if config.balanced_test:
        cells = itertools.cycle(
            itertools.product(config.tasks, vocab.MODALITIES))
        test = []
        for _ in range(config.test):
            task, modality = next(cells)
            test.append(drawer.draw({modality: 1.0}, task))
    else:
        test = [drawer.draw(config.mixture) for _ in range(config.test)]
    return Split(train=tuple(train), val=tuple(val), test=tuple(test))
