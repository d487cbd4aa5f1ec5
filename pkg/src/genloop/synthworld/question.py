import typing as t

import numpy as np
import pydantic

from genloop import errors
from genloop.synthworld import image as image_
from genloop.synthworld import vocab

Task: t.TypeAlias = t.Literal['diagnosis', 'counting', 'location', 'presence']

TEMPLATES: dict[str, tuple[str, str]] = {
    'diagnosis.0': ('diagnosis', 'what is the diagnosis'),
    'diagnosis.1': ('diagnosis', 'which condition fits the largest finding'),
    'counting.0': ('counting', 'how many findings'),
    'counting.1': ('counting', 'count the findings in image'),
    'location.0': ('location', 'where is the largest finding'),
    'location.1': ('location', 'locate the largest finding'),
    'presence.0': ('presence', 'is there a {target} finding'),
    'presence.1': ('presence', 'any {target} finding present'),
}
"""Template id to (task, text). Presence templates carry a target
attribute slot."""

PRESENCE_TARGETS = vocab.SHAPES + vocab.INTENSITIES + vocab.SIZES


def templates_for(task: str) -> list[str]:
    return [tid for tid, (owner, _) in TEMPLATES.items() if owner == task]


class Question(pydantic.BaseModel):
    """A rendered question. `target` is set for presence questions only."""
    model_config = pydantic.ConfigDict(frozen=True)

    task: Task
    template_id: str
    tokens: tuple[str, ...]
    target: str | None = None

    @pydantic.model_validator(mode='after')
    def _check(self) -> 'Question':
        for token in self.tokens:
            if token not in vocab.VOCAB:
                raise ValueError(f'out-of-vocabulary token {token!r}')
        return self

    @property
    def text(self) -> str:
        return ' '.join(self.tokens)


def choose_target(img: image_.SynthImage, template_id: str) -> str:
    """Pick a presence target: half the time an attribute the image shows,
    otherwise one it lacks, when such attributes exist."""
    key = sum(ord(c) for c in template_id)
    rng = np.random.default_rng([img.seed, key])
    shown = [a for a in PRESENCE_TARGETS
             if any(f.has(a) for f in img.findings)]
    absent = [a for a in PRESENCE_TARGETS if a not in shown]
    pool = shown if (rng.random() < 0.5 or not absent) else absent
    return pool[int(rng.integers(len(pool)))]


def render_question(
    task: str,
    template_id: str,
    img: image_.SynthImage,
    target: str | None = None,
) -> Question:
    """Fill a template for an image.

    Args:
        task: The task the template must belong to.
        template_id: A key of `TEMPLATES`.
        img: The image, used to pick a presence target when none is given.
        target: An explicit presence target.

    Raises:
        errors.ConfigError: on an unknown template, a template of another
            task, or an invalid presence target.

    Returns:
        The rendered question.
    """
    if template_id not in TEMPLATES:
        raise errors.ConfigError(f'unknown template {template_id!r}')
    owner, text = TEMPLATES[template_id]
    if owner != task:
        raise errors.ConfigError(
            f'template {template_id!r} belongs to task {owner!r}')
    if task != 'presence':
        return Question(
            task=task, template_id=template_id, tokens=tuple(text.split()))
    if target is None:
        target = choose_target(img, template_id)
    if target not in PRESENCE_TARGETS:
        raise errors.ConfigError(f'invalid presence target {target!r}')
    return Question(
        task=task,
        template_id=template_id,
        tokens=tuple(text.format(target=target).split()),
        target=target,
    )
