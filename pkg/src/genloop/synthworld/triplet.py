import typing as t

import pydantic

from genloop.synthworld import image as image_
from genloop.synthworld import oracle
from genloop.synthworld import question as question_
from genloop.synthworld import vocab

Provenance: t.TypeAlias = t.Literal[
    'oracle', 'generated', 'corrupted', 'policy']
SampleKey: t.TypeAlias = tuple[int, str, str]
"""(image seed, template id, target) identifying a prompt."""
DedupKey: t.TypeAlias = tuple[int, str, str, tuple[str, ...]]
"""A prompt key plus the answer tokens."""


class VqaTriplet(pydantic.BaseModel):
    """An (image, question, answer) sample. Admission metadata (`score`,
    `iteration`) is attached when the sample enters the training corpus."""
    model_config = pydantic.ConfigDict(frozen=True)

    image: image_.SynthImage
    question: question_.Question
    answer: tuple[str, ...]
    provenance: Provenance = 'oracle'
    strategy: str | None = None
    score: float | None = None
    iteration: int | None = None

    @pydantic.field_validator('answer')
    @classmethod
    def _check_answer(cls, value: tuple[str, ...]) -> tuple[str, ...]:
        for token in value:
            if token not in vocab.VOCAB:
                raise ValueError(f'out-of-vocabulary token {token!r}')
        return value

    @property
    def prompt_key(self) -> SampleKey:
        return (
            self.image.seed,
            self.question.template_id,
            self.question.target or '',
        )

    @property
    def key(self) -> DedupKey:
        return (*self.prompt_key, self.answer)

    @property
    def task(self) -> str:
        return self.question.task

    @property
    def modality(self) -> str:
        return self.image.modality

    def oracle_value(self) -> str:
        return oracle.answer_value(self.image, self.question)

    def with_answer(
        self,
        answer: t.Sequence[str],
        provenance: Provenance,
    ) -> 'VqaTriplet':
        return self.model_copy(update={
            'answer': tuple(answer),
            'provenance': provenance,
            'score': None,
            'iteration': None,
        })


def oracle_triplet(
    img: image_.SynthImage,
    question: question_.Question,
) -> VqaTriplet:
    """The reference triplet: oracle value behind a full rationale that
    ends with the expected answer type."""
    rationale = (oracle.oracle_trace(img, question)
                 + oracle.self_check(question.task))
    answer = oracle.compose_answer(
        oracle.answer_value(img, question), rationale)
    return VqaTriplet(
        image=img, question=question, answer=answer, provenance='oracle')
