"""Line-delimited dataset files. One JSON object per line; images are not
stored but rebuilt from their seed and modality."""
import pathlib
import typing as t

import pydantic

from genloop import errors
from genloop.synthworld import image as image_
from genloop.synthworld import question as question_
from genloop.synthworld import triplet as triplet_


class TripletRecord(pydantic.BaseModel):
    """The on-disk form of a triplet. Graded corpora fill `grade`,
    `target_score` and `corruption_seed`; scored files fill
    `reward_score`."""
    model_config = pydantic.ConfigDict(extra='forbid')

    image_seed: int
    modality: str
    task: str
    template_id: str
    target: str | None = None
    question_tokens: str
    answer_tokens: str
    provenance: triplet_.Provenance
    strategy: str | None = None
    reward_score: float | None = None
    iteration: int | None = None
    grade: int | None = None
    target_score: float | None = None
    corruption_seed: int | None = None

    @classmethod
    def from_triplet(
        cls,
        item: triplet_.VqaTriplet,
        **extra: t.Any,
    ) -> 'TripletRecord':
        return cls(
            image_seed=item.image.seed,
            modality=item.image.modality,
            task=item.question.task,
            template_id=item.question.template_id,
            target=item.question.target,
            question_tokens=item.question.text,
            answer_tokens=' '.join(item.answer),
            provenance=item.provenance,
            strategy=item.strategy,
            reward_score=item.score,
            iteration=item.iteration,
            **extra,
        )

    def to_triplet(self) -> triplet_.VqaTriplet:
        """Rebuild the triplet, regenerating its image.

        Raises:
            errors.DataError: when the stored question does not match the
                regenerated one or a field is invalid.
        """
        try:
            img = image_.image_for(self.image_seed, self.modality)
            question = question_.render_question(
                self.task, self.template_id, img, self.target)
            if question.text != self.question_tokens:
                raise errors.DataError(
                    f'question mismatch for image {self.image_seed}')
            return triplet_.VqaTriplet(
                image=img,
                question=question,
                answer=tuple(self.answer_tokens.split()),
                provenance=self.provenance,
                strategy=self.strategy,
                score=self.reward_score,
                iteration=self.iteration,
            )
        except (pydantic.ValidationError, KeyError,
                errors.ConfigError) as ex:
            raise errors.DataError(f'invalid record: {ex}') from ex


def dump_records(records: t.Iterable[TripletRecord]) -> str:
    return ''.join(record.model_dump_json() + '\n' for record in records)


def write_records(
    path: str | pathlib.Path,
    records: t.Iterable[TripletRecord],
) -> None:
    pathlib.Path(path).write_text(dump_records(records), encoding='utf-8')


def read_records(path: str | pathlib.Path) -> list[TripletRecord]:
    """Parse a record file.

    Raises:
        errors.DataError: when the file cannot be read or a line does not
            parse.
    """
    try:
        lines = pathlib.Path(path).read_text(encoding='utf-8').splitlines()
    except OSError as ex:
        raise errors.DataError(f'cannot read records {path}') from ex
    records = []
    for number, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            records.append(TripletRecord.model_validate_json(line))
        except pydantic.ValidationError as ex:
            raise errors.DataError(f'{path}:{number}: {ex}') from ex
    return records


def write_triplets(
    path: str | pathlib.Path,
    items: t.Iterable[triplet_.VqaTriplet],
) -> None:
    write_records(path, (TripletRecord.from_triplet(i) for i in items))


def read_triplets(path: str | pathlib.Path) -> list[triplet_.VqaTriplet]:
    return [record.to_triplet() for record in read_records(path)]
