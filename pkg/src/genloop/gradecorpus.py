"""Four-grade reward supervision built by corrupting oracle triplets."""
import pathlib
import typing as t

import numpy as np
import pydantic

from genloop import errors
from genloop import synthworld
from genloop.synthworld import answer as answer_
from genloop.synthworld import vocab

Grade: t.TypeAlias = t.Literal[1, 2, 3, 4]

GRADE_SCORES: dict[int, float] = {1: 10.0, 2: 6.0, 3: 0.0, 4: -6.0}
"""Grade to target score: original, lightly perturbed, incoherent,
irrelevant or hallucinated."""


class GradeConfig(pydantic.BaseModel):
    model_config = pydantic.ConfigDict(frozen=True)

    counts: tuple[int, int, int, int] = (400, 400, 400, 400)
    """Examples per grade, grade 1 first."""
    synonym_rate: float = pydantic.Field(default=0.3, ge=0.0, le=1.0)
    span_fraction: tuple[float, float] = (0.2, 0.5)
    irrelevant_probability: float = pydantic.Field(
        default=0.5, ge=0.0, le=1.0)

    @pydantic.field_validator('counts')
    @classmethod
    def _check_counts(cls, value: tuple[int, ...]) -> tuple[int, ...]:
        if any(count <= 0 for count in value):
            raise ValueError('per-grade counts must be positive')
        return value

    @pydantic.field_validator('span_fraction')
    @classmethod
    def _check_span(cls, value: tuple[float, float]) -> tuple[float, float]:
        low, high = value
        if not 0.0 <= low <= high <= 1.0:
            raise ValueError('span fraction range must satisfy '
                             '0 <= low <= high <= 1')
        return value


class GradedExample(pydantic.BaseModel):
    """A reward-model training example."""
    model_config = pydantic.ConfigDict(frozen=True)

    triplet: synthworld.VqaTriplet
    grade: Grade
    target_score: float
    corruption_seed: int

    @pydantic.model_validator(mode='after')
    def _check(self) -> 'GradedExample':
        if GRADE_SCORES[self.grade] != self.target_score:
            raise ValueError(
                f'grade {self.grade} requires score {GRADE_SCORES[self.grade]}')
        return self

    def to_record(self) -> synthworld.TripletRecord:
        return synthworld.TripletRecord.from_triplet(
            self.triplet,
            grade=self.grade,
            target_score=self.target_score,
            corruption_seed=self.corruption_seed,
        )

    @classmethod
    def from_record(cls, record: synthworld.TripletRecord) -> 'GradedExample':
        if record.grade is None or record.corruption_seed is None:
            raise errors.DataError('record carries no grade')
        try:
            return cls(
                triplet=record.to_triplet(),
                grade=record.grade,
                target_score=GRADE_SCORES.get(record.grade, float('nan')),
                corruption_seed=record.corruption_seed,
            )
        except pydantic.ValidationError as ex:
            raise errors.DataError(f'invalid graded record: {ex}') from ex


def perturb_synonym(
    tokens: t.Sequence[str],
    seed: int,
    rate: float = 0.3,
) -> tuple[str, ...]:
    """Swap content tokens for their synonym, each with probability `rate`.

    Synonyms never cross value classes, so the extracted answer is
    unchanged. Markers are never touched.
    """
    if not 0.0 <= rate <= 1.0:
        raise errors.ConfigError(f'synonym rate {rate} outside [0, 1]')
    rng = np.random.default_rng(seed)
    out = []
    for token in tokens:
        if token in answer_.CONTENT_MARKERS:
            out.append(token)
            continue
        swap = rng.random() < rate
        partner = vocab.SYNONYMS.get(token) or vocab.CANONICAL.get(token)
        out.append(partner if swap and partner else token)
    return tuple(out)


def _value_index(
    tokens: t.Sequence[str],
    positions: t.Sequence[int],
) -> int | None:
    """Index into `positions` of the first token inside the ANS span."""
    tokens = list(tokens)
    if vocab.ANS not in tokens:
        return None
    start = tokens.index(vocab.ANS)
    tail = tokens[start:]
    end = start + (tail.index(vocab.END_ANS) if vocab.END_ANS in tail
                   else len(tail))
    for k, position in enumerate(positions):
        if start < position < end:
            return k
    return None


def delete_phrases(
    tokens: t.Sequence[str],
    seed: int,
    span_fraction: tuple[float, float] = (0.2, 0.5),
) -> tuple[str, ...]:
    """Remove one contiguous run of content tokens covering the answer
    value.

    The run covers a fraction of the content tokens drawn uniformly from
    `span_fraction` (rounded, at least one token) and always includes the
    first token of the ANS span, so the extracted answer turns invalid.
    Answers with fewer than three content tokens lose a single token.
    Markers stay in place. Without an answer value the run lands anywhere.
    """
    low, high = span_fraction
    if not 0.0 <= low <= high <= 1.0:
        raise errors.ConfigError(f'invalid span fraction {span_fraction}')
    rng = np.random.default_rng(seed)
    positions = answer_.content_positions(tokens)
    n = len(positions)
    if n == 0:
        return tuple(tokens)
    if n < 3:
        width = 1
    else:
        width = min(n, max(1, int(round(rng.uniform(low, high) * n))))
    value = _value_index(tokens, positions)
    if value is None:
        first, last = 0, n - width
    else:
        first, last = max(0, value - width + 1), min(value, n - width)
    start = int(rng.integers(first, last + 1))
    removed = set(positions[start:start + width])
    return tuple(tok for i, tok in enumerate(tokens) if i not in removed)


def hallucinate(tokens: t.Sequence[str], seed: int) -> tuple[str, ...]:
    """Replace the answer value with a token outside every task domain."""
    rng = np.random.default_rng(seed)
    fake = vocab.HALLUCINATIONS[int(rng.integers(len(vocab.HALLUCINATIONS)))]
    tokens = list(tokens)
    if vocab.ANS in tokens and vocab.END_ANS in tokens:
        start = tokens.index(vocab.ANS)
        end = tokens.index(vocab.END_ANS, start)
        return tuple(tokens[:start + 1] + [fake] + tokens[end:])
    return (vocab.ANS, fake, vocab.END_ANS, vocab.EOS)


def make_irrelevant(
    item: synthworld.VqaTriplet,
    donors: t.Sequence[synthworld.VqaTriplet],
    seed: int,
    irrelevant_probability: float = 0.5,
) -> tuple[str, ...]:
    """A grade 4 answer: another prompt's answer, or a hallucination.

    Donors answering a different task are preferred. When no donor asks a
    different question the hallucination branch is used.

    Raises:
        errors.ContractError: when the donor pool is empty.
    """
    if not donors:
        raise errors.ContractError('donor pool is empty')
    rng = np.random.default_rng(seed)
    if rng.random() < irrelevant_probability:
        others = [d for d in donors if d.prompt_key != item.prompt_key]
        foreign = [d for d in others if d.task != item.task]
        pool = foreign or others
        if pool:
            return tuple(pool[int(rng.integers(len(pool)))].answer)
    return hallucinate(item.answer, int(rng.integers(2**31)))


def build_graded_dataset(
    oracles: t.Sequence[synthworld.VqaTriplet],
    config: GradeConfig,
    seed: int,
) -> list[GradedExample]:
    """Assemble D_grade from distinct oracle triplets.

    Every host triplet is used once. Grade 1 keeps the triplet untouched;
    grades 2 to 4 apply the synonym, deletion and irrelevance operators.

    Raises:
        errors.ConfigError: when fewer oracle triplets than requested
            examples are available.
    """
    total = sum(config.counts)
    if total > len(oracles):
        raise errors.ConfigError(
            f'{total} graded examples requested from {len(oracles)} oracle '
            f'triplets')
    rng = np.random.default_rng([seed, 0x6AD])
    order = rng.permutation(len(oracles))[:total]
    corruption_seeds = rng.integers(0, 2**31, size=total)
    examples = []
    cursor = 0
    for grade, count in zip((1, 2, 3, 4), config.counts):
        for _ in range(count):
            host = oracles[int(order[cursor])]
            cseed = int(corruption_seeds[cursor])
            cursor += 1
            item = host
            if grade == 2:
                item = host.with_answer(perturb_synonym(
                    host.answer, cseed, config.synonym_rate), 'corrupted')
            elif grade == 3:
                item = host.with_answer(delete_phrases(
                    host.answer, cseed, config.span_fraction), 'corrupted')
            elif grade == 4:
                item = host.with_answer(make_irrelevant(
                    host, oracles, cseed, config.irrelevant_probability),
                    'corrupted')
            examples.append(GradedExample(
                triplet=item,
                grade=grade,
                target_score=GRADE_SCORES[grade],
                corruption_seed=cseed,
            ))
    return examples


def write_graded(
    path: str | pathlib.Path,
    examples: t.Iterable[GradedExample],
) -> None:
    synthworld.write_records(path, (e.to_record() for e in examples))


def read_graded(path: str | pathlib.Path) -> list[GradedExample]:
    return [GradedExample.from_record(r)
            for r in synthworld.read_records(path)]
