import typing as t

from genloop.synthworld import oracle
from genloop.synthworld import vocab

INVALID = 'INVALID'
"""Extraction result for answers without a single valid value span."""

ALL_VALUES = frozenset(
    value for domain in oracle.VALUE_DOMAINS.values() for value in domain)

CONTENT_MARKERS = frozenset(vocab.MARKERS)


def normalize(token: str) -> str:
    """Map a synonym (digit words included) to its canonical token."""
    return vocab.CANONICAL.get(token, token)


def extract_answer(tokens: t.Sequence[str]) -> str:
    """The normalized content of the unique ANS ... /ANS span.

    Returns `INVALID` when the span is missing, duplicated, empty, longer
    than one token, or its value lies outside every task domain.
    """
    if list(tokens).count(vocab.ANS) != 1:
        return INVALID
    if list(tokens).count(vocab.END_ANS) != 1:
        return INVALID
    start = list(tokens).index(vocab.ANS)
    end = list(tokens).index(vocab.END_ANS)
    if end != start + 2:
        return INVALID
    value = normalize(tokens[start + 1])
    return value if value in ALL_VALUES else INVALID


def has_think_span(tokens: t.Sequence[str]) -> bool:
    """True when a THINK marker is later closed by /THINK."""
    tokens = list(tokens)
    if vocab.THINK not in tokens:
        return False
    return vocab.END_THINK in tokens[tokens.index(vocab.THINK) + 1:]


def has_ans_span(tokens: t.Sequence[str]) -> bool:
    tokens = list(tokens)
    if vocab.ANS not in tokens:
        return False
    return vocab.END_ANS in tokens[tokens.index(vocab.ANS) + 1:]


def strip_rationale(tokens: t.Sequence[str]) -> tuple[str, ...]:
    """Drop the THINK ... /THINK span, keeping everything else."""
    tokens = list(tokens)
    if not has_think_span(tokens):
        return tuple(tokens)
    start = tokens.index(vocab.THINK)
    end = tokens.index(vocab.END_THINK, start + 1)
    return tuple(tokens[:start] + tokens[end + 1:])


def content_positions(tokens: t.Sequence[str]) -> list[int]:
    """Indices of the non-marker tokens."""
    return [i for i, tok in enumerate(tokens) if tok not in CONTENT_MARKERS]
