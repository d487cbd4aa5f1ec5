"""The closed token vocabulary shared by questions, answers, the reward
model features and the policy."""
import typing as t

from genloop import errors

PAD = 'PAD'
EOS = 'EOS'
SEP = 'SEP'
THINK = 'THINK'
END_THINK = '/THINK'
ANS = 'ANS'
END_ANS = '/ANS'
MARKERS = (PAD, EOS, SEP, THINK, END_THINK, ANS, END_ANS)

MODALITIES = ('CT', 'MRI', 'XRay', 'US', 'Der', 'FP', 'OCT', 'Micro')
TASKS = ('diagnosis', 'counting', 'location', 'presence')
SHAPES = ('round', 'spiculated', 'linear', 'diffuse')
INTENSITIES = ('low', 'mid', 'high')
SIZES = ('small', 'large')
CONDITIONS = ('C1', 'C2', 'C3', 'C4', 'C5', 'C6')
QUADRANTS = ('upper-left', 'upper-right', 'lower-left', 'lower-right')
ANSWER_TYPES = {
    'diagnosis': 'label',
    'counting': 'number',
    'location': 'quadrant',
    'presence': 'binary',
}
DIGITS = tuple(str(d) for d in range(10))
DIGIT_WORDS = (
    'zero', 'one', 'two', 'three', 'four',
    'five', 'six', 'seven', 'eight', 'nine',
)
ROWS = tuple(f'r{i}' for i in range(8))
COLS = tuple(f'c{i}' for i in range(8))
HALLUCINATIONS = (
    'fracture', 'pneumonia', 'edema', 'cyst',
    'calculus', 'aneurysm', 'stenosis', 'effusion',
)
TEMPLATE_WORDS = (
    'what', 'is', 'the', 'diagnosis', 'which', 'condition', 'fits',
    'largest', 'finding', 'how', 'many', 'findings', 'count', 'where',
    'locate', 'there', 'a', 'any', 'present', 'in', 'image',
)
TRACE_WORDS = ('found', 'total', 'rule', 'expect')

SYNONYMS: dict[str, str] = {
    **dict(zip(DIGITS, DIGIT_WORDS)),
    **dict(zip(CONDITIONS, ('dx1', 'dx2', 'dx3', 'dx4', 'dx5', 'dx6'))),
    **dict(zip(QUADRANTS, (
        'top-left', 'top-right', 'bottom-left', 'bottom-right'))),
    'yes': 'affirmative',
    'no': 'negative',
    **dict(zip(SHAPES, ('circular', 'stellate', 'streak', 'hazy'))),
    **dict(zip(INTENSITIES, ('faint', 'moderate', 'bright'))),
    **dict(zip(SIZES, ('tiny', 'big'))),
    **dict(zip(
        ('label', 'number', 'quadrant', 'binary'),
        ('category', 'numeral', 'region', 'boolean'))),
    'largest': 'biggest',
    'finding': 'lesion',
    'findings': 'lesions',
    'found': 'seen',
    'total': 'sum',
    'rule': 'criterion',
    'expect': 'anticipate',
}
"""Canonical token to its single synonym. The table is used in both
directions and never maps across value classes."""

CANONICAL: dict[str, str] = {v: k for k, v in SYNONYMS.items()}
"""Synonym back to its canonical token."""


def _build_tokens() -> tuple[str, ...]:
    ordered: list[str] = []
    for group in (
        MARKERS, DIGITS, DIGIT_WORDS, CONDITIONS, QUADRANTS, ('yes', 'no'),
        SHAPES, INTENSITIES, SIZES, MODALITIES, ROWS, COLS,
        tuple(ANSWER_TYPES.values()), TEMPLATE_WORDS, TRACE_WORDS,
        HALLUCINATIONS, tuple(SYNONYMS.values()),
    ):
        for token in group:
            if token not in ordered:
                ordered.append(token)
    return tuple(ordered)


class Vocab:
    """A fixed, ordered token list. Ids are contiguous and stable because
    the order is spelled out in this module."""

    def __init__(self, tokens: t.Sequence[str]) -> None:
        self._tokens = tuple(tokens)
        self._index = {token: i for i, token in enumerate(self._tokens)}
        if len(self._index) != len(self._tokens):
            raise errors.ConfigError('vocabulary tokens must be unique')

    def __len__(self) -> int:
        return len(self._tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._index

    @property
    def tokens(self) -> tuple[str, ...]:
        return self._tokens

    def id(self, token: str) -> int:
        try:
            return self._index[token]
        except KeyError:
            raise errors.DataError(
                f'out-of-vocabulary token {token!r}') from None

    def ids(self, tokens: t.Iterable[str]) -> list[int]:
        return [self.id(token) for token in tokens]

    def token(self, token_id: int) -> str:
        return self._tokens[token_id]

    def to_tokens(self, ids: t.Iterable[int]) -> list[str]:
        return [self._tokens[int(i)] for i in ids]

    def tokenize(self, text: str) -> list[int]:
        """Split on whitespace and map to ids.

        Raises:
            errors.DataError: on an out-of-vocabulary token.
        """
        return self.ids(text.split())

    def detokenize(self, ids: t.Iterable[int]) -> str:
        return ' '.join(self.to_tokens(ids))


VOCAB = Vocab(_build_tokens())
