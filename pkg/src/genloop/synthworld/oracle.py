"""Exact ground truth for the synthetic world. The diagnosis rule table is
also published in docs/rules.md."""
from genloop.synthworld import image as image_
from genloop.synthworld import question as question_
from genloop.synthworld import vocab

RULE_TABLE: dict[tuple[str, str], str] = {
    ('round', 'low'): 'C1',
    ('round', 'mid'): 'C1',
    ('round', 'high'): 'C2',
    ('spiculated', 'low'): 'C3',
    ('spiculated', 'mid'): 'C4',
    ('spiculated', 'high'): 'C4',
    ('linear', 'low'): 'C5',
    ('linear', 'mid'): 'C5',
    ('linear', 'high'): 'C3',
    ('diffuse', 'low'): 'C6',
    ('diffuse', 'mid'): 'C6',
    ('diffuse', 'high'): 'C2',
}
"""(shape, intensity) of the largest finding to condition label."""

VALUE_DOMAINS: dict[str, tuple[str, ...]] = {
    'diagnosis': vocab.CONDITIONS,
    'counting': tuple(str(n) for n in range(1, image_.MAX_FINDINGS + 1)),
    'location': vocab.QUADRANTS,
    'presence': ('yes', 'no'),
}


def quadrant(row: int, col: int) -> str:
    vertical = 'upper' if row < image_.GRID // 2 else 'lower'
    horizontal = 'left' if col < image_.GRID // 2 else 'right'
    return f'{vertical}-{horizontal}'


def answer_value(img: image_.SynthImage, question: question_.Question) -> str:
    if question.task == 'counting':
        return str(len(img.findings))
    largest = img.largest
    if question.task == 'diagnosis':
        return RULE_TABLE[(largest.shape, largest.intensity)]
    if question.task == 'location':
        return quadrant(largest.row, largest.col)
    present = any(f.has(question.target or '') for f in img.findings)
    return 'yes' if present else 'no'


def oracle_answer(
    img: image_.SynthImage,
    question: question_.Question,
) -> tuple[str, ...]:
    """The exact answer value as a token sequence. Total and pure."""
    return (answer_value(img, question),)


def oracle_trace(
    img: image_.SynthImage,
    question: question_.Question,
) -> list[str]:
    """Rationale tokens that derive the oracle answer: the enumerated
    findings, or the largest finding and the rule applied to it."""
    largest = img.largest
    if question.task == 'counting':
        return (['found'] + [f.shape for f in img.findings]
                + ['total', str(len(img.findings))])
    if question.task == 'diagnosis':
        return ['largest', largest.shape, largest.intensity, 'rule',
                RULE_TABLE[(largest.shape, largest.intensity)]]
    if question.task == 'location':
        return ['largest', f'r{largest.row}', f'c{largest.col}',
                quadrant(largest.row, largest.col)]
    matches = sum(f.has(question.target or '') for f in img.findings)
    return ['found', question.target or '', 'total', str(matches)]


def compose_answer(
    value: str | tuple[str, ...],
    rationale: list[str] | None = None,
) -> tuple[str, ...]:
    """Wrap a value, and optionally a rationale, in the answer markers.
    Without a rationale the THINK span is omitted entirely."""
    values = (value,) if isinstance(value, str) else tuple(value)
    head: tuple[str, ...] = ()
    if rationale is not None:
        head = (vocab.THINK, *rationale, vocab.END_THINK)
    return (*head, vocab.ANS, *values, vocab.END_ANS, vocab.EOS)


def self_check(task: str) -> list[str]:
    """Trailing rationale tokens naming the expected answer type."""
    return ['expect', vocab.ANSWER_TYPES[task]]
