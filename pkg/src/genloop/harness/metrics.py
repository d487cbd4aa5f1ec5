"""Held-out evaluation of a policy: accuracy, balanced accuracy, macro-F1
and AUROC per (task, modality) cell, and the four-way error transitions
between two policies."""
import collections
import logging
import typing as t

import numpy as np
import pydantic
from sklearn import metrics as sk_metrics

from genloop import errors
from genloop import policy as policy_
from genloop import synthworld
from genloop.synthworld import vocab

logger = logging.getLogger(__name__)

Unit: t.TypeAlias = t.Annotated[float, pydantic.Field(ge=0.0, le=1.0)]


class Scores(pydantic.BaseModel):
    """Metrics of one group of test items."""
    model_config = pydantic.ConfigDict(frozen=True)

    n: int = pydantic.Field(gt=0)
    accuracy: Unit
    balanced_accuracy: Unit
    macro_f1: Unit
    auroc: Unit | None = None
    """Presence items only; None when a single class is present."""


class CellReport(Scores):
    task: str
    modality: str


class EvalReport(pydantic.BaseModel):
    """Scores per (task, modality) cell plus the overall, per-task and
    per-modality aggregates."""
    model_config = pydantic.ConfigDict(frozen=True)

    cells: tuple[CellReport, ...]
    overall: Scores
    per_task: dict[str, Scores]
    per_modality: dict[str, Scores]

    @pydantic.model_validator(mode='after')
    def _check(self) -> 'EvalReport':
        if sum(cell.n for cell in self.cells) != self.overall.n:
            raise ValueError('cell sizes must sum to the test size')
        return self

    @property
    def accuracy(self) -> float:
        return self.overall.accuracy

    def cell(self, task: str, modality: str) -> CellReport:
        for cell in self.cells:
            if cell.task == task and cell.modality == modality:
                return cell
        raise KeyError((task, modality))


class Predictions(pydantic.BaseModel):
    """Greedy outputs of a policy on a test set, with the presence scores
    AUROC is computed from."""
    model_config = pydantic.ConfigDict(frozen=True)

    answers: tuple[tuple[str, ...], ...]
    values: tuple[str, ...]
    presence_scores: tuple[float | None, ...]

    def correct(self, items: t.Sequence[synthworld.VqaTriplet]) -> list[bool]:
        if len(items) != len(self.values):
            raise errors.ContractError(
                'predictions and test set differ in size')
        return [v == item.oracle_value()
                for v, item in zip(self.values, items)]


def presence_score(
    net: policy_.PolicyNet,
    item: synthworld.VqaTriplet,
    answer: t.Sequence[str] = (),
) -> float | None:
    """p(yes answer) / (p(yes answer) + p(no answer)).

    Both answers are the policy's own `answer` up to and including its ANS
    marker followed by `<value> /ANS EOS`, scored as whole sequences; the
    shared prefix cancels. An answer without ANS, or one too long to
    complete, is replaced by the bare `ANS` prefix, so the score only ever
    reflects what the policy produced. None when the net cannot emit both
    completions or they exceed its answer length.
    """
    endings = [(value, vocab.END_ANS, vocab.EOS) for value in ('yes', 'no')]
    needed = {vocab.ANS, *endings[0], *endings[1]}
    if not all(token in net.out_vocab for token in needed):
        return None
    answer = tuple(answer)
    prefix: tuple[str, ...] = (vocab.ANS,)
    if vocab.ANS in answer:
        own = answer[:answer.index(vocab.ANS) + 1]
        if len(own) + 3 <= net.config.max_answer_len:
            prefix = own
    if len(prefix) + 3 > net.config.max_answer_len:
        return None
    logp, mask = policy_.token_logprobs(
        net, [(item.image, item.question.tokens)] * 2,
        [prefix + ending for ending in endings])
    totals = np.sum(logp.data.astype(np.float64) * mask, axis=1)
    return float(1.0 / (1.0 + np.exp(totals[1] - totals[0])))


def predict(
    net: policy_.PolicyNet,
    items: t.Sequence[synthworld.VqaTriplet],
) -> Predictions:
    answers = policy_.greedy_answers(
        net, [(item.image, item.question.tokens) for item in items])
    return Predictions(
        answers=tuple(answers),
        values=tuple(synthworld.extract_answer(a) for a in answers),
        presence_scores=tuple(
            presence_score(net, item, answer)
            if item.task == 'presence' else None
            for item, answer in zip(items, answers)),
    )


def _scores(
    items: t.Sequence[synthworld.VqaTriplet],
    values: t.Sequence[str],
    presence: t.Sequence[float | None],
) -> dict[str, t.Any]:
    truth = [item.oracle_value() for item in items]
    labels = sorted(set(truth))
    auroc = None
    binary = [(y == 'yes', s) for item, y, s in zip(items, truth, presence)
              if item.task == 'presence' and s is not None]
    if binary and len({y for y, _ in binary}) == 2:
        auroc = float(sk_metrics.roc_auc_score(
            [y for y, _ in binary], [s for _, s in binary]))
    return {
        'n': len(items),
        'accuracy': float(sk_metrics.accuracy_score(truth, values)),
        'balanced_accuracy': float(
            sk_metrics.balanced_accuracy_score(truth, values)),
        'macro_f1': float(sk_metrics.f1_score(
            truth, values, labels=labels, average='macro',
            zero_division=0)),
        'auroc': auroc,
    }


def evaluate(
    net: policy_.PolicyNet,
    test: t.Sequence[synthworld.VqaTriplet],
    predictions: Predictions | None = None,
) -> EvalReport:
    """Greedy decoding on every test item; an item is correct when the
    extracted prediction equals the oracle value.

    Raises:
        errors.ContractError: when the test set is empty or `predictions`
            does not belong to it.
    """
    if not test:
        raise errors.ContractError('test set is empty')
    if predictions is None:
        predictions = predict(net, test)
    predictions.correct(test)
    values = predictions.values
    presence = predictions.presence_scores

    def group(key: t.Callable[[synthworld.VqaTriplet], t.Hashable]
              ) -> dict[t.Hashable, list[int]]:
        rows: dict[t.Hashable, list[int]] = collections.defaultdict(list)
        for i, item in enumerate(test):
            rows[key(item)].append(i)
        return rows

    def scores_of(rows: list[int]) -> dict[str, t.Any]:
        return _scores([test[i] for i in rows], [values[i] for i in rows],
                       [presence[i] for i in rows])

    cells = tuple(
        CellReport(task=task, modality=modality, **scores_of(rows))
        for (task, modality), rows in sorted(
            group(lambda i: (i.task, i.modality)).items()))
    report = EvalReport(
        cells=cells,
        overall=Scores(**scores_of(list(range(len(test))))),
        per_task={k: Scores(**scores_of(rows)) for k, rows in sorted(
            group(lambda i: i.task).items())},
        per_modality={k: Scores(**scores_of(rows)) for k, rows in sorted(
            group(lambda i: i.modality).items())},
    )
    logger.info('evaluated %d items, accuracy %.4f',
                len(test), report.accuracy)
    return report


class TransitionCounts(pydantic.BaseModel):
    model_config = pydantic.ConfigDict(frozen=True)

    correct_correct: int = 0
    wrong_correct: int = 0
    correct_wrong: int = 0
    wrong_wrong: int = 0

    @property
    def total(self) -> int:
        return (self.correct_correct + self.wrong_correct
                + self.correct_wrong + self.wrong_wrong)


class TransitionReport(pydantic.BaseModel):
    """How each test item moved between a baseline and a candidate policy,
    counted per modality."""
    model_config = pydantic.ConfigDict(frozen=True)

    per_modality: dict[str, TransitionCounts]

    @property
    def aggregate(self) -> TransitionCounts:
        fields = TransitionCounts.model_fields
        return TransitionCounts(**{
            name: sum(getattr(c, name) for c in self.per_modality.values())
            for name in fields})


def transitions(
    test: t.Sequence[synthworld.VqaTriplet],
    baseline: t.Sequence[bool],
    candidate: t.Sequence[bool],
) -> TransitionReport:
    """Partition the test items by (baseline correct, candidate correct).

    Raises:
        errors.ContractError: when the three sequences differ in length.
    """
    if not len(test) == len(baseline) == len(candidate):
        raise errors.ContractError(
            'baseline and candidate were not evaluated on the same test set')
    names = {
        (True, True): 'correct_correct',
        (False, True): 'wrong_correct',
        (True, False): 'correct_wrong',
        (False, False): 'wrong_wrong',
    }
    counts: dict[str, collections.Counter] = collections.defaultdict(
        collections.Counter)
    for item, before, after in zip(test, baseline, candidate):
        counts[item.modality][names[(bool(before), bool(after))]] += 1
    return TransitionReport(per_modality={
        modality: TransitionCounts(**counter)
        for modality, counter in sorted(counts.items())})


def error_transitions(
    baseline: policy_.PolicyNet,
    candidate: policy_.PolicyNet,
    test: t.Sequence[synthworld.VqaTriplet],
) -> TransitionReport:
    return transitions(
        test,
        predict(baseline, test).correct(test),
        predict(candidate, test).correct(test),
    )


def report_rows(report: EvalReport) -> list[dict[str, t.Any]]:
    """The report as flat table rows: the overall scores, then one row per
    task, per modality and per cell."""
    def row(scope: str, task: str | None, modality: str | None,
            scores: Scores) -> dict[str, t.Any]:
        return {'scope': scope, 'task': task, 'modality': modality,
                **scores.model_dump(include=set(Scores.model_fields))}

    rows = [row('overall', None, None, report.overall)]
    rows += [row('task', k, None, v) for k, v in report.per_task.items()]
    rows += [row('modality', None, k, v)
             for k, v in report.per_modality.items()]
    rows += [row('cell', c.task, c.modality, c) for c in report.cells]
    return rows
