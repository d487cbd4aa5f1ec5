"""Bus messages of the closed loop. One command per stage; each carries the
state it starts from and the iteration being built, and its handler
returns the next state."""
import typing as t

import pydantic

from genloop import message
from genloop.loop import state as state_


class StageCommand(message.Command):
    state: state_.LoopState
    iteration: int = pydantic.Field(ge=1)

    def __repr__(self) -> str:
        return f'<{self.__class__.__name__} t={self.iteration}>'


class GenerateCandidates(StageCommand):
    pass


class ScoreCandidates(StageCommand):
    pass


class FilterCandidates(StageCommand):
    pass


class MergeCorpus(StageCommand):
    pass


class TrainPolicySft(StageCommand):
    pass


class TrainPolicyGrpo(StageCommand):
    pass


class SamplePreferences(StageCommand):
    pass


class UpdateRewardModel(StageCommand):
    pass


class UpdateGenerator(StageCommand):
    pass


class EvaluatePolicy(StageCommand):
    pass


PIPELINE: tuple[type[StageCommand], ...] = (
    GenerateCandidates,
    ScoreCandidates,
    FilterCandidates,
    MergeCorpus,
    TrainPolicySft,
    TrainPolicyGrpo,
    SamplePreferences,
    UpdateRewardModel,
    UpdateGenerator,
    EvaluatePolicy,
)
"""Stage order of one iteration."""


class StageCompleted(message.Event):
    iteration: int
    stage: str
    summary: dict[str, t.Any] = {}

    def __repr__(self) -> str:
        return f'<StageCompleted t={self.iteration} {self.stage}>'


class IterationCommitted(message.Event):
    iteration: int
    dgen_size: int
    accuracy: float
    directory: str
