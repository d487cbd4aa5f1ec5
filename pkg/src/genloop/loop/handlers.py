"""Command handlers, one per stage of the closed loop. Each handler turns
the state of its command into the next state and reports a summary of
what it did as a `StageCompleted` event."""
import abc
import logging
import typing as t

import numpy as np

from genloop import config as config_
from genloop import errors
from genloop import handler
from genloop import policy as policy_
from genloop import rewardmodel
from genloop import synthworld
from genloop import trainers
from genloop.harness import metrics
from genloop.loop import commands
from genloop.loop import state as state_
from genloop.synthworld import splits

logger = logging.getLogger(__name__)


class StageHandler(handler.CommandHandler[state_.LoopState]):
    """Runs one stage. Subclasses implement `run` and name their stage."""
    stage: t.ClassVar[state_.Stage]

    def __init__(
        self,
        stream: handler.EventStream,
        context: state_.LoopContext,
    ) -> None:
        super().__init__(stream)
        self.context = context

    @property
    def config(self) -> config_.LoopConfig:
        return self.context.config

    def seed(self, cmd: commands.StageCommand) -> int:
        return state_.stage_seed(self.config.seed, cmd.iteration, self.stage)

    def handle(self, cmd: commands.StageCommand) -> state_.LoopState:
        result, summary = self.run(cmd)
        self.next(cmd)
        self.push(commands.StageCompleted(
            iteration=cmd.iteration, stage=self.stage, summary=summary))
        return result

    @abc.abstractmethod
    def run(
        self,
        cmd: commands.StageCommand,
    ) -> tuple[state_.LoopState, dict[str, t.Any]]:
        raise NotImplementedError


class GenerateCandidatesHandler(StageHandler):
    stage = 'generate'

    def run(self, cmd):
        d_cand = self.context.generator.generate_candidates(
            cmd.state.gen, self.config.candidates, self.seed(cmd))
        return cmd.state.advance(d_cand=tuple(d_cand)), {
            'candidates': len(d_cand)}


class ScoreCandidatesHandler(StageHandler):
    stage = 'score'

    def run(self, cmd):
        d_cand = state_.score_candidates(cmd.state.rm, cmd.state.d_cand)
        scores = [item.score for item in d_cand]
        return cmd.state.advance(d_cand=d_cand), {
            'mean_score': float(np.mean(scores)) if scores else None}


class FilterCandidatesHandler(StageHandler):
    stage = 'filter'

    def run(self, cmd):
        passed = state_.filter_high(cmd.state.d_cand, self.config.tau)
        d_high = passed
        if not self.config.allow_overlap:
            d_high = state_.dedup(passed, cmd.state.d_gen)
        return cmd.state.advance(d_high=d_high), {
            'passed': len(passed), 'admitted': len(d_high)}


class MergeCorpusHandler(StageHandler):
    stage = 'merge'

    def run(self, cmd):
        d_gen = state_.merge_corpus(
            cmd.state.d_gen, cmd.state.d_high, cmd.iteration)
        return cmd.state.advance(d_gen=d_gen), {'dgen': len(d_gen)}


class TrainPolicySftHandler(StageHandler):
    stage = 'sft'

    def run(self, cmd):
        seed = self.seed(cmd)
        start = cmd.state.policy
        if self.config.sft_from_scratch:
            start = policy_.PolicyNet.create(self.config.policy, seed)
        sft = self.config.sft.model_copy(update={'seed': seed})
        trained, losses = trainers.run_sft(start, cmd.state.d_gen, sft)
        return cmd.state.advance(policy=trained), {'sft_loss': losses[-1]}


class TrainPolicyGrpoHandler(StageHandler):
    """GRPO on the D_gen prompts against the SFT checkpoint as the frozen
    reference, rewarded by the current reward model."""
    stage = 'grpo'

    def run(self, cmd):
        grpo = self.config.grpo.model_copy(update={'seed': self.seed(cmd)})
        reward = trainers.CompositeReward(
            cmd.state.rm, grpo.alpha, grpo.beta)
        ref = cmd.state.policy.copy()
        trained, trace = trainers.run_grpo(
            cmd.state.policy, ref, reward, cmd.state.d_gen, grpo,
            val=self.context.split.val)
        mean_reward = float(np.mean([step.mean_reward for step in trace]))
        return cmd.state.advance(policy=trained), {
            'grpo_reward': mean_reward, 'kl': trace[-1].kl}


def _fresh_prompts(
    config: config_.LoopConfig,
    count: int,
    seed: int,
) -> list[synthworld.VqaTriplet]:
    rng = np.random.default_rng([seed, 0xD9EF])
    items = []
    for _ in range(count):
        img = synthworld.sample_image(
            int(rng.integers(2**62)), config.split.mixture)
        question = splits.sample_prompt(rng, img, config.split.tasks)
        items.append(synthworld.oracle_triplet(img, question))
    return items


class SamplePreferencesHandler(StageHandler):
    """D_pref: one sampled answer of the current policy per fresh prompt,
    with a target derived from the oracle answer."""
    stage = 'preferences'

    def run(self, cmd):
        seed = self.seed(cmd)
        prompts = _fresh_prompts(self.config, self.config.pref_size, seed)
        rng = np.random.default_rng([seed, 0x5A])
        records = []
        for item in prompts:
            completion = policy_.sample_answer(
                cmd.state.policy, item.image, item.question.tokens,
                self.config.grpo.temperature, int(rng.integers(2**62)))
            answer = policy_.completion_triplet(item, completion)
            answer = answer.model_copy(update={'iteration': cmd.iteration})
            records.append(rewardmodel.PreferenceRecord(
                triplet=answer,
                target_score=rewardmodel.derive_pref_target(
                    answer, item.answer),
                iteration=cmd.iteration,
            ))
        targets = [r.target_score for r in records]
        return cmd.state.advance(d_pref=tuple(records)), {
            'preferences': len(records),
            'mean_target': float(np.mean(targets)) if targets else None}


class UpdateRewardModelHandler(StageHandler):
    stage = 'reward'

    def run(self, cmd):
        rm = rewardmodel.continual_update(
            cmd.state.rm, cmd.state.d_pref, self.context.replay,
            self.config.reward.update_epochs, self.seed(cmd))
        mse = None
        if cmd.state.d_pref:
            scores = rewardmodel.score_batch(
                rm, [r.triplet for r in cmd.state.d_pref])
            targets = np.array([r.target_score for r in cmd.state.d_pref])
            mse = float(np.mean((scores - targets) ** 2))
        return cmd.state.advance(rm=rm), {'rm_pref_mse': mse}


class UpdateGeneratorHandler(StageHandler):
    """Self-update of the generator from the admitted samples, every
    `update_every` iterations."""
    stage = 'generator'

    def run(self, cmd):
        if cmd.iteration % self.config.generator.update_every:
            return cmd.state, {'updated': False}
        accepted = [(item, item.score) for item in cmd.state.d_high]
        gen = self.context.generator.self_update(cmd.state.gen, accepted)
        return cmd.state.advance(gen=gen), {'updated': bool(accepted)}


class EvaluatePolicyHandler(StageHandler):
    """Scores the new policy on the test split and appends the iteration's
    metrics row; the state then becomes iteration t."""
    stage = 'evaluate'

    def run(self, cmd):
        s = cmd.state
        report = metrics.evaluate(s.policy, self.context.split.test)
        stages = self.context.summaries.get(cmd.iteration, {})
        missing = [h.stage for h in HANDLERS.values()
                   if h.stage != self.stage and h.stage not in stages]
        if missing:
            raise errors.ContractError(
                f'iteration {cmd.iteration} lacks summaries of {missing}')
        row = state_.MetricsRow(
            iteration=cmd.iteration,
            dgen_size=len(s.d_gen),
            dcand_size=len(s.d_cand),
            dhigh_size=len(s.d_high),
            dpref_size=len(s.d_pref),
            sft_loss=stages.get('sft', {}).get('sft_loss'),
            grpo_reward=stages.get('grpo', {}).get('grpo_reward'),
            rm_pref_mse=stages.get('reward', {}).get('rm_pref_mse'),
            accuracy=report.overall.accuracy,
            balanced_accuracy=report.overall.balanced_accuracy,
            macro_f1=report.overall.macro_f1,
            auroc=report.overall.auroc,
            generator_updates=s.gen.updates,
        )
        return s.advance(iteration=cmd.iteration,
                         history=(*s.history, row)), {
            'accuracy': report.overall.accuracy}


class SummaryRecorder(handler.EventHandler):
    """Keeps the summary of every completed stage on the context, where the
    evaluation stage picks them up for the metrics row."""

    def __init__(
        self,
        stream: handler.EventStream,
        context: state_.LoopContext,
    ) -> None:
        super().__init__(stream)
        self.context = context

    def handle(self, event: commands.StageCompleted) -> None:
        self.context.summaries.setdefault(event.iteration, {})[
            event.stage] = dict(event.summary)
        self.next(event)


HANDLERS: dict[type[commands.StageCommand], type[StageHandler]] = {
    commands.GenerateCandidates: GenerateCandidatesHandler,
    commands.ScoreCandidates: ScoreCandidatesHandler,
    commands.FilterCandidates: FilterCandidatesHandler,
    commands.MergeCorpus: MergeCorpusHandler,
    commands.TrainPolicySft: TrainPolicySftHandler,
    commands.TrainPolicyGrpo: TrainPolicyGrpoHandler,
    commands.SamplePreferences: SamplePreferencesHandler,
    commands.UpdateRewardModel: UpdateRewardModelHandler,
    commands.UpdateGenerator: UpdateGeneratorHandler,
    commands.EvaluatePolicy: EvaluatePolicyHandler,
}
