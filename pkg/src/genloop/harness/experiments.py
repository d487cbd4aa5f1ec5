"""The experiment suite: reward filtered data efficiency (TopK against
RandK), cross-domain transfer, error transitions, the ablation ladder, a
threshold sweep and per-strategy data quality.

Every experiment runs on an `ExperimentBench`, which holds the splits,
the trained reward model and the generator of one configuration, and
returns an `ExperimentResult` of per-run rows plus a mean/std summary.
"""
import logging
import typing as t

import numpy as np
import pydantic

from genloop import config as config_
from genloop import errors
from genloop import generator as generator_
from genloop import policy as policy_
from genloop import rewardmodel
from genloop import synthworld
from genloop import trainers
from genloop.harness import metrics
from genloop.harness import output
from genloop.loop import state as state_
from genloop.synthworld import splits
from genloop.synthworld import vocab

logger = logging.getLogger(__name__)

ExperimentKind: t.TypeAlias = t.Literal[
    'topk_vs_randk', 'transfer_matrix', 'ablation_ladder', 'tau_sweep',
    'transitions', 'strategies',
]
TrainFn: t.TypeAlias = t.Callable[
    [t.Sequence[synthworld.VqaTriplet], int], policy_.PolicyNet]
"""Trains a fresh policy on a data set with a seed."""


class ExperimentPlan(pydantic.BaseModel):
    """What an experiment sweeps and over which seeds."""
    model_config = pydantic.ConfigDict(frozen=True)

    kind: ExperimentKind
    seeds: tuple[int, ...]
    k_values: tuple[int, ...] = ()
    domains: tuple[str, ...] = ()
    taus: tuple[float, ...] = ()

    @pydantic.field_validator('seeds')
    @classmethod
    def _check_seeds(cls, value: tuple[int, ...]) -> tuple[int, ...]:
        if len(value) < 3:
            raise ValueError('every condition needs at least three seeds')
        return value

    @classmethod
    def from_config(
        cls,
        kind: ExperimentKind,
        harness: config_.HarnessConfig,
    ) -> 'ExperimentPlan':
        domains = (vocab.TASKS if harness.transfer_axis == 'task'
                   else vocab.MODALITIES)
        return cls(kind=kind, seeds=harness.seeds, k_values=harness.top_k,
                   domains=domains, taus=harness.taus)


class ExperimentResult(pydantic.BaseModel):
    model_config = pydantic.ConfigDict(frozen=True)

    kind: ExperimentKind
    rows: tuple[dict[str, t.Any], ...]
    summary: tuple[dict[str, t.Any], ...]

    def write(self, directory: str) -> list[str]:
        """`<kind>.csv`, `<kind>_summary.csv` and a gnuplot file of the
        summary."""
        paths = [
            output.write_csv(f'{directory}/{self.kind}.csv', self.rows),
            output.write_csv(
                f'{directory}/{self.kind}_summary.csv', self.summary),
        ]
        if self.summary:
            paths.append(output.write_dat(
                f'{directory}/{self.kind}.dat', self.summary,
                list(self.summary[0]), comment=self.kind))
        return [str(p) for p in paths]


def _seed(seed: int, *path: int) -> list[int]:
    return [seed, *path]


class ExperimentBench:
    """Shared inputs of the experiments for one configuration. The reward
    model is trained once, on the graded corpus drawn from the train
    split, with the master seed."""

    def __init__(self, config: config_.LoopConfig) -> None:
        self.config = config
        self.context = state_.LoopContext(config)
        seed = state_.stage_seed(config.seed, 0, 'init')
        self.rm, _ = rewardmodel.train_rm(
            rewardmodel.RewardNet.create(config.reward, seed),
            self.context.replay, config.reward.epochs, config.reward.lr,
            seed)
        self._exclude = {item.prompt_key for item in self.test}

    def __repr__(self) -> str:
        return f'<ExperimentBench {self.config.name}>'

    @property
    def test(self) -> tuple[synthworld.VqaTriplet, ...]:
        return self.context.split.test

    @property
    def generator(self) -> generator_.Generator:
        return self.context.generator

    def base_policy(self, seed: int) -> policy_.PolicyNet:
        return policy_.PolicyNet.create(self.config.policy, seed)

    def pool(
        self,
        size: int,
        seed: int,
        state: generator_.GenState | None = None,
    ) -> tuple[synthworld.VqaTriplet, ...]:
        """Scored generated candidates, none sharing a prompt with the test
        split."""
        state = state or generator_.GenState.uniform(
            tuple(s.kind for s in self.config.generator.strategies))
        items = self.generator.generate_candidates(state, size, seed)
        items = [i for i in items if i.prompt_key not in self._exclude]
        return state_.score_candidates(self.rm, items)

    def oracle_data(
        self,
        size: int,
        seed: int,
        tasks: t.Sequence[str] = vocab.TASKS,
        mixture: t.Mapping[str, float] | None = None,
    ) -> list[synthworld.VqaTriplet]:
        """Unique oracle triplets outside the test split."""
        rng = np.random.default_rng(_seed(seed, 0x0DA7))
        mixture = mixture or self.config.split.mixture
        seen = set(self._exclude)
        items: list[synthworld.VqaTriplet] = []
        for _ in range(50 * size):
            if len(items) == size:
                break
            img = synthworld.sample_image(int(rng.integers(2**62)), mixture)
            item = synthworld.oracle_triplet(
                img, splits.sample_prompt(rng, img, tasks))
            if item.prompt_key not in seen:
                seen.add(item.prompt_key)
                items.append(item)
        return items

    def sft(
        self,
        data: t.Sequence[synthworld.VqaTriplet],
        seed: int,
    ) -> policy_.PolicyNet:
        config = self.config.sft.model_copy(update={'seed': seed})
        trained, _ = trainers.run_sft(self.base_policy(seed), data, config)
        return trained

    def grpo(
        self,
        net: policy_.PolicyNet,
        prompts: t.Sequence[synthworld.VqaTriplet],
        seed: int,
    ) -> policy_.PolicyNet:
        config = self.config.grpo.model_copy(update={'seed': seed})
        reward = trainers.CompositeReward(self.rm, config.alpha, config.beta)
        trained, _ = trainers.run_grpo(
            net, net.copy(), reward, prompts, config)
        return trained

    def sft_grpo(
        self,
        data: t.Sequence[synthworld.VqaTriplet],
        seed: int,
    ) -> policy_.PolicyNet:
        return self.grpo(self.sft(data, seed), data, seed)

    def evaluate(self, net: policy_.PolicyNet) -> metrics.EvalReport:
        return metrics.evaluate(net, self.test)


def top_k(
    pool: t.Sequence[synthworld.VqaTriplet],
    k: int,
) -> list[synthworld.VqaTriplet]:
    """The k highest scoring samples; ties broken by sample key."""
    if any(item.score is None for item in pool):
        raise errors.ContractError('top-k needs scored samples')
    ranked = sorted(pool, key=lambda item: (-item.score, item.key))
    return ranked[:k]


def random_k(
    pool: t.Sequence[synthworld.VqaTriplet],
    k: int,
    seed: int,
) -> list[synthworld.VqaTriplet]:
    rng = np.random.default_rng(_seed(seed, k, 0x2A4D))
    return [pool[int(i)] for i in rng.choice(len(pool), k, replace=False)]


def _report_row(report: metrics.EvalReport) -> dict[str, t.Any]:
    return {
        'accuracy': report.overall.accuracy,
        'balanced_accuracy': report.overall.balanced_accuracy,
        'macro_f1': report.overall.macro_f1,
        'auroc': report.overall.auroc,
    }


_REPORTED = ('accuracy', 'balanced_accuracy', 'macro_f1', 'auroc')


def topk_vs_randk(
    bench: ExperimentBench,
    pool: t.Sequence[synthworld.VqaTriplet],
    k_values: t.Sequence[int],
    baseline_size: int,
    seeds: t.Sequence[int],
) -> ExperimentResult:
    """SFT on the top K by reward score against SFT on a random K, for
    every K and seed, plus an unfiltered baseline of `baseline_size`
    random samples and GRPO on the top K.

    Raises:
        errors.ConfigError: when a K or the baseline exceeds the pool.
    """
    largest = max([*k_values, baseline_size])
    if largest > len(pool):
        raise errors.ConfigError(
            f'K={largest} exceeds the pool of {len(pool)} samples')
    rows = []
    for seed in seeds:
        baseline = bench.sft(random_k(pool, baseline_size, seed), seed)
        rows.append({'condition': 'full', 'k': baseline_size, 'seed': seed,
                     **_report_row(bench.evaluate(baseline))})
        for k in k_values:
            best = top_k(pool, k)
            topk_net = bench.sft(best, seed)
            conditions = {
                'topk': topk_net,
                'randk': bench.sft(random_k(pool, k, seed), seed),
                'topk_grpo': bench.grpo(topk_net, best, seed),
            }
            for name, net in conditions.items():
                rows.append({'condition': name, 'k': k, 'seed': seed,
                             **_report_row(bench.evaluate(net))})
            logger.info('topk experiment seed %d K=%d done', seed, k)
    return ExperimentResult(
        kind='topk_vs_randk',
        rows=tuple(rows),
        summary=tuple(output.aggregate(rows, ('condition', 'k'), _REPORTED)),
    )


def domain_data(
    bench: ExperimentBench,
    axis: t.Literal['task', 'modality'],
    domain: str,
    size: int,
    seed: int,
) -> list[synthworld.VqaTriplet]:
    if axis == 'task':
        return bench.oracle_data(size, seed, tasks=(domain,))
    return bench.oracle_data(size, seed, mixture={domain: 1.0})


def _domain_accuracy(
    report: metrics.EvalReport,
    axis: str,
) -> dict[str, float]:
    groups = report.per_task if axis == 'task' else report.per_modality
    return {domain: scores.accuracy for domain, scores in groups.items()}


def transfer_matrix(
    bench: ExperimentBench,
    axis: t.Literal['task', 'modality'],
    domains: t.Sequence[str],
    seeds: t.Sequence[int],
    size: int,
    train_fn: TrainFn | None = None,
) -> ExperimentResult:
    """Train on one source domain at a time and evaluate zero-shot on every
    target domain. Deltas are against the untrained policy of the same
    seed.

    Raises:
        errors.ConfigError: with fewer than two domains, an unknown domain
            or a source domain without data.
    """
    known = vocab.TASKS if axis == 'task' else vocab.MODALITIES
    if len(domains) < 2:
        raise errors.ConfigError('a transfer matrix needs two domains')
    for domain in domains:
        if domain not in known:
            raise errors.ConfigError(f'unknown {axis} {domain!r}')
    train_fn = train_fn or bench.sft_grpo
    rows = []
    for seed in seeds:
        baseline = _domain_accuracy(
            bench.evaluate(bench.base_policy(seed)), axis)
        for source in domains:
            data = domain_data(bench, axis, source, size, seed)
            if not data:
                raise errors.ConfigError(f'no data for source {source!r}')
            trained = _domain_accuracy(
                bench.evaluate(train_fn(data, seed)), axis)
            for target in domains:
                rows.append({
                    'seed': seed,
                    'source': source,
                    'target': target,
                    'accuracy': trained.get(target),
                    'baseline': baseline.get(target),
                    'delta': (None if target not in trained
                              else trained[target] - baseline[target]),
                })
    return ExperimentResult(
        kind='transfer_matrix',
        rows=tuple(rows),
        summary=tuple(output.aggregate(
            rows, ('source', 'target'), ('accuracy', 'delta'))),
    )


def delta_matrix(
    result: ExperimentResult,
    domains: t.Sequence[str],
) -> list[list[float | None]]:
    """Mean deltas as a |domains| x |domains| matrix, source by row."""
    cells = {(r['source'], r['target']): r['delta_mean']
             for r in result.summary}
    return [[cells.get((s, d)) for d in domains] for s in domains]


def error_transitions(
    bench: ExperimentBench,
    seeds: t.Sequence[int],
    size: int,
) -> ExperimentResult:
    """SFT-only against SFT followed by GRPO, on the same data, counting
    the four transitions per modality."""
    rows = []
    for seed in seeds:
        data = bench.oracle_data(size, seed)
        sft_net = bench.sft(data, seed)
        grpo_net = bench.grpo(sft_net, data, seed)
        report = metrics.error_transitions(sft_net, grpo_net, bench.test)
        for modality, counts in report.per_modality.items():
            rows.append({'seed': seed, 'modality': modality,
                         **counts.model_dump(), 'n': counts.total})
    names = tuple(metrics.TransitionCounts.model_fields)
    return ExperimentResult(
        kind='transitions',
        rows=tuple(rows),
        summary=tuple(output.aggregate(rows, ('modality',), names)),
    )


def ablation_ladder(
    bench: ExperimentBench,
    seeds: t.Sequence[int],
    budget: int,
) -> ExperimentResult:
    """Four rungs per seed on identical budgets: the untrained policy, SFT
    on unfiltered generated data, SFT on reward filtered data and GRPO on
    top of the latter. The filtered set holds samples scoring above tau;
    when fewer exist both SFT rungs shrink to that count."""
    rows = []
    for seed in seeds:
        pool = bench.pool(4 * budget, seed)
        rewarded = [i for i in pool if i.score > bench.config.tau][:budget]
        if not rewarded:
            raise errors.ConfigError(
                f'no generated sample scores above tau={bench.config.tau}')
        raw = random_k(pool, len(rewarded), seed)
        rewarded_net = bench.sft(rewarded, seed)
        rungs = {
            'base': (bench.base_policy(seed), 0),
            'sft_raw': (bench.sft(raw, seed), len(raw)),
            'sft_rewarded': (rewarded_net, len(rewarded)),
            'grpo': (bench.grpo(rewarded_net, rewarded, seed),
                     len(rewarded)),
        }
        for rung, (net, size) in rungs.items():
            rows.append({'rung': rung, 'seed': seed, 'train_size': size,
                         **_report_row(bench.evaluate(net))})
    return ExperimentResult(
        kind='ablation_ladder',
        rows=tuple(rows),
        summary=tuple(output.aggregate(rows, ('rung',), _REPORTED)),
    )


def tau_sweep(
    bench: ExperimentBench,
    taus: t.Sequence[float],
    seeds: t.Sequence[int],
    pool_size: int,
) -> ExperimentResult:
    """Admitted count and SFT accuracy for every threshold. A threshold
    admitting nothing reports no accuracy."""
    rows = []
    for seed in seeds:
        pool = bench.pool(pool_size, seed)
        for tau in taus:
            admitted = state_.filter_high(pool, tau)
            row: dict[str, t.Any] = {
                'tau': tau, 'seed': seed, 'admitted': len(admitted),
                'oracle_agreement': _agreement(admitted),
                'accuracy': None,
            }
            if admitted:
                row['accuracy'] = bench.evaluate(
                    bench.sft(admitted, seed)).overall.accuracy
            rows.append(row)
    return ExperimentResult(
        kind='tau_sweep',
        rows=tuple(rows),
        summary=tuple(output.aggregate(
            rows, ('tau',), ('admitted', 'oracle_agreement', 'accuracy'))),
    )


def _agreement(items: t.Sequence[synthworld.VqaTriplet]) -> float | None:
    if not items:
        return None
    hits = sum(synthworld.extract_answer(i.answer) == i.oracle_value()
               for i in items)
    return hits / len(items)


def strategy_quality(
    bench: ExperimentBench,
    seeds: t.Sequence[int],
    samples: int,
) -> ExperimentResult:
    """Each strategy alone: oracle agreement of its answers, their mean
    reward score and the share admitted at tau."""
    rows = []
    for seed in seeds:
        for strategy in bench.config.generator.strategies:
            state = generator_.GenState.uniform((strategy.kind,))
            pool = bench.pool(samples, seed, state)
            rows.append({
                'strategy': strategy.kind,
                'seed': seed,
                'oracle_agreement': _agreement(pool),
                'mean_score': float(np.mean([i.score for i in pool])),
                'acceptance': len(
                    state_.filter_high(pool, bench.config.tau)) / len(pool),
            })
    return ExperimentResult(
        kind='strategies',
        rows=tuple(rows),
        summary=tuple(output.aggregate(
            rows, ('strategy',),
            ('oracle_agreement', 'mean_score', 'acceptance'))),
    )


def run_experiment(
    bench: ExperimentBench,
    plan: ExperimentPlan,
) -> ExperimentResult:
    """Run the experiment a plan names with the bench's harness sizes."""
    harness = bench.config.harness
    if plan.kind == 'topk_vs_randk':
        pool = bench.pool(harness.pool_size, bench.config.seed)
        return topk_vs_randk(
            bench, pool, plan.k_values, len(pool), plan.seeds)
    if plan.kind == 'transfer_matrix':
        return transfer_matrix(
            bench, harness.transfer_axis, plan.domains, plan.seeds,
            harness.transfer_size)
    if plan.kind == 'ablation_ladder':
        return ablation_ladder(bench, plan.seeds, harness.ladder_size)
    if plan.kind == 'tau_sweep':
        return tau_sweep(bench, plan.taus, plan.seeds, harness.pool_size)
    if plan.kind == 'transitions':
        return error_transitions(bench, plan.seeds, harness.ladder_size)
    return strategy_quality(bench, plan.seeds, harness.strategy_samples)


