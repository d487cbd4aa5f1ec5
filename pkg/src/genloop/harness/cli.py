"""The `genloop` command line. Every command reads the same flat
configuration file, writes its artifacts below `--out` and maps genloop
errors to exit codes."""
import argparse
import logging
import pathlib
import sys
import typing as t

from genloop import config as config_
from genloop import errors
from genloop import generator as generator_
from genloop import gradecorpus
from genloop import loop
from genloop import policy as policy_
from genloop import rewardmodel
from genloop import synthworld
from genloop import trainers
from genloop.harness import experiments
from genloop.harness import metrics
from genloop.harness import output
from genloop.loop import state as loop_state

logger = logging.getLogger('genloop')

EXPERIMENTS: dict[str, experiments.ExperimentKind] = {
    'topk': 'topk_vs_randk',
    'transfer': 'transfer_matrix',
    'ablation': 'ablation_ladder',
    'tau-sweep': 'tau_sweep',
    'transitions': 'transitions',
    'strategies': 'strategies',
}


def _load(args: argparse.Namespace) -> config_.LoopConfig:
    config = config_.load_config(args.config)
    if args.seed is not None:
        config = config_.build_config({'seed': args.seed}, config)
    return config


def _out(args: argparse.Namespace) -> pathlib.Path:
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _reward_model(
    args: argparse.Namespace,
    config: config_.LoopConfig,
) -> rewardmodel.RewardNet:
    if args.rm:
        return rewardmodel.RewardNet.load(args.rm, config.reward)
    context = loop.LoopContext(config)
    seed = loop.stage_seed(config.seed, 0, 'init')
    net, _ = rewardmodel.train_rm(
        rewardmodel.RewardNet.create(config.reward, seed), context.replay,
        config.reward.epochs, config.reward.lr, seed)
    return net


def cmd_gen(args: argparse.Namespace) -> None:
    config = _load(args)
    state = generator_.GenState.uniform(
        tuple(s.kind for s in config.generator.strategies))
    items = generator_.Generator(config.generator).generate_candidates(
        state, args.count or config.candidates, config.seed)
    path = _out(args) / 'candidates.records'
    synthworld.write_triplets(path, items)
    logger.info('wrote %d candidates to %s', len(items), path)


def cmd_grade(args: argparse.Namespace) -> None:
    config = _load(args)
    context = loop.LoopContext(config)
    path = _out(args) / 'graded.records'
    gradecorpus.write_graded(path, context.replay)
    logger.info('wrote %d graded examples to %s', len(context.replay), path)


def cmd_train_rm(args: argparse.Namespace) -> None:
    config = _load(args)
    corpus = (gradecorpus.read_graded(args.graded) if args.graded
              else loop.LoopContext(config).replay)
    seed = loop.stage_seed(config.seed, 0, 'init')
    net, losses = rewardmodel.train_rm(
        rewardmodel.RewardNet.create(config.reward, seed), corpus,
        config.reward.epochs, config.reward.lr, seed)
    out = _out(args)
    net.save(out / 'rm.ckpt')
    output.write_csv(out / 'rm_loss.csv', (
        {'epoch': i, 'loss': loss} for i, loss in enumerate(losses)))


def cmd_filter(args: argparse.Namespace) -> None:
    config = _load(args)
    tau = config.tau if args.tau is None else args.tau
    if not rewardmodel.SCORE_LOW <= tau < rewardmodel.SCORE_HIGH:
        raise errors.ConfigError('tau must lie in [-6, 10)')
    rm = _reward_model(args, config)
    scored = loop_state.score_candidates(
        rm, synthworld.read_triplets(args.candidates))
    admitted = loop.filter_high(scored, tau)
    out = _out(args)
    synthworld.write_triplets(out / 'scored.records', scored)
    synthworld.write_triplets(out / 'dhigh.records', admitted)
    logger.info('admitted %d of %d candidates at tau=%s',
                len(admitted), len(scored), tau)


def cmd_sft(args: argparse.Namespace) -> None:
    config = _load(args)
    data = (synthworld.read_triplets(args.data) if args.data
            else loop.LoopContext(config).split.train)
    net = (policy_.PolicyNet.load(args.policy) if args.policy
           else policy_.PolicyNet.create(config.policy, config.seed))
    trained, losses = trainers.run_sft(net, data, config.sft)
    out = _out(args)
    trained.save(out / 'policy.ckpt')
    output.write_csv(out / 'sft_loss.csv', (
        {'epoch': i, 'loss': loss} for i, loss in enumerate(losses)))


def cmd_grpo(args: argparse.Namespace) -> None:
    config = _load(args)
    context = loop.LoopContext(config)
    prompts = (synthworld.read_triplets(args.data) if args.data
               else context.split.train)
    net = (policy_.PolicyNet.load(args.policy) if args.policy
           else policy_.PolicyNet.create(config.policy, config.seed))
    reward = trainers.CompositeReward(
        _reward_model(args, config), config.grpo.alpha, config.grpo.beta)
    trained, trace = trainers.run_grpo(
        net, net.copy(), reward, prompts, config.grpo, context.split.val)
    out = _out(args)
    trained.save(out / 'policy.ckpt')
    output.write_csv(out / 'grpo.csv', trace,
                     tuple(trainers.GrpoStep.model_fields))


def cmd_loop(args: argparse.Namespace) -> None:
    config = _load(args)
    state = loop.run_loop(config, args.out)
    logger.info('finished %r', state)


def cmd_eval(args: argparse.Namespace) -> None:
    config = _load(args)
    test = (synthworld.read_triplets(args.data) if args.data
            else loop.LoopContext(config).split.test)
    report = metrics.evaluate(policy_.PolicyNet.load(args.policy), test)
    output.write_csv(_out(args) / 'eval.csv', metrics.report_rows(report))
    print(f'accuracy {report.accuracy:.4f} on {report.overall.n} items')


def cmd_experiment(args: argparse.Namespace) -> None:
    config = _load(args)
    plan = experiments.ExperimentPlan.from_config(
        EXPERIMENTS[args.kind], config.harness)
    result = experiments.run_experiment(
        experiments.ExperimentBench(config), plan)
    for path in result.write(str(_out(args))):
        logger.info('wrote %s', path)


def create_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', default=None,
                        help='flat key=value configuration file')
    common.add_argument('--seed', type=int, default=None,
                        help='master seed, overriding the configuration')
    common.add_argument('--out', default='runs',
                        help='output directory (default: runs)')
    common.add_argument('--log-level', default='INFO',
                        choices=('DEBUG', 'INFO', 'WARNING', 'ERROR'))

    parser = argparse.ArgumentParser(
        prog='genloop',
        description='Closed-loop data generation, reward filtering and '
                    'policy training on a synthetic VQA world.')
    commands = parser.add_subparsers(dest='command', required=True)

    def add(name: str, func: t.Callable[[argparse.Namespace], None],
            help: str) -> argparse.ArgumentParser:
        sub = commands.add_parser(name, parents=[common], help=help)
        sub.set_defaults(func=func)
        return sub

    gen = add('gen', cmd_gen, 'generate candidate triplets')
    gen.add_argument('--count', type=int, default=None)
    add('grade', cmd_grade, 'build the graded reward corpus')
    train_rm = add('train-rm', cmd_train_rm, 'train the reward model')
    train_rm.add_argument('--graded', default=None,
                          help='graded record file (default: build one)')
    filter_ = add('filter', cmd_filter, 'score and threshold candidates')
    filter_.add_argument('--candidates', required=True)
    filter_.add_argument('--rm', default=None)
    filter_.add_argument('--tau', type=float, default=None)
    sft = add('sft', cmd_sft, 'supervised fine-tuning of the policy')
    sft.add_argument('--data', default=None)
    sft.add_argument('--policy', default=None)
    grpo = add('grpo', cmd_grpo, 'GRPO training of the policy')
    grpo.add_argument('--data', default=None)
    grpo.add_argument('--policy', default=None)
    grpo.add_argument('--rm', default=None)
    add('loop', cmd_loop, 'run or resume the closed loop')
    evaluate = add('eval', cmd_eval, 'evaluate a policy checkpoint')
    evaluate.add_argument('--policy', required=True)
    evaluate.add_argument('--data', default=None)
    experiment = add('experiment', cmd_experiment, 'run an experiment')
    experiment.add_argument('kind', choices=tuple(EXPERIMENTS))
    return parser


def main(argv: t.Sequence[str] | None = None) -> int:
    args = create_parser().parse_args(argv)
    logging.basicConfig(
        level=args.log_level,
        format='%(asctime)s %(levelname)s %(name)s: %(message)s')
    try:
        args.func(args)
    except errors.GenloopError as ex:
        logger.error('%s: %s', type(ex).__name__, ex)
        return ex.exit_code
    return 0


if __name__ == '__main__':
    sys.exit(main())
