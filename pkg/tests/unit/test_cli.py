import json

import pytest

from genloop import errors
from genloop import gradecorpus
from genloop import policy
from genloop import rewardmodel
from genloop import synthworld
from genloop.harness import cli
from genloop.harness import output
from .fakes import TINY


def _lines(overrides, prefix=''):
    for key, value in overrides.items():
        if isinstance(value, dict):
            yield from _lines(value, f'{prefix}{key}.')
        elif isinstance(value, list):
            yield f'{prefix}{key}={json.dumps(value)}'
        else:
            yield f'{prefix}{key}={value}'


@pytest.fixture(scope='module')
def config_file(tmp_path_factory):
    path = tmp_path_factory.mktemp('cfg') / 'tiny.cfg'
    path.write_text('\n'.join(_lines(TINY)) + '\n', encoding='utf-8')
    return str(path)


@pytest.fixture
def run(config_file, tmp_path):
    def invoke(*argv):
        command, *rest = argv
        return cli.main([command, '--config', config_file,
                         '--out', str(tmp_path), '--log-level', 'WARNING',
                         *rest])
    return invoke


class TestParser:

    def test_command_required(self):
        with pytest.raises(SystemExit):
            cli.create_parser().parse_args([])

    def test_common_options(self):
        args = cli.create_parser().parse_args(
            ['gen', '--seed', '3', '--count', '5'])
        assert args.seed == 3
        assert args.count == 5
        assert args.out == 'runs'
        assert args.func is cli.cmd_gen

    def test_unknown_experiment(self):
        with pytest.raises(SystemExit):
            cli.create_parser().parse_args(['experiment', 'nothing'])

    def test_filter_needs_candidates(self):
        with pytest.raises(SystemExit):
            cli.create_parser().parse_args(['filter'])


class TestCommands:

    def test_gen(self, run, tmp_path):
        assert run('gen', '--count', '7') == 0
        items = synthworld.read_triplets(tmp_path / 'candidates.records')
        assert len(items) == 7
        assert all(i.provenance == 'generated' for i in items)

    def test_seed_override_changes_output(self, run, tmp_path):
        run('gen', '--count', '5')
        first = synthworld.read_triplets(tmp_path / 'candidates.records')
        run('gen', '--count', '5', '--seed', '99')
        second = synthworld.read_triplets(tmp_path / 'candidates.records')
        assert first != second

    def test_grade_then_train(self, run, tmp_path):
        assert run('grade') == 0
        graded = gradecorpus.read_graded(tmp_path / 'graded.records')
        assert len(graded) == 40
        assert run('train-rm', '--graded',
                   str(tmp_path / 'graded.records')) == 0
        rewardmodel.RewardNet.load(tmp_path / 'rm.ckpt')
        losses = output.read_csv(tmp_path / 'rm_loss.csv')
        assert len(losses) == TINY['reward']['epochs']

    def test_filter(self, run, tmp_path):
        run('gen', '--count', '20')
        assert run('filter', '--candidates',
                   str(tmp_path / 'candidates.records'), '--tau', '-6') == 0
        scored = synthworld.read_triplets(tmp_path / 'scored.records')
        admitted = synthworld.read_triplets(tmp_path / 'dhigh.records')
        assert all(i.score is not None for i in scored)
        assert admitted == scored

    def test_filter_rejects_tau(self, run, tmp_path):
        run('gen', '--count', '2')
        assert run('filter', '--candidates',
                   str(tmp_path / 'candidates.records'),
                   '--tau', '10') == errors.ConfigError.exit_code

    def test_sft_then_eval(self, run, tmp_path, capsys):
        assert run('sft') == 0
        assert policy.PolicyNet.load(tmp_path / 'policy.ckpt')
        assert run('eval', '--policy', str(tmp_path / 'policy.ckpt')) == 0
        assert 'accuracy' in capsys.readouterr().out
        rows = output.read_csv(tmp_path / 'eval.csv')
        assert rows[0]['scope'] == 'overall'
        assert rows[0]['n'] == '32'

    def test_grpo(self, run, tmp_path):
        assert run('grpo') == 0
        trace = output.read_csv(tmp_path / 'grpo.csv')
        assert len(trace) == TINY['grpo']['steps']

    def test_loop(self, run, tmp_path):
        assert run('loop') == 0
        assert (tmp_path / 'tiny' / 'iter_2' / 'metrics.csv').exists()

    def test_experiment(self, run, tmp_path):
        assert run('experiment', 'strategies') == 0
        summary = output.read_csv(tmp_path / 'strategies_summary.csv')
        assert len(summary) == 3

    def test_missing_config(self, tmp_path):
        code = cli.main(['gen', '--config', str(tmp_path / 'nope.cfg'),
                         '--out', str(tmp_path)])
        assert code == errors.ConfigError.exit_code

    def test_unreadable_records(self, run, tmp_path):
        (tmp_path / 'broken.records').write_text('not a record\n',
                                                 encoding='utf-8')
        assert run('eval', '--policy', str(tmp_path / 'broken.records')) \
            == errors.DataError.exit_code
