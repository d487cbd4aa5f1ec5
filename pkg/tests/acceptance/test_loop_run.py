import pytest

from genloop import config
from genloop.harness import cli
from genloop.loop import runner
from genloop.loop import store as store_

pytestmark = pytest.mark.slow


@pytest.fixture(scope='module')
def straight(tmp_path_factory):
    out = tmp_path_factory.mktemp('straight')
    loop = config.LoopConfig(name='accept', iterations=3)
    return out, runner.run_loop(loop, out)


def test_loop_invariants(straight):
    _, final = straight
    sizes = [row.dgen_size for row in final.history]
    assert sizes == sorted(sizes)
    keys = [item.key for item in final.d_gen]
    assert len(keys) == len(set(keys))
    tau = config.LoopConfig().tau
    assert all(item.score > tau for item in final.d_high)
    accuracy = [row.accuracy for row in final.history]
    assert accuracy[2] >= accuracy[0] - 0.01


def test_resume_is_byte_identical(straight, tmp_path):
    out, _ = straight
    runner.run_loop(config.LoopConfig(name='accept', iterations=2), tmp_path)
    runner.run_loop(config.LoopConfig(name='accept', iterations=3), tmp_path)
    for name in store_.FILES:
        resumed = tmp_path / 'accept' / 'iter_3' / name
        uninterrupted = out / 'accept' / 'iter_3' / name
        assert resumed.read_bytes() == uninterrupted.read_bytes(), name


def test_commands_are_deterministic(tmp_path):
    for run in ('a', 'b'):
        assert cli.main(['train-rm', '--out', str(tmp_path / run),
                         '--log-level', 'WARNING']) == 0
    for name in ('rm.ckpt', 'rm_loss.csv'):
        assert (tmp_path / 'a' / name).read_bytes() == \
            (tmp_path / 'b' / name).read_bytes()
