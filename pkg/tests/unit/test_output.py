import pydantic
import pytest

from genloop import errors
from genloop.harness import output


class Row(pydantic.BaseModel):
    seed: int
    accuracy: float
    note: str | None = None


class TestCsv:

    def test_round_trip(self, tmp_path):
        path = output.write_csv(tmp_path / 'out' / 'rows.csv', [
            Row(seed=1, accuracy=0.1 + 0.2),
            Row(seed=2, accuracy=0.5, note='x'),
        ])
        rows = output.read_csv(path)
        assert rows == [
            {'seed': '1', 'accuracy': '0.30000000000000004', 'note': None},
            {'seed': '2', 'accuracy': '0.5', 'note': 'x'},
        ]

    def test_explicit_fieldnames(self, tmp_path):
        path = output.write_csv(
            tmp_path / 'rows.csv', [{'a': 1}], fieldnames=['a', 'b'])
        assert path.read_text(encoding='utf-8') == 'a,b\n1,\n'

    def test_identical_rows_identical_bytes(self):
        rows = [{'x': 1 / 3, 'y': 'z'}]
        assert output.format_csv(rows) == output.format_csv(list(rows))

    def test_missing_file(self, tmp_path):
        with pytest.raises(errors.DataError):
            output.read_csv(tmp_path / 'missing.csv')


class TestDat:

    def test_layout(self, tmp_path):
        path = output.write_dat(
            tmp_path / 'plot.dat',
            [{'k': 10, 'acc': 0.25}, {'k': 20, 'acc': None}],
            ['k', 'acc'], comment='topk')
        assert path.read_text(encoding='utf-8') == (
            '# topk\n# k acc\n10 0.25\n20 NaN\n')


class TestAggregate:

    def test_mean_std(self):
        assert output.mean_std([1.0, 3.0]) == (2.0, pytest.approx(2 ** 0.5))
        assert output.mean_std([4.0]) == (4.0, 0.0)
        with pytest.raises(errors.ContractError):
            output.mean_std([])

    def test_groups_in_first_seen_order(self):
        rows = [
            {'condition': 'topk', 'seed': 1, 'acc': 0.5},
            {'condition': 'randk', 'seed': 1, 'acc': 0.2},
            {'condition': 'topk', 'seed': 2, 'acc': 0.7},
            {'condition': 'randk', 'seed': 2, 'acc': None},
        ]
        summary = output.aggregate(rows, ['condition'], ['acc'])
        assert [s['condition'] for s in summary] == ['topk', 'randk']
        assert summary[0]['n'] == 2
        assert summary[0]['acc_mean'] == pytest.approx(0.6)
        assert summary[1]['acc_mean'] == 0.2
        assert summary[1]['acc_std'] == 0.0

    def test_all_missing(self):
        summary = output.aggregate([{'g': 1, 'v': None}], ['g'], ['v'])
        assert summary[0]['v_mean'] is None
