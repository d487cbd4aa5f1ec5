import pytest

from genloop import config
from genloop import errors
from .fakes import tiny_config


class TestParseOverrides:

    def test_nested_keys(self):
        assert config.parse_overrides([
            'tau = 2.5',
            'grpo.group_size=4  # smaller groups',
            '',
            '# a comment line',
        ]) == {'tau': '2.5', 'grpo': {'group_size': '4'}}

    def test_lists_and_json(self):
        parsed = config.parse_overrides([
            'harness.seeds=1, 2, 3',
            'split.mixture={"CT": 0.5, "MRI": 0.5}',
        ])
        assert parsed['harness']['seeds'] == ['1', '2', '3']
        assert parsed['split']['mixture'] == {'CT': 0.5, 'MRI': 0.5}

    @pytest.mark.parametrize('line', [
        'tau',
        'unknown=1',
        'grpo.unknown=1',
        'tau.nested=1',
        'split.mixture.CT.x=1',
    ])
    def test_rejected_lines(self, line):
        with pytest.raises(errors.ConfigError):
            config.parse_overrides([line])

    def test_mixture_entries_are_keys(self):
        assert config.parse_overrides(['split.mixture.CT=1.0']) == {
            'split': {'mixture': {'CT': '1.0'}}}

    def test_duplicate_key(self):
        with pytest.raises(errors.ConfigError):
            config.parse_overrides(['tau=1', 'tau=2'])

    def test_invalid_json(self):
        with pytest.raises(errors.ConfigError):
            config.parse_overrides(['harness.seeds=[1, 2'])


class TestBuildConfig:

    def test_defaults(self):
        loop = config.build_config()
        assert loop == config.LoopConfig()
        assert loop.tau == 4.0
        assert loop.grpo.alpha == 0.8 and loop.grpo.beta == 0.2

    def test_nested_merge_keeps_siblings(self):
        loop = config.build_config({'grpo': {'group_size': 4}})
        assert loop.grpo.group_size == 4
        assert loop.grpo.kl_coef == config.LoopConfig().grpo.kl_coef

    def test_mixture_is_replaced(self):
        loop = config.build_config({'split': {'mixture': {'CT': 1.0}}})
        assert loop.split.mixture == {'CT': 1.0}

    def test_base(self):
        base = tiny_config()
        loop = config.build_config({'tau': 0.0}, base)
        assert loop.candidates == base.candidates
        assert loop.tau == 0.0

    @pytest.mark.parametrize('overrides', [
        {'tau': 10.0},
        {'tau': -6.5},
        {'name': '../escape'},
        {'seed_size': 5000},
        {'harness': {'seeds': [1, 2]}},
        {'harness': {'seeds': [1, 1, 2]}},
        {'harness': {'top_k': [0]}},
        {'grpo': {'group_size': 1}},
        {'policy': {'width': 10, 'heads': 4}},
        {'unknown': 1},
    ])
    def test_invalid(self, overrides):
        with pytest.raises(errors.ConfigError):
            config.build_config(overrides)

    def test_tau_lower_bound_is_inclusive(self):
        assert config.build_config({'tau': -6.0}).tau == -6.0


class TestLoadConfig:

    def test_defaults_without_path(self):
        assert config.load_config() == config.LoopConfig()

    def test_file(self, tmp_path):
        path = tmp_path / 'run.cfg'
        path.write_text('name=small\ncandidates=100\n'
                        'harness.taus=0, 2.5\n', encoding='utf-8')
        loop = config.load_config(path)
        assert loop.name == 'small'
        assert loop.candidates == 100
        assert loop.harness.taus == (0.0, 2.5)

    def test_missing_file(self, tmp_path):
        with pytest.raises(errors.ConfigError):
            config.load_config(tmp_path / 'missing.cfg')


class TestConfigHash:

    def test_stable(self):
        assert config.config_hash(tiny_config()) == \
            config.config_hash(tiny_config())

    def test_sensitive(self):
        assert config.config_hash(tiny_config()) != \
            config.config_hash(tiny_config(tau=3.0))

    def test_exclude(self):
        a = tiny_config(iterations=2)
        b = tiny_config(iterations=5)
        assert config.config_hash(a) != config.config_hash(b)
        assert config.config_hash(a, {'iterations'}) == \
            config.config_hash(b, {'iterations'})
