import collections
import math

import pytest
from hypothesis import given
from hypothesis import settings
from hypothesis import strategies as st

from genloop import errors
from genloop import generator
from genloop import synthworld
from genloop.synthworld import vocab


@pytest.fixture
def gen():
    return generator.Generator()


@pytest.fixture
def state():
    return generator.GenState.uniform()


class TestGeneratorConfig:

    def test_default_strategies_are_ordered(self):
        config = generator.GeneratorConfig()
        assert [s.kind for s in config.strategies] == [
            'direct', 'step_by_step', 'meta_cognitive']

    def test_correctness_must_increase(self):
        with pytest.raises(ValueError):
            generator.GeneratorConfig(strategies=(
                generator.GenStrategy(kind='direct', p=0.9),
                generator.GenStrategy(kind='meta_cognitive', p=0.5),
            ))

    def test_duplicate_strategies(self):
        with pytest.raises(ValueError):
            generator.GeneratorConfig(strategies=(
                generator.GenStrategy(kind='direct', p=0.5),
                generator.GenStrategy(kind='direct', p=0.6),
            ))

    def test_unknown_strategy(self):
        config = generator.GeneratorConfig(strategies=(
            generator.GenStrategy(kind='direct', p=0.5),))
        with pytest.raises(errors.ConfigError):
            config.strategy('meta_cognitive')


class TestGenState:

    def test_uniform(self, state):
        assert len(state.cells) == 3 * len(synthworld.TEMPLATES) * len(
            vocab.MODALITIES)
        assert math.fsum(state.weights) == pytest.approx(1.0)

    def test_weights_must_sum_to_one(self):
        with pytest.raises(ValueError):
            generator.GenState(
                cells=(('direct', 'counting.0', 'CT'),), weights=(0.5,))

    def test_weights_must_be_positive(self):
        with pytest.raises(ValueError):
            generator.GenState(
                cells=(('direct', 'counting.0', 'CT'),
                       ('direct', 'counting.1', 'CT')),
                weights=(1.0, 0.0))


class TestGenerateCandidates:

    def test_deterministic(self, gen, state):
        assert gen.generate_candidates(state, 50, 3) == \
            gen.generate_candidates(state, 50, 3)

    def test_prefix_stable(self, gen, state):
        assert gen.generate_candidates(state, 60, 3)[:20] == \
            gen.generate_candidates(state, 20, 3)

    def test_non_positive_n(self, gen, state):
        with pytest.raises(errors.ContractError):
            gen.generate_candidates(state, 0, 1)

    def test_candidates_are_generated_and_tagged(self, gen, state):
        for item in gen.generate_candidates(state, 40, 1):
            assert item.provenance == 'generated'
            assert item.strategy in generator.DEFAULT_CORRECTNESS
            value = synthworld.extract_answer(item.answer)
            assert value in synthworld.VALUE_DOMAINS[item.task]

    def test_rationale_follows_strategy(self, gen, state):
        for item in gen.generate_candidates(state, 60, 2):
            has_think = synthworld.has_think_span(item.answer)
            assert has_think == (item.strategy != 'direct')
            if item.strategy == 'meta_cognitive':
                assert item.answer[item.answer.index('/THINK') - 2] == \
                    'expect'

    def test_correctness_rates(self, gen):
        for kind, p in generator.DEFAULT_CORRECTNESS.items():
            single = generator.GenState.uniform(strategies=(kind,))
            items = gen.generate_candidates(single, 2000, 5)
            hits = sum(synthworld.extract_answer(i.answer)
                       == i.oracle_value() for i in items)
            assert hits / len(items) == pytest.approx(p, abs=0.04)

    def test_meta_cognitive_cycles_tasks(self, gen):
        single = generator.GenState.uniform(strategies=('meta_cognitive',))
        items = gen.generate_candidates(single, 8, 0)
        assert [i.task for i in items] == list(vocab.TASKS) * 2

    def test_single_cell_state(self, gen):
        cell = ('step_by_step', 'location.1', 'US')
        state = generator.GenState(cells=(cell,), weights=(1.0,))
        items = gen.generate_candidates(state, 10, 0)
        assert {(i.strategy, i.question.template_id, i.modality)
                for i in items} == {cell}


class TestSelfUpdate:

    def test_no_accepted_keeps_state(self, gen, state):
        assert gen.self_update(state, []) is state

    def test_rewarded_cell_gains(self, gen, state):
        items = gen.generate_candidates(state, 5, 0)
        updated = gen.self_update(state, [(items[0], 10.0)])
        cell = (items[0].strategy, items[0].question.template_id,
                items[0].modality)
        assert updated.weight(cell) > state.weight(cell)
        assert updated.updates == 1
        assert math.fsum(updated.weights) == pytest.approx(1.0)

    def test_negative_reward_loses(self, gen, state):
        item = gen.generate_candidates(state, 1, 0)[0]
        updated = gen.self_update(state, [(item, -6.0)])
        cell = (item.strategy, item.question.template_id, item.modality)
        assert updated.weight(cell) < state.weight(cell)

    def test_reward_out_of_range(self, gen, state):
        item = gen.generate_candidates(state, 1, 0)[0]
        with pytest.raises(errors.ContractError):
            gen.self_update(state, [(item, 11.0)])

    def test_zero_eta_keeps_weights(self, state):
        gen = generator.Generator(generator.GeneratorConfig(eta=0.0))
        item = gen.generate_candidates(state, 1, 0)[0]
        updated = gen.self_update(state, [(item, 10.0)])
        assert updated.weights == pytest.approx(state.weights)

    def test_repeated_updates_concentrate(self, gen, state):
        items = gen.generate_candidates(state, 200, 4)
        accepted = [(i, 10.0 if i.strategy == 'meta_cognitive' else -6.0)
                    for i in items]
        current = state
        for _ in range(5):
            current = gen.self_update(current, accepted)
        mass = collections.Counter()
        for (kind, _, _), weight in zip(current.cells, current.weights):
            mass[kind] += weight
        assert mass['meta_cognitive'] > 0.9

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.floats(-6.0, 10.0), min_size=1, max_size=20),
           st.integers(0, 2**16))
    def test_update_stays_on_simplex(self, rewards, seed):
        gen = generator.Generator()
        state = generator.GenState.uniform()
        items = gen.generate_candidates(state, len(rewards), seed)
        updated = gen.self_update(state, list(zip(items, rewards)))
        assert all(w > 0.0 for w in updated.weights)
        assert math.fsum(updated.weights) == pytest.approx(1.0, abs=1e-9)
