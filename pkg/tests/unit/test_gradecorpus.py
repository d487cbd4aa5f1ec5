import collections

import pytest
from hypothesis import given
from hypothesis import settings
from hypothesis import strategies as st

from genloop import errors
from genloop import gradecorpus
from genloop import synthworld
from genloop.synthworld import vocab
from .fakes import oracle_items


@pytest.fixture(scope='module')
def oracles():
    return oracle_items(120, seed=2)


class TestOperators:

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 2**31), st.floats(0.0, 1.0))
    def test_synonyms_keep_the_answer(self, seed, rate):
        for item in oracle_items(5, seed=seed % 1000):
            perturbed = gradecorpus.perturb_synonym(item.answer, seed, rate)
            assert synthworld.extract_answer(perturbed) == \
                synthworld.extract_answer(item.answer)
            assert len(perturbed) == len(item.answer)

    def test_synonym_rate_one_swaps_everything(self):
        item = oracle_items(1, seed=3)[0]
        perturbed = gradecorpus.perturb_synonym(item.answer, 0, 1.0)
        for before, after in zip(item.answer, perturbed):
            if before in vocab.SYNONYMS or before in vocab.CANONICAL:
                assert after != before
            else:
                assert after == before

    def test_synonym_rate_zero_is_identity(self):
        item = oracle_items(1)[0]
        assert gradecorpus.perturb_synonym(item.answer, 0, 0.0) == \
            item.answer

    def test_invalid_rate(self):
        with pytest.raises(errors.ConfigError):
            gradecorpus.perturb_synonym(('ANS', 'yes', '/ANS'), 0, 1.5)

    def test_deletion_removes_one_run(self, oracles):
        for seed, item in enumerate(oracles[:40]):
            deleted = gradecorpus.delete_phrases(item.answer, seed)
            assert len(deleted) < len(item.answer)
            markers = [t for t in item.answer if t in vocab.MARKERS]
            assert [t for t in deleted if t in vocab.MARKERS] == markers

    def test_deletion_always_takes_the_value(self, oracles):
        for seed, item in enumerate(oracles):
            deleted = gradecorpus.delete_phrases(item.answer, seed)
            assert synthworld.extract_answer(deleted) == synthworld.INVALID

    def test_deletion_without_answer_span(self):
        answer = ('THINK', 'found', 'round', 'total', '2', '/THINK', 'EOS')
        deleted = gradecorpus.delete_phrases(answer, 4)
        assert len(deleted) < len(answer)
        assert deleted[0] == 'THINK' and deleted[-2:] == ('/THINK', 'EOS')

    def test_short_answers_lose_one_token(self):
        answer = ('ANS', 'yes', '/ANS', 'EOS')
        assert gradecorpus.delete_phrases(answer, 0) == ('ANS', '/ANS', 'EOS')

    def test_invalid_span(self):
        with pytest.raises(errors.ConfigError):
            gradecorpus.delete_phrases(('ANS', 'no', '/ANS'), 0, (0.6, 0.2))

    def test_hallucination_is_invalid(self, oracles):
        for seed, item in enumerate(oracles[:20]):
            fake = gradecorpus.hallucinate(item.answer, seed)
            assert synthworld.extract_answer(fake) == synthworld.INVALID
            assert all(tok in vocab.VOCAB for tok in fake)

    def test_irrelevant_prefers_other_tasks(self, oracles):
        item = oracles[0]
        for seed in range(20):
            answer = gradecorpus.make_irrelevant(item, oracles, seed, 1.0)
            value = synthworld.extract_answer(answer)
            assert value not in synthworld.VALUE_DOMAINS[item.task] or \
                value == synthworld.INVALID

    def test_irrelevant_needs_donors(self, oracles):
        with pytest.raises(errors.ContractError):
            gradecorpus.make_irrelevant(oracles[0], [], 0)


class TestGradedDataset:

    @pytest.fixture(scope='class')
    def dataset(self, oracles):
        return gradecorpus.build_graded_dataset(
            oracles, gradecorpus.GradeConfig(counts=(25, 25, 25, 25)), 1)

    def test_counts(self, dataset):
        counts = collections.Counter(e.grade for e in dataset)
        assert counts == {1: 25, 2: 25, 3: 25, 4: 25}

    def test_targets(self, dataset):
        for example in dataset:
            assert example.target_score == \
                gradecorpus.GRADE_SCORES[example.grade]

    def test_hosts_used_once(self, dataset):
        hosts = [e.triplet.prompt_key for e in dataset]
        assert len(hosts) == len(set(hosts))

    def test_grade_one_is_the_oracle(self, dataset):
        for example in dataset:
            if example.grade == 1:
                assert example.triplet.provenance == 'oracle'
            else:
                assert example.triplet.provenance == 'corrupted'

    def test_grade_two_keeps_the_value(self, dataset):
        for example in dataset:
            if example.grade == 2:
                assert synthworld.extract_answer(example.triplet.answer) == \
                    example.triplet.oracle_value()

    def test_deterministic(self, oracles, dataset):
        again = gradecorpus.build_graded_dataset(
            oracles, gradecorpus.GradeConfig(counts=(25, 25, 25, 25)), 1)
        assert again == dataset

    def test_too_few_oracles(self, oracles):
        with pytest.raises(errors.ConfigError):
            gradecorpus.build_graded_dataset(
                oracles[:10], gradecorpus.GradeConfig(counts=(5, 5, 5, 5)), 0)

    def test_mismatched_score_rejected(self, oracles):
        with pytest.raises(ValueError):
            gradecorpus.GradedExample(
                triplet=oracles[0], grade=1, target_score=6.0,
                corruption_seed=0)

    def test_counts_must_be_positive(self):
        with pytest.raises(ValueError):
            gradecorpus.GradeConfig(counts=(1, 0, 1, 1))

    def test_file_round_trip(self, tmp_path, dataset):
        gradecorpus.write_graded(tmp_path / 'graded.records', dataset)
        assert gradecorpus.read_graded(tmp_path / 'graded.records') == \
            dataset

    def test_plain_records_are_not_graded(self, tmp_path, oracles):
        synthworld.write_triplets(tmp_path / 'plain.records', oracles[:2])
        with pytest.raises(errors.DataError):
            gradecorpus.read_graded(tmp_path / 'plain.records')


@pytest.mark.parametrize('grade', [3, 4])
def test_corrupted_grades_break_oracle_agreement(grade):
    counts = (1, 1, 1000, 198)
    dataset = gradecorpus.build_graded_dataset(
        oracle_items(1200, seed=5), gradecorpus.GradeConfig(counts=counts), 3)
    corrupted = [e.triplet for e in dataset if e.grade == grade]
    agree = sum(synthworld.extract_answer(item.answer) == item.oracle_value()
                for item in corrupted)
    assert len(corrupted) == counts[grade - 1]
    assert agree / len(corrupted) <= 0.05
