import collections

import numpy as np
import pytest
from hypothesis import given
from hypothesis import settings
from hypothesis import strategies as st

from genloop import errors
from genloop import synthworld
from genloop.synthworld import image
from genloop.synthworld import oracle
from genloop.synthworld import question
from genloop.synthworld import splits
from genloop.synthworld import vocab
from .fakes import oracle_items


def _image(*findings: tuple[str, str, str, int, int],
           modality: str = 'CT') -> synthworld.SynthImage:
    parsed = [
        synthworld.Finding(shape=s, intensity=i, size=z, row=r, col=c)
        for s, i, z, r, c in findings]
    parsed.sort(key=synthworld.Finding.salience)
    return synthworld.SynthImage(
        seed=1, modality=modality, findings=tuple(parsed))


class TestVocab:

    def test_ids_are_contiguous(self):
        assert [vocab.VOCAB.id(tok) for tok in vocab.VOCAB.tokens] == list(
            range(len(vocab.VOCAB)))

    def test_unknown_token(self):
        with pytest.raises(errors.DataError):
            vocab.VOCAB.id('unicorn')

    def test_tokenize_round_trip(self):
        text = 'THINK largest round high rule C2 /THINK ANS C2 /ANS EOS'
        assert vocab.VOCAB.detokenize(vocab.VOCAB.tokenize(text)) == text

    def test_duplicates_rejected(self):
        with pytest.raises(errors.ConfigError):
            vocab.Vocab(['a', 'b', 'a'])

    def test_synonyms_stay_in_class(self):
        for canonical, synonym in vocab.SYNONYMS.items():
            assert canonical in vocab.VOCAB
            assert synonym in vocab.VOCAB
            assert vocab.CANONICAL[synonym] == canonical


class TestImage:

    def test_same_seed_same_image(self):
        assert synthworld.sample_image(42) == synthworld.sample_image(42)

    def test_findings_within_bounds(self):
        for seed in range(200):
            img = synthworld.sample_image(seed)
            assert 1 <= len(img.findings) <= image.MAX_FINDINGS
            assert len({f.position for f in img.findings}) == len(
                img.findings)

    def test_largest_is_most_salient(self):
        img = _image(('round', 'high', 'small', 0, 0),
                     ('diffuse', 'low', 'large', 7, 7),
                     ('linear', 'mid', 'large', 2, 2))
        assert img.largest.shape == 'linear'

    def test_position_breaks_ties(self):
        img = _image(('round', 'mid', 'large', 5, 1),
                     ('diffuse', 'mid', 'large', 1, 6))
        assert img.largest.shape == 'diffuse'

    def test_image_for_ignores_mixture(self):
        img = synthworld.sample_image(7, {'OCT': 1.0})
        assert img.modality == 'OCT'
        assert synthworld.image_for(7, 'OCT') == img

    def test_single_modality_mixture(self):
        for seed in range(30):
            assert synthworld.sample_image(seed, {'Micro': 1.0}).modality \
                == 'Micro'

    @pytest.mark.parametrize('mixture', [
        {'CT': 0.5, 'MRI': 0.4},
        {'CT': 1.2, 'MRI': -0.2},
        {'Unknown': 1.0},
    ])
    def test_invalid_mixture(self, mixture):
        with pytest.raises(errors.ConfigError):
            synthworld.sample_image(1, mixture)

    def test_default_mixture_frequencies(self):
        counts = collections.Counter(
            synthworld.sample_image(seed).modality for seed in range(20000))
        assert counts['MRI'] / 20000 == pytest.approx(0.428, abs=0.02)
        assert counts['Micro'] / 20000 == pytest.approx(0.0386, abs=0.01)

    def test_overlapping_findings_rejected(self):
        with pytest.raises(ValueError):
            _image(('round', 'mid', 'large', 1, 1),
                   ('diffuse', 'mid', 'large', 1, 1))

    def test_grid_marks_cells(self):
        img = _image(('round', 'low', 'small', 3, 4))
        grid = img.grid
        assert grid[3, 4] == img.largest.cell_state
        assert np.count_nonzero(grid) == 1


class TestQuestion:

    def test_every_template_renders(self):
        img = synthworld.sample_image(3)
        for tid, (task, _) in synthworld.TEMPLATES.items():
            rendered = synthworld.render_question(task, tid, img)
            assert rendered.task == task
            assert (rendered.target is not None) == (task == 'presence')

    def test_template_of_other_task(self):
        img = synthworld.sample_image(3)
        with pytest.raises(errors.ConfigError):
            synthworld.render_question('counting', 'diagnosis.0', img)

    def test_unknown_template(self):
        with pytest.raises(errors.ConfigError):
            synthworld.render_question(
                'counting', 'counting.9', synthworld.sample_image(3))

    def test_invalid_presence_target(self):
        with pytest.raises(errors.ConfigError):
            synthworld.render_question(
                'presence', 'presence.0', synthworld.sample_image(3), 'C1')

    def test_presence_target_is_stable(self):
        img = synthworld.sample_image(11)
        a = synthworld.render_question('presence', 'presence.1', img)
        b = synthworld.render_question('presence', 'presence.1', img)
        assert a == b

    def test_presence_targets_cover_both_answers(self):
        values = collections.Counter()
        for seed in range(300):
            img = synthworld.sample_image(seed)
            q = synthworld.render_question('presence', 'presence.0', img)
            values[oracle.answer_value(img, q)] += 1
        assert values['yes'] > 50
        assert values['no'] > 50

    def test_templates_for(self):
        assert question.templates_for('location') == [
            'location.0', 'location.1']


class TestOracle:

    def test_rule_table_is_total(self):
        assert len(oracle.RULE_TABLE) == len(vocab.SHAPES) * len(
            vocab.INTENSITIES)
        assert set(oracle.RULE_TABLE.values()) == set(vocab.CONDITIONS)

    def test_answers(self):
        img = _image(('spiculated', 'high', 'large', 1, 6),
                     ('round', 'low', 'small', 6, 2))

        def ask(task, tid, target=None):
            q = synthworld.render_question(task, tid, img, target)
            return oracle.answer_value(img, q)

        assert ask('diagnosis', 'diagnosis.0') == 'C4'
        assert ask('counting', 'counting.0') == '2'
        assert ask('location', 'location.0') == 'upper-right'
        assert ask('presence', 'presence.0', 'round') == 'yes'
        assert ask('presence', 'presence.0', 'diffuse') == 'no'
        assert ask('presence', 'presence.0', 'small') == 'yes'

    def test_compose_without_rationale(self):
        assert synthworld.compose_answer('C1') == (
            'ANS', 'C1', '/ANS', 'EOS')

    def test_compose_with_rationale(self):
        answer = synthworld.compose_answer('3', ['found', 'total', '3'])
        assert answer == (
            'THINK', 'found', 'total', '3', '/THINK',
            'ANS', '3', '/ANS', 'EOS')

    def test_oracle_triplets_extract_their_value(self):
        for item in oracle_items(200, seed=4):
            assert synthworld.extract_answer(item.answer) == \
                item.oracle_value()
            assert item.oracle_value() in oracle.VALUE_DOMAINS[item.task]
            assert synthworld.has_think_span(item.answer)
            assert item.answer[-1] == vocab.EOS


class TestAnswer:

    @pytest.mark.parametrize('tokens, expected', [
        (('ANS', 'C2', '/ANS', 'EOS'), 'C2'),
        (('THINK', 'found', '/THINK', 'ANS', 'three', '/ANS'), '3'),
        (('ANS', 'affirmative', '/ANS'), 'yes'),
        (('ANS', 'top-left', '/ANS'), 'upper-left'),
        (('C2', 'EOS'), synthworld.INVALID),
        (('ANS', '/ANS'), synthworld.INVALID),
        (('ANS', 'C1', 'C2', '/ANS'), synthworld.INVALID),
        (('ANS', 'C1', '/ANS', 'ANS', 'C1', '/ANS'), synthworld.INVALID),
        (('ANS', 'round', '/ANS'), synthworld.INVALID),
        (('ANS', 'C1'), synthworld.INVALID),
        ((), synthworld.INVALID),
    ])
    def test_extract(self, tokens, expected):
        assert synthworld.extract_answer(tokens) == expected

    def test_strip_rationale(self):
        tokens = ('THINK', 'found', '/THINK', 'ANS', 'yes', '/ANS', 'EOS')
        assert synthworld.strip_rationale(tokens) == (
            'ANS', 'yes', '/ANS', 'EOS')

    def test_strip_without_span(self):
        tokens = ('ANS', 'yes', '/ANS', 'EOS')
        assert synthworld.strip_rationale(tokens) == tokens

    def test_unclosed_think(self):
        assert not synthworld.has_think_span(('THINK', 'ANS', 'no', '/ANS'))

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.sampled_from(vocab.VOCAB.tokens), max_size=12))
    def test_extract_is_total(self, tokens):
        value = synthworld.extract_answer(tokens)
        assert value == synthworld.INVALID or value in \
            synthworld.answer.ALL_VALUES


class TestTriplet:

    def test_keys(self):
        item = oracle_items(1)[0]
        assert item.key == (*item.prompt_key, item.answer)

    def test_out_of_vocabulary_answer(self):
        item = oracle_items(1)[0]
        with pytest.raises(ValueError):
            synthworld.VqaTriplet(
                image=item.image, question=item.question,
                answer=('ANS', 'banana', '/ANS'))

    def test_with_answer_clears_admission(self):
        item = oracle_items(1)[0].model_copy(
            update={'score': 3.0, 'iteration': 2})
        other = item.with_answer(('ANS', 'yes', '/ANS'), 'policy')
        assert other.score is None
        assert other.iteration is None
        assert other.provenance == 'policy'


class TestRecords:

    def test_round_trip(self, tmp_path):
        items = [item.model_copy(update={'score': 1.25, 'iteration': 3})
                 for item in oracle_items(30, seed=9)]
        synthworld.write_triplets(tmp_path / 'x.records', items)
        assert synthworld.read_triplets(tmp_path / 'x.records') == items

    def test_extra_fields(self, tmp_path):
        item = oracle_items(1)[0]
        record = synthworld.TripletRecord.from_triplet(
            item, grade=2, target_score=6.0, corruption_seed=5)
        synthworld.write_records(tmp_path / 'g.records', [record])
        assert synthworld.read_records(tmp_path / 'g.records') == [record]

    def test_bad_line(self, tmp_path):
        path = tmp_path / 'bad.records'
        path.write_text('{"image_seed": 1}\n', encoding='utf-8')
        with pytest.raises(errors.DataError):
            synthworld.read_records(path)

    def test_question_mismatch(self):
        item = oracle_items(1)[0]
        record = synthworld.TripletRecord.from_triplet(item).model_copy(
            update={'question_tokens': 'how many findings present'})
        with pytest.raises(errors.DataError):
            record.to_triplet()

    def test_missing_file(self, tmp_path):
        with pytest.raises(errors.DataError):
            synthworld.read_records(tmp_path / 'missing.records')


class TestSplits:

    @pytest.fixture(scope='class')
    def split(self):
        return synthworld.make_split(
            synthworld.SplitConfig(train=120, val=20, test=64), seed=3)

    def test_sizes(self, split):
        assert (len(split.train), len(split.val), len(split.test)) == (
            120, 20, 64)

    def test_disjoint(self, split):
        keys = [i.prompt_key for i in (*split.train, *split.val,
                                       *split.test)]
        assert len(keys) == len(set(keys))

    def test_balanced_test(self, split):
        cells = collections.Counter(
            (i.task, i.modality) for i in split.test)
        assert len(cells) == len(vocab.TASKS) * len(vocab.MODALITIES)
        assert max(cells.values()) - min(cells.values()) <= 1

    def test_deterministic(self, split):
        again = synthworld.make_split(
            synthworld.SplitConfig(train=120, val=20, test=64), seed=3)
        assert again == split

    def test_pool_too_small(self):
        with pytest.raises(errors.ConfigError):
            synthworld.make_split(synthworld.SplitConfig(
                train=100, val=10, test=10, image_pool=2), seed=0)

    def test_task_subset(self):
        split = synthworld.make_split(synthworld.SplitConfig(
            train=20, val=4, test=4, tasks=('counting',),
            balanced_test=False), seed=0)
        assert {i.task for i in split.train} == {'counting'}

    def test_unknown_task(self):
        with pytest.raises(ValueError):
            synthworld.SplitConfig(tasks=('segmentation',))

    def test_sample_prompt_respects_tasks(self):
        rng = np.random.default_rng(0)
        img = synthworld.sample_image(5)
        for _ in range(20):
            assert splits.sample_prompt(rng, img, ('location',)).task == \
                'location'
