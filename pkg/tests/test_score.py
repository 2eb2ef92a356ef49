"""
Test corpus loading, validation and the canonical writer.
"""
import os
import tempfile

import pytest
from hypothesis import given, settings, strategies as st

from motifcrf.errors import (MalformedRow, DanglingReference, DuplicateNoteId,
                             DuplicateInstanceId, HarmonyGap, MissingArtifact)
from motifcrf.score import (NoteEvent, HarmonyEvent, Movement, parse_key, load_corpus,
                            load_manifest, filter_period, save_corpus, validate_corpus)

from conftest import write_lines, NOTES_HEADER, HARMONY_HEADER, MOTIFS_HEADER


def test_minimal_corpus(corpus_files):
    corpus = load_corpus(*corpus_files())
    assert len(corpus) == 1
    assert corpus.n_instances == 1
    movement = corpus['m1']
    assert [n.note_id for n in movement.notes] == [0, 1, 2]
    assert movement.motifs[0].note_ids == (0, 1, 2)
    assert validate_corpus(corpus) == []


def test_dangling_reference(corpus_files):
    with pytest.raises(DanglingReference):
        load_corpus(*corpus_files(motifs=['m1,1,1,0;1;99']))


def test_duplicate_note_id(corpus_files):
    notes = ['m1,5,0.0,1.0,60,1,1.0,5.2,0', 'm1,5,1.0,1.0,62,1,2.0,5.2,0']
    with pytest.raises(DuplicateNoteId):
        load_corpus(*corpus_files(notes=notes, motifs=['m1,1,1,5']))


def test_duplicate_instance_id(corpus_files):
    with pytest.raises(DuplicateInstanceId):
        load_corpus(*corpus_files(motifs=['m1,1,1,0;1', 'm1,2,1,2']))


def test_malformed_row_line_number(corpus_files):
    notes = ['m1,0,0.0,1.0,60,1,1.0,5.2,0', 'm1,1,abc,1.0,64,1,2.0,5.2,1']
    with pytest.raises(MalformedRow) as info:
        load_corpus(*corpus_files(notes=notes, motifs=['m1,1,1,0']))
    assert info.value.line == 3


def test_invalid_utf8(corpus_files):
    notes, harmony, motifs = corpus_files()
    with open(harmony, 'ab') as f:
        f.write(b'm1,4.0,\xff,D,0,1.0\n')
    with pytest.raises(MalformedRow) as info:
        load_corpus(notes, harmony, motifs)
    assert info.value.path == harmony
    assert info.value.line == 3
    assert 'UTF-8' in info.value.reason


def test_unsorted_rows_validate(corpus_files):
    notes = ['m1,2,2.0,2.0,67,1,3.0,6.6,0', 'm1,0,0.0,1.0,60,1,1.0,5.2,0',
             'm1,1,1.0,1.0,64,1,2.0,5.2,1']
    harmony = ['m1,1.5,G,D,0,1.0', 'm1,0.0,C,T,0,1.0']
    corpus = load_corpus(*corpus_files(notes=notes, harmony=harmony, motifs=['m1,1,1,2;1;0']))
    movement = corpus['m1']
    assert [h.onset_qn for h in movement.harmony] == [0.0, 1.5]
    assert movement.motifs[0].note_ids == (0, 1, 2)
    assert validate_corpus(corpus) == []


def test_bad_function_zone(corpus_files):
    with pytest.raises(MalformedRow):
        load_corpus(*corpus_files(harmony=['m1,0.0,C,X,0,1.0']))


def test_missing_file(tmp_path):
    with pytest.raises(MissingArtifact):
        load_corpus(str(tmp_path / 'a.csv'), str(tmp_path / 'b.csv'), str(tmp_path / 'c.csv'))


def test_motif_note_ids_sorted_by_onset(corpus_files):
    corpus = load_corpus(*corpus_files(motifs=['m1,1,1,2;0;1']))
    assert corpus['m1'].motifs[0].note_ids == (0, 1, 2)


def test_validate_no_initial_harmony(corpus_files):
    corpus = load_corpus(*corpus_files(harmony=['m1,1.0,C,T,0,1.0']))
    diagnostics = validate_corpus(corpus)
    assert [d.rule for d in diagnostics] == ['no initial harmony']


def test_validate_zero_duration(corpus_files):
    notes = ['m1,0,0.0,0.0,60,1,1.0,5.2,0', 'm1,1,1.0,1.0,64,1,2.0,5.2,1']
    corpus = load_corpus(*corpus_files(notes=notes, motifs=['m1,1,1,0;1']))
    diagnostics = validate_corpus(corpus)
    assert len(diagnostics) == 1
    assert diagnostics[0].rule == 'non-positive duration'
    assert diagnostics[0].entity == 'note 0'


@pytest.mark.parametrize('label, expected', [('C', (0, 'major')), ('f#', (6, 'minor')),
                                             ('Bb', (10, 'major')), ('e-', (3, 'minor')),
                                             ('Cb', (11, 'major'))])
def test_parse_key(label, expected):
    assert parse_key(label) == expected


def test_parse_key_rejects_garbage():
    with pytest.raises(ValueError):
        parse_key('H7')


def test_harmony_lookup():
    notes = [NoteEvent('m', 0, 0.0, 1.0, 60, 1, 1.0, 5.0, 0)]
    harmony = [HarmonyEvent('m', 1.0, 'C', 'T', False, 1.0),
               HarmonyEvent('m', 3.0, 'G', 'D', True, 2.0)]
    movement = Movement('m', notes, harmony, [])
    with pytest.raises(HarmonyGap):
        movement.harmony_at(0.5)
    assert movement.harmony_at(1.0).local_key == 'C'
    assert movement.harmony_at(2.999).local_key == 'C'
    assert movement.harmony_at(5.0).local_key == 'G'
    assert [h.local_key for h in movement.harmony_between(2.0, 4.0)] == ['C', 'G']
    assert [h.local_key for h in movement.harmony_between(1.0, 3.0)] == ['C']


def test_save_corpus_round_trip(toy_corpus, tmp_path):
    paths = save_corpus(toy_corpus, str(tmp_path))
    again = load_corpus(paths['notes'], paths['harmony'], paths['motifs'],
                        manifest_path=paths['manifest'])
    assert again == toy_corpus


def test_period_filter(toy_corpus, toy_dir):
    periods = load_manifest(os.path.join(toy_dir, 'movements.csv'))
    assert set(periods.values()) == {'early', 'middle'}
    early = filter_period(toy_corpus, 'early')
    assert early.period_tag == 'early'
    assert len(early) == sum(1 for p in periods.values() if p == 'early')
    assert all(m.period == 'early' for m in early)
    assert filter_period(toy_corpus, None) is toy_corpus


def test_toy_corpus_is_valid(toy_corpus):
    assert len(toy_corpus) == 4
    assert toy_corpus.n_instances == 4 * 8 * 5
    assert validate_corpus(toy_corpus) == []


_NOTES = ['m{},{},{:.1f},1.0,{},1,{:.1f},5.2,0'.format(m, k, float(k), 60 + k, 1.0 + k % 4)
          for m in (1, 2) for k in range(6)]
_HARMONY = ['m1,0.0,C,T,0,1.0', 'm1,3.0,G,D,1,2.0', 'm2,0.0,a,T,0,0.5', 'm2,2.0,a,PD,0,1.5']
_MOTIFS = ['m1,1,1,0;1;2', 'm1,1,2,3;4;5', 'm2,4,1,0;1', 'm2,3,2,2;3;4']


@settings(max_examples=25, deadline=None)
@given(st.randoms(use_true_random=False))
def test_load_order_insensitive(rnd):
    with tempfile.TemporaryDirectory() as d:
        def load(notes, harmony, motifs):
            return load_corpus(write_lines(os.path.join(d, 'n.csv'), NOTES_HEADER, notes),
                               write_lines(os.path.join(d, 'h.csv'), HARMONY_HEADER, harmony),
                               write_lines(os.path.join(d, 'mo.csv'), MOTIFS_HEADER, motifs))
        reference = load(_NOTES, _HARMONY, _MOTIFS)
        shuffled = [list(rows) for rows in (_NOTES, _HARMONY, _MOTIFS)]
        for rows in shuffled:
            rnd.shuffle(rows)
        assert load(*shuffled) == reference
