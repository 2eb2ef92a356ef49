"""
Test anchor selection, the note aligner and the transformation labels.
"""
import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st
from numpy.testing import assert_allclose

from motifcrf import LABEL_NAMES
from motifcrf.errors import EmptySequence
from motifcrf.score import NoteEvent, HarmonyEvent, MotifInstance, Movement, Corpus
from motifcrf.alignment import (GAP, Alignment, align_instances, alignment_cost,
                                evaluate_labels, select_anchors, label_corpus, save_labels,
                                load_labels)
from motifcrf.segmentation import segment_corpus
from motifcrf.task import DEFAULTS

# alignment settings of a default run
ALIGN = dict(w_pitch=DEFAULTS['w_pitch'], w_beat=DEFAULTS['w_beat'],
             w_duration=DEFAULTS['w_duration'], gap_penalty=DEFAULTS['gap_penalty'],
             pitch_tolerance=DEFAULTS['pitch_tolerance'], transposed=DEFAULTS['align_transposed'])


def _notes(pitches, onsets=None, durations=None, beats=None, start_id=0):
    n = len(pitches)
    onsets = onsets if onsets is not None else [float(k) for k in range(n)]
    durations = durations if durations is not None else [1.0] * n
    beats = beats if beats is not None else [1.0] * n
    return [NoteEvent('m', start_id + k, float(o), float(d), int(p), 1, float(b), 5.2, 0)
            for k, (p, o, d, b) in enumerate(zip(pitches, onsets, durations, beats))]


class _Track(object):
    """ Single-zone harmony track. """
    def __init__(self, zone='T'):
        self.event = HarmonyEvent('m', 0.0, 'C', zone, False, 1.0)

    def harmony_at(self, onset_qn):
        return self.event


def _labels(anchor, instance, **kwargs):
    alignment = align_instances(anchor, instance, **ALIGN)
    return evaluate_labels(anchor, instance, alignment, _Track(), **kwargs)


#########################################################################
############################## Alignment ################################
#########################################################################

def test_identical_sequences():
    notes = _notes([60, 64, 67])
    alignment = align_instances(notes, notes)
    assert alignment.pairs == ((0, 0), (1, 1), (2, 2))
    assert alignment.cost == 0.0


def test_single_insertion():
    alignment = align_instances(_notes([60, 64, 67]), _notes([60, 62, 64, 67]))
    assert alignment.pairs == ((0, 0), (GAP, 1), (1, 2), (2, 3))
    assert alignment.n_gaps == 1
    assert_allclose(alignment.cost, 4.0)


def test_single_notes_far_apart():
    # a match costs 12, two gaps cost 8
    alignment = align_instances(_notes([60]), _notes([72]))
    assert alignment.pairs == ((0, GAP), (GAP, 0))
    assert_allclose(alignment.cost, 8.0)
    matched = align_instances(_notes([60]), _notes([72]), gap_penalty=10.0)
    assert matched.pairs == ((0, 0),)
    assert_allclose(matched.cost, 12.0)


def test_pitch_tolerance_one_to_one():
    alignment = align_instances(_notes([60, 64]), _notes([61, 64]), pitch_tolerance=1)
    assert alignment.pairs == ((0, 0), (1, 1))
    assert_allclose(alignment.cost, 1.0)


def test_empty_sequence():
    with pytest.raises(EmptySequence):
        align_instances([], _notes([60]))


def _all_alignments(n, m):
    """ Every monotone alignment of lengths n and m without (GAP, GAP) pairs. """
    if n == 0 and m == 0:
        yield ()
        return
    if n > 0 and m > 0:
        for rest in _all_alignments(n - 1, m - 1):
            yield rest + ((n - 1, m - 1),)
    if m > 0:
        for rest in _all_alignments(n, m - 1):
            yield rest + ((GAP, m - 1),)
    if n > 0:
        for rest in _all_alignments(n - 1, m):
            yield rest + ((n - 1, GAP),)


def _check_optimal(pa, pb, gap_penalty):
    # equal pitch sequences take the one-to-one path
    assume(pa != pb)
    anchor = _notes(pa, beats=[1.0 + k % 3 for k in range(len(pa))])
    instance = _notes(pb, beats=[1.0 + (k + 1) % 3 for k in range(len(pb))],
                      start_id=len(pa))
    alignment = align_instances(anchor, instance, gap_penalty=gap_penalty)
    best = min(alignment_cost(anchor, instance, pairs, gap_penalty=gap_penalty)
               for pairs in _all_alignments(len(pa), len(pb)))
    assert alignment.cost == best
    assert_allclose(alignment_cost(anchor, instance, alignment.pairs, gap_penalty=gap_penalty),
                    alignment.cost)
    assert (GAP, GAP) not in alignment.pairs
    assert [i for i, _ in alignment.pairs if i is not GAP] == list(range(len(pa)))
    assert [j for _, j in alignment.pairs if j is not GAP] == list(range(len(pb)))


_pitch_lists = st.lists(st.integers(55, 75), min_size=1, max_size=4)
_gap_penalties = st.sampled_from([1.0, 2.0, 4.0, 8.0])


@settings(max_examples=60, deadline=None)
@given(_pitch_lists, _pitch_lists, _gap_penalties)
def test_alignment_is_optimal(pa, pb, gap_penalty):
    _check_optimal(pa, pb, gap_penalty)


@pytest.mark.slow
@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(55, 75), min_size=1, max_size=6),
       st.lists(st.integers(55, 75), min_size=1, max_size=6), _gap_penalties)
def test_alignment_is_optimal_long(pa, pb, gap_penalty):
    _check_optimal(pa, pb, gap_penalty)


@settings(max_examples=40, deadline=None)
@given(_pitch_lists, _pitch_lists)
def test_transposed_alignment_is_optimal(pa, pb):
    anchor = _notes(pa)
    instance = _notes(pb, durations=[0.5] * len(pb), start_id=len(pa))
    alignment = align_instances(anchor, instance, **ALIGN)
    best = min(alignment_cost(anchor, instance, pairs, gap_penalty=ALIGN['gap_penalty'],
                              pitch_offset=float(b - a))
               for a in pa for b in pb for pairs in _all_alignments(len(pa), len(pb)))
    assert alignment.cost == best
    assert_allclose(alignment_cost(anchor, instance, alignment.pairs,
                                   gap_penalty=ALIGN['gap_penalty'],
                                   pitch_offset=alignment.offset), alignment.cost)


@pytest.mark.parametrize('k', [0, 5, 7, 9, 12, -12, 19])
def test_transposed_melody_aligns_one_to_one(k):
    anchor = _notes([60, 64, 67])
    instance = _notes([60 + k, 64 + k, 67 + k], start_id=3)
    alignment = align_instances(anchor, instance, **ALIGN)
    assert alignment.pairs == ((0, 0), (1, 1), (2, 2))
    assert alignment.offset == k
    assert alignment.cost == 0.0
    labels = evaluate_labels(anchor, instance, alignment, _Track())
    assert labels.intervallic and labels.rhythm
    assert not labels.note_edit
    assert labels.identity == (k == 0)


def test_untransposed_alignment_of_distant_melody():
    anchor, instance = _notes([60, 64, 67]), _notes([69, 73, 76], start_id=3)
    assert align_instances(anchor, instance).n_gaps > 0
    assert align_instances(anchor, instance, transposed=True).n_gaps == 0


#########################################################################
############################## Labels ###################################
#########################################################################

def test_identity_and_rhythm_under_augmentation():
    anchor = _notes([60, 64, 67], onsets=[0, 1, 2], durations=[1, 1, 2])
    instance = _notes([60, 64, 67], onsets=[0, 0.5, 1], durations=[0.5, 0.5, 1])
    labels = _labels(anchor, instance)
    assert labels.identity and labels.rhythm


def test_contour_without_intervallic():
    labels = _labels(_notes([60, 64, 67]), _notes([62, 65, 69]))
    assert labels.contour
    assert not labels.intervallic
    assert not labels.identity


def test_inversion_is_symmetry():
    anchor, instance = _notes([60, 67, 64]), _notes([60, 53, 56])
    one_to_one = Alignment(((0, 0), (1, 1), (2, 2)), 0.0)
    labels = evaluate_labels(anchor, instance, one_to_one, _Track())
    assert labels.symmetry
    assert not labels.contour


def test_transposition_is_intervallic():
    labels = _labels(_notes([60, 64, 67]), _notes([65, 69, 72]))
    assert labels.intervallic
    assert not labels.contour
    assert not labels.identity


def test_salient_leap_kept():
    labels = _labels(_notes([60, 67, 65]), _notes([62, 70, 69]))
    assert labels.salient_leap


def test_inserted_note_is_note_edit():
    labels = _labels(_notes([60, 64, 67]), _notes([60, 62, 64, 67]))
    assert labels.note_edit
    assert not labels.identity


def test_harmony_label():
    notes = _notes([60, 64, 67])
    alignment = align_instances(notes, notes)
    assert evaluate_labels(notes, notes, alignment, _Track('D')).harmony


def test_self_anchored_only_identity():
    notes = _notes([60, 64, 67])
    alignment = Alignment(((0, 0), (1, 1), (2, 2)), 0.0)
    labels = evaluate_labels(notes, notes, alignment, _Track(), self_anchored=True)
    assert tuple(labels) == (True,) + (False,) * (len(LABEL_NAMES) - 1)


@st.composite
def _melodies(draw, max_size=5):
    """ (pitches, onsets, durations, beats) of a short melody. """
    n = draw(st.integers(1, max_size))
    pitches = draw(st.lists(st.integers(48, 84), min_size=n, max_size=n))
    iois = draw(st.lists(st.sampled_from([0.5, 1.0, 1.5, 2.0]), min_size=n, max_size=n))
    durations = draw(st.lists(st.sampled_from([0.25, 0.5, 1.0, 2.0]), min_size=n, max_size=n))
    beats = draw(st.lists(st.sampled_from([1.0, 1.5, 2.0, 3.0]), min_size=n, max_size=n))
    onsets = list(np.cumsum([0.0] + iois[:-1]))
    return pitches, onsets, durations, beats


@settings(max_examples=100, deadline=None)
@given(_melodies())
def test_identity_of_melody_with_itself(melody):
    notes = _notes(*melody)
    labels = _labels(notes, list(notes))
    assert labels.identity
    assert not labels.note_edit


@settings(max_examples=100, deadline=None)
@given(_melodies(), _melodies(), st.integers(-24, 24))
def test_transposition_keeps_labels(anchor, instance, k):
    pitches, onsets, durations, beats = instance
    anchor = _notes(*anchor)
    before = _labels(anchor, _notes(pitches, onsets, durations, beats, start_id=10))
    after = _labels(anchor, _notes([p + k for p in pitches], onsets, durations, beats,
                                   start_id=10))
    for name in ('contour', 'salient_leap', 'rhythm', 'note_edit', 'harmony', 'intervallic',
                 'symmetry'):
        assert getattr(before, name) == getattr(after, name), name


@settings(max_examples=100, deadline=None)
@given(_melodies(), st.integers(-12, 12), st.sampled_from([0.25, 0.5, 2.0, 3.0, 1.5]))
def test_tempo_scaling_keeps_rhythm(melody, k, c):
    pitches, onsets, durations, beats = melody
    anchor = _notes(*melody)
    instance = _notes([p + k for p in pitches], onsets, durations, beats, start_id=10)
    assert _labels(anchor, instance).rhythm == (len(pitches) > 1)
    scaled = _notes([p + k for p in pitches], [8.0 + c * o for o in onsets],
                    [c * d for d in durations], beats, start_id=10)
    assert _labels(anchor, scaled).rhythm == (len(pitches) > 1)


#########################################################################
############################## Anchors ##################################
#########################################################################

def _anchor_movement():
    notes = _notes([60 + k % 5 for k in range(40)], onsets=range(40))
    harmony = [HarmonyEvent('m', 0.0, 'C', 'T', False, 1.0)]
    # (class, instance, first note, segment)
    layout = [(7, 1, 4, 0), (7, 2, 12, 0), (7, 3, 20, 0),
              (3, 4, 24, 0), (3, 5, 26, 0),
              (3, 6, 30, 1),
              (9, 7, 34, 2)]
    motifs = [MotifInstance('m', c, i, (n, n + 1), segment_id=s) for c, i, n, s in layout]
    return Corpus([Movement('m', notes, harmony, motifs)])


def test_select_anchors():
    corpus = select_anchors(_anchor_movement())
    by_id = {i.instance_id: i for _, i in corpus.instances()}
    # earliest instance of a class within a segment
    assert by_id[1].is_anchor and by_id[1].anchor_id == 1
    assert by_id[2].anchor_id == 1 and by_id[3].anchor_id == 1
    assert not by_id[2].is_anchor
    # singleton refers back to the preceding segment's anchor
    assert by_id[6].anchor_id == 4 and not by_id[6].is_anchor
    # first-ever singleton anchors itself
    assert by_id[7].is_anchor and by_id[7].anchor_id == 7


def test_label_corpus_toy(toy_corpus, tmp_path):
    corpus, _, _ = segment_corpus(toy_corpus)
    corpus = select_anchors(corpus)
    table = label_corpus(corpus)
    assert len(table) == toy_corpus.n_instances
    assert table.colnames[:4] == ['movement_id', 'instance_id', 'segment_id', 'anchor_instance_id']
    path = save_labels(table, str(tmp_path / 'labels.csv'))
    again, Y = load_labels(path)
    assert Y.shape == (len(table), len(LABEL_NAMES))
    assert set(Y.ravel()) <= {0, 1}
    # anchors and self-anchored instances carry identity
    for row, y in zip(again, Y):
        if row['instance_id'] == row['anchor_instance_id']:
            assert y[0] == 1 and y[1:].sum() == 0
