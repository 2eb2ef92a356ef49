"""
Test motif descriptors and the standardized design matrix.
"""
import numpy as np
import pytest
from numpy.testing import assert_allclose

from motifcrf import FEATURE_NAMES
from motifcrf.errors import EmptyData, NonFiniteValue
from motifcrf.score import NoteEvent, HarmonyEvent, MotifInstance, Movement
from motifcrf.features import (metrical_weight, sounded_length, compute_instance_features,
                               compute_corpus_features, build_design_matrix, save_features,
                               load_design, feature_names)
from motifcrf.segmentation import segment_corpus


def _movement(pitches, onsets, durations, beats=None, marks=None, dynamics=None):
    n = len(pitches)
    beats = beats if beats is not None else [1.0 + o % 4 for o in onsets]
    marks = marks if marks is not None else [0] * n
    dynamics = dynamics if dynamics is not None else [5.2] * n
    notes = [NoteEvent('m', k, float(onsets[k]), float(durations[k]), pitches[k], 1,
                       float(beats[k]), float(dynamics[k]), int(marks[k])) for k in range(n)]
    harmony = [HarmonyEvent('m', 0.0, 'C', 'T', False, 1.0),
               HarmonyEvent('m', 2.0, 'G', 'D', True, 3.0)]
    motif = MotifInstance('m', 1, 1, tuple(range(n)))
    return Movement('m', notes, harmony, [motif]), motif


def test_pitch_spread():
    movement, motif = _movement([60, 64, 67], [0, 1, 2], [1, 1, 1])
    assert compute_instance_features(motif, movement)['pitch_spread'] == 7


def test_constant_ioi_has_zero_sd():
    movement, motif = _movement([60, 62, 64, 65], [0, 1, 2, 3], [1, 1, 1, 1])
    assert compute_instance_features(motif, movement)['ioi_sd'] == 0.0


def test_silence_proportion():
    assert sounded_length([(0, 1), (2, 3)]) == 2.0
    assert sounded_length([(0, 2), (1, 3), (5, 6)]) == 4.0
    movement, motif = _movement([60, 62, 64], [0, 2, 3], [1, 1, 1])
    assert_allclose(compute_instance_features(motif, movement)['silence_proportion'], 0.25)


@pytest.mark.parametrize('beat, weight', [(1.0, 3), (2.0, 2), (4.0, 2), (2.5, 1), (1.25, 1)])
def test_metrical_weight(beat, weight):
    assert metrical_weight(beat) == weight


def test_all_descriptors():
    movement, motif = _movement([60, 64, 67, 62], [0, 1, 2, 3], [1, 1, 1, 1],
                                marks=[0, 1, 0, 1], dynamics=[2.4, 2.4, 6.6, 6.6])
    feats = compute_instance_features(motif, movement, accentuation_sd=True)
    assert list(feats) == feature_names(accentuation_sd=True)
    expected = {'spread_harmonic_complexity': 2.0,
                'secondary_chord_proportion': 0.5,
                'key_change_count': 0.25,
                'pitch_spread': 7.0,
                'motif_pitch_register': 3.0,
                'ioi_sd': 0.0,
                'silence_proportion': 0.0,
                'metrical_stress_rate': 2.25,
                'expressive_density': 0.5,
                'dynamic_variability': 2.1,
                'accentuation_sd': 0.5}
    for name, value in expected.items():
        assert_allclose(feats[name], value, err_msg=name)


def test_standardization():
    design = build_design_matrix(np.array([[1.0], [2.0], [3.0]]), names=['pitch_spread'])
    assert_allclose(design.X[:, 1], [-1.2247449, 0.0, 1.2247449], rtol=1e-6)
    assert_allclose(design.X[:, 0], 1.0)
    assert design.columns == ['intercept', 'pitch_spread']


def test_constant_column_dropped():
    raw = np.array([[1.0, 5.0], [2.0, 5.0], [3.0, 5.0]])
    design = build_design_matrix(raw, names=['a', 'b'])
    assert design.dropped == ['b']
    assert design.columns == ['intercept', 'a']
    assert design.X.shape == (3, 2)


def test_design_errors():
    with pytest.raises(EmptyData):
        build_design_matrix(np.zeros((0, 2)), names=['a', 'b'])
    with pytest.raises(NonFiniteValue):
        build_design_matrix(np.array([[1.0], [np.nan]]), names=['a'])


def test_toy_design_round_trip(toy_corpus, tmp_path):
    corpus, _, _ = segment_corpus(toy_corpus)
    table = compute_corpus_features(corpus)
    assert len(table) == toy_corpus.n_instances
    assert table.colnames == ['movement_id', 'instance_id', 'segment_id'] + FEATURE_NAMES
    design = build_design_matrix(table)
    assert_allclose(design.X[:, 0], 1.0)
    assert_allclose(design.X[:, 1:].mean(axis=0), 0.0, atol=1e-10)
    assert_allclose(design.X[:, 1:].std(axis=0), 1.0)
    features_path, meta_path = str(tmp_path / 'features.csv'), str(tmp_path / 'meta.json')
    save_features(table, design, features_path, meta_path)
    _, again = load_design(features_path, meta_path)
    assert again.columns == design.columns
    assert_allclose(again.X, design.X, rtol=1e-10, atol=1e-12)
