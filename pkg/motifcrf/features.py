"""
Motif-level descriptors and the standardized design matrix.
"""
from dataclasses import dataclass, field
from typing import List

import numpy as np
from astropy.table import Table

from . import FEATURE_NAMES, OPTIONAL_FEATURE_NAMES, ONSET_TOL
from .errors import EmptyData, MalformedRow, NonFiniteValue
from .utils import save_table, read_table, save_json, read_json

__all__ = ["DesignMatrix", "feature_names", "metrical_weight", "sounded_length",
           "compute_instance_features", "compute_corpus_features", "build_design_matrix",
           "save_features", "load_design"]

# Columns with standard deviation below this are dropped as constant
CONSTANT_SD = 1e-12


@dataclass
class DesignMatrix:
    """
    Standardized, bias-augmented design matrix.

    ``X[:, 0]`` is the constant bias column; the remaining columns are
    z-scores (population standard deviation) of the raw features named in
    ``columns[1:]``. ``means`` and ``sds`` undo the standardization.
    """
    X: np.ndarray
    columns: List[str]
    means: np.ndarray
    sds: np.ndarray
    dropped: List[str] = field(default_factory=list)

    @property
    def n_features(self):
        return self.X.shape[1] - 1

    def to_meta(self):
        return {'columns': list(self.columns),
                'means': dict(zip(self.columns[1:], self.means)),
                'sds': dict(zip(self.columns[1:], self.sds)),
                'dropped': list(self.dropped),
                'standardization': 'z-score (population SD); bias column prepended'}


def feature_names(accentuation_sd=False):
    """ Raw feature columns, in order. """
    return FEATURE_NAMES + (OPTIONAL_FEATURE_NAMES if accentuation_sd else [])


def metrical_weight(beat, weights=(3, 2, 1)):
    """ Strong/medium/weak weight of a beat position: downbeat, other integer beat, off-beat. """
    strong, medium, weak = weights
    if abs(beat - 1.0) <= ONSET_TOL:
        return strong
    if abs(beat - round(beat)) <= ONSET_TOL:
        return medium
    return weak


def sounded_length(intervals):
    """ Total length of the union of ``(start, end)`` intervals. """
    total, cur_start, cur_end = 0.0, None, None
    for start, end in sorted(intervals):
        if cur_end is None or start > cur_end:
            if cur_end is not None:
                total += cur_end - cur_start
            cur_start, cur_end = start, end
        else:
            cur_end = max(cur_end, end)
    if cur_end is not None:
        total += cur_end - cur_start
    return total


def compute_instance_features(instance, movement, metrical_weights=(3, 2, 1),
                              accentuation_sd=False):
    """
    Compute the motif-level descriptors of one instance.

    Parameters:
        instance (``MotifInstance``): the motif instance.
        movement (``Movement``): its movement (notes and harmony).
        metrical_weights (tuple): weights of downbeats, other beats, off-beats.
        accentuation_sd (bool): also compute the SD of expressive marks.

    Returns:
        features (dict): feature name -> float, in design-matrix order.

    Raises:
        HarmonyGap: no harmony event covers the first note.
    """
    notes = movement.notes_of(instance)
    onsets = np.array([n.onset_qn for n in notes])
    pitches = np.array([n.midi_pitch for n in notes], dtype=float)
    start = float(onsets.min())
    end = float(max(n.offset_qn for n in notes))
    span_qn = end - start

    events = movement.harmony_between(start, end)
    complexity = np.array([e.complexity for e in events])
    keys = [e.local_key for e in events]
    key_changes = sum(1 for a, b in zip(keys[:-1], keys[1:]) if a != b)
    tonic_pc = movement.harmony_at(start).tonic_pc

    iois = np.diff(np.sort(onsets))
    sounded = sounded_length([(n.onset_qn, n.offset_qn) for n in notes])
    silence = 1.0 - sounded / span_qn if span_qn > 0 else 0.0
    marks = np.array([n.expressive_marks for n in notes], dtype=float)

    features = {
        'spread_harmonic_complexity': float(complexity.max() - complexity.min()),
        'secondary_chord_proportion': float(np.mean([e.is_secondary for e in events])),
        'key_change_count': key_changes / span_qn if span_qn > 0 else 0.0,
        'pitch_spread': float(pitches.max() - pitches.min()),
        'motif_pitch_register': float(np.median(pitches) - (60 + tonic_pc)),
        'ioi_sd': float(np.std(iois)) if len(notes) >= 3 else 0.0,
        'silence_proportion': float(np.clip(silence, 0.0, 1.0)),
        'metrical_stress_rate': float(np.mean([metrical_weight(n.beat, metrical_weights)
                                               for n in notes])),
        'expressive_density': float(marks.mean()),
        'dynamic_variability': float(np.std([n.dynamic_level for n in notes])),
    }
    if accentuation_sd:
        features['accentuation_sd'] = float(np.std(marks))
    return features


def compute_corpus_features(corpus, metrical_weights=(3, 2, 1), accentuation_sd=False,
                            logger=None):
    """
    Raw descriptors of every instance, in canonical instance order.

    Returns:
        table (``astropy.table.Table``): movement_id, instance_id, segment_id and
            one column per feature.
    """
    names = feature_names(accentuation_sd)
    rows = []
    for movement, inst in corpus.instances():
        feats = compute_instance_features(inst, movement, metrical_weights=metrical_weights,
                                          accentuation_sd=accentuation_sd)
        rows.append([movement.movement_id, inst.instance_id, inst.segment_id]
                    + [feats[name] for name in names])
    table = Table(rows=rows or None, names=['movement_id', 'instance_id', 'segment_id'] + names,
                  dtype=[str, int, int] + [float] * len(names))
    if logger is not None:
        logger.info('    - {} instances x {} features'.format(len(table), len(names)))
    return table


def build_design_matrix(features, names=None, logger=None):
    """
    Standardize the raw features and prepend the bias column.

    Parameters:
        features (``astropy.table.Table`` or array): raw features, one row per instance.
        names (list of str): feature columns. Default is every feature column of the table,
            or ``FEATURE_NAMES`` for an array.
        logger (``logging.logger`` object): logger for this task.

    Returns:
        design (``DesignMatrix``): constant columns are dropped and listed in ``dropped``.
    """
    if isinstance(features, Table):
        if names is None:
            names = [c for c in FEATURE_NAMES + OPTIONAL_FEATURE_NAMES if c in features.colnames]
        raw = np.array([np.asarray(features[c], dtype=float) for c in names]).T
        raw = raw.reshape(len(features), len(names))
    else:
        raw = np.atleast_2d(np.asarray(features, dtype=float))
        names = list(names) if names is not None else FEATURE_NAMES[:raw.shape[1]]
    if raw.shape[0] == 0:
        raise EmptyData('No motif instances to build a design matrix from')
    if not np.all(np.isfinite(raw)):
        raise NonFiniteValue('Non-finite raw feature values')

    means = raw.mean(axis=0)
    sds = raw.std(axis=0)
    keep = sds >= CONSTANT_SD
    dropped = [name for name, k in zip(names, keep) if not k]
    if dropped and logger is not None:
        logger.warning('Constant feature columns dropped: {}'.format(', '.join(dropped)))

    Z = (raw[:, keep] - means[keep]) / sds[keep]
    X = np.hstack([np.ones((raw.shape[0], 1)), Z])
    columns = ['intercept'] + [name for name, k in zip(names, keep) if k]
    return DesignMatrix(X, columns, means[keep], sds[keep], dropped)


def save_features(table, design, features_path, meta_path, config=None, input_hash=None):
    """ Write ``features.csv`` (raw values) and ``design_meta.json`` (standardization). """
    save_table(table, features_path, config=config, input_hash=input_hash)
    save_json(design.to_meta(), meta_path, config=config, input_hash=input_hash)


def load_design(features_path, meta_path, stage='features'):
    """
    Rebuild the design matrix from ``features.csv`` and ``design_meta.json``.

    Returns:
        table (``astropy.table.Table``), design (``DesignMatrix``)
    """
    table = read_table(features_path, stage=stage, str_columns=['movement_id'])
    meta = read_json(meta_path, stage=stage)
    columns = meta['columns']
    missing = [c for c in columns[1:] if c not in table.colnames]
    if missing:
        raise MalformedRow(features_path, 1, 'missing feature columns {}'.format(','.join(missing)))
    means = np.array([meta['means'][c] for c in columns[1:]], dtype=float)
    sds = np.array([meta['sds'][c] for c in columns[1:]], dtype=float)
    raw = np.array([np.asarray(table[c], dtype=float) for c in columns[1:]]).T
    raw = raw.reshape(len(table), len(columns) - 1)
    X = np.hstack([np.ones((len(table), 1)), (raw - means) / sds])
    return table, DesignMatrix(X, list(columns), means, sds, list(meta.get('dropped', [])))
