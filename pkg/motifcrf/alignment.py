"""
Anchor selection, note-level alignment of motif instances and evaluation of
the eight transformation labels.
"""
from collections import namedtuple
from dataclasses import dataclass, replace
from typing import Optional, Tuple

import numpy as np
from astropy.table import Table

from . import LABEL_NAMES, ONSET_TOL
from .errors import EmptySequence, MalformedRow
from .utils import save_table, read_table

__all__ = ["GAP", "Alignment", "LabelVector", "select_anchors", "align_instances",
           "evaluate_labels", "label_corpus", "save_labels", "load_labels",
           "alignment_cost", "match_cost", "transposition_offsets"]

GAP = None

LabelVector = namedtuple('LabelVector', LABEL_NAMES)

# Traceback codes of the dynamic-programming matrix
_traceback_encoding = {
    "match": 1,
    "anchor-only": 2,     # (i, GAP): anchor note deleted
    "instance-only": 3,   # (GAP, j): instance note inserted
    "alignment-end": 0,
}


@dataclass(frozen=True)
class Alignment:
    """
    Monotone alignment of an anchor (left) and an instance (right).

    ``pairs`` are (anchor index | GAP, instance index | GAP), never (GAP, GAP).
    ``offset`` is the transposition, in semitones, the anchor was shifted by.
    """
    pairs: Tuple[Tuple[Optional[int], Optional[int]], ...]
    cost: float
    offset: float = 0.0

    @property
    def matched(self):
        return [(i, j) for i, j in self.pairs if i is not GAP and j is not GAP]

    @property
    def n_gaps(self):
        return sum(1 for i, j in self.pairs if i is GAP or j is GAP)


#########################################################################
############################ Anchor Model ###############################
#########################################################################

def select_anchors(corpus, logger=None):
    """
    Choose the reference (anchor) of every motif instance.

    Within a segment, the earliest instance of a motif class is the anchor of
    all instances of that class. A class appearing once in a segment refers to the
    most recent anchor of the same class in a preceding segment of the movement;
    without one, the instance anchors itself and serves as anchor afterwards.

    Parameters:
        corpus (``Corpus``): a segmented corpus.
        logger (``logging.logger`` object): logger for this task.

    Returns:
        corpus (``Corpus``): with ``is_anchor`` and ``anchor_id`` set.
    """
    motifs_by_movement = {}
    n_self = 0
    for movement in corpus:
        by_segment = {}
        for inst in movement.motifs:
            by_segment.setdefault(inst.segment_id, []).append(inst)

        latest = {}
        assigned = {}
        for segment_id in sorted(by_segment, key=lambda s: (s is None, s)):
            groups = {}
            for inst in by_segment[segment_id]:
                groups.setdefault(inst.motif_class_id, []).append(inst)
            new_anchors = {}
            for class_id, members in groups.items():
                if len(members) > 1:
                    anchor = members[0]
                    for inst in members:
                        assigned[inst.instance_id] = replace(
                            inst, is_anchor=inst is anchor, anchor_id=anchor.instance_id)
                    new_anchors[class_id] = anchor.instance_id
                else:
                    inst = members[0]
                    if class_id in latest:
                        assigned[inst.instance_id] = replace(inst, is_anchor=False,
                                                             anchor_id=latest[class_id])
                    else:
                        assigned[inst.instance_id] = replace(inst, is_anchor=True,
                                                             anchor_id=inst.instance_id)
                        new_anchors[class_id] = inst.instance_id
                        n_self += 1
            latest.update(new_anchors)
        motifs_by_movement[movement.movement_id] = [assigned[i.instance_id] for i in movement.motifs]

    if logger is not None:
        logger.info('    - {} instances, {} self-anchored singletons'.format(corpus.n_instances, n_self))
    return corpus.with_motifs(motifs_by_movement)


#########################################################################
############################## Alignment ################################
#########################################################################

def match_cost(a, b, w_pitch=1.0, w_beat=0.5, w_duration=0.5, pitch_offset=0.0):
    """
    Substitution cost of aligning note ``a`` with note ``b``.

    ``pitch_offset`` is added to the pitch of ``a`` first, so that an instance
    transposed by ``pitch_offset`` semitones matches at no pitch cost.
    """
    return (w_pitch * abs(a.midi_pitch + pitch_offset - b.midi_pitch)
            + w_beat * abs(a.beat - b.beat) + w_duration * abs(a.duration_qn - b.duration_qn))


def alignment_cost(anchor_notes, instance_notes, pairs, w_pitch=1.0, w_beat=0.5,
                   w_duration=0.5, gap_penalty=4.0, pitch_offset=0.0):
    """ Total cost of a list of alignment pairs. """
    cost = 0.0
    for i, j in pairs:
        if i is GAP or j is GAP:
            cost += gap_penalty
        else:
            cost += match_cost(anchor_notes[i], instance_notes[j], w_pitch, w_beat, w_duration,
                               pitch_offset)
    return cost


def transposition_offsets(anchor_notes, instance_notes):
    """ Pitch differences between every instance note and every anchor note, ascending. """
    pa = np.array([n.midi_pitch for n in anchor_notes])
    pb = np.array([n.midi_pitch for n in instance_notes])
    return np.unique(pb[None, :] - pa[:, None])


def align_instances(anchor_notes, instance_notes, w_pitch=1.0, w_beat=0.5, w_duration=0.5,
                    gap_penalty=4.0, pitch_tolerance=0, transposed=False):
    """
    Align the notes of an instance to the notes of its anchor.

    Equal-length sequences whose pitches agree position by position within
    ``pitch_tolerance`` are matched one-to-one. Otherwise a global minimum-cost
    alignment is found by dynamic programming, with substitution cost
    ``w_pitch*|dpitch| + w_beat*|dbeat| + w_duration*|dduration|`` and a linear
    ``gap_penalty``. Ties prefer a match, then an inserted instance note, then a
    deleted anchor note.

    With ``transposed=True`` the anchor is first shifted by every candidate
    transposition (see ``transposition_offsets``). The lowest offset allowing a
    one-to-one match is used; without one, the cheapest alignment is kept and
    the lowest offset wins ties. The result then does not change when the
    instance is transposed.

    Parameters:
        anchor_notes (list of ``NoteEvent``): anchor notes in onset order.
        instance_notes (list of ``NoteEvent``): instance notes in onset order.
        transposed (bool): align up to transposition.

    Returns:
        alignment (``Alignment``): ``offset`` is the transposition used.
    """
    n, m = len(anchor_notes), len(instance_notes)
    if n == 0 or m == 0:
        raise EmptySequence('Cannot align an empty note sequence')
    costs = dict(w_pitch=w_pitch, w_beat=w_beat, w_duration=w_duration)
    if not transposed:
        return _align_at(anchor_notes, instance_notes, 0.0, gap_penalty, pitch_tolerance, costs)

    offsets = transposition_offsets(anchor_notes, instance_notes)
    for offset in offsets:
        if _one_to_one(anchor_notes, instance_notes, offset, pitch_tolerance):
            return _align_at(anchor_notes, instance_notes, float(offset), gap_penalty,
                             pitch_tolerance, costs)
    best = None
    for offset in offsets:
        alignment = _align_at(anchor_notes, instance_notes, float(offset), gap_penalty,
                              pitch_tolerance, costs)
        if best is None or alignment.cost < best.cost:
            best = alignment
    return best


def _one_to_one(anchor_notes, instance_notes, offset, pitch_tolerance):
    return len(anchor_notes) == len(instance_notes) and all(
        abs(a.midi_pitch + offset - b.midi_pitch) <= pitch_tolerance
        for a, b in zip(anchor_notes, instance_notes))


def _align_at(anchor_notes, instance_notes, offset, gap_penalty, pitch_tolerance, costs):
    n, m = len(anchor_notes), len(instance_notes)
    if _one_to_one(anchor_notes, instance_notes, offset, pitch_tolerance):
        pairs = tuple((k, k) for k in range(n))
        return Alignment(pairs, alignment_cost(anchor_notes, instance_notes, pairs,
                                               gap_penalty=gap_penalty, pitch_offset=offset,
                                               **costs), offset)

    match = _traceback_encoding["match"]
    del_a = _traceback_encoding["anchor-only"]
    ins_b = _traceback_encoding["instance-only"]

    score_matrix = np.zeros((n + 1, m + 1))
    traceback_matrix = np.zeros((n + 1, m + 1), dtype=int)
    score_matrix[1:, 0] = gap_penalty * np.arange(1, n + 1)
    score_matrix[0, 1:] = gap_penalty * np.arange(1, m + 1)
    traceback_matrix[1:, 0] = del_a
    traceback_matrix[0, 1:] = ins_b
    traceback_matrix[0, 0] = _traceback_encoding["alignment-end"]

    for i in range(1, n + 1):
        for j in range(1, m + 1):
            options = ((score_matrix[i - 1, j - 1]
                        + match_cost(anchor_notes[i - 1], instance_notes[j - 1],
                                     pitch_offset=offset, **costs), match),
                       (score_matrix[i, j - 1] + gap_penalty, ins_b),
                       (score_matrix[i - 1, j] + gap_penalty, del_a))
            # first minimum wins, so the option order is the tie order
            best, code = min(options, key=lambda o: o[0])
            score_matrix[i, j] = best
            traceback_matrix[i, j] = code

    pairs = []
    i, j = n, m
    while i > 0 or j > 0:
        code = traceback_matrix[i, j]
        if code == match:
            pairs.append((i - 1, j - 1))
            i, j = i - 1, j - 1
        elif code == ins_b:
            pairs.append((GAP, j - 1))
            j -= 1
        else:
            pairs.append((i - 1, GAP))
            i -= 1
    pairs.reverse()
    return Alignment(tuple(pairs), float(score_matrix[n, m]), offset)


#########################################################################
############################ Label Rules ################################
#########################################################################

def _gap_is_edit(k, side, pairs, notes_a, notes_b):
    """ Whether the gapped note at pairs[k] differs in pitch from its matched neighbours. """
    own = notes_a if side == 0 else notes_b
    pitch = own[pairs[k][side]].midi_pitch
    neighbours = []
    for step in (-1, 1):
        t = k + step
        while 0 <= t < len(pairs):
            i, j = pairs[t]
            if i is not GAP and j is not GAP:
                neighbours.append(own[pairs[t][side]].midi_pitch)
                break
            t += step
    return all(pitch != p for p in neighbours)


def evaluate_labels(anchor_notes, instance_notes, alignment, harmony_track, self_anchored=False,
                    leap_threshold=5, contour_mode='strict', rhythm_rtol=1e-3,
                    identity_rtol=1e-6):
    """
    Evaluate the eight transformation labels of an instance against its anchor.

    Parameters:
        anchor_notes, instance_notes (list of ``NoteEvent``): in onset order.
        alignment (``Alignment``): alignment of the two sequences.
        harmony_track: object with a ``harmony_at(onset_qn)`` method (a ``Movement``).
        self_anchored (bool): the instance is its own anchor; only Identity is set.
        leap_threshold (int): smallest leap, in semitones.
        contour_mode (str): ``'strict'`` requires some interval size to change,
            ``'loose'`` only compares directions.
        rhythm_rtol (float): relative tolerance of the IOI proportionality.
        identity_rtol (float): relative tolerance of the duration proportionality.

    Returns:
        labels (``LabelVector``)
    """
    if self_anchored:
        return LabelVector(True, *([False] * (len(LABEL_NAMES) - 1)))

    matched = alignment.matched
    a_notes = [anchor_notes[i] for i, _ in matched]
    b_notes = [instance_notes[j] for _, j in matched]
    pa = np.array([n.midi_pitch for n in a_notes], dtype=int)
    pb = np.array([n.midi_pitch for n in b_notes], dtype=int)
    da, db = np.diff(pa), np.diff(pb)
    has_intervals = len(da) > 0
    same_sign = has_intervals and np.array_equal(np.sign(da), np.sign(db))

    # identity
    identity = False
    if alignment.n_gaps == 0 and matched and np.array_equal(pa, pb):
        ratio = np.array([b.duration_qn / a.duration_qn for a, b in zip(a_notes, b_notes)])
        identity = bool(ratio[0] > 0 and np.allclose(ratio, ratio[0], rtol=identity_rtol, atol=0))

    # contour
    contour = bool(same_sign)
    if contour and contour_mode == 'strict':
        contour = not np.array_equal(da, db)

    # salient leap
    leaps = np.abs(da) >= leap_threshold
    salient_leap = bool(has_intervals and leaps.any()
                        and np.all(np.abs(db[leaps]) >= leap_threshold)
                        and np.array_equal(np.sign(da[leaps]), np.sign(db[leaps])))

    # rhythm
    rhythm = False
    ioi_a = np.diff([n.onset_qn for n in a_notes])
    ioi_b = np.diff([n.onset_qn for n in b_notes])
    norm = float(np.dot(ioi_a, ioi_a))
    if len(ioi_a) > 0 and norm > 0:
        scale = float(np.dot(ioi_a, ioi_b)) / norm
        rhythm = bool(scale > 0 and np.allclose(ioi_b, scale * ioi_a, rtol=rhythm_rtol,
                                                atol=ONSET_TOL))

    # note addition / removal
    pairs = alignment.pairs
    note_edit = False
    for k, (i, j) in enumerate(pairs):
        side = 0 if j is GAP else 1 if i is GAP else None
        if side is not None and _gap_is_edit(k, side, pairs, anchor_notes, instance_notes):
            note_edit = True
            break

    # harmony
    harmony = False
    if matched:
        zones_a = [harmony_track.harmony_at(n.onset_qn).function_zone for n in a_notes]
        zones_b = [harmony_track.harmony_at(n.onset_qn).function_zone for n in b_notes]
        harmony = zones_a == zones_b

    # intervallic
    intervallic = bool(same_sign and np.array_equal(np.abs(da) % 12, np.abs(db) % 12))

    # symmetry
    symmetry = False
    if has_intervals:
        inversion = np.array_equal(db, -da) and bool(np.any(da != 0))
        reordering = np.array_equal(np.sort(da), np.sort(db)) and not np.array_equal(da, db)
        symmetry = bool(inversion or (reordering and not identity))

    return LabelVector(identity, contour, salient_leap, rhythm, note_edit, harmony,
                       intervallic, symmetry)


def label_corpus(corpus, leap_threshold=5, contour_mode='strict', rhythm_rtol=1e-3,
                 identity_rtol=1e-6, w_pitch=1.0, w_beat=0.5, w_duration=0.5,
                 gap_penalty=4.0, pitch_tolerance=0, transposed=True, logger=None):
    """
    Align and label every motif instance of an anchored corpus.

    With ``transposed=True`` (default) instances are aligned up to transposition,
    so a transposed repetition keeps its Contour, Rhythm, Intervallic and NoteEdit
    labels.

    Returns:
        labels (``astropy.table.Table``): one row per instance in canonical order,
            columns movement_id, instance_id, segment_id, anchor_instance_id and
            one ``y_<label>`` column per transformation family.
    """
    rows = []
    for movement, inst in corpus.instances():
        anchor = movement.instance(inst.anchor_id)
        self_anchored = anchor.instance_id == inst.instance_id
        anchor_notes = movement.notes_of(anchor)
        instance_notes = movement.notes_of(inst)
        if self_anchored:
            alignment = Alignment(tuple((k, k) for k in range(len(instance_notes))), 0.0)
        else:
            alignment = align_instances(anchor_notes, instance_notes, w_pitch=w_pitch,
                                        w_beat=w_beat, w_duration=w_duration,
                                        gap_penalty=gap_penalty, pitch_tolerance=pitch_tolerance,
                                        transposed=transposed)
        labels = evaluate_labels(anchor_notes, instance_notes, alignment, movement,
                                 self_anchored=self_anchored, leap_threshold=leap_threshold,
                                 contour_mode=contour_mode, rhythm_rtol=rhythm_rtol,
                                 identity_rtol=identity_rtol)
        rows.append([movement.movement_id, inst.instance_id, inst.segment_id, anchor.instance_id]
                    + [int(v) for v in labels])

    names = ['movement_id', 'instance_id', 'segment_id', 'anchor_instance_id'] + \
            ['y_' + name for name in LABEL_NAMES]
    table = Table(rows=rows or None, names=names, dtype=[str, int, int, int] + [int] * len(LABEL_NAMES))
    if logger is not None:
        logger.info('    - labelled {} instances'.format(len(table)))
    return table


def save_labels(table, path, config=None, input_hash=None):
    return save_table(table, path, config=config, input_hash=input_hash)


def load_labels(path, stage='label'):
    """
    Read ``labels.csv``.

    Returns:
        table (``astropy.table.Table``), Y (N x Q int array)
    """
    table = read_table(path, stage=stage, str_columns=['movement_id'])
    columns = ['y_' + name for name in LABEL_NAMES if 'y_' + name in table.colnames]
    expected = ['y_' + name for name in LABEL_NAMES[:len(columns)]]
    if not columns or columns != expected:
        raise MalformedRow(path, 1, 'label columns must be a leading run of {}'.format(
            ','.join('y_' + name for name in LABEL_NAMES)))
    Y = np.array([table[c] for c in columns], dtype=int).T.reshape(len(table), len(columns))
    return table, Y
