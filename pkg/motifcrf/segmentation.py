"""
Phrase-level segmentation of movements from rule-based boundary cues.
"""
from enum import Enum
from dataclasses import dataclass, replace
from typing import Tuple

import numpy as np
from astropy.table import Table

from . import ONSET_TOL
from .errors import EmptyMovement, MalformedRow
from .score import Diagnostic
from .utils import save_table, read_table

__all__ = ["Cue", "BoundaryCandidate", "Segment", "MeasureGrid", "propose_boundaries",
           "filter_boundaries", "segment_movement", "segment_corpus",
           "save_segments", "load_segments"]


class Cue(Enum):
    """Boundary cue types, in order of preference."""
    SILENCE = 'Silence'
    REPEATED_PITCH = 'RepeatedPitch'
    CADENTIAL = 'Cadential'

    @property
    def priority(self):
        return list(Cue).index(self)


@dataclass(frozen=True)
class BoundaryCandidate:
    onset_qn: float
    cue: Cue


@dataclass(frozen=True)
class Segment:
    """A contiguous region ``[start_qn, end_qn)`` of one movement and its motif instances."""
    segment_id: int
    movement_id: str
    start_qn: float
    end_qn: float
    member_instance_ids: Tuple[int, ...] = ()

    @property
    def length_qn(self):
        return self.end_qn - self.start_qn


class MeasureGrid(object):
    """
    Map score time (quarter-notes) to fractional measure positions.

    The start of measure ``m`` is recovered from its notes as ``onset - (beat - 1)``
    (beats counted in quarter-notes). Times between known measure starts are
    interpolated linearly; times past the last known measure are extrapolated
    with the length of the last measure.

    Parameters:
        notes (list of ``NoteEvent``): notes of one movement.
    """
    def __init__(self, notes):
        starts = {}
        for note in notes:
            start = note.onset_qn - (note.beat - 1.0)
            starts[note.measure] = min(start, starts.get(note.measure, np.inf))
        measures, onsets = [], []
        for m in sorted(starts):
            if onsets and starts[m] <= onsets[-1] + ONSET_TOL:
                continue
            measures.append(float(m))
            onsets.append(starts[m])
        if not measures:
            measures, onsets = [1.0], [0.0]
        self.measures = np.array(measures)
        self.onsets = np.array(onsets)
        if len(self.onsets) > 1:
            self.last_length = (self.onsets[-1] - self.onsets[-2]) / (self.measures[-1] - self.measures[-2])
            self.first_length = (self.onsets[1] - self.onsets[0]) / (self.measures[1] - self.measures[0])
        else:
            self.last_length = self.first_length = 4.0

    def position(self, onset_qn):
        """ Fractional measure number of a score time (measure 1 starts at 1.0). """
        t = np.asarray(onset_qn, dtype=float)
        pos = np.interp(t, self.onsets, self.measures)
        pos = np.where(t > self.onsets[-1],
                       self.measures[-1] + (t - self.onsets[-1]) / self.last_length, pos)
        pos = np.where(t < self.onsets[0],
                       self.measures[0] - (self.onsets[0] - t) / self.first_length, pos)
        return float(pos) if pos.ndim == 0 else pos


class _FixedMeter(object):
    """ Four quarter-notes per measure, used when no grid is given. """
    def position(self, onset_qn):
        return 1.0 + np.asarray(onset_qn, dtype=float) / 4.0


#########################################################################
############################ Boundary Cues ##############################
#########################################################################

def propose_boundaries(movement, silence_min_qn=1.0, use_cadential=True, logger=None):
    """
    Boundary candidates of one movement, from three cues:

    - silence: no note sounds over an interval of at least ``silence_min_qn``;
      the candidate sits where the silence begins.
    - repeated pitch: two consecutive notes of equal pitch whose onsets are at
      least a quarter-note apart; the candidate sits at the second note's offset.
    - cadential: a harmony event whose function zone moves from D to T.

    Parameters:
        movement (``Movement``): a movement with at least one note.
        silence_min_qn (float): minimum length of a true silence, in quarter-notes.
        use_cadential (bool): whether to emit cadential candidates.
        logger (``logging.logger`` object): logger for this task.

    Returns:
        candidates (list of ``BoundaryCandidate``): sorted by onset, strictly inside
            the movement span, one per onset (higher-priority cue kept).
    """
    if not movement.notes:
        raise EmptyMovement('Movement {} has no notes'.format(movement.movement_id))
    notes = movement.notes
    start, end = movement.span
    found = []

    running_end = notes[0].offset_qn
    for note in notes[1:]:
        if note.onset_qn - running_end >= silence_min_qn - ONSET_TOL:
            found.append(BoundaryCandidate(running_end, Cue.SILENCE))
        running_end = max(running_end, note.offset_qn)

    for prev, note in zip(notes[:-1], notes[1:]):
        if prev.midi_pitch == note.midi_pitch and note.onset_qn - prev.onset_qn >= 1.0 - ONSET_TOL:
            found.append(BoundaryCandidate(note.offset_qn, Cue.REPEATED_PITCH))

    if use_cadential:
        for prev, event in zip(movement.harmony[:-1], movement.harmony[1:]):
            if prev.function_zone == 'D' and event.function_zone == 'T':
                found.append(BoundaryCandidate(event.onset_qn, Cue.CADENTIAL))

    found = [c for c in found if start + ONSET_TOL < c.onset_qn < end - ONSET_TOL]
    found.sort(key=lambda c: (c.onset_qn, c.cue.priority))
    candidates = []
    for cand in found:
        if candidates and abs(cand.onset_qn - candidates[-1].onset_qn) <= ONSET_TOL:
            continue
        candidates.append(cand)

    if logger is not None:
        logger.info('    - {}: {} boundary candidates'.format(movement.movement_id, len(candidates)))
    return candidates


def filter_boundaries(candidates, motif_spans, measure_grid=None, min_span_measures=8,
                      proximity_measures=1.0):
    """
    Apply the motif and minimum-span constraints to sorted candidates.

    1. Candidates strictly inside any motif span ``(start, end)`` are removed.
    2. A cadential candidate is removed when a silence or repeated-pitch candidate
       survives within ``proximity_measures`` of it.
    3. Left to right, a candidate is kept only if it lies at least
       ``min_span_measures`` after the previously kept one.

    Parameters:
        candidates (list of ``BoundaryCandidate``): sorted by onset.
        motif_spans (list of tuple): (first-note onset, last-note offset) per instance.
        measure_grid (``MeasureGrid``): time to measure conversion. Default is 4/4 from qn 0.
        min_span_measures (float): minimum distance between kept boundaries.
        proximity_measures (float): window of the cue preference rule.

    Returns:
        accepted (list of ``BoundaryCandidate``)
    """
    grid = measure_grid if measure_grid is not None else _FixedMeter()

    outside = []
    for cand in candidates:
        inside = any(s + ONSET_TOL < cand.onset_qn < e - ONSET_TOL for s, e in motif_spans)
        if not inside:
            outside.append(cand)

    positions = [grid.position(c.onset_qn) for c in outside]
    preferred = []
    for k, cand in enumerate(outside):
        if cand.cue is Cue.CADENTIAL:
            near = any(other.cue is not Cue.CADENTIAL
                       and abs(positions[j] - positions[k]) <= proximity_measures + ONSET_TOL
                       for j, other in enumerate(outside) if j != k)
            if near:
                continue
        preferred.append((positions[k], cand))

    accepted = []
    last = None
    for pos, cand in preferred:
        if last is None or pos - last >= min_span_measures - ONSET_TOL:
            accepted.append(cand)
            last = pos
    return accepted


#########################################################################
########################## Segment Assignment ###########################
#########################################################################

def segment_movement(movement, first_segment_id=0, silence_min_qn=1.0, use_cadential=True,
                     min_span_measures=8, proximity_measures=1.0, logger=None):
    """
    Partition one movement into segments and assign its motif instances.

    Returns:
        motifs (list of ``MotifInstance``): with ``segment_id`` set.
        segments (list of ``Segment``)
        diagnostics (list of ``Diagnostic``)
    """
    grid = MeasureGrid(movement.notes)
    spans = [movement.instance_span(inst) for inst in movement.motifs]
    candidates = propose_boundaries(movement, silence_min_qn=silence_min_qn,
                                    use_cadential=use_cadential)
    accepted = filter_boundaries(candidates, spans, measure_grid=grid,
                                 min_span_measures=min_span_measures,
                                 proximity_measures=proximity_measures)
    start, end = movement.span
    edges = [start] + [c.onset_qn for c in accepted] + [end]
    cuts = np.array(edges[1:-1])

    members = [[] for _ in range(len(edges) - 1)]
    motifs, diagnostics = [], []
    for inst, (onset, offset) in zip(movement.motifs, spans):
        k = int(np.searchsorted(cuts, onset + ONSET_TOL, side='right'))
        members[k].append(inst.instance_id)
        motifs.append(replace(inst, segment_id=first_segment_id + k))
        if offset > edges[k + 1] + ONSET_TOL:
            diagnostics.append(Diagnostic(movement.movement_id,
                                          'instance {}'.format(inst.instance_id),
                                          'straddles boundary at qn {:g}'.format(edges[k + 1])))

    segments = []
    for k in range(len(edges) - 1):
        seg = Segment(first_segment_id + k, movement.movement_id, float(edges[k]),
                      float(edges[k + 1]), tuple(members[k]))
        segments.append(seg)
        span_measures = grid.position(seg.end_qn) - grid.position(seg.start_qn)
        if len(edges) > 2 and span_measures < min_span_measures - ONSET_TOL:
            diagnostics.append(Diagnostic(movement.movement_id, 'segment {}'.format(seg.segment_id),
                                          'shorter than {:g} measures ({:.2f})'.format(
                                              min_span_measures, span_measures)))
    if logger is not None:
        logger.info('    - {}: {} candidates, {} accepted, {} segments'.format(
            movement.movement_id, len(candidates), len(accepted), len(segments)))
    return motifs, segments, diagnostics


def segment_corpus(corpus, silence_min_qn=1.0, use_cadential=True, min_span_measures=8,
                   proximity_measures=1.0, logger=None):
    """
    Segment every movement. Segment ids are consecutive within each movement and
    unique over the corpus, following the sorted movement order.

    Parameters:
        corpus (``Corpus``): a validated corpus.

    Returns:
        corpus (``Corpus``): with ``segment_id`` set on every motif instance.
        segments (list of ``Segment``)
        diagnostics (list of ``Diagnostic``)
    """
    if logger is not None:
        logger.info('Segment {} movements.'.format(len(corpus)))
    segments, diagnostics, motifs_by_movement = [], [], {}
    for movement in corpus:
        motifs, segs, diags = segment_movement(
            movement, first_segment_id=len(segments), silence_min_qn=silence_min_qn,
            use_cadential=use_cadential, min_span_measures=min_span_measures,
            proximity_measures=proximity_measures, logger=logger)
        motifs_by_movement[movement.movement_id] = motifs
        segments += segs
        diagnostics += diags
    if logger is not None:
        logger.info('    - {} segments, {} diagnostics'.format(len(segments), len(diagnostics)))
    return corpus.with_motifs(motifs_by_movement), segments, diagnostics


def save_segments(segments, path, config=None, input_hash=None):
    """ Write ``segments.csv``: movement_id,segment_id,start_qn,end_qn,instance_ids. """
    table = Table(rows=[[s.movement_id, s.segment_id, s.start_qn, s.end_qn,
                         ';'.join(str(i) for i in s.member_instance_ids)] for s in segments] or None,
                  names=['movement_id', 'segment_id', 'start_qn', 'end_qn', 'instance_ids'],
                  dtype=[str, int, float, float, str])
    return save_table(table, path, config=config, input_hash=input_hash)


def load_segments(path, stage='segment'):
    """ Read ``segments.csv`` back into ``Segment`` records. """
    table = read_table(path, stage=stage, str_columns=['movement_id', 'instance_ids'])
    segments = []
    for row in table:
        ids = str(row['instance_ids']) if not np.ma.is_masked(row['instance_ids']) else ''
        try:
            members = tuple(int(i) for i in ids.split(';') if i.strip())
        except ValueError:
            raise MalformedRow(path, 0, 'bad instance_ids "{}"'.format(ids))
        segments.append(Segment(int(row['segment_id']), str(row['movement_id']),
                                float(row['start_qn']), float(row['end_qn']), members))
    return segments
