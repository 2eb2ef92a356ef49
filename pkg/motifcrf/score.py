"""
Corpus data model: notes, harmony annotations and motif instances of each movement,
loaded from three pre-aligned note-level CSV files.
"""
import os
import re
import bisect
from dataclasses import dataclass, replace
from typing import Optional, Tuple

import numpy as np
from astropy.io import ascii
from astropy.table import Table

from . import ONSET_TOL, FUNCTION_ZONES, PITCH_CLASSES
from .errors import (MalformedRow, DanglingReference, DuplicateNoteId,
                     DuplicateInstanceId, HarmonyGap)
from .utils import save_table, require_artifact

__all__ = ["NoteEvent", "HarmonyEvent", "MotifInstance", "Movement", "Corpus",
           "Diagnostic", "parse_key", "load_corpus", "load_manifest", "filter_period",
           "save_corpus", "validate_corpus", "NOTES_COLUMNS", "HARMONY_COLUMNS",
           "MOTIFS_COLUMNS"]

NOTES_COLUMNS = [('movement_id', 'str'), ('note_id', 'int'), ('onset_qn', 'float'),
                 ('duration_qn', 'float'), ('midi_pitch', 'int'), ('measure', 'int'),
                 ('beat', 'float'), ('dynamic_level', 'float'), ('expressive_marks', 'int')]
HARMONY_COLUMNS = [('movement_id', 'str'), ('onset_qn', 'float'), ('local_key', 'key'),
                   ('function_zone', 'zone'), ('is_secondary', 'bool01'),
                   ('complexity', 'float')]
MOTIFS_COLUMNS = [('movement_id', 'str'), ('motif_class_id', 'int'),
                  ('instance_id', 'int'), ('note_ids', 'idlist')]
MANIFEST_COLUMNS = [('movement_id', 'str'), ('period', 'str')]

_KEY_PATTERN = re.compile(r'^([A-Ga-g])(#*|b*|-*)$')


@dataclass(frozen=True)
class NoteEvent:
    """A sounding note of the score, times in quarter-notes from the movement start."""
    movement_id: str
    note_id: int
    onset_qn: float
    duration_qn: float
    midi_pitch: int
    measure: int
    beat: float
    dynamic_level: float
    expressive_marks: int

    @property
    def offset_qn(self):
        return self.onset_qn + self.duration_qn


@dataclass(frozen=True)
class HarmonyEvent:
    """A functional-harmony annotation, sounding until the next event of the movement."""
    movement_id: str
    onset_qn: float
    local_key: str
    function_zone: str
    is_secondary: bool
    complexity: float

    @property
    def tonic_pc(self):
        return parse_key(self.local_key)[0]


@dataclass(frozen=True)
class MotifInstance:
    """
    One occurrence of a motif class.

    ``segment_id``, ``is_anchor`` and ``anchor_id`` are filled in by segmentation
    and anchor selection; ``anchor_id`` equals ``instance_id`` for self-anchored
    instances.
    """
    movement_id: str
    motif_class_id: int
    instance_id: int
    note_ids: Tuple[int, ...]
    segment_id: Optional[int] = None
    is_anchor: bool = False
    anchor_id: Optional[int] = None


@dataclass(frozen=True)
class Diagnostic:
    """A violated corpus invariant: which movement, which entity, which rule."""
    movement_id: str
    entity: str
    rule: str

    def __str__(self):
        return '{}/{}: {}'.format(self.movement_id, self.entity, self.rule)


def parse_key(local_key):
    """
    Parse a local key label such as ``"C"``, ``"f#"``, ``"Bb"`` or ``"e-"``.

    Upper-case tonic means major, lower-case minor. Sharps are ``#``, flats ``b`` or ``-``.

    Parameters:
        local_key (str): key label.

    Returns:
        tonic_pc (int): pitch class of the tonic, 0-11.
        mode (str): ``'major'`` or ``'minor'``.
    """
    match = _KEY_PATTERN.match(str(local_key).strip())
    if match is None:
        raise ValueError('Cannot parse local key "{}"'.format(local_key))
    letter, accidentals = match.groups()
    pc = PITCH_CLASSES[letter.upper()] + accidentals.count('#')
    pc -= accidentals.count('b') + accidentals.count('-')
    mode = 'major' if letter.isupper() else 'minor'
    return pc % 12, mode


class Movement(object):
    """
    Notes, harmony and motif instances of one movement, in canonical order:
    notes by (onset, note_id), harmony by onset, motif instances by
    (first-note onset, motif_class_id, instance_id).
    """

    def __init__(self, movement_id, notes, harmony, motifs, period=None):
        self.movement_id = movement_id
        self.period = period
        self.notes = tuple(sorted(notes, key=lambda n: (n.onset_qn, n.note_id)))
        self.harmony = tuple(sorted(harmony, key=lambda h: (h.onset_qn, h.local_key,
                                                            h.function_zone)))
        self._note_map = {n.note_id: n for n in self.notes}
        motifs = [replace(m, note_ids=self._order_note_ids(m.note_ids)) for m in motifs]
        self.motifs = tuple(sorted(motifs, key=self._motif_key))
        self._harmony_onsets = [h.onset_qn for h in self.harmony]

    def _order_note_ids(self, note_ids):
        known = [i for i in note_ids if i in self._note_map]
        if len(known) < len(note_ids):
            return tuple(note_ids)
        return tuple(sorted(note_ids, key=lambda i: (self._note_map[i].onset_qn, i)))

    def _motif_key(self, motif):
        if motif.note_ids and motif.note_ids[0] in self._note_map:
            onset = self._note_map[motif.note_ids[0]].onset_qn
        else:
            onset = np.inf
        return (onset, motif.motif_class_id, motif.instance_id)

    def __eq__(self, other):
        if not isinstance(other, Movement):
            return NotImplemented
        return (self.movement_id == other.movement_id and self.period == other.period
                and self.notes == other.notes and self.harmony == other.harmony
                and self.motifs == other.motifs)

    def __repr__(self):
        return '<Movement {}: {} notes, {} harmony events, {} motif instances>'.format(
            self.movement_id, len(self.notes), len(self.harmony), len(self.motifs))

    @property
    def end_qn(self):
        """ Offset of the last sounding note. """
        if not self.notes:
            return 0.0
        return max(n.offset_qn for n in self.notes)

    @property
    def span(self):
        return (0.0, self.end_qn)

    def note(self, note_id):
        return self._note_map[note_id]

    def has_note(self, note_id):
        return note_id in self._note_map

    def notes_of(self, instance):
        """ The notes of a motif instance, ordered by onset. """
        return [self._note_map[i] for i in instance.note_ids]

    def instance(self, instance_id):
        for motif in self.motifs:
            if motif.instance_id == instance_id:
                return motif
        raise KeyError('No instance {} in movement {}'.format(instance_id, self.movement_id))

    def instance_span(self, instance):
        """ (first-note onset, last note offset) of a motif instance. """
        notes = self.notes_of(instance)
        return (notes[0].onset_qn, max(n.offset_qn for n in notes))

    def harmony_at(self, onset_qn):
        """
        The harmony event sounding at ``onset_qn``.

        Raises:
            HarmonyGap: if no event starts at or before ``onset_qn``.
        """
        k = bisect.bisect_right(self._harmony_onsets, onset_qn + ONSET_TOL) - 1
        if k < 0:
            raise HarmonyGap('No harmony event covers onset {} in movement {}'.format(
                onset_qn, self.movement_id))
        return self.harmony[k]

    def harmony_between(self, start_qn, end_qn):
        """
        Harmony events overlapping ``[start_qn, end_qn)``: the event sounding at
        ``start_qn`` followed by every event starting strictly inside the interval.
        """
        first = self.harmony.index(self.harmony_at(start_qn))
        events = [self.harmony[first]]
        for event in self.harmony[first + 1:]:
            if event.onset_qn >= end_qn - ONSET_TOL:
                break
            if event.onset_qn > start_qn + ONSET_TOL:
                events.append(event)
        return events

    def with_motifs(self, motifs):
        return Movement(self.movement_id, self.notes, self.harmony, motifs, period=self.period)


class Corpus(object):
    """
    The whole annotated corpus: ``movements`` maps movement_id to ``Movement``,
    iterated in sorted movement_id order. ``period_tag`` records the period
    filter that produced it, if any.
    """

    def __init__(self, movements, period_tag=None):
        self.movements = {m.movement_id: m for m in
                          sorted(movements, key=lambda m: m.movement_id)}
        self.period_tag = period_tag

    def __iter__(self):
        return iter(self.movements.values())

    def __len__(self):
        return len(self.movements)

    def __getitem__(self, movement_id):
        return self.movements[movement_id]

    def __eq__(self, other):
        if not isinstance(other, Corpus):
            return NotImplemented
        return (self.period_tag == other.period_tag
                and list(self.movements.values()) == list(other.movements.values()))

    def __repr__(self):
        return '<Corpus: {} movements, {} motif instances>'.format(
            len(self.movements), self.n_instances)

    @property
    def n_instances(self):
        return sum(len(m.motifs) for m in self)

    def instances(self):
        """ Iterate (movement, instance) pairs in canonical order. """
        for movement in self:
            for instance in movement.motifs:
                yield movement, instance

    def with_motifs(self, motifs_by_movement):
        """ A new corpus whose motif instances are replaced per movement. """
        movements = []
        for movement in self:
            motifs = motifs_by_movement.get(movement.movement_id, movement.motifs)
            movements.append(movement.with_motifs(motifs))
        return Corpus(movements, period_tag=self.period_tag)


#########################################################################
############################## Ingestion ################################
#########################################################################

def _data_line_numbers(path):
    """ Physical line numbers of the data rows (header, comments and blanks skipped). """
    numbers = []
    seen_header = False
    with open(path, 'r', encoding='utf-8') as f:
        for lineno, line in enumerate(f, 1):
            stripped = line.strip()
            if not stripped or stripped.startswith('#'):
                continue
            if not seen_header:
                seen_header = True
                continue
            numbers.append(lineno)
    return numbers


def _header_line_number(path):
    with open(path, 'r', encoding='utf-8') as f:
        for lineno, line in enumerate(f, 1):
            stripped = line.strip()
            if stripped and not stripped.startswith('#'):
                return lineno
    return 1


def _first_ragged_line(path, n_columns):
    header = _header_line_number(path)
    with open(path, 'r', encoding='utf-8') as f:
        for lineno, line in enumerate(f, 1):
            stripped = line.strip()
            if lineno <= header or not stripped or stripped.startswith('#'):
                continue
            if len(stripped.split(',')) != n_columns:
                return lineno
    return header


def _convert(value, kind):
    value = value.strip()
    if kind == 'str':
        if not value:
            raise ValueError('empty value')
        return value
    if kind == 'int':
        return int(value)
    if kind == 'float':
        out = float(value)
        if not np.isfinite(out):
            raise ValueError('non-finite value')
        return out
    if kind == 'bool01':
        if value not in ('0', '1'):
            raise ValueError('expected 0 or 1')
        return value == '1'
    if kind == 'zone':
        if value not in FUNCTION_ZONES:
            raise ValueError('function_zone must be one of {}'.format(', '.join(FUNCTION_ZONES)))
        return value
    if kind == 'key':
        parse_key(value)
        return value
    if kind == 'idlist':
        if not value:
            return ()
        return tuple(int(v) for v in value.split(';') if v.strip() != '')
    raise ValueError('unknown column kind {}'.format(kind))


def _check_encoding(path):
    with open(path, 'rb') as f:
        raw = f.read()
    try:
        raw.decode('utf-8')
    except UnicodeDecodeError as err:
        raise MalformedRow(path, raw[:err.start].count(b'\n') + 1,
                           'invalid UTF-8 byte 0x{:02x}'.format(raw[err.start]))


def _read_rows(path, schema):
    """
    Read a CSV file against a schema of (column, kind) pairs.

    Returns:
        rows (list of dict), lines (list of int): typed rows and their physical line numbers.
    """
    require_artifact(path)
    _check_encoding(path)
    names = [name for name, _ in schema]
    converters = {name: [ascii.convert_numpy(str)] for name in names}
    try:
        table = Table.read(path, format='ascii.csv', guess=False, converters=converters)
    except ascii.InconsistentTableError:
        raise MalformedRow(path, _first_ragged_line(path, len(names)), 'wrong number of columns')
    except ValueError as err:
        raise MalformedRow(path, _header_line_number(path), str(err))

    if sorted(table.colnames) != sorted(names):
        raise MalformedRow(path, _header_line_number(path),
                           'expected columns {}, found {}'.format(','.join(names),
                                                                  ','.join(table.colnames)))
    lines = _data_line_numbers(path)
    rows = []
    for k, record in enumerate(table):
        row = {}
        for name, kind in schema:
            raw = record[name]
            if np.ma.is_masked(raw):
                raw = ''
            try:
                row[name] = _convert(str(raw), kind)
            except ValueError as err:
                raise MalformedRow(path, lines[k], 'column "{}": {}'.format(name, err))
        rows.append(row)
    return rows, lines[:len(rows)]


def load_manifest(manifest_path):
    """
    Read the optional movement manifest (``movement_id,period``).

    Returns:
        periods (dict): movement_id -> period tag.
    """
    rows, _ = _read_rows(manifest_path, MANIFEST_COLUMNS)
    return {row['movement_id']: row['period'] for row in rows}


def load_corpus(notes_path, harmony_path, motifs_path, manifest_path=None, logger=None):
    """
    Load and cross-reference the three annotation files.

    Parameters:
        notes_path (str): ``notes.csv``.
        harmony_path (str): ``harmony.csv``.
        motifs_path (str): ``motifs.csv``.
        manifest_path (str): optional ``movements.csv`` giving each movement's period.
        logger (``logging.logger`` object): logger for this task.

    Returns:
        corpus (``Corpus``): every row sorted canonically within its movement.

    Raises:
        MalformedRow, DuplicateNoteId, DuplicateInstanceId, DanglingReference
    """
    note_rows, note_lines = _read_rows(notes_path, NOTES_COLUMNS)
    harmony_rows, _ = _read_rows(harmony_path, HARMONY_COLUMNS)
    motif_rows, motif_lines = _read_rows(motifs_path, MOTIFS_COLUMNS)
    periods = load_manifest(manifest_path) if manifest_path is not None else {}

    notes, harmony, motifs = {}, {}, {}
    seen = {}
    for row, line in zip(note_rows, note_lines):
        key = (row['movement_id'], row['note_id'])
        if key in seen:
            raise DuplicateNoteId('{}:{}: note_id {} of movement {} already defined on line {}'.format(
                notes_path, line, row['note_id'], row['movement_id'], seen[key]))
        seen[key] = line
        notes.setdefault(row['movement_id'], []).append(NoteEvent(**row))

    for row in harmony_rows:
        harmony.setdefault(row['movement_id'], []).append(HarmonyEvent(**row))

    seen = {}
    for row, line in zip(motif_rows, motif_lines):
        movement_id = row['movement_id']
        key = (movement_id, row['instance_id'])
        if key in seen:
            raise DuplicateInstanceId('{}:{}: instance_id {} of movement {} already defined on line {}'.format(
                motifs_path, line, row['instance_id'], movement_id, seen[key]))
        seen[key] = line
        known = {n.note_id for n in notes.get(movement_id, [])}
        for note_id in row['note_ids']:
            if note_id not in known:
                raise DanglingReference('{}:{}: note_id {} not found in movement {}'.format(
                    motifs_path, line, note_id, movement_id))
        motifs.setdefault(movement_id, []).append(MotifInstance(**row))

    movement_ids = sorted(set(notes) | set(harmony) | set(motifs))
    movements = [Movement(mid, notes.get(mid, []), harmony.get(mid, []), motifs.get(mid, []),
                          period=periods.get(mid)) for mid in movement_ids]
    corpus = Corpus(movements)
    if logger is not None:
        logger.info('Loaded {} movements, {} notes, {} harmony events, {} motif instances'.format(
            len(corpus), len(note_rows), len(harmony_rows), len(motif_rows)))
    return corpus


def filter_period(corpus, period, logger=None):
    """
    Keep only the movements tagged with ``period`` in the manifest.
    ``period=None`` returns the corpus unchanged.
    """
    if period is None:
        return corpus
    movements = [m for m in corpus if m.period == period]
    if logger is not None:
        logger.info('Period filter "{}": kept {} of {} movements'.format(
            period, len(movements), len(corpus)))
    return Corpus(movements, period_tag=period)


def save_corpus(corpus, out_dir, config=None, input_hash=None):
    """
    Write the corpus back to the three CSV files (plus ``movements.csv`` when any
    movement carries a period), in canonical order.

    Returns:
        paths (dict): file kind -> path.
    """
    os.makedirs(out_dir, exist_ok=True)
    notes = [n for m in corpus for n in m.notes]
    harmony = [h for m in corpus for h in m.harmony]
    motifs = [i for m in corpus for i in m.motifs]

    note_table = Table(rows=[[getattr(n, c) for c, _ in NOTES_COLUMNS] for n in notes] or None,
                       names=[c for c, _ in NOTES_COLUMNS],
                       dtype=[str, int, float, float, int, int, float, float, int])
    harmony_table = Table(rows=[[h.movement_id, h.onset_qn, h.local_key, h.function_zone,
                                 int(h.is_secondary), h.complexity] for h in harmony] or None,
                          names=[c for c, _ in HARMONY_COLUMNS],
                          dtype=[str, float, str, str, int, float])
    motif_table = Table(rows=[[i.movement_id, i.motif_class_id, i.instance_id,
                               ';'.join(str(k) for k in i.note_ids)] for i in motifs] or None,
                        names=[c for c, _ in MOTIFS_COLUMNS],
                        dtype=[str, int, int, str])
    paths = {'notes': os.path.join(out_dir, 'notes.csv'),
             'harmony': os.path.join(out_dir, 'harmony.csv'),
             'motifs': os.path.join(out_dir, 'motifs.csv')}
    save_table(note_table, paths['notes'], config=config, input_hash=input_hash)
    save_table(harmony_table, paths['harmony'], config=config, input_hash=input_hash)
    save_table(motif_table, paths['motifs'], config=config, input_hash=input_hash)
    tagged = [m for m in corpus if m.period is not None]
    if tagged:
        manifest = Table(rows=[[m.movement_id, m.period] for m in tagged],
                         names=['movement_id', 'period'], dtype=[str, str])
        paths['manifest'] = os.path.join(out_dir, 'movements.csv')
        save_table(manifest, paths['manifest'], config=config, input_hash=input_hash)
    return paths


#########################################################################
############################## Validation ###############################
#########################################################################

def validate_corpus(corpus):
    """
    Check every invariant of the data model.
    Onset order needs no check: ``Movement`` sorts its events on construction.

    Parameters:
        corpus (``Corpus``)

    Returns:
        diagnostics (list of ``Diagnostic``): empty iff the corpus is well formed.
    """
    diagnostics = []
    for movement in corpus:
        mid = movement.movement_id
        if not movement.notes:
            diagnostics.append(Diagnostic(mid, 'movement', 'no notes'))
        seen = set()
        for note in movement.notes:
            entity = 'note {}'.format(note.note_id)
            if note.note_id in seen:
                diagnostics.append(Diagnostic(mid, entity, 'duplicate note id'))
            seen.add(note.note_id)
            if not note.duration_qn > 0:
                diagnostics.append(Diagnostic(mid, entity, 'non-positive duration'))
            if note.onset_qn < 0:
                diagnostics.append(Diagnostic(mid, entity, 'negative onset'))
            if not 0 <= note.midi_pitch <= 127:
                diagnostics.append(Diagnostic(mid, entity, 'pitch out of range'))
            if note.measure < 1:
                diagnostics.append(Diagnostic(mid, entity, 'measure below 1'))
            if note.beat < 1:
                diagnostics.append(Diagnostic(mid, entity, 'beat below 1'))
            if note.expressive_marks < 0:
                diagnostics.append(Diagnostic(mid, entity, 'negative expressive marks'))

        if not any(abs(h.onset_qn) <= ONSET_TOL for h in movement.harmony):
            diagnostics.append(Diagnostic(mid, 'harmony', 'no initial harmony'))
        for event in movement.harmony:
            if event.complexity < 0:
                diagnostics.append(Diagnostic(mid, 'harmony@{}'.format(event.onset_qn),
                                              'negative complexity'))

        for instance in movement.motifs:
            entity = 'instance {}'.format(instance.instance_id)
            if not instance.note_ids:
                diagnostics.append(Diagnostic(mid, entity, 'empty motif'))
                continue
            if not all(movement.has_note(i) for i in instance.note_ids):
                diagnostics.append(Diagnostic(mid, entity, 'dangling note reference'))
    return diagnostics
