# -*- coding: utf-8 -*-
__all__ = ["score", "segmentation", "alignment", "features", "graph", "crf",
           "inference", "simulate", "report", "task", "utils", "errors"]

# Version
from importlib.metadata import version, PackageNotFoundError
try:
    __version__ = version(__name__)
except PackageNotFoundError:
    # package is not installed
    __version__ = '0.0.0'

__author__ = ['motifcrf developers']

# Comparison tolerance for score times, in quarter-notes
ONSET_TOL = 1e-6

# Transformation families, in label-vector order
LABEL_NAMES = ['identity', 'contour', 'salient_leap', 'rhythm',
               'note_edit', 'harmony', 'intervallic', 'symmetry']
LABEL_TITLES = {'identity': 'Identity',
                'contour': 'Contour',
                'salient_leap': 'Salient Leap',
                'rhythm': 'Rhythm',
                'note_edit': 'Note Addition/Removal',
                'harmony': 'Harmony',
                'intervallic': 'Intervallic',
                'symmetry': 'Symmetry'}

# Motif-level descriptors, in design-matrix order
FEATURE_NAMES = ['spread_harmonic_complexity', 'secondary_chord_proportion',
                 'key_change_count', 'pitch_spread', 'motif_pitch_register',
                 'ioi_sd', 'silence_proportion', 'metrical_stress_rate',
                 'expressive_density', 'dynamic_variability']
OPTIONAL_FEATURE_NAMES = ['accentuation_sd']
FEATURE_TITLES = {'intercept': 'Intercept',
                  'spread_harmonic_complexity': 'Spread Harmonic Complexity',
                  'secondary_chord_proportion': 'Secondary Chord Proportion',
                  'key_change_count': 'Key Change Count',
                  'pitch_spread': 'Pitch Spread',
                  'motif_pitch_register': 'Motif Pitch Register',
                  'ioi_sd': 'IOI Standard Deviation',
                  'silence_proportion': 'Silence Proportion',
                  'metrical_stress_rate': 'Metrical Stress Rate',
                  'expressive_density': 'Expressive Density',
                  'dynamic_variability': 'Dynamic Variability',
                  'accentuation_sd': 'Accentuation SD'}

# Harmonic function zones
FUNCTION_ZONES = ('T', 'PD', 'D')

# Suggested (not enforced) ordinal scale for ``dynamic_level``
DYNAMIC_LEVELS = {'pp': 1.0, 'p': 2.4, 'mp': 3.8,
                  'mf': 5.2, 'f': 6.6, 'ff': 8.0}

# Tonic pitch classes for ``local_key`` parsing
PITCH_CLASSES = {'C': 0, 'D': 2, 'E': 4, 'F': 5, 'G': 7, 'A': 9, 'B': 11}
