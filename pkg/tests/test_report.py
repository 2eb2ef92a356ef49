"""
Test result tables and the plain-text report.
"""
import numpy as np
import pytest
from astropy.table import Table
from numpy.testing import assert_allclose

from motifcrf import LABEL_NAMES
from motifcrf.errors import EmptyData
from motifcrf.inference import Comparison, ClrTestResult, wald_intervals, effective_sample_size
from motifcrf.report import (prevalence_report, corpus_overview, clr_table, filter_effects,
                             render_report)


def _labels_matrix():
    Y = np.zeros((500, 3), dtype=int)
    Y[:125, 0] = 1
    Y[:194, 2] = 1
    return Y


def test_prevalence_formatting():
    table = prevalence_report(_labels_matrix())
    assert list(table['label']) == LABEL_NAMES[:3]
    assert list(table['count']) == [125, 0, 194]
    assert_allclose(table['frequency'], [0.25, 0.0, 0.388])
    text = '\n'.join(table.pformat())
    for value in ('0.250', '0.000', '0.388'):
        assert value in text


def test_prevalence_empty():
    with pytest.raises(EmptyData):
        prevalence_report(np.zeros((0, 8)))


def test_corpus_overview():
    labels = Table(rows=[['a', 1, 0], ['a', 2, 0], ['a', 3, 1], ['b', 4, 2], ['c', 5, 3]],
                   names=['movement_id', 'instance_id', 'segment_id'])
    table = corpus_overview(labels, {'a': 'early', 'b': 'early'})
    rows = {row['period']: (row['movements'], row['segments'], row['instances']) for row in table}
    assert rows == {'early': (2, 3, 4), 'all': (1, 1, 1)}


def test_clr_table():
    results = [ClrTestResult(Comparison.BASELINE_VS_UNARY, 40.0, np.zeros(999), 0.001),
               ClrTestResult(Comparison.UNARY_VS_FULL, 0.5, np.ones(999), 1.0, n_failed=2)]
    table = clr_table(results)
    assert list(table['comparison']) == ['BaselineVsUnary', 'UnaryVsFull']
    assert list(table['B']) == [999, 999]
    assert list(table['n_failed']) == [0, 2]
    assert '0.0010' in '\n'.join(table.pformat())
    assert len(clr_table([])) == 0


def _effects():
    table = wald_intervals([3.0, 0.01, 2.5, 0.02], [0.25, 1.0, 0.25, 1.0],
                           names=['a', 'b', 'c', 'd'],
                           families=['unary', 'unary', 'intercept', 'intercept'])
    table.add_column(['pitch_spread', 'ioi_sd', 'intercept', 'intercept'], name='feature', index=1)
    return table


def test_filter_effects():
    kept = filter_effects(_effects(), fdr_level=0.05)
    assert list(kept['name']) == ['a', 'c']
    unary = filter_effects(_effects(), fdr_level=0.05, families=['unary'])
    assert list(unary['name']) == ['a']


def test_filter_effects_keeps_header():
    table = filter_effects(_effects(), fdr_level=1e-12)
    assert len(table) == 0
    assert table.colnames == _effects().colnames
    assert 'estimate' in table.pformat()[0]


def test_render_report():
    Y = _labels_matrix()
    ess = effective_sample_size(Y, np.repeat(np.arange(100), 5)).to_table(LABEL_NAMES[:3])
    text = render_report(prevalence_report(Y), clr=clr_table([]), unary=_effects(), ess=ess)
    assert 'Prevalence of transformation families (N = 500)' in text
    assert 'Pitch Spread' in text
    assert 'IOI Standard Deviation' not in text
    # overview and pairwise sections were not given
    assert text.count('(not available)') == 2
    assert '(no rows)' in text
    assert 'Effective sample size' in text


def test_render_report_header():
    text = render_report(prevalence_report(_labels_matrix()), config={'B': 99, 'seed': 0},
                         input_hash='sha256:abc')
    lines = text.splitlines()
    assert lines[:3] == ['# input_hash=sha256:abc', '# config.B=99', '# config.seed=0']
    assert not render_report(prevalence_report(_labels_matrix())).startswith('#')
