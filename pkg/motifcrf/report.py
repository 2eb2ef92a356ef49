"""
Result tables: label prevalence, corpus overview, permutation tests and
FDR-filtered effects, rendered as CSV and plain text.
"""
import numpy as np
from astropy.table import Table

from . import LABEL_NAMES, LABEL_TITLES, FEATURE_TITLES
from .errors import EmptyData
from .utils import config_comments

__all__ = ["prevalence_report", "corpus_overview", "clr_table", "filter_effects",
           "render_report"]


def prevalence_report(Y, labels=None):
    """
    Frequency of every transformation family over the N labelled instances.

    Parameters:
        Y (array): N x Q binary labels.
        labels (list of str): label names. Default is the first Q of ``LABEL_NAMES``.

    Returns:
        table (``astropy.table.Table``): label, title, count, n, frequency (3 decimals).
    """
    Y = np.asarray(Y)
    if Y.ndim != 2 or Y.shape[0] == 0:
        raise EmptyData('No labelled instances')
    labels = labels or LABEL_NAMES[:Y.shape[1]]
    counts = Y.sum(axis=0).astype(int)
    table = Table([labels, [LABEL_TITLES.get(q, q) for q in labels], counts,
                   np.full(len(labels), Y.shape[0], dtype=int), counts / Y.shape[0]],
                  names=['label', 'title', 'count', 'n', 'frequency'])
    table['frequency'].format = '.3f'
    return table


def corpus_overview(labels_table, periods=None):
    """
    Movements, segments and motif instances per period.

    Parameters:
        labels_table (``astropy.table.Table``): rows of ``labels.csv``.
        periods (dict): movement_id -> period. Movements without one are counted under ``all``.

    Returns:
        table (``astropy.table.Table``)
    """
    periods = periods or {}
    groups = {}
    for row in labels_table:
        period = periods.get(str(row['movement_id']), 'all')
        g = groups.setdefault(period, {'movements': set(), 'segments': set(), 'instances': 0})
        g['movements'].add(str(row['movement_id']))
        g['segments'].add(int(row['segment_id']))
        g['instances'] += 1
    rows = [[p, len(g['movements']), len(g['segments']), g['instances']]
            for p, g in sorted(groups.items())]
    return Table(rows=rows or None, names=['period', 'movements', 'segments', 'instances'],
                 dtype=[str, int, int, int])


def clr_table(results):
    """ One row per permutation test; ``p_perm`` is shown with 4 decimals. """
    table = Table(rows=[[r.comparison.title, r.comparison.null, r.comparison.alternative,
                         r.observed_clr, r.B, r.p_perm, r.n_failed] for r in results] or None,
                  names=['comparison', 'null', 'alternative', 'clr', 'B', 'p_perm', 'n_failed'],
                  dtype=[str, str, str, float, int, float, int])
    table['clr'].format = '.4f'
    table['p_perm'].format = '.4f'
    return table


def filter_effects(table, fdr_level=0.05, families=None):
    """ Rows with ``q_bh < fdr_level`` (optionally only the given families); header kept. """
    keep = np.asarray(table['q_bh'], dtype=float) < fdr_level if len(table) else np.zeros(0, bool)
    if families is not None and len(table):
        keep &= np.isin(np.asarray(table['family']).astype(str), families)
    out = table[keep]
    for name in ('estimate', 'se', 'ci_lo', 'ci_hi'):
        if name in out.colnames:
            out[name].format = '.3f'
    for name in ('p', 'q_bh'):
        if name in out.colnames:
            out[name].format = '.4f'
    return out


def _section(title, table):
    lines = [title, '=' * len(title)]
    if table is None:
        lines.append('(not available)')
    else:
        lines += table.pformat(max_lines=-1, max_width=-1)
        if len(table) == 0:
            lines.append('(no rows)')
    return lines + ['']


def render_report(prevalence, overview=None, clr=None, unary=None, pairwise=None, ess=None,
                  fdr_level=0.05, config=None, input_hash=None):
    """
    Plain-text report of every available table.

    ``config`` and ``input_hash``, when given, open the report as ``#`` lines,
    the same header the CSV artifacts carry.

    Returns:
        text (str)
    """
    lines = ['# ' + c for c in config_comments(config, input_hash)]
    lines += _section('Prevalence of transformation families (N = {})'.format(
        int(prevalence['n'][0]) if len(prevalence) else 0), prevalence['title', 'count', 'frequency'])
    lines += _section('Corpus overview', overview)
    lines += _section('Composite likelihood ratio tests', clr)
    if unary is not None:
        unary = filter_effects(unary, fdr_level, families=['unary'])
        if len(unary):
            unary['feature'] = [FEATURE_TITLES.get(f, f) for f in unary['feature']]
    lines += _section('Unary effects (q_BH < {:g})'.format(fdr_level), unary)
    if pairwise is not None:
        pairwise = filter_effects(pairwise, fdr_level)
    lines += _section('Pairwise effects (q_BH < {:g})'.format(fdr_level), pairwise)
    lines += _section('Effective sample size', ess)
    return '\n'.join(lines)
