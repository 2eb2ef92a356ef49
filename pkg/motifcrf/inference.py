"""
Inference for the pseudo-likelihood estimator: Godambe sandwich covariance, Wald
intervals with Benjamini-Hochberg adjustment, segment-constrained permutation
tests of nested structures, effective sample sizes, and resampling checks.
"""
from enum import Enum
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import List

import numpy as np
from scipy import linalg, sparse, stats
from astropy.table import Table
from tqdm import tqdm

from . import LABEL_NAMES
from .crf import CrfProblem, fit_problem
from .errors import (SingularHessian, FitFailure, NonFiniteValue, DimensionMismatch,
                     EmptyData)

__all__ = ["InferenceData", "SandwichCovariance", "Comparison", "ClrTestResult", "EssReport",
           "sandwich", "godambe_covariance", "wald_intervals", "bh_adjust", "effect_tables",
           "permute_within_segments", "clr_permutation_test", "effective_sample_size",
           "segment_bootstrap_se", "subsample_stability", "RNG_SCHEME"]

RNG_SCHEME = 'numpy Philox, SeedSequence([seed, comparison_code, replicate(, retry)])'


@dataclass
class InferenceData:
    """
    Assembled dataset: design matrix, labels, block-diagonal adjacency and the
    segment id of every row. Rows of one segment are contiguous.
    """
    X: np.ndarray
    Y: np.ndarray
    adjacency: sparse.csr_matrix
    segment_index: np.ndarray
    columns: List[str] = None

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.Y = np.asarray(self.Y, dtype=float)
        self.adjacency = sparse.csr_matrix(self.adjacency)
        self.segment_index = np.asarray(self.segment_index)
        n = self.X.shape[0]
        if self.Y.shape[0] != n or self.adjacency.shape != (n, n) or len(self.segment_index) != n:
            raise DimensionMismatch('Inconsistent dataset: X {}, Y {}, A {}, segments {}'.format(
                self.X.shape, self.Y.shape, self.adjacency.shape, len(self.segment_index)))
        if self.columns is None:
            self.columns = ['intercept'] + ['x{}'.format(k) for k in range(1, self.X.shape[1])]

    @property
    def n_segments(self):
        return len(self.blocks())

    def blocks(self):
        """ Row indices of every segment, in order of first appearance. """
        _, first = np.unique(self.segment_index, return_index=True)
        order = self.segment_index[np.sort(first)]
        return [np.flatnonzero(self.segment_index == s) for s in order]

    def take_segments(self, blocks):
        """ A new dataset made of the given row blocks (repeats allowed), renumbered. """
        rows = np.concatenate(blocks) if blocks else np.zeros(0, dtype=int)
        adj = sparse.block_diag([self.adjacency[b][:, b] for b in blocks], format='csr') \
            if blocks else sparse.csr_matrix((0, 0))
        seg = np.concatenate([np.full(len(b), k) for k, b in enumerate(blocks)]) \
            if blocks else np.zeros(0, dtype=int)
        return InferenceData(self.X[rows], self.Y[rows], adj, seg, list(self.columns))


@dataclass
class SandwichCovariance:
    """
    Godambe covariance ``G = H^-1 J H^-1`` in free-parameter coordinates, and the
    same covariance carried to (free alpha entries, beta entries).
    """
    G: np.ndarray
    H: np.ndarray
    J: np.ndarray
    entries: np.ndarray

    @property
    def se(self):
        return np.sqrt(np.clip(np.diag(self.G), 0, None))


class Comparison(Enum):
    """Nested model comparisons: (null structure, alternative structure, permuted matrix)."""
    BASELINE_VS_UNARY = ('BaselineVsUnary', 'baseline', 'unary', 'X')
    UNARY_VS_FULL = ('UnaryVsFull', 'unary', 'full', 'S')
    PAIRWISE_VS_FULL = ('PairwiseVsFull', 'pairwise', 'full', 'X')

    @property
    def title(self):
        return self.value[0]

    @property
    def null(self):
        return self.value[1]

    @property
    def alternative(self):
        return self.value[2]

    @property
    def permuted(self):
        return self.value[3]

    @property
    def code(self):
        return list(Comparison).index(self)

    @classmethod
    def from_title(cls, title):
        for comp in cls:
            if comp.title == title:
                return comp
        raise ValueError('Unknown comparison "{}"'.format(title))


@dataclass
class ClrTestResult:
    comparison: Comparison
    observed_clr: float
    permuted_clrs: np.ndarray
    p_perm: float
    n_failed: int = 0
    n_unconverged: int = 0

    @property
    def B(self):
        return len(self.permuted_clrs)


@dataclass
class EssReport:
    """Number of informative segments per coefficient."""
    unary_ess: int
    pairwise_ess: np.ndarray
    moderate: int = 50
    low: int = 30

    def flag(self, ess):
        if ess < self.low:
            return 'low'
        if ess < self.moderate:
            return 'moderate'
        return 'ok'

    def to_table(self, labels=None):
        Q = self.pairwise_ess.shape[0]
        labels = labels or LABEL_NAMES[:Q]
        rows = [['unary', '-', '-', self.unary_ess, self.flag(self.unary_ess)]]
        for q in range(Q):
            for r in range(q, Q):
                ess = int(self.pairwise_ess[q, r])
                rows.append(['pairwise', labels[q], labels[r], ess, self.flag(ess)])
        return Table(rows=rows, names=['kind', 'label_q', 'label_r', 'ess', 'flag'],
                     dtype=[str, str, str, int, str])


#########################################################################
######################## Sandwich Covariance ############################
#########################################################################

def sandwich(H, J, jitter=0.0):
    """
    ``H^-1 J H^-1`` by symmetric solves.

    Parameters:
        H (ndarray): Hessian (negative definite) or its negation.
        J (ndarray): score outer-product matrix.
        jitter (float): added to the diagonal of ``-H`` when it is singular.

    Raises:
        SingularHessian: ``-H`` is not positive definite and no jitter is allowed.
    """
    H = np.atleast_2d(np.asarray(H, dtype=float))
    J = np.atleast_2d(np.asarray(J, dtype=float))
    # work with the positive definite information matrix
    info = -H if np.trace(H) < 0 else H
    eig = linalg.eigvalsh(info)
    if eig.size and eig[0] <= 1e-10 * max(eig[-1], 1.0):
        if jitter <= 0:
            raise SingularHessian(eig[0])
        info = info + jitter * np.eye(info.shape[0])
    left = linalg.solve(info, J, assume_a='sym')
    G = linalg.solve(info, left.T, assume_a='sym')
    return 0.5 * (G + G.T)


def godambe_covariance(data, fit, per_instance=False, jitter=0.0, neighbors=None, logger=None):
    """
    Godambe sandwich covariance of a fitted model.

    ``H`` is the analytic Hessian of the unpenalized pseudo-log-likelihood at the fit;
    ``J`` sums the outer products of segment-level scores (instance-level when
    ``per_instance`` is set).

    Parameters:
        data (``InferenceData``): the fitted dataset.
        fit (``FitResult``): the fit.
        per_instance (bool): treat instances instead of segments as independent units.
        jitter (float): diagonal jitter used if the Hessian is singular.

    Returns:
        covariance (``SandwichCovariance``)
    """
    problem = CrfProblem(data.X, data.Y, data.adjacency, structure=fit.structure,
                         neighbors=neighbors)
    H = problem.hessian(fit.theta)
    scores = problem.instance_scores(fit.theta)
    if not per_instance:
        scores = np.array([scores[b].sum(axis=0) for b in data.blocks()])
    J = scores.T @ scores
    G = sandwich(H, J, jitter=jitter)
    T = fit.layout.covariance_transform()
    entries = T @ G @ T.T
    if logger is not None:
        logger.info('    - sandwich covariance over {} parameters, {} clusters'.format(
            G.shape[0], scores.shape[0]))
    return SandwichCovariance(G, H, J, 0.5 * (entries + entries.T))


#########################################################################
######################## Wald and FDR ###################################
#########################################################################

def bh_adjust(p_values):
    """
    Benjamini-Hochberg adjusted p-values (q-values), in input order.

    ``q_(i) = min_{j >= i} m p_(j) / j``, clipped to 1.
    """
    p = np.asarray(p_values, dtype=float)
    m = p.size
    if m == 0:
        return p.copy()
    order = np.argsort(p, kind='mergesort')
    ranked = p[order] * m / np.arange(1, m + 1)
    q_sorted = np.minimum.accumulate(ranked[::-1])[::-1]
    q = np.empty(m)
    q[order] = np.clip(q_sorted, 0, 1)
    return q


def wald_intervals(estimates, covariance, names=None, families=None, level=0.95,
                   reference='normal', df=None):
    """
    Wald confidence intervals and two-sided p-values, BH-adjusted within each family.

    Parameters:
        estimates (array): point estimates.
        covariance (array): covariance matrix, or a vector of variances.
        names (list of str): row names.
        families (list of str): family of every row; BH runs per family.
        level (float): confidence level.
        reference (str): ``'normal'`` or ``'t'`` (``df`` degrees of freedom).

    Returns:
        table (``astropy.table.Table``): name, family, estimate, se, ci_lo, ci_hi, p, q_bh.
    """
    est = np.atleast_1d(np.asarray(estimates, dtype=float))
    cov = np.asarray(covariance, dtype=float)
    var = np.diag(cov) if cov.ndim == 2 else cov
    se = np.sqrt(np.clip(var, 0, None))
    names = names if names is not None else ['theta{}'.format(k) for k in range(len(est))]
    families = families if families is not None else ['all'] * len(est)

    if reference == 't':
        if df is None or df < 1:
            raise ValueError('t reference needs df >= 1')
        dist = stats.t(df)
    elif reference == 'normal':
        dist = stats.norm()
    else:
        raise ValueError('Unknown reference distribution "{}"'.format(reference))
    crit = dist.ppf(1 - (1 - level) / 2)

    with np.errstate(divide='ignore', invalid='ignore'):
        stat = np.where(se > 0, est / np.where(se > 0, se, 1), 0.0)
    p = np.where(se > 0, 2 * dist.sf(np.abs(stat)), np.where(est != 0, 0.0, 1.0))
    lo, hi = est - crit * se, est + crit * se

    q = np.empty_like(p)
    families = np.asarray(families)
    for fam in np.unique(families):
        idx = np.flatnonzero(families == fam)
        q[idx] = bh_adjust(p[idx])
    return Table([list(names), list(families), est, se, lo, hi, p, q],
                 names=['name', 'family', 'estimate', 'se', 'ci_lo', 'ci_hi', 'p', 'q_bh'])


def effect_tables(fit, covariance, columns, labels=None, level=0.95, reference='normal', df=None):
    """
    Unary and pairwise effect tables of a fit.

    Intercepts are their own BH family; feature effects form the unary family, and
    the upper triangle (diagonal included) of beta the pairwise family.

    Returns:
        unary (``astropy.table.Table``), pairwise (``astropy.table.Table``)
    """
    layout = fit.layout
    Q = layout.Q
    labels = labels or LABEL_NAMES[:Q]
    var = np.diag(covariance.entries)

    est, v, names, fams, feats, labs = [], [], [], [], [], []
    for k, r in enumerate(layout.alpha_rows):
        for q in range(Q):
            est.append(fit.params.alpha[r, q])
            v.append(var[k * Q + q])
            names.append('{}:{}'.format(columns[r], labels[q]))
            fams.append('intercept' if r == 0 else 'unary')
            feats.append(columns[r])
            labs.append(labels[q])
    unary = wald_intervals(est, np.array(v), names, fams, level=level, reference=reference, df=df)
    unary.add_column(feats, name='feature', index=1)
    unary.add_column(labs, name='label', index=2)

    rows_q, rows_r, est, v, names = [], [], [], [], []
    if layout.with_beta:
        for q in range(Q):
            for r in range(q, Q):
                est.append(fit.params.beta[q, r])
                v.append(var[layout.n_alpha + q * Q + r])
                names.append('{}:{}'.format(labels[q], labels[r]))
                rows_q.append(labels[q])
                rows_r.append(labels[r])
    pairwise = wald_intervals(est, np.array(v), names, ['pairwise'] * len(est), level=level,
                              reference=reference, df=df)
    pairwise.add_column(rows_q, name='label_q', index=1)
    pairwise.add_column(rows_r, name='label_r', index=2)
    return unary, pairwise


#########################################################################
####################### Permutation CLR tests ###########################
#########################################################################

def permute_within_segments(M, blocks, rng):
    """ Copy of ``M`` whose rows are shuffled independently inside every block. """
    out = np.array(M, copy=True)
    for block in blocks:
        out[block] = M[block][rng.permutation(len(block))]
    return out


def _replicate_rng(seed, code, b, retry=0):
    entropy = [seed, code, b] + ([retry] if retry else [])
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def _fit_pair(data, comparison, X, S, fit_kwargs, theta0=(None, None)):
    null = CrfProblem(X, data.Y, data.adjacency, structure=comparison.null, neighbors=S,
                      lambda_alpha=fit_kwargs['lambda_alpha'], lambda_beta=fit_kwargs['lambda_beta'])
    alt = CrfProblem(X, data.Y, data.adjacency, structure=comparison.alternative, neighbors=S,
                     lambda_alpha=fit_kwargs['lambda_alpha'], lambda_beta=fit_kwargs['lambda_beta'])
    opts = dict(lbfgs_memory=fit_kwargs['lbfgs_memory'], max_iter=fit_kwargs['max_iter'],
                gtol=fit_kwargs['gtol'])
    fit_null = fit_problem(null, theta0=theta0[0], **opts)
    fit_alt = fit_problem(alt, theta0=theta0[1], **opts)
    return fit_null, fit_alt


def _one_replicate(args):
    """ CLR of permutation ``b``: (clr, failed, unconverged). """
    data, comparison, b, seed, S_obs, fit_kwargs, theta0 = args
    blocks = data.blocks()
    for retry in (0, 1):
        rng = _replicate_rng(seed, comparison.code, b, retry)
        if comparison.permuted == 'X':
            X, S = permute_within_segments(data.X, blocks, rng), S_obs
        else:
            X, S = data.X, permute_within_segments(S_obs, blocks, rng)
        try:
            fit_null, fit_alt = _fit_pair(data, comparison, X, S, fit_kwargs, theta0)
            clr = fit_alt.loglik - fit_null.loglik
            if not np.isfinite(clr):
                raise FitFailure('Non-finite permuted CLR')
        except (FitFailure, NonFiniteValue, np.linalg.LinAlgError):
            continue
        return clr, False, not (fit_null.converged and fit_alt.converged)
    return np.inf, True, False


def clr_permutation_test(data, comparison, B=1000, seed=0, lambda_alpha=1e-3, lambda_beta=1e-3,
                         lbfgs_memory=10, max_iter=500, gtol=1e-6, warm_start=False, n_jobs=1,
                         verbose=False, logger=None):
    """
    Composite likelihood ratio test of two nested structures, calibrated by permuting
    rows within segments.

    Covariate comparisons permute the rows of X; ``UnaryVsFull`` permutes the rows of
    the neighbor matrix ``S``, which the refits treat as a fixed input. A permutation
    whose refit fails is retried once with a fresh sub-seed and otherwise counted as
    an exceedance.

    Parameters:
        data (``InferenceData``): the dataset.
        comparison (``Comparison``): which nested pair to compare.
        B (int): number of permutations.
        seed (int): base seed; replicate ``b`` uses its own counter-based stream.
        warm_start (bool): start refits from the observed estimates.
        n_jobs (int): worker processes. Results do not depend on it.
        verbose (bool): show a progress bar.

    Returns:
        result (``ClrTestResult``): ``p_perm = (1 + #{clr_b >= clr_obs}) / (B + 1)``.
    """
    if isinstance(comparison, str):
        comparison = Comparison.from_title(comparison)
    if data.X.shape[0] == 0:
        raise EmptyData('No instances to test')
    fit_kwargs = dict(lambda_alpha=lambda_alpha, lambda_beta=lambda_beta,
                      lbfgs_memory=lbfgs_memory, max_iter=max_iter, gtol=gtol)
    S_obs = np.asarray(data.adjacency @ data.Y)
    fit_null, fit_alt = _fit_pair(data, comparison, data.X, S_obs, fit_kwargs)
    observed = fit_alt.loglik - fit_null.loglik
    if observed < -1e-6 and logger is not None:
        logger.warning('    - {}: negative observed CLR {:.3e}, optimization failure'.format(
            comparison.title, observed))
    theta0 = (fit_null.theta, fit_alt.theta) if warm_start else (None, None)

    jobs = [(data, comparison, b, seed, S_obs, fit_kwargs, theta0) for b in range(B)]
    desc = comparison.title
    if n_jobs is not None and n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            results = list(tqdm(pool.map(_one_replicate, jobs, chunksize=max(1, B // (4 * n_jobs))),
                                total=B, desc=desc, disable=not verbose))
    else:
        results = [_one_replicate(job) for job in tqdm(jobs, desc=desc, disable=not verbose)]

    clrs = np.array([r[0] for r in results], dtype=float)
    n_failed = int(sum(r[1] for r in results))
    n_unconverged = int(sum(r[2] for r in results))
    p_perm = (1 + int(np.sum(clrs >= observed))) / (B + 1)
    if logger is not None:
        logger.info('    - {}: CLR {:.4f}, p = {:.4f} ({} permutations, {} failed)'.format(
            comparison.title, observed, p_perm, B, n_failed))
    return ClrTestResult(comparison, float(observed), clrs, p_perm, n_failed, n_unconverged)


#########################################################################
########################## Sample Size Checks ###########################
#########################################################################

def effective_sample_size(Y, segment_index, moderate=50, low=30):
    """
    Informative segment counts.

    ``unary_ess`` is the number of segments; ``pairwise_ess[q, r]`` the number of
    segments containing an instance with label q or label r active.
    """
    Y = np.asarray(Y).astype(bool)
    segment_index = np.asarray(segment_index)
    segs = np.unique(segment_index)
    active = np.array([Y[segment_index == s].any(axis=0) for s in segs]).reshape(len(segs), Y.shape[1])
    pairwise = (active[:, :, None] | active[:, None, :]).sum(axis=0)
    return EssReport(len(segs), pairwise.astype(int), moderate=moderate, low=low)


def _fit_data(data, structure, fit_kwargs):
    problem = CrfProblem(data.X, data.Y, data.adjacency, structure=structure,
                         lambda_alpha=fit_kwargs.get('lambda_alpha', 1e-3),
                         lambda_beta=fit_kwargs.get('lambda_beta', 1e-3))
    return fit_problem(problem, lbfgs_memory=fit_kwargs.get('lbfgs_memory', 10),
                       max_iter=fit_kwargs.get('max_iter', 500), gtol=fit_kwargs.get('gtol', 1e-6))


def segment_bootstrap_se(data, structure='full', n_boot=500, seed=0, verbose=False, **fit_kwargs):
    """
    Standard errors from resampling whole segments with replacement.

    Returns:
        se (ndarray): bootstrap SD of every free parameter.
        estimates (ndarray): n_boot x d bootstrap estimates.
    """
    blocks = data.blocks()
    rng = np.random.default_rng(seed)
    estimates = []
    for _ in tqdm(range(n_boot), desc='bootstrap', disable=not verbose):
        pick = rng.integers(0, len(blocks), size=len(blocks))
        boot = data.take_segments([blocks[k] for k in pick])
        estimates.append(_fit_data(boot, structure, fit_kwargs).theta)
    estimates = np.array(estimates)
    return estimates.std(axis=0, ddof=1), estimates


def subsample_stability(data, n_segments, n_rep=50, seed=0, structure='full', verbose=False,
                        **fit_kwargs):
    """
    Refit on random subsets of ``n_segments`` segments (without replacement) and
    summarize the spread of each estimate.

    Returns:
        table (``astropy.table.Table``): name, full_estimate, mean, sd per free parameter.
    """
    blocks = data.blocks()
    if not 0 < n_segments <= len(blocks):
        raise ValueError('n_segments must be in [1, {}]'.format(len(blocks)))
    full = _fit_data(data, structure, fit_kwargs)
    rng = np.random.default_rng(seed)
    estimates = []
    for _ in tqdm(range(n_rep), desc='subsample', disable=not verbose):
        pick = np.sort(rng.choice(len(blocks), size=n_segments, replace=False))
        sub = data.take_segments([blocks[k] for k in pick])
        estimates.append(_fit_data(sub, structure, fit_kwargs).theta)
    estimates = np.array(estimates)
    names = full.layout.names(data.columns)
    return Table([names, full.theta, estimates.mean(axis=0), estimates.std(axis=0, ddof=1)],
                 names=['name', 'full_estimate', 'mean', 'sd'])
