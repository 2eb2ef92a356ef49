"""
Test the sandwich covariance, Wald/BH tables, permutation tests and sample-size checks.
"""
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from motifcrf.errors import SingularHessian, EmptyData
from motifcrf.crf import fit_crf
from motifcrf.inference import (InferenceData, Comparison, ClrTestResult, sandwich,
                                godambe_covariance, wald_intervals, bh_adjust, effect_tables,
                                permute_within_segments, clr_permutation_test,
                                effective_sample_size, segment_bootstrap_se,
                                subsample_stability)
from motifcrf.report import clr_table
from motifcrf.simulate import SimConfig, synthesize_corpus


@pytest.fixture(scope='module')
def sim_data():
    return synthesize_corpus(SimConfig(n_segments=30, instances_per_segment=5, Q=2, p=2,
                                       burn_in=50, seed=1)).data


@pytest.fixture(scope='module')
def sim_fit(sim_data):
    return fit_crf(sim_data.X, sim_data.Y, sim_data.adjacency)


#########################################################################
############################## Sandwich #################################
#########################################################################

@pytest.mark.parametrize('H', [4.0, -4.0])
def test_scalar_sandwich(H):
    G = sandwich(H, 8.0)
    assert_allclose(G, [[0.5]])
    assert_allclose(np.sqrt(G[0, 0]), 0.7071, atol=1e-4)


def test_information_identity():
    H = np.array([[2.0, 0.5], [0.5, 1.0]])
    assert_allclose(sandwich(-H, H), np.linalg.inv(H))


def test_singular_hessian():
    H = -np.ones((2, 2))
    with pytest.raises(SingularHessian) as info:
        sandwich(H, np.eye(2))
    assert info.value.min_eigenvalue == pytest.approx(0.0, abs=1e-12)
    assert np.all(np.isfinite(sandwich(H, np.eye(2), jitter=1e-8)))


def test_godambe_covariance(sim_data, sim_fit):
    cov = godambe_covariance(sim_data, sim_fit)
    d = sim_fit.layout.size
    assert cov.G.shape == (d, d)
    assert_allclose(cov.G, cov.G.T)
    assert np.all(cov.se > 0) and np.all(np.isfinite(cov.se))
    # beta entries: Q x Q after the free alpha entries
    assert cov.entries.shape == (sim_fit.layout.n_alpha + 4, sim_fit.layout.n_alpha + 4)
    per_instance = godambe_covariance(sim_data, sim_fit, per_instance=True)
    assert not np.allclose(per_instance.G, cov.G)


#########################################################################
############################## Wald / BH ################################
#########################################################################

@pytest.mark.parametrize('estimate, se, lo, hi', [(2.385, 0.789, 0.838, 3.932),
                                                  (-0.264, 0.027, -0.317, -0.211)])
def test_wald_interval(estimate, se, lo, hi):
    table = wald_intervals([estimate], [se ** 2])
    assert_allclose([table['ci_lo'][0], table['ci_hi'][0]], [lo, hi], atol=2e-3)


def test_wald_zero_se():
    table = wald_intervals([1.5, 0.0], [0.0, 0.0])
    assert_allclose(table['ci_lo'], [1.5, 0.0])
    assert_allclose(table['ci_hi'], [1.5, 0.0])
    assert_allclose(table['p'], [0.0, 1.0])


def test_wald_t_reference_is_wider():
    normal = wald_intervals([1.0], [0.25])
    t = wald_intervals([1.0], [0.25], reference='t', df=5)
    assert t['ci_lo'][0] < normal['ci_lo'][0]
    assert t['p'][0] > normal['p'][0]


def test_bh_families_are_separate():
    table = wald_intervals([3.0, 0.1, 3.0], [1.0, 1.0, 1.0], families=['a', 'b', 'a'])
    assert_allclose(table['q_bh'][[0, 2]], bh_adjust(table['p'][[0, 2]]))
    assert_allclose(table['q_bh'][1], table['p'][1])


@pytest.mark.parametrize('p, q', [([0.01, 0.02, 0.03, 0.5], [0.04, 0.04, 0.04, 0.5]),
                                  ([1.0], [1.0]),
                                  ([0.05, 0.05], [0.05, 0.05])])
def test_bh_known_values(p, q):
    assert_allclose(bh_adjust(p), q)


def _bh_oracle(p):
    p = np.asarray(p)
    m = len(p)
    q = np.empty(m)
    for i in range(m):
        q[i] = min(1.0, min(m * pj / np.sum(p <= pj) for pj in p if pj >= p[i]))
    return q


def _check_bh(p):
    q = bh_adjust(p)
    assert_allclose(q, _bh_oracle(p), atol=1e-12)
    assert np.all(q >= np.asarray(p) - 1e-12)
    order = np.argsort(p)
    assert np.all(np.diff(q[order]) >= -1e-12)


_p_vectors = st.lists(st.floats(0.0, 1.0), min_size=1, max_size=12)


@settings(max_examples=100, deadline=None)
@given(_p_vectors)
def test_bh_matches_step_up_definition(p):
    _check_bh(p)


@pytest.mark.slow
@settings(max_examples=1000, deadline=None)
@given(_p_vectors)
def test_bh_matches_step_up_definition_many(p):
    _check_bh(p)


def test_effect_tables(sim_data, sim_fit):
    cov = godambe_covariance(sim_data, sim_fit)
    unary, pairwise = effect_tables(sim_fit, cov, sim_data.columns)
    assert len(unary) == 3 * 2
    assert list(unary['family']).count('intercept') == 2
    assert unary.colnames == ['name', 'feature', 'label', 'family', 'estimate', 'se', 'ci_lo',
                              'ci_hi', 'p', 'q_bh']
    assert len(pairwise) == 3
    assert list(pairwise['label_q']) == ['identity', 'identity', 'contour']
    assert list(pairwise['label_r']) == ['identity', 'contour', 'contour']
    # zero row sums tie the diagonal to the off-diagonal entry
    assert_allclose(pairwise['estimate'][0], -pairwise['estimate'][1])


#########################################################################
############################ Permutation ################################
#########################################################################

def test_permute_within_segments():
    M = np.arange(10)[:, None] * np.ones((1, 2))
    blocks = [np.arange(0, 4), np.arange(4, 10)]
    out = permute_within_segments(M, blocks, np.random.default_rng(0))
    for b in blocks:
        assert sorted(out[b, 0]) == sorted(M[b, 0])
    assert_allclose(out[:, 0], out[:, 1])


def test_p_value_formatting():
    result = ClrTestResult(Comparison.BASELINE_VS_UNARY, 12.0, np.zeros(1000), 1 / 1001)
    assert result.B == 1000
    assert '0.0010' in '\n'.join(clr_table([result]).pformat())


@pytest.mark.parametrize('comparison', list(Comparison))
def test_clr_test_deterministic(sim_data, comparison):
    first = clr_permutation_test(sim_data, comparison, B=4, seed=3)
    second = clr_permutation_test(sim_data, comparison.title, B=4, seed=3)
    assert_allclose(first.permuted_clrs, second.permuted_clrs)
    assert first.p_perm == second.p_perm
    assert np.isfinite(first.observed_clr)
    exceed = np.sum(first.permuted_clrs >= first.observed_clr)
    assert first.p_perm == (1 + exceed) / 5


def test_clr_test_independent_of_workers(sim_data):
    serial = clr_permutation_test(sim_data, Comparison.BASELINE_VS_UNARY, B=3, seed=7)
    pooled = clr_permutation_test(sim_data, Comparison.BASELINE_VS_UNARY, B=3, seed=7, n_jobs=2)
    assert_allclose(serial.permuted_clrs, pooled.permuted_clrs)


def test_clr_test_empty():
    data = InferenceData(np.zeros((0, 2)), np.zeros((0, 2)), np.zeros((0, 0)), np.zeros(0))
    with pytest.raises(EmptyData):
        clr_permutation_test(data, Comparison.UNARY_VS_FULL, B=2)


#########################################################################
######################### Sample-size checks ############################
#########################################################################

def test_pairwise_ess_union():
    seg = np.repeat(np.arange(10), 2)
    Y = np.zeros((20, 3), dtype=int)
    Y[seg == 1, 0] = 1
    Y[2 * 2, 0] = 1
    Y[2 * 2 + 1, 1] = 1
    Y[2 * 3, 1] = 1
    ess = effective_sample_size(Y, seg)
    assert ess.unary_ess == 10
    assert ess.pairwise_ess[0, 1] == 3
    assert ess.pairwise_ess[0, 0] == 2
    assert ess.pairwise_ess[2, 2] == 0
    table = ess.to_table()
    assert list(table['flag'])[0] == 'low'


def test_blocks_and_take_segments(sim_data):
    blocks = sim_data.blocks()
    assert len(blocks) == sim_data.n_segments == 30
    sub = sim_data.take_segments([blocks[3], blocks[3]])
    assert sub.X.shape[0] == 2 * len(blocks[3])
    assert sub.n_segments == 2
    assert sub.adjacency[:len(blocks[3]), len(blocks[3]):].nnz == 0


def test_resampling_helpers(sim_data):
    se, estimates = segment_bootstrap_se(sim_data, structure='unary', n_boot=5, seed=0)
    assert estimates.shape == (5, 3 * 2)
    assert np.all(se > 0)
    table = subsample_stability(sim_data, n_segments=20, n_rep=3, seed=0, structure='unary')
    assert table.colnames == ['name', 'full_estimate', 'mean', 'sd']
    assert len(table) == 3 * 2


@pytest.mark.slow
def test_sandwich_agrees_with_bootstrap():
    alpha = np.array([[-0.5, 0.3], [0.8, 0.0], [0.0, -0.6]])
    data = synthesize_corpus(SimConfig(n_segments=400, instances_per_segment=5, Q=2, p=2,
                                       true_alpha=alpha, true_beta=np.zeros((2, 2)),
                                       seed=2)).data
    fit = fit_crf(data.X, data.Y, data.adjacency, structure='unary')
    sandwich_se = godambe_covariance(data, fit).se
    boot_se, _ = segment_bootstrap_se(data, structure='unary', n_boot=500, seed=0)
    assert_allclose(sandwich_se, boot_se, rtol=0.15)


@pytest.mark.slow
def test_permutation_calibration():
    rng = np.random.default_rng(0)
    alpha = np.array([[0.0, -0.5], [0.0, 0.0], [0.0, 0.0]])
    p_values = []
    for k in range(200):
        data = synthesize_corpus(SimConfig(n_segments=40, instances_per_segment=5, Q=2, p=2,
                                           true_alpha=alpha, true_beta=np.zeros((2, 2)),
                                           seed=int(rng.integers(2 ** 31)))).data
        p_values.append(clr_permutation_test(data, Comparison.BASELINE_VS_UNARY, B=199,
                                             seed=k).p_perm)
    assert 0.02 <= np.mean(np.array(p_values) < 0.05) <= 0.10
