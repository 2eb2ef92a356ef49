"""
Gibbs sampling from the label model, synthetic datasets for estimator checks, and
the generator of the bundled toy corpus.
"""
import os
import itertools
from dataclasses import dataclass, asdict
from typing import List, Optional

import numpy as np
from scipy.special import expit, logsumexp
from astropy.table import Table
from tqdm import tqdm

from . import LABEL_NAMES, DYNAMIC_LEVELS
from .crf import BetaBasis, CrfParams, joint_energy
from .graph import build_adjacency, block_diagonal, save_graph
from .features import DesignMatrix, save_features
from .inference import InferenceData
from .score import NoteEvent, HarmonyEvent, MotifInstance, Movement, Corpus, save_corpus
from .segmentation import Segment, save_segments
from .utils import save_table, save_json

__all__ = ["SimConfig", "SimResult", "gibbs_sample_segment", "gibbs_chain", "random_params",
           "synthesize_corpus", "write_simulation", "exact_joint", "tv_distance",
           "make_toy_corpus"]


@dataclass
class SimConfig:
    """
    Settings of a synthetic dataset.

    ``instances_per_segment`` is an int or an inclusive (low, high) range.
    ``true_alpha`` is (p+1) x Q with the intercepts first; ``true_beta`` is Q x Q.
    """
    n_segments: int
    instances_per_segment: object = 8
    Q: int = 3
    p: int = 3
    true_alpha: Optional[np.ndarray] = None
    true_beta: Optional[np.ndarray] = None
    burn_in: int = 200
    thinning: int = 5
    seed: int = 0
    sigma: float = 1.0
    prune_threshold: float = 1e-5

    def __post_init__(self):
        if self.burn_in < 0:
            raise ValueError('burn_in must be >= 0')
        if self.true_alpha is None or self.true_beta is None:
            params = random_params(self.Q, self.p, seed=self.seed)
            self.true_alpha = params.alpha if self.true_alpha is None else self.true_alpha
            self.true_beta = params.beta if self.true_beta is None else self.true_beta
        self.true_alpha = np.asarray(self.true_alpha, dtype=float)
        self.true_beta = np.asarray(self.true_beta, dtype=float)
        if self.true_alpha.shape != (self.p + 1, self.Q) or self.true_beta.shape != (self.Q, self.Q):
            raise ValueError('true_alpha must be {} and true_beta {}'.format(
                (self.p + 1, self.Q), (self.Q, self.Q)))

    @property
    def params(self):
        return CrfParams(self.true_alpha, self.true_beta)


@dataclass
class SimResult:
    data: InferenceData
    segments: List[Segment]
    graphs: list
    config: SimConfig


#########################################################################
############################ Gibbs Sampler ##############################
#########################################################################

def _sweep(Y, S, U, A, beta, uniforms):
    """ One systematic scan over (i, q) in row-major order. """
    n, Q = Y.shape
    k = 0
    for i in range(n):
        for q in range(Q):
            z = U[i, q] + S[i] @ beta[:, q]
            new = 1.0 if uniforms[k] < expit(z) else 0.0
            k += 1
            delta = new - Y[i, q]
            if delta != 0.0:
                Y[i, q] = new
                S[:, q] += delta * A[:, i]


def gibbs_chain(X_block, adjacency_block, params, burn_in=200, thinning=5, n_samples=1, seed=0):
    """
    Run a systematic-scan Gibbs chain over one segment.

    Every site ``(i, q)`` is resampled from its logistic full conditional. The chain
    starts from independent draws under the unary part of the model.

    Parameters:
        X_block (ndarray): n x (p+1) design rows of the segment.
        adjacency_block (ndarray): n x n adjacency of the segment.
        params (``CrfParams``): model parameters.
        burn_in (int): sweeps discarded before the first sample.
        thinning (int): sweeps between kept samples.
        n_samples (int): samples to keep.
        seed (int or ``numpy.random.SeedSequence``): random seed.

    Returns:
        samples (ndarray): n_samples x n x Q binary array.
    """
    rng = np.random.default_rng(seed)
    A = np.asarray(adjacency_block.todense() if hasattr(adjacency_block, 'todense')
                   else adjacency_block, dtype=float)
    U = np.asarray(X_block, dtype=float) @ params.alpha
    beta = np.asarray(params.beta, dtype=float)
    n, Q = U.shape
    Y = (rng.random((n, Q)) < expit(U)).astype(float)
    S = A @ Y
    samples = np.zeros((n_samples, n, Q), dtype=int)
    for _ in range(burn_in):
        _sweep(Y, S, U, A, beta, rng.random(n * Q))
    for k in range(n_samples):
        if k > 0:
            for _ in range(max(thinning, 1)):
                _sweep(Y, S, U, A, beta, rng.random(n * Q))
        samples[k] = Y
    return samples


def gibbs_sample_segment(X_block, adjacency_block, params, burn_in=200, seed=0):
    """ State of the chain after ``burn_in`` sweeps: n x Q binary array. """
    return gibbs_chain(X_block, adjacency_block, params, burn_in=burn_in, n_samples=1,
                       seed=seed)[0]


def random_params(Q, p, scale=1.0, seed=0):
    """
    Feasible parameters with entries in ``[-scale, scale]``: alpha uniform, beta a random
    point of the symmetric zero-row-sum subspace rescaled to the bound.
    """
    rng = np.random.default_rng(seed)
    alpha = rng.uniform(-scale, scale, size=(p + 1, Q))
    basis = BetaBasis(Q)
    beta = basis.to_matrix(rng.normal(size=basis.dim))
    peak = np.max(np.abs(beta)) if beta.size else 0.0
    if peak > 0:
        beta *= scale * rng.uniform(0.5, 1.0) / peak
    return CrfParams(alpha, beta)


def synthesize_corpus(sim_config, verbose=False, logger=None):
    """
    Draw a synthetic dataset: standard normal features with a bias column,
    Gaussian ordinal graphs per segment, and labels from the Gibbs sampler.

    Segment ``k`` is sampled with its own seed derived from ``(seed, k)``, so the
    output does not depend on the order or parallelism of the segment loop.

    Returns:
        result (``SimResult``)
    """
    cfg = sim_config
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed]))
    if isinstance(cfg.instances_per_segment, (tuple, list)):
        low, high = cfg.instances_per_segment
        sizes = rng.integers(low, high + 1, size=cfg.n_segments)
    else:
        sizes = np.full(cfg.n_segments, int(cfg.instances_per_segment))
    N = int(sizes.sum())
    X = np.hstack([np.ones((N, 1)), rng.standard_normal((N, cfg.p))])

    segments, start = [], 0
    for k, n in enumerate(sizes):
        segments.append(Segment(k, 'sim', float(k), float(k + 1), tuple(range(start, start + n))))
        start += n
    graphs = build_adjacency(segments, sigma=cfg.sigma, prune_threshold=cfg.prune_threshold)

    Y = np.zeros((N, cfg.Q), dtype=int)
    params = cfg.params
    for k, (seg, g) in enumerate(tqdm(list(zip(segments, graphs)), desc='gibbs',
                                      disable=not verbose)):
        rows = list(seg.member_instance_ids)
        if not rows:
            continue
        Y[rows] = gibbs_sample_segment(X[rows], g.weights, params, burn_in=cfg.burn_in,
                                       seed=np.random.SeedSequence([cfg.seed, k]))
    seg_index = np.repeat(np.arange(cfg.n_segments), sizes).astype(int)
    data = InferenceData(X, Y, block_diagonal(graphs) if N else np.zeros((0, 0)), seg_index,
                         ['intercept'] + ['x{}'.format(j) for j in range(1, cfg.p + 1)])
    if logger is not None:
        logger.info('    - simulated {} segments, {} instances, Q={}'.format(
            cfg.n_segments, N, cfg.Q))
    return SimResult(data, segments, graphs, cfg)


def write_simulation(result, out_dir, config=None, input_hash=None):
    """
    Write a synthetic dataset in the pipeline formats: features.csv, design_meta.json,
    labels.csv, graph.json, segments.csv, plus truth.json with the true parameters.
    Every file carries ``config`` and ``input_hash``.
    """
    data, cfg = result.data, result.config
    N = data.X.shape[0]
    columns = data.columns
    feats = Table(rows=[['sim', i, int(data.segment_index[i])] + list(data.X[i, 1:])
                        for i in range(N)] or None,
                  names=['movement_id', 'instance_id', 'segment_id'] + columns[1:],
                  dtype=[str, int, int] + [float] * (len(columns) - 1))
    design = DesignMatrix(data.X, list(columns), np.zeros(cfg.p), np.ones(cfg.p))
    save_features(feats, design, os.path.join(out_dir, 'features.csv'),
                  os.path.join(out_dir, 'design_meta.json'), config=config,
                  input_hash=input_hash)

    names = ['y_' + name for name in LABEL_NAMES[:cfg.Q]]
    labels = Table(rows=[['sim', i, int(data.segment_index[i]), i] + list(data.Y[i])
                         for i in range(N)] or None,
                   names=['movement_id', 'instance_id', 'segment_id', 'anchor_instance_id'] + names,
                   dtype=[str, int, int, int] + [int] * cfg.Q)
    save_table(labels, os.path.join(out_dir, 'labels.csv'), config=config, input_hash=input_hash)
    save_graph(result.graphs, os.path.join(out_dir, 'graph.json'), sigma=cfg.sigma,
               prune_threshold=cfg.prune_threshold, config=config, input_hash=input_hash)
    save_segments(result.segments, os.path.join(out_dir, 'segments.csv'), config=config,
                  input_hash=input_hash)
    truth = {k: v for k, v in asdict(cfg).items() if k not in ('true_alpha', 'true_beta')}
    truth.update(CrfParams(cfg.true_alpha, cfg.true_beta).to_dict(columns, LABEL_NAMES[:cfg.Q]))
    save_json(truth, os.path.join(out_dir, 'truth.json'), config=config, input_hash=input_hash)


#########################################################################
############################ Exact Checks ###############################
#########################################################################

def exact_joint(X, adjacency, params):
    """
    Enumerate every label configuration of a small graph.

    Returns:
        states (ndarray): 2^(N Q) x N x Q binary configurations.
        probs (ndarray): their probabilities under the joint model.
    """
    X = np.asarray(X, dtype=float)
    A = np.asarray(adjacency, dtype=float)
    N, Q = X.shape[0], params.alpha.shape[1]
    states = np.array(list(itertools.product([0, 1], repeat=N * Q))).reshape(-1, N, Q)
    energy = np.array([joint_energy(X, s, A, params) for s in states])
    return states, np.exp(energy - logsumexp(energy))


def tv_distance(samples, states, probs):
    """ Total-variation distance between the empirical law of ``samples`` and ``probs``. """
    samples = np.asarray(samples).reshape(len(samples), -1)
    flat = np.asarray(states).reshape(len(states), -1)
    weights = 2 ** np.arange(flat.shape[1])[::-1]
    codes = samples @ weights
    counts = np.bincount(codes, minlength=len(flat)) / len(samples)
    return 0.5 * float(np.sum(np.abs(counts[flat @ weights] - probs)))


#########################################################################
############################## Toy Corpus ###############################
#########################################################################

# Prototype motifs: (pitch offsets from the first note, onsets, durations) in one 4/4 bar
_PROTOTYPES = [
    ([0, 4, 7, 5], [0.0, 1.0, 2.0, 3.0], [1.0, 1.0, 1.0, 1.0]),
    ([0, -2, -5, 2], [0.0, 2.0, 3.0, 3.5], [2.0, 1.0, 0.5, 0.5]),
    ([0, 7, 3], [0.0, 1.0, 2.5], [1.0, 1.0, 1.5]),
    ([0, 2, 4, 9, 7], [0.0, 0.5, 1.0, 2.0, 3.0], [0.5, 0.5, 1.0, 1.0, 1.0]),
]
_VARIANTS = ['repeat', 'transpose', 'contour', 'invert', 'augment', 'insert']
_KEYS = ['C', 'G', 'F', 'D', 'Bb', 'A', 'e', 'g']
# Function zones of the eight bars of a phrase; the only D -> T is at the last bar
_PHRASE_ZONES = ['T', 'T', 'PD', 'PD', 'T', 'PD', 'D', 'T']


def _variant(proto, kind, rng):
    offsets, onsets, durations = (list(v) for v in proto)
    if kind == 'transpose':
        shift = int(rng.choice([-5, -3, 2, 4, 7]))
        offsets = [o + shift for o in offsets]
    elif kind == 'contour':
        steps = np.diff(offsets)
        steps = [s + int(np.sign(s)) * int(rng.integers(1, 3)) for s in steps]
        offsets = list(np.concatenate([[0], np.cumsum(steps)]).astype(int))
    elif kind == 'invert':
        offsets = [-o for o in offsets]
    elif kind == 'augment':
        onsets = [o * 0.5 for o in onsets]
        durations = [d * 0.5 for d in durations]
    elif kind == 'insert':
        extra = offsets[0] + (1 if offsets[1] != offsets[0] + 1 else -1)
        half = durations[0] / 2
        offsets = [offsets[0], extra] + offsets[1:]
        onsets = [onsets[0], onsets[0] + half] + onsets[1:]
        durations = [half, half] + durations[1:]
    return offsets, onsets, durations


def _toy_movement(movement_id, period, rng, n_phrases=8):
    tonic = _KEYS[int(rng.integers(len(_KEYS)))]
    dominant = {'C': 'G', 'G': 'D', 'F': 'C', 'D': 'A', 'Bb': 'F', 'A': 'E',
                'e': 'b', 'g': 'd'}[tonic]
    notes, harmony, motifs = [], [], []
    last_pitch = [None]

    def add_note(onset, duration, pitch):
        measure = int(onset // 4) + 1
        notes.append(NoteEvent(movement_id, len(notes) + 1, float(onset), float(duration),
                               int(pitch), measure, float(onset - 4 * (measure - 1) + 1),
                               float(rng.choice(list(DYNAMIC_LEVELS.values()))),
                               int(rng.poisson(0.6))))
        last_pitch[0] = pitch
        return len(notes)

    def filler(onset, duration):
        pitch = int(rng.integers(55, 76))
        while pitch == last_pitch[0]:
            pitch += 1
        add_note(onset, duration, pitch)

    for phrase in range(n_phrases):
        bar0 = 8 * phrase
        modulate = rng.random() < 0.5
        for bar in range(8):
            onset = 4.0 * (bar0 + bar)
            # a second chord on beat 3 of some bars; modulating phrases turn to the dominant there in bar 4
            halves = [0.0, 2.0] if rng.random() < 0.5 or (modulate and bar == 3) else [0.0]
            for half in halves:
                in_dominant = modulate and (bar in (4, 5) or (bar == 3 and half > 0))
                harmony.append(HarmonyEvent(movement_id, onset + half,
                                            dominant if in_dominant else tonic,
                                            _PHRASE_ZONES[bar], bool(rng.random() < 0.2),
                                            float(np.round(rng.uniform(0.0, 3.0), 1))))
        classes = rng.choice(len(_PROTOTYPES), size=5, replace=True)
        motif_bars = sorted(rng.choice(7, size=5, replace=False))
        k = 0
        for bar in range(7):
            onset = 4.0 * (bar0 + bar)
            if bar not in motif_bars:
                filler(onset, 2.0)
                filler(onset + 2.0, 2.0)
                continue
            class_id = int(classes[k])
            k += 1
            kind = _VARIANTS[int(rng.integers(len(_VARIANTS)))]
            offsets, onsets, durations = _variant(_PROTOTYPES[class_id], kind, rng)
            base = int(rng.integers(60, 68))
            while base + offsets[0] == last_pitch[0]:
                base += 1
            ids = [add_note(onset + o, d, base + p) for p, o, d in zip(offsets, onsets, durations)]
            motifs.append(MotifInstance(movement_id, class_id, len(motifs) + 1, tuple(ids)))
            end = onset + onsets[-1] + durations[-1]
            if end < onset + 4.0 - 1e-9:
                filler(end, onset + 4.0 - end)
        # cadence bar: two beats of sound, two beats of rest
        filler(4.0 * (bar0 + 7), 2.0)
    return Movement(movement_id, notes, harmony, motifs, period=period)


def make_toy_corpus(out_dir, seed=0, n_movements=4, n_phrases=8):
    """
    Write a small, deterministic, well-formed corpus (notes.csv, harmony.csv, motifs.csv,
    movements.csv) to ``out_dir``. Movements alternate between periods ``early`` and
    ``middle``; every phrase is eight bars long and ends with two beats of silence.

    Returns:
        paths (dict): file kind -> path.
    """
    rng = np.random.default_rng(seed)
    movements = [_toy_movement('toy{:02d}'.format(m + 1), 'early' if m % 2 == 0 else 'middle',
                               rng, n_phrases=n_phrases)
                 for m in range(n_movements)]
    return save_corpus(Corpus(movements), out_dir)
