"""
Interaction graph over motif instances: Gaussian ordinal-proximity weights inside
each segment, no edges across segments.
"""
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy import sparse

from .errors import MalformedRow
from .utils import save_json, read_json

__all__ = ["SegmentGraph", "gaussian_weights", "normalize_symmetric", "build_adjacency",
           "block_diagonal", "segment_index", "save_graph", "load_graph"]


@dataclass
class SegmentGraph:
    """
    Adjacency block of one segment.

    Parameters:
        segment_id (int): segment of the block.
        instance_ids (tuple): member instances, in onset order (rows of ``weights``).
        weights (ndarray): symmetric, nonnegative, zero diagonal.
    """
    segment_id: int
    instance_ids: Tuple[int, ...]
    weights: np.ndarray

    @property
    def size(self):
        return len(self.instance_ids)

    def triples(self):
        """ Nonzero (i, j, weight) entries, row-major. """
        rows, cols = np.nonzero(self.weights)
        return [(int(i), int(j), float(self.weights[i, j])) for i, j in zip(rows, cols)]


def gaussian_weights(n, sigma=1.0, prune_threshold=1e-5):
    """
    Raw proximity weights ``exp(-(i-j)^2 / sigma^2)`` between ordinal positions,
    with zero diagonal and entries below ``prune_threshold`` set to zero.
    """
    pos = np.arange(n, dtype=float)
    W = np.exp(-np.subtract.outer(pos, pos) ** 2 / sigma ** 2)
    np.fill_diagonal(W, 0.0)
    W[W < prune_threshold] = 0.0
    return W


def normalize_symmetric(W):
    """ ``D^{-1/2} W D^{-1/2}`` with D the row sums; zero rows stay zero. """
    deg = W.sum(axis=1)
    inv_sqrt = np.zeros_like(deg)
    nz = deg > 0
    inv_sqrt[nz] = 1.0 / np.sqrt(deg[nz])
    A = inv_sqrt[:, None] * W * inv_sqrt[None, :]
    # exact symmetry
    return 0.5 * (A + A.T)


def build_adjacency(segments, sigma=1.0, prune_threshold=1e-5, normalize=True, logger=None):
    """
    Build the adjacency block of every segment.

    Parameters:
        segments (list of ``Segment``): members ordered by onset.
        sigma (float): Gaussian scale, in ordinal positions.
        prune_threshold (float): raw weights below this are zeroed.
        normalize (bool): apply symmetric degree normalization after pruning.
        logger (``logging.logger`` object): logger for this task.

    Returns:
        graphs (list of ``SegmentGraph``): one per segment, same order.
    """
    graphs = []
    for seg in segments:
        W = gaussian_weights(len(seg.member_instance_ids), sigma, prune_threshold)
        if normalize:
            W = normalize_symmetric(W)
        graphs.append(SegmentGraph(seg.segment_id, tuple(seg.member_instance_ids), W))
    if logger is not None:
        n_edges = sum(np.count_nonzero(g.weights) for g in graphs) // 2
        logger.info('    - {} segment graphs, {} edges'.format(len(graphs), n_edges))
    return graphs


def block_diagonal(graphs):
    """ Global adjacency over all instances as a ``scipy.sparse`` CSR matrix. """
    blocks = [g.weights for g in graphs if g.size > 0]
    if not blocks:
        return sparse.csr_matrix((0, 0))
    return sparse.block_diag(blocks, format='csr')


def segment_index(graphs):
    """ Segment id of every row of the global adjacency. """
    return np.concatenate([np.full(g.size, g.segment_id, dtype=int) for g in graphs] or
                          [np.zeros(0, dtype=int)])


def save_graph(graphs, path, sigma=None, prune_threshold=None, config=None, input_hash=None):
    """ Write ``graph.json``: per segment, instance order and nonzero triples. """
    payload = {'segments': [{'segment_id': g.segment_id,
                             'instance_ids': list(g.instance_ids),
                             'edges': g.triples()} for g in graphs]}
    if sigma is not None:
        payload['sigma'] = sigma
    if prune_threshold is not None:
        payload['prune_threshold'] = prune_threshold
    return save_json(payload, path, config=config, input_hash=input_hash)


def load_graph(path, stage='graph'):
    """ Read ``graph.json`` back into ``SegmentGraph`` blocks. """
    payload = read_json(path, stage=stage)
    graphs = []
    for entry in payload.get('segments', []):
        n = len(entry['instance_ids'])
        W = np.zeros((n, n))
        for i, j, w in entry['edges']:
            if not (0 <= i < n and 0 <= j < n):
                raise MalformedRow(path, 0, 'edge ({}, {}) outside segment {}'.format(
                    i, j, entry['segment_id']))
            W[i, j] = w
        graphs.append(SegmentGraph(int(entry['segment_id']), tuple(entry['instance_ids']), W))
    return graphs
