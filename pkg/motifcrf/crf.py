"""
Multilabel conditional random field over motif instances, fitted by maximum
pseudo-likelihood.

For instance ``i`` and transformation ``q`` the full conditional is logistic,

    P(Y_iq = 1 | rest) = expit(z_iq),   z = X @ alpha + S @ beta,   S = A @ Y,

and the joint energy uses ``1/2 * sum_{i != j}`` over instance pairs, so that the
conditional above is exact. ``beta`` is symmetric with zero row sums; it is
parameterized by its coordinates in an orthonormal basis of that subspace.
"""
from dataclasses import dataclass, field
from typing import List

import numpy as np
from scipy.linalg import orth
from scipy.optimize import minimize
from scipy.special import expit

from . import LABEL_NAMES
from .errors import DimensionMismatch, NonFiniteValue, EmptyData

__all__ = ["STRUCTURES", "BetaBasis", "CrfParams", "ParamLayout", "FitResult", "CrfProblem",
           "neighbor_config", "logistic_conditional", "pl_objective_and_gradient",
           "pl_hessian", "instance_scores", "joint_energy", "fit_crf", "fit_problem"]

# Model structures: (all alpha rows free, beta free)
STRUCTURES = {'baseline': (False, False),
              'unary': (True, False),
              'pairwise': (False, True),
              'full': (True, True)}


class BetaBasis(object):
    """
    Orthonormal (Frobenius) basis of the symmetric Q x Q matrices whose rows sum to zero.

    The basis is obtained by orthonormalizing the elementary matrices
    ``E_qr = e_q e_r' + e_r e_q' - e_q e_q' - e_r e_r'`` for ``q < r``; its dimension
    is ``Q(Q-1)/2``.

    Parameters:
        Q (int): number of transformation labels.
    """
    def __init__(self, Q):
        self.Q = Q
        gens = []
        for q in range(Q):
            for r in range(q + 1, Q):
                E = np.zeros((Q, Q))
                E[q, r] = E[r, q] = 1.0
                E[q, q] = E[r, r] = -1.0
                gens.append(E.ravel())
        if gens:
            vecs = orth(np.array(gens).T).T
            elems = vecs.reshape(-1, Q, Q)
            self.elements = 0.5 * (elems + elems.transpose(0, 2, 1))
        else:
            self.elements = np.zeros((0, Q, Q))

    def __len__(self):
        return self.elements.shape[0]

    @property
    def dim(self):
        return len(self)

    def to_matrix(self, coords):
        """ beta = sum_k coords[k] * B_k """
        coords = np.asarray(coords, dtype=float)
        if self.dim == 0:
            return np.zeros((self.Q, self.Q))
        beta = np.tensordot(coords, self.elements, axes=1)
        return 0.5 * (beta + beta.T)

    def coordinates(self, beta):
        """ Coordinates of a feasible ``beta`` (projection for any matrix). """
        return np.tensordot(self.elements, np.asarray(beta, dtype=float), axes=([1, 2], [0, 1]))

    def transform(self):
        """ Q^2 x dim matrix mapping coordinates to ``beta.ravel()``. """
        return self.elements.reshape(self.dim, -1).T


@dataclass
class CrfParams:
    """
    Model parameters.

    Parameters:
        alpha (ndarray): (p+1) x Q unary coefficients, first row the intercepts.
        beta (ndarray): Q x Q pairwise coefficients.
    """
    alpha: np.ndarray
    beta: np.ndarray

    def is_feasible(self, tol=1e-10):
        """ Symmetric with zero row sums. """
        return (np.allclose(self.beta, self.beta.T, atol=1e-12, rtol=0)
                and np.all(np.abs(self.beta.sum(axis=1)) <= tol))

    def to_dict(self, columns=None, labels=None):
        columns = columns or ['x{}'.format(k) for k in range(self.alpha.shape[0])]
        labels = labels or LABEL_NAMES[:self.alpha.shape[1]]
        return {'alpha': {c: dict(zip(labels, row)) for c, row in zip(columns, self.alpha)},
                'beta': self.beta,
                'columns': list(columns),
                'labels': list(labels)}

    @classmethod
    def from_dict(cls, d):
        columns, labels = d['columns'], d['labels']
        alpha = np.array([[d['alpha'][c][q] for q in labels] for c in columns], dtype=float)
        return cls(alpha, np.array(d['beta'], dtype=float))


class ParamLayout(object):
    """
    Map between the free parameter vector ``theta`` and ``CrfParams``.

    ``theta`` holds the free alpha rows (row-major, Q entries each) followed by the
    beta basis coordinates.

    Parameters:
        n_columns (int): columns of X, bias included.
        Q (int): number of labels.
        structure (str): one of ``STRUCTURES``.
    """
    def __init__(self, n_columns, Q, structure='full'):
        if structure not in STRUCTURES:
            raise ValueError('Unknown model structure "{}"'.format(structure))
        all_alpha, with_beta = STRUCTURES[structure]
        self.structure = structure
        self.n_columns = n_columns
        self.Q = Q
        self.alpha_rows = list(range(n_columns)) if all_alpha else [0]
        self.basis = BetaBasis(Q)
        self.with_beta = with_beta
        self.n_alpha = len(self.alpha_rows) * Q
        self.n_beta = self.basis.dim if with_beta else 0

    @property
    def size(self):
        return self.n_alpha + self.n_beta

    def unpack(self, theta):
        theta = np.asarray(theta, dtype=float)
        alpha = np.zeros((self.n_columns, self.Q))
        alpha[self.alpha_rows] = theta[:self.n_alpha].reshape(len(self.alpha_rows), self.Q)
        if self.with_beta:
            beta = self.basis.to_matrix(theta[self.n_alpha:])
        else:
            beta = np.zeros((self.Q, self.Q))
        return CrfParams(alpha, beta)

    def pack(self, params):
        theta = [np.asarray(params.alpha)[self.alpha_rows].ravel()]
        if self.with_beta:
            theta.append(self.basis.coordinates(params.beta))
        return np.concatenate(theta)

    def names(self, columns=None, labels=None):
        """ Readable names of the entries of ``theta``. """
        columns = columns or ['x{}'.format(k) for k in range(self.n_columns)]
        labels = labels or LABEL_NAMES[:self.Q]
        out = ['alpha[{},{}]'.format(columns[r], q) for r in self.alpha_rows for q in labels]
        out += ['beta_coord[{}]'.format(k) for k in range(self.n_beta)]
        return out

    def covariance_transform(self):
        """
        Matrix mapping ``theta`` to (free alpha entries, ``beta.ravel()``), used to
        carry a covariance from basis coordinates to beta entries.
        """
        T = np.zeros((self.n_alpha + self.Q * self.Q * self.with_beta, self.size))
        T[:self.n_alpha, :self.n_alpha] = np.eye(self.n_alpha)
        if self.with_beta:
            T[self.n_alpha:, self.n_alpha:] = self.basis.transform()
        return T


@dataclass
class FitResult:
    """
    Outcome of ``fit_crf``.

    ``objective`` is the penalized pseudo-log-likelihood, ``loglik`` the
    unpenalized one, both at the returned iterate.
    """
    params: CrfParams
    theta: np.ndarray
    layout: ParamLayout
    objective: float
    loglik: float
    converged: bool
    iterations: int
    grad_norm: float
    trace: List[float] = field(default_factory=list)

    @property
    def structure(self):
        return self.layout.structure


#########################################################################
######################## Pseudo-likelihood ##############################
#########################################################################

def neighbor_config(adjacency, Y):
    """
    Graph-weighted neighbor label sums ``S = A @ Y``.

    Parameters:
        adjacency (sparse matrix or ndarray): N x N.
        Y (ndarray): N x Q labels.

    Returns:
        S (ndarray): N x Q.
    """
    Y = np.asarray(Y, dtype=float)
    if Y.ndim != 2 or adjacency.shape != (Y.shape[0], Y.shape[0]):
        raise DimensionMismatch('Adjacency {} does not match labels {}'.format(
            adjacency.shape, Y.shape))
    return np.asarray(adjacency @ Y)


def logistic_conditional(z):
    """ Logistic function, overflow-safe. """
    return expit(z)


def _log1pexp(z):
    return np.logaddexp(0.0, z)


class CrfProblem(object):
    """
    Pseudo-likelihood of one dataset under one model structure.

    Parameters:
        X (ndarray): N x (p+1) design matrix, bias first.
        Y (ndarray): N x Q binary labels.
        adjacency (sparse matrix or ndarray): N x N block-diagonal adjacency.
        structure (str): one of ``STRUCTURES``.
        lambda_alpha, lambda_beta (float): L2 penalties.
        neighbors (ndarray): optional N x Q override of ``S``, held fixed.
    """
    def __init__(self, X, Y, adjacency, structure='full', lambda_alpha=1e-3, lambda_beta=1e-3,
                 neighbors=None):
        X = np.asarray(X, dtype=float)
        Y = np.asarray(Y, dtype=float)
        if X.ndim != 2 or Y.ndim != 2 or X.shape[0] != Y.shape[0]:
            raise DimensionMismatch('Design {} does not match labels {}'.format(X.shape, Y.shape))
        if X.shape[0] == 0:
            raise EmptyData('Cannot fit a model to zero instances')
        self.X, self.Y = X, Y
        self.adjacency = adjacency
        if neighbors is None:
            self.S = neighbor_config(adjacency, Y)
        else:
            self.S = np.asarray(neighbors, dtype=float)
            if self.S.shape != Y.shape:
                raise DimensionMismatch('Neighbor matrix {} does not match labels {}'.format(
                    self.S.shape, Y.shape))
        self.layout = ParamLayout(X.shape[1], Y.shape[1], structure)
        self.lambda_alpha = lambda_alpha
        self.lambda_beta = lambda_beta
        # S @ B_k for every basis element: N x K x Q
        if self.layout.with_beta:
            self._SB = np.einsum('nr,krq->nkq', self.S, self.layout.basis.elements)
        else:
            self._SB = np.zeros((X.shape[0], 0, Y.shape[1]))

    @property
    def N(self):
        return self.X.shape[0]

    @property
    def Q(self):
        return self.Y.shape[1]

    def linear_predictor(self, theta):
        params = self.layout.unpack(theta)
        return self.X @ params.alpha + self.S @ params.beta

    def loglik(self, theta):
        """ Unpenalized pseudo-log-likelihood. """
        z = self.linear_predictor(theta)
        value = float(np.sum(self.Y * z - _log1pexp(z)))
        if not np.isfinite(value):
            raise NonFiniteValue('Pseudo-log-likelihood is not finite')
        return value

    def penalty(self, theta):
        theta = np.asarray(theta)
        n_a = self.layout.n_alpha
        return (self.lambda_alpha * float(np.sum(theta[:n_a] ** 2))
                + self.lambda_beta * float(np.sum(theta[n_a:] ** 2)))

    def _data_gradient(self, theta):
        z = self.linear_predictor(theta)
        R = self.Y - expit(z)
        g_alpha = (self.X.T @ R)[self.layout.alpha_rows].ravel()
        g_beta = np.einsum('nkq,nq->k', self._SB, R)
        return z, np.concatenate([g_alpha, g_beta])

    def objective_and_gradient(self, theta):
        """ Penalized pseudo-log-likelihood and its gradient in ``theta`` coordinates. """
        theta = np.asarray(theta, dtype=float)
        z, grad = self._data_gradient(theta)
        value = float(np.sum(self.Y * z - _log1pexp(z))) - self.penalty(theta)
        if not (np.isfinite(value) and np.all(np.isfinite(grad))):
            raise NonFiniteValue('Pseudo-likelihood or gradient is not finite')
        n_a = self.layout.n_alpha
        grad[:n_a] -= 2 * self.lambda_alpha * theta[:n_a]
        grad[n_a:] -= 2 * self.lambda_beta * theta[n_a:]
        return value, grad

    def _jacobians(self):
        """ d z[:, q] / d theta for every q: list of N x d matrices. """
        layout = self.layout
        rows = layout.alpha_rows
        Zs = []
        for q in range(self.Q):
            Zq = np.zeros((self.N, layout.size))
            for k, r in enumerate(rows):
                Zq[:, k * self.Q + q] = self.X[:, r]
            Zq[:, layout.n_alpha:] = self._SB[:, :, q]
            Zs.append(Zq)
        return Zs

    def hessian(self, theta, penalized=False):
        """ Analytic Hessian of the pseudo-log-likelihood. """
        z = self.linear_predictor(theta)
        w = expit(z) * expit(-z)
        H = np.zeros((self.layout.size, self.layout.size))
        for q, Zq in enumerate(self._jacobians()):
            H -= Zq.T @ (w[:, q:q + 1] * Zq)
        if penalized:
            n_a = self.layout.n_alpha
            H[np.arange(n_a), np.arange(n_a)] -= 2 * self.lambda_alpha
            idx = np.arange(n_a, self.layout.size)
            H[idx, idx] -= 2 * self.lambda_beta
        return 0.5 * (H + H.T)

    def instance_scores(self, theta):
        """ Per-instance contributions to the unpenalized score: N x d. """
        z = self.linear_predictor(theta)
        R = self.Y - expit(z)
        scores = np.zeros((self.N, self.layout.size))
        for q, Zq in enumerate(self._jacobians()):
            scores += R[:, q:q + 1] * Zq
        return scores


def pl_objective_and_gradient(X, Y, adjacency, params, lambda_alpha=1e-3, lambda_beta=1e-3,
                              structure='full', neighbors=None):
    """
    Regularized pseudo-log-likelihood and its gradient.

    Parameters:
        X, Y, adjacency: data, see ``CrfProblem``.
        params (``CrfParams``): a feasible parameter set.

    Returns:
        objective (float), gradient (ndarray): gradient over (free alpha, beta coordinates).
    """
    problem = CrfProblem(X, Y, adjacency, structure=structure, lambda_alpha=lambda_alpha,
                         lambda_beta=lambda_beta, neighbors=neighbors)
    return problem.objective_and_gradient(problem.layout.pack(params))


def pl_hessian(X, Y, adjacency, params, structure='full', neighbors=None):
    """ Hessian of the unpenalized pseudo-log-likelihood in ``theta`` coordinates. """
    problem = CrfProblem(X, Y, adjacency, structure=structure, neighbors=neighbors)
    return problem.hessian(problem.layout.pack(params))


def instance_scores(X, Y, adjacency, params, structure='full', neighbors=None):
    """ Per-instance score contributions, N x d. """
    problem = CrfProblem(X, Y, adjacency, structure=structure, neighbors=neighbors)
    return problem.instance_scores(problem.layout.pack(params))


def joint_energy(X, Y, adjacency, params):
    """
    Unnormalized log-probability of a label configuration:
    ``sum(Y * X alpha) + 1/2 sum_{i != j} A_ij Y_i beta Y_j'``.
    """
    Y = np.asarray(Y, dtype=float)
    S = neighbor_config(adjacency, Y)
    unary = float(np.sum(Y * (np.asarray(X) @ params.alpha)))
    pairwise = 0.5 * float(np.sum((Y @ params.beta) * S))
    return unary + pairwise


#########################################################################
############################### Fitting #################################
#########################################################################

def fit_crf(X, Y, adjacency, structure='full', lambda_alpha=1e-3, lambda_beta=1e-3,
            lbfgs_memory=10, max_iter=500, gtol=1e-6, neighbors=None, theta0=None,
            logger=None):
    """
    Maximize the regularized pseudo-log-likelihood with L-BFGS.

    Parameters:
        X (ndarray): N x (p+1) standardized design matrix with bias column.
        Y (ndarray): N x Q binary labels.
        adjacency (sparse matrix or ndarray): block-diagonal adjacency.
        structure (str): ``'baseline'``, ``'unary'``, ``'pairwise'`` or ``'full'``.
        lambda_alpha, lambda_beta (float): L2 penalties.
        lbfgs_memory (int): number of stored correction pairs.
        max_iter (int): iteration cap.
        gtol (float): convergence threshold on the gradient infinity-norm.
        neighbors (ndarray): fixed ``S`` override.
        theta0 (ndarray): starting point. Default is zero.
        logger (``logging.logger`` object): logger for this task.

    Returns:
        result (``FitResult``): ``converged`` is False when the iteration cap was reached
            before the gradient criterion; the last iterate is returned.
    """
    problem = CrfProblem(X, Y, adjacency, structure=structure, lambda_alpha=lambda_alpha,
                         lambda_beta=lambda_beta, neighbors=neighbors)
    return fit_problem(problem, lbfgs_memory=lbfgs_memory, max_iter=max_iter, gtol=gtol,
                       theta0=theta0, logger=logger)


def fit_problem(problem, lbfgs_memory=10, max_iter=500, gtol=1e-6, theta0=None, logger=None):
    """ ``fit_crf`` on an already assembled ``CrfProblem``. """
    layout = problem.layout
    x0 = np.zeros(layout.size) if theta0 is None else np.array(theta0, dtype=float)
    trace = []

    def _negative(theta):
        value, grad = problem.objective_and_gradient(theta)
        return -value, -grad

    def _record(theta):
        trace.append(float(problem.objective_and_gradient(theta)[0]))

    options = {'maxcor': lbfgs_memory, 'maxiter': max_iter, 'gtol': gtol,
               'ftol': np.finfo(float).eps}
    res = minimize(_negative, x0, jac=True, method='L-BFGS-B', callback=_record,
                   options=options)
    theta = res.x
    value, grad = problem.objective_and_gradient(theta)
    grad_norm = float(np.max(np.abs(grad))) if grad.size else 0.0
    converged = grad_norm < gtol
    result = FitResult(layout.unpack(theta), theta, layout, value, problem.loglik(theta),
                       converged, int(res.nit), grad_norm, trace)
    if logger is not None:
        logger.info('    - {} model: objective {:.6f}, {} iterations, |grad| {:.2e}'.format(
            layout.structure, value, result.iterations, grad_norm))
        if not converged:
            logger.warning('    - {} model did not converge ({})'.format(layout.structure, res.message))
    return result
