"""Gaussian signal models and exact conditional statistics.

Nodes carry global labels 1..K everywhere in the public API.  A
``GaussianModel`` holds the joint mean vector and covariance matrix of the K
scalar node measurements; a ``ConditionalState`` holds the exact posterior of
the still-unknown nodes given every observation made so far.

Two conditioning paths are provided and must agree:

* ``condition`` solves the full linear system (Schur complement of the
  observed block) and is the reference implementation,
* ``rank_one_condition`` folds in one observation at a time with an
  O(L^2) covariance downdate, which is what the round loop uses.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy.linalg import cho_solve

from .errors import DegenerateVarianceError, NumericalDegeneracyError

# Below this conditional variance a node is considered already determined.
DEGENERATE_VARIANCE_EPS = 1e-10

FAMILY_SIZE = 5


def _readonly(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=float)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class GaussianModel:
    """Joint Gaussian law of the K node measurements.

    Parameters
    ----------
    mean : (K,) array_like
        Prior mean of each node's measurement.
    cov : (K, K) array_like
        Prior covariance; must be symmetric positive semidefinite.
    """

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self) -> None:
        mean = _readonly(np.atleast_1d(np.asarray(self.mean, dtype=float)))
        cov = _readonly(np.atleast_2d(np.asarray(self.cov, dtype=float)))
        if mean.ndim != 1:
            raise ValueError("mean must be a vector")
        if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
            raise ValueError("cov must be a square matrix")
        if mean.shape[0] != cov.shape[0]:
            raise ValueError(
                f"mean length {mean.shape[0]} does not match cov dimension {cov.shape[0]}"
            )
        scale = max(1.0, float(np.abs(cov).max()))
        if float(np.abs(cov - cov.T).max()) > 1e-12 * scale:
            raise ValueError("cov is not symmetric")
        k = cov.shape[0]
        trace = float(np.trace(cov))
        floor = -1e-10 * max(trace, 0.0) / k
        if float(np.linalg.eigvalsh(cov)[0]) < floor:
            raise ValueError("cov is not positive semidefinite")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def K(self) -> int:
        return self.mean.shape[0]


@dataclass(frozen=True)
class ConditionalState:
    """Posterior of the unknown nodes given the observations made so far.

    ``known_idx`` keeps the order in which nodes were observed;
    ``unknown_idx`` is always the ascending complement.  Arrays are treated
    as immutable by every operation in this package.
    """

    known_idx: tuple[int, ...]
    known_vals: np.ndarray
    unknown_idx: np.ndarray
    cond_mean: np.ndarray
    cond_cov: np.ndarray

    def __post_init__(self) -> None:
        known_vals = np.asarray(self.known_vals, dtype=float)
        unknown_idx = np.asarray(self.unknown_idx, dtype=np.int64)
        cond_mean = np.asarray(self.cond_mean, dtype=float)
        cond_cov = np.asarray(self.cond_cov, dtype=float)
        if known_vals.shape[0] != len(self.known_idx):
            raise ValueError("known_vals length does not match known_idx")
        if cond_mean.shape[0] != unknown_idx.shape[0]:
            raise ValueError("cond_mean length does not match unknown_idx")
        if cond_cov.shape != (unknown_idx.shape[0], unknown_idx.shape[0]):
            raise ValueError("cond_cov shape does not match unknown_idx")
        object.__setattr__(self, "known_vals", known_vals)
        object.__setattr__(self, "unknown_idx", unknown_idx)
        object.__setattr__(self, "cond_mean", cond_mean)
        object.__setattr__(self, "cond_cov", cond_cov)

    @property
    def K(self) -> int:
        return len(self.known_idx) + self.unknown_idx.shape[0]

    @property
    def num_unknown(self) -> int:
        return self.unknown_idx.shape[0]

    def unknown_position(self, node: int) -> int:
        """Position of ``node`` inside the unknown subvector (raises if observed)."""
        pos = int(np.searchsorted(self.unknown_idx, node))
        if pos >= self.unknown_idx.shape[0] or int(self.unknown_idx[pos]) != int(node):
            raise ValueError(f"node {node} is not in the unknown set")
        return pos


def _first_nonpd_order(a: np.ndarray) -> int:
    """Order of the first leading minor that fails a Cholesky factorization."""
    for k in range(1, a.shape[0] + 1):
        try:
            np.linalg.cholesky(a[:k, :k])
        except np.linalg.LinAlgError:
            return k
    return a.shape[0]


def _spd_cholesky(a: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor of ``a``, retrying once with a trace-scaled jitter.

    ``labels`` are the global node labels of the rows, used to name the
    offending node when the matrix is singular beyond the jitter tolerance.
    """
    try:
        return np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        pass
    n = a.shape[0]
    jitter = 1e-10 * max(float(np.trace(a)), 0.0) / n
    try:
        return np.linalg.cholesky(a + jitter * np.eye(n))
    except np.linalg.LinAlgError:
        order = _first_nonpd_order(a + jitter * np.eye(n))
        raise NumericalDegeneracyError(
            "observed-node covariance is singular beyond jitter tolerance "
            f"near node {int(labels[order - 1])}"
        ) from None


def condition(
    model: GaussianModel, idx: Iterable[int], vals: Iterable[float]
) -> ConditionalState:
    """Condition the model on observing nodes ``idx`` at values ``vals``.

    Returns the exact posterior mean and covariance of the complement nodes
    (in ascending label order):

        E[u | z]   = u_bar + R_uz R_z^{-1} (z - z_bar)
        Cov(u | z) = R_u - R_uz R_z^{-1} R_uz^T

    The observed-block system is solved through a Cholesky factorization,
    never an explicit inverse.
    """
    idx_arr = np.asarray(list(idx), dtype=np.int64)
    vals_arr = np.asarray(list(vals), dtype=float)
    k = model.K
    if idx_arr.shape[0] != vals_arr.shape[0]:
        raise ValueError("idx and vals must have the same length")
    if idx_arr.shape[0] == 0:
        return ConditionalState(
            (), np.zeros(0), np.arange(1, k + 1, dtype=np.int64), model.mean, model.cov
        )
    if int(idx_arr.min()) < 1 or int(idx_arr.max()) > k:
        raise ValueError(f"node labels must lie in 1..{k}")
    if np.unique(idx_arr).shape[0] != idx_arr.shape[0]:
        raise ValueError("duplicate node labels in idx")

    zpos = idx_arr - 1
    mask = np.ones(k, dtype=bool)
    mask[zpos] = False
    upos = np.flatnonzero(mask)

    r_z = model.cov[np.ix_(zpos, zpos)]
    r_uz = model.cov[np.ix_(upos, zpos)]
    chol = _spd_cholesky(r_z, labels=idx_arr)
    alpha = cho_solve((chol, True), vals_arr - model.mean[zpos])
    gain = cho_solve((chol, True), r_uz.T)
    cond_mean = model.mean[upos] + r_uz @ alpha
    cond_cov = model.cov[np.ix_(upos, upos)] - r_uz @ gain
    cond_cov = 0.5 * (cond_cov + cond_cov.T)
    return ConditionalState(
        tuple(int(i) for i in idx_arr),
        vals_arr.copy(),
        (upos + 1).astype(np.int64),
        cond_mean,
        cond_cov,
    )


def rank_one_condition(
    state: ConditionalState, node: int, value: float
) -> ConditionalState:
    """Fold the observation ``node = value`` into an existing posterior.

    Uses the rank-one Schur downdate

        mean' = mean_{-l} + r_l (value - mean_l) / nu_l
        cov'  = cov_{-l}  - r_l r_l^T / nu_l

    where l is the node's position in the unknown set, nu_l its conditional
    variance and r_l its covariance column.  Agrees with ``condition`` on the
    union of the observed sets to within accumulation error.

    Raises ``DegenerateVarianceError`` when nu_l is below
    ``DEGENERATE_VARIANCE_EPS``: the node is already determined and the caller
    should use ``mark_known`` instead of dividing by nu_l.
    """
    pos = state.unknown_position(int(node))
    nu = float(state.cond_cov[pos, pos])
    if nu <= DEGENERATE_VARIANCE_EPS:
        raise DegenerateVarianceError(
            f"conditional variance of node {int(node)} is {nu:.3e}; "
            "the value is already determined by the data"
        )
    col = state.cond_cov[:, pos]
    mean_full = state.cond_mean + col * ((float(value) - float(state.cond_mean[pos])) / nu)
    cov_full = state.cond_cov - np.outer(col, col) / nu
    return ConditionalState(
        state.known_idx + (int(node),),
        np.append(state.known_vals, float(value)),
        np.delete(state.unknown_idx, pos),
        np.delete(mean_full, pos),
        np.delete(np.delete(cov_full, pos, axis=0), pos, axis=1),
    )


def mark_known(state: ConditionalState, node: int, value: float) -> ConditionalState:
    """Remove a near-deterministic node from the unknown set.

    No covariance update is performed: with a vanishing conditional variance
    the node carries no new information about the others, so this is
    equivalent to conditioning the node at its conditional mean.
    """
    pos = state.unknown_position(int(node))
    return ConditionalState(
        state.known_idx + (int(node),),
        np.append(state.known_vals, float(value)),
        np.delete(state.unknown_idx, pos),
        np.delete(state.cond_mean, pos),
        np.delete(np.delete(state.cond_cov, pos, axis=0), pos, axis=1),
    )


def build_ar1_model(K: int, rho: float) -> GaussianModel:
    """First-order autoregressive model over the node line.

    mean_k = cos(pi (k - 1) / 5) and cov[k, k'] = rho^|k - k'|.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    if not -1.0 < rho < 1.0:
        raise ValueError("rho must lie in (-1, 1)")
    k = np.arange(1, K + 1)
    mean = np.cos(np.pi * (k - 1) / 5.0)
    lags = np.abs(np.subtract.outer(k, k))
    cov = np.power(float(rho), lags)
    return GaussianModel(mean=mean, cov=cov)


def dct_matrix(K: int) -> np.ndarray:
    """Orthonormal type-II DCT matrix of size K x K.

    Entry (r, c), zero-based: w(r) cos(pi r (2c + 1) / (2K)) with
    w(0) = sqrt(1/K) and w(r) = sqrt(2/K) otherwise, so rows and columns are
    both orthonormal.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    n = np.arange(K)
    mat = np.cos(np.pi * np.outer(n, 2 * n + 1) / (2.0 * K)) * np.sqrt(2.0 / K)
    mat[0, :] /= np.sqrt(2.0)
    return mat


def build_model_family(K: int, J: int = 3, noise: float = 0.1) -> list[GaussianModel]:
    """The five candidate models used throughout the experiments.

    Model 1 is ``build_ar1_model(K, 0.95)``.  Models 2..5 keep sinusoidal or
    zero means and use low-rank covariances built from J consecutive columns
    of the orthonormal DCT basis (columns m-1 .. J+m-2, 1-based, for model m)
    plus a ``noise``-level identity floor, scaled so that every covariance
    has trace K.
    """
    if J < 1:
        raise ValueError("J must be >= 1")
    if noise <= 0.0:
        raise ValueError("noise must be > 0")
    if K < J + FAMILY_SIZE - 1:
        raise ValueError(f"K must be >= {J + FAMILY_SIZE - 1} for a family of {FAMILY_SIZE}")

    models = [build_ar1_model(K, 0.95)]
    k = np.arange(1, K + 1)
    phase = np.pi * (k - 1) / 5.0
    means = [np.sin(phase), -np.cos(phase), -np.sin(phase), np.zeros(K)]
    psi = dct_matrix(K)
    scale = K / (J + noise * K)
    eye = np.eye(K)
    for m, mean in zip(range(2, FAMILY_SIZE + 1), means):
        cols = psi[:, m - 2 : m - 2 + J]
        cov = scale * (cols @ cols.T + noise * eye)
        models.append(GaussianModel(mean=mean, cov=cov))
    return models
