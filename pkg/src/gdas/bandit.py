"""Softmax multi-armed bandit over candidate signal models.

Each candidate model is an arm.  After a round that delivered measurements,
the arm that was played pays the normalized prediction error of those
measurements under its own model; the running sample means feed a softmax
(temperature tau) that picks the next arm.  All arms share the observation
pool: every model conditions on all data gathered so far, whichever arm
gathered it.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

from .errors import NumericalDegeneracyError
from .models import ConditionalState, GaussianModel, condition

# A normalization below this means the model declares the delivered nodes
# (conditionally) deterministic and the cost ratio is meaningless.
DEGENERATE_COST_EPS = 1e-12


@dataclass(frozen=True)
class BanditState:
    """Per-arm cost accumulators plus the selection history.

    ``true_model`` is simulation ground truth, never read by selection.
    """

    arms: int
    cost_sum: np.ndarray
    count: np.ndarray
    tau: float
    history: tuple[int, ...] = ()
    true_model: int | None = None

    def __post_init__(self) -> None:
        cost_sum = np.asarray(self.cost_sum, dtype=float)
        count = np.asarray(self.count, dtype=np.int64)
        if cost_sum.shape != (self.arms,) or count.shape != (self.arms,):
            raise ValueError("cost_sum and count must have one entry per arm")
        object.__setattr__(self, "cost_sum", cost_sum)
        object.__setattr__(self, "count", count)

    def sample_means(self) -> np.ndarray:
        """Running mean cost per arm (nan where an arm has no samples yet)."""
        out = np.full(self.arms, np.nan)
        seen = self.count > 0
        out[seen] = self.cost_sum[seen] / self.count[seen]
        return out


def new_bandit_state(arms: int, tau: float, true_model: int | None = None) -> BanditState:
    if arms < 2:
        raise ValueError("arms must be >= 2")
    if tau <= 0.0:
        raise ValueError("tau must be > 0")
    return BanditState(
        arms=int(arms),
        cost_sum=np.zeros(arms),
        count=np.zeros(arms, dtype=np.int64),
        tau=float(tau),
        history=(),
        true_model=true_model,
    )


def prediction_error_terms(
    cond: ConditionalState,
    delivered_idx: Sequence[int],
    delivered_vals: Sequence[float],
) -> tuple[float, float]:
    """(squared prediction error, its model expectation) for delivered nodes.

    The expectation term is the trace of the conditional covariance
    restricted to the delivered nodes, exact for a Gaussian model.
    """
    idx = np.asarray(list(delivered_idx), dtype=np.int64)
    vals = np.asarray(list(delivered_vals), dtype=float)
    if idx.shape[0] == 0:
        raise ValueError("delivered_idx must contain at least one node")
    if idx.shape[0] != vals.shape[0]:
        raise ValueError("delivered_idx and delivered_vals must have the same length")
    pos = np.array([cond.unknown_position(int(n)) for n in idx], dtype=np.int64)
    mu = cond.cond_mean[pos]
    sub = cond.cond_cov[np.ix_(pos, pos)]
    return float(np.sum((vals - mu) ** 2)), float(np.trace(sub))


def round_cost_from_state(
    cond: ConditionalState,
    delivered_idx: Sequence[int],
    delivered_vals: Sequence[float],
) -> float:
    sqerr, expected = prediction_error_terms(cond, delivered_idx, delivered_vals)
    if expected < DEGENERATE_COST_EPS:
        raise NumericalDegeneracyError(
            "model assigns (near-)zero conditional variance to the delivered nodes"
        )
    return sqerr / expected


def round_cost(
    model: GaussianModel,
    known_idx: Iterable[int],
    known_vals: Iterable[float],
    delivered_idx: Sequence[int],
    delivered_vals: Sequence[float],
) -> float:
    """Normalized prediction error of this round's deliveries under ``model``.

    Y = ||x_D - E[x_D | z]||^2 / Tr(Cov(x_D | z)), both evaluated under the
    candidate model.  Under the data-generating model E[Y] = 1; a mismatched
    model inflates it.
    """
    cond = condition(model, known_idx, known_vals)
    return round_cost_from_state(cond, delivered_idx, delivered_vals)


def softmax_probs(state: BanditState) -> np.ndarray:
    """Arm-selection probabilities, exp(-mean_cost / tau) renormalized.

    Computed with a min-shift so large costs cannot underflow everything,
    and valid only once every arm has at least one sample.
    """
    if np.any(state.count < 1):
        raise ValueError("softmax_probs needs at least one cost sample per arm")
    psi = state.cost_sum / state.count
    weights = np.exp(-(psi - psi.min()) / state.tau)
    return weights / weights.sum()


def select_model(state: BanditState, t: int, rng: np.random.Generator) -> int:
    """Arm to play at round ``t`` (1-based model label).

    Rounds 0..arms-1 sweep the arms in order.  Afterwards, any arm still
    without a cost sample (its initialization round delivered nothing) is
    forced first; otherwise the softmax distribution is sampled.
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    if t < state.arms:
        return t + 1
    unseen = np.flatnonzero(state.count == 0)
    if unseen.shape[0] > 0:
        return int(unseen[0]) + 1
    probs = softmax_probs(state)
    return int(rng.choice(state.arms, p=probs)) + 1


def record_selection(state: BanditState, m: int) -> BanditState:
    """Append the played arm to the history (costs untouched)."""
    if not 1 <= m <= state.arms:
        raise ValueError(f"model label must lie in 1..{state.arms}")
    return replace(state, history=state.history + (int(m),))


def update(state: BanditState, m: int, cost: float) -> BanditState:
    """Add one cost sample to arm ``m``; all other arms are untouched."""
    if not 1 <= m <= state.arms:
        raise ValueError(f"model label must lie in 1..{state.arms}")
    cost = float(cost)
    if not cost >= 0.0:
        raise ValueError("cost must be >= 0")
    cost_sum = state.cost_sum.copy()
    count = state.count.copy()
    cost_sum[m - 1] += cost
    count[m - 1] += 1
    return replace(state, cost_sum=cost_sum, count=count)
