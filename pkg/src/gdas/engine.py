"""Round-loop state and greedy minimum-MSE node selection.

Each round the base station scores every unknown node by the total MSE that
would remain over the *other* unknowns if that node's value arrived:

    C_l = beta_l - ||r_l||^2 / nu_l

with beta_l the residual trace excluding node l, nu_l node l's conditional
variance and r_l its covariance column.  All three come straight from the
current conditional covariance, so selection never looks at observed values
(or at the hidden ground truth).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .errors import DegenerateVarianceError
from .models import (
    DEGENERATE_VARIANCE_EPS,
    ConditionalState,
    GaussianModel,
    condition,
    mark_known,
    rank_one_condition,
)

# Costs within this relative band of the minimum count as tied; ties resolve
# to the lowest node label so runs are reproducible across platforms.
TIE_TOLERANCE = 1e-9


@dataclass(frozen=True)
class SelectionCost:
    """Score of one candidate node: cost = beta - r_norm_sq / nu."""

    node: int
    cost: float
    beta: float
    nu: float
    r_norm_sq: float

    @property
    def components(self) -> tuple[float, float, float]:
        return (self.beta, self.nu, self.r_norm_sq)


@dataclass(frozen=True)
class SensingState:
    """One run's view of the collection process after ``round`` rounds.

    ``target`` is the hidden realization used only to score the estimate;
    selection logic reads nothing but ``cond``.
    """

    round: int
    cond: ConditionalState
    target: np.ndarray | None
    mse_theory: float
    sqerr_actual: float

    @property
    def known_nodes(self) -> tuple[int, ...]:
        return self.cond.known_idx

    @property
    def unknown_nodes(self) -> np.ndarray:
        return self.cond.unknown_idx

    @property
    def known_count(self) -> int:
        return len(self.cond.known_idx)

    @property
    def unknown_count(self) -> int:
        return self.cond.num_unknown


def _squared_error(cond: ConditionalState, target: np.ndarray | None) -> float:
    if target is None:
        return float("nan")
    u = target[cond.unknown_idx - 1]
    return float(np.sum((u - cond.cond_mean) ** 2))


def initial_state(model: GaussianModel, target: np.ndarray | None = None) -> SensingState:
    """Round-zero state: nothing observed yet."""
    if target is not None:
        target = np.asarray(target, dtype=float)
        if target.shape != (model.K,):
            raise ValueError(f"target must have shape ({model.K},)")
    cond = condition(model, [], [])
    return SensingState(
        round=0,
        cond=cond,
        target=target,
        mse_theory=float(np.trace(cond.cond_cov)),
        sqerr_actual=_squared_error(cond, target),
    )


def _cost_vector(cov: np.ndarray) -> np.ndarray:
    """Selection costs of all candidates, straight from the covariance."""
    d = np.diagonal(cov)
    beta = d.sum() - d
    r_norm_sq = np.maximum(np.einsum("ij,ij->j", cov, cov) - d * d, 0.0)
    safe = d > DEGENERATE_VARIANCE_EPS
    gain = np.zeros_like(beta)
    np.divide(r_norm_sq, d, out=gain, where=safe)
    return np.maximum(beta - gain, 0.0)


def selection_costs(state: SensingState) -> list[SelectionCost]:
    """Score every unknown node.  A single remaining node gets cost 0."""
    cond = state.cond
    n = cond.num_unknown
    if n == 0:
        return []
    if n == 1:
        node = int(cond.unknown_idx[0])
        nu = float(cond.cond_cov[0, 0])
        return [SelectionCost(node=node, cost=0.0, beta=0.0, nu=nu, r_norm_sq=0.0)]
    cov = cond.cond_cov
    d = np.diagonal(cov)
    beta = d.sum() - d
    r_norm_sq = np.maximum(np.einsum("ij,ij->j", cov, cov) - d * d, 0.0)
    gain = np.where(d > DEGENERATE_VARIANCE_EPS, r_norm_sq / np.maximum(d, DEGENERATE_VARIANCE_EPS), 0.0)
    costs = np.maximum(beta - gain, 0.0)
    return [
        SelectionCost(
            node=int(cond.unknown_idx[l]),
            cost=float(costs[l]),
            beta=float(beta[l]),
            nu=float(d[l]),
            r_norm_sq=float(r_norm_sq[l]),
        )
        for l in range(n)
    ]


def _greedy_sequence(cov: np.ndarray, nodes: np.ndarray, count: int) -> list[int]:
    """Pick ``count`` nodes by repeated argmin-cost + covariance-only downdate.

    Hot path: since the candidates share the total-trace term, minimizing
    ``cost_l`` is the same as maximizing ``colsq_l / d_l``; picked nodes are
    retired by zeroing their row and column instead of reallocating the
    matrix.  Ties (within ``TIE_TOLERANCE`` of the extremum, on the cost
    scale) resolve to the lowest node label.
    """
    cov = np.array(cov, dtype=float)
    n = cov.shape[0]
    if n == 0 or count < 1:
        return []
    if n == 1:
        return [int(nodes[0])]
    diag = np.einsum("ii->i", cov)
    colsq = np.empty(n)
    score = np.empty(n)
    outer = np.empty((n, n))
    dead = np.empty(n, dtype=np.intp)
    n_dead = 0
    total = float(diag.sum())
    picks: list[int] = []
    for _ in range(min(count, n)):
        np.einsum("ij,ij->j", cov, cov, out=colsq)
        np.maximum(diag, DEGENERATE_VARIANCE_EPS, out=score)
        np.divide(colsq, score, out=score)
        if n_dead:
            score[dead[:n_dead]] = -np.inf
        tol = TIE_TOLERANCE * max(1.0, total)
        top = float(score[np.argmax(score)])
        l = int(np.argmax(score >= top - tol))
        picks.append(int(nodes[l]))
        nu = float(cov[l, l])
        if nu > DEGENERATE_VARIANCE_EPS:
            col = cov[:, l].copy()
            np.multiply.outer(col, col / nu, out=outer)
            cov -= outer
            total -= float(score[l])
        else:
            total -= nu
        cov[l, :] = 0.0
        cov[:, l] = 0.0
        dead[n_dead] = l
        n_dead += 1
    return picks


def select_nodes(state: SensingState, q: int, rule: str = "greedy") -> list[int]:
    """Choose the next ``q`` nodes to request.

    ``greedy`` (default) re-scores after hypothetically conditioning on each
    pick, which accounts for redundancy between the picks; ``topq`` simply
    takes the q smallest one-shot costs and is kept as a comparison switch.
    """
    if q < 1:
        raise ValueError("q must be >= 1")
    cond = state.cond
    n = cond.num_unknown
    if n == 0:
        return []
    q_eff = min(int(q), n)
    if rule == "greedy":
        return _greedy_sequence(cond.cond_cov, cond.unknown_idx, q_eff)
    if rule == "topq":
        if n == 1:
            return [int(cond.unknown_idx[0])]
        costs = _cost_vector(cond.cond_cov)
        order = np.lexsort((cond.unknown_idx, costs))
        return [int(cond.unknown_idx[i]) for i in order[:q_eff]]
    raise ValueError(f"unknown selection rule: {rule!r}")


def ingest(state: SensingState, delivered: Mapping[int, float]) -> SensingState:
    """Fold a round's delivered measurements into the state.

    Nodes are conditioned one at a time (ascending label) through the
    rank-one update; near-deterministic nodes are absorbed without a
    covariance update.  The round counter advances even when nothing was
    delivered.
    """
    items = sorted((int(n), float(v)) for n, v in delivered.items())
    cond = state.cond
    unknown = set(int(n) for n in cond.unknown_idx)
    for node, _ in items:
        if node not in unknown:
            raise ValueError(f"delivered node {node} is already observed or not a valid label")
    for node, value in items:
        try:
            cond = rank_one_condition(cond, node, value)
        except DegenerateVarianceError:
            cond = mark_known(cond, node, value)
    return SensingState(
        round=state.round + 1,
        cond=cond,
        target=state.target,
        mse_theory=float(np.trace(cond.cond_cov)),
        sqerr_actual=_squared_error(cond, state.target),
    )


def polling_order(model: GaussianModel) -> list[int]:
    """Failure-free request order: repeated single-node greedy selection.

    Depends only on the covariance, so it can be fixed before any value is
    seen and is identical for every realization.
    """
    nodes = np.arange(1, model.K + 1, dtype=np.int64)
    return _greedy_sequence(model.cov, nodes, model.K)
