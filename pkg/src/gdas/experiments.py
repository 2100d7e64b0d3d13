"""Monte-Carlo orchestration: scenarios, round records, summaries, CSV output.

A scenario fully determines its output: run r of a scenario draws everything
from ``default_rng(SeedSequence((seed, r)))``, so repeated invocations are
bit-identical.  The first round requests uniformly random nodes by default
(``first_round="greedy"`` switches that off); later rounds always go through
the selection engine.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from .access import (
    aloha_round,
    crossover_check,
    expected_successes,
    mean_rounds_bound,
    optimal_q,
    polling_round,
    uploading_probability,
)
from .bandit import (
    new_bandit_state,
    prediction_error_terms,
    record_selection,
    select_model,
    softmax_probs,
    update,
)
from .engine import ingest, initial_state, select_nodes
from .models import FAMILY_SIZE, GaussianModel, build_ar1_model, build_model_family

ROUNDS_SCHEMA = "gdas.rounds.v1"
SUMMARY_SCHEMA = "gdas.summary.v1"
SWEEP_SCHEMA = "gdas.sweep.v1"

_MODES = ("polling", "aloha", "bandit")
_FIRST_ROUND = ("random", "greedy")


@dataclass(frozen=True)
class Scenario:
    """Everything a simulation needs; the seed pins the full output."""

    K: int = 100
    rho: float = 0.95
    N: int = 4
    mode: str = "aloha"
    p: float | None = 0.2
    snr_threshold: float | None = None
    snr_avg: float | None = None
    availability: float | None = None
    q_policy: str = "optimal"
    kbar: int | None = None
    T: int | None = None
    runs: int | None = None
    tau: float = 1.0
    M: int = FAMILY_SIZE
    true_model: int = 1
    fixed_model: int | None = None
    family_J: int = 3
    family_noise: float = 0.1
    first_round: str = "random"
    seed: int = 12345

    def __post_init__(self) -> None:
        if self.K < 1 or self.N < 1:
            raise ValueError("K and N must be >= 1")
        if not -1.0 < self.rho < 1.0:
            raise ValueError("rho must lie in (-1, 1)")
        if self.mode not in _MODES:
            raise ValueError(f"mode must be one of {_MODES}, got {self.mode!r}")
        physical = (self.snr_threshold, self.snr_avg, self.availability)
        if self.p is None:
            if any(v is None for v in physical):
                raise ValueError("give either p or all of snr_threshold/snr_avg/availability")
            uploading_probability(*physical)  # range checks
        else:
            if any(v is not None for v in physical):
                raise ValueError("give either p or the physical triple, not both")
            if not 0.0 < self.p <= 1.0:
                raise ValueError("p must lie in (0, 1]")
        if not (self.q_policy in ("optimal", "topq") or _fixed_q(self.q_policy) is not None):
            raise ValueError("q_policy must be 'optimal', 'topq' or 'fixed:<n>'")
        if self.kbar is not None and not 1 <= self.kbar <= self.K:
            raise ValueError("kbar must lie in 1..K")
        if self.T is not None and self.T < 1:
            raise ValueError("T must be >= 1")
        if self.runs is not None and self.runs < 1:
            raise ValueError("runs must be >= 1")
        if self.tau <= 0.0:
            raise ValueError("tau must be > 0")
        if not 2 <= self.M <= FAMILY_SIZE:
            raise ValueError(f"M must lie in 2..{FAMILY_SIZE}")
        if not 1 <= self.true_model <= self.M:
            raise ValueError("true_model must lie in 1..M")
        if self.fixed_model is not None and not 1 <= self.fixed_model <= self.M:
            raise ValueError("fixed_model must lie in 1..M")
        if self.family_J < 1:
            raise ValueError("family_J must be >= 1")
        if self.family_noise <= 0.0:
            raise ValueError("family_noise must be > 0")
        if self.first_round not in _FIRST_ROUND:
            raise ValueError(f"first_round must be one of {_FIRST_ROUND}")
        if self.mode == "bandit" and self.K < self.family_J + FAMILY_SIZE - 1:
            raise ValueError("K is too small for the model family")
        if self.seed < 0:
            raise ValueError("seed must be >= 0")

    @property
    def upload_p(self) -> float:
        if self.p is not None:
            return float(self.p)
        return uploading_probability(self.snr_threshold, self.snr_avg, self.availability)

    @property
    def rounds_limit(self) -> int:
        if self.T is not None:
            return self.T
        return 50 if self.mode == "bandit" else 120

    @property
    def run_count(self) -> int:
        if self.runs is not None:
            return self.runs
        return 200 if self.mode == "bandit" else 100

    @property
    def stop_threshold(self) -> int:
        return self.kbar if self.kbar is not None else self.K


def _fixed_q(policy: str) -> int | None:
    if policy.startswith("fixed:"):
        try:
            q = int(policy.split(":", 1)[1])
        except ValueError:
            return None
        return q if q >= 1 else None
    return None


@dataclass(slots=True)
class RoundRecord:
    """One (run, round) record; bandit fields stay None elsewhere."""

    run: int
    t: int
    known_before: int
    mse_theory: float
    sqerr_actual: float
    delivered: int
    collided: int
    model: int | None = None
    cost: float | None = None
    sqerr_delivered: float | None = None
    mse_delivered_true: float | None = None
    probs: tuple[float, ...] | None = None


def _run_rng(seed: int, run: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((int(seed), int(run))))


def _sampler(model: GaussianModel) -> Callable[[np.random.Generator], np.ndarray]:
    cov = model.cov
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        jitter = 1e-12 * max(float(np.trace(cov)), 1.0) / model.K
        chol = np.linalg.cholesky(cov + jitter * np.eye(model.K))

    def draw(rng: np.random.Generator) -> np.ndarray:
        return model.mean + chol @ rng.standard_normal(model.K)

    return draw


def _round_q(scenario: Scenario, p: float, remaining: int) -> int:
    if scenario.mode == "polling":
        return min(scenario.N, remaining)
    fixed = _fixed_q(scenario.q_policy)
    if fixed is not None:
        return max(1, min(fixed, remaining))
    return optimal_q(scenario.N, p, remaining)


def _first_request(scenario: Scenario, q: int, rng: np.random.Generator) -> list[int]:
    picked = rng.choice(scenario.K, size=q, replace=False)
    return sorted(int(v) + 1 for v in picked)


@dataclass
class RunResult:
    """Records plus per-run stop rounds for one polling/aloha scenario."""

    scenario: Scenario
    records: list[RoundRecord]
    stop_rounds: list[int | None]

    @property
    def censored_runs(self) -> int:
        return sum(1 for s in self.stop_rounds if s is None)

    @property
    def mean_stop_round(self) -> float:
        reached = [s for s in self.stop_rounds if s is not None]
        if not reached:
            return float("nan")
        return float(np.mean(reached))

    def final_mse_by_run(self) -> np.ndarray:
        """Last recorded conditional MSE of each run (its value at any later round)."""
        runs = self.scenario.run_count
        out = np.full(runs, np.nan)
        for rec in self.records:
            out[rec.run] = rec.mse_theory
        return out

    def final_sqerr_by_run(self) -> np.ndarray:
        runs = self.scenario.run_count
        out = np.full(runs, np.nan)
        for rec in self.records:
            out[rec.run] = rec.sqerr_actual
        return out

    def summary_rows(self) -> list[dict]:
        return _per_round_summary(self.records, arms=None)

    def bounds(self) -> dict[str, float | bool]:
        s = self.scenario
        p = s.upload_p
        q = optimal_q(s.N, p, s.K)
        return {
            "expected_polling": expected_successes("polling", s.N, p, s.N),
            "expected_aloha": expected_successes("aloha", s.N, p, q),
            "rounds_polling": mean_rounds_bound("polling", s.stop_threshold, s.N, p),
            "rounds_aloha": mean_rounds_bound("aloha", s.stop_threshold, s.N, p, q),
            "rounds_aloha_approx": mean_rounds_bound(
                "aloha-approx", s.stop_threshold, s.N, p
            ),
            "aloha_favored": crossover_check(p),
        }


def run_scenario(scenario: Scenario) -> RunResult:
    """Execute a polling or ALOHA scenario over all Monte-Carlo runs.

    Every run stops once ``kbar`` measurements have accumulated (or at the
    round limit); its stop round is the number of rounds executed.
    """
    if scenario.mode not in ("polling", "aloha"):
        raise ValueError("run_scenario handles polling/aloha; use run_bandit_scenario")
    p = scenario.upload_p
    model = build_ar1_model(scenario.K, scenario.rho)
    draw = _sampler(model)
    limit = scenario.rounds_limit
    kbar = scenario.stop_threshold
    rule = "topq" if scenario.q_policy == "topq" else "greedy"

    records: list[RoundRecord] = []
    stop_rounds: list[int | None] = []
    for run in range(scenario.run_count):
        rng = _run_rng(scenario.seed, run)
        x = draw(rng)
        st = initial_state(model, x)
        stop: int | None = None
        for t in range(limit):
            remaining = st.unknown_count
            if remaining == 0:
                break
            known_before = st.known_count
            q = _round_q(scenario, p, remaining)
            if t == 0 and scenario.first_round == "random":
                requested = _first_request(scenario, q, rng)
            else:
                requested = select_nodes(st, q, rule=rule)
            if scenario.mode == "polling":
                outcome = polling_round(requested, scenario.N, p, rng)
            else:
                outcome = aloha_round(requested, scenario.N, p, rng)
            st = ingest(st, {n: float(x[n - 1]) for n in outcome.delivered})
            records.append(
                RoundRecord(
                    run=run,
                    t=t,
                    known_before=known_before,
                    mse_theory=st.mse_theory,
                    sqerr_actual=st.sqerr_actual,
                    delivered=len(outcome.delivered),
                    collided=len(outcome.collided_channels),
                )
            )
            if st.known_count >= kbar:
                stop = t + 1
                break
        stop_rounds.append(stop)
    return RunResult(scenario, records, stop_rounds)


@dataclass(frozen=True)
class SweepPoint:
    param: str
    value: float
    polling_mse: float
    polling_sqerr: float
    aloha_mse: float
    aloha_sqerr: float
    aloha_better: bool
    aloha_favored_predicted: bool


@dataclass
class SweepResult:
    scenario: Scenario
    param: str
    points: list[SweepPoint]


def sweep(scenario: Scenario, param: str, values: Sequence[float]) -> SweepResult:
    """Final MSE after a fixed horizon, for both access modes, per value.

    Runs never stop early on a measurement count here (kbar is forced to K),
    matching the fixed-horizon reading of the comparison figures.
    """
    if param not in ("p", "N"):
        raise ValueError("param must be 'p' or 'N'")
    if len(values) == 0:
        raise ValueError("values must be non-empty")
    horizon = scenario.T if scenario.T is not None else 75

    points: list[SweepPoint] = []
    for value in values:
        if param == "p":
            base = replace(
                scenario,
                p=float(value),
                snr_threshold=None,
                snr_avg=None,
                availability=None,
                kbar=scenario.K,
                T=horizon,
            )
        else:
            base = replace(scenario, N=int(value), kbar=scenario.K, T=horizon)
        finals: dict[str, tuple[float, float]] = {}
        for mode in ("polling", "aloha"):
            res = run_scenario(replace(base, mode=mode))
            finals[mode] = (
                float(np.mean(res.final_mse_by_run())),
                float(np.mean(res.final_sqerr_by_run())),
            )
        points.append(
            SweepPoint(
                param=param,
                value=float(value),
                polling_mse=finals["polling"][0],
                polling_sqerr=finals["polling"][1],
                aloha_mse=finals["aloha"][0],
                aloha_sqerr=finals["aloha"][1],
                aloha_better=finals["aloha"][0] < finals["polling"][0],
                aloha_favored_predicted=crossover_check(base.upload_p),
            )
        )
    return SweepResult(scenario, param, points)


@dataclass
class BanditResult:
    """Records plus stop rounds for a model-selection scenario."""

    scenario: Scenario
    records: list[RoundRecord]
    stop_rounds: list[int | None]

    def summary_rows(self) -> list[dict]:
        return _per_round_summary(self.records, arms=self.scenario.M)

    def selection_frequency(self) -> dict[int, np.ndarray]:
        """Per-round empirical probability that each model was played."""
        rows = self.summary_rows()
        return {
            m: np.array([row[f"freq_{m}"] for row in rows])
            for m in range(1, self.scenario.M + 1)
        }


def _one_hot(arms: int, m: int) -> tuple[float, ...]:
    probs = [0.0] * arms
    probs[m - 1] = 1.0
    return tuple(probs)


def run_bandit_scenario(scenario: Scenario) -> BanditResult:
    """Model selection over ALOHA uploading.

    Per round: pick an arm (round-robin sweep first, softmax afterwards),
    select nodes under that arm's posterior, run the access round, pay the
    arm the normalized prediction error of what arrived, then fold the
    deliveries into every arm's posterior (the observation pool is shared).
    With ``fixed_model`` set, that arm is played every round and no costs
    accumulate: this is the mismatched-model baseline.
    """
    if scenario.mode != "bandit":
        raise ValueError("run_bandit_scenario needs mode='bandit'")
    p = scenario.upload_p
    family = build_model_family(scenario.K, scenario.family_J, scenario.family_noise)
    models = family[: scenario.M]
    true_idx = scenario.true_model - 1
    draw = _sampler(models[true_idx])
    limit = scenario.rounds_limit
    kbar = scenario.stop_threshold

    records: list[RoundRecord] = []
    stop_rounds: list[int | None] = []
    for run in range(scenario.run_count):
        rng = _run_rng(scenario.seed, run)
        x = draw(rng)
        states = [initial_state(model, x) for model in models]
        bst = new_bandit_state(scenario.M, scenario.tau, scenario.true_model)
        stop: int | None = None
        for t in range(limit):
            remaining = states[0].unknown_count
            if remaining == 0:
                break
            known_before = states[0].known_count
            if scenario.fixed_model is not None:
                m = scenario.fixed_model
                probs = _one_hot(scenario.M, m)
            else:
                forced = t < scenario.M or bool(np.any(bst.count == 0))
                m = select_model(bst, t, rng)
                probs = _one_hot(scenario.M, m) if forced else tuple(softmax_probs(bst))
                bst = record_selection(bst, m)
            q = optimal_q(scenario.N, p, remaining)
            if t == 0 and scenario.first_round == "random":
                requested = _first_request(scenario, q, rng)
            else:
                requested = select_nodes(states[m - 1], q)
            outcome = aloha_round(requested, scenario.N, p, rng)
            delivered = list(outcome.delivered)
            vals = [float(x[n - 1]) for n in delivered]
            if delivered:
                sqerr_d, expected_d = prediction_error_terms(
                    states[m - 1].cond, delivered, vals
                )
                _, expected_true = prediction_error_terms(
                    states[true_idx].cond, delivered, vals
                )
                cost = sqerr_d / expected_d
                if scenario.fixed_model is None:
                    bst = update(bst, m, cost)
            else:
                sqerr_d = float("nan")
                expected_true = float("nan")
                cost = float("nan")
            payload = dict(zip(delivered, vals))
            states = [ingest(st, payload) for st in states]
            records.append(
                RoundRecord(
                    run=run,
                    t=t,
                    known_before=known_before,
                    mse_theory=states[true_idx].mse_theory,
                    sqerr_actual=states[true_idx].sqerr_actual,
                    delivered=len(delivered),
                    collided=len(outcome.collided_channels),
                    model=m,
                    cost=cost,
                    sqerr_delivered=sqerr_d,
                    mse_delivered_true=expected_true,
                    probs=probs,
                )
            )
            if states[0].known_count >= kbar:
                stop = t + 1
                break
        stop_rounds.append(stop)
    return BanditResult(scenario, records, stop_rounds)


def _per_round_summary(records: Sequence[RoundRecord], arms: int | None) -> list[dict]:
    """Arithmetic per-round means over the runs still active at each round."""
    by_t: dict[int, list[RoundRecord]] = {}
    for rec in records:
        by_t.setdefault(rec.t, []).append(rec)
    rows = []
    for t in sorted(by_t):
        group = by_t[t]
        n = len(group)
        row: dict = {
            "t": t,
            "n_active": n,
            "mean_mse_theory": float(np.mean([r.mse_theory for r in group])),
            "mean_sqerr_actual": float(np.mean([r.sqerr_actual for r in group])),
            "mean_delivered": float(np.mean([r.delivered for r in group])),
            "mean_collided": float(np.mean([r.collided for r in group])),
        }
        if arms is not None:
            played = np.array([r.model for r in group], dtype=np.int64)
            for m in range(1, arms + 1):
                row[f"freq_{m}"] = float(np.mean(played == m))
            costs = np.array([r.cost for r in group], dtype=float)
            sq = np.array([r.sqerr_delivered for r in group], dtype=float)
            th = np.array([r.mse_delivered_true for r in group], dtype=float)
            row["mean_cost"] = float(np.nanmean(costs)) if np.any(~np.isnan(costs)) else float("nan")
            row["mean_sqerr_delivered"] = (
                float(np.nanmean(sq)) if np.any(~np.isnan(sq)) else float("nan")
            )
            row["mean_mse_delivered_true"] = (
                float(np.nanmean(th)) if np.any(~np.isnan(th)) else float("nan")
            )
        rows.append(row)
    return rows


# ----------------------------------------------------------------------
# CSV output
# ----------------------------------------------------------------------


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return "%.9g" % float(value)


def _scenario_tag(s: Scenario) -> str:
    fields = [
        f"mode={s.mode}",
        f"K={s.K}",
        f"rho={_fmt(s.rho)}",
        f"N={s.N}",
        f"p={_fmt(s.upload_p)}",
        f"q_policy={s.q_policy}",
        f"kbar={s.stop_threshold}",
        f"T={s.rounds_limit}",
        f"runs={s.run_count}",
        f"first_round={s.first_round}",
        f"seed={s.seed}",
    ]
    if s.mode == "bandit":
        fields += [
            f"tau={_fmt(s.tau)}",
            f"M={s.M}",
            f"true_model={s.true_model}",
            f"fixed_model={s.fixed_model if s.fixed_model is not None else 'none'}",
            f"family_J={s.family_J}",
            f"family_noise={_fmt(s.family_noise)}",
        ]
    return " ".join(fields)


def write_rounds_csv(path, result: RunResult | BanditResult) -> None:
    s = result.scenario
    bandit = s.mode == "bandit"
    columns = ["run", "t", "K_t", "mse_theory", "sqerr_actual", "delivered", "collided"]
    if bandit:
        columns += ["m", "Y", "sqerr_delivered", "mse_delivered_true"]
        columns += [f"P_{m}" for m in range(1, s.M + 1)]
    lines = [f"# {ROUNDS_SCHEMA} {_scenario_tag(s)}", ",".join(columns)]
    for rec in sorted(result.records, key=lambda r: (r.run, r.t)):
        cells = [
            _fmt(rec.run),
            _fmt(rec.t),
            _fmt(rec.known_before),
            _fmt(rec.mse_theory),
            _fmt(rec.sqerr_actual),
            _fmt(rec.delivered),
            _fmt(rec.collided),
        ]
        if bandit:
            cells += [
                _fmt(rec.model),
                _fmt(rec.cost),
                _fmt(rec.sqerr_delivered),
                _fmt(rec.mse_delivered_true),
            ]
            cells += [_fmt(p) for p in rec.probs]
        lines.append(",".join(cells))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def write_summary_csv(path, result: RunResult | BanditResult) -> None:
    s = result.scenario
    rows = result.summary_rows()
    header_extra = ""
    if isinstance(result, RunResult):
        parts = [f"{k}={_fmt(v)}" for k, v in result.bounds().items()]
        parts.append(f"mean_stop_round={_fmt(result.mean_stop_round)}")
        parts.append(f"censored_runs={sum(1 for v in result.stop_rounds if v is None)}")
        header_extra = " " + " ".join(parts)
    columns = list(rows[0].keys()) if rows else ["t"]
    lines = [f"# {SUMMARY_SCHEMA} {_scenario_tag(s)}{header_extra}", ",".join(columns)]
    for row in rows:
        lines.append(",".join(_fmt(row[c]) for c in columns))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def write_sweep_csv(path, result: SweepResult) -> None:
    columns = [
        "param",
        "value",
        "polling_mse",
        "polling_sqerr",
        "aloha_mse",
        "aloha_sqerr",
        "aloha_better",
        "aloha_favored_predicted",
    ]
    lines = [
        f"# {SWEEP_SCHEMA} param={result.param} {_scenario_tag(result.scenario)}",
        ",".join(columns),
    ]
    for pt in result.points:
        lines.append(
            ",".join(
                [
                    pt.param,
                    _fmt(pt.value),
                    _fmt(pt.polling_mse),
                    _fmt(pt.polling_sqerr),
                    _fmt(pt.aloha_mse),
                    _fmt(pt.aloha_sqerr),
                    _fmt(pt.aloha_better),
                    _fmt(pt.aloha_favored_predicted),
                ]
            )
        )
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
