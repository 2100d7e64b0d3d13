"""Self-validating checks behind ``gdas validate`` and the acceptance tests.

Each check runs a frozen-seed experiment and compares the outcome against
its pinned tolerance; the CLI turns any failure into a nonzero exit code.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace

import numpy as np

from .access import aloha_round, expected_successes
from .bandit import round_cost_from_state, softmax_probs, new_bandit_state, update
from .engine import ingest, initial_state, polling_order, select_nodes
from .experiments import Scenario, run_bandit_scenario, run_scenario, sweep
from .models import GaussianModel, build_ar1_model, condition, rank_one_condition

DEFAULT_SEED = 20260808


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str
    elapsed: float


def _result(name: str, started: float, passed: bool, detail: str) -> CheckResult:
    return CheckResult(name=name, passed=bool(passed), detail=detail, elapsed=time.perf_counter() - started)


def check_round_counts(seed: int = DEFAULT_SEED) -> CheckResult:
    """Mean rounds to collect 75 of 100 measurements, 500 runs per mode.

    Polling must land within 5% of the 93.75 closed form; ALOHA within
    [49.7, 56.0] (its 49.7 closed form is a lower bound).  Budget: 30 s.
    """
    started = time.perf_counter()
    base = Scenario(K=100, rho=0.95, N=4, p=0.2, kbar=75, runs=500, seed=seed)
    res_polling = run_scenario(replace(base, mode="polling", T=250))
    res_aloha = run_scenario(replace(base, mode="aloha", T=150, seed=seed + 1))
    elapsed = time.perf_counter() - started
    mp = res_polling.mean_stop_round
    ma = res_aloha.mean_stop_round
    ok = (
        res_polling.censored_runs == 0
        and res_aloha.censored_runs == 0
        and 89.1 <= mp <= 98.4
        and 49.7 <= ma <= 56.0
        and ma >= 49.0
        and elapsed < 30.0
    )
    detail = (
        f"polling mean stop {mp:.2f} (window [89.1, 98.4]); "
        f"aloha mean stop {ma:.2f} (window [49.7, 56.0], floor 49.0); "
        f"{elapsed:.1f}s < 30s"
    )
    return _result("1 round-counts", started, ok, detail)


def check_throughput(seed: int = DEFAULT_SEED) -> CheckResult:
    """ALOHA per-round deliveries vs the closed form: Q=20, N=4, p=0.2, 1e5 rounds."""
    started = time.perf_counter()
    rng = np.random.default_rng(seed)
    requested = list(range(1, 21))
    total = 0
    rounds = 100_000
    for _ in range(rounds):
        total += len(aloha_round(requested, 4, 0.2, rng).delivered)
    elapsed = time.perf_counter() - started
    mean = total / rounds
    target = 1.5097
    rel = abs(mean - target) / target
    exact = expected_successes("aloha", 4, 0.2, 20)
    ok = rel <= 0.03 and elapsed < 5.0
    detail = (
        f"empirical {mean:.4f} vs {target} (rel {rel:.4f} <= 0.03, formula {exact:.4f}); "
        f"{elapsed:.1f}s < 5s"
    )
    return _result("2 throughput-formula", started, ok, detail)


def check_crossover(seed: int = DEFAULT_SEED) -> CheckResult:
    """Fixed-horizon p-sweep: ALOHA wins below 1/e, polling wins above."""
    started = time.perf_counter()
    base = Scenario(mode="aloha", K=100, N=4, p=0.2, T=75, runs=100, seed=seed)
    table = sweep(base, "p", [0.1, 0.2, 0.3, 0.45, 0.6])
    parts = []
    ok = True
    for pt in table.points:
        want_aloha = pt.value < math.exp(-1.0)
        good = pt.aloha_better == want_aloha
        ok = ok and good
        parts.append(
            f"p={pt.value:g}: aloha {pt.aloha_mse:.3g} vs polling {pt.polling_mse:.3g}"
            f" [{'ok' if good else 'WRONG ORDER'}]"
        )
    return _result("3 crossover", started, ok, "; ".join(parts))


def _random_psd_model(rng: np.random.Generator, k: int) -> GaussianModel:
    a = rng.standard_normal((k, 2 * k))
    cov = a @ a.T / (2 * k) + 0.05 * np.eye(k)
    mean = rng.normal(0.0, 1.0, size=k)
    return GaussianModel(mean=mean, cov=cov)


def check_conditioning_equivalence(seed: int = DEFAULT_SEED) -> CheckResult:
    """Incremental rank-one conditioning vs the batch solve: 200 random models, K<=50."""
    started = time.perf_counter()
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(200):
        k = int(rng.integers(2, 51))
        model = _random_psd_model(rng, k)
        n_obs = int(rng.integers(1, k))
        order = rng.permutation(k)[:n_obs] + 1
        vals = rng.normal(0.0, 1.0, size=n_obs)
        state = condition(model, [], [])
        for node, value in zip(order, vals):
            state = rank_one_condition(state, int(node), float(value))
        batch = condition(model, order, vals)
        worst = max(
            worst,
            float(np.abs(state.cond_mean - batch.cond_mean).max(initial=0.0)),
            float(np.abs(state.cond_cov - batch.cond_cov).max(initial=0.0)),
        )
        if not np.array_equal(state.unknown_idx, batch.unknown_idx):
            return _result("4 conditioning-equivalence", started, False, "unknown sets differ")
    ok = worst <= 1e-8
    return _result(
        "4 conditioning-equivalence",
        started,
        ok,
        f"max entrywise |incremental - batch| = {worst:.2e} <= 1e-8 over 200 models",
    )


def _brute_force_best(model: GaussianModel, known: list[int], vals: list[float]) -> int:
    """Exhaustive argmin of the post-conditioning residual trace (tie: lowest node)."""
    state = condition(model, known, vals)
    candidates = [int(n) for n in state.unknown_idx]
    traces = []
    for node in candidates:
        after = condition(model, known + [node], vals + [0.0])
        traces.append(float(np.trace(after.cond_cov)))
    traces = np.asarray(traces)
    tol = 1e-9 * max(1.0, float(np.trace(state.cond_cov)))
    return candidates[int(np.flatnonzero(traces <= traces.min() + tol)[0])]


def check_greedy_oracle(seed: int = DEFAULT_SEED) -> CheckResult:
    """Greedy single pick equals the exhaustive argmin in 1000/1000 trials;
    over the pair trials, greedy's residual trace stays within 5% of the
    exhaustive-pair optimum in aggregate.

    The pair clause is an aggregate statement by necessity: greedy is
    sequential, and on strongly correlated lines its forced first pick can
    exclude the best pair (K=5 AR(1) at rho 0.95 has a 43% per-instance gap),
    so no per-trial 5% bound can hold.
    """
    started = time.perf_counter()
    rng = np.random.default_rng(seed)
    single_hits = 0
    single_trials = 1000
    for trial in range(single_trials):
        k = int(rng.integers(2, 11))
        if trial % 2 == 0:
            model = build_ar1_model(k, float(rng.uniform(0.3, 0.98)))
        else:
            model = _random_psd_model(rng, k)
        n_obs = int(rng.integers(0, k - 1))
        known = [int(n) for n in rng.permutation(k)[:n_obs] + 1]
        vals = [float(v) for v in rng.normal(0.0, 1.0, size=n_obs)]
        st = initial_state(model)
        if known:
            st = ingest(st, dict(zip(known, vals)))
        if _brute_force_best(model, known, vals) == select_nodes(st, 1)[0]:
            single_hits += 1

    achieved_sum = 0.0
    optimum_sum = 0.0
    worst_ratio = 1.0
    pair_trials = 300
    for trial in range(pair_trials):
        k = int(rng.integers(3, 11))
        if trial % 2 == 0:
            model = build_ar1_model(k, float(rng.uniform(0.3, 0.98)))
        else:
            model = _random_psd_model(rng, k)
        st = initial_state(model)
        pair = select_nodes(st, 2)
        achieved = float(np.trace(condition(model, pair, [0.0, 0.0]).cond_cov))
        best = min(
            float(np.trace(condition(model, [i, j], [0.0, 0.0]).cond_cov))
            for i in range(1, k + 1)
            for j in range(i + 1, k + 1)
        )
        achieved_sum += achieved
        optimum_sum += best
        if best > 1e-12:
            worst_ratio = max(worst_ratio, achieved / best)

    pair_ratio = achieved_sum / optimum_sum
    ok = single_hits == single_trials and pair_ratio <= 1.05
    detail = (
        f"single-pick agreement {single_hits}/{single_trials}; "
        f"aggregate pair trace ratio {pair_ratio:.4f} <= 1.05 over {pair_trials} trials "
        f"(worst single instance {worst_ratio:.2f})"
    )
    return _result("5 greedy-oracle", started, ok, detail)


def _per_run_series(records, field: str) -> dict[int, list[float]]:
    out: dict[int, list[float]] = {}
    for rec in records:
        out.setdefault(rec.run, []).append(getattr(rec, field))
    return out


def check_mse_calibration(seed: int = DEFAULT_SEED) -> CheckResult:
    """Monotone conditional MSE plus 100-run empirical tracking within 15%.

    The per-round 15% band is asserted on the failure-free single-channel
    configuration (deterministic deliveries, so the only noise is the
    realization of x); the random-access configuration is held to the same
    band on rounds where the residual MSE is large enough for a 100-run
    average to resolve it (mean MSE >= 0.5).
    """
    started = time.perf_counter()
    polling = run_scenario(
        Scenario(mode="polling", p=1.0, N=1, K=100, rho=0.95, kbar=100, T=75,
                 runs=100, first_round="greedy", seed=seed)
    )
    aloha = run_scenario(
        Scenario(mode="aloha", p=0.2, N=4, K=100, rho=0.95, kbar=100, T=75,
                 runs=100, seed=seed + 1)
    )
    for label, res in (("polling", polling), ("aloha", aloha)):
        for run, series in _per_run_series(res.records, "mse_theory").items():
            diffs = np.diff(np.asarray(series))
            if np.any(diffs > 1e-9):
                return _result(
                    "6 mse-calibration", started, False,
                    f"{label} run {run}: mse_theory increased",
                )

    worst = {}
    for label, res, floor in (("polling", polling, 0.0), ("aloha", aloha, 0.5)):
        rows = res.summary_rows()
        rel = [
            abs(row["mean_sqerr_actual"] - row["mean_mse_theory"]) / row["mean_mse_theory"]
            for row in rows
            if row["mean_mse_theory"] > floor
        ]
        worst[label] = max(rel)
    ok = worst["polling"] <= 0.15 and worst["aloha"] <= 0.15
    detail = (
        "mse_theory nonincreasing in all 200 runs; worst |empirical-theory|/theory: "
        f"polling {worst['polling']:.3f}, aloha {worst['aloha']:.3f} (<= 0.15)"
    )
    return _result("6 mse-calibration", started, ok, detail)


def check_polling_order(seed: int = DEFAULT_SEED) -> CheckResult:
    """The failure-free request order is one permutation, whatever x turns out to be."""
    started = time.perf_counter()
    model = build_ar1_model(100, 0.95)
    base = polling_order(model)
    if sorted(base) != list(range(1, 101)):
        return _result("7 polling-order", started, False, "order is not a permutation")
    rng = np.random.default_rng(seed)
    chol = np.linalg.cholesky(model.cov)
    for _ in range(100):
        x = model.mean + chol @ rng.standard_normal(100)
        st = initial_state(model, x)
        seq = []
        for _ in range(100):
            node = select_nodes(st, 1)[0]
            seq.append(node)
            st = ingest(st, {node: float(x[node - 1])})
        if seq != base:
            return _result(
                "7 polling-order", started, False, "request order varied with the realization"
            )
    scaled = GaussianModel(mean=5.0 * model.mean, cov=model.cov)
    ok = polling_order(scaled) == base
    detail = "identical order across 100 realizations and under mean scaling"
    return _result("7 polling-order", started, ok, detail)


def check_bandit_behavior(seed: int = DEFAULT_SEED) -> CheckResult:
    """Softmax model selection: tau=1 locks onto the true model, tau=20 stays
    near uniform, and the true-model cost averages 1."""
    started = time.perf_counter()
    arms = 5

    res1 = run_bandit_scenario(
        Scenario(mode="bandit", K=100, p=0.2, N=4, tau=1.0, runs=200, T=40, seed=seed)
    )
    freq1 = res1.selection_frequency()
    lead_ok = True
    min_gap = float("inf")
    for t in range(2 * arms, 40):
        own = freq1[1][t]
        best_other = max(freq1[m][t] for m in range(2, arms + 1))
        min_gap = min(min_gap, own - best_other)
        if own <= best_other:
            lead_ok = False

    res20 = run_bandit_scenario(
        Scenario(mode="bandit", K=100, p=0.2, N=4, tau=20.0, runs=500, T=30, seed=seed + 1)
    )
    freq20 = res20.selection_frequency()
    band = [freq20[1][t] for t in range(2 * arms, 30)]
    band_ok = all(abs(v - 0.2) <= 0.07 for v in band)

    # Mean normalized true-model cost over 1e4 simulated delivery rounds.
    rng = np.random.default_rng(seed + 2)
    model = build_ar1_model(100, 0.95)
    chol = np.linalg.cholesky(model.cov)
    total = 0.0
    n_samples = 0
    for _ in range(1000):
        n_known = int(rng.integers(0, 61))
        perm = rng.permutation(100) + 1
        known = [int(n) for n in perm[:n_known]]
        n_del = int(rng.integers(1, 4))
        delivered = [int(n) for n in perm[n_known : n_known + n_del]]
        for _ in range(10):
            x = model.mean + chol @ rng.standard_normal(100)
            cond = condition(model, known, [float(x[n - 1]) for n in known])
            total += round_cost_from_state(cond, delivered, [float(x[n - 1]) for n in delivered])
            n_samples += 1
    mean_cost = total / n_samples
    cost_ok = abs(mean_cost - 1.0) <= 0.05

    ok = lead_ok and band_ok and cost_ok
    detail = (
        f"tau=1: true model strictly leads rounds 10..39 (min gap {min_gap:.3f}); "
        f"tau=20: selection frequency in 0.2+-0.07 (range {min(band):.3f}..{max(band):.3f}); "
        f"true-model mean cost {mean_cost:.4f} in 1+-0.05 over {n_samples} samples"
    )
    return _result("8 bandit-behavior", started, ok, detail)


def check_softmax_units(seed: int = DEFAULT_SEED) -> CheckResult:
    """Shift invariance, the high-temperature limit, and the two-arm closed form."""
    started = time.perf_counter()
    rng = np.random.default_rng(seed)

    def state_with(psi: np.ndarray, tau: float):
        st = new_bandit_state(psi.shape[0], tau)
        for m, value in enumerate(psi, start=1):
            st = update(st, m, float(value))
        return st

    psi = rng.uniform(0.5, 4.0, size=5)
    base = softmax_probs(state_with(psi, 1.0))
    shifted = softmax_probs(state_with(psi + 7.25, 1.0))
    shift_err = float(np.abs(base - shifted).max())

    hot = softmax_probs(state_with(psi, 1e9))
    uniform_err = float(np.abs(hot - 0.2).max())

    two = softmax_probs(state_with(np.array([1.0, 2.0]), 1.0))
    closed = 1.0 / (1.0 + math.exp(-1.0))
    closed_err = abs(float(two[0]) - closed)

    ok = shift_err <= 1e-12 and uniform_err <= 1e-6 and closed_err <= 1e-9
    detail = (
        f"shift invariance err {shift_err:.1e} <= 1e-12; "
        f"tau=1e9 uniformity err {uniform_err:.1e} <= 1e-6; "
        f"two-arm closed form err {closed_err:.1e} <= 1e-9 (P_1 = {closed:.5f})"
    )
    return _result("9 softmax-units", started, ok, detail)


ALL_CHECKS = (
    ("1", check_round_counts),
    ("2", check_throughput),
    ("3", check_crossover),
    ("4", check_conditioning_equivalence),
    ("5", check_greedy_oracle),
    ("6", check_mse_calibration),
    ("7", check_polling_order),
    ("8", check_bandit_behavior),
    ("9", check_softmax_units),
)


def run_all(seed: int = DEFAULT_SEED, only: set[str] | None = None) -> list[CheckResult]:
    results = []
    for key, fn in ALL_CHECKS:
        if only is not None and key not in only:
            continue
        results.append(fn(seed))
    return results
