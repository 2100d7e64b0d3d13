"""Command-line front end: run / sweep / bandit / validate."""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import replace
from pathlib import Path

from .config import load_scenario
from .experiments import (
    BanditResult,
    RunResult,
    Scenario,
    run_bandit_scenario,
    run_scenario,
    sweep,
    write_rounds_csv,
    write_summary_csv,
    write_sweep_csv,
)
from .presets import BANDIT_PRESETS, RUN_PRESETS, SWEEP_PRESETS, preset_names
from .validate import DEFAULT_SEED, run_all


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="flat key=value scenario file")
    parser.add_argument("--preset", help="named scenario preset")
    parser.add_argument("--seed", type=int, help="override the scenario seed")
    parser.add_argument("--runs", type=int, help="override the Monte-Carlo run count")
    parser.add_argument("--out", type=Path, help="directory for CSV output")
    parser.add_argument(
        "--check",
        action="store_true",
        help="validate the documented preset property and exit nonzero on failure",
    )


def _apply_overrides(scenario: Scenario, args) -> Scenario:
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.runs is not None:
        overrides["runs"] = args.runs
    return replace(scenario, **overrides) if overrides else scenario


def _scenarios_for_run(args) -> list[tuple[str, Scenario]]:
    if (args.config is None) == (args.preset is None):
        raise SystemExit("give exactly one of --config or --preset")
    if args.config is not None:
        return [("scenario", load_scenario(args.config))]
    if args.preset not in RUN_PRESETS:
        raise SystemExit(f"unknown run preset {args.preset!r}; have {preset_names()['run']}")
    return list(RUN_PRESETS[args.preset])


def _write(out: Path | None, name: str, writer, payload) -> None:
    if out is None:
        return
    out.mkdir(parents=True, exist_ok=True)
    writer(out / name, payload)


def _check_rounds(results: dict[str, RunResult]) -> list[str]:
    problems = []
    polling = results.get("polling")
    aloha = results.get("aloha")
    if polling is not None and not 89.1 <= polling.mean_stop_round <= 98.4:
        problems.append(f"polling mean stop {polling.mean_stop_round:.2f} outside [89.1, 98.4]")
    if aloha is not None and not 49.0 <= aloha.mean_stop_round <= 56.0:
        problems.append(f"aloha mean stop {aloha.mean_stop_round:.2f} outside [49.0, 56.0]")
    return problems


def cmd_run(args) -> int:
    results: dict[str, RunResult] = {}
    for label, scenario in _scenarios_for_run(args):
        scenario = _apply_overrides(scenario, args)
        result = run_scenario(scenario)
        results[label] = result
        bounds = result.bounds()
        print(
            f"{label}: mean stop round {result.mean_stop_round:.2f} over "
            f"{scenario.run_count} runs (closed form {bounds['rounds_' + scenario.mode]:.2f}; "
            f"censored {result.censored_runs})"
        )
        _write(args.out, f"rounds_{label}.csv", write_rounds_csv, result)
        _write(args.out, f"summary_{label}.csv", write_summary_csv, result)
    if args.check:
        if args.preset != "rounds":
            raise SystemExit("--check is defined for the 'rounds' preset")
        problems = _check_rounds(results)
        for msg in problems:
            print(f"CHECK FAIL: {msg}")
        if problems:
            return 1
        print("CHECK PASS: stop rounds within the documented windows")
    return 0


def cmd_sweep(args) -> int:
    if (args.config is None) == (args.preset is None):
        raise SystemExit("give exactly one of --config or --preset")
    if args.preset is not None:
        if args.preset not in SWEEP_PRESETS:
            raise SystemExit(
                f"unknown sweep preset {args.preset!r}; have {preset_names()['sweep']}"
            )
        scenario, param, values = SWEEP_PRESETS[args.preset]
    else:
        scenario = load_scenario(args.config)
        param = args.param
        if param is None or args.values is None:
            raise SystemExit("--config sweeps need --param and --values")
        values = [float(v) for v in args.values.split(",")]
    scenario = _apply_overrides(scenario, args)
    result = sweep(scenario, param, values)
    for pt in result.points:
        winner = "aloha" if pt.aloha_better else "polling"
        print(
            f"{param}={pt.value:g}: polling {pt.polling_mse:.4g}, aloha {pt.aloha_mse:.4g}"
            f" -> {winner} (predicted {'aloha' if pt.aloha_favored_predicted else 'polling'})"
        )
    _write(args.out, f"sweep_{param}.csv", write_sweep_csv, result)
    if args.check:
        bad = [
            pt for pt in result.points
            if pt.aloha_better != (pt.value < math.exp(-1.0)) and param == "p"
        ]
        if param == "N":
            mses = [pt.aloha_mse for pt in result.points]
            if any(b >= a for a, b in zip(mses, mses[1:])):
                bad.append("aloha MSE not decreasing in N")
            mses = [pt.polling_mse for pt in result.points]
            if any(b >= a for a, b in zip(mses, mses[1:])):
                bad.append("polling MSE not decreasing in N")
        for item in bad:
            print(f"CHECK FAIL: {item}")
        if bad:
            return 1
        print("CHECK PASS: sweep ordering matches the closed-form prediction")
    return 0


def cmd_bandit(args) -> int:
    if (args.config is None) == (args.preset is None):
        raise SystemExit("give exactly one of --config or --preset")
    if args.preset is not None:
        if args.preset not in BANDIT_PRESETS:
            raise SystemExit(
                f"unknown bandit preset {args.preset!r}; have {preset_names()['bandit']}"
            )
        scenario = BANDIT_PRESETS[args.preset]
    else:
        scenario = load_scenario(args.config)
    scenario = _apply_overrides(scenario, args)
    result = run_bandit_scenario(scenario)
    rows = result.summary_rows()
    last = rows[-1]
    freqs = " ".join(f"m{m}={last[f'freq_{m}']:.2f}" for m in range(1, scenario.M + 1))
    print(
        f"bandit tau={scenario.tau:g}: round {last['t']} selection frequencies {freqs}; "
        f"mean per-round sqerr {last['mean_sqerr_delivered']:.4g}"
    )
    _write(args.out, "rounds_bandit.csv", write_rounds_csv, result)
    _write(args.out, "summary_bandit.csv", write_summary_csv, result)
    if args.check:
        problems = _check_bandit(args.preset, result)
        for msg in problems:
            print(f"CHECK FAIL: {msg}")
        if problems:
            return 1
        print("CHECK PASS: bandit behavior matches the documented property")
    return 0


def _check_bandit(preset: str | None, result: BanditResult) -> list[str]:
    if preset is None:
        raise SystemExit("--check is defined for bandit presets only")
    arms = result.scenario.M
    freq = result.selection_frequency()
    horizon = len(freq[1])
    problems = []
    if preset == "bandit-tau1":
        for t in range(2 * arms, horizon):
            others = max(freq[m][t] for m in range(2, arms + 1))
            if freq[1][t] <= others:
                problems.append(f"round {t}: true-model frequency {freq[1][t]:.3f} not leading")
    elif preset == "bandit-tau20":
        for t in range(2 * arms, horizon):
            if abs(freq[1][t] - 0.2) > 0.07:
                problems.append(f"round {t}: frequency {freq[1][t]:.3f} outside 0.2+-0.07")
    elif preset == "mismatch":
        for row in result.summary_rows():
            emp = row["mean_sqerr_delivered"]
            theo = row["mean_mse_delivered_true"]
            if not (math.isnan(emp) or math.isnan(theo)) and emp < theo:
                problems.append(
                    f"round {row['t']}: wrong-model error {emp:.3g} below true-model MSE {theo:.3g}"
                )
    return problems


def cmd_validate(args) -> int:
    only = set(args.only.split(",")) if args.only else None
    seed = args.seed if args.seed is not None else DEFAULT_SEED
    results = run_all(seed=seed, only=only)
    failed = 0
    for res in results:
        status = "PASS" if res.passed else "FAIL"
        print(f"[{status}] {res.name}: {res.detail} ({res.elapsed:.1f}s)")
        failed += 0 if res.passed else 1
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return 1 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gdas",
        description=(
            "Simulate round-based collection of correlated Gaussian sensor data "
            "with greedy minimum-MSE node selection"
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a polling/aloha scenario")
    _add_common(p_run)
    p_run.set_defaults(fn=cmd_run)

    p_sweep = sub.add_parser("sweep", help="sweep p or N at a fixed horizon")
    _add_common(p_sweep)
    p_sweep.add_argument("--param", choices=("p", "N"))
    p_sweep.add_argument("--values", help="comma-separated sweep values")
    p_sweep.set_defaults(fn=cmd_sweep)

    p_bandit = sub.add_parser("bandit", help="run a model-selection scenario")
    _add_common(p_bandit)
    p_bandit.set_defaults(fn=cmd_bandit)

    p_val = sub.add_parser("validate", help="run the full acceptance checks")
    p_val.add_argument("--seed", type=int, help="seed for every check")
    p_val.add_argument("--only", help="comma-separated check numbers, e.g. 1,4,9")
    p_val.set_defaults(fn=cmd_validate)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
