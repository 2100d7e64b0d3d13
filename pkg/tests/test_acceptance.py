"""Acceptance gate: every criterion at its pinned tolerance.

Each test prints one PASS/FAIL line; ``gdas validate`` runs the same checks
from the command line.
"""

import gdas.validate as validate


def _report(result):
    line = (
        f"ACCEPTANCE {result.name}: {'PASS' if result.passed else 'FAIL'} - "
        f"{result.detail} [{result.elapsed:.1f}s]"
    )
    print(line)
    assert result.passed, line


def test_criterion_1_round_count_reproduction():
    _report(validate.check_round_counts())


def test_criterion_2_throughput_formula_vs_monte_carlo():
    _report(validate.check_throughput())


def test_criterion_3_crossover_ordering():
    _report(validate.check_crossover())


def test_criterion_4_conditioning_oracle_equivalence():
    _report(validate.check_conditioning_equivalence())


def test_criterion_5_greedy_selection_oracle():
    _report(validate.check_greedy_oracle())


def test_criterion_6_mse_monotonicity_and_calibration():
    _report(validate.check_mse_calibration())


def test_criterion_7_predetermined_order():
    _report(validate.check_polling_order())


def test_criterion_8_bandit_behavior():
    _report(validate.check_bandit_behavior())


def test_criterion_9_softmax_unit_checks():
    _report(validate.check_softmax_units())
