"""Acceptance criteria 1-13 at full sample sizes.

Set TRUNCGAUSS_ACCEPT_SCALE below 1 for a quicker smoke run; it shrinks
sample counts only, never thresholds.
"""

import os

import pytest

from truncgauss import validation as V

SCALE = float(os.environ.get("TRUNCGAUSS_ACCEPT_SCALE", "1.0"))

pytestmark = pytest.mark.slow


def _record(log, checks):
    for c in checks:
        log.setdefault(c.criterion, []).append(c)
    for c in checks:
        print(c.line())
    bad = [c.line() for c in checks if c.hard and not c.passed]
    assert not bad, "\n".join(bad)


def test_criterion_01_univariate_ks(table, acceptance_log):
    _record(acceptance_log, V.ks_univariate(table, SCALE))


def test_criterion_02_fast_path_acceptance(table, acceptance_log):
    _record(acceptance_log, V.fast_path_acceptance(table, SCALE))


def test_criterion_03_table_memory(table, acceptance_log):
    _record(acceptance_log, V.table_memory(table))


def test_criterion_04_relative_speed(table, acceptance_log):
    checks, _ = V.relative_speed(table, SCALE)
    _record(acceptance_log, checks)


def test_criterion_05_semifinite_histogram(table, acceptance_log):
    checks, _ = V.histogram_checks("fig3", table, SCALE)
    _record(acceptance_log, checks)


def test_criterion_06_finite_histogram(table, acceptance_log):
    checks, _ = V.histogram_checks("fig4", table, SCALE)
    _record(acceptance_log, checks)


def test_criterion_07_sminus_rate_floor(acceptance_log):
    _record(acceptance_log, V.sminus_floor_checks(SCALE))


def test_criterion_08_mplus_regime(acceptance_log):
    _record(acceptance_log, V.mplus_regime(SCALE))


def test_criterion_09_envelope_domination(acceptance_log):
    _record(acceptance_log, V.domination(SCALE))


def test_criterion_10_oracle_vs_empirical(table, acceptance_log):
    _record(acceptance_log, V.oracle_vs_empirical(table, SCALE))


def test_criterion_11_bivariate_chi2(table, acceptance_log):
    _record(acceptance_log, V.bivariate_exactness(table, SCALE))


def test_criterion_12_multivariate_chains(table, acceptance_log):
    _record(acceptance_log, V.multivariate_chains(table, SCALE))


def test_criterion_13_numerical_stability(table, acceptance_log):
    _record(acceptance_log, V.stability(table))
