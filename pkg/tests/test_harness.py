import json
import math

import pytest

from confsep.harness import (
    BoundCheck,
    SweepConfig,
    SweepReport,
    binomial_margin,
    emit_report,
    read_report_csv,
    report_columns,
    run_coverage_suite,
    run_dkw_suite,
    run_joint_bound_suite,
    run_poison_sweep,
    run_rarity_suite,
)
from confsep.synth import MixtureSpec

SMALL = MixtureSpec(num_classes=3, dim=8)


@pytest.fixture(scope="module")
def small_report():
    cfg = SweepConfig(spec=SMALL, n_train=150, n_holdout_clean=60, n_holdout_poison=60,
                      poison_rates=(0.0, 0.3), thresholds=(0.1, 0.05), seed=4)
    return run_poison_sweep(cfg)


def test_margin_formula():
    assert binomial_margin(0.9, 2000) == pytest.approx(3 * math.sqrt(0.09 / 2000))
    assert binomial_margin(0.99, 5000) == pytest.approx(0.0042, abs=1e-4)


def test_coverage_suite_passes():
    check = run_coverage_suite(SMALL, 50, 0.1, 300, seed=1)
    assert check.passed and check.observed >= 0.9 - binomial_margin(0.9, 300)


def test_coverage_degenerate_single_class():
    spec = MixtureSpec(num_classes=2, dim=2, class_weights=(1 - 1e-9, 1e-9))
    check = run_coverage_suite(spec, 20, 0.5, 200, seed=2)
    assert check.passed


def test_coverage_failure_path():
    check = run_coverage_suite(SMALL, 30, 0.99, 100, seed=1, min_coverage=0.999)
    assert not check.passed


def test_joint_and_rarity_suites():
    joint = run_joint_bound_suite(SMALL, 40, 0.1, 0.1, 200, seed=3)
    assert joint.passed and joint.bound == pytest.approx(0.81 - binomial_margin(0.81, 200))
    rare = run_rarity_suite(SMALL, 40, 0.1, 200, seed=3)
    assert rare.passed and rare.bound == pytest.approx(0.19 + binomial_margin(0.19, 200))


def test_suites_need_repetitions():
    with pytest.raises(ValueError):
        run_coverage_suite(SMALL, 20, 0.1, 50, seed=0)


def test_dkw_suite_small():
    check = run_dkw_suite(SMALL, 50, trials=40, samples=200, reference=20_000, alpha=0.05, seed=0)
    assert 0.0 <= check.observed <= 1.0
    assert check.detail["radius"] == pytest.approx(math.sqrt(math.log(40) / 400))


def test_sweep_shape(small_report):
    assert [r.poison_rate for r in small_report.rows] == [0.0, 0.3]
    assert [r.k for r in small_report.rows] == [0, 45]
    assert len(small_report.bound_checks) == 2 * 2 * 2
    for row in small_report.rows:
        for eps in (0.1, 0.05):
            assert 0 <= row.fnr[eps] <= 1 and 0 <= row.fpr[eps] <= 1


def test_sweep_effective_items_always_detected(small_report):
    for row in small_report.rows:
        for eps in small_report.thresholds:
            assert row.fnr_effective[eps] == 0.0


def test_sweep_is_deterministic(small_report):
    cfg = SweepConfig(spec=SMALL, n_train=150, n_holdout_clean=60, n_holdout_poison=60,
                      poison_rates=(0.0, 0.3), thresholds=(0.1, 0.05), seed=4)
    assert emit_report(run_poison_sweep(cfg), "json") == emit_report(small_report, "json")


@pytest.mark.parametrize(
    "kwargs",
    [
        {"poison_rates": (0.2, 0.1)},
        {"poison_rates": (1.0,)},
        {"thresholds": (0.01, 0.1)},
        {"thresholds": (0.0,)},
        {"n_holdout_clean": 0},
        {"score_kind": "knn"},
    ],
)
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        SweepConfig(**kwargs)


def test_single_row_report_shape():
    cfg = SweepConfig(spec=SMALL, n_train=40, n_holdout_clean=10, n_holdout_poison=10,
                      poison_rates=(0.1,), thresholds=(0.1,))
    report = run_poison_sweep(cfg)
    lines = emit_report(report, "csv").splitlines()
    assert len(lines) == 2
    assert lines[0].split(",") == report_columns((0.1,))


def test_csv_round_trip(small_report):
    header, rows = read_report_csv(emit_report(small_report, "csv"))
    assert header == report_columns(small_report.thresholds)
    for parsed, row in zip(rows, small_report.rows):
        assert parsed["dataset"] == "synthetic"
        assert parsed["poison_rate_pct"] == pytest.approx(100 * row.poison_rate)
        assert parsed["success_rate_pct"] == pytest.approx(100 * row.success_rate, abs=0.005)
        assert parsed["fpr_pct@0.05"] == pytest.approx(100 * row.fpr[0.05], abs=0.005)


def test_json_schema_and_round_trip(small_report):
    data = json.loads(emit_report(small_report, "json"))
    assert all(isinstance(c["pass"], bool) for c in data["bound_checks"])
    again = SweepReport.from_dict(data)
    assert emit_report(again, "json") == emit_report(small_report, "json")
    assert emit_report(again, "table") == emit_report(small_report, "table")


def test_table_lists_checks(small_report):
    text = emit_report(small_report, "table")
    assert text.count("PASS") + text.count("FAIL") == len(small_report.bound_checks)
    with pytest.raises(ValueError):
        emit_report(small_report, "xml")


def test_bound_check_dict():
    c = BoundCheck("a", 0.5, 0.6, True, {"k": 1})
    assert BoundCheck.from_dict(c.to_dict()) == c
