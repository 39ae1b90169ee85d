import math

import numpy as np
import pandas as pd
import pytest

from app.core.errors import BudgetExceeded, InvalidInput, WindowOverflow
from app.core.hilbert import basis_state
from app.services.generators import Shift, U2At01
from app.services.verification import (
    CSV_COLUMNS,
    FiniteFamily,
    bench,
    check_trajectory,
    complement_drift,
    negative_control,
    net_coverage_oracle,
    op_count_slope,
    random_density,
    random_state,
    random_unitary,
    universality_sweep,
)
from app.services.kraus_synthesis import steer_density


def test_random_state_is_unit_and_reproducible():
    first = random_state(6, 17)
    second = random_state(6, 17)

    assert first.norm == pytest.approx(1.0, abs=1e-14)
    np.testing.assert_array_equal(first.amps, second.amps)
    assert not np.array_equal(first.amps, random_state(6, 18).amps)


def test_random_state_second_moment():
    draws = np.array([random_state(4, seed).amps for seed in range(2000)])

    mean_weights = np.mean(np.abs(draws) ** 2, axis=0)

    np.testing.assert_allclose(mean_weights, 0.25, atol=0.02)


def test_random_unitary_is_unitary():
    for n in (1, 2, 5, 9):
        u = random_unitary(n, n)
        np.testing.assert_allclose(u.conj().T @ u, np.eye(n), atol=1e-12)


def test_random_unitary_trace_moment():
    traces = np.array([abs(np.trace(random_unitary(3, seed))) ** 2 for seed in range(2000)])

    assert traces.mean() == pytest.approx(1.0, abs=0.1)


def test_random_density_is_valid():
    for n in (1, 3, 7):
        rho = random_density(n, 40 + n)
        assert rho.hermitian_residual() == 0.0
        assert rho.trace.real == pytest.approx(1.0, abs=1e-12)
        assert rho.eigenvalues()[0] >= -1e-12


@pytest.mark.parametrize("seed", [-1, 1.5, True])
def test_random_draws_reject_bad_seed(seed):
    with pytest.raises(InvalidInput):
        random_state(3, seed)


def test_random_draws_reject_bad_dimension():
    with pytest.raises(InvalidInput):
        random_density(0, 1)


def test_u2_only_words_have_no_shifts():
    word = FiniteFamily.u2_only().random_word(50, 3)

    assert len(word) == 50
    assert all(isinstance(op, U2At01) for op in word)


def test_full_family_words_mix_generators():
    word = FiniteFamily.full().random_word(200, 3)

    assert word.shift_count > 0 and word.u2_count > 0
    assert {op.k for op in word if isinstance(op, Shift)} <= {-1, 1}


def test_state_sweep_passes():
    result = universality_sweep("state", [2, 4, 8], 4, 1e-9, seed=0)

    assert result.passed
    assert result.max_error <= 1e-9
    assert list(result.rows.columns) == CSV_COLUMNS
    assert len(result.rows) == 12
    assert result.rows["wall_time_s"].eq(0.0).all()


def test_sweep_rows_are_ordered_and_reproducible():
    first = universality_sweep("state", [3, 2], 3, 1e-9, seed=5, max_workers=3)
    second = universality_sweep("state", [3, 2], 3, 1e-9, seed=5, max_workers=1)

    assert list(zip(first.rows["dim"], first.rows["trial"])) == [
        (2, 0), (2, 1), (2, 2), (3, 0), (3, 1), (3, 2),
    ]
    pd.testing.assert_frame_equal(first.rows, second.rows)


def test_density_sweep_passes_with_intermediate_checks():
    result = universality_sweep("density", [2, 4], 2, 1e-9, seed=1, check_intermediates=True)

    assert result.passed
    summary = result.as_dict()
    assert summary["kind"] == "density"
    assert summary["failures"] == []
    assert len(summary["rows"]) == 4


def test_sweep_reports_failures_with_seed():
    result = universality_sweep("state", [4], 2, 1e-9, seed=2)
    result.eps = 0.0
    result.rows.loc[0, "final_error"] = 1e-3

    assert not result.passed
    assert result.failures[0]["seed"] == [2, 4, 0]


@pytest.mark.parametrize(
    "kind, dims, trials",
    [("qubit", [2], 1), ("state", [], 1), ("state", [65], 1), ("density", [17], 1), ("state", [2], 0)],
)
def test_sweep_validates_arguments(kind, dims, trials):
    with pytest.raises(InvalidInput):
        universality_sweep(kind, dims, trials, 1e-9, seed=0)


def test_check_trajectory_counts_items():
    rho = random_density(3, 4)
    sigma = random_density(2, 5)
    program, _ = steer_density(rho, sigma, 1e-9)

    assert check_trajectory(rho, program) == len(program)


def test_negative_control_passes():
    report = negative_control(7, 200, seed=0)

    assert report.u2_only_fidelity == 0.0
    assert report.complement_drift <= 1e-12
    assert report.full_family_fidelity >= 1 - 1e-12
    assert report.full_family_ops == 1
    assert report.passed
    assert report.as_dict()["passed"] is True


def test_negative_control_long_word():
    report = negative_control(2, 10_000, seed=11)

    assert report.u2_only_fidelity == 0.0
    assert report.complement_drift <= 1e-12
    assert report.full_family_fidelity == pytest.approx(1.0, abs=1e-12)


def test_negative_control_caps_target_window():
    with pytest.raises(WindowOverflow):
        negative_control(10**9, 10, seed=0)
    with pytest.raises(WindowOverflow):
        negative_control(40, 10, seed=0, window_cap=16)


def test_negative_control_with_negative_target():
    report = negative_control(-3, 100, seed=4)

    assert report.passed


@pytest.mark.parametrize("target", [0, 1, 2.5])
def test_negative_control_rejects_pair_targets(target):
    with pytest.raises(InvalidInput):
        negative_control(target, 10, seed=0)


def test_complement_drift_catches_shifts():
    probe = random_state(4, 3)

    assert complement_drift(probe, FiniteFamily.u2_only().random_word(20, 1)) <= 1e-12
    assert complement_drift(probe, [Shift(1)]) > 1e-3


def test_coverage_radius_shrinks_with_word_length():
    table = net_coverage_oracle(8, 3)

    assert table.radii[0] == pytest.approx(math.pi / 2, abs=0.05)
    assert table.radii[1] < table.radii[0]
    assert table.monotone
    assert table.orbit_sizes == sorted(table.orbit_sizes)


def test_coverage_regression_grid_16():
    table = net_coverage_oracle(16, 4)

    assert table.monotone
    assert table.radii[1] < table.radii[0]
    assert table.radii[-1] == pytest.approx(0.042462359309274104, abs=1e-9)
    assert table.orbit_sizes == [1, 16, 114, 690, 4146]
    assert len(table.to_frame()) == 5


def test_coverage_is_reproducible():
    first = net_coverage_oracle(6, 3, samples=128)
    second = net_coverage_oracle(6, 3, samples=128)

    assert first.radii == second.radii
    assert first.orbit_sizes == second.orbit_sizes


def test_coverage_rejects_unsupported_arguments():
    with pytest.raises(InvalidInput):
        net_coverage_oracle(8, 2, dim=3)
    with pytest.raises(InvalidInput):
        net_coverage_oracle(0, 2)
    with pytest.raises(InvalidInput):
        net_coverage_oracle(8, 7)


def test_coverage_node_cap():
    with pytest.raises(BudgetExceeded):
        net_coverage_oracle(16, 3, node_cap=100)


def test_bench_rows_and_slope():
    frame = bench([2, 4, 8], 1e-9, 2, seed=0)

    assert list(frame.columns) == CSV_COLUMNS
    assert len(frame) == 6
    assert (frame["final_error"] <= 1e-9).all()
    assert 2.0 <= op_count_slope(frame) <= 6.0


def test_bench_is_deterministic():
    first = bench([2, 5], 1e-9, 3, seed=9, max_workers=4)
    second = bench([2, 5], 1e-9, 3, seed=9, max_workers=2)

    pd.testing.assert_frame_equal(first, second)


def test_bench_density_kind():
    frame = bench([2, 3], 1e-9, 2, seed=1, kind="density")

    assert len(frame) == 4
    assert (frame["final_error"] <= 1e-9).all()
