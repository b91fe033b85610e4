import math

import numpy as np
import pytest

from loqc_app.modules.analysis import SweepAxis
from loqc_app.modules.exceptions import ParameterRangeError
from loqc_app.modules.gates import IDEAL, NOMINAL_ETA1, NOMINAL_ETA2, EfficiencyConfig
from loqc_app.modules.tuner import (
    TUNE_COLUMNS,
    TuneResult,
    baseline,
    crossover_scan,
    decoupled_detector_deviation,
    eta1_profile,
    eta2_scan,
    landscape,
    optimize_eta2,
    optimize_joint,
    success_cost,
    tune_frame,
)

FAST = {"grid_density": 5, "refine_seeds": 1}


def test_baseline_is_perfect_without_loss():
    assert baseline(IDEAL, **FAST).min_fidelity == pytest.approx(1, abs=1e-9)


def test_landscape_origin_is_the_nominal_gate():
    frame = landscape(IDEAL, [0.0], [0.0], **FAST)

    assert frame.loc[0.0, 0.0] == pytest.approx(1, abs=1e-9)
    assert frame.index.name == "d_eta1"
    assert frame.columns.name == "d_eta2"


def test_landscape_marks_out_of_range_reflectivities():
    frame = landscape(IDEAL, [0.0, 0.5], [0.0], **FAST)

    assert math.isnan(frame.loc[0.5, 0.0])


def test_landscape_off_nominal_points_lose_fidelity():
    frame = landscape(EfficiencyConfig(1.0, 0.9), [-0.1, 0.0], [0.0, 0.05], **FAST)

    assert frame.shape == (2, 2)
    assert not frame.isna().any().any()
    assert (frame.to_numpy() < 1).all()


def test_default_landscape_axes_reach_the_unit_interval_edges():
    d_eta1 = np.linspace(-NOMINAL_ETA1, 1 - NOMINAL_ETA1, 21)

    assert NOMINAL_ETA1 + d_eta1[0] == pytest.approx(0)
    assert NOMINAL_ETA1 + d_eta1[-1] == pytest.approx(1)


@pytest.mark.parametrize("eta2, eta_det_zero", [(NOMINAL_ETA2, 0.5), (0.3, 0.0)])
def test_zero_photon_detector_decouples_when_eta1_is_one(eta2, eta_det_zero):
    assert decoupled_detector_deviation(eta2, eta_det_zero) < 1e-12


def test_decoupling_holds_with_lossy_sources():
    deviation = decoupled_detector_deviation(0.2, 0.3, EfficiencyConfig(0.9, 0.95))

    assert deviation < 1e-12


def test_optimize_eta2_keeps_eta1_at_one():
    result = optimize_eta2(EfficiencyConfig(0.95, 1.0), tol=1e-3, verify_density=5, **FAST)

    assert result.eta1 == 1.0
    assert 0 < result.eta2 < 1
    assert 0 < result.min_fidelity < 1
    assert result.success_nominal_lossless == pytest.approx(NOMINAL_ETA2 ** 2)


def test_eta1_profile_rejects_out_of_range_eta1():
    with pytest.raises(ParameterRangeError):
        eta1_profile(IDEAL, [1.5])


def test_tune_frame_layout():
    result = TuneResult(
        eff=EfficiencyConfig(0.9, 0.9),
        eta1=1.0,
        eta2=0.2,
        min_fidelity=0.85,
        baseline_min_fidelity=0.84,
        success_at_optimum=0.0128,
        success_nominal_lossless=0.0512,
    )

    frame = tune_frame([result], "eta2")

    assert list(frame.columns) == TUNE_COLUMNS
    assert frame["mode"][0] == "eta2"
    assert frame["success_ratio"][0] == pytest.approx(0.25)


@pytest.mark.slow
def test_eta2_optimum_at_98_percent_sources():
    result = optimize_eta2(EfficiencyConfig(0.98, 1.0))

    assert result.min_fidelity == pytest.approx(0.956, abs=0.005)
    assert result.min_fidelity >= result.baseline_min_fidelity - 1e-9


@pytest.mark.slow
def test_eta2_optimum_at_80_percent_sources():
    result = optimize_eta2(EfficiencyConfig(0.8, 1.0))

    assert result.min_fidelity == pytest.approx(0.723, abs=0.005)


@pytest.mark.slow
def test_joint_optimum_at_98_percent_sources():
    eff = EfficiencyConfig(0.98, 1.0)

    joint = optimize_joint(eff)
    fixed = optimize_eta2(eff)

    assert joint.min_fidelity == pytest.approx(0.959, abs=0.005)
    assert joint.min_fidelity >= fixed.min_fidelity - 1e-9
    assert joint.eta1 == pytest.approx(0.7703, abs=0.02)
    assert joint.eta2 == pytest.approx(0.1838, abs=0.02)


@pytest.mark.slow
def test_joint_optimum_without_loss_is_perfect():
    result = optimize_joint(IDEAL, seed_grid=3, refine_seeds=1)

    assert result.min_fidelity == pytest.approx(1, abs=1e-9)


@pytest.mark.slow
def test_eta1_one_strategy_stops_paying_off_near_995():
    grid = [round(0.99 + 0.001 * i, 3) for i in range(11)]

    frame = crossover_scan(grid, seed_grid=3, refine_seeds=1)

    assert len(frame) == 2 * len(grid)
    assert list(frame["mode"][:2]) == ["eta2", "joint"]
    assert frame.attrs["crossover"] == pytest.approx(0.995, abs=0.002)


@pytest.mark.slow
def test_optimized_success_stays_above_a_fifth():
    grid = [round(0.8 + 0.02 * i, 2) for i in range(11)]

    frame = success_cost(grid)

    assert (frame["success_ratio"] >= 0.2 - 0.02).all()


@pytest.mark.slow
def test_ridge_fidelity_grows_with_eta1_under_detector_loss():
    eta1_grid = [min(NOMINAL_ETA1 + i * (1 - NOMINAL_ETA1) / 4, 1.0) for i in range(5)]

    profile = eta1_profile(EfficiencyConfig(1.0, 0.9), eta1_grid)

    assert (np.diff(profile["min_fidelity"]) >= -1e-6).all()


@pytest.mark.slow
def test_tuned_gate_stays_above_80_percent_at_90_percent_efficiency():
    result = optimize_joint(EfficiencyConfig(0.9, 0.9))

    assert result.min_fidelity >= 0.8


def test_joint_never_falls_below_the_eta2_optimum():
    eff = EfficiencyConfig(0.8, 1.0)
    settings = {"tol": 1e-3, "grid_density": 5, "verify_density": 5}

    joint = optimize_joint(eff, seed_grid=3, refine_seeds=1, **settings)
    fixed = optimize_eta2(eff, **settings)

    assert joint.min_fidelity >= fixed.min_fidelity - 1e-9
    assert joint.min_fidelity >= joint.baseline_min_fidelity - 1e-9


@pytest.mark.parametrize("axis, expected", [
    (SweepAxis.SOURCE, (0.95, 1.0)),
    (SweepAxis.DETECTOR, (1.0, 0.95)),
    (SweepAxis.JOINT_EQUAL, (0.95, 0.95)),
])
def test_eta2_scan_follows_the_axis(axis, expected):
    frame = eta2_scan([0.95], axis, tol=1e-3, grid_density=5, verify_density=5)

    assert list(frame.columns) == TUNE_COLUMNS
    assert len(frame) == 1
    assert (frame["eta_src"][0], frame["eta_det"][0]) == expected
    assert frame["mode"][0] == "eta2"
    assert frame["eta1"][0] == 1.0


def test_crossover_scan_can_skip_the_joint_rows():
    frame = crossover_scan([0.95, 0.96], tol=1e-3, grid_density=5, verify_density=5,
                           include_joint=False)

    assert list(frame["mode"]) == ["eta2", "eta2"]
    assert list(frame["eta_det"]) == [0.95, 0.96]


@pytest.mark.slow
def test_joint_gains_little_over_eta2_at_80_percent_sources():
    eff = EfficiencyConfig(0.8, 1.0)

    joint = optimize_joint(eff)
    fixed = optimize_eta2(eff)

    assert joint.min_fidelity >= fixed.min_fidelity - 1e-9
    assert joint.min_fidelity - fixed.min_fidelity < 0.001
    assert joint.eta1 >= 0.95
    assert joint.eta2 == pytest.approx(0.1123, abs=0.02)


@pytest.mark.slow
def test_eta2_tuning_beats_the_nominal_gate_at_equal_efficiencies():
    frame = eta2_scan([0.8, 0.85, 0.9, 0.95, 0.99], SweepAxis.JOINT_EQUAL)

    assert (frame["min_fidelity"] >= frame["baseline_fidelity"] - 1e-9).all()
