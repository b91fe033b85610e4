"""
Reflectivity tuning for the KLM gate
Handles the search for NS-gate beamsplitter ratios that maximize the
minimum fidelity of the KLM C-sign gate under ancilla inefficiency.

This module provides functions for:
- The min-fidelity landscape over shifts of (eta1, eta2)
- Optimizing eta2 with eta1 = 1, and jointly optimizing (eta1, eta2)
- The eta1 ridge profile, the crossover scan near unit efficiency
- eta2 optimization along a detector, source or equal-efficiency axis
- The success-probability cost of tuning

Both NS gates always share eta1 and eta2. The inner minimization over
inputs runs on a coarse grid during the outer search; every reported
fidelity is recomputed at full grid density.
"""

# Standard library imports
import logging
from dataclasses import dataclass

# Third-party imports
import numpy as np
import pandas as pd
from scipy.optimize import minimize, minimize_scalar

# Local application imports
from loqc_app.modules.analysis import GRID_DENSITY, SweepAxis, min_fidelity
from loqc_app.modules.exceptions import NearZeroTraceError, ParameterRangeError
from loqc_app.modules.gates import (
    IDEAL,
    NOMINAL_ETA1,
    NOMINAL_ETA2,
    EfficiencyConfig,
    build_klm,
    run_gate,
)

logger = logging.getLogger(__name__)

# Search defaults
TUNE_GRID_DENSITY = 9
TUNE_TOL = 1e-5
JOINT_SEED_GRID = 9
JOINT_REFINE_SEEDS = 3
LANDSCAPE_STEPS = 21


@dataclass(frozen=True)
class TuneResult:
    """Outcome of one reflectivity optimization.

    success_at_optimum is the basis-averaged success probability of the
    tuned gate; success_nominal_lossless is the ideal KLM success, eta2^2
    at the nominal eta2.
    """

    eff: EfficiencyConfig
    eta1: float
    eta2: float
    min_fidelity: float
    baseline_min_fidelity: float
    success_at_optimum: float
    success_nominal_lossless: float
    success_at_argmin: float = float("nan")


def _klm_min_fidelity(eta1, eta2, eff, grid_density, **search):
    gate = build_klm(float(eta1), float(eta2))
    return min_fidelity(gate, eff, grid_density=grid_density, **search)


def _objective(eff, grid_density, **search):
    """Negated min fidelity for the outer maximization; impossible points score 0."""

    def value(eta1, eta2):
        if not (0.0 <= eta1 <= 1.0 and 0.0 <= eta2 <= 1.0):
            return 0.0
        try:
            return _klm_min_fidelity(eta1, eta2, eff, grid_density, **search).min_fidelity
        except NearZeroTraceError:
            return 0.0

    return value


def baseline(eff: EfficiencyConfig, grid_density: int = GRID_DENSITY, **search):
    """min_fidelity of the KLM gate at the nominal reflectivities."""
    return _klm_min_fidelity(NOMINAL_ETA1, NOMINAL_ETA2, eff, grid_density, **search)


def _result(eff, eta1, eta2, grid_density, baseline_fidelity=None, **search):
    row = _klm_min_fidelity(eta1, eta2, eff, grid_density, **search)
    if baseline_fidelity is None:
        baseline_fidelity = baseline(eff, grid_density, **search).min_fidelity
    return TuneResult(
        eff=eff,
        eta1=float(eta1),
        eta2=float(eta2),
        min_fidelity=row.min_fidelity,
        baseline_min_fidelity=baseline_fidelity,
        success_at_optimum=row.success_avg_basis,
        success_nominal_lossless=NOMINAL_ETA2 ** 2,
        success_at_argmin=row.success_at_argmin,
    )


def landscape(eff: EfficiencyConfig, d_eta1_grid=None, d_eta2_grid=None,
              grid_density: int = TUNE_GRID_DENSITY, **search) -> pd.DataFrame:
    """Min fidelity of build_klm(eta1 + d1, eta2 + d2) over a grid of shifts.

    Points whose reflectivities leave [0, 1], or where success is impossible,
    are NaN.

    Args:
        eff (EfficiencyConfig): Efficiencies.
        d_eta1_grid (Sequence[float], optional): Shifts of eta1; by default
            LANDSCAPE_STEPS points from -eta1 to 1 - eta1.
        d_eta2_grid (Sequence[float], optional): Shifts of eta2, same default.
        grid_density (int): Inner input-grid density.

    Returns:
        pd.DataFrame: Rows indexed by d_eta1, columns by d_eta2.
    """
    if d_eta1_grid is None:
        d_eta1_grid = np.linspace(-NOMINAL_ETA1, 1 - NOMINAL_ETA1, LANDSCAPE_STEPS)
    if d_eta2_grid is None:
        d_eta2_grid = np.linspace(-NOMINAL_ETA2, 1 - NOMINAL_ETA2, LANDSCAPE_STEPS)
    values = np.full((len(d_eta1_grid), len(d_eta2_grid)), np.nan)
    for i, d1 in enumerate(d_eta1_grid):
        for j, d2 in enumerate(d_eta2_grid):
            eta1, eta2 = NOMINAL_ETA1 + d1, NOMINAL_ETA2 + d2
            # tolerate rounding at the [0, 1] edges of the default grid
            eta1 = min(max(eta1, 0.0), 1.0) if -1e-12 < eta1 < 1 + 1e-12 else eta1
            eta2 = min(max(eta2, 0.0), 1.0) if -1e-12 < eta2 < 1 + 1e-12 else eta2
            if not (0.0 <= eta1 <= 1.0 and 0.0 <= eta2 <= 1.0):
                continue
            try:
                values[i, j] = _klm_min_fidelity(eta1, eta2, eff, grid_density, **search).min_fidelity
            except NearZeroTraceError:
                logger.debug("landscape point (%.4f, %.4f) cannot succeed", eta1, eta2)
        logger.info("landscape row %d/%d done", i + 1, len(d_eta1_grid))
    return pd.DataFrame(values, index=pd.Index(np.asarray(d_eta1_grid), name="d_eta1"),
                        columns=pd.Index(np.asarray(d_eta2_grid), name="d_eta2"))


def optimize_eta2(eff: EfficiencyConfig, tol: float = TUNE_TOL,
                  grid_density: int = TUNE_GRID_DENSITY,
                  verify_density: int = GRID_DENSITY, eta1: float = 1.0, **search) -> TuneResult:
    """Maximize min fidelity over eta2 with eta1 held fixed (1 by default).

    Uses bounded Brent search on [0, 1] with absolute tolerance tol.
    """
    value = _objective(eff, grid_density, **search)
    result = minimize_scalar(lambda x: -value(eta1, x), bounds=(0.0, 1.0),
                             method="bounded", options={"xatol": tol})
    logger.info("eta2 optimum at %s: eta2=%.6f (coarse %.6f)", eff, result.x, -result.fun)
    return _result(eff, eta1, result.x, verify_density, **search)


def optimize_joint(eff: EfficiencyConfig, tol: float = TUNE_TOL,
                   grid_density: int = TUNE_GRID_DENSITY,
                   verify_density: int = GRID_DENSITY,
                   seed_grid: int = JOINT_SEED_GRID,
                   refine_seeds: int = JOINT_REFINE_SEEDS, **search) -> TuneResult:
    """Maximize min fidelity over (eta1, eta2) in [0, 1]^2.

    The eta1 = 1 optimum from optimize_eta2, the nominal point and a
    seed_grid x seed_grid grid are scored on the coarse inner grid.
    Nelder-Mead then refines from the eta1 = 1 optimum and from the
    refine_seeds best seeds. Every refined point, the eta1 = 1 optimum and
    the nominal point are re-verified at verify_density, and the best
    verified value wins, ties within 1e-9 going to the largest eta1. The
    result is therefore never below optimize_eta2 or the nominal baseline.
    """
    fixed = optimize_eta2(eff, tol, grid_density, verify_density, **search)
    value = _objective(eff, grid_density, **search)
    axis = np.linspace(0.0, 1.0, seed_grid)
    seeds = [(1.0, fixed.eta2), (NOMINAL_ETA1, NOMINAL_ETA2)] + [(a, b) for a in axis for b in axis]
    scores = np.array([value(a, b) for a, b in seeds])
    order = np.argsort(-scores, kind="stable")
    starts = list(dict.fromkeys([0] + [int(i) for i in order[:refine_seeds]]))

    refined = []
    for index in starts:
        result = minimize(lambda x: -value(x[0], x[1]), np.array(seeds[index]),
                          method="Nelder-Mead", bounds=[(0.0, 1.0), (0.0, 1.0)],
                          options={"xatol": tol, "fatol": 1e-9, "maxiter": 400})
        refined.append(tuple(float(v) for v in np.clip(result.x, 0.0, 1.0)))

    # the coarse inner grid can misrank near-ties, so rank on verified values only
    reference = fixed.baseline_min_fidelity
    verified = [fixed, _result(eff, NOMINAL_ETA1, NOMINAL_ETA2, verify_density, reference, **search)]
    for eta1, eta2 in dict.fromkeys(refined):
        try:
            verified.append(_result(eff, eta1, eta2, verify_density, reference, **search))
        except NearZeroTraceError:
            logger.debug("refined point (%.4f, %.4f) cannot succeed", eta1, eta2)
    best = max(r.min_fidelity for r in verified)
    near = [r for r in verified if r.min_fidelity >= best - 1e-9]
    tuned = max(near, key=lambda r: (r.eta1, -r.eta2))
    logger.info("joint optimum at %s: eta1=%.6f eta2=%.6f F=%.6f",
                eff, tuned.eta1, tuned.eta2, tuned.min_fidelity)
    return tuned


def eta1_profile(eff: EfficiencyConfig, eta1_grid, tol: float = TUNE_TOL,
                 grid_density: int = TUNE_GRID_DENSITY, **search) -> pd.DataFrame:
    """For each eta1, the min fidelity with eta2 optimized (the landscape ridge)."""
    records = []
    for eta1 in eta1_grid:
        if not 0.0 <= eta1 <= 1.0:
            raise ParameterRangeError(f"eta1 must lie in [0, 1], got {eta1}")
        value = _objective(eff, grid_density, **search)
        result = minimize_scalar(lambda x: -value(eta1, x), bounds=(0.0, 1.0),
                                 method="bounded", options={"xatol": tol})
        records.append({"eta1": eta1, "eta2": float(result.x), "min_fidelity": float(-result.fun)})
    return pd.DataFrame.from_records(records, columns=["eta1", "eta2", "min_fidelity"])


TUNE_COLUMNS = ["eta_src", "eta_det", "mode", "eta1", "eta2", "min_fidelity",
                "baseline_fidelity", "success_ratio"]


def tune_frame(results, mode: str) -> pd.DataFrame:
    """TuneResults as rows of the optimization CSV layout."""
    records = [{
        "eta_src": r.eff.eta_src,
        "eta_det": r.eff.eta_det,
        "mode": mode,
        "eta1": r.eta1,
        "eta2": r.eta2,
        "min_fidelity": r.min_fidelity,
        "baseline_fidelity": r.baseline_min_fidelity,
        "success_ratio": r.success_at_optimum / r.success_nominal_lossless,
    } for r in results]
    return pd.DataFrame.from_records(records, columns=TUNE_COLUMNS)


def crossover_scan(grid, tol: float = TUNE_TOL, grid_density: int = TUNE_GRID_DENSITY,
                   verify_density: int = GRID_DENSITY, include_joint: bool = True,
                   **joint) -> pd.DataFrame:
    """Compare nominal, eta1=1 and jointly tuned gates at equal efficiencies.

    Each efficiency gives an "eta2" row (eta1 fixed at 1) and, unless
    include_joint is False, a "joint" row; both carry the nominal gate's
    value as baseline_fidelity. The frame's attrs["crossover"] holds the
    efficiency where the eta1=1 strategy stops beating the nominal gate
    (linear interpolation), or None.
    """
    fixed, frames = [], []
    for efficiency in grid:
        eff = EfficiencyConfig(efficiency, efficiency)
        fixed.append(optimize_eta2(eff, tol, grid_density, verify_density))
        frames.append(tune_frame([fixed[-1]], "eta2"))
        if include_joint:
            tuned = optimize_joint(eff, tol, grid_density, verify_density, **joint)
            frames.append(tune_frame([tuned], "joint"))
    frame = pd.concat(frames, ignore_index=True)
    gains = [r.min_fidelity - r.baseline_min_fidelity for r in fixed]
    crossover = None
    for i in range(len(gains) - 1):
        if gains[i] > 0 >= gains[i + 1]:
            fraction = gains[i] / (gains[i] - gains[i + 1])
            crossover = float(grid[i] + fraction * (grid[i + 1] - grid[i]))
            break
    frame.attrs["crossover"] = crossover
    logger.info("eta1=1 crossover efficiency: %s", crossover)
    return frame


def eta2_scan(grid, axis: SweepAxis = SweepAxis.JOINT_EQUAL, tol: float = TUNE_TOL,
              grid_density: int = TUNE_GRID_DENSITY,
              verify_density: int = GRID_DENSITY) -> pd.DataFrame:
    """optimize_eta2 at every efficiency of grid along one axis.

    Args:
        grid (Sequence[float]): Efficiencies.
        axis (SweepAxis): DETECTOR and SOURCE vary one efficiency with the
            other at 1; JOINT_EQUAL sets both to the grid value.

    Returns:
        pd.DataFrame: One "eta2" row per grid point in TUNE_COLUMNS layout,
        with the nominal gate's value as baseline_fidelity.
    """
    results = []
    for efficiency in grid:
        results.append(optimize_eta2(axis.efficiencies(efficiency), tol, grid_density, verify_density))
        logger.info("eta2 scan along %s: %d/%d done", axis.value, len(results), len(grid))
    return tune_frame(results, "eta2")


def success_cost(grid, tol: float = TUNE_TOL, grid_density: int = TUNE_GRID_DENSITY,
                 verify_density: int = GRID_DENSITY) -> pd.DataFrame:
    """Success of the eta1=1 optimum relative to the nominal lossless success.

    Efficiencies are equal for source and detector. The ratio uses the
    success averaged over the four logical basis inputs.
    """
    return eta2_scan(grid, SweepAxis.JOINT_EQUAL, tol, grid_density, verify_density)


def decoupled_detector_deviation(eta2: float, eta_det_zero: float, eff: EfficiencyConfig = IDEAL,
                                 inputs=None) -> float:
    """Largest output change when only the zero-photon detectors of an eta1=1 gate lose photons.

    With eta1 = 1 the vacuum ancillas never meet the signal, so the
    efficiency of the detectors expecting no photon cannot matter.

    Returns:
        float: Max deviation over output matrix elements and success probabilities.
    """
    gate = build_klm(1.0, eta2)
    pattern = gate.detection[0]
    overrides = {m: eta_det_zero for m, c in zip(pattern.modes, pattern.counts) if c == 0}
    if inputs is None:
        inputs = list(np.eye(4)) + [np.full(4, 0.5)]
    deviation = 0.0
    for amplitudes in inputs:
        psi = gate.logical_state(amplitudes)
        reference = run_gate(gate, psi, eff)
        varied = run_gate(gate, psi, eff, detector_overrides=overrides)
        deviation = max(
            deviation,
            float(np.max(np.abs(varied.rho_out.matrix - reference.rho_out.matrix))),
            abs(varied.success_probability - reference.success_probability),
        )
    return deviation
