"""
Fidelity analysis for the C-sign gate analysis app
Handles the real-amplitude two-qubit input family, minimum-fidelity search
and efficiency sweeps.

This module provides functions for:
- Building inputs and ideal outputs from three angles (optionally two phases)
- Fidelity and success probability of one gate at one input
- Minimum fidelity over the input family (grid search plus Nelder-Mead)
- Sweeps over detector, source or equal efficiencies, as rows or DataFrames
"""

# Standard library imports
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum

# Third-party imports
import numpy as np
import pandas as pd
from scipy.optimize import minimize

# Local application imports
from loqc_app.modules.exceptions import NearZeroTraceError, SimulationError
from loqc_app.modules.fock_core import TRACE_THRESHOLD, PureState, enumerate_basis, fidelity
from loqc_app.modules.gates import (
    CSIGN_LOGICAL,
    EfficiencyConfig,
    GateSpec,
    gate_channel,
    run_gate,
)

logger = logging.getLogger(__name__)

# Search defaults
GRID_DENSITY = 17
REFINE_SEEDS = 5
FIDELITY_TOL = 1e-7
TIE_TOL = 1e-9
BOUNDARY_TOL = 1e-6


class SweepAxis(Enum):
    DETECTOR = "detector"
    SOURCE = "source"
    JOINT_EQUAL = "joint"

    def efficiencies(self, value: float) -> EfficiencyConfig:
        if self is SweepAxis.DETECTOR:
            return EfficiencyConfig(1.0, value)
        if self is SweepAxis.SOURCE:
            return EfficiencyConfig(value, 1.0)
        return EfficiencyConfig(value, value)


@dataclass(frozen=True)
class InputParams:
    """Angles of the input family, with optional relative phases.

    Attributes:
        alpha, beta, gamma (float): Angles in [0, pi].
        phi_01, phi_11 (float): Phases on the |01> and |11> amplitudes,
            zero unless the extended search is requested.
    """

    alpha: float
    beta: float
    gamma: float
    phi_01: float = 0.0
    phi_11: float = 0.0

    def as_tuple(self):
        return (self.alpha, self.beta, self.gamma, self.phi_01, self.phi_11)


@dataclass(frozen=True)
class SweepRow:
    eta_src: float
    eta_det: float
    min_fidelity: float
    argmin: InputParams
    success_at_argmin: float
    success_avg_basis: float
    boundary: bool = False


def input_amplitudes(params) -> np.ndarray:
    """Logical amplitudes in (|00>, |01>, |10>, |11>) order, (control, target).

    Accepts InputParams or an array of shape (..., 3) or (..., 5).
    """
    if isinstance(params, InputParams):
        params = np.array(params.as_tuple())
    params = np.asarray(params, dtype=float)
    alpha, beta, gamma = params[..., 0], params[..., 1], params[..., 2]
    amplitudes = np.stack([
        np.cos(alpha),
        np.sin(alpha) * np.sin(beta) * np.cos(gamma),
        np.sin(alpha) * np.cos(beta),
        np.sin(alpha) * np.sin(beta) * np.sin(gamma),
    ], axis=-1).astype(complex)
    if params.shape[-1] == 5:
        amplitudes[..., 1] *= np.exp(1j * params[..., 3])
        amplitudes[..., 3] *= np.exp(1j * params[..., 4])
    return amplitudes


def input_state(params: InputParams, gate: GateSpec = None) -> PureState:
    """The normalized input cos a|00> + sin a cos b|10> + sin a sin b cos g|01> + ...

    Single-rail by default; pass a gate to encode on its register (dual rail).
    """
    amplitudes = input_amplitudes(params)
    if gate is not None:
        return gate.logical_state(amplitudes)
    return PureState.from_occupations(enumerate_basis(2, 2), dict(zip(CSIGN_LOGICAL, amplitudes)))


def expected_output(params: InputParams, gate: GateSpec = None) -> PureState:
    """input_state with the |11> amplitude negated."""
    amplitudes = input_amplitudes(params) * np.array([1, 1, 1, -1])
    if gate is not None:
        return gate.logical_state(amplitudes)
    return PureState.from_occupations(enumerate_basis(2, 2), dict(zip(CSIGN_LOGICAL, amplitudes)))


def _check_two_qubit(gate):
    if len(gate.logical_states) != 4:
        raise SimulationError(f"{gate.name} is not a two-qubit gate")


def fidelity_at(gate: GateSpec, eff: EfficiencyConfig, params: InputParams,
                trace_threshold: float = TRACE_THRESHOLD):
    """Run the gate on one input and compare with the ideal C-sign output.

    Returns:
        tuple: (fidelity, success probability)

    Raises:
        NearZeroTraceError: If the accepted patterns cannot occur.
    """
    _check_two_qubit(gate)
    outcome = run_gate(gate, input_state(params, gate), eff, trace_threshold=trace_threshold)
    return fidelity(outcome.rho_out, expected_output(params, gate)), outcome.success_probability


def angle_grid(density: int = GRID_DENSITY) -> np.ndarray:
    """All (alpha, beta, gamma) on a regular grid over [0, pi]^3, lexicographic."""
    axis = np.linspace(0.0, math.pi, density)
    mesh = np.meshgrid(axis, axis, axis, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def _register_inputs(gate, params):
    return input_amplitudes(params) @ gate.logical_matrix().T


def basis_fidelities(gate: GateSpec, eff: EfficiencyConfig, channel=None) -> pd.DataFrame:
    """Fidelity and success for each logical basis input.

    Returns:
        pd.DataFrame: Columns input, fidelity, success.
    """
    _check_two_qubit(gate)
    channel = channel or gate_channel(gate, eff)
    fidelities, successes = channel.evaluate(gate.logical_matrix().T)
    labels = ["|" + "".join(map(str, occupation)) + ">" for occupation in CSIGN_LOGICAL]
    return pd.DataFrame({"input": labels, "fidelity": fidelities, "success": successes})


def min_fidelity(gate: GateSpec, eff: EfficiencyConfig, grid_density: int = GRID_DENSITY,
                 refine_seeds: int = REFINE_SEEDS, tol: float = FIDELITY_TOL,
                 phases: bool = False, channel=None,
                 trace_threshold: float = TRACE_THRESHOLD) -> SweepRow:
    """Worst-case fidelity over the input family.

    A deterministic grid over [0, pi]^3 is evaluated first; Nelder-Mead then
    refines from the refine_seeds lowest grid points. The smallest value
    found wins, ties going to the lexicographically smallest angles. With
    phases=True the refinement also varies two relative phases in [0, 2 pi].

    Args:
        gate (GateSpec): Two-qubit gate.
        eff (EfficiencyConfig): Efficiencies.
        grid_density (int): Grid points per angle.
        refine_seeds (int): Number of grid points refined.
        tol (float): Nelder-Mead tolerance in fidelity and angle.
        phases (bool): Extend the search with relative phases.
        channel (GateChannel, optional): Precomputed channel for gate and eff.
        trace_threshold (float): Smallest acceptable success probability.

    Returns:
        SweepRow: Minimum, its argmin and the success probabilities.

    Raises:
        NearZeroTraceError: If some input has no chance of success.
    """
    _check_two_qubit(gate)
    channel = channel or gate_channel(gate, eff)

    def evaluate(params):
        values, successes = channel.evaluate(_register_inputs(gate, params), trace_threshold)
        if np.isnan(values).any():
            raise NearZeroTraceError(float(np.min(successes)), trace_threshold)
        return values, successes

    grid = angle_grid(grid_density)
    if phases:
        grid = np.hstack([grid, np.zeros((len(grid), 2))])
    values, _ = evaluate(grid)
    order = np.argsort(values, kind="stable")
    candidates = [(float(values[order[0]]), tuple(grid[order[0]]))]

    bounds = [(0.0, math.pi)] * 3 + ([(0.0, 2 * math.pi)] * 2 if phases else [])
    for index in order[:refine_seeds]:
        result = minimize(
            lambda x: float(evaluate(x[None, :])[0][0]),
            grid[index],
            method="Nelder-Mead",
            bounds=bounds,
            options={"xatol": tol, "fatol": tol, "maxiter": 4000},
        )
        candidates.append((float(result.fun), tuple(np.clip(result.x, *np.array(bounds).T))))

    best_value = min(value for value, _ in candidates)
    best_point = min(point for value, point in candidates if value <= best_value + TIE_TOL)
    best_value = float(evaluate(np.array(best_point)[None, :])[0][0])
    _, success_at = evaluate(np.array(best_point)[None, :])
    _, basis_success = channel.evaluate(gate.logical_matrix().T, trace_threshold)

    angles = np.array(best_point[:3])
    boundary = bool(np.any((angles < BOUNDARY_TOL) | (angles > math.pi - BOUNDARY_TOL)))
    argmin = InputParams(*best_point) if phases else InputParams(*best_point[:3])
    logger.debug("%s at %s: min fidelity %.9f at %s", gate.name, eff, best_value, argmin)
    return SweepRow(
        eta_src=eff.eta_src,
        eta_det=eff.eta_det,
        min_fidelity=float(np.clip(best_value, 0.0, 1.0)),
        argmin=argmin,
        success_at_argmin=float(success_at[0]),
        success_avg_basis=float(np.mean(basis_success)),
        boundary=boundary,
    )


def efficiency_grid(start: float, stop: float, step: float) -> list:
    """Inclusive grid from start to stop, rounded to suppress float drift."""
    if step <= 0:
        raise SimulationError(f"grid step must be positive, got {step}")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + i * step, 12) for i in range(count)]


def sweep_efficiency(gate: GateSpec, axis: SweepAxis, grid, jobs: int = 1, **search) -> list:
    """min_fidelity along one efficiency axis, rows in grid order.

    DETECTOR varies eta_det with ideal sources, SOURCE the converse and
    JOINT_EQUAL sets both equal. Extra keyword arguments go to min_fidelity.
    """
    axis = SweepAxis(axis)
    for value in grid:
        if not 0.0 <= value <= 1.0:
            raise SimulationError(f"efficiency {value} outside [0, 1]")

    def point(value):
        try:
            row = min_fidelity(gate, axis.efficiencies(value), **search)
        except NearZeroTraceError as e:
            raise NearZeroTraceError(e.trace, e.threshold, f"{gate.name} {axis.value}={value}") from e
        logger.info("%s %s=%.4f: min fidelity %.6f", gate.name, axis.value, value, row.min_fidelity)
        return row

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(point, grid))
    return [point(value) for value in grid]


def axis_value(row: SweepRow, axis: SweepAxis) -> float:
    return row.eta_src if SweepAxis(axis) is SweepAxis.SOURCE else row.eta_det


def find_crossover(rows_a, rows_b, axis: SweepAxis = SweepAxis.DETECTOR):
    """Efficiency where two min-fidelity curves on a shared grid cross.

    Returns the first sign change of a - b, linearly interpolated, or None.
    """
    xs = [axis_value(row, axis) for row in rows_a]
    if xs != [axis_value(row, axis) for row in rows_b]:
        raise SimulationError("crossover needs both sweeps on the same grid")
    diffs = [a.min_fidelity - b.min_fidelity for a, b in zip(rows_a, rows_b)]
    for i in range(len(diffs) - 1):
        if diffs[i] == 0:
            return xs[i]
        if diffs[i] * diffs[i + 1] < 0:
            fraction = diffs[i] / (diffs[i] - diffs[i + 1])
            return xs[i] + fraction * (xs[i + 1] - xs[i])
    return None


SWEEP_COLUMNS = ["eta_src", "eta_det", "min_fidelity", "alpha", "beta", "gamma",
                 "success_argmin", "success_basis_avg"]


def sweep_frame(rows) -> pd.DataFrame:
    """Flatten SweepRows into the sweep CSV column layout."""
    records = [{
        "eta_src": row.eta_src,
        "eta_det": row.eta_det,
        "min_fidelity": row.min_fidelity,
        "alpha": row.argmin.alpha,
        "beta": row.argmin.beta,
        "gamma": row.argmin.gamma,
        "success_argmin": row.success_at_argmin,
        "success_basis_avg": row.success_avg_basis,
    } for row in rows]
    return pd.DataFrame.from_records(records, columns=SWEEP_COLUMNS)
