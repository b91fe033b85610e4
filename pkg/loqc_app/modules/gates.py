"""
Gate constructions for the C-sign gate analysis app
Builds the NS gate and the KLM, Knill and PJF C-sign gates and runs them
under ancilla source and detector inefficiency.

This module provides functions for:
- GateSpec construction for each gate, with frozen wiring
- run_gate: the density-operator pipeline (prepare, lose, interfere, detect)
- gate_channel: the same conditional map in operator-sum form, for speed
- solve_corrections / ideal_truth_check: validation against ideal operation
- build_dual_rail: the dual-rail variant with spectator modes

Mode layout: the logical register always occupies the leading modes, at the
input and at the output. Ancilla modes follow and are all measured or traced.
"""

# Standard library imports
import itertools
import logging
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

# Third-party imports
import numpy as np
from scipy import sparse

# Local application imports
from loqc_app.modules.exceptions import (
    BasisMismatchError,
    InvalidModeError,
    NearZeroTraceError,
    ParameterRangeError,
    SimulationError,
    TruncationError,
)
from loqc_app.modules.fock_core import (
    TRACE_THRESHOLD,
    DensityOperator,
    PureState,
    drop_mode,
    enumerate_basis,
    fidelity,
    normalize,
    project_number,
    tensor,
)
from loqc_app.modules.optics import (
    BeamsplitterSpec,
    Convention,
    LossChannel,
    LossMethod,
    Orientation,
    Permutation,
    apply_elements,
    apply_loss,
    circuit_operator,
    mode_kraus_operators,
)

logger = logging.getLogger(__name__)

NOMINAL_ETA1 = 5 - 3 * math.sqrt(2)
NOMINAL_ETA2 = (3 - math.sqrt(2)) / 7
KNILL_ETA1 = 1 / 3
KNILL_ETA2 = (3 + math.sqrt(6)) / 6
IDEAL_FIDELITY_TOL = 1e-9
SUCCESS_TOL = 1e-9

CSIGN_LOGICAL = ((0, 0), (0, 1), (1, 0), (1, 1))
CSIGN_SIGNS = (1, 1, 1, -1)


@dataclass(frozen=True)
class EfficiencyConfig:
    """Ancilla source and detector efficiencies, both in [0, 1]."""

    eta_src: float = 1.0
    eta_det: float = 1.0

    def __post_init__(self):
        for name in ("eta_src", "eta_det"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ParameterRangeError(f"{name} must lie in [0, 1], got {value}")


IDEAL = EfficiencyConfig(1.0, 1.0)


@dataclass(frozen=True)
class DetectionPattern:
    """One accepted detector outcome.

    Attributes:
        modes (tuple): Detected modes.
        counts (tuple): Photon count required on each detected mode.
        phase_flips (tuple): Z correction per qubit mode in this branch.
    """

    modes: tuple
    counts: tuple
    phase_flips: tuple = ()

    def __post_init__(self):
        if len(self.modes) != len(self.counts):
            raise InvalidModeError("detection modes and counts differ in length")
        if any(c < 0 for c in self.counts):
            raise SimulationError(f"negative photon count in {self.counts}")


@dataclass(frozen=True, eq=False)
class GateSpec:
    """Immutable description of a post-selected linear-optical gate.

    Attributes:
        name (str): Gate identifier.
        register_modes (int): Number of leading modes holding the logical register.
        register_photons (int): Photon bound of the register basis.
        qubit_modes (tuple): Register modes that receive Z corrections
            (control, target) or the single NS signal mode.
        logical_states (tuple): Register occupations of the logical basis.
        logical_signs (tuple): Ideal phase applied to each logical state.
        ancilla_prep (PureState): Ancilla state over the trailing modes.
        elements (tuple): Beamsplitters and permutations, in order.
        detection (tuple): Mutually exclusive accepted DetectionPatterns.
        nominal_success (float): Ideal success probability.
        undetected_modes (tuple): Ancilla modes traced without measurement.
        parameters (tuple): (name, value) pairs describing the build.
    """

    name: str
    register_modes: int
    register_photons: int
    qubit_modes: tuple
    logical_states: tuple
    logical_signs: tuple
    ancilla_prep: PureState
    elements: tuple
    detection: tuple
    nominal_success: float
    undetected_modes: tuple = ()
    parameters: tuple = field(default=())

    def __post_init__(self):
        for element in self.elements:
            if isinstance(element, Permutation) and len(element.order) != self.mode_count:
                raise InvalidModeError(f"{self.name}: permutation size mismatch")
            if max(element.touched_modes) >= self.mode_count:
                raise InvalidModeError(f"{self.name}: element {element} outside circuit")
        if not self.detection:
            raise SimulationError(f"{self.name}: no accepted detection pattern")
        modes = self.detection[0].modes
        if any(p.modes != modes for p in self.detection):
            raise SimulationError(f"{self.name}: patterns must measure the same modes")
        if len({p.counts for p in self.detection}) != len(self.detection):
            raise SimulationError(f"{self.name}: detection patterns are not exclusive")
        covered = sorted(modes + tuple(self.undetected_modes))
        if covered != list(self.ancilla_modes):
            raise InvalidModeError(
                f"{self.name}: ancilla modes {list(self.ancilla_modes)} must each be "
                f"detected or declared undetected, got {covered}"
            )
        for occupation in self.logical_states:
            self.register_basis.index(occupation)

    @property
    def mode_count(self) -> int:
        return self.register_modes + self.ancilla_prep.basis.mode_count

    @property
    def ancilla_modes(self) -> range:
        return range(self.register_modes, self.mode_count)

    @property
    def detected_modes(self) -> tuple:
        return self.detection[0].modes

    @property
    def max_total_photons(self) -> int:
        return self.register_photons + self.ancilla_prep.basis.max_total_photons

    @property
    def register_basis(self):
        return enumerate_basis(self.register_modes, self.register_photons)

    @property
    def full_basis(self):
        return enumerate_basis(self.mode_count, self.max_total_photons)

    @property
    def ideal_signs(self) -> np.ndarray:
        """Ideal phase per register basis state (1 outside the logical space)."""
        signs = np.ones(self.register_basis.dimension)
        for occupation, sign in zip(self.logical_states, self.logical_signs):
            signs[self.register_basis.index(occupation)] = sign
        return signs

    def logical_state(self, amplitudes) -> PureState:
        """Register state with the given amplitudes on the logical basis."""
        amplitudes = np.asarray(amplitudes, dtype=complex)
        if amplitudes.shape != (len(self.logical_states),):
            raise BasisMismatchError(
                f"{self.name} expects {len(self.logical_states)} logical amplitudes"
            )
        return PureState.from_occupations(
            self.register_basis, dict(zip(self.logical_states, amplitudes))
        )

    def logical_matrix(self) -> np.ndarray:
        """Columns are the register vectors of the logical basis states."""
        basis = self.register_basis
        matrix = np.zeros((basis.dimension, len(self.logical_states)))
        for column, occupation in enumerate(self.logical_states):
            matrix[basis.index(occupation), column] = 1.0
        return matrix


@dataclass(frozen=True)
class GateOutcome:
    """Normalized register state and the probability of an accepted pattern."""

    rho_out: DensityOperator
    success_probability: float
    pattern_probabilities: tuple = ()


@dataclass(frozen=True)
class TruthReport:
    """Result of ideal_truth_check; rows are (label, fidelity, success)."""

    gate: str
    passed: bool
    rows: tuple
    failures: tuple


def _ns_elements(signal, photon_mode, vacuum_mode, eta1, eta2):
    return (
        BeamsplitterSpec(eta1, (signal, vacuum_mode), Convention.SIGN_ON_REFLECTION, Orientation.AB),
        BeamsplitterSpec(eta2, (signal, photon_mode), Convention.SIGN_ON_REFLECTION, Orientation.BA),
    )


def build_ns(eta1: float = NOMINAL_ETA1, eta2: float = NOMINAL_ETA2) -> GateSpec:
    """Build the standalone NS gate.

    Mode 0 is the signal, mode 1 the single-photon ancilla and mode 2 the
    vacuum ancilla. Success requires the ancillas to leave as they came in.

    Args:
        eta1 (float): Reflectivity of the signal/vacuum beamsplitter.
        eta2 (float): Reflectivity of the signal/photon beamsplitter.

    Returns:
        GateSpec: Gate whose nominal success is eta2, the |0> success.
    """
    ancilla = PureState.from_occupations(enumerate_basis(2, 1), {(1, 0): 1.0})
    return GateSpec(
        name="ns",
        register_modes=1,
        register_photons=2,
        qubit_modes=(0,),
        logical_states=((0,), (1,), (2,)),
        logical_signs=(1, 1, -1),
        ancilla_prep=ancilla,
        elements=_ns_elements(0, 1, 2, eta1, eta2),
        detection=(DetectionPattern((1, 2), (1, 0), (False,)),),
        nominal_success=eta2,
        parameters=(("eta1", eta1), ("eta2", eta2)),
    )


def build_klm(eta1: float = NOMINAL_ETA1, eta2: float = NOMINAL_ETA2) -> GateSpec:
    """Build the KLM C-sign gate: an NS gate in each arm of a balanced interferometer.

    Modes 0 and 1 hold control and target. Modes 2 and 4 carry the NS
    single-photon ancillas, modes 3 and 5 the vacuum ancillas. Both NS gates
    share eta1 and eta2.
    """
    balanced = BeamsplitterSpec(0.5, (0, 1), Convention.SIGN_ON_REFLECTION, Orientation.AB)
    ancilla = PureState.from_occupations(enumerate_basis(4, 2), {(1, 0, 1, 0): 1.0})
    elements = (
        (balanced,)
        + _ns_elements(0, 2, 3, eta1, eta2)
        + _ns_elements(1, 4, 5, eta1, eta2)
        + (balanced,)
    )
    return GateSpec(
        name="klm",
        register_modes=2,
        register_photons=2,
        qubit_modes=(0, 1),
        logical_states=CSIGN_LOGICAL,
        logical_signs=CSIGN_SIGNS,
        ancilla_prep=ancilla,
        elements=elements,
        detection=(DetectionPattern((2, 3, 4, 5), (1, 0, 1, 0), (False, False)),),
        nominal_success=eta2 ** 2,
        parameters=(("eta1", eta1), ("eta2", eta2)),
    )


@lru_cache(maxsize=1)
def build_knill() -> GateSpec:
    """Build the two-ancilla Knill C-sign gate.

    All beamsplitters use the sign-on-transmission convention. Each qubit
    mode meets one single-photon ancilla at reflectivity 1/3, the qubits are
    then mixed at 1/3 and the ancillas at (3 + sqrt(6))/6. Both ancilla
    detectors must see one photon. The circuit realises C-sign up to a Z on
    each qubit, which solve_corrections supplies.
    """
    sot = Convention.SIGN_ON_TRANSMISSION
    ancilla = PureState.from_occupations(enumerate_basis(2, 2), {(1, 1): 1.0})
    elements = (
        BeamsplitterSpec(KNILL_ETA1, (0, 2), sot, Orientation.AB),
        BeamsplitterSpec(KNILL_ETA1, (1, 3), sot, Orientation.AB),
        BeamsplitterSpec(KNILL_ETA1, (0, 1), sot, Orientation.AB),
        BeamsplitterSpec(KNILL_ETA2, (2, 3), sot, Orientation.BA),
    )
    draft = GateSpec(
        name="knill",
        register_modes=2,
        register_photons=2,
        qubit_modes=(0, 1),
        logical_states=CSIGN_LOGICAL,
        logical_signs=CSIGN_SIGNS,
        ancilla_prep=ancilla,
        elements=elements,
        detection=(DetectionPattern((2, 3), (1, 1), (False, False)),),
        nominal_success=2 / 27,
        parameters=(("eta1", KNILL_ETA1), ("eta2", KNILL_ETA2)),
    )
    return replace(draft, detection=solve_corrections(draft))


@lru_cache(maxsize=1)
def build_pjf() -> GateSpec:
    """Build the PJF C-sign gate with the entangled four-mode ancilla.

    The ancilla (|0110> + |1001>)/sqrt(2) on modes 2-5 is a photon pair in
    two dual-rail qubits. A 50:50 beamsplitter rotates the second ancilla
    qubit, then control and target each meet one ancilla rail on a 50:50
    beamsplitter. The final permutation moves the unmeasured ancilla rails
    to the register modes; the detector pairs (2, 3) and (4, 5) must each
    register one photon in total.
    """
    half = 0.5
    basis = enumerate_basis(4, 2)
    ancilla = PureState.from_occupations(
        basis, {(0, 1, 1, 0): 1 / math.sqrt(2), (1, 0, 0, 1): 1 / math.sqrt(2)}
    )
    elements = (
        BeamsplitterSpec(half, (4, 5)),
        BeamsplitterSpec(half, (0, 2)),
        BeamsplitterSpec(half, (1, 4)),
        Permutation((3, 5, 0, 2, 1, 4)),
    )
    patterns = tuple(
        DetectionPattern((2, 3, 4, 5), first + second, (False, False))
        for first in ((1, 0), (0, 1))
        for second in ((1, 0), (0, 1))
    )
    draft = GateSpec(
        name="pjf",
        register_modes=2,
        register_photons=2,
        qubit_modes=(0, 1),
        logical_states=CSIGN_LOGICAL,
        logical_signs=CSIGN_SIGNS,
        ancilla_prep=ancilla,
        elements=elements,
        detection=patterns,
        nominal_success=0.25,
    )
    return replace(draft, detection=solve_corrections(draft))


def _shift_element(element, shift_mode, mode_count):
    if isinstance(element, BeamsplitterSpec):
        return replace(element, modes=tuple(shift_mode(m) for m in element.modes))
    if isinstance(element, LossChannel):
        return replace(element, mode=shift_mode(element.mode))
    order = list(range(mode_count))
    for out_mode, in_mode in enumerate(element.order):
        order[shift_mode(out_mode)] = shift_mode(in_mode)
    return Permutation(tuple(order))


def build_dual_rail(gate: GateSpec) -> GateSpec:
    """Dual-rail version of a single-rail C-sign gate.

    The logical-zero rails of control and target become register modes 2
    and 3. They take part in no interaction; ancilla modes move up by two.
    The register holds (c1, t1, c0, t0).
    """
    if gate.register_modes != 2 or gate.logical_states != CSIGN_LOGICAL:
        raise SimulationError(f"{gate.name} is not a single-rail C-sign gate")

    def shift_mode(mode):
        return mode if mode < 2 else mode + 2

    mode_count = gate.mode_count + 2
    logical = tuple((x, y, 1 - x, 1 - y) for x, y in CSIGN_LOGICAL)
    return GateSpec(
        name=f"{gate.name}-dual",
        register_modes=4,
        register_photons=gate.register_photons,
        qubit_modes=gate.qubit_modes,
        logical_states=logical,
        logical_signs=gate.logical_signs,
        ancilla_prep=gate.ancilla_prep,
        elements=tuple(_shift_element(e, shift_mode, mode_count) for e in gate.elements),
        detection=tuple(
            replace(p, modes=tuple(shift_mode(m) for m in p.modes)) for p in gate.detection
        ),
        nominal_success=gate.nominal_success,
        undetected_modes=tuple(shift_mode(m) for m in gate.undetected_modes),
        parameters=gate.parameters,
    )


GATE_BUILDERS = {
    "klm": build_klm,
    "knill": build_knill,
    "pjf": build_pjf,
    "ns": build_ns,
}


def get_gate(name: str, **params) -> GateSpec:
    """Look up a gate builder by name; klm and ns accept eta1 and eta2."""
    try:
        builder = GATE_BUILDERS[name.lower()]
    except KeyError:
        raise SimulationError(
            f"unknown gate '{name}' (choose from {', '.join(GATE_BUILDERS)})"
        ) from None
    return builder(**params)


def _correction_signs(gate, pattern, basis):
    signs = np.ones(basis.dimension)
    for mode, flip in zip(gate.qubit_modes, pattern.phase_flips):
        if flip:
            signs *= (-1.0) ** basis.occupations[:, mode]
    return signs


def _check_input(gate, psi):
    if psi.basis != gate.register_basis:
        raise BasisMismatchError(
            f"{gate.name} expects input on {gate.register_modes} modes with "
            f"<= {gate.register_photons} photons"
        )
    norm_sq = psi.norm_squared()
    if abs(norm_sq - 1.0) > 1e-9:
        raise SimulationError(f"input must be normalized (norm^2 {norm_sq})")


def _restrict_to_register(matrix, basis, register_basis):
    indices = np.array([basis.index(s) for s in register_basis.states])
    restricted = matrix[np.ix_(indices, indices)]
    dropped = float(np.trace(matrix).real - np.trace(restricted).real)
    if abs(dropped) > 1e-10:
        raise TruncationError(f"register holds weight {dropped:.3e} above its photon bound")
    return restricted


def run_gate(gate: GateSpec, psi: PureState, eff: EfficiencyConfig = IDEAL,
             loss_method: LossMethod = LossMethod.KRAUS,
             trace_threshold: float = TRACE_THRESHOLD,
             detector_overrides: dict = None) -> GateOutcome:
    """Evaluate a gate on one input through the full density-operator pipeline.

    Steps: tensor the input with the ancilla, source loss on every ancilla
    mode, the circuit, detector loss on every detected mode, projection on
    each accepted pattern with its correction, sum over patterns, normalize.
    Register modes never pass through loss.

    Args:
        gate (GateSpec): Gate to run.
        psi (PureState): Normalized input on gate.register_basis.
        eff (EfficiencyConfig): Source and detector efficiencies.
        loss_method (LossMethod): Loss channel implementation.
        trace_threshold (float): Smallest acceptable success probability.
        detector_overrides (dict, optional): Per-mode detector efficiency
            replacing eff.eta_det on the listed modes.

    Returns:
        GateOutcome: Normalized register state and success probability.

    Raises:
        NearZeroTraceError: If no accepted pattern can occur.
    """
    _check_input(gate, psi)
    rho = tensor(psi, gate.ancilla_prep, gate.max_total_photons).to_density()
    for mode in gate.ancilla_modes:
        rho = apply_loss(rho, mode, eff.eta_src, loss_method)
    rho = apply_elements(rho, gate.elements, loss_method)
    overrides = detector_overrides or {}
    for mode in gate.detected_modes:
        rho = apply_loss(rho, mode, overrides.get(mode, eff.eta_det), loss_method)

    total = None
    probabilities = []
    for pattern in gate.detection:
        branch = rho
        for mode, count in zip(pattern.modes, pattern.counts):
            branch, _ = project_number(branch, mode, count)
        for mode in sorted(gate.ancilla_modes, reverse=True):
            branch = drop_mode(branch, mode)
        signs = _correction_signs(gate, pattern, branch.basis)
        corrected = branch.matrix * np.outer(signs, signs)
        probabilities.append(float(np.trace(corrected).real))
        total = corrected if total is None else total + corrected

    matrix = _restrict_to_register(total, branch.basis, gate.register_basis)
    success = float(sum(probabilities))
    rho_out = normalize(DensityOperator(gate.register_basis, matrix), trace_threshold)
    logger.debug("%s at %s: success %.6g", gate.name, eff, success)
    return GateOutcome(rho_out, success, tuple(probabilities))


@dataclass(frozen=True, eq=False)
class GateChannel:
    """Operator-sum form of a gate's conditional map on the register.

    kraus[k] maps register inputs to unnormalized register outputs;
    pattern_index[k] names the accepted pattern of that branch. The map is
    the same one run_gate evaluates, unravelled over source-loss branches,
    detector-loss branches and accepted patterns.
    """

    gate: GateSpec
    eff: EfficiencyConfig
    kraus: np.ndarray
    pattern_index: np.ndarray

    def apply(self, psi: PureState, trace_threshold: float = TRACE_THRESHOLD) -> GateOutcome:
        _check_input(self.gate, psi)
        outputs = self.kraus @ psi.amplitudes
        matrix = np.einsum("ki,kj->ij", outputs, outputs.conj())
        weights = np.sum(np.abs(outputs) ** 2, axis=1)
        probabilities = tuple(
            float(weights[self.pattern_index == p].sum()) for p in range(len(self.gate.detection))
        )
        rho = DensityOperator(self.gate.register_basis, matrix)
        return GateOutcome(normalize(rho, trace_threshold), float(weights.sum()), probabilities)

    def evaluate(self, inputs, trace_threshold: float = TRACE_THRESHOLD):
        """Fidelity with the ideal output and success for a batch of inputs.

        Args:
            inputs (np.ndarray): Shape (B, D) register amplitude vectors.
            trace_threshold (float): Success below this yields NaN fidelity.

        Returns:
            tuple: (fidelities, successes), each of shape (B,)
        """
        inputs = np.atleast_2d(np.asarray(inputs, dtype=complex))
        expected = inputs * self.gate.ideal_signs
        outputs = np.einsum("kij,bj->bki", self.kraus, inputs)
        success = np.sum(np.abs(outputs) ** 2, axis=(1, 2))
        overlap = np.sum(np.abs(np.einsum("bi,bki->bk", expected.conj(), outputs)) ** 2, axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            fidelities = np.where(success > trace_threshold, overlap / success, np.nan)
        return np.clip(fidelities, 0.0, 1.0), success


def _source_branches(gate, eta_src):
    basis = gate.ancilla_prep.basis
    branches = [gate.ancilla_prep.amplitudes]
    for mode in range(basis.mode_count):
        operators = mode_kraus_operators(basis, mode, eta_src)
        branches = [op @ vector for vector in branches for op in operators]
    return [v for v in branches if np.vdot(v, v).real > 0]


def _embedding(gate, ancilla_vector):
    full, register = gate.full_basis, gate.register_basis
    rows, cols, values = [], [], []
    ancilla_basis = gate.ancilla_prep.basis
    for i in np.flatnonzero(ancilla_vector):
        for j, occupation in enumerate(register.states):
            rows.append(full.index(occupation + ancilla_basis.states[i]))
            cols.append(j)
            values.append(ancilla_vector[i])
    return sparse.csr_matrix((values, (rows, cols)), shape=(full.dimension, register.dimension))


def _detector_branches(gate, pattern, eta_det):
    """Yield (selection matrix) per detector-loss and undetected-occupation branch."""
    full, register = gate.full_basis, gate.register_basis
    detected = list(pattern.modes)
    undetected = list(gate.undetected_modes)
    spare = gate.max_total_photons - sum(pattern.counts)
    for extra in itertools.product(range(spare + 1), repeat=len(detected) + len(undetected)):
        if sum(extra) > spare:
            continue
        lost = extra[:len(detected)]
        coefficient = 1.0
        for count, k in zip(pattern.counts, lost):
            coefficient *= math.sqrt(math.comb(count + k, k) * eta_det ** count * (1 - eta_det) ** k)
        if coefficient == 0:
            continue
        wanted = np.array([c + k for c, k in zip(pattern.counts, lost)] + list(extra[len(detected):]))
        observed = full.occupations[:, detected + undetected]
        matches = np.flatnonzero(np.all(observed == wanted, axis=1))
        rows, cols = [], []
        for index in matches:
            occupation = full.states[index][:gate.register_modes]
            if sum(occupation) > gate.register_photons:
                continue
            rows.append(register.index(occupation))
            cols.append(index)
        if rows:
            yield sparse.csr_matrix((np.full(len(rows), coefficient), (rows, cols)),
                                    shape=(register.dimension, full.dimension))


def gate_channel(gate: GateSpec, eff: EfficiencyConfig = IDEAL) -> GateChannel:
    """Build the operator-sum form of a gate at the given efficiencies.

    Source loss is unravelled on the ancilla state, the circuit acts as one
    sparse unitary, and detector loss followed by number projection becomes
    a weighted selection of full-space states for every way the detected
    photons could have arrived.
    """
    unitary = circuit_operator(gate.elements, gate.full_basis)
    propagated = [unitary @ _embedding(gate, vector) for vector in _source_branches(gate, eff.eta_src)]
    kraus, labels = [], []
    for index, pattern in enumerate(gate.detection):
        signs = _correction_signs(gate, pattern, gate.register_basis)
        for selection in _detector_branches(gate, pattern, eff.eta_det):
            for block in propagated:
                operator = (selection @ block).toarray() * signs[:, None]
                if np.any(np.abs(operator) > 1e-15):
                    kraus.append(operator)
                    labels.append(index)
    dimension = gate.register_basis.dimension
    stacked = np.array(kraus, dtype=complex).reshape(len(kraus), dimension, dimension)
    logger.debug("%s channel at %s: %d Kraus operators", gate.name, eff, len(kraus))
    return GateChannel(gate, eff, stacked, np.array(labels, dtype=int))


def solve_corrections(gate: GateSpec) -> tuple:
    """Find the Z corrections that turn each accepted branch into the ideal gate.

    Every combination of flips on the qubit modes is tried for each pattern;
    the first one whose ideal conditional map is proportional to the target
    action on the logical basis, with no leakage, is kept.

    Returns:
        tuple: DetectionPatterns with phase_flips filled in.

    Raises:
        SimulationError: If a pattern has no correcting combination.
    """
    logical = gate.logical_matrix()
    target = logical * np.array(gate.logical_signs)
    anchor = gate.register_basis.index(gate.logical_states[0])
    solved = []
    for pattern in gate.detection:
        plain = replace(pattern, phase_flips=(False,) * len(gate.qubit_modes))
        channel = gate_channel(replace(gate, detection=(plain,)), IDEAL)
        conditional = channel.kraus.sum(axis=0) @ logical
        for flips in itertools.product((False, True), repeat=len(gate.qubit_modes)):
            signs = _correction_signs(gate, replace(plain, phase_flips=flips), gate.register_basis)
            corrected = conditional * signs[:, None]
            scale = corrected[anchor, 0]
            if abs(scale) > 1e-9 and np.max(np.abs(corrected - scale * target)) < 1e-9:
                solved.append(replace(plain, phase_flips=flips))
                logger.debug("%s pattern %s: flips %s", gate.name, pattern.counts, flips)
                break
        else:
            raise SimulationError(f"{gate.name}: no Z correction fixes pattern {pattern.counts}")
    return tuple(solved)


def _truth_inputs(gate):
    count = len(gate.logical_states)
    inputs = []
    for i, occupation in enumerate(gate.logical_states):
        amplitudes = np.zeros(count)
        amplitudes[i] = 1.0
        inputs.append(("|" + "".join(map(str, occupation)) + ">", amplitudes))
    inputs.append(("equal superposition", np.full(count, 1 / math.sqrt(count))))
    return inputs


def ideal_output(gate: GateSpec, psi: PureState) -> PureState:
    """Ideal gate action: the logical signs applied to psi."""
    return PureState(psi.basis, psi.amplitudes * gate.ideal_signs)


def ideal_truth_check(gate: GateSpec) -> TruthReport:
    """Run the lossless gate on the logical basis and an equal superposition.

    Passes when every fidelity is >= 1 - 1e-9 and every success probability
    matches gate.nominal_success to 1e-9.
    """
    rows, failures = [], []
    for label, amplitudes in _truth_inputs(gate):
        psi = gate.logical_state(amplitudes)
        try:
            outcome = run_gate(gate, psi, IDEAL)
        except NearZeroTraceError as error:
            failures.append(f"{label}: {error}")
            rows.append((label, float("nan"), 0.0))
            continue
        value = fidelity(outcome.rho_out, ideal_output(gate, psi))
        rows.append((label, value, outcome.success_probability))
        if value < 1 - IDEAL_FIDELITY_TOL:
            failures.append(f"{label}: fidelity {value:.12f}")
        if abs(outcome.success_probability - gate.nominal_success) > SUCCESS_TOL:
            failures.append(
                f"{label}: success {outcome.success_probability:.12f} "
                f"!= nominal {gate.nominal_success:.12f}"
            )
    return TruthReport(gate.name, not failures, tuple(rows), tuple(failures))


def dual_rail_equivalence_check(eta_det: float, gate: GateSpec = None) -> tuple:
    """Minimum fidelity of a C-sign gate in single- and dual-rail form.

    Args:
        eta_det (float): Detector efficiency; sources are ideal.
        gate (GateSpec, optional): Single-rail gate, KLM by default.

    Returns:
        tuple: (fidelity_single, fidelity_dual)
    """
    from loqc_app.modules.analysis import min_fidelity

    gate = gate or build_klm()
    eff = EfficiencyConfig(1.0, eta_det)
    single = min_fidelity(gate, eff).min_fidelity
    dual = min_fidelity(build_dual_rail(gate), eff).min_fidelity
    return single, dual
