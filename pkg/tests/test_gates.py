from dataclasses import replace

import numpy as np
import pytest

from loqc_app.modules.analysis import min_fidelity
from loqc_app.modules.exceptions import (
    BasisMismatchError,
    InvalidModeError,
    NearZeroTraceError,
    ParameterRangeError,
    SimulationError,
)
from loqc_app.modules.fock_core import PureState, enumerate_basis, fidelity, partial_trace
from loqc_app.modules.gates import (
    IDEAL,
    NOMINAL_ETA1,
    NOMINAL_ETA2,
    DetectionPattern,
    EfficiencyConfig,
    build_dual_rail,
    build_klm,
    build_knill,
    build_ns,
    build_pjf,
    dual_rail_equivalence_check,
    gate_channel,
    get_gate,
    ideal_output,
    ideal_truth_check,
    run_gate,
)
from loqc_app.modules.optics import Permutation


@pytest.fixture(scope="module")
def klm():
    return build_klm()


def random_logical_state(gate, rng):
    amplitudes = rng.normal(size=4) + 1j * rng.normal(size=4)
    return gate.logical_state(amplitudes / np.linalg.norm(amplitudes))


def test_nominal_ns_reflectivities():
    assert NOMINAL_ETA1 == pytest.approx(0.7574, abs=1e-4)
    assert NOMINAL_ETA2 == pytest.approx(0.2265, abs=1e-4)


@pytest.mark.parametrize("builder", [build_ns, build_klm, build_knill, build_pjf])
def test_ideal_gates_pass_truth_check(builder):
    report = ideal_truth_check(builder())

    assert report.passed, report.failures
    assert len(report.rows) == len(builder().logical_states) + 1


def test_ns_gate_flips_sign_of_two_photon_component():
    gate = build_ns()
    psi = gate.logical_state([0.6, 0.0, 0.8])

    outcome = run_gate(gate, psi)

    expected = PureState(psi.basis, np.array([0.6, 0.0, -0.8]))
    assert fidelity(outcome.rho_out, expected) == pytest.approx(1, abs=1e-9)
    assert outcome.success_probability == pytest.approx(NOMINAL_ETA2)


def test_klm_success_is_about_one_in_twenty(klm):
    outcome = run_gate(klm, klm.logical_state([0.5, 0.5, 0.5, 0.5]))

    assert outcome.success_probability == pytest.approx(1 / 20, abs=0.003)
    assert outcome.success_probability == pytest.approx(NOMINAL_ETA2 ** 2)


def test_knill_success_is_two_in_twenty_seven():
    gate = build_knill()

    outcome = run_gate(gate, gate.logical_state([0.5, 0.5, 0.5, 0.5]))

    assert outcome.success_probability == pytest.approx(2 / 27)


def test_pjf_success_is_one_quarter_over_four_patterns():
    gate = build_pjf()

    outcome = run_gate(gate, gate.logical_state([0.5, 0.5, 0.5, 0.5]))

    assert outcome.success_probability == pytest.approx(0.25)
    assert len(outcome.pattern_probabilities) == 4
    assert all(p > 0 for p in outcome.pattern_probabilities)


@pytest.mark.parametrize("index", range(4))
def test_each_pjf_branch_is_corrected_on_its_own(index):
    gate = build_pjf()
    branch = replace(gate, detection=(gate.detection[index],))
    psi = gate.logical_state([0.5, 0.5, 0.5, 0.5])

    outcome = run_gate(branch, psi)

    assert fidelity(outcome.rho_out, ideal_output(gate, psi)) == pytest.approx(1, abs=1e-9)


def test_knill_needs_a_phase_correction_on_both_qubits():
    assert build_knill().detection[0].phase_flips == (True, True)


def test_detuned_klm_fails_truth_check():
    report = ideal_truth_check(build_klm(0.5, 0.5))

    assert not report.passed
    assert report.failures


def test_vacuum_input_keeps_unit_fidelity_under_detector_loss(klm):
    psi = klm.logical_state([1, 0, 0, 0])

    outcome = run_gate(klm, psi, EfficiencyConfig(1.0, 0.9))

    assert fidelity(outcome.rho_out, psi) == pytest.approx(1, abs=1e-12)


def test_single_photon_inputs_degrade_symmetrically(klm):
    eff = EfficiencyConfig(1.0, 0.9)

    control = run_gate(klm, klm.logical_state([0, 0, 1, 0]), eff)
    target = run_gate(klm, klm.logical_state([0, 1, 0, 0]), eff)

    f_control = fidelity(control.rho_out, klm.logical_state([0, 0, 1, 0]))
    f_target = fidelity(target.rho_out, klm.logical_state([0, 1, 0, 0]))
    assert f_control < 1
    assert f_control == pytest.approx(f_target, abs=1e-10)


@pytest.mark.parametrize("builder, eff", [
    (build_klm, EfficiencyConfig(0.9, 0.85)),
    (build_knill, EfficiencyConfig(0.95, 0.9)),
    (build_pjf, EfficiencyConfig(0.8, 1.0)),
])
def test_channel_matches_density_pipeline(builder, eff):
    gate = builder()
    psi = random_logical_state(gate, np.random.default_rng(41))

    direct = run_gate(gate, psi, eff)
    channel = gate_channel(gate, eff).apply(psi)

    np.testing.assert_allclose(channel.rho_out.matrix, direct.rho_out.matrix, atol=1e-10)
    assert channel.success_probability == pytest.approx(direct.success_probability, abs=1e-12)


def test_channel_evaluate_matches_fidelity(klm):
    eff = EfficiencyConfig(0.9, 0.9)
    psi = random_logical_state(klm, np.random.default_rng(43))

    fidelities, successes = gate_channel(klm, eff).evaluate(psi.amplitudes[None, :])

    outcome = run_gate(klm, psi, eff)
    assert fidelities[0] == pytest.approx(fidelity(outcome.rho_out, ideal_output(klm, psi)), abs=1e-10)
    assert successes[0] == pytest.approx(outcome.success_probability, abs=1e-12)


def test_loss_methods_give_the_same_gate_output(klm):
    psi = random_logical_state(klm, np.random.default_rng(47))
    eff = EfficiencyConfig(0.9, 0.8)

    kraus = run_gate(klm, psi, eff, loss_method="kraus")
    ancilla = run_gate(klm, psi, eff, loss_method="ancilla_trace")

    np.testing.assert_allclose(kraus.rho_out.matrix, ancilla.rho_out.matrix, atol=1e-10)


def test_detector_overrides_replace_the_shared_efficiency(klm):
    psi = klm.logical_state([0.5, 0.5, 0.5, 0.5])

    ideal = run_gate(klm, psi, IDEAL)
    overridden = run_gate(klm, psi, EfficiencyConfig(1.0, 0.5),
                          detector_overrides={mode: 1.0 for mode in klm.detected_modes})

    np.testing.assert_allclose(overridden.rho_out.matrix, ideal.rho_out.matrix, atol=1e-12)
    assert overridden.success_probability == pytest.approx(ideal.success_probability)


def test_lost_ancilla_photons_make_the_gate_fail(klm):
    with pytest.raises(NearZeroTraceError) as error:
        run_gate(klm, klm.logical_state([1, 0, 0, 0]), EfficiencyConfig(0.0, 1.0))

    assert error.value.trace < 1e-12


def test_run_gate_rejects_input_on_wrong_basis(klm):
    psi = PureState.from_occupations(enumerate_basis(3, 2), {(1, 0, 0): 1})

    with pytest.raises(BasisMismatchError):
        run_gate(klm, psi)


def test_run_gate_rejects_unnormalized_input(klm):
    with pytest.raises(SimulationError):
        run_gate(klm, klm.logical_state([0.5, 0, 0, 0]))


def test_efficiency_config_rejects_out_of_range_values():
    with pytest.raises(ParameterRangeError):
        EfficiencyConfig(1.1, 0.9)


def test_gate_spec_requires_every_ancilla_to_be_accounted_for(klm):
    with pytest.raises(InvalidModeError):
        replace(klm, detection=(DetectionPattern((2, 3), (1, 0), (False, False)),))


def test_gate_spec_rejects_repeated_patterns(klm):
    pattern = klm.detection[0]

    with pytest.raises(SimulationError):
        replace(klm, detection=(pattern, pattern))


def test_get_gate_builds_klm_with_reflectivities():
    gate = get_gate("KLM", eta1=0.7, eta2=0.3)

    assert dict(gate.parameters) == {"eta1": 0.7, "eta2": 0.3}
    assert gate.nominal_success == pytest.approx(0.09)


def test_get_gate_rejects_unknown_name():
    with pytest.raises(SimulationError):
        get_gate("cnot")


def test_dual_rail_gate_passes_truth_check():
    gate = build_dual_rail(build_klm())

    report = ideal_truth_check(gate)

    assert report.passed, report.failures
    assert gate.register_modes == 4
    assert gate.logical_states[0] == (0, 0, 1, 1)


def test_dual_rail_logical_zero_rails_are_untouched():
    gate = build_dual_rail(build_klm())
    psi = gate.logical_state([0.6, 0.0, 0.0, 0.8])

    outcome = run_gate(gate, psi)

    before = partial_trace(psi.to_density(), [0, 1])
    after = partial_trace(outcome.rho_out, [0, 1])
    np.testing.assert_allclose(after.matrix, before.matrix, atol=1e-10)


def test_dual_rail_rejects_non_csign_gate():
    with pytest.raises(SimulationError):
        build_dual_rail(build_ns())


@pytest.mark.parametrize("eta_det", [1.0, 0.9])
def test_dual_rail_matches_single_rail_min_fidelity(eta_det):
    single, dual = dual_rail_equivalence_check(eta_det)

    assert single == pytest.approx(dual, abs=1e-9)
    if eta_det == 1.0:
        assert single == pytest.approx(1, abs=1e-9)
    else:
        assert single < 1 - 1e-3


def test_ns_success_does_not_depend_on_the_input():
    gate = build_ns()
    rng = np.random.default_rng(59)
    successes = []

    for _ in range(20):
        amplitudes = rng.normal(size=3)
        outcome = run_gate(gate, gate.logical_state(amplitudes / np.linalg.norm(amplitudes)))
        successes.append(outcome.success_probability)

    assert np.var(successes) < 1e-18
    assert np.mean(successes) == pytest.approx(NOMINAL_ETA2)


@pytest.mark.parametrize("axis", ["eta_src", "eta_det"])
def test_klm_success_does_not_grow_with_efficiency_loss(klm, axis):
    psi = klm.logical_state([0, 0, 0, 1])
    successes = [
        run_gate(klm, psi, EfficiencyConfig(**{axis: eta})).success_probability
        for eta in (1.0, 0.95, 0.9, 0.8)
    ]

    assert all(later <= earlier + 1e-12 for earlier, later in zip(successes, successes[1:]))
    assert successes[-1] < successes[0]


@pytest.mark.parametrize("eta_src", [1.0, 0.9, 0.8])
@pytest.mark.parametrize("eta_det", [1.0, 0.9, 0.8])
def test_klm_leaves_vacuum_input_intact_at_every_efficiency(klm, eta_src, eta_det):
    psi = klm.logical_state([1, 0, 0, 0])

    outcome = run_gate(klm, psi, EfficiencyConfig(eta_src, eta_det))

    assert fidelity(outcome.rho_out, psi) == pytest.approx(1, abs=1e-9)


def test_klm_min_fidelity_is_unchanged_by_swapping_the_qubits(klm):
    swap = Permutation((1, 0) + tuple(range(2, klm.mode_count)))
    swapped = replace(klm, name="klm-swapped", elements=(swap,) + klm.elements + (swap,))
    eff = EfficiencyConfig(1.0, 0.9)

    original = min_fidelity(klm, eff, grid_density=9, refine_seeds=2, tol=1e-10)
    mirrored = min_fidelity(swapped, eff, grid_density=9, refine_seeds=2, tol=1e-10)

    assert ideal_truth_check(swapped).passed
    assert mirrored.min_fidelity == pytest.approx(original.min_fidelity, abs=1e-9)
