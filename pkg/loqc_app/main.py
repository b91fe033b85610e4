#!/usr/bin/env python3
"""
C-sign Gate Analysis - command line
Main entry point for the application

Sub-commands:
- sweep: minimum fidelity along a detector, source or equal-efficiency axis
- landscape: KLM minimum fidelity over shifts of the NS reflectivities
- optimize: KLM reflectivity tuning (eta2 only, joint, eta2 scan along an
  axis, crossover, success cost)
- gate-info: wiring, ancilla and ideal check of one gate
- verify: the acceptance checks, one PASS/FAIL line each

Exit codes: 0 success, 1 failed verification, 2 invalid arguments or
configuration, 3 numerical failure (impossible detection pattern).
"""

# Standard library imports
import argparse
import logging
import sys
from dataclasses import replace

# Third-party imports
import numpy as np
import pandas as pd

# Local application imports
from loqc_app import __version__
from loqc_app.modules import analysis, gates, tuner
from loqc_app.modules.exceptions import NearZeroTraceError, SimulationError
from loqc_app.modules.fock_core import DensityOperator, enumerate_basis, fidelity
from loqc_app.modules.optics import (
    BeamsplitterSpec,
    Convention,
    LossMethod,
    Permutation,
    apply_loss,
)
from loqc_app.utils.data_loader import format_results_csv, write_plot_script, write_results_csv
from loqc_app.utils.settings_manager import SettingsManager

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_INVALID = 2
EXIT_NUMERICAL = 3

VERIFY_SEED = 1729


def build_parser():
    """Create the argument parser with one sub-parser per command."""
    parser = argparse.ArgumentParser(
        prog="loqc_app",
        description="Linear-optical C-sign gates under ancilla source and detector inefficiency",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    parser.add_argument("--config", help="settings file: a YAML mapping or key=value lines")
    commands = parser.add_subparsers(dest="command", required=True)

    def add_search(sub):
        sub.add_argument("--grid-density", dest="grid_density", type=int)
        sub.add_argument("--refine-seeds", dest="refine_seeds", type=int)
        sub.add_argument("--fidelity-tol", dest="fidelity_tol", type=float)

    def add_grid(sub):
        sub.add_argument("--from", dest="grid_from", type=float)
        sub.add_argument("--to", dest="grid_to", type=float)
        sub.add_argument("--step", dest="grid_step", type=float)

    def add_output(sub):
        sub.add_argument("--out", help="CSV output path")
        sub.add_argument("--emit-plot-script", action="store_true",
                         help="write a matplotlib script next to the CSV")

    sweep = commands.add_parser("sweep", help="min fidelity along an efficiency axis")
    sweep.add_argument("--gate", choices=("klm", "knill", "pjf"))
    sweep.add_argument("--axis", choices=("detector", "source", "joint"))
    sweep.add_argument("--phases", action="store_true", help="also search two relative phases")
    sweep.add_argument("--jobs", type=int, help="grid points evaluated in parallel")
    add_grid(sweep)
    add_search(sweep)
    add_output(sweep)

    land = commands.add_parser("landscape", help="KLM min fidelity over (d_eta1, d_eta2)")
    land.add_argument("--eta-src", dest="eta_src", type=float)
    land.add_argument("--eta-det", dest="eta_det", type=float)
    land.add_argument("--steps", type=int, default=tuner.LANDSCAPE_STEPS,
                      help="grid points per axis")
    land.add_argument("--tune-grid-density", dest="tune_grid_density", type=int)
    add_output(land)

    opt = commands.add_parser("optimize", help="tune the KLM NS reflectivities")
    opt.add_argument("--gate", choices=("klm",), default="klm")
    opt.add_argument("--mode", choices=("eta2", "joint", "scan", "crossover", "success"),
                     default="eta2")
    opt.add_argument("--axis", choices=("detector", "source", "joint"),
                     help="efficiency axis of the scan mode")
    opt.add_argument("--eta-src", dest="eta_src", type=float)
    opt.add_argument("--eta-det", dest="eta_det", type=float)
    opt.add_argument("--tune-grid-density", dest="tune_grid_density", type=int)
    opt.add_argument("--tune-tol", dest="tune_tol", type=float)
    opt.add_argument("--joint-seed-grid", dest="joint_seed_grid", type=int)
    opt.add_argument("--joint-refine-seeds", dest="joint_refine_seeds", type=int)
    add_grid(opt)
    add_output(opt)

    info = commands.add_parser("gate-info", help="describe a gate")
    info.add_argument("gate_name", metavar="GATE", choices=sorted(gates.GATE_BUILDERS))

    verify = commands.add_parser("verify", help="run the acceptance checks")
    verify.add_argument("--quick", action="store_true", help="skip the tuning checks")
    verify.add_argument("--mutate-sign", action="store_true",
                        help="flip one KLM beamsplitter convention; checks must fail")
    verify.add_argument("--loss-method", dest="loss_method", choices=("kraus", "ancilla_trace"))
    add_search(verify)
    return parser


CONFIG_KEYS = (
    "gate", "axis", "eta_src", "eta_det", "grid_from", "grid_to", "grid_step",
    "grid_density", "refine_seeds", "fidelity_tol", "tune_grid_density", "tune_tol",
    "joint_seed_grid", "joint_refine_seeds", "jobs", "loss_method", "out",
)


def _search_kwargs(cfg):
    return {"grid_density": cfg.grid_density, "refine_seeds": cfg.refine_seeds,
            "tol": cfg.fidelity_tol, "trace_threshold": cfg.trace_threshold}


def _check_dimension(gate, cfg):
    enumerate_basis(gate.mode_count, gate.max_total_photons, cfg.dimension_cap)


def _finish_output(frame, cfg, args, kind, x_column="eta_det", index=False):
    path = write_results_csv(frame, cfg.out, index=index)
    if args.emit_plot_script:
        write_plot_script(path, kind, x_column)
    return path


def cmd_sweep(args, cfg):
    """Sweep one efficiency axis and write one CSV row per grid point."""
    gate = gates.get_gate(cfg.gate)
    _check_dimension(gate, cfg)
    grid = analysis.efficiency_grid(cfg.grid_from, cfg.grid_to, cfg.grid_step)
    axis = analysis.SweepAxis(cfg.axis)
    logger.info("Sweeping %s along %s over %d points", gate.name, axis.value, len(grid))
    rows = analysis.sweep_efficiency(gate, axis, grid, jobs=cfg.jobs, phases=args.phases,
                                     **_search_kwargs(cfg))
    x_column = "eta_src" if axis is analysis.SweepAxis.SOURCE else "eta_det"
    path = _finish_output(analysis.sweep_frame(rows), cfg, args, "sweep", x_column)
    print(f"{gate.name}: {len(rows)} rows written to {path}")
    return EXIT_OK


def cmd_landscape(args, cfg):
    """KLM landscape in long format: d_eta1, d_eta2, min_fidelity."""
    eff = gates.EfficiencyConfig(cfg.eta_src, cfg.eta_det)
    steps = args.steps
    if steps < 2:
        raise SimulationError(f"--steps must be at least 2, got {steps}")
    d_eta1 = np.linspace(-gates.NOMINAL_ETA1, 1 - gates.NOMINAL_ETA1, steps)
    d_eta2 = np.linspace(-gates.NOMINAL_ETA2, 1 - gates.NOMINAL_ETA2, steps)
    wide = tuner.landscape(eff, d_eta1, d_eta2, grid_density=cfg.tune_grid_density,
                           refine_seeds=cfg.refine_seeds, tol=cfg.fidelity_tol)
    grid1, grid2 = np.meshgrid(d_eta1, d_eta2, indexing="ij")
    long = pd.DataFrame({"d_eta1": grid1.ravel(), "d_eta2": grid2.ravel(),
                         "min_fidelity": wide.to_numpy().ravel()})
    path = _finish_output(long, cfg, args, "landscape")
    print(f"landscape {steps}x{steps} at {eff} written to {path}")
    return EXIT_OK


def cmd_optimize(args, cfg):
    """Tune the KLM reflectivities and report the gain over the nominal gate."""
    options = {"tol": cfg.tune_tol, "grid_density": cfg.tune_grid_density,
               "verify_density": cfg.grid_density}
    x_column = "eta_det"
    if args.mode in ("eta2", "joint"):
        eff = gates.EfficiencyConfig(cfg.eta_src, cfg.eta_det)
        if args.mode == "eta2":
            result = tuner.optimize_eta2(eff, **options)
        else:
            result = tuner.optimize_joint(eff, seed_grid=cfg.joint_seed_grid,
                                          refine_seeds=cfg.joint_refine_seeds, **options)
        frame = tuner.tune_frame([result], args.mode)
        print(f"{args.mode} optimum at eta_src={eff.eta_src} eta_det={eff.eta_det}: "
              f"eta1={result.eta1:.6f} eta2={result.eta2:.6f} "
              f"min fidelity {result.min_fidelity:.6f} "
              f"(improvement over baseline {result.min_fidelity - result.baseline_min_fidelity:+.6f})")
    else:
        grid = analysis.efficiency_grid(cfg.grid_from, cfg.grid_to, cfg.grid_step)
        if args.mode == "scan":
            axis = analysis.SweepAxis(cfg.axis)
            frame = tuner.eta2_scan(grid, axis, **options)
            x_column = "eta_src" if axis is analysis.SweepAxis.SOURCE else "eta_det"
            weakest = frame.loc[frame["min_fidelity"].idxmin()]
            print(f"eta2 scan along {axis.value}: lowest optimized min fidelity "
                  f"{weakest['min_fidelity']:.6f} at {x_column}={weakest[x_column]:.4f}")
        elif args.mode == "crossover":
            frame = tuner.crossover_scan(grid, seed_grid=cfg.joint_seed_grid,
                                         refine_seeds=cfg.joint_refine_seeds, **options)
            print(f"eta1=1 strategy stops improving at efficiency {frame.attrs['crossover']}")
        else:
            frame = tuner.success_cost(grid, **options)
            print(f"smallest success ratio {frame['success_ratio'].min():.6f}")
    path = _finish_output(frame, cfg, args, "table", x_column)
    print(f"results written to {path}")
    return EXIT_OK


def _describe_element(element):
    if isinstance(element, BeamsplitterSpec):
        return (f"BS eta={element.eta:.6f} modes={element.modes} "
                f"{element.convention.value} {element.orientation.value}")
    if isinstance(element, Permutation):
        return f"permutation {element.order}"
    return f"loss efficiency={element.efficiency} mode={element.mode}"


def _describe_state(state):
    terms = []
    for index in np.flatnonzero(np.abs(state.amplitudes) > 1e-12):
        amplitude = state.amplitudes[index]
        occupation = "".join(map(str, state.basis.states[index]))
        terms.append(f"{amplitude.real:+.6f}|{occupation}>")
    return " ".join(terms)


def cmd_gate_info(args, cfg):
    """Print modes, ancilla, elements, detection, success and the ideal check."""
    gate = gates.get_gate(args.gate_name)
    print(f"gate: {gate.name}")
    print(f"modes: {gate.mode_count} (register {list(range(gate.register_modes))}, "
          f"ancilla {list(gate.ancilla_modes)})")
    for name, value in gate.parameters:
        print(f"{name} = {value:.10f}")
    print(f"ancilla preparation: {_describe_state(gate.ancilla_prep)}")
    for number, element in enumerate(gate.elements, 1):
        print(f"element {number}: {_describe_element(element)}")
    for pattern in gate.detection:
        print(f"accept modes {pattern.modes} counts {pattern.counts} "
              f"phase flips {pattern.phase_flips}")
    print(f"nominal success probability: {gate.nominal_success:.10f}")
    report = gates.ideal_truth_check(gate)
    for label, value, success in report.rows:
        print(f"  {label}: fidelity {value:.12f} success {success:.10f}")
    print(f"ideal truth check: {'PASS' if report.passed else 'FAIL'}")
    return EXIT_OK


def _mutated_klm():
    gate = gates.build_klm()
    first = replace(gate.elements[0], convention=Convention.SIGN_ON_TRANSMISSION)
    return replace(gate, elements=(first,) + gate.elements[1:])


def _ideal_checks(klm, method, rng):
    knill, pjf, ns = gates.build_knill(), gates.build_pjf(), gates.build_ns()
    for gate in (klm, knill, pjf, ns):
        report = gates.ideal_truth_check(gate)
        yield f"ideal truth check {gate.name}", report.passed, "; ".join(report.failures) or "ok"

    klm_success = gates.ideal_truth_check(klm).rows[0][2]
    yield "klm success near 1/20", abs(klm_success - 0.05) <= 0.003, f"{klm_success:.6f}"
    knill_success = gates.ideal_truth_check(knill).rows[0][2]
    yield "knill success 2/27", abs(knill_success - 2 / 27) <= 1e-9, f"{knill_success:.10f}"
    pjf_success = gates.ideal_truth_check(pjf).rows[0][2]
    yield "pjf success 1/4", abs(pjf_success - 0.25) <= 1e-9, f"{pjf_success:.10f}"

    successes, worst = [], 1.0
    for _ in range(20):
        amplitudes = rng.normal(size=3)
        psi = ns.logical_state(amplitudes / np.linalg.norm(amplitudes))
        outcome = gates.run_gate(ns, psi, loss_method=method)
        successes.append(outcome.success_probability)
        worst = min(worst, fidelity(outcome.rho_out, gates.ideal_output(ns, psi)))
    spread = float(np.var(successes))
    yield ("ns success independent of the input", spread < 1e-18 and worst >= 1 - 1e-9,
           f"variance {spread:.1e}, worst fidelity {worst:.12f}")


def _loss_checks(klm, method, rng):
    basis = enumerate_basis(2, 3)
    deviation = 0.0
    for _ in range(100):
        vectors = rng.normal(size=(basis.dimension, 2)) + 1j * rng.normal(size=(basis.dimension, 2))
        matrix = vectors @ vectors.conj().T
        rho = DensityOperator(basis, matrix / np.trace(matrix).real)
        mode, eta = int(rng.integers(2)), float(rng.uniform())
        kraus = apply_loss(rho, mode, eta, LossMethod.KRAUS).matrix
        traced = apply_loss(rho, mode, eta, LossMethod.ANCILLA_TRACE).matrix
        deviation = max(deviation, float(np.max(np.abs(kraus - traced))))
    yield "kraus and ancilla-trace loss agree", deviation <= 1e-10, f"max deviation {deviation:.2e}"

    mixed = gates.EfficiencyConfig(0.9, 0.9)
    psi = klm.logical_state([0.5, 0.5, 0.5, 0.5])
    dense = gates.run_gate(klm, psi, mixed, loss_method=method)
    fast = gates.gate_channel(klm, mixed).apply(psi)
    deviation = float(np.max(np.abs(dense.rho_out.matrix - fast.rho_out.matrix)))
    yield "channel matches density pipeline", deviation <= 1e-10, f"max deviation {deviation:.2e}"


def _comparison_checks(klm, search):
    # Knill is not required to overtake KLM near unit detector efficiency: this
    # loss model keeps KLM ahead on the whole grid with a gap that closes toward
    # 1, so the crossing is reported rather than checked.
    grid = analysis.efficiency_grid(0.80, 1.00, 0.02)
    rows_klm = analysis.sweep_efficiency(klm, analysis.SweepAxis.DETECTOR, grid, **search)
    rows_knill = analysis.sweep_efficiency(gates.build_knill(), analysis.SweepAxis.DETECTOR,
                                           grid, **search)
    gaps = {round(a.eta_det, 2): a.min_fidelity - b.min_fidelity for a, b in zip(rows_klm, rows_knill)}
    low = [gap for eta, gap in gaps.items() if eta <= 0.90]
    yield ("klm ahead of knill at detector efficiency <= 0.90", min(low) > 0,
           f"smallest gap {min(low):+.6f}")
    crossing = analysis.find_crossover(rows_klm, rows_knill)
    yield ("klm/knill gap closes toward unit detector efficiency",
           0 <= gaps[0.98] < min(low) and gaps[0.98] <= 0.02,
           f"gap at 0.98 {gaps[0.98]:+.6f}, crossover {crossing}")

    sweeps = {gate.name: analysis.sweep_efficiency(gate, analysis.SweepAxis.SOURCE, grid, **search)
              for gate in (klm, gates.build_knill(), gates.build_pjf())}
    margin = min(
        sweeps[klm.name][i].min_fidelity - max(sweeps["knill"][i].min_fidelity, sweeps["pjf"][i].min_fidelity)
        for i in range(len(grid))
    )
    yield "klm highest under source loss", margin >= -1e-9, f"smallest margin {margin:+.6f}"


def _bias_checks(klm, search):
    lossy = gates.EfficiencyConfig(1.0, 0.9)
    basis = analysis.basis_fidelities(klm, lossy).set_index("input")["fidelity"]
    f00, f01, f10 = basis["|00>"], basis["|01>"], basis["|10>"]
    yield "klm |00> unaffected by detector loss", abs(f00 - 1) <= 1e-9, f"{f00:.12f}"
    yield "klm |01> and |10> equally affected", abs(f01 - f10) <= 1e-9, f"{f01:.12f} vs {f10:.12f}"
    row = analysis.min_fidelity(klm, lossy, **search)
    yield ("klm worst input is a single-photon state", abs(row.min_fidelity - f01) <= 1e-6,
           f"min {row.min_fidelity:.10f} at {row.argmin.as_tuple()}")

    for eta_det in (1.0, 0.9):
        single, dual = gates.dual_rail_equivalence_check(eta_det, klm)
        yield (f"single and dual rail agree at detector {eta_det}", abs(single - dual) <= 1e-9,
               f"{single:.10f} vs {dual:.10f}")


def _determinism_checks(klm, search):
    grid = analysis.efficiency_grid(0.90, 0.96, 0.02)
    serial = analysis.sweep_efficiency(klm, analysis.SweepAxis.DETECTOR, grid, jobs=1, **search)
    parallel = analysis.sweep_efficiency(klm, analysis.SweepAxis.DETECTOR, grid, jobs=8, **search)
    same = (format_results_csv(analysis.sweep_frame(serial))
            == format_results_csv(analysis.sweep_frame(parallel)))
    yield "sweep csv identical for 1 and 8 jobs", same, f"{len(grid)} rows"


def _tuning_checks(cfg):
    options = {"tol": cfg.tune_tol, "grid_density": cfg.tune_grid_density,
               "verify_density": cfg.grid_density}
    joint = {"seed_grid": cfg.joint_seed_grid, "refine_seeds": cfg.joint_refine_seeds}

    result = tuner.optimize_eta2(gates.EfficiencyConfig(0.98, 1.0), **options)
    yield "eta2 at source 0.98", abs(result.min_fidelity - 0.956) <= 0.005, f"{result.min_fidelity:.6f}"
    fixed = tuner.optimize_eta2(gates.EfficiencyConfig(0.8, 1.0), **options)
    yield "eta2 at source 0.80", abs(fixed.min_fidelity - 0.723) <= 0.005, f"{fixed.min_fidelity:.6f}"

    result = tuner.optimize_joint(gates.EfficiencyConfig(0.98, 1.0), **options, **joint)
    placed = abs(result.eta1 - 0.7703) <= 0.02 and abs(result.eta2 - 0.1838) <= 0.02
    yield ("joint at source 0.98", abs(result.min_fidelity - 0.959) <= 0.005 and placed,
           f"{result.min_fidelity:.6f} at ({result.eta1:.4f}, {result.eta2:.4f})")
    result = tuner.optimize_joint(gates.EfficiencyConfig(0.8, 1.0), **options, **joint)
    gain = result.min_fidelity - fixed.min_fidelity
    yield ("joint gain over eta2 at source 0.80 below 0.001", -1e-9 <= gain < 0.001,
           f"{gain:+.6f} at ({result.eta1:.4f}, {result.eta2:.4f})")

    eta1_grid = [min(gates.NOMINAL_ETA1 + i * (1 - gates.NOMINAL_ETA1) / 4, 1.0) for i in range(5)]
    profile = tuner.eta1_profile(gates.EfficiencyConfig(1.0, 0.9), eta1_grid,
                                 tol=cfg.tune_tol, grid_density=cfg.tune_grid_density)
    steps = np.diff(profile["min_fidelity"].to_numpy())
    yield ("ridge fidelity grows with eta1 at detector 0.9", bool((steps >= -1e-6).all()),
           " ".join(f"{v:.6f}" for v in profile["min_fidelity"]))

    scan = tuner.crossover_scan(analysis.efficiency_grid(0.99, 1.0, 0.001), include_joint=False,
                                **options)
    crossing = scan.attrs["crossover"]
    yield ("eta1=1 crossover near 0.995", crossing is not None and abs(crossing - 0.995) <= 0.002,
           f"{crossing}")

    cost = tuner.success_cost(analysis.efficiency_grid(0.80, 1.00, 0.02), **options)
    floor = float(cost["success_ratio"].min())
    yield "optimized success at least a fifth of nominal", floor >= 0.2 - 0.02, f"{floor:.6f}"

    result = tuner.optimize_joint(gates.EfficiencyConfig(0.9, 0.9), **options, **joint)
    yield "tuned klm at 0.9 efficiency at least 0.8", result.min_fidelity >= 0.8, f"{result.min_fidelity:.6f}"


def _verify_checks(args, cfg):
    """Yield (name, passed, detail) for every acceptance criterion.

    A domain error inside one group of checks becomes a failed line for that
    group; the remaining groups still run.
    """
    klm = _mutated_klm() if args.mutate_sign else gates.build_klm()
    method = LossMethod(cfg.loss_method)
    search = _search_kwargs(cfg)
    rng = np.random.default_rng(VERIFY_SEED)
    groups = [
        ("ideal gates", lambda: _ideal_checks(klm, method, rng)),
        ("loss channels", lambda: _loss_checks(klm, method, rng)),
        ("gate comparison", lambda: _comparison_checks(klm, search)),
        ("klm bias", lambda: _bias_checks(klm, search)),
        ("determinism", lambda: _determinism_checks(klm, search)),
    ]
    if not args.quick:
        groups.append(("tuning", lambda: _tuning_checks(cfg)))
    for label, group in groups:
        try:
            yield from group()
        except SimulationError as e:
            yield label, False, f"{type(e).__name__}: {e}"


def cmd_verify(args, cfg):
    """Run every acceptance check; exit 1 if any fails."""
    failed = 0
    for name, passed, detail in _verify_checks(args, cfg):
        failed += not passed
        print(f"{'PASS' if passed else 'FAIL'} {name}: {detail}")
    print(f"{failed} check(s) failed" if failed else "all checks passed")
    return EXIT_VERIFY_FAILED if failed else EXIT_OK


COMMANDS = {
    "sweep": cmd_sweep,
    "landscape": cmd_landscape,
    "optimize": cmd_optimize,
    "gate-info": cmd_gate_info,
    "verify": cmd_verify,
}


def main(argv=None):
    """Parse arguments, merge configuration and dispatch the command.

    Returns:
        int: Process exit code.
    """
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    overrides = {key: getattr(args, key, None) for key in CONFIG_KEYS}
    try:
        cfg = SettingsManager.get_instance().load_run_config(args.config, overrides)
        return COMMANDS[args.command](args, cfg)
    except NearZeroTraceError as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    except SimulationError as e:
        print(f"invalid input: {e}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
