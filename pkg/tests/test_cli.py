import pytest

from loqc_app.main import EXIT_INVALID, EXIT_NUMERICAL, EXIT_OK, EXIT_VERIFY_FAILED, main
from loqc_app.modules.analysis import SWEEP_COLUMNS
from loqc_app.modules.tuner import TUNE_COLUMNS
from loqc_app.utils.data_loader import load_results_csv

SMALL_SEARCH = ["--grid-density", "5", "--refine-seeds", "1"]


def test_gate_info_reports_knill_reflectivities(capsys):
    assert main(["gate-info", "knill"]) == EXIT_OK

    out = capsys.readouterr().out
    assert "eta1 = 0.3333333333" in out
    assert "eta2 = 0.9082482905" in out
    assert "ideal truth check: PASS" in out


def test_gate_info_reports_klm_success(capsys):
    main(["gate-info", "klm"])

    out = capsys.readouterr().out
    assert "eta1 = 0.7573593129" in out
    assert "nominal success probability: 0.0513" in out


def test_gate_info_rejects_unknown_gate():
    with pytest.raises(SystemExit) as error:
        main(["gate-info", "cnot"])

    assert error.value.code == 2


def test_sweep_writes_one_row_per_grid_point(tmp_path, capsys):
    out = tmp_path / "klm_det.csv"

    code = main(["sweep", "--gate", "klm", "--axis", "detector", "--from", "0.9", "--to", "1.0",
                 "--step", "0.05", "--out", str(out)] + SMALL_SEARCH)

    assert code == EXIT_OK
    frame = load_results_csv(out)
    assert list(frame.columns) == SWEEP_COLUMNS
    assert list(frame["eta_det"]) == pytest.approx([0.9, 0.95, 1.0])
    assert frame["min_fidelity"].iloc[-1] == pytest.approx(1, abs=1e-9)
    assert "3 rows written" in capsys.readouterr().out


def test_sweep_can_emit_plot_script(tmp_path):
    out = tmp_path / "knill_src.csv"

    main(["sweep", "--gate", "knill", "--axis", "source", "--from", "1.0", "--to", "1.0",
          "--out", str(out), "--emit-plot-script"] + SMALL_SEARCH)

    script = (tmp_path / "plot_knill_src.py").read_text()
    assert 'pd.read_csv("knill_src.csv")' in script
    assert 'data["eta_src"]' in script


def test_landscape_writes_long_format(tmp_path):
    out = tmp_path / "landscape.csv"

    code = main(["landscape", "--eta-det", "0.9", "--steps", "2", "--tune-grid-density", "3",
                 "--out", str(out)])

    assert code == EXIT_OK
    frame = load_results_csv(out)
    assert list(frame.columns) == ["d_eta1", "d_eta2", "min_fidelity"]
    assert len(frame) == 4


def test_out_of_range_config_value_exits_with_invalid(tmp_path, capsys):
    config = tmp_path / "run.yaml"
    config.write_text("eta_det: 1.5\n")

    code = main(["--config", str(config), "sweep", "--out", str(tmp_path / "x.csv")])

    assert code == EXIT_INVALID
    assert "eta_det" in capsys.readouterr().err


def test_unknown_config_key_exits_with_invalid(tmp_path):
    config = tmp_path / "run.yaml"
    config.write_text("grid_densty: 9\n")

    assert main(["--config", str(config), "gate-info", "klm"]) == EXIT_INVALID


def test_impossible_detection_exits_with_numerical_failure(tmp_path, capsys):
    code = main(["sweep", "--axis", "source", "--from", "0.0", "--to", "0.0",
                 "--out", str(tmp_path / "x.csv")] + SMALL_SEARCH)

    assert code == EXIT_NUMERICAL
    assert "source=0.0" in capsys.readouterr().err


@pytest.mark.slow
def test_verify_fails_when_a_beamsplitter_sign_is_flipped(capsys):
    code = main(["verify", "--quick", "--mutate-sign", "--grid-density", "5", "--refine-seeds", "1"])

    assert code == EXIT_VERIFY_FAILED
    assert "FAIL ideal truth check klm" in capsys.readouterr().out


def test_optimize_scan_follows_the_source_axis(tmp_path, capsys):
    config = tmp_path / "fast.cfg"
    config.write_text("grid_density = 5\nrefine_seeds = 1\ntune_tol = 0.001\n")
    out = tmp_path / "scan.csv"

    code = main(["--config", str(config), "optimize", "--mode", "scan", "--axis", "source",
                 "--from", "0.95", "--to", "0.95", "--tune-grid-density", "3", "--out", str(out)])

    assert code == EXIT_OK
    frame = load_results_csv(out)
    assert list(frame.columns) == TUNE_COLUMNS
    assert (frame["eta_src"][0], frame["eta_det"][0]) == (0.95, 1.0)
    assert "eta2 scan along source" in capsys.readouterr().out


def test_key_value_config_is_accepted(tmp_path):
    config = tmp_path / "run.cfg"
    config.write_text("# one point\ngate = knill\naxis = source\ngrid_from = 1.0\n")
    out = tmp_path / "knill.csv"

    code = main(["--config", str(config), "sweep", "--out", str(out)] + SMALL_SEARCH)

    assert code == EXIT_OK
    frame = load_results_csv(out)
    assert list(frame["eta_src"]) == [1.0]


@pytest.mark.slow
def test_verify_report_is_identical_across_runs(capsys):
    argv = ["verify", "--quick", "--grid-density", "5", "--refine-seeds", "1"]

    main(argv)
    first = capsys.readouterr().out
    main(argv)
    second = capsys.readouterr().out

    assert first == second
    assert "PASS sweep csv identical for 1 and 8 jobs" in first
