import math

import pandas as pd
import pytest

from loqc_app.utils.data_loader import (
    format_results_csv,
    load_results_csv,
    write_plot_script,
    write_results_csv,
)


def test_nan_is_written_as_empty_field(tmp_path):
    path = tmp_path / "out.csv"
    frame = pd.DataFrame({"eta_det": [0.9, 1.0], "min_fidelity": [float("nan"), 1.0]})

    write_results_csv(frame, path)

    assert path.read_text().splitlines()[1] == "0.9,"
    assert math.isnan(load_results_csv(path)["min_fidelity"][0])


def test_values_keep_twelve_significant_digits(tmp_path):
    path = tmp_path / "out.csv"

    write_results_csv(pd.DataFrame({"x": [1 / 3]}), path)

    assert path.read_text().splitlines()[1] == "0.333333333333"


def test_write_leaves_no_temporary_files(tmp_path):
    write_results_csv(pd.DataFrame({"x": [1.0]}), tmp_path / "sub" / "out.csv")

    assert [p.name for p in (tmp_path / "sub").iterdir()] == ["out.csv"]


def test_landscape_plot_script_pivots_long_table(tmp_path):
    csv_path = write_results_csv(
        pd.DataFrame({"d_eta1": [0.0], "d_eta2": [0.0], "min_fidelity": [1.0]}),
        tmp_path / "land.csv",
    )

    script = write_plot_script(csv_path, "landscape")

    content = open(script).read()
    assert script.endswith("plot_land.py")
    assert 'pivot(index="d_eta1", columns="d_eta2"' in content
    assert 'savefig("land.png"' in content


def test_unknown_plot_kind_is_rejected(tmp_path):
    with pytest.raises(ValueError):
        write_plot_script(tmp_path / "x.csv", "bar")


def test_formatted_csv_matches_the_written_file(tmp_path):
    frame = pd.DataFrame({"eta_det": [0.9, 1.0], "min_fidelity": [1 / 3, float("nan")]})

    path = write_results_csv(frame, tmp_path / "out.csv")

    assert format_results_csv(frame) == open(path).read()
