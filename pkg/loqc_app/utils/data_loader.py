"""
Data Loader Utility for the C-sign gate analysis app
Handles writing and reading result tables.

This module provides functions for:
- Rendering result DataFrames as CSV text and writing them atomically
- Loading result CSVs back for regression checks
- Emitting a matplotlib script that plots a result CSV
"""

# Standard library imports
import logging
import os
import tempfile

# Third-party imports
import pandas as pd

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.12g"


def format_results_csv(frame: pd.DataFrame, index=False) -> str:
    """Render a DataFrame as the CSV text write_results_csv stores."""
    return frame.to_csv(index=index, float_format=FLOAT_FORMAT, na_rep="")


def write_results_csv(frame: pd.DataFrame, path, index=False):
    """Write a DataFrame as CSV; the target is replaced only once fully written.

    NaN values become empty fields.

    Args:
        frame (pd.DataFrame): Table to write.
        path (str): Destination file.
        index (bool): Whether to write the index column.

    Returns:
        str: Absolute path written.
    """
    path = os.path.abspath(path)
    directory = os.path.dirname(path)
    os.makedirs(directory, exist_ok=True)
    handle, temp_path = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".csv")
    try:
        with os.fdopen(handle, "w", newline="") as f:
            f.write(format_results_csv(frame, index))
        os.replace(temp_path, path)
    except BaseException:
        if os.path.exists(temp_path):
            os.remove(temp_path)
        raise
    logger.info("Wrote %d rows to %s", len(frame), path)
    return path


def load_results_csv(path, index_col=None) -> pd.DataFrame:
    """Load a CSV written by write_results_csv; empty fields read as NaN."""
    return pd.read_csv(path, index_col=index_col)


_SWEEP_SCRIPT = '''"""Plot {csv_name}: min fidelity against {x_column}."""
import matplotlib.pyplot as plt
import pandas as pd

data = pd.read_csv("{csv_name}")
fig, ax = plt.subplots(figsize=(6, 4))
ax.plot(data["{x_column}"], data["min_fidelity"], marker="o", label="{stem}")
ax.set_xlabel("{x_label}")
ax.set_ylabel("minimum fidelity")
ax.legend()
fig.tight_layout()
fig.savefig("{png_name}", dpi=150)
'''

_LANDSCAPE_SCRIPT = '''"""Plot {csv_name}: min fidelity over reflectivity shifts."""
import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

data = pd.read_csv("{csv_name}").pivot(index="d_eta1", columns="d_eta2", values="min_fidelity")
d_eta1 = data.index.to_numpy(dtype=float)
d_eta2 = data.columns.to_numpy(dtype=float)
grid2, grid1 = np.meshgrid(d_eta2, d_eta1)
fig = plt.figure(figsize=(6, 5))
ax = fig.add_subplot(projection="3d")
ax.plot_surface(grid1, grid2, np.ma.masked_invalid(data.to_numpy()), cmap="viridis")
ax.set_xlabel("change in eta1")
ax.set_ylabel("change in eta2")
ax.set_zlabel("minimum fidelity")
fig.tight_layout()
fig.savefig("{png_name}", dpi=150)
'''

_TABLE_SCRIPT = '''"""Plot {csv_name}: every numeric column against {x_column}."""
import matplotlib.pyplot as plt
import pandas as pd

data = pd.read_csv("{csv_name}")
fig, ax = plt.subplots(figsize=(6, 4))
for column in data.select_dtypes("number").columns.drop("{x_column}"):
    ax.plot(data["{x_column}"], data[column], marker="o", label=column)
ax.set_xlabel("{x_column}")
ax.legend()
fig.tight_layout()
fig.savefig("{png_name}", dpi=150)
'''


def write_plot_script(csv_path, kind="sweep", x_column="eta_det"):
    """Write a matplotlib script next to a result CSV.

    Args:
        csv_path (str): CSV the script will read (by file name, same folder).
        kind (str): "sweep", "landscape" or "table".
        x_column (str): Abscissa column for sweep and table plots.

    Returns:
        str: Path of the script.
    """
    templates = {"sweep": _SWEEP_SCRIPT, "landscape": _LANDSCAPE_SCRIPT, "table": _TABLE_SCRIPT}
    if kind not in templates:
        raise ValueError(f"unknown plot kind {kind!r}")
    csv_path = os.path.abspath(csv_path)
    stem, _ = os.path.splitext(os.path.basename(csv_path))
    script_path = os.path.join(os.path.dirname(csv_path), f"plot_{stem}.py")
    labels = {"eta_det": "detector efficiency", "eta_src": "source efficiency"}
    content = templates[kind].format(
        csv_name=os.path.basename(csv_path),
        stem=stem,
        png_name=f"{stem}.png",
        x_column=x_column,
        x_label=labels.get(x_column, x_column),
    )
    with open(script_path, "w") as f:
        f.write(content)
    logger.info("Wrote plot script %s", script_path)
    return script_path
