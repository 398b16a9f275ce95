"""Serialisation of datasets and reports: CSV, JSON and SVG.

CSV files start with ``#``-prefixed metadata lines (one JSON-encoded value per
key) followed by the table; floats are written at full precision so that
``read_csv_dataset`` reproduces the in-memory frame exactly. JSON output is
sorted and stable byte for byte for identical inputs.
"""

import io
import json
import logging
from pathlib import Path
from typing import Any, Dict, Optional, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

from src.domain.schemas import TabularDataset  # noqa: E402

logger = logging.getLogger(__name__)

ISO_LEVELS = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]

# Fixed salt keeps SVG element ids identical across runs.
plt.rcParams["svg.hashsalt"] = "pivkit"


def to_jsonable(value: Any) -> Any:
    """Convert numpy scalars and non-finite floats into JSON-safe values."""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not np.isfinite(value):
        return None
    return value


def dataset_to_csv(dataset: TabularDataset) -> str:
    """Render a dataset as CSV text with a metadata header."""
    buffer = io.StringIO()
    buffer.write(f"# dataset: {json.dumps(dataset.name)}\n")
    for key in sorted(dataset.metadata):
        buffer.write(f"# {key}: {json.dumps(to_jsonable(dataset.metadata[key]), sort_keys=True)}\n")
    dataset.frame.to_csv(buffer, index=False, lineterminator="\n")
    return buffer.getvalue()


def dataset_to_json(dataset: TabularDataset) -> str:
    """Render a dataset as JSON mirroring the CSV rows."""
    payload = {
        "name": dataset.name,
        "metadata": to_jsonable(dataset.metadata),
        "columns": dataset.columns,
        "rows": to_jsonable(dataset.frame.to_dict(orient="records")),
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def read_csv_dataset(path: Union[str, Path]) -> TabularDataset:
    """Parse a CSV file written by ``write_csv``.

    Raises:
        OSError: If the file cannot be read.
    """
    metadata: Dict[str, Any] = {}
    name = "dataset"
    with open(path, "r", encoding="utf-8") as f:
        lines = f.readlines()
    body_start = 0
    for body_start, line in enumerate(lines):
        if not line.startswith("#"):
            break
        key, _, raw = line[1:].strip().partition(": ")
        if key == "dataset":
            name = json.loads(raw)
        else:
            metadata[key] = json.loads(raw)
    frame = pd.read_csv(io.StringIO("".join(lines[body_start:])), float_precision="round_trip")
    return TabularDataset(name=name, frame=frame, metadata=metadata)


def write_text(text: str, path: Optional[Union[str, Path]]) -> None:
    """Write text to a file, or nowhere when path is None.

    Raises:
        OSError: If the file cannot be written.
    """
    if path is None:
        return
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        f.write(text)
    logger.info(f"Wrote {path}")


def write_csv(dataset: TabularDataset, path: Union[str, Path]) -> None:
    write_text(dataset_to_csv(dataset), path)


def write_json(dataset: TabularDataset, path: Union[str, Path]) -> None:
    write_text(dataset_to_json(dataset), path)


def _svg_text(fig: "plt.Figure") -> str:
    buffer = io.StringIO()
    fig.savefig(buffer, format="svg", metadata={"Date": None})
    plt.close(fig)
    return buffer.getvalue()


def contour_svg(dataset: TabularDataset) -> str:
    """Contour plot of a contour dataset at the PIV iso-levels 0.1 ... 0.9."""
    frame = dataset.frame
    n = dataset.metadata["region"]["resolution"]
    control_mesh = frame["control_un"].to_numpy().reshape(n, n)
    treated_mesh = frame["treated_un"].to_numpy().reshape(n, n)
    surface = frame["piv"].to_numpy().reshape(n, n)

    fig, ax = plt.subplots(figsize=(6, 5))
    lines = ax.contour(control_mesh, treated_mesh, surface, levels=ISO_LEVELS, colors="black", linewidths=0.8)
    ax.clabel(lines, fmt="%.1f", fontsize=8)
    ax.set_xlabel("control_un (mean control outcome of treated subjects)")
    ax.set_ylabel("treated_un (mean treated outcome of control subjects)")
    ax.set_title("PIV over the plausible region")
    return _svg_text(fig)


def power_svg(dataset: TabularDataset) -> str:
    """Null and alternative densities with the PIV shaded."""
    frame = dataset.frame
    x = frame["x"].to_numpy()
    rejection = frame["is_rejection_region"].to_numpy(dtype=bool)
    alt = frame["alt_density"].to_numpy()

    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(x, frame["null_density"].to_numpy(), color="black", linestyle="-", label="null: delta = 0")
    ax.plot(x, alt, color="black", linestyle="--", label="alternative: delta = delta_hat_ideal")
    ax.fill_between(x, 0.0, alt, where=rejection, color="grey", alpha=0.5, label="PIV")
    ax.axvline(dataset.metadata["threshold_value"], color="grey", linewidth=0.8)
    ax.set_xlabel("ideal-sample estimate")
    ax.set_ylabel("density")
    ax.legend(fontsize=8)
    return _svg_text(fig)


def render_svg(dataset: TabularDataset) -> str:
    """Render a contour or power dataset as SVG text.

    Raises:
        ValueError: If the dataset kind has no figure.
    """
    renderers = {"contour": contour_svg, "power": power_svg}
    if dataset.name not in renderers:
        raise ValueError(f"no SVG rendering for dataset '{dataset.name}'")
    return renderers[dataset.name](dataset)


def write_svg(dataset: TabularDataset, path: Union[str, Path]) -> None:
    write_text(render_svg(dataset), path)
