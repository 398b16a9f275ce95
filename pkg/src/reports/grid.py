"""Tabular data products of the PIV analysis.

Each emitter returns a ``TabularDataset`` whose numbers come straight from the
closed-form engine; nothing here adds arithmetic beyond laying values out on
grids. Writers for CSV, JSON and SVG live in ``src.reports.writers``.

Column contracts:
    contour: control_un, treated_un, probit, piv
    table:   piv_level, treated_un_threshold, delta_hat_ideal
    power:   x, null_density, alt_density, is_rejection_region
"""

import logging
from typing import Any, Dict, Sequence

import numpy as np
import pandas as pd
from scipy import integrate

from src.analysis.piv import (
    ideal_distribution,
    invert_for_treated_un,
    piv,
    probit_grid,
    realize_threshold,
    se_ideal,
)
from src.domain.schemas import (
    EffectDirection,
    ObservedStudy,
    PlausibleRegion,
    TabularDataset,
    ThresholdSpec,
)
from src.tools.normal import std_normal_cdf_array, std_normal_pdf

logger = logging.getLogger(__name__)

CONTOUR_COLUMNS = ["control_un", "treated_un", "probit", "piv"]
TABLE_COLUMNS = ["piv_level", "treated_un_threshold", "delta_hat_ideal"]
POWER_COLUMNS = ["x", "null_density", "alt_density", "is_rejection_region"]

POWER_GRID_POINTS = 4001
# Half-width of the power grid beyond the farther of the two centres, in standard errors.
POWER_GRID_SPAN = 8.0


def _inputs(study: ObservedStudy, spec: ThresholdSpec, direction: EffectDirection) -> Dict[str, Any]:
    return {
        "study": study.model_dump(),
        "threshold": spec.model_dump(mode="json"),
        "direction": direction.value,
        "threshold_value": realize_threshold(spec, direction, study),
        "se_ideal": se_ideal(study),
    }


def emit_contour_grid(
    study: ObservedStudy,
    region: PlausibleRegion,
    spec: ThresholdSpec,
    direction: EffectDirection,
) -> TabularDataset:
    """PIV over a regular grid of the plausible region.

    Rows run over control_un in the outer loop and treated_un in the inner loop.

    Returns:
        Dataset with columns (control_un, treated_un, probit, piv).
    """
    threshold = realize_threshold(spec, direction, study)
    control = np.linspace(*region.control_un_range, region.resolution)
    treated = np.linspace(*region.treated_un_range, region.resolution)
    control_mesh, treated_mesh = np.meshgrid(control, treated, indexing="ij")
    probit = probit_grid(study, treated_mesh, control_mesh, threshold, direction)
    frame = pd.DataFrame({
        "control_un": control_mesh.ravel(),
        "treated_un": treated_mesh.ravel(),
        "probit": probit.ravel(),
        "piv": std_normal_cdf_array(probit).ravel(),
    })
    logger.info(f"Contour grid: {region.resolution}x{region.resolution} points")
    metadata = _inputs(study, spec, direction)
    metadata["region"] = region.model_dump()
    return TabularDataset(name="contour", frame=frame, metadata=metadata)


def emit_threshold_table(
    study: ObservedStudy,
    control_un: float,
    piv_levels: Sequence[float],
    spec: ThresholdSpec,
    direction: EffectDirection,
) -> TabularDataset:
    """Thresholds of treated_un and of the ideal estimate for each PIV level.

    Raises:
        SaturationError: If a level is exactly 0 or 1.
        DomainError: If a level lies outside [0, 1].
    """
    rows = []
    for level in piv_levels:
        treated_un, delta_hat = invert_for_treated_un(study, control_un, level, spec, direction)
        rows.append({"piv_level": float(level), "treated_un_threshold": treated_un, "delta_hat_ideal": delta_hat})
    frame = pd.DataFrame(rows, columns=TABLE_COLUMNS)
    metadata = _inputs(study, spec, direction)
    metadata["control_un"] = control_un
    return TabularDataset(name="table", frame=frame, metadata=metadata)


def emit_power_figure_data(
    study: ObservedStudy,
    treated_un: float,
    control_un: float,
    spec: ThresholdSpec,
    direction: EffectDirection,
    points: int = POWER_GRID_POINTS,
) -> TabularDataset:
    """Null and alternative densities of the ideal-sample estimate.

    The null is N(0, se^2) and the alternative N(delta_hat_ideal, se^2). The
    grid is symmetric about 0 and contains the threshold abscissa. The mass of
    the alternative over the rejection region (the shaded area) is the PIV; it
    is computed both with Phi and by trapezoid integration of the emitted
    density, and both values go to the metadata.

    Returns:
        Dataset with columns (x, null_density, alt_density, is_rejection_region).
    """
    se = se_ideal(study)
    threshold = realize_threshold(spec, direction, study)
    delta_hat = ideal_distribution(study, treated_un, control_un).mean
    half_width = max(abs(delta_hat), abs(threshold)) + POWER_GRID_SPAN * se
    x = np.unique(np.append(np.linspace(-half_width, half_width, points), threshold))

    null_density = std_normal_pdf(x / se) / se
    alt_density = std_normal_pdf((x - delta_hat) / se) / se
    rejection = direction.sign * (x - threshold) >= 0.0

    shaded_trapezoid = float(integrate.trapezoid(alt_density[rejection], x[rejection]))
    closed = piv(study, treated_un, control_un, spec, direction)
    agreement = abs(shaded_trapezoid - closed.piv)
    if agreement > 1e-4:
        logger.warning(f"Trapezoid shaded area {shaded_trapezoid:.6f} differs from PIV {closed.piv:.6f}")

    frame = pd.DataFrame({
        "x": x,
        "null_density": null_density,
        "alt_density": alt_density,
        "is_rejection_region": rejection,
    })
    metadata = _inputs(study, spec, direction)
    metadata.update({
        "treated_un": treated_un,
        "control_un": control_un,
        "delta_hat_ideal": delta_hat,
        "t_ratio": closed.t_ratio,
        "shaded_mass_phi": closed.piv,
        "shaded_mass_trapezoid": shaded_trapezoid,
        "shaded_mass_agreement": agreement,
    })
    return TabularDataset(name="power", frame=frame, metadata=metadata)
