"""Eight-step robustness report.

``build_report`` runs the procedure end to end with the human-chosen values
(beliefs, threshold, cut-off) supplied as inputs, then renders the narrative.
"""

import logging

from src.analysis.piv import bound_piv, probit_coefficients, realize_threshold
from src.domain.schemas import (
    CounterfactualBelief,
    EffectDirection,
    ObservedStudy,
    RobustnessReport,
    ThresholdSpec,
    Verdict,
)
from src.domain.study import observed_significance
from src.reports.templates import render_report_narrative

logger = logging.getLogger(__name__)

DEFAULT_CUTOFF = 0.8
# Lower bounds this far below the cut-off are borderline rather than weak.
DEFAULT_BAND = 0.05


def classify(lower_piv: float, cutoff: float = DEFAULT_CUTOFF, band: float = DEFAULT_BAND) -> Verdict:
    """Verdict for a lower PIV bound.

    Example:
        >>> classify(0.773)
        <Verdict.BORDERLINE: 'borderline'>
    """
    if lower_piv >= cutoff:
        return Verdict.STRONG
    if lower_piv >= cutoff - band:
        return Verdict.BORDERLINE
    return Verdict.WEAK


def _threshold_label(spec: ThresholdSpec) -> str:
    if not spec.is_statistical:
        return "fixed"
    sided = "two-sided" if spec.sides == 2 else "one-sided"
    alpha = f"alpha {spec.alpha:g}, " if spec.alpha is not None else ""
    return f"statistical, {alpha}{sided}, critical {spec.critical:.4g}"


def build_report(
    study: ObservedStudy,
    belief: CounterfactualBelief,
    spec: ThresholdSpec,
    direction: EffectDirection,
    cutoff: float = DEFAULT_CUTOFF,
    band: float = DEFAULT_BAND,
) -> RobustnessReport:
    """Run the robustness procedure and render its narrative.

    Args:
        study: Validated observed study (step 1).
        belief: Bounded beliefs about both unobserved means (step 4).
        spec: Decision threshold (step 2).
        direction: Significant direction being defended.
        cutoff: PIV at or above which internal validity is strong (step 5).
        band: Width below the cut-off still judged borderline.

    Returns:
        RobustnessReport whose verdict is strong iff the lower bound reaches the cut-off.

    Raises:
        StudyValidationError: If cutoff is not in (0, 1) or band is negative.
    """
    observed = observed_significance(study, spec)
    threshold_value = realize_threshold(spec, direction, study)
    model = probit_coefficients(study, spec, direction)
    bounds = bound_piv(study, belief, spec, direction)
    verdict = classify(bounds.lower.piv, cutoff, band)

    warnings = []
    if not observed.significant:
        warnings.append(
            "The observed result is not significant; the PIV is only meaningful once the null has been rejected."
        )
    if direction.sign * study.delta_hat_obs < 0:
        warnings.append(f"The {direction.value} direction disagrees with the sign of the observed estimate.")
    for side, result in (("lower", bounds.lower), ("upper", bounds.upper)):
        if result.saturated:
            warnings.append(f"The {side} bound is unconstrained by the belief and reported as {result.piv:g}.")

    narrative = render_report_narrative(
        study=study,
        observed=observed,
        threshold_value=threshold_value,
        threshold_label=_threshold_label(spec),
        model=model,
        belief=belief,
        bounds=bounds,
        cutoff=cutoff,
        verdict=verdict,
        band=band,
        warnings=warnings,
    )
    logger.info(f"Report verdict {verdict.value} (lower bound {bounds.lower.piv:.4f}, cut-off {cutoff})")
    return RobustnessReport(
        study=study,
        belief=belief,
        threshold=spec,
        threshold_value=threshold_value,
        direction=direction,
        model=model,
        bounds=bounds,
        cutoff=cutoff,
        verdict=verdict,
        observed=observed,
        warnings=warnings,
        narrative=narrative,
    )
