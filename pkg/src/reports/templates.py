"""Text templates for the robustness report.

The narrative walks through the eight steps of the robustness procedure:
parameters, threshold, probit model, beliefs, cut-off, bounds, verdict and
the bivariate reading. Numbers arrive already computed; the template only
formats them.
"""

from typing import Optional

from jinja2 import Template

from src.domain.errors import StudyValidationError
from src.domain.schemas import (
    CounterfactualBelief,
    ObservedStudy,
    ObservedTest,
    PivBounds,
    PointOrInterval,
    ProbitModel,
    Verdict,
)

MINUS = "−"
DOT = "·"


def _signed(value: float, spec: str, leading: bool = False) -> str:
    """Format a coefficient with a spaced sign, e.g. ' - 4.883' or '0.32'."""
    text = format(abs(value), spec)
    if leading:
        return f"{MINUS}{text}" if value < 0 else text
    return f" {MINUS} {text}" if value < 0 else f" + {text}"


def format_probit_model(model: ProbitModel) -> str:
    """Affine probit model, e.g. "probit(PIV) = 0.32·Ycun − 4.883·Ytun + 209.77"."""
    return (
        f"probit(PIV) = {_signed(model.coef_control_un, '.2f', leading=True)}{DOT}Ycun"
        f"{_signed(model.coef_treated_un, '.3f')}{DOT}Ytun"
        f"{_signed(model.intercept, '.2f')}"
    )


def format_univariate_model(model: ProbitModel, control_un: float) -> str:
    """Probit model at a fixed control_un, e.g. "probit(PIV) = 224.28 − 4.883·Ytun"."""
    intercept, slope = model.at_control_un(control_un)
    return (
        f"probit(PIV) = {_signed(intercept, '.2f', leading=True)}"
        f"{_signed(slope, '.3f')}{DOT}Ytun"
    )


def format_belief(value: PointOrInterval) -> str:
    if value.is_point:
        return f"= {value.lower:.4g}"
    if value.lower is None:
        return f"at most {value.upper:.4g}"
    if value.upper is None:
        return f"at least {value.lower:.4g}"
    return f"in [{value.lower:.4g}, {value.upper:.4g}]"


REPORT_NARRATIVE = Template("""Robustness of the {{ direction }} effect to unobserved counterfactuals

Step 1 - Parameters
  Observed means: treated {{ "%.4g"|format(study.mean_treated_obs) }}, control {{ "%.4g"|format(study.mean_control_obs) }}
  Variances: treated {{ "%.5g"|format(study.var_treated) }}, control {{ "%.5g"|format(study.var_control) }}
  Sample size {{ study.n_obs }}, treated proportion {{ "%.4g"|format(study.prop_treated) }}
  Observed estimate {{ "%.4g"|format(observed.delta_hat_obs) }} (t = {{ "%.4g"|format(observed.t_ratio) }}, {{ "significant" if observed.significant else "NOT significant" }})

Step 2 - Decision threshold
  delta# = {{ "%.4g"|format(threshold_value) }} ({{ threshold_label }})

Step 3 - Probit model
  {{ probit_model }}
{% if univariate_model %}  {{ univariate_model }}
{% endif %}
Step 4 - Beliefs about the unobserved means
  Ytun {{ treated_belief }}
  Ycun {{ control_belief }}

Step 5 - Cut-off
  A PIV of at least {{ "%.2f"|format(cutoff) }} indicates strong internal validity.

Step 6 - PIV bounds
  Lower bound {{ "%.4g"|format(bounds.lower.piv) }}{% if not bounds.lower.saturated %} at (Ytun = {{ "%.4g"|format(bounds.lower.treated_un) }}, Ycun = {{ "%.4g"|format(bounds.lower.control_un) }}){% else %} (unconstrained){% endif %}
  Upper bound {{ "%.4g"|format(bounds.upper.piv) }}{% if not bounds.upper.saturated %} at (Ytun = {{ "%.4g"|format(bounds.upper.treated_un) }}, Ycun = {{ "%.4g"|format(bounds.upper.control_un) }}){% else %} (unconstrained){% endif %}

Step 7 - Verdict
{% if verdict == "strong" %}  Strong: the lower bound reaches the cut-off, so the significant result survives every plausible counterfactual.
{% elif verdict == "borderline" %}  Borderline: the lower bound falls short of the cut-off but stays within {{ "%.2f"|format(band) }} of it.
{% else %}  Weak: the lower bound is well below the cut-off, so plausible counterfactuals could overturn the result.
{% endif %}
Step 8 - Bivariate reading
{% if bivariate %}  Both unobserved means vary; the bounds above are taken over the corners of the belief rectangle.
{% else %}  Ycun is held at a point; vary it (or use the contour grid) to read the PIV jointly over both unobserved means.
{% endif %}{% if warnings %}
Warnings
{% for warning in warnings %}  - {{ warning }}
{% endfor %}{% endif %}""")


def render_report_narrative(
    study: ObservedStudy,
    observed: ObservedTest,
    threshold_value: float,
    threshold_label: str,
    model: ProbitModel,
    belief: CounterfactualBelief,
    bounds: PivBounds,
    cutoff: float,
    verdict: Verdict,
    band: float,
    warnings: Optional[list] = None,
) -> str:
    """Render the eight-step narrative.

    Raises:
        StudyValidationError: If cutoff is not in (0, 1) or band is negative.
    """
    if not 0.0 < cutoff < 1.0:
        raise StudyValidationError("cutoff", f"must lie in (0, 1), got {cutoff}")
    if band < 0.0:
        raise StudyValidationError("band", f"must be non-negative, got {band}")

    univariate = None
    if belief.control_un.is_point:
        univariate = format_univariate_model(model, belief.control_un.lower)

    return REPORT_NARRATIVE.render(
        direction=model.direction.value,
        study=study,
        observed=observed,
        threshold_value=threshold_value,
        threshold_label=threshold_label,
        probit_model=format_probit_model(model),
        univariate_model=univariate,
        treated_belief=format_belief(belief.treated_un),
        control_belief=format_belief(belief.control_un),
        cutoff=cutoff,
        bounds=bounds,
        verdict=verdict.value,
        band=band,
        bivariate=not (belief.treated_un.is_point or belief.control_un.is_point),
        warnings=warnings or [],
    )
