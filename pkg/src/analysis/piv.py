"""Closed-form PIV engine.

The ideal sample (observed plus counterfactual outcomes) gives delta a normal
law N(theta_t - theta_c, phi_t + phi_c). The probability that the ideal sample
still crosses the decision threshold delta# in the significant direction is
the PIV; its probit is affine in the two unobserved means, which makes bounding
over belief rectangles and inverting for thresholds exact.

Functions accept validated domain models. Scalar and numpy inputs share the
same arithmetic (``_probit``), so grid cells equal point evaluations bit for bit.
"""

import logging
import math
from typing import Optional, Tuple, Union

import numpy as np

from src.domain.errors import ContractError, StudyValidationError
from src.domain.schemas import (
    CounterfactualBelief,
    EffectDirection,
    IdealDistribution,
    ObservedStudy,
    PivBounds,
    PivResult,
    ProbitModel,
    SubgroupEffects,
    ThresholdKind,
    ThresholdSpec,
)
from src.tools.normal import std_normal_cdf, std_normal_quantile

logger = logging.getLogger(__name__)

Real = Union[float, np.ndarray]


def _check_finite(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise StudyValidationError(name, f"must be finite, got {value}")
    return value


def se_ideal(study: ObservedStudy) -> float:
    """Standard error of the simple estimator over the ideal sample.

    Both ideal arms contain all n_obs subjects, so se = sqrt((var_t + var_c) / n_obs).

    For the Hong & Raudenbush study this is sqrt(282.09 / 7639) = 0.19217.
    """
    return math.sqrt((study.var_treated + study.var_control) / study.n_obs)


def ideal_distribution(study: ObservedStudy, treated_un: float, control_un: float) -> IdealDistribution:
    """Distribution of delta given the ideal sample.

    Args:
        study: Validated observed study.
        treated_un: Mean treated outcome the control subjects would have had.
        control_un: Mean control outcome the treated subjects would have had.

    Returns:
        theta_t = (1 - pi) * treated_un + pi * mean_treated_obs,
        theta_c = pi * control_un + (1 - pi) * mean_control_obs,
        phi_t = var_t / n_obs, phi_c = var_c / n_obs.

    Raises:
        StudyValidationError: If a belief is not finite.
    """
    treated_un = _check_finite("treated_un", treated_un)
    control_un = _check_finite("control_un", control_un)
    pi = study.prop_treated
    return IdealDistribution(
        theta_t=(1.0 - pi) * treated_un + pi * study.mean_treated_obs,
        theta_c=pi * control_un + (1.0 - pi) * study.mean_control_obs,
        phi_t=study.var_treated / study.n_obs,
        phi_c=study.var_control / study.n_obs,
    )


def ideal_distribution_general(
    study: ObservedStudy,
    treated_un: float,
    control_un: float,
    n_treated_un: Optional[float] = None,
    n_control_un: Optional[float] = None,
) -> IdealDistribution:
    """Ideal-sample distribution when the unobserved parts have arbitrary sizes.

    Each ideal arm pools its observed part with an unobserved part of the given
    size. In an observational study every control subject contributes one
    counterfactual treated outcome and vice versa, which is the default and
    reproduces ``ideal_distribution``. A size of 0 means nothing is known about
    that arm's counterfactuals, and the ideal arm reduces to the observed one.

    Args:
        study: Validated observed study.
        treated_un: Unobserved treated mean.
        control_un: Unobserved control mean.
        n_treated_un: Size of the unobserved treated sample (default n_control).
        n_control_un: Size of the unobserved control sample (default n_treated).

    Raises:
        StudyValidationError: If a size is negative or a belief is not finite.
    """
    treated_un = _check_finite("treated_un", treated_un)
    control_un = _check_finite("control_un", control_un)
    n_t_ob, n_c_ob = study.n_treated, study.n_control
    n_t_un = n_c_ob if n_treated_un is None else float(n_treated_un)
    n_c_un = n_t_ob if n_control_un is None else float(n_control_un)
    if n_t_un < 0:
        raise StudyValidationError("n_treated_un", f"must be >= 0, got {n_t_un}")
    if n_c_un < 0:
        raise StudyValidationError("n_control_un", f"must be >= 0, got {n_c_un}")

    n_t_id = n_t_ob + n_t_un
    n_c_id = n_c_ob + n_c_un
    if n_treated_un is None and n_control_un is None:
        # Observational case: both ideal arms have n_obs subjects.
        return ideal_distribution(study, treated_un, control_un)
    return IdealDistribution(
        theta_t=(n_t_un * treated_un + n_t_ob * study.mean_treated_obs) / n_t_id,
        theta_c=(n_c_un * control_un + n_c_ob * study.mean_control_obs) / n_c_id,
        phi_t=study.var_treated / n_t_id,
        phi_c=study.var_control / n_c_id,
    )


def realize_threshold(spec: ThresholdSpec, direction: EffectDirection, study: ObservedStudy) -> float:
    """Turn a threshold specification into the numeric delta#.

    Fixed thresholds are returned as is (shift them to test a non-zero null).
    Statistical thresholds are +critical * se_ideal for a positive effect and
    -critical * se_ideal for a negative one.
    """
    if spec.kind is ThresholdKind.FIXED:
        return float(spec.value)
    return direction.sign * spec.critical * se_ideal(study)


def _ideal_mean(study: ObservedStudy, treated_un: Real, control_un: Real) -> Real:
    """theta_t - theta_c written as in the probit link of the PIV."""
    pi = study.prop_treated
    return (
        (1.0 - pi) * treated_un
        - pi * control_un
        + (study.mean_treated_obs + study.mean_control_obs) * pi
        - study.mean_control_obs
    )


def _probit(study: ObservedStudy, treated_un: Real, control_un: Real, threshold: float, sign: int) -> Real:
    scale = math.sqrt(study.n_obs) / math.sqrt(study.var_treated + study.var_control)
    bracket = _ideal_mean(study, treated_un, control_un) - threshold
    return sign * (scale * bracket)


def probit_piv(
    study: ObservedStudy,
    treated_un: float,
    control_un: float,
    threshold: float,
    direction: EffectDirection,
) -> float:
    """Probit link of the PIV for a realised threshold.

    For a positive effect:
        sqrt(n) / sqrt(var_t + var_c) * [(1 - pi) Yt_un - pi Yc_un + (Yt_ob + Yc_ob) pi - Yc_ob - delta#]
    For a negative effect the same expression negated, with the same delta#.
    """
    treated_un = _check_finite("treated_un", treated_un)
    control_un = _check_finite("control_un", control_un)
    return float(_probit(study, treated_un, control_un, float(threshold), direction.sign))


def probit_piv_statistical(
    study: ObservedStudy,
    treated_un: float,
    control_un: float,
    critical: float,
    direction: EffectDirection,
) -> float:
    """Probit link with a statistical threshold, written with an explicit -critical term."""
    treated_un = _check_finite("treated_un", treated_un)
    control_un = _check_finite("control_un", control_un)
    scale = math.sqrt(study.n_obs) / math.sqrt(study.var_treated + study.var_control)
    return direction.sign * scale * _ideal_mean(study, treated_un, control_un) - critical


def probit_grid(
    study: ObservedStudy,
    treated_un: np.ndarray,
    control_un: np.ndarray,
    threshold: float,
    direction: EffectDirection,
) -> np.ndarray:
    """Vectorised ``probit_piv`` over broadcastable arrays of unobserved means."""
    return _probit(
        study,
        np.asarray(treated_un, dtype=np.float64),
        np.asarray(control_un, dtype=np.float64),
        float(threshold),
        direction.sign,
    )


def probit_coefficients(study: ObservedStudy, spec: ThresholdSpec, direction: EffectDirection) -> ProbitModel:
    """Affine probit model a * control_un + b * treated_un + c.

    For the Hong & Raudenbush study with a statistical threshold and a
    negative effect this is 0.32 * Yc_un - 4.883 * Yt_un + 209.77.
    """
    pi = study.prop_treated
    sign = direction.sign
    threshold = realize_threshold(spec, direction, study)
    scale = math.sqrt(study.n_obs) / math.sqrt(study.var_treated + study.var_control)
    constant = (study.mean_treated_obs + study.mean_control_obs) * pi - study.mean_control_obs - threshold
    return ProbitModel(
        coef_control_un=-sign * scale * pi,
        coef_treated_un=sign * scale * (1.0 - pi),
        intercept=sign * scale * constant,
        direction=direction,
    )


def _result(
    study: ObservedStudy,
    treated_un: float,
    control_un: float,
    spec: ThresholdSpec,
    direction: EffectDirection,
) -> PivResult:
    threshold = realize_threshold(spec, direction, study)
    probit = probit_piv(study, treated_un, control_un, threshold, direction)
    se = se_ideal(study)
    delta_hat = ideal_distribution(study, treated_un, control_un).mean
    return PivResult(
        probit_value=probit,
        piv=std_normal_cdf(probit),
        direction=direction,
        delta_hat_ideal=delta_hat,
        se_ideal=se,
        t_ratio=delta_hat / se,
        threshold_value=threshold,
        threshold_kind=spec.kind,
        critical=spec.critical if spec.is_statistical else None,
        treated_un=treated_un,
        control_un=control_un,
    )


def piv(
    study: ObservedStudy,
    treated_un: float,
    control_un: float,
    spec: ThresholdSpec,
    direction: EffectDirection,
) -> PivResult:
    """Compute the PIV at point beliefs about both unobserved means.

    Args:
        study: Validated observed study.
        treated_un: Unobserved treated mean.
        control_un: Unobserved control mean.
        spec: Decision threshold specification.
        direction: Significant direction being defended.

    Returns:
        PivResult with piv = Phi(probit_value). A tie at the decision boundary
        gives probit 0 and PIV 0.5.

    Raises:
        StudyValidationError: If a belief is not finite.
    """
    result = _result(study, treated_un, control_un, spec, direction)
    logger.info(
        f"PIV at (treated_un={treated_un}, control_un={control_un}, {direction.value}) "
        f"= {result.piv:.6f} (probit {result.probit_value:.6f})"
    )
    return result


def _saturated(study: ObservedStudy, spec: ThresholdSpec, direction: EffectDirection, high: bool) -> PivResult:
    """Bound side that no finite belief endpoint constrains."""
    sign = 1.0 if high else -1.0
    inf = sign * math.inf
    return PivResult(
        probit_value=inf,
        piv=1.0 if high else 0.0,
        direction=direction,
        delta_hat_ideal=direction.sign * inf,
        se_ideal=se_ideal(study),
        t_ratio=direction.sign * inf,
        threshold_value=realize_threshold(spec, direction, study),
        threshold_kind=spec.kind,
        critical=spec.critical if spec.is_statistical else None,
        saturated=True,
    )


def _corner(belief: CounterfactualBelief, direction: EffectDirection, maximize: bool) -> Tuple[Optional[float], Optional[float]]:
    """Corner of the belief rectangle where the PIV is extreme.

    The probit increases with treated_un and decreases with control_un for a
    positive effect; the signs flip for a negative effect.
    """
    treated_high = (direction.sign > 0) == maximize
    control_high = not treated_high
    return belief.treated_un.endpoint(treated_high), belief.control_un.endpoint(control_high)


def bound_piv(
    study: ObservedStudy,
    belief: CounterfactualBelief,
    spec: ThresholdSpec,
    direction: EffectDirection,
) -> PivBounds:
    """Bound the PIV over a rectangle of beliefs.

    The probit is affine in both unobserved means with coefficients of known
    sign, so the extremes sit at corners of the rectangle. When the needed
    endpoint of a one-sided belief is missing, that side of the bound is
    reported as saturated (PIV 0 for the lower bound, 1 for the upper).

    Returns:
        PivBounds(lower, upper).
    """
    sides = []
    for maximize in (False, True):
        treated_un, control_un = _corner(belief, direction, maximize)
        if treated_un is None or control_un is None:
            logger.warning(
                f"{'Upper' if maximize else 'Lower'} PIV bound is unconstrained by the belief; "
                f"reporting it as {1.0 if maximize else 0.0}"
            )
            sides.append(_saturated(study, spec, direction, high=maximize))
        else:
            sides.append(_result(study, treated_un, control_un, spec, direction))
    lower, upper = sides
    logger.info(f"PIV bounds: [{lower.piv:.6f}, {upper.piv:.6f}]")
    return PivBounds(lower=lower, upper=upper)


def _target_delta(
    study: ObservedStudy,
    target_piv: float,
    spec: ThresholdSpec,
    direction: EffectDirection,
) -> float:
    """Ideal-sample estimate at which the PIV equals target_piv."""
    z = std_normal_quantile(target_piv)
    threshold = realize_threshold(spec, direction, study)
    return threshold + direction.sign * z * se_ideal(study)


def invert_for_treated_un(
    study: ObservedStudy,
    control_un: float,
    target_piv: float,
    spec: ThresholdSpec,
    direction: EffectDirection,
) -> Tuple[float, float]:
    """Solve for the treated_un at which the PIV equals target_piv.

    Args:
        study: Validated observed study.
        control_un: Fixed unobserved control mean.
        target_piv: Target probability in (0, 1).
        spec: Decision threshold specification.
        direction: Significant direction being defended.

    Returns:
        (treated_un threshold, implied delta_hat_ideal).

    Raises:
        SaturationError: If target_piv is exactly 0 or 1.
        DomainError: If target_piv lies outside [0, 1].

    For the Hong & Raudenbush study with control_un = 45.2 and a target of
    0.8 this gives treated_un = 45.76 and delta_hat_ideal = -0.54.
    """
    control_un = _check_finite("control_un", control_un)
    delta = _target_delta(study, target_piv, spec, direction)
    pi = study.prop_treated
    treated_un = (
        delta - pi * study.mean_treated_obs + pi * control_un + (1.0 - pi) * study.mean_control_obs
    ) / (1.0 - pi)
    return treated_un, delta


def invert_for_control_un(
    study: ObservedStudy,
    treated_un: float,
    target_piv: float,
    spec: ThresholdSpec,
    direction: EffectDirection,
) -> Tuple[float, float]:
    """Solve for the control_un at which the PIV equals target_piv.

    Returns:
        (control_un threshold, implied delta_hat_ideal).

    Raises:
        SaturationError: If target_piv is exactly 0 or 1.
        DomainError: If target_piv lies outside [0, 1].
    """
    treated_un = _check_finite("treated_un", treated_un)
    delta = _target_delta(study, target_piv, spec, direction)
    pi = study.prop_treated
    control_un = (
        (1.0 - pi) * treated_un + pi * study.mean_treated_obs - (1.0 - pi) * study.mean_control_obs - delta
    ) / pi
    return control_un, delta


def power_identity(result: PivResult, critical: float) -> float:
    """Probit of the PIV recovered from the ideal-sample t-ratio.

    With a statistical threshold the PIV is the power of retesting delta = 0
    in the ideal sample: probit = T - critical for a positive effect and
    -T - critical for a negative one.

    Raises:
        ContractError: If the result was computed with a fixed threshold.
    """
    if result.threshold_kind is not ThresholdKind.STATISTICAL:
        raise ContractError("power_identity requires a result computed with a statistical threshold")
    return result.direction.sign * result.t_ratio - critical


def subgroup_effects(study: ObservedStudy, treated_un: float, control_un: float) -> SubgroupEffects:
    """Average effects for the treated and for the controls implied by point beliefs.

    The ideal estimate is their treated-proportion weighted average:
    delta_hat_ideal = pi * effect_on_treated + (1 - pi) * effect_on_controls.
    """
    treated_un = _check_finite("treated_un", treated_un)
    control_un = _check_finite("control_un", control_un)
    return SubgroupEffects(
        effect_on_treated=study.mean_treated_obs - control_un,
        effect_on_controls=treated_un - study.mean_control_obs,
        delta_hat_ideal=ideal_distribution(study, treated_un, control_un).mean,
    )
