"""Validation and interpretation of the observed study.

This module turns raw user input (dicts from the JSON study-config or
already-built models) into validated domain objects, decides which
significant direction is being defended, and checks whether the observed
result is significant in the first place.
"""

import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Union

from pydantic import ValidationError

from src.domain.errors import AmbiguousDirectionError, StudyValidationError
from src.domain.schemas import (
    EffectDirection,
    ObservedStudy,
    ObservedTest,
    StudyConfig,
    ThresholdSpec,
)

logger = logging.getLogger(__name__)


def _first_error(exc: ValidationError, prefix: str = "") -> StudyValidationError:
    """Translate a pydantic ValidationError into a StudyValidationError naming the field."""
    error = exc.errors()[0]
    loc = ".".join(str(part) for part in error.get("loc", ()) if part != "__root__")
    field = ".".join(part for part in (prefix, loc) if part) or prefix or "input"
    return StudyValidationError(field, error.get("msg", "invalid value"))


def validate_study(raw: Union[ObservedStudy, Mapping[str, Any]]) -> ObservedStudy:
    """Validate observed-study summary statistics.

    Args:
        raw: An ObservedStudy or a mapping with its six fields.

    Returns:
        The validated study, unchanged in value.

    Raises:
        StudyValidationError: If a variance is not positive, prop_treated lies
            outside (0, 1), n_obs < 2 or any field is non-finite. The error's
            ``field`` names the offending field.

    Example:
        >>> study = validate_study({
        ...     "mean_treated_obs": 36.77, "mean_control_obs": 45.78,
        ...     "var_treated": 143.26, "var_control": 138.83,
        ...     "n_obs": 7639, "prop_treated": 0.0617,
        ... })
        >>> study.n_obs
        7639
    """
    payload = raw.model_dump() if isinstance(raw, ObservedStudy) else dict(raw)
    try:
        return ObservedStudy.model_validate(payload)
    except ValidationError as exc:
        raise _first_error(exc) from exc


def infer_direction(study: ObservedStudy, spec: Optional[ThresholdSpec] = None) -> EffectDirection:
    """Infer which significant direction the observed result defends.

    Args:
        study: Validated observed study.
        spec: Threshold specification (unused by the sign rule, kept for callers
            that resolve direction and threshold together).

    Returns:
        NEGATIVE_SIGNIFICANT if the observed estimate is negative, else POSITIVE_SIGNIFICANT.

    Raises:
        AmbiguousDirectionError: If the observed estimate is exactly zero.
    """
    delta_hat = study.delta_hat_obs
    if delta_hat == 0.0:
        raise AmbiguousDirectionError(
            "observed estimate is exactly 0; there is no significant effect to defend"
        )
    return EffectDirection.NEGATIVE_SIGNIFICANT if delta_hat < 0 else EffectDirection.POSITIVE_SIGNIFICANT


def resolve_direction(
    study: ObservedStudy,
    requested: Union[str, EffectDirection, None] = "auto",
    spec: Optional[ThresholdSpec] = None,
) -> EffectDirection:
    """Apply an explicit direction override, or infer it from the sign of the estimate.

    Raises:
        StudyValidationError: If ``requested`` is not auto, positive or negative.
        AmbiguousDirectionError: If auto is requested and the estimate is zero.
    """
    if requested is None or requested == "auto":
        return infer_direction(study, spec)
    try:
        direction = EffectDirection(requested)
    except ValueError as exc:
        raise StudyValidationError("direction", f"expected auto, positive or negative, got {requested!r}") from exc
    if study.delta_hat_obs != 0.0 and direction.sign * study.delta_hat_obs < 0:
        logger.warning(
            f"Direction overridden to {direction.value} although the observed estimate "
            f"is {study.delta_hat_obs:+.4g}"
        )
    return direction


def observed_significance(study: ObservedStudy, spec: ThresholdSpec) -> ObservedTest:
    """Test the observed sample alone with known variances.

    The standard error uses the observed arm sizes, sqrt(var_t / n_t + var_c / n_c).
    Fixed thresholds carry no critical value, so the conventional 1.96 is used.

    Returns:
        The observed estimate, its standard error, t-ratio and significance flag.
    """
    se_obs = math.sqrt(study.var_treated / study.n_treated + study.var_control / study.n_control)
    critical = spec.critical if spec.is_statistical and spec.critical is not None else 1.96
    t_ratio = study.delta_hat_obs / se_obs
    significant = abs(t_ratio) > critical
    if not significant:
        logger.warning(
            f"Observed result is not significant (t = {t_ratio:.4g}, critical = {critical:.4g}); "
            "the PIV is only meaningful once the null has been rejected"
        )
    return ObservedTest(
        delta_hat_obs=study.delta_hat_obs,
        se_obs=se_obs,
        t_ratio=t_ratio,
        critical=critical,
        significant=significant,
    )


def parse_config(payload: Mapping[str, Any]) -> StudyConfig:
    """Validate a study-config mapping.

    Raises:
        StudyValidationError: Naming the first offending field path, e.g. "study.var_treated".
    """
    try:
        return StudyConfig.model_validate(dict(payload))
    except ValidationError as exc:
        raise _first_error(exc) from exc


def read_config_payload(path: Union[str, Path]) -> Dict[str, Any]:
    """Read the raw JSON object of a study-config file without validating it.

    Raises:
        OSError: If the file cannot be read.
        StudyValidationError: If the file is not a JSON object.
    """
    path = Path(path)
    with open(path, "r", encoding="utf-8") as f:
        try:
            payload = json.load(f)
        except json.JSONDecodeError as exc:
            raise StudyValidationError("config", f"invalid JSON in {path}: {exc}") from exc
    if not isinstance(payload, dict):
        raise StudyValidationError("config", "top level must be a JSON object")
    return payload


def load_config(path: Union[str, Path]) -> StudyConfig:
    """Load and validate a JSON study-config file.

    Args:
        path: Path to the JSON file.

    Returns:
        The validated configuration.

    Raises:
        OSError: If the file cannot be read.
        StudyValidationError: If the JSON is malformed or violates the schema.
    """
    config = parse_config(read_config_payload(path))
    logger.info(f"Loaded study config from {path}")
    return config
