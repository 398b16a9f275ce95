"""Domain models for pivkit.

This module defines the core Pydantic models used throughout the package:
the observed study, beliefs about the counterfactual (unobserved) sample
means, the decision threshold, the ideal-sample distribution and the PIV
results, plus the configuration types of the Monte Carlo oracle and the
report emitters.

All models are frozen so they can be shared freely between threads.
"""

import math
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from src.tools.normal import std_normal_quantile


DEFAULT_ALPHA = 0.05
# The conventional two-sided 5% critical value; golden numbers are computed with it.
DEFAULT_CRITICAL = 1.96


def critical_for(alpha: float, sides: int = 2) -> float:
    """Critical value of a z-test at level alpha.

    Args:
        alpha: Significance level in (0, 1).
        sides: 2 for a two-sided alternative, 1 for a one-sided one.

    Returns:
        1.96 for the conventional two-sided 5% test, Phi^-1(1 - alpha/sides) otherwise.

    Raises:
        ValueError: If alpha is outside (0, 1) or sides is not 1 or 2.

    Example:
        >>> critical_for(0.05)
        1.96
        >>> round(critical_for(0.05, sides=1), 3)
        1.645
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    if sides not in (1, 2):
        raise ValueError(f"sides must be 1 or 2, got {sides}")
    if sides == 2 and alpha == DEFAULT_ALPHA:
        return DEFAULT_CRITICAL
    return std_normal_quantile(1.0 - alpha / sides)


class EffectDirection(str, Enum):
    """Direction of the significant effect found in the observed sample."""
    POSITIVE_SIGNIFICANT = "positive"
    NEGATIVE_SIGNIFICANT = "negative"

    @property
    def sign(self) -> int:
        """+1 for a positive effect, -1 for a negative one."""
        return 1 if self is EffectDirection.POSITIVE_SIGNIFICANT else -1


class ThresholdKind(str, Enum):
    """How the decision threshold delta# is obtained."""
    FIXED = "fixed"
    STATISTICAL = "statistical"


class SimulationMode(str, Enum):
    """What the Monte Carlo oracle samples per replication."""
    SAMPLE_ESTIMATOR = "estimator"
    SAMPLE_INDIVIDUALS = "individuals"


class Verdict(str, Enum):
    """Strength of internal validity against the PIV cut-off."""
    STRONG = "strong"
    BORDERLINE = "borderline"
    WEAK = "weak"


class ObservedStudy(BaseModel):
    """Summary statistics of the observed study.

    Attributes:
        mean_treated_obs: Observed treated-arm mean.
        mean_control_obs: Observed control-arm mean.
        var_treated: Known variance of the treated outcome.
        var_control: Known variance of the control outcome.
        n_obs: Total observed sample size (both arms).
        prop_treated: Proportion of treated subjects, n_t / n.
    """

    model_config = ConfigDict(
        frozen=True,
        json_schema_extra={
            "examples": [
                {
                    "mean_treated_obs": 36.77,
                    "mean_control_obs": 45.78,
                    "var_treated": 143.26,
                    "var_control": 138.83,
                    "n_obs": 7639,
                    "prop_treated": 0.0617,
                }
            ]
        },
    )

    mean_treated_obs: float = Field(..., allow_inf_nan=False, description="Observed treated mean")
    mean_control_obs: float = Field(..., allow_inf_nan=False, description="Observed control mean")
    var_treated: float = Field(..., gt=0, allow_inf_nan=False, description="Treated outcome variance")
    var_control: float = Field(..., gt=0, allow_inf_nan=False, description="Control outcome variance")
    n_obs: int = Field(..., ge=2, description="Total observed sample size")
    prop_treated: float = Field(..., gt=0, lt=1, allow_inf_nan=False, description="Treated proportion")

    @property
    def n_treated(self) -> float:
        """Observed treated-arm size (pi * n, not rounded)."""
        return self.prop_treated * self.n_obs

    @property
    def n_control(self) -> float:
        """Observed control-arm size ((1 - pi) * n, not rounded)."""
        return (1.0 - self.prop_treated) * self.n_obs

    @property
    def delta_hat_obs(self) -> float:
        """Observed simple estimate of the average treatment effect."""
        return self.mean_treated_obs - self.mean_control_obs


class PointOrInterval(BaseModel):
    """A closed interval belief about one unobserved mean; a point when lower == upper.

    Either endpoint may be None for a one-sided belief ("at most 45.78"). The
    PIV bound on the unconstrained side is then reported as saturated.

    Attributes:
        lower: Lowest plausible value, or None if unbounded below.
        upper: Highest plausible value, or None if unbounded above.
    """

    model_config = ConfigDict(
        frozen=True,
        json_schema_extra={"examples": [{"point": 45.2}, {"lower": 36.77, "upper": 45.78}]},
    )

    lower: Optional[float] = Field(default=None, allow_inf_nan=False)
    upper: Optional[float] = Field(default=None, allow_inf_nan=False)

    @model_validator(mode="before")
    @classmethod
    def expand_point(cls, data: Any) -> Any:
        """Accept the JSON shorthand {"point": x}."""
        if isinstance(data, dict) and "point" in data:
            extra = set(data) - {"point"}
            if extra:
                raise ValueError(f"'point' cannot be combined with {sorted(extra)}")
            return {"lower": data["point"], "upper": data["point"]}
        if isinstance(data, (int, float)) and not isinstance(data, bool):
            return {"lower": data, "upper": data}
        return data

    @model_validator(mode="after")
    def check_order(self) -> "PointOrInterval":
        if self.lower is None and self.upper is None:
            raise ValueError("a belief needs at least one finite endpoint")
        if self.lower is not None and self.upper is not None and self.lower > self.upper:
            raise ValueError(f"lower ({self.lower}) must not exceed upper ({self.upper})")
        return self

    @classmethod
    def point(cls, value: float) -> "PointOrInterval":
        return cls(lower=value, upper=value)

    @classmethod
    def interval(cls, lower: Optional[float], upper: Optional[float]) -> "PointOrInterval":
        return cls(lower=lower, upper=upper)

    @property
    def is_point(self) -> bool:
        return self.lower is not None and self.lower == self.upper

    def endpoint(self, high: bool) -> Optional[float]:
        """Return the upper endpoint if high else the lower one."""
        return self.upper if high else self.lower


class CounterfactualBelief(BaseModel):
    """Bounded beliefs about both unobserved sample means.

    Attributes:
        treated_un: Belief about the mean treated outcome of the control subjects.
        control_un: Belief about the mean control outcome of the treated subjects.
    """

    model_config = ConfigDict(frozen=True)

    treated_un: PointOrInterval
    control_un: PointOrInterval


class ThresholdSpec(BaseModel):
    """The decision threshold delta#.

    A fixed threshold is a value in outcome units. A statistical threshold is
    +/- critical * se over the ideal sample; critical is derived from alpha
    when not given explicitly.

    Attributes:
        kind: Fixed or statistical.
        value: The fixed threshold (fixed kind only).
        alpha: Significance level (statistical kind only).
        critical: Critical value (statistical kind only).
        sides: 2 for two-sided testing, 1 for one-sided.
    """

    model_config = ConfigDict(
        frozen=True,
        json_schema_extra={"examples": [{"fixed": 0.0}, {"statistical": {"alpha": 0.05}}]},
    )

    kind: ThresholdKind = ThresholdKind.STATISTICAL
    value: Optional[float] = Field(default=None, allow_inf_nan=False)
    alpha: Optional[float] = Field(default=DEFAULT_ALPHA, gt=0, lt=1)
    critical: Optional[float] = Field(default=None, gt=0, allow_inf_nan=False)
    sides: int = Field(default=2, ge=1, le=2)

    @model_validator(mode="before")
    @classmethod
    def expand_json_shape(cls, data: Any) -> Any:
        """Accept {"fixed": v} and {"statistical": {...}} and resolve the critical value."""
        if not isinstance(data, dict):
            return data
        data = dict(data)
        if "kind" not in data:
            if "fixed" in data:
                data = {"kind": ThresholdKind.FIXED, "value": data["fixed"], "alpha": None}
            elif "statistical" in data:
                data = {"kind": ThresholdKind.STATISTICAL, **(data["statistical"] or {})}
        kind = ThresholdKind(data.get("kind", ThresholdKind.STATISTICAL))
        if kind is ThresholdKind.STATISTICAL and data.get("critical") is None:
            alpha = data.get("alpha")
            alpha = DEFAULT_ALPHA if alpha is None else float(alpha)
            data["alpha"] = alpha
            data["critical"] = critical_for(alpha, int(data.get("sides", 2)))
        return data

    @model_validator(mode="after")
    def check_fixed_value(self) -> "ThresholdSpec":
        if self.kind is ThresholdKind.FIXED and self.value is None:
            raise ValueError("a fixed threshold needs a value")
        return self

    @classmethod
    def fixed(cls, value: float) -> "ThresholdSpec":
        return cls(kind=ThresholdKind.FIXED, value=value, alpha=None)

    @classmethod
    def statistical(
        cls,
        alpha: float = DEFAULT_ALPHA,
        critical: Optional[float] = None,
        sides: int = 2,
    ) -> "ThresholdSpec":
        return cls(kind=ThresholdKind.STATISTICAL, alpha=alpha, critical=critical, sides=sides)

    @property
    def is_statistical(self) -> bool:
        return self.kind is ThresholdKind.STATISTICAL


class IdealDistribution(BaseModel):
    """Normal law of delta given the ideal sample: N(theta_t - theta_c, phi_t + phi_c).

    Attributes:
        theta_t: Ideal treated mean.
        theta_c: Ideal control mean.
        phi_t: Variance of the ideal treated mean.
        phi_c: Variance of the ideal control mean.
    """

    model_config = ConfigDict(frozen=True)

    theta_t: float
    theta_c: float
    phi_t: float = Field(..., gt=0)
    phi_c: float = Field(..., gt=0)

    @property
    def mean(self) -> float:
        return self.theta_t - self.theta_c

    @property
    def variance(self) -> float:
        return self.phi_t + self.phi_c

    @property
    def se(self) -> float:
        return math.sqrt(self.variance)


class PivResult(BaseModel):
    """Outcome of a PIV evaluation at one pair of unobserved means.

    A saturated result stands for an unconstrained belief side: its probit,
    ideal estimate and t-ratio are infinite and piv is exactly 0 or 1.

    Attributes:
        probit_value: Probit link of the PIV.
        piv: The probability itself.
        direction: Which significant direction is being defended.
        delta_hat_ideal: Ideal-sample estimate theta_t - theta_c.
        se_ideal: Standard error over the ideal sample.
        t_ratio: delta_hat_ideal / se_ideal.
        threshold_value: The realised delta#.
        threshold_kind: Whether delta# was fixed or statistical.
        critical: Critical value for statistical thresholds.
        treated_un: Unobserved treated mean used (None when saturated).
        control_un: Unobserved control mean used (None when saturated).
        saturated: True when this side of a bound is unconstrained.
    """

    model_config = ConfigDict(frozen=True)

    probit_value: float
    piv: float = Field(..., ge=0.0, le=1.0)
    direction: EffectDirection
    delta_hat_ideal: float
    se_ideal: float = Field(..., gt=0)
    t_ratio: float
    threshold_value: float
    threshold_kind: ThresholdKind
    critical: Optional[float] = None
    treated_un: Optional[float] = None
    control_un: Optional[float] = None
    saturated: bool = False


class PivBounds(BaseModel):
    """Lower and upper PIV over a belief rectangle."""

    model_config = ConfigDict(frozen=True)

    lower: PivResult
    upper: PivResult


class ProbitModel(BaseModel):
    """The affine probit link: probit(PIV) = a * control_un + b * treated_un + c.

    Attributes:
        coef_control_un: a.
        coef_treated_un: b.
        intercept: c.
        direction: Direction the model was derived for.
    """

    model_config = ConfigDict(frozen=True)

    coef_control_un: float
    coef_treated_un: float
    intercept: float
    direction: EffectDirection

    def evaluate(self, treated_un: float, control_un: float) -> float:
        return self.coef_control_un * control_un + self.coef_treated_un * treated_un + self.intercept

    def at_control_un(self, control_un: float) -> Tuple[float, float]:
        """Univariate form for a fixed control_un: (intercept, slope on treated_un)."""
        return self.intercept + self.coef_control_un * control_un, self.coef_treated_un

    def at_treated_un(self, treated_un: float) -> Tuple[float, float]:
        """Univariate form for a fixed treated_un: (intercept, slope on control_un)."""
        return self.intercept + self.coef_treated_un * treated_un, self.coef_control_un


class SubgroupEffects(BaseModel):
    """Belief-implied average effects for the treated and for the controls."""

    model_config = ConfigDict(frozen=True)

    effect_on_treated: float = Field(..., description="mean_treated_obs - control_un")
    effect_on_controls: float = Field(..., description="treated_un - mean_control_obs")
    delta_hat_ideal: float


class ObservedTest(BaseModel):
    """Significance test of the observed sample alone."""

    model_config = ConfigDict(frozen=True)

    delta_hat_obs: float
    se_obs: float = Field(..., gt=0)
    t_ratio: float
    critical: float
    significant: bool


class SimConfig(BaseModel):
    """Monte Carlo oracle configuration.

    Attributes:
        n_replications: Number of simulated ideal samples.
        seed: Root seed of the counter-based generator.
        mode: Sample the estimator directly or the individual outcomes.
        workers: Threads used to evaluate replication blocks.
        block_size: Replications per independent random substream.
    """

    model_config = ConfigDict(frozen=True)

    n_replications: int = Field(default=1_000_000, ge=1)
    seed: int = Field(default=20190101, ge=0, lt=2**64)
    mode: SimulationMode = SimulationMode.SAMPLE_ESTIMATOR
    workers: int = Field(default=1, ge=1)
    block_size: int = Field(default=65_536, ge=1)


class SimResult(BaseModel):
    """Monte Carlo estimate of the PIV."""

    model_config = ConfigDict(frozen=True)

    piv_hat: float = Field(..., ge=0.0, le=1.0)
    mc_stderr: float = Field(..., ge=0.0)
    closed_form: float
    n_replications: int
    seed: int
    mode: SimulationMode
    rng_algorithm: str
    # Substreams are keyed per block, so the estimate depends on the block size.
    block_size: int = Field(..., ge=1)

    def agrees(self, n_sigma: float = 3.0) -> bool:
        """True when the closed form lies within n_sigma Monte Carlo errors.

        A zero standard error (all replications on one side) only agrees with a
        closed form that is itself saturated to within 1 / n_replications.
        """
        tolerance = max(n_sigma * self.mc_stderr, 1.0 / self.n_replications)
        return abs(self.piv_hat - self.closed_form) <= tolerance


class PlausibleRegion(BaseModel):
    """Rectangle of belief-consistent (treated_un, control_un) values.

    Attributes:
        treated_un_range: Closed interval for treated_un.
        control_un_range: Closed interval for control_un.
        resolution: Grid points per axis.
    """

    model_config = ConfigDict(frozen=True)

    treated_un_range: Tuple[float, float] = (36.77, 45.78)
    control_un_range: Tuple[float, float] = (36.77, 45.78)
    resolution: int = Field(default=201, ge=2)

    @field_validator("treated_un_range", "control_un_range")
    @classmethod
    def validate_range(cls, v: Tuple[float, float]) -> Tuple[float, float]:
        lower, upper = v
        if not (math.isfinite(lower) and math.isfinite(upper)):
            raise ValueError("range endpoints must be finite")
        if lower > upper:
            raise ValueError(f"range lower ({lower}) must not exceed upper ({upper})")
        return v


class TabularDataset(BaseModel):
    """A table emitted by the report layer together with its provenance metadata.

    Attributes:
        name: Dataset kind ("contour", "table", "power", "power_curve").
        frame: The rows, with the documented column contract.
        metadata: Inputs and derived scalars echoed in file headers.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    name: str
    frame: pd.DataFrame
    metadata: Dict[str, Any] = Field(default_factory=dict)

    @property
    def columns(self) -> List[str]:
        return list(self.frame.columns)


class RobustnessReport(BaseModel):
    """Result of the eight-step robustness procedure.

    Attributes:
        study: Observed study (step 1).
        belief: Bounded beliefs (step 4 and 8).
        threshold: Decision threshold specification (step 2).
        threshold_value: Realised delta#.
        direction: Significant direction.
        model: Affine probit model (step 3).
        bounds: PIV bounds over the belief (step 6).
        cutoff: PIV cut-off for strong internal validity (step 5).
        verdict: Strength of internal validity (step 7).
        observed: Significance test of the observed sample.
        warnings: Interpretation caveats raised during the analysis.
        narrative: Rendered text of the eight steps.
    """

    model_config = ConfigDict(frozen=True)

    study: ObservedStudy
    belief: CounterfactualBelief
    threshold: ThresholdSpec
    threshold_value: float
    direction: EffectDirection
    model: ProbitModel
    bounds: PivBounds
    cutoff: float = Field(..., gt=0, lt=1)
    verdict: Verdict
    observed: ObservedTest
    warnings: List[str] = Field(default_factory=list)
    narrative: str


class StudyConfig(BaseModel):
    """Parsed study-config file.

    Attributes:
        study: Observed summary statistics.
        belief: Beliefs about the unobserved means (optional for some subcommands).
        threshold: Decision threshold; statistical at alpha 0.05 by default.
        direction: "auto", "positive" or "negative".
    """

    model_config = ConfigDict(
        frozen=True,
        json_schema_extra={
            "examples": [
                {
                    "study": {
                        "mean_treated_obs": 36.77,
                        "mean_control_obs": 45.78,
                        "var_treated": 143.26,
                        "var_control": 138.83,
                        "n_obs": 7639,
                        "prop_treated": 0.0617,
                    },
                    "belief": {
                        "treated_un": {"lower": 36.77, "upper": 45.78},
                        "control_un": {"point": 45.2},
                    },
                    "threshold": {"statistical": {"alpha": 0.05}},
                    "direction": "auto",
                }
            ]
        },
    )

    study: ObservedStudy
    belief: Optional[CounterfactualBelief] = None
    threshold: ThresholdSpec = Field(default_factory=ThresholdSpec.statistical)
    direction: str = Field(default="auto", pattern="^(auto|positive|negative)$")


class NormalPosterior(BaseModel):
    """Conjugate-normal posterior of one arm mean."""

    model_config = ConfigDict(frozen=True)

    mean: float
    variance: float = Field(..., gt=0)


class BayesianIdentityReport(BaseModel):
    """Comparison of the Bayesian posterior of delta with the ideal-sample law.

    Attributes:
        posterior_treated: Posterior of the treated mean (prior from the unobserved sample).
        posterior_control: Posterior of the control mean.
        frequentist: Ideal-sample distribution of delta.
        max_relative_error: Largest relative discrepancy over the compared parameters.
        identical: Whether every parameter agrees within the tolerance.
    """

    model_config = ConfigDict(frozen=True)

    posterior_treated: NormalPosterior
    posterior_control: NormalPosterior
    frequentist: IdealDistribution
    max_relative_error: float
    tolerance: float
    identical: bool

    @property
    def posterior_delta_mean(self) -> float:
        return self.posterior_treated.mean - self.posterior_control.mean

    @property
    def posterior_delta_variance(self) -> float:
        return self.posterior_treated.variance + self.posterior_control.variance
