"""Tests for the closed-form PIV engine."""

import math

import numpy as np
import pytest

from src.analysis.piv import (
    bound_piv,
    ideal_distribution,
    ideal_distribution_general,
    invert_for_control_un,
    invert_for_treated_un,
    piv,
    power_identity,
    probit_coefficients,
    probit_grid,
    probit_piv,
    probit_piv_statistical,
    realize_threshold,
    se_ideal,
    subgroup_effects,
)
from src.domain.errors import ContractError, DomainError, SaturationError, StudyValidationError
from src.domain.schemas import (
    CounterfactualBelief,
    EffectDirection,
    ObservedStudy,
    PointOrInterval,
    ThresholdSpec,
)
from src.tools.normal import std_normal_cdf_array, std_normal_quantile

POSITIVE = EffectDirection.POSITIVE_SIGNIFICANT
NEGATIVE = EffectDirection.NEGATIVE_SIGNIFICANT

# PIV level -> (treated_un threshold, delta_hat_ideal threshold) at control_un = 45.2
THRESHOLD_TABLE = [
    (0.1, 46.19, -0.13),
    (0.2, 46.10, -0.22),
    (0.3, 46.04, -0.28),
    (0.4, 45.99, -0.33),
    (0.5, 45.93, -0.38),
    (0.6, 45.88, -0.43),
    (0.7, 45.82, -0.48),
    (0.8, 45.76, -0.54),
    (0.9, 45.67, -0.62),
]


def _study(**kwargs) -> ObservedStudy:
    return ObservedStudy(**kwargs)


# ---------------------------------------------------------------------------
# Ideal-sample distribution and threshold
# ---------------------------------------------------------------------------

def test_ideal_distribution_hong(hong_study):
    ideal = ideal_distribution(hong_study, 45.78, 45.2)
    assert ideal.theta_t == pytest.approx(0.9383 * 45.78 + 0.0617 * 36.77, abs=1e-9)
    assert ideal.theta_c == pytest.approx(0.0617 * 45.2 + 0.9383 * 45.78, abs=1e-9)
    assert ideal.theta_t == pytest.approx(45.224, abs=1e-3)
    assert ideal.theta_c == pytest.approx(45.744, abs=1e-3)
    assert ideal.phi_t == pytest.approx(143.26 / 7639)
    assert ideal.phi_c == pytest.approx(138.83 / 7639)


def test_ideal_distribution_unconfounded_case(hong_study):
    ideal = ideal_distribution(hong_study, 36.77, 45.78)
    assert ideal.theta_t == pytest.approx(36.77, abs=1e-12)
    assert ideal.theta_c == pytest.approx(45.78, abs=1e-12)


def test_ideal_distribution_symmetric_study():
    study = _study(mean_treated_obs=10.0, mean_control_obs=10.0, var_treated=4.0, var_control=4.0,
                   n_obs=200, prop_treated=0.5)
    ideal = ideal_distribution(study, 12.0, 12.0)
    assert ideal.theta_t == ideal.theta_c


def test_ideal_distribution_thetas_are_convex_combinations(random_studies, random_belief):
    for study in random_studies(200):
        treated_un, control_un = random_belief(study)
        ideal = ideal_distribution(study, treated_un, control_un)
        lo, hi = sorted((treated_un, study.mean_treated_obs))
        assert lo - 1e-9 <= ideal.theta_t <= hi + 1e-9
        lo, hi = sorted((control_un, study.mean_control_obs))
        assert lo - 1e-9 <= ideal.theta_c <= hi + 1e-9


def test_ideal_distribution_rejects_non_finite_belief(hong_study):
    with pytest.raises(StudyValidationError) as excinfo:
        ideal_distribution(hong_study, math.nan, 45.2)
    assert excinfo.value.field == "treated_un"


class TestIdealDistributionGeneral:
    def test_default_sizes_reproduce_observational_case(self, hong_study):
        general = ideal_distribution_general(hong_study, 45.78, 45.2)
        assert general == ideal_distribution(hong_study, 45.78, 45.2)

    def test_explicit_observational_sizes(self, hong_study):
        general = ideal_distribution_general(
            hong_study, 45.78, 45.2, n_treated_un=hong_study.n_control, n_control_un=hong_study.n_treated
        )
        simple = ideal_distribution(hong_study, 45.78, 45.2)
        assert general.theta_t == pytest.approx(simple.theta_t, abs=1e-12)
        assert general.theta_c == pytest.approx(simple.theta_c, abs=1e-12)
        assert general.variance == pytest.approx(simple.variance, rel=1e-12)

    def test_zero_sizes_fall_back_to_observed_arms(self, hong_study):
        general = ideal_distribution_general(hong_study, 45.78, 45.2, n_treated_un=0, n_control_un=0)
        assert general.theta_t == pytest.approx(36.77)
        assert general.theta_c == pytest.approx(45.78)
        assert general.phi_t == pytest.approx(143.26 / hong_study.n_treated)

    def test_negative_size_rejected(self, hong_study):
        with pytest.raises(StudyValidationError) as excinfo:
            ideal_distribution_general(hong_study, 45.78, 45.2, n_treated_un=-1)
        assert excinfo.value.field == "n_treated_un"


def test_se_ideal(hong_study):
    assert se_ideal(hong_study) == pytest.approx(math.sqrt(282.09 / 7639), abs=1e-12)
    assert se_ideal(hong_study) == pytest.approx(0.19217, abs=1e-4)
    assert se_ideal(_study(mean_treated_obs=1, mean_control_obs=0, var_treated=1, var_control=1,
                           n_obs=2, prop_treated=0.5)) == pytest.approx(1.0)
    assert se_ideal(_study(mean_treated_obs=1, mean_control_obs=0, var_treated=0.5, var_control=0.5,
                           n_obs=100, prop_treated=0.5)) == pytest.approx(0.1)


def test_realize_threshold(hong_study, statistical):
    assert realize_threshold(statistical, NEGATIVE, hong_study) == pytest.approx(-0.3767, abs=1e-4)
    assert realize_threshold(statistical, POSITIVE, hong_study) == pytest.approx(0.3767, abs=1e-4)
    assert realize_threshold(ThresholdSpec.fixed(0.0), NEGATIVE, hong_study) == 0.0
    assert realize_threshold(ThresholdSpec.fixed(0.0), POSITIVE, hong_study) == 0.0


# ---------------------------------------------------------------------------
# Probit link
# ---------------------------------------------------------------------------

def test_probit_coefficients_hong(hong_study, statistical):
    model = probit_coefficients(hong_study, statistical, NEGATIVE)
    assert model.coef_control_un == pytest.approx(0.32, abs=0.01)
    assert model.coef_treated_un == pytest.approx(-4.883, abs=0.01)
    assert model.intercept == pytest.approx(209.77, abs=0.01)


def test_univariate_probit_model_hong(hong_study, statistical):
    intercept, slope = probit_coefficients(hong_study, statistical, NEGATIVE).at_control_un(45.2)
    assert intercept == pytest.approx(224.28, abs=0.01)
    assert slope == pytest.approx(-4.883, abs=0.01)


def test_probit_model_matches_probit_piv(hong_study, statistical):
    model = probit_coefficients(hong_study, statistical, NEGATIVE)
    threshold = realize_threshold(statistical, NEGATIVE, hong_study)
    for treated_un, control_un in [(45.78, 45.2), (40.0, 44.0), (46.5, 38.0)]:
        assert model.evaluate(treated_un, control_un) == pytest.approx(
            probit_piv(hong_study, treated_un, control_un, threshold, NEGATIVE), abs=1e-10
        )


def test_probit_zero_on_decision_boundary(hong_study):
    ideal = ideal_distribution(hong_study, 45.9, 45.2)
    spec = ThresholdSpec.fixed(ideal.mean)
    result = piv(hong_study, 45.9, 45.2, spec, NEGATIVE)
    assert result.probit_value == pytest.approx(0.0, abs=1e-12)
    assert result.piv == pytest.approx(0.5, abs=1e-12)


def test_statistical_form_equals_substituted_threshold(hong_study, statistical, random_studies, random_belief):
    cases = [(hong_study, 45.78, 45.2)] + [(s, *random_belief(s)) for s in random_studies(200)]
    for study, treated_un, control_un in cases:
        for direction in (POSITIVE, NEGATIVE):
            threshold = realize_threshold(statistical, direction, study)
            substituted = probit_piv(study, treated_un, control_un, threshold, direction)
            explicit = probit_piv_statistical(study, treated_un, control_un, statistical.critical, direction)
            assert explicit == pytest.approx(substituted, rel=1e-12, abs=1e-10)


@pytest.mark.parametrize("treated_un, control_un, field", [
    (math.nan, 45.2, "treated_un"),
    (45.78, math.inf, "control_un"),
])
def test_probit_forms_reject_non_finite_beliefs(hong_study, statistical, treated_un, control_un, field):
    threshold = realize_threshold(statistical, NEGATIVE, hong_study)
    with pytest.raises(StudyValidationError) as excinfo:
        probit_piv_statistical(hong_study, treated_un, control_un, statistical.critical, NEGATIVE)
    assert excinfo.value.field == field
    with pytest.raises(StudyValidationError):
        probit_piv(hong_study, treated_un, control_un, threshold, NEGATIVE)


def test_probit_grid_equals_point_evaluations(hong_study, statistical):
    threshold = realize_threshold(statistical, NEGATIVE, hong_study)
    treated = np.array([44.0, 45.5, 45.78])
    control = np.array([45.2, 44.77, 36.77])
    grid = probit_grid(hong_study, treated, control, threshold, NEGATIVE)
    for i in range(3):
        assert grid[i] == probit_piv(hong_study, treated[i], control[i], threshold, NEGATIVE)


# ---------------------------------------------------------------------------
# Point PIV
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("treated_un, control_un, expected, tol", [
    (45.78, 45.2, 0.77, 0.005),
    (45.78, 44.77, 0.73, 0.005),
    (46.19, 45.2, 0.10, 0.01),
])
def test_piv_hong(hong_study, statistical, treated_un, control_un, expected, tol):
    result = piv(hong_study, treated_un, control_un, statistical, NEGATIVE)
    assert result.piv == pytest.approx(expected, abs=tol)


def test_piv_drops_near_0_64_at_control_44(hong_study, statistical):
    # Quoted as "below 0.64"; the exact value is 0.6407.
    result = piv(hong_study, 45.78, 44.0, statistical, NEGATIVE)
    assert result.piv < 0.645
    assert result.piv == pytest.approx(0.64, abs=0.005)


def test_piv_result_fields(hong_study, statistical):
    result = piv(hong_study, 45.78, 45.2, statistical, NEGATIVE)
    assert result.direction is NEGATIVE
    assert result.se_ideal == pytest.approx(se_ideal(hong_study))
    assert result.t_ratio == pytest.approx(result.delta_hat_ideal / result.se_ideal)
    assert result.threshold_value == pytest.approx(-1.96 * result.se_ideal)
    assert result.critical == 1.96
    assert result.treated_un == 45.78
    assert result.control_un == 45.2
    assert not result.saturated


def test_piv_is_phi_of_probit(hong_study, statistical, random_studies, random_belief):
    for study in random_studies(100):
        treated_un, control_un = random_belief(study)
        result = piv(study, treated_un, control_un, statistical, NEGATIVE)
        assert result.piv == pytest.approx(float(std_normal_cdf_array(result.probit_value)), abs=1e-12)


# ---------------------------------------------------------------------------
# Properties
# ---------------------------------------------------------------------------

def test_direction_antisymmetry(random_studies, random_belief, rng):
    for study in random_studies(200):
        treated_un, control_un = random_belief(study)
        spec = ThresholdSpec.fixed(float(rng.normal(0.0, 1.0)))
        pos = piv(study, treated_un, control_un, spec, POSITIVE)
        neg = piv(study, treated_un, control_un, spec, NEGATIVE)
        assert neg.probit_value == -pos.probit_value
        assert neg.piv == pytest.approx(1.0 - pos.piv, abs=1e-12)


def test_monotonicity_negative_case(hong_study, statistical):
    down = [piv(hong_study, t, 45.2, statistical, NEGATIVE).piv for t in np.linspace(45.0, 46.5, 301)]
    assert np.all(np.diff(down) < 0)
    up = [piv(hong_study, 45.78, c, statistical, NEGATIVE).piv for c in np.linspace(40.0, 48.0, 301)]
    assert np.all(np.diff(up) > 0)


def test_monotonicity_positive_case(hong_study, statistical):
    threshold = realize_threshold(statistical, POSITIVE, hong_study)
    treated = np.linspace(40.0, 50.0, 101)
    probits = [probit_piv(hong_study, t, 45.2, threshold, POSITIVE) for t in treated]
    assert np.all(np.diff(probits) > 0)
    controls = np.linspace(40.0, 50.0, 101)
    probits = [probit_piv(hong_study, 45.78, c, threshold, POSITIVE) for c in controls]
    assert np.all(np.diff(probits) < 0)


def test_power_identity_on_random_studies(statistical, random_studies, random_belief):
    for study in random_studies(1000):
        treated_un, control_un = random_belief(study)
        for direction in (POSITIVE, NEGATIVE):
            result = piv(study, treated_un, control_un, statistical, direction)
            assert abs(result.probit_value - power_identity(result, statistical.critical)) <= 1e-10


def test_power_identity_table_row(hong_study, statistical):
    treated_un, _ = invert_for_treated_un(hong_study, 45.2, 0.8, statistical, NEGATIVE)
    result = piv(hong_study, treated_un, 45.2, statistical, NEGATIVE)
    assert power_identity(result, 1.96) == pytest.approx(std_normal_quantile(0.8), abs=1e-9)
    # Rounded table values: T = -0.54 / 0.19217.
    assert -(-0.54 / 0.19217) - 1.96 == pytest.approx(0.8416, abs=0.02)


def test_power_identity_boundary(hong_study, statistical):
    treated_un, _ = invert_for_treated_un(hong_study, 45.2, 0.5, statistical, NEGATIVE)
    result = piv(hong_study, treated_un, 45.2, statistical, NEGATIVE)
    assert result.t_ratio == pytest.approx(-1.96, abs=1e-9)


def test_power_identity_needs_statistical_threshold(hong_study):
    result = piv(hong_study, 45.78, 45.2, ThresholdSpec.fixed(0.0), NEGATIVE)
    with pytest.raises(ContractError):
        power_identity(result, 1.96)


def test_unconfoundedness_reduction(statistical, random_studies):
    for study in random_studies(100):
        result = piv(study, study.mean_treated_obs, study.mean_control_obs, statistical, NEGATIVE)
        assert result.delta_hat_ideal == pytest.approx(study.delta_hat_obs, abs=1e-9)
        assert result.t_ratio == pytest.approx(study.delta_hat_obs / se_ideal(study), rel=1e-9, abs=1e-9)


@pytest.mark.parametrize("scale", [0.1, 3.7, 250.0])
def test_scale_equivariance(hong_study, statistical, scale):
    scaled = _study(
        mean_treated_obs=hong_study.mean_treated_obs * scale,
        mean_control_obs=hong_study.mean_control_obs * scale,
        var_treated=hong_study.var_treated * scale ** 2,
        var_control=hong_study.var_control * scale ** 2,
        n_obs=hong_study.n_obs,
        prop_treated=hong_study.prop_treated,
    )
    for spec, scaled_spec in [(statistical, statistical), (ThresholdSpec.fixed(-0.3), ThresholdSpec.fixed(-0.3 * scale))]:
        base = piv(hong_study, 45.78, 44.77, spec, NEGATIVE)
        other = piv(scaled, 45.78 * scale, 44.77 * scale, scaled_spec, NEGATIVE)
        assert other.probit_value == pytest.approx(base.probit_value, abs=1e-9)


def test_subgroup_effects_average_to_ideal_estimate(hong_study, random_studies, random_belief):
    effects = subgroup_effects(hong_study, 45.78, 45.2)
    assert effects.effect_on_treated == pytest.approx(36.77 - 45.2)
    assert effects.effect_on_controls == pytest.approx(45.78 - 45.78)
    for study in random_studies(200):
        treated_un, control_un = random_belief(study)
        effects = subgroup_effects(study, treated_un, control_un)
        pi = study.prop_treated
        combined = pi * effects.effect_on_treated + (1 - pi) * effects.effect_on_controls
        assert combined == pytest.approx(effects.delta_hat_ideal, abs=1e-10)


# ---------------------------------------------------------------------------
# Bounds
# ---------------------------------------------------------------------------

def test_bound_univariate_hong(hong_study, hong_belief, statistical):
    bounds = bound_piv(hong_study, hong_belief, statistical, NEGATIVE)
    assert bounds.lower.piv == pytest.approx(0.77, abs=0.005)
    assert bounds.lower.treated_un == 45.78
    assert bounds.lower.control_un == 45.2
    assert bounds.upper.treated_un == 36.77
    assert bounds.upper.piv == 1.0


def test_bound_bivariate_hong(hong_study, statistical):
    belief = CounterfactualBelief(
        treated_un=PointOrInterval.interval(36.77, 45.78),
        control_un=PointOrInterval.interval(44.77, 45.78),
    )
    bounds = bound_piv(hong_study, belief, statistical, NEGATIVE)
    assert bounds.lower.piv == pytest.approx(0.73, abs=0.005)
    assert (bounds.lower.treated_un, bounds.lower.control_un) == (45.78, 44.77)


def test_bound_point_belief_collapses(hong_study, statistical):
    belief = CounterfactualBelief(treated_un=PointOrInterval.point(45.78), control_un=PointOrInterval.point(45.2))
    bounds = bound_piv(hong_study, belief, statistical, NEGATIVE)
    point = piv(hong_study, 45.78, 45.2, statistical, NEGATIVE)
    assert bounds.lower.piv == bounds.upper.piv == point.piv


def test_bound_one_sided_belief_saturates_unconstrained_side(hong_study, statistical):
    belief = CounterfactualBelief(
        treated_un=PointOrInterval.interval(None, 45.78),
        control_un=PointOrInterval.point(45.2),
    )
    bounds = bound_piv(hong_study, belief, statistical, NEGATIVE)
    assert bounds.lower.piv == pytest.approx(0.77, abs=0.005)
    assert bounds.upper.saturated
    assert bounds.upper.piv == 1.0
    assert bounds.upper.probit_value == math.inf


@pytest.mark.parametrize("direction", [POSITIVE, NEGATIVE])
def test_bound_corners_match_brute_force_grid(hong_study, statistical, direction):
    belief = CounterfactualBelief(
        treated_un=PointOrInterval.interval(44.5, 46.2),
        control_un=PointOrInterval.interval(44.0, 45.78),
    )
    bounds = bound_piv(hong_study, belief, statistical, direction)
    treated, control = np.meshgrid(np.linspace(44.5, 46.2, 101), np.linspace(44.0, 45.78, 101))
    threshold = realize_threshold(statistical, direction, hong_study)
    surface = std_normal_cdf_array(probit_grid(hong_study, treated, control, threshold, direction))
    assert abs(surface.min() - bounds.lower.piv) <= 1e-12
    assert abs(surface.max() - bounds.upper.piv) <= 1e-12


# ---------------------------------------------------------------------------
# Inversion
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("level, treated_un, delta_hat", THRESHOLD_TABLE)
def test_invert_reproduces_threshold_table(hong_study, statistical, level, treated_un, delta_hat):
    got_treated, got_delta = invert_for_treated_un(hong_study, 45.2, level, statistical, NEGATIVE)
    assert got_treated == pytest.approx(treated_un, abs=0.01)
    assert got_delta == pytest.approx(delta_hat, abs=0.01)


def test_invert_delta_formula(hong_study, statistical):
    _, delta = invert_for_treated_un(hong_study, 45.2, 0.8, statistical, NEGATIVE)
    assert delta == pytest.approx(-(std_normal_quantile(0.8) + 1.96) * se_ideal(hong_study), abs=1e-12)


@pytest.mark.parametrize("direction", [POSITIVE, NEGATIVE])
def test_inversion_round_trip(hong_study, statistical, direction):
    for level in np.linspace(0.01, 0.99, 99):
        treated_un, _ = invert_for_treated_un(hong_study, 45.2, level, statistical, direction)
        assert piv(hong_study, treated_un, 45.2, statistical, direction).piv == pytest.approx(level, abs=1e-9)
        control_un, _ = invert_for_control_un(hong_study, 45.78, level, statistical, direction)
        assert piv(hong_study, 45.78, control_un, statistical, direction).piv == pytest.approx(level, abs=1e-9)


@pytest.mark.parametrize("level", [0.0, 1.0])
def test_invert_saturated_target(hong_study, statistical, level):
    with pytest.raises(SaturationError):
        invert_for_treated_un(hong_study, 45.2, level, statistical, NEGATIVE)
    with pytest.raises(SaturationError):
        invert_for_control_un(hong_study, 45.78, level, statistical, NEGATIVE)


def test_invert_out_of_domain_target(hong_study, statistical):
    with pytest.raises(DomainError):
        invert_for_treated_un(hong_study, 45.2, 1.2, statistical, NEGATIVE)
