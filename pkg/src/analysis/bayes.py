"""Bayesian reading of the ideal-sample distribution.

The unobserved sample supplies the prior and the observed sample the
likelihood. For the treated mean the prior is N(treated_un, var_t / n_control)
(the control subjects carry the counterfactual treated outcomes) and the
likelihood is the observed treated arm, N(mu_t, var_t / n_treated). The
conjugate update lands on exactly the ideal-sample law, which this module
checks numerically.
"""

import logging

from src.analysis.piv import ideal_distribution
from src.domain.schemas import BayesianIdentityReport, NormalPosterior, ObservedStudy

logger = logging.getLogger(__name__)

IDENTITY_TOLERANCE = 1e-12


def normal_posterior(
    prior_mean: float,
    prior_variance: float,
    data_mean: float,
    data_variance: float,
) -> NormalPosterior:
    """Precision-weighted conjugate update of a normal mean with known variance.

    Args:
        prior_mean: Prior mean.
        prior_variance: Prior variance (> 0).
        data_mean: Sample mean of the observed data.
        data_variance: Sampling variance of that mean (sigma^2 / n, > 0).

    Returns:
        The posterior mean and variance.
    """
    prior_precision = 1.0 / prior_variance
    data_precision = 1.0 / data_variance
    precision = prior_precision + data_precision
    mean = (prior_precision * prior_mean + data_precision * data_mean) / precision
    return NormalPosterior(mean=mean, variance=1.0 / precision)


def _relative_error(a: float, b: float, scale: float) -> float:
    # Differences of near-equal means are measured against the magnitude of their parts.
    denominator = max(abs(a), abs(b), scale)
    return abs(a - b) / denominator if denominator > 0 else 0.0


def bayesian_posterior_check(
    study: ObservedStudy,
    treated_un: float,
    control_un: float,
    tolerance: float = IDENTITY_TOLERANCE,
) -> BayesianIdentityReport:
    """Compare the conjugate-normal posterior of delta with the ideal-sample law.

    Args:
        study: Validated observed study.
        treated_un: Unobserved treated mean (prior mean of mu_t).
        control_un: Unobserved control mean (prior mean of mu_c).
        tolerance: Relative tolerance for calling the two identical.

    Returns:
        A report with both parameterisations and their largest relative discrepancy.
    """
    posterior_t = normal_posterior(
        prior_mean=treated_un,
        prior_variance=study.var_treated / study.n_control,
        data_mean=study.mean_treated_obs,
        data_variance=study.var_treated / study.n_treated,
    )
    posterior_c = normal_posterior(
        prior_mean=control_un,
        prior_variance=study.var_control / study.n_treated,
        data_mean=study.mean_control_obs,
        data_variance=study.var_control / study.n_control,
    )
    ideal = ideal_distribution(study, treated_un, control_un)

    scale_t = max(abs(treated_un), abs(study.mean_treated_obs))
    scale_c = max(abs(control_un), abs(study.mean_control_obs))
    errors = [
        _relative_error(posterior_t.mean, ideal.theta_t, scale_t),
        _relative_error(posterior_c.mean, ideal.theta_c, scale_c),
        _relative_error(posterior_t.variance, ideal.phi_t, 0.0),
        _relative_error(posterior_c.variance, ideal.phi_c, 0.0),
        _relative_error(posterior_t.mean - posterior_c.mean, ideal.mean, max(scale_t, scale_c)),
        _relative_error(posterior_t.variance + posterior_c.variance, ideal.variance, 0.0),
    ]
    worst = max(errors)
    identical = worst <= tolerance
    if not identical:
        logger.warning(f"Bayesian and ideal-sample parameters differ (max relative error {worst:.3g})")
    return BayesianIdentityReport(
        posterior_treated=posterior_t,
        posterior_control=posterior_c,
        frequentist=ideal,
        max_relative_error=worst,
        tolerance=tolerance,
        identical=identical,
    )
