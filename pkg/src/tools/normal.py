"""Standard-normal kernel: CDF, density and quantile (probit).

Every PIV formula goes through these functions. The CDF is the Cephes
erfc-based rational approximation shipped with scipy; the quantile starts from
Cephes' rational approximation and takes one Newton step against the CDF so
that |Phi(z) - p| stays below 1e-12 over the whole open unit interval.

Only the standard normal is supported.
"""

import math
from typing import Union

import numpy as np
from scipy import special

from src.domain.errors import DomainError, SaturationError


# Beyond this magnitude the CDF is reported as exactly 0 or 1 (Phi(-8) ~ 6.2e-16).
SATURATION_Z = 8.0

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)

ArrayLike = Union[float, np.ndarray]


def std_normal_pdf(z: ArrayLike) -> ArrayLike:
    """Standard-normal density, scalar or elementwise."""
    return _INV_SQRT_2PI * np.exp(-0.5 * np.square(z))


def std_normal_cdf(z: float) -> float:
    """Compute Phi(z), the standard-normal cumulative distribution function.

    Args:
        z: Finite real argument.

    Returns:
        Phi(z) in [0, 1]. Arguments with |z| > 8 saturate to exactly 0.0 or 1.0.

    Raises:
        DomainError: If z is NaN or infinite.

    Example:
        >>> std_normal_cdf(0.0)
        0.5
        >>> round(std_normal_cdf(1.959964), 6)
        0.975
    """
    z = float(z)
    if not math.isfinite(z):
        raise DomainError(f"std_normal_cdf requires a finite argument, got {z}")
    if z > SATURATION_Z:
        return 1.0
    if z < -SATURATION_Z:
        return 0.0
    return float(special.ndtr(z))


def std_normal_cdf_array(z: np.ndarray) -> np.ndarray:
    """Elementwise std_normal_cdf, same saturation rule, no validation.

    Infinite entries map to 0 or 1; NaN propagates.
    """
    z = np.asarray(z, dtype=np.float64)
    return np.where(z > SATURATION_Z, 1.0, np.where(z < -SATURATION_Z, 0.0, special.ndtr(z)))


def std_normal_quantile(p: float) -> float:
    """Compute Phi^-1(p), the probit of a probability.

    Args:
        p: Probability strictly inside (0, 1).

    Returns:
        z such that |Phi(z) - p| <= 1e-12.

    Raises:
        DomainError: If p is NaN, or lies outside [0, 1].
        SaturationError: If p is exactly 0 or 1 (the probit would be infinite).

    Example:
        >>> round(std_normal_quantile(0.975), 6)
        1.959964
    """
    p = float(p)
    if math.isnan(p) or p < 0.0 or p > 1.0:
        raise DomainError(f"std_normal_quantile requires p in (0, 1), got {p}")
    if p == 0.0 or p == 1.0:
        raise SaturationError(f"probit of p={p} is infinite", value=p)
    return float(_refined_ndtri(np.asarray(p, dtype=np.float64)))


def std_normal_quantile_array(u: np.ndarray) -> np.ndarray:
    """Vectorised quantile for arrays already known to lie in (0, 1).

    No validation is done; callers (the Monte Carlo oracle) guarantee the
    open-interval contract by construction.
    """
    return _refined_ndtri(np.asarray(u, dtype=np.float64))


def _refined_ndtri(p: np.ndarray) -> np.ndarray:
    z = special.ndtri(p)
    # One Newton step on Phi(z) - p = 0.
    density = std_normal_pdf(z)
    with np.errstate(divide="ignore", invalid="ignore"):
        step = np.where(density > 0.0, (special.ndtr(z) - p) / density, 0.0)
    return z - step
