"""Emission families for dyad values and their weighted maximum-likelihood estimators.

Each relation between two groups carries one emission family: Bernoulli for
binary networks, Poisson for count networks, Gaussian for real-valued ones.
The family provides the log-density of a dyad value given its block-pair
parameter and the closed-form update of that parameter from weighted
sufficient statistics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.special import gammaln

from .errors import ValidationError

# Bernoulli probabilities (and Poisson rates) are clamped away from the domain
# boundary inside log-density evaluation only; raw estimates are stored as-is
# so that exact-zero connection estimates remain reportable.
ALPHA_EPS = 1e-8
# Gaussian variances are floored to keep log-densities finite.
VAR_EPS = 1e-6
# Below this weight mass a block-pair estimate is 0/0 and a fallback is used.
MASS_EPS = 1e-10

_LOG_2PI = math.log(2.0 * math.pi)


class EmissionFamily(str, Enum):
    BERNOULLI = "bernoulli"
    POISSON = "poisson"
    GAUSSIAN = "gaussian"

    @property
    def parameter_dimension(self) -> int:
        """Number of free parameters per block pair (Gaussian: mean and variance)."""
        return 2 if self is EmissionFamily.GAUSSIAN else 1


@dataclass
class BlockPairParameter:
    """Emission parameter of one block pair.

    ``alpha`` is the Bernoulli probability, Poisson rate, or Gaussian mean;
    ``variance`` is set for Gaussian pairs only.  ``degenerate`` flags
    parameters that were substituted from the fallback because the block pair
    carried (numerically) no weight.
    """

    alpha: float
    variance: float | None = None
    degenerate: bool = False


def check_support(family: EmissionFamily, x: float) -> None:
    """Raise if ``x`` is outside the family's support."""
    if family is EmissionFamily.BERNOULLI:
        if x not in (0, 1):
            raise ValidationError(f"Bernoulli value must be 0 or 1, got {x!r}")
    elif family is EmissionFamily.POISSON:
        if x < 0 or x != int(x):
            raise ValidationError(f"Poisson value must be a non-negative integer, got {x!r}")
    else:
        if not math.isfinite(x):
            raise ValidationError(f"Gaussian value must be finite, got {x!r}")


def log_density(family: EmissionFamily, x: float, p: BlockPairParameter) -> float:
    """Log-density of one dyad value under its block-pair parameter.

    Bernoulli probabilities and Poisson rates are evaluated at their clamped
    value so the result is finite for every in-support ``x``.
    """
    check_support(family, x)
    if family is EmissionFamily.BERNOULLI:
        a = min(max(p.alpha, ALPHA_EPS), 1.0 - ALPHA_EPS)
        return x * math.log(a) + (1.0 - x) * math.log1p(-a)
    if family is EmissionFamily.POISSON:
        a = max(p.alpha, ALPHA_EPS)
        return -a + x * math.log(a) - float(gammaln(x + 1.0))
    v = max(p.variance if p.variance is not None else 1.0, VAR_EPS)
    return -0.5 * (_LOG_2PI + math.log(v) + (x - p.alpha) ** 2 / v)


def mstep_parameter(
    weighted_sum: float,
    weighted_sq_sum: float,
    weight_mass: float,
    family: EmissionFamily,
    fallback: BlockPairParameter | None = None,
) -> BlockPairParameter:
    """Closed-form maximizer of the weighted log-density sum for one block pair.

    Inputs are sums of x, x**2 and 1 over the pair's dyads, each weighted by
    the product of the endpoints' membership weights.  When the weight mass is
    numerically zero the estimate is undefined and the ``fallback`` (normally
    the matrix-wide mean) is returned with the degenerate flag set.
    """
    if weight_mass < 0:
        raise ValidationError(f"negative weight mass: {weight_mass}")
    if weight_mass < MASS_EPS:
        if fallback is not None:
            return BlockPairParameter(fallback.alpha, fallback.variance, degenerate=True)
        return BlockPairParameter(0.0, 1.0 if family is EmissionFamily.GAUSSIAN else None,
                                  degenerate=True)
    alpha = weighted_sum / weight_mass
    if family is EmissionFamily.GAUSSIAN:
        variance = max(weighted_sq_sum / weight_mass - alpha * alpha, VAR_EPS)
        return BlockPairParameter(alpha, variance)
    return BlockPairParameter(alpha)


def log_density_coeffs(
    family: EmissionFamily,
    alpha: np.ndarray,
    variance: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray | None]:
    """Decompose the log-density over a parameter grid as c0 + c1*x + c2*x**2.

    The x-independent Poisson term -log(x!) is excluded here; it is constant
    in the block labels and is accumulated once per matrix by the callers that
    need it.  Parameters are clamped exactly as in :func:`log_density`, so
    grid evaluations and scalar evaluations agree.
    """
    if family is EmissionFamily.BERNOULLI:
        a = np.clip(alpha, ALPHA_EPS, 1.0 - ALPHA_EPS)
        c0 = np.log1p(-a)
        c1 = np.log(a) - c0
        return c0, c1, None
    if family is EmissionFamily.POISSON:
        a = np.maximum(alpha, ALPHA_EPS)
        return -a, np.log(a), None
    v = np.maximum(variance, VAR_EPS)
    c0 = -0.5 * (_LOG_2PI + np.log(v)) - alpha * alpha / (2.0 * v)
    c1 = alpha / v
    c2 = -0.5 / v
    return c0, c1, c2


def mstep_grid(
    weighted_sum: np.ndarray,
    weighted_sq_sum: np.ndarray | None,
    weight_mass: np.ndarray,
    family: EmissionFamily,
    fallback: BlockPairParameter,
) -> tuple[np.ndarray, np.ndarray | None, np.ndarray]:
    """Grid form of :func:`mstep_parameter` over all block pairs of one matrix.

    Returns (alpha grid, variance grid or None, degenerate flag grid).
    """
    if np.any(weight_mass < 0):
        raise ValidationError("negative weight mass in grid estimate")
    empty = weight_mass < MASS_EPS
    safe_mass = np.where(empty, 1.0, weight_mass)
    alpha = np.where(empty, fallback.alpha, weighted_sum / safe_mass)
    if family is EmissionFamily.GAUSSIAN:
        fb_var = fallback.variance if fallback.variance is not None else 1.0
        variance = np.where(
            empty, fb_var, np.maximum(weighted_sq_sum / safe_mass - alpha * alpha, VAR_EPS)
        )
        return alpha, variance, empty
    return alpha, None, empty
