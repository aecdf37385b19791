"""Scalar Gaussian machinery.

Everything the solver needs from the normal distribution lives here: the
standard normal CDF, the posterior of a task difficulty given one noisy
signal, the closed form of ``E[Phi(c - W)]`` for Gaussian ``W``, and a
Monte Carlo estimator of that expectation that the test-suite uses as an
independent oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import DomainError

SQRT2 = math.sqrt(2.0)
INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class GaussianScalar:
    mean: float
    variance: float

    def __post_init__(self):
        if not self.variance >= 0.0:
            raise DomainError(f"variance must be >= 0, got {self.variance}")

    @property
    def degenerate(self) -> bool:
        return self.variance == 0.0


@dataclass(frozen=True)
class PosteriorParams:
    """Shrinkage gain ``d`` and posterior variance of one task difficulty.

    Given ``Y = Theta + Z`` the posterior is ``N(d * y, sigma_tilde_sq)``.
    """

    d: float
    sigma_tilde_sq: float


@dataclass(frozen=True)
class McConfig:
    sample_count: int
    seed: int = 0

    def __post_init__(self):
        if int(self.sample_count) < 1:
            raise DomainError("sample_count must be >= 1")
        if not 0 <= int(self.seed) < 2**64:
            raise DomainError("seed must fit in an unsigned 64-bit integer")


def make_rng(seed: int, *key: int) -> np.random.Generator:
    """Counter-based generator for the stream identified by ``(seed, *key)``.

    Distinct keys give statistically independent streams, so parallel work
    split by key reproduces the sequential result exactly.
    """
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def std_normal_cdf(x: float) -> float:
    """Standard normal CDF via ``erfc`` (accurate in both tails)."""
    x = float(x)
    if not math.isfinite(x):
        raise DomainError(f"std_normal_cdf needs a finite argument, got {x}")
    return 0.5 * math.erfc(-x / SQRT2)


def std_normal_pdf(x: float) -> float:
    return INV_SQRT_2PI * math.exp(-0.5 * x * x)


def normal_cdf_array(x):
    """Vectorised counterpart of :func:`std_normal_cdf` (no finiteness check)."""
    return 0.5 * special.erfc(-np.asarray(x, dtype=float) / SQRT2)


def posterior_params(prior_var: float, noise_var: float, diffuse: bool = False) -> PosteriorParams:
    """Posterior of ``Theta ~ N(0, prior_var)`` after observing ``Theta + Z``.

    With ``diffuse`` set the prior variance is ignored and the exact limit
    ``(d, sigma_tilde_sq) = (1, noise_var)`` is returned.
    """
    if not noise_var > 0.0 or not math.isfinite(noise_var):
        raise DomainError(f"noise variance must be positive and finite, got {noise_var}")
    if diffuse:
        return PosteriorParams(1.0, float(noise_var))
    if not prior_var > 0.0 or not math.isfinite(prior_var):
        raise DomainError(f"prior variance must be positive and finite, got {prior_var}")
    total = prior_var + noise_var
    return PosteriorParams(prior_var / total, noise_var * prior_var / total)


def _check_shift_args(c: float, w_var: float):
    if not math.isfinite(c):
        raise DomainError(f"shift must be finite, got {c}")
    if not w_var >= 0.0 or not math.isfinite(w_var):
        raise DomainError(f"w_var must be >= 0 and finite, got {w_var}")


def expected_cdf_shift(c: float, w_var: float) -> float:
    """``E[Phi(c - W)]`` for ``W ~ N(0, w_var)``.

    ``Phi(c - W) = P(X <= c - W)`` with ``X ~ N(0, 1)`` independent of ``W``,
    and ``X + W ~ N(0, 1 + w_var)``, hence ``Phi(c / sqrt(1 + w_var))``.
    """
    _check_shift_args(c, w_var)
    return std_normal_cdf(c / math.sqrt(1.0 + w_var))


def expected_pdf_shift(c: float, w_var: float) -> float:
    """``E[phi(c - W)]``, the derivative of :func:`expected_cdf_shift` in ``c``."""
    _check_shift_args(c, w_var)
    s = math.sqrt(1.0 + w_var)
    return std_normal_pdf(c / s) / s


def mc_expected_cdf_shift(c: float, w_var: float, cfg: McConfig) -> tuple[float, float]:
    """Sample-mean estimate of ``E[Phi(c - W)]`` and its standard error."""
    _check_shift_args(c, w_var)
    rng = make_rng(cfg.seed)
    w = math.sqrt(w_var) * rng.standard_normal(int(cfg.sample_count))
    vals = normal_cdf_array(c - w)
    n = vals.size
    if n == 1:
        return float(vals[0]), math.inf
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(n))
