"""Affine strategies, neighbour beliefs and best responses.

Conventions used throughout:

* action 1 is taken iff ``a1*y1 + a2*y2 <= tau`` (ties go to task 1);
* a margin or switching-function value ``>= 0`` means the best response is
  task 1;
* for a homogeneous profile with ``a1 > 0`` the best response is task 1 iff
  ``y1 <= g(y2)``, where ``g`` is the switching curve.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import kernels
from .errors import DomainError, SolverError
from .gaussian import (
    McConfig,
    PosteriorParams,
    expected_cdf_shift,
    make_rng,
    normal_cdf_array,
    posterior_params,
    std_normal_cdf,
)

DEFAULT_ROOT_TOL = 1e-10
MAX_DOUBLINGS = 200


@dataclass(frozen=True)
class GameParams:
    """A full problem instance.

    Variances, not standard deviations. When ``diffuse`` is set the prior
    variances are ignored by every closed-form computation.
    """

    sigma1_sq: float
    sigma2_sq: float
    alpha1_sq: float
    alpha2_sq: float
    n_agents: int
    degree: int
    diffuse: bool = False

    def __post_init__(self):
        for name in ("alpha1_sq", "alpha2_sq"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise DomainError(f"{name} must be positive and finite, got {v}")
        if not self.diffuse:
            for name in ("sigma1_sq", "sigma2_sq"):
                v = getattr(self, name)
                if not (v > 0 and math.isfinite(v)):
                    raise DomainError(f"{name} must be positive and finite, got {v}")
        if int(self.n_agents) != self.n_agents or self.n_agents < 2:
            raise DomainError(f"n_agents must be an integer > 1, got {self.n_agents}")
        if int(self.degree) != self.degree or not 1 <= self.degree <= self.n_agents - 1:
            raise DomainError(
                f"degree must be an integer in [1, n_agents - 1], got {self.degree}"
            )

    @classmethod
    def from_density(cls, rho, n_agents, sigma1_sq=1.0, sigma2_sq=1.0,
                     alpha1_sq=1.0, alpha2_sq=1.0, diffuse=False):
        k = rho * n_agents
        if not 0 < rho < 1 or abs(k - round(k)) > 1e-9:
            raise DomainError(f"rho={rho} does not give an integer degree for N={n_agents}")
        return cls(sigma1_sq, sigma2_sq, alpha1_sq, alpha2_sq, n_agents, int(round(k)), diffuse)

    @property
    def rho(self) -> float:
        return self.degree / self.n_agents

    @property
    def post1(self) -> PosteriorParams:
        return posterior_params(self.sigma1_sq, self.alpha1_sq, self.diffuse)

    @property
    def post2(self) -> PosteriorParams:
        return posterior_params(self.sigma2_sq, self.alpha2_sq, self.diffuse)


@dataclass(frozen=True)
class AffinePolicy:
    """Task 1 iff ``a1*y1 + a2*y2 <= tau``.

    ``tau`` may be infinite, which gives the two constant policies.
    """

    a1: float
    a2: float
    tau: float

    def __post_init__(self):
        if self.a1 == 0.0 and self.a2 == 0.0:
            raise DomainError("an affine policy needs (a1, a2) != (0, 0)")

    @classmethod
    def constant(cls, action: int) -> "AffinePolicy":
        if action not in (1, 2):
            raise DomainError(f"action must be 1 or 2, got {action}")
        return cls(1.0, 0.0, math.inf if action == 1 else -math.inf)

    def scaled(self, c: float) -> "AffinePolicy":
        if not c > 0:
            raise DomainError("only positive rescaling preserves the decision rule")
        return AffinePolicy(c * self.a1, c * self.a2, c * self.tau)

    def normalized(self) -> "AffinePolicy":
        """Equivalent policy with ``a1 = 1`` (requires ``a1 > 0``)."""
        if not self.a1 > 0:
            raise DomainError("normalisation needs a1 > 0")
        return self.scaled(1.0 / self.a1)

    def actions(self, y1, y2):
        """Vectorised decision rule; returns an int8 array of 1s and 2s."""
        take1 = self.a1 * np.asarray(y1) + self.a2 * np.asarray(y2) <= self.tau
        return np.where(take1, 1, 2).astype(np.int8)


class Observation(NamedTuple):
    y1: float
    y2: float


def apply_policy(p: AffinePolicy, y) -> int:
    y1, y2 = y
    return 1 if p.a1 * y1 + p.a2 * y2 <= p.tau else 2


def min_policy() -> AffinePolicy:
    """Take the task with the smaller observed difficulty."""
    return AffinePolicy(1.0, -1.0, 0.0)


@dataclass(frozen=True)
class BeliefContext:
    """Everything needed to evaluate the belief about a neighbour's action."""

    post1: PosteriorParams
    post2: PosteriorParams
    neighbor_policy: AffinePolicy
    w_var: float
    alpha1_sq: float
    alpha2_sq: float

    @classmethod
    def from_params(cls, params: GameParams, neighbor_policy: AffinePolicy,
                    w_var_override: float | None = None) -> "BeliefContext":
        p1, p2 = params.post1, params.post2
        a1, a2 = neighbor_policy.a1, neighbor_policy.a2
        noise = a1 * a1 * params.alpha1_sq + a2 * a2 * params.alpha2_sq
        w_var = (a1 * a1 * p1.sigma_tilde_sq + a2 * a2 * p2.sigma_tilde_sq) / noise
        if w_var_override is not None:
            w_var = float(w_var_override)
        return cls(p1, p2, neighbor_policy, w_var, params.alpha1_sq, params.alpha2_sq)

    @property
    def noise_scale(self) -> float:
        p = self.neighbor_policy
        return math.sqrt(p.a1 ** 2 * self.alpha1_sq + p.a2 ** 2 * self.alpha2_sq)

    def shift(self, y1, y2):
        p = self.neighbor_policy
        num = p.tau - self.post1.d * p.a1 * y1 - self.post2.d * p.a2 * y2
        return num / self.noise_scale


def belief(ctx: BeliefContext, y) -> float:
    """Probability that a neighbour using ``ctx.neighbor_policy`` picks task 1."""
    if ctx.noise_scale == 0.0:
        raise DomainError("neighbour policy has zero weight vector")
    y1, y2 = y
    return expected_cdf_shift(ctx.shift(y1, y2), ctx.w_var)


def belief_array(ctx: BeliefContext, y1, y2):
    c = ctx.shift(np.asarray(y1, dtype=float), np.asarray(y2, dtype=float))
    return normal_cdf_array(c / math.sqrt(1.0 + ctx.w_var))


def mc_belief(ctx: BeliefContext, y, cfg: McConfig) -> tuple[float, float]:
    """Two-stage Monte Carlo belief: draw the state given ``y``, then a
    neighbour's signal, then apply the neighbour's policy.

    Independent of ``ctx.w_var``; used to check the closed form.
    """
    y1, y2 = y
    rng = make_rng(cfg.seed)
    n = int(cfg.sample_count)
    th1 = ctx.post1.d * y1 + math.sqrt(ctx.post1.sigma_tilde_sq) * rng.standard_normal(n)
    th2 = ctx.post2.d * y2 + math.sqrt(ctx.post2.sigma_tilde_sq) * rng.standard_normal(n)
    s1 = th1 + math.sqrt(ctx.alpha1_sq) * rng.standard_normal(n)
    s2 = th2 + math.sqrt(ctx.alpha2_sq) * rng.standard_normal(n)
    hits = (ctx.neighbor_policy.actions(s1, s2) == 1).astype(float)
    if n == 1:
        return float(hits[0]), math.inf
    return float(hits.mean()), float(hits.std(ddof=1) / math.sqrt(n))


def br_lhs_minus_rhs(params: GameParams, profile_policy: AffinePolicy, y) -> float:
    """Best-response margin against a homogeneous profile on a K-regular graph.

    ``K*pi(y) - K/2 - (rho*K/2)*(d1*y1 - d2*y2)``; non-negative means task 1.
    """
    y1, y2 = y
    ctx = BeliefContext.from_params(params, profile_policy)
    k = params.degree
    bias = params.post1.d * y1 - params.post2.d * y2
    return k * belief(ctx, y) - 0.5 * k - 0.5 * params.rho * k * bias


def diffuse_F(params: GameParams, y) -> float:
    """Best-response margin per neighbour against min-policy opponents in the
    diffuse limit; zero on the diagonal, sign of ``y2 - y1`` elsewhere."""
    if not params.diffuse:
        raise DomainError("diffuse_F is defined for diffuse instances only")
    y1, y2 = y
    u = y2 - y1
    s = math.sqrt(2.0 * (params.alpha1_sq + params.alpha2_sq))
    return std_normal_cdf(u / s) - 0.5 + 0.5 * params.rho * u


# -- switching curve --------------------------------------------------------

@dataclass(frozen=True)
class _CurveCoeffs:
    a1: float
    a2: float
    tau: float
    d1: float
    d2: float
    scale: float  # noise scale times sqrt(1 + w_var)
    rho: float

    def as_tuple(self):
        return (self.a1, self.a2, self.tau, self.d1, self.d2, self.scale, self.rho)


def _coeffs(params: GameParams, profile_policy: AffinePolicy) -> _CurveCoeffs:
    ctx = BeliefContext.from_params(params, profile_policy)
    p = profile_policy
    return _CurveCoeffs(
        p.a1, p.a2, p.tau, ctx.post1.d, ctx.post2.d,
        ctx.noise_scale * math.sqrt(1.0 + ctx.w_var), params.rho,
    )


def switching_G1(params, profile_policy, xi, y2):
    c = _coeffs(params, profile_policy)
    arg = (c.tau - c.a1 * c.d1 * xi - c.a2 * c.d2 * y2) / c.scale
    return normal_cdf_array(arg) if np.ndim(arg) else std_normal_cdf(arg)


def switching_G2(params, profile_policy, xi, y2):
    c = _coeffs(params, profile_policy)
    return 0.5 + 0.5 * c.rho * (c.d1 * xi - c.d2 * y2)


def switching_G(params, profile_policy, xi, y2):
    """``G1 - G2``: positive means task 1 is the best response at ``(xi, y2)``."""
    return switching_G1(params, profile_policy, xi, y2) - switching_G2(params, profile_policy, xi, y2)


def _require_positive_a1(profile_policy):
    if not profile_policy.a1 > 0:
        raise DomainError("switching curve needs a1 > 0 in the profile policy")
    if not math.isfinite(profile_policy.tau):
        raise DomainError("switching curve needs a finite threshold")


def switching_curve(params, profile_policy, y2, tol=DEFAULT_ROOT_TOL, backend=None):
    """Switching-curve roots at every entry of ``y2``.

    Returns ``(xi_star, iterations)`` arrays. ``backend`` selects a kernel
    module explicitly (see :mod:`mtgg.kernels`); default is the active one.
    """
    _require_positive_a1(profile_policy)
    if not tol > 0:
        raise DomainError("tol must be positive")
    c = _coeffs(params, profile_policy)
    solve = kernels.switching_roots if backend is None else kernels.get_backend(backend).switching_roots
    y2 = np.atleast_1d(np.asarray(y2, dtype=float))
    roots, iters, failed = solve(y2, *c.as_tuple(), tol, MAX_DOUBLINGS)
    if failed >= 0:
        raise SolverError(
            f"could not bracket the switching root at sample {failed} (y2={y2[failed]!r})",
            sample_index=failed,
        )
    return roots, iters


def switching_curve_point(params, profile_policy, y2, tol=DEFAULT_ROOT_TOL):
    """Unique ``xi`` with ``G(xi, y2) = 0``, and the iterations it took."""
    roots, iters = switching_curve(params, profile_policy, [y2], tol)
    return float(roots[0]), int(iters[0])


def switching_partials(params, profile_policy, xi, y2):
    """``(dG/dxi, dG/dy2)`` at a point."""
    c = _coeffs(params, profile_policy)
    arg = (c.tau - c.a1 * c.d1 * xi - c.a2 * c.d2 * y2) / c.scale
    dens = np.exp(-0.5 * arg * arg) / math.sqrt(2.0 * math.pi) / c.scale
    d_xi = -c.a1 * c.d1 * dens - 0.5 * c.rho * c.d1
    d_y2 = -c.a2 * c.d2 * dens + 0.5 * c.rho * c.d2
    return d_xi, d_y2


def switching_curve_slope(params, profile_policy, y2, xi=None):
    """``g'(y2)`` by implicit differentiation of ``G(g(y2), y2) = 0``."""
    _require_positive_a1(profile_policy)
    if xi is None:
        xi, _ = switching_curve(params, profile_policy, y2)
        if np.ndim(y2) == 0:
            xi = float(xi[0])
    d_xi, d_y2 = switching_partials(params, profile_policy, xi, y2)
    if np.any(d_xi == 0):
        raise AssertionError("dG/dxi vanished although a1 > 0")
    return -d_y2 / d_xi


def best_response_actions(params, profile_policy, y1, y2, tol=DEFAULT_ROOT_TOL):
    """Exact best response to a homogeneous profile at each observation."""
    g, _ = switching_curve(params, profile_policy, y2, tol)
    return np.where(np.asarray(y1) <= g, 1, 2).astype(np.int8)


__all__ = [
    "AffinePolicy", "BeliefContext", "GameParams", "Observation",
    "apply_policy", "belief", "belief_array", "best_response_actions",
    "br_lhs_minus_rhs", "diffuse_F", "mc_belief", "min_policy",
    "switching_G", "switching_G1", "switching_G2", "switching_curve",
    "switching_curve_point", "switching_curve_slope", "switching_partials",
]
