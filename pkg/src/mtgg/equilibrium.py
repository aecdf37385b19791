"""Data-driven affine Bayesian Nash equilibrium by best-response iteration.

Each iteration computes the switching curve of the best response to the
current homogeneous profile ``(1, a2, tau)`` at a fixed set of ``y2``
samples and refits an affine switching line to it by least squares. The
line ``y1 = s*y2 + b`` corresponds to the policy ``y1 - s*y2 <= b``, so the
refit sets ``a2 = -s`` and ``tau = b``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import DomainError, SolverError
from .gaussian import make_rng
from .policy import DEFAULT_ROOT_TOL, AffinePolicy, GameParams, switching_curve

# Y2 has no proper marginal in the diffuse limit; sample a wide proposal instead.
DIFFUSE_PROPOSAL_SCALE = 1.0e4


class ProjectionSample(NamedTuple):
    y2: float
    g_of_y2: float


class AffineFit(NamedTuple):
    a2: float
    tau: float
    residual: float


@dataclass(frozen=True)
class SolveConfig:
    sample_count: int = 10_000
    max_iters: int = 100
    conv_tol: float = 1e-4
    seed: int = 0
    init_a2: float = -1.0
    init_tau: float = 0.0
    relaxation: float = 1.0
    root_tol: float = DEFAULT_ROOT_TOL

    def __post_init__(self):
        if int(self.sample_count) < 2:
            raise DomainError("sample_count must be >= 2 for a least-squares fit")
        if int(self.max_iters) < 1:
            raise DomainError("max_iters must be >= 1")
        if not self.conv_tol > 0:
            raise DomainError("conv_tol must be positive")
        if not 0 <= int(self.seed) < 2**64:
            raise DomainError("seed must fit in an unsigned 64-bit integer")
        if not self.init_a2 < 0:
            raise DomainError("init_a2 must be negative")
        if not math.isfinite(self.init_tau):
            raise DomainError("init_tau must be finite")
        if not 0 < self.relaxation <= 1:
            raise DomainError("relaxation must lie in (0, 1]")
        if not self.root_tol > 0:
            raise DomainError("root_tol must be positive")


@dataclass(frozen=True)
class SolveResult:
    a2_star: float
    tau_star: float
    residual_error: float
    iterations: int
    converged: bool
    trajectory: list = field(default_factory=list)

    @property
    def policy(self) -> AffinePolicy:
        return AffinePolicy(1.0, self.a2_star, self.tau_star)


def sample_y2(params: GameParams, m: int, seed: int) -> np.ndarray:
    """``m`` i.i.d. draws from the marginal of ``Y2 = Theta2 + Z2``."""
    if int(m) < 2:
        raise DomainError("need at least two samples")
    if params.diffuse:
        var = DIFFUSE_PROPOSAL_SCALE * params.alpha2_sq
    else:
        var = params.sigma2_sq + params.alpha2_sq
    return math.sqrt(var) * make_rng(seed).standard_normal(int(m))


def fit_affine(y2, g) -> AffineFit:
    """Least-squares fit of ``g ~ -a2*y2 + tau``; residual is the mean squared error."""
    y2 = np.asarray(y2, dtype=float)
    g = np.asarray(g, dtype=float)
    if y2.size < 2 or y2.shape != g.shape:
        raise DomainError("need matching arrays with at least two points")
    yc = y2 - y2.mean()
    sxx = float(yc @ yc)
    if sxx == 0.0:
        raise DomainError("all y2 samples coincide; the affine fit is rank deficient")
    slope = float(yc @ (g - g.mean())) / sxx
    intercept = float(g.mean() - slope * y2.mean())
    resid = slope * y2 + intercept - g
    return AffineFit(-slope, intercept, float(np.mean(resid * resid)))


def project_affine(samples) -> AffineFit:
    """Approximate projection of sampled switching-curve points onto affine lines."""
    arr = np.asarray([(s.y2, s.g_of_y2) for s in samples], dtype=float)
    if arr.ndim != 2 or arr.shape[0] < 2:
        raise DomainError("need at least two projection samples")
    return fit_affine(arr[:, 0], arr[:, 1])


def line_mse(y2, g, a2, tau) -> float:
    r = -a2 * np.asarray(y2) + tau - np.asarray(g)
    return float(np.mean(r * r))


def best_response_curve(params, a2, tau, y2, root_tol=DEFAULT_ROOT_TOL, check_monotone=True):
    """Switching curve of the best response to the profile ``(1, a2, tau)``."""
    policy = AffinePolicy(1.0, a2, tau)
    g, _ = switching_curve(params, policy, y2, root_tol)
    if check_monotone and a2 < 0:
        order = np.argsort(y2, kind="stable")
        steps = np.diff(g[order])
        # roots are only accurate to root_tol
        bad = np.nonzero(steps < -2.0 * root_tol)[0]
        if bad.size:
            i = int(order[bad[0] + 1])
            raise SolverError(
                f"switching curve not increasing near y2={y2[i]!r} although a2={a2} < 0",
                sample_index=i,
            )
    return g


def solve_affine_bne(params: GameParams, cfg: SolveConfig = SolveConfig()) -> SolveResult:
    """Iterate best response and affine projection to a fixed point.

    The ``y2`` samples are drawn once and reused by every iteration. A
    non-converged run is reported through ``converged=False``.
    """
    y2 = sample_y2(params, cfg.sample_count, cfg.seed)
    a2, tau = float(cfg.init_a2), float(cfg.init_tau)
    trajectory = [(a2, tau)]
    converged = False
    g = None
    it = 0
    for it in range(1, int(cfg.max_iters) + 1):
        try:
            g = best_response_curve(params, a2, tau, y2, cfg.root_tol)
        except SolverError as exc:
            raise SolverError(f"iteration {it}: {exc}", exc.sample_index) from exc
        fit = fit_affine(y2, g)
        w = cfg.relaxation
        new_a2 = a2 + w * (fit.a2 - a2)
        new_tau = tau + w * (fit.tau - tau)
        change = max(abs(new_a2 - a2), abs(new_tau - tau))
        a2, tau = new_a2, new_tau
        trajectory.append((a2, tau))
        if change <= cfg.conv_tol:
            converged = True
            break
    return SolveResult(
        a2_star=a2,
        tau_star=tau,
        residual_error=line_mse(y2, g, a2, tau),
        iterations=it,
        converged=converged,
        trajectory=trajectory,
    )
