"""Self-checks run by ``mtgg verify``.

Each check returns a :class:`CheckResult` with the measured quantity, the
threshold it was compared against and a pass flag.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .equilibrium import SolveConfig, solve_affine_bne
from .gaussian import McConfig, expected_cdf_shift, make_rng, mc_expected_cdf_shift
from .policy import (
    AffinePolicy,
    BeliefContext,
    GameParams,
    belief,
    diffuse_F,
    mc_belief,
    min_policy,
    switching_curve,
    switching_curve_slope,
)
from .simulation import deviation_gain, make_regular_graph, perturbation_grid


@dataclass
class CheckResult:
    name: str
    passed: bool
    measured: float
    threshold: float
    details: dict = field(default_factory=dict)

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] {self.name}: measured={self.measured:.6g} threshold={self.threshold:.6g}"

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class VerifySettings:
    mc_samples: int = 1_000_000
    oracle_points: int = 50
    oracle_z: float = 4.0
    diagonal_points: int = 100
    offdiagonal_points: int = 1000
    random_instances: int = 20
    curve_points: int = 100
    fd_step: float = 1e-4
    fd_rel_tol: float = 1e-5
    deviation_trials: int = 100_000
    deviation_grid: int = 9
    epsilon: float = 0.0
    seed: int = 0
    force_w_var: float | None = None


def diffuse_twin(params: GameParams) -> GameParams:
    return GameParams(params.sigma1_sq, params.sigma2_sq, params.alpha1_sq, params.alpha2_sq,
                      params.n_agents, params.degree, diffuse=True)


def check_cdf_identity(params: GameParams, s: VerifySettings) -> CheckResult:
    """E[Phi(W)] = 1/2, and the diffuse belief built on it matches simulation."""
    closed_err = abs(expected_cdf_shift(0.0, 1.0) - 0.5)
    est, se = mc_expected_cdf_shift(0.0, 1.0, McConfig(s.mc_samples, s.seed))
    z_half = abs(est - 0.5) / se
    ctx = BeliefContext.from_params(diffuse_twin(params), min_policy(), s.force_w_var)
    zs = []
    for k, y in enumerate([(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (-1.0, 2.0)]):
        m, e = mc_belief(ctx, y, McConfig(s.mc_samples, s.seed + 1 + k))
        zs.append(abs(belief(ctx, y) - m) / e)
    z_max = max([z_half] + zs)
    passed = closed_err <= 1e-12 and z_half <= 3.0 and max(zs) <= s.oracle_z
    return CheckResult("cdf_shift_identity", passed, z_max, 3.0 if z_half >= max(zs) else s.oracle_z,
                       {"closed_form_error": closed_err, "mc_z": z_half, "belief_z": zs,
                        "w_var": ctx.w_var})


def check_diffuse_sign(params: GameParams, s: VerifySettings) -> CheckResult:
    p = diffuse_twin(params)
    rng = make_rng(s.seed, 11)
    diag = rng.uniform(-50, 50, s.diagonal_points)
    diag_err = max(abs(diffuse_F(p, (t, t))) for t in diag)
    pts = rng.uniform(-50, 50, (s.offdiagonal_points, 2))
    mismatches = sum(
        1 for y1, y2 in pts if y1 != y2 and np.sign(diffuse_F(p, (y1, y2))) != np.sign(y2 - y1)
    )
    passed = diag_err <= 1e-12 and mismatches == 0
    return CheckResult("diffuse_sign_structure", passed, diag_err, 1e-12,
                       {"sign_mismatches": mismatches, "offdiagonal_points": s.offdiagonal_points})


def random_instance(rng, n_agents=10):
    k = int(rng.integers(1, n_agents))
    params = GameParams(
        float(rng.uniform(0.2, 5)), float(rng.uniform(0.2, 5)),
        float(rng.uniform(0.2, 5)), float(rng.uniform(0.2, 5)), n_agents, k,
    )
    policy = AffinePolicy(float(rng.uniform(0.2, 3)), float(-rng.uniform(0.2, 3)),
                          float(rng.uniform(-3, 3)))
    return params, policy


def curve_monotone_and_slope(params, policy, y2, h, rel_tol):
    g, _ = switching_curve(params, policy, y2)
    increasing = bool(np.all(np.diff(g) > 0))
    slope = switching_curve_slope(params, policy, y2, xi=g)
    gp, _ = switching_curve(params, policy, y2 + h, tol=1e-13)
    gm, _ = switching_curve(params, policy, y2 - h, tol=1e-13)
    fd = (gp - gm) / (2 * h)
    rel = float(np.max(np.abs(slope - fd) / np.abs(fd)))
    return increasing, rel, g


def check_monotonicity(params: GameParams, s: VerifySettings) -> CheckResult:
    rng = make_rng(s.seed, 12)
    cases = [random_instance(rng, params.n_agents) for _ in range(s.random_instances)]
    if not params.diffuse:
        cases.append((params, AffinePolicy(1.0, -2.0, 0.0)))
    y2 = np.linspace(-20, 20, s.curve_points)
    worst_rel, non_monotone = 0.0, 0
    for p, pol in cases:
        inc, rel, _ = curve_monotone_and_slope(p, pol, y2, s.fd_step, s.fd_rel_tol)
        non_monotone += not inc
        worst_rel = max(worst_rel, rel)
    passed = non_monotone == 0 and worst_rel <= s.fd_rel_tol
    return CheckResult("curve_monotonicity", passed, worst_rel, s.fd_rel_tol,
                       {"instances": len(cases), "non_monotone": non_monotone})


def check_oracle(params: GameParams, s: VerifySettings) -> CheckResult:
    rng = make_rng(s.seed, 13)
    zs = []
    for k in range(s.oracle_points):
        p, pol = random_instance(rng, params.n_agents)
        ctx = BeliefContext.from_params(p, pol)
        y = (float(rng.uniform(-3, 3)), float(rng.uniform(-3, 3)))
        m, e = mc_belief(ctx, y, McConfig(s.mc_samples, s.seed + 1000 + k))
        zs.append(abs(belief(ctx, y) - m) / e if e > 0 else 0.0)
    worst = max(zs) if zs else 0.0
    return CheckResult("oracle_equivalence", worst <= s.oracle_z, worst, s.oracle_z,
                       {"points": s.oracle_points})


def check_deviation(params: GameParams, s: VerifySettings, solve_cfg: SolveConfig) -> CheckResult:
    graph = make_regular_graph(params.n_agents, params.degree)
    if params.diffuse:
        profile = min_policy()
    else:
        profile = solve_affine_bne(params, solve_cfg).policy
    grid = perturbation_grid(profile, size=s.deviation_grid)
    rep = deviation_gain(params, graph, profile, grid, s.deviation_trials, s.seed)
    bound = s.epsilon + 3.0 * rep.std_err
    return CheckResult("deviation_test", rep.gain <= bound, rep.gain, bound,
                       {"std_err": rep.std_err, "best": rep.best_label,
                        "profile": [profile.a1, profile.a2, profile.tau]})


def run_checks(params: GameParams, settings: VerifySettings, solve_cfg: SolveConfig):
    return [
        check_cdf_identity(params, settings),
        check_diffuse_sign(params, settings),
        check_monotonicity(params, settings),
        check_oracle(params, settings),
        check_deviation(params, settings, solve_cfg),
    ]


def fd_slope(params, policy, y2, h=1e-4):
    """Central finite difference of the switching curve (independent of the
    implicit-derivative formula)."""
    gp, _ = switching_curve(params, policy, [y2 + h], tol=1e-13)
    gm, _ = switching_curve(params, policy, [y2 - h], tol=1e-13)
    return float((gp[0] - gm[0]) / (2 * h))


__all__ = ["CheckResult", "VerifySettings", "run_checks", "fd_slope", "random_instance",
           "diffuse_twin"]
