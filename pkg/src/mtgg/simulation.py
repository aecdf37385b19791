"""Monte Carlo game engine on regular graphs.

Trials are split into fixed-size chunks; chunk ``c`` draws from the stream
``make_rng(seed, c)``, so results do not depend on how many threads run the
chunks. Per-chunk sums are combined in chunk order with ``math.fsum``.
"""

from __future__ import annotations

import math
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .equilibrium import DIFFUSE_PROPOSAL_SCALE
from .errors import DomainError
from .gaussian import make_rng
from .policy import DEFAULT_ROOT_TOL, AffinePolicy, GameParams, switching_curve

CHUNK_TRIALS = 4096


@dataclass(frozen=True)
class RegularGraph:
    n: int
    k: int
    adjacency: tuple  # adjacency[i] is the sorted tuple of i's neighbours

    @property
    def indptr(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum([len(a) for a in self.adjacency])]).astype(np.int64)

    @property
    def indices(self) -> np.ndarray:
        return np.fromiter((j for a in self.adjacency for j in a), dtype=np.int64)

    @property
    def edge_count(self) -> int:
        return sum(len(a) for a in self.adjacency) // 2

    def neighbors(self, i: int) -> tuple:
        return self.adjacency[i]

    def audit(self) -> None:
        """Raise ``AssertionError`` unless the graph is k-regular, undirected,
        loop-free and connected."""
        assert len(self.adjacency) == self.n
        for i, nbrs in enumerate(self.adjacency):
            assert len(nbrs) == self.k, f"node {i} has degree {len(nbrs)}"
            assert len(set(nbrs)) == len(nbrs), f"node {i} has repeated neighbours"
            assert i not in nbrs, f"self-loop at {i}"
            assert list(nbrs) == sorted(nbrs)
            for j in nbrs:
                assert i in self.adjacency[j], f"edge {i}-{j} is not symmetric"
        seen = {0}
        queue = deque([0])
        while queue:
            for j in self.adjacency[queue.popleft()]:
                if j not in seen:
                    seen.add(j)
                    queue.append(j)
        assert len(seen) == self.n, "graph is disconnected"


def make_regular_graph(n: int, k: int) -> RegularGraph:
    """Circulant k-regular graph: offsets +-1..+-k//2, plus n/2 when k is odd."""
    if n < 2 or not 1 <= k <= n - 1:
        raise DomainError(f"need 1 <= k <= n-1, got n={n}, k={k}")
    if (n * k) % 2:
        raise DomainError(f"n*k must be even, got n={n}, k={k}")
    if k == 1 and n > 2:
        raise DomainError("a 1-regular graph on more than two nodes is disconnected")
    offsets = list(range(1, k // 2 + 1))
    adjacency = []
    for i in range(n):
        nbrs = {(i + o) % n for o in offsets} | {(i - o) % n for o in offsets}
        if k % 2:
            nbrs.add((i + n // 2) % n)
        adjacency.append(tuple(sorted(nbrs)))
    return RegularGraph(n, k, tuple(adjacency))


def pairwise_utility(a_i, a_j, theta, deg_i, deg_j, n) -> float:
    """Payoff to ``i`` from its game with neighbour ``j``.

    The coordination bonus is ``1/deg_i`` in either task; each agent pays the
    difficulty of the task it chose. ``deg_j`` is accepted for symmetry of
    the signature and does not enter.
    """
    if deg_i < 1 or deg_j < 1:
        raise DomainError("degrees must be >= 1")
    theta1, theta2 = theta
    if a_i == 1:
        return (1.0 if a_j == 1 else 0.0) / deg_i - theta1 / n
    return (1.0 if a_j == 2 else 0.0) / deg_i - theta2 / n


def local_utility(i, actions, theta, graph: RegularGraph) -> float:
    deg_i = len(graph.adjacency[i])
    return math.fsum(
        pairwise_utility(actions[i], actions[j], theta, deg_i, len(graph.adjacency[j]), graph.n)
        for j in graph.adjacency[i]
    )


def classify_pure_equilibria(theta1, theta2, deg_i, deg_j, n) -> frozenset:
    """Pure Nash equilibria of the two-player coordination game, by threshold."""
    if deg_i < 1 or deg_j < 1:
        raise DomainError("degrees must be >= 1")
    big_l = n / min(deg_i, deg_j)
    gap = theta1 - theta2
    if gap < -big_l:
        return frozenset({(1, 1)})
    if gap > big_l:
        return frozenset({(2, 2)})
    return frozenset({(1, 1), (2, 2)})


def bimatrix(theta1, theta2, deg_i, deg_j, n):
    """``{(a_i, a_j): (u_i, u_j)}`` for the two-player game."""
    out = {}
    for ai in (1, 2):
        for aj in (1, 2):
            out[(ai, aj)] = (
                pairwise_utility(ai, aj, (theta1, theta2), deg_i, deg_j, n),
                pairwise_utility(aj, ai, (theta1, theta2), deg_j, deg_i, n),
            )
    return out


def pure_nash_bruteforce(theta1, theta2, deg_i, deg_j, n) -> frozenset:
    """Enumerate the 2x2 game for profiles where neither player gains by deviating."""
    m = bimatrix(theta1, theta2, deg_i, deg_j, n)
    other = {1: 2, 2: 1}
    return frozenset(
        (ai, aj)
        for (ai, aj), (ui, uj) in m.items()
        if ui >= m[(other[ai], aj)][0] and uj >= m[(ai, other[aj])][1]
    )


# -- Monte Carlo -------------------------------------------------------------

@dataclass(frozen=True)
class SimReport:
    trials: int
    mean_payoff_per_agent: float
    mean_payoff_se: float
    coordination_rate: float
    coordination_rate_se: float
    task1_share: float
    task1_share_se: float
    deviation_gain: float | None = None
    deviation_gain_se: float | None = None

    @property
    def degenerate_stats(self) -> bool:
        """A single trial gives no spread estimate; standard errors are infinite."""
        return self.trials < 2


@dataclass(frozen=True)
class DeviationReport:
    gain: float
    std_err: float
    best_label: str
    gains: list = field(default_factory=list)
    std_errs: list = field(default_factory=list)
    labels: list = field(default_factory=list)

    def certifies(self, epsilon: float = 0.0, z: float = 3.0) -> bool:
        return self.gain <= epsilon + z * self.std_err


def _profile_arrays(profile, n):
    if isinstance(profile, AffinePolicy):
        profile = [profile] * n
    if len(profile) != n:
        raise DomainError(f"profile has {len(profile)} policies for {n} nodes")
    a1 = np.array([p.a1 for p in profile], dtype=float)
    a2 = np.array([p.a2 for p in profile], dtype=float)
    tau = np.array([p.tau for p in profile], dtype=float)
    return list(profile), a1, a2, tau


def prior_variances(params: GameParams):
    """Variances used to draw the task difficulties."""
    if params.diffuse:
        return (DIFFUSE_PROPOSAL_SCALE * params.alpha1_sq, DIFFUSE_PROPOSAL_SCALE * params.alpha2_sq)
    return (params.sigma1_sq, params.sigma2_sq)


def _draw(params, n, chunk, size, seed):
    rng = make_rng(seed, chunk)
    s1, s2 = (math.sqrt(v) for v in prior_variances(params))
    theta = rng.standard_normal((size, 2)) * np.array([s1, s2])
    noise = rng.standard_normal((size, n, 2)) * np.array(
        [math.sqrt(params.alpha1_sq), math.sqrt(params.alpha2_sq)]
    )
    y = theta[:, None, :] + noise
    return theta, y[:, :, 0], y[:, :, 1]


def _chunks(trials):
    return [(c, min(CHUNK_TRIALS, trials - c * CHUNK_TRIALS))
            for c in range(math.ceil(trials / CHUNK_TRIALS))]


def _map_chunks(fn, trials, threads):
    chunks = _chunks(trials)
    if threads and threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(lambda cs: fn(*cs), chunks))
    return [fn(c, s) for c, s in chunks]


def _mean_se(sums, sumsqs, n):
    total = math.fsum(sums)
    mean = total / n
    if n < 2:
        return mean, math.inf
    var = max(math.fsum(sumsqs) - n * mean * mean, 0.0) / (n - 1)
    return mean, math.sqrt(var / n)


def simulate(params: GameParams, graph: RegularGraph, profile, trials: int, seed: int,
             threads: int = 1) -> SimReport:
    """Play the game ``trials`` times and summarise payoffs and coordination."""
    if trials < 1:
        raise DomainError("trials must be >= 1")
    if graph.n != params.n_agents:
        raise DomainError("graph size differs from n_agents")
    _, a1, a2, tau = _profile_arrays(profile, graph.n)
    indptr, indices = graph.indptr, graph.indices
    edges = graph.edge_count

    def run(chunk, size):
        theta, y1, y2 = _draw(params, graph.n, chunk, size, seed)
        actions = np.where(a1 * y1 + a2 * y2 <= tau, 1, 2).astype(np.int8)
        payoff, matches = kernels.local_payoffs(actions, theta, indptr, indices, params.n_agents)
        per_trial = (payoff.mean(axis=1), matches / edges, (actions == 1).mean(axis=1))
        return [(float(v.sum()), float((v * v).sum())) for v in per_trial]

    parts = _map_chunks(run, trials, threads)
    stats = []
    for q in range(3):
        stats.append(_mean_se([p[q][0] for p in parts], [p[q][1] for p in parts], trials))
    return SimReport(
        trials=trials,
        mean_payoff_per_agent=stats[0][0], mean_payoff_se=stats[0][1],
        coordination_rate=stats[1][0], coordination_rate_se=stats[1][1],
        task1_share=stats[2][0], task1_share_se=stats[2][1],
    )


def perturbation_grid(center: AffinePolicy, a2_halfwidth=0.4, tau_halfwidth=2.0, size=9):
    """``size x size`` grid of policies ``(1, a2 + da, tau + dt)`` around ``center``."""
    c = center.normalized()
    out = []
    for da in np.linspace(-a2_halfwidth, a2_halfwidth, size):
        for dt in np.linspace(-tau_halfwidth, tau_halfwidth, size):
            out.append(AffinePolicy(1.0, c.a2 + float(da), c.tau + float(dt)))
    return out


def deviation_gain(params: GameParams, graph: RegularGraph, profile, focal_policy_grid,
                   trials: int, seed: int, focal: int = 0, include_best_response: bool = True,
                   threads: int = 1, root_tol: float = DEFAULT_ROOT_TOL) -> DeviationReport:
    """Largest estimated gain for ``focal`` from switching away from its profile policy.

    Competitors are the grid policies plus, for a homogeneous profile, the
    exact best response (switching curve) to it. All competitors see the
    same draws, so gains are paired differences.
    """
    if trials < 1:
        raise DomainError("trials must be >= 1")
    policies, a1, a2, tau = _profile_arrays(profile, graph.n)
    grid = list(focal_policy_grid)
    labels = [f"affine(a1={p.a1:g},a2={p.a2:g},tau={p.tau:g})" for p in grid]
    br_policy = None
    if include_best_response:
        if all(p == policies[0] for p in policies) and policies[0].a1 > 0 \
                and math.isfinite(policies[0].tau):
            br_policy = policies[0].normalized()
            labels.append("best_response_curve")
    if not labels:
        raise DomainError("no competitor policies to test")
    nbrs = np.asarray(graph.adjacency[focal], dtype=np.int64)
    k = float(len(nbrs))
    n = params.n_agents

    def focal_payoff(act, n1, theta):
        return np.where(act == 1, n1 / k - k * theta[:, 0] / n, (k - n1) / k - k * theta[:, 1] / n)

    def run(chunk, size):
        theta, y1, y2 = _draw(params, graph.n, chunk, size, seed)
        actions = np.where(a1 * y1 + a2 * y2 <= tau, 1, 2).astype(np.int8)
        n1 = (actions[:, nbrs] == 1).sum(axis=1).astype(float)
        fy1, fy2 = y1[:, focal], y2[:, focal]
        base = focal_payoff(actions[:, focal], n1, theta)
        out = []
        for p in grid:
            d = focal_payoff(p.actions(fy1, fy2), n1, theta) - base
            out.append((float(d.sum()), float((d * d).sum())))
        if br_policy is not None:
            g, _ = switching_curve(params, br_policy, fy2, root_tol)
            act = np.where(fy1 <= g, 1, 2)
            d = focal_payoff(act, n1, theta) - base
            out.append((float(d.sum()), float((d * d).sum())))
        return out

    parts = _map_chunks(run, trials, threads)
    gains, ses = [], []
    for q in range(len(labels)):
        m, s = _mean_se([p[q][0] for p in parts], [p[q][1] for p in parts], trials)
        gains.append(m)
        ses.append(s)
    best = int(np.argmax(gains))
    return DeviationReport(gains[best], ses[best], labels[best], gains, ses, labels)
