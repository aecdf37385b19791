"""Pure numpy implementations of the hot kernels.

These mirror ``_kernels.pyx`` step for step and are used whenever the
compiled extension is unavailable (or ``MTGG_BACKEND=python``).
"""

import numpy as np
from scipy.special import erfc

_SQRT2 = np.sqrt(2.0)


def _switching_g(xi, y2, a1, a2, tau, d1, d2, scale, rho):
    arg = (tau - a1 * d1 * xi - a2 * d2 * y2) / scale
    return 0.5 * erfc(-arg / _SQRT2) - 0.5 - 0.5 * rho * (d1 * xi - d2 * y2)


def switching_roots(y2, a1, a2, tau, d1, d2, scale, rho, tol, max_doublings=200):
    """Root in xi of the (decreasing) switching function for every ``y2``.

    Returns ``(roots, iterations, failed)``, where ``failed`` is the index of
    the first sample whose bracket could not be established, or -1.
    """
    y2 = np.ascontiguousarray(y2, dtype=float)
    n = y2.size
    args = (a1, a2, tau, d1, d2, scale, rho)
    iters = np.zeros(n, dtype=np.int64)

    xi0 = (tau - a2 * d2 * y2) / (a1 * d1)
    g0 = _switching_g(xi0, y2, *args)
    direction = np.where(g0 > 0.0, 1.0, -1.0)
    lo = xi0.copy()
    hi = xi0.copy()
    exact = g0 == 0.0

    # geometric bracket expansion away from xi0
    near = xi0.copy()
    pending = ~exact
    step = np.ones(n)
    for _ in range(max_doublings):
        if not pending.any():
            break
        idx = np.nonzero(pending)[0]
        trial = near[idx] + direction[idx] * step[idx]
        gt = _switching_g(trial, y2[idx], *args)
        iters[idx] += 1
        crossed = np.where(direction[idx] > 0.0, gt <= 0.0, gt >= 0.0)
        done = idx[crossed]
        lo[done] = np.where(direction[done] > 0.0, near[done], trial[crossed])
        hi[done] = np.where(direction[done] > 0.0, trial[crossed], near[done])
        moving = idx[~crossed]
        near[moving] = trial[~crossed]
        step[moving] *= 2.0
        pending[done] = False
    if pending.any():
        return xi0, iters, int(np.nonzero(pending)[0][0])

    # bisection; G(lo) > 0 >= G(hi) throughout
    active = (~exact) & (hi - lo > tol)
    while active.any():
        idx = np.nonzero(active)[0]
        l, h = lo[idx], hi[idx]
        mid = l + 0.5 * (h - l)
        stuck = (mid <= l) | (mid >= h)
        gm = _switching_g(mid, y2[idx], *args)
        iters[idx] += 1
        go_up = gm > 0.0
        zero = gm == 0.0
        lo[idx] = np.where(go_up | zero, mid, l)
        hi[idx] = np.where(go_up, h, mid)
        still = (~stuck) & (~zero) & (hi[idx] - lo[idx] > tol)
        active[idx] = still

    roots = np.where(exact, xi0, lo + 0.5 * (hi - lo))
    return roots, iters, -1


def local_payoffs(actions, theta, indptr, indices, n_agents):
    """Local utility of every node for every trial.

    ``actions`` is ``(T, N)`` with entries in {1, 2}; ``theta`` is ``(T, 2)``.
    Returns ``(payoffs (T, N), matching_edges (T,))``.
    """
    actions = np.asarray(actions)
    theta = np.asarray(theta, dtype=float)
    indptr = np.asarray(indptr, dtype=np.int64)
    indices = np.asarray(indices, dtype=np.int64)
    deg = np.diff(indptr).astype(float)
    is1 = (actions == 1).astype(float)
    n1 = np.add.reduceat(is1[:, indices], indptr[:-1], axis=1)
    play1 = actions == 1
    payoff = np.where(
        play1,
        n1 / deg - deg * theta[:, :1] / n_agents,
        (deg - n1) / deg - deg * theta[:, 1:2] / n_agents,
    )
    same = np.where(play1, n1, deg - n1)
    matches = (same.sum(axis=1) / 2).astype(np.int64)
    return payoff, matches
