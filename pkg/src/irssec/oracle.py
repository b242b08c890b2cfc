"""Brute-force reference optimizers, deliberately independent of the solvers.

Two oracles: exhaustive enumeration over discretized phase configurations,
and random rank-one beamformer sampling with per-sample power bisection.
They share only the channel module with the real optimizers, so agreement
between the two paths is meaningful evidence rather than a tautology.

Callables passed in are batch evaluators: objective(S) maps an (N, k) block
of candidates to N real values, feasible(S) to N booleans.
"""

from __future__ import annotations

import numpy as np

from .linalg import InputError

GRID_POINT_GUARD = 10_000_000


def grid_search_phase(objective, n, resolution_deg=1.0, feasible=None):
    """Exhaustively search unit-modulus phase vectors on a uniform grid.

    Each of the n entries ranges over K = round(360 / resolution_deg) angles.
    Intended for n <= 3; refuses grids above 1e7 points. Returns
    (s_best, value); raises InputError when no grid point is feasible.
    """
    if n < 1:
        raise InputError("grid search needs at least one phase entry")
    K = int(round(360.0 / float(resolution_deg)))
    if K < 1:
        raise InputError(f"bad resolution {resolution_deg}")
    total = K ** n
    if total > GRID_POINT_GUARD:
        raise InputError(
            f"grid of {total} points exceeds the {GRID_POINT_GUARD} guard; "
            "coarsen the resolution or reduce n"
        )
    angles = 2.0 * np.pi * np.arange(K) / K
    phases = np.exp(1j * angles)

    # enumerate in blocks over the leading coordinate to bound memory
    if n == 1:
        tail = np.ones((1, 0), dtype=complex)
    else:
        grids = np.meshgrid(*([angles] * (n - 1)), indexing="ij")
        tail = np.exp(1j * np.stack([g.ravel() for g in grids], axis=1))

    best_val = -np.inf
    best_s = None
    for k in range(K):
        S = np.concatenate(
            [np.full((tail.shape[0], 1), phases[k]), tail], axis=1
        )
        vals = np.asarray(objective(S), dtype=float)
        if feasible is not None:
            mask = np.asarray(feasible(S), dtype=bool)
            if not mask.any():
                continue
            vals = np.where(mask, vals, -np.inf)
        i = int(np.argmax(vals))
        if vals[i] > best_val:
            best_val = float(vals[i])
            best_s = S[i].copy()
    if best_s is None:
        raise InputError("no feasible point on the phase grid")
    return best_s, best_val


def random_rank_one_beamformer(objective, feasible, P_T, m, samples=100_000,
                               rng=None, power_tolerance=1e-6):
    """Sample isotropic beamformer directions at the largest feasible power.

    Each direction is scaled to full power P_T when that is feasible,
    otherwise the largest feasible power is located by bisection on the
    scalar power (feasibility must be monotone in power, which holds for
    quadratic power/interference limits). Returns (w_best, value).
    """
    if P_T < 0:
        raise InputError(f"transmit power must be nonnegative, got {P_T}")
    if rng is None:
        rng = np.random.default_rng(0)
    V = rng.standard_normal((samples, m)) + 1j * rng.standard_normal((samples, m))
    V /= np.linalg.norm(V, axis=1, keepdims=True)

    W = np.sqrt(P_T) * V
    ok = np.asarray(feasible(W), dtype=bool)
    bad = ~ok
    if bad.any():
        # vectorized power bisection for the directions capped below P_T
        lo = np.zeros(bad.sum())
        hi = np.full(bad.sum(), float(P_T))
        Vb = V[bad]
        while np.max(hi - lo) > power_tolerance * max(P_T, 1.0):
            mid = 0.5 * (lo + hi)
            good = np.asarray(feasible(np.sqrt(mid)[:, None] * Vb), dtype=bool)
            lo = np.where(good, mid, lo)
            hi = np.where(good, hi, mid)
        W[bad] = np.sqrt(lo)[:, None] * Vb

    vals = np.asarray(objective(W), dtype=float)
    i = int(np.argmax(vals))
    return W[i].copy(), float(vals[i])
