"""Worst-case secrecy design under bounded eavesdropper-CSI error.

The eavesdropper's channels are known only within Frobenius/Euclidean balls.
A scalar tau caps Eve's worst-case received power through a sign-definiteness
certificate, turning the secrecy objective at fixed tau into maximizing Bob's
power; tau itself is found by a one-dimensional search:

* tau_upper_bound: the largest useful tau is the transmit power times the
  best achievable squared Bob-channel norm over the phases (a secrecy rate
  that is nonnegative keeps Eve's power below Bob's).
* ao_robust: at fixed tau, alternate the certified beamformer ascent (to
  convergence) with the penalized convex phase step (to convergence); the
  Bob power recorded at each alternation boundary never decreases.
* line_search_tau: evaluate phi(tau) = (1 + Bob power) / (1 + tau) on a grid
  dense where optima live and log-sparse above, warm-starting consecutive
  samples, and return the best certified design; the reported rate is the
  certified worst case, clamped at zero.

All Eve-side quantities, including tau and the error radii, live on the
noise-normalized scale (see UncertaintyBounds.from_raw).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .channel import effective_row
from .linalg import InputError, as_complex_array, unimodular_quadratic_ascent
from .subproblems import (
    PCCP_GAMMA0,
    UncertaintyBounds,
    beamformer_rows,
    eps_pair,
    pccp_phase_step,
    solve_beamformer_robust_step,
)

AO_TOL = 1e-3
AO_MAX_ROUNDS = 50
WSTEP_TOL = 1e-3
WSTEP_MAX_ITERS = 50
PCCP_SLACK_TARGET = 1e-4
PCCP_MAX_ITERS = 30
TAU_FINE_STEP = 1e-2
TAU_LOG_SAMPLES = 20
ZERO_BEAM_POWER = 1e-9      # relative to P_T; below this the beam snaps to 0
FILL_HEADROOM_TOL = 1e-2    # reuse the incumbent when the cap's headroom
                            # cannot move the sample value by more than this


def tau_upper_bound(ch, P_T, restarts=8, rng=None):
    """Largest worst-case Eve power worth considering, with its phases.

    Returns (tau_max, s_opt) where tau_max = P_T * J(s_opt) and J is the
    squared norm of Bob's effective row, maximized over unit-modulus phases
    by the closed-form ascent from several deterministic starts.
    """
    if not P_T > 0:
        raise InputError(f"total power must be positive, got {P_T}")
    n = ch.n
    if n == 0:
        s_opt = np.zeros(0, dtype=complex)
        return float(P_T) * float(np.linalg.norm(ch.h_AB_n) ** 2), s_opt

    G = ch.H_B_n @ ch.H_B_n.conj().T
    b = ch.H_B_n @ np.conj(ch.h_AB_n)

    def J(s):
        return float(np.linalg.norm(ch.h_AB_n + s.conj() @ ch.H_B_n) ** 2)

    if rng is None:
        rng = np.random.default_rng(0)
    starts = [np.ones(n, dtype=complex)]
    nb = np.abs(b)
    if np.all(nb > 0):
        starts.append(b / nb)
    starts += [np.exp(2j * np.pi * rng.uniform(size=n))
               for _ in range(max(0, int(restarts) - len(starts)))]
    s_opt, best = None, -np.inf
    for s0 in starts:
        s = unimodular_quadratic_ascent(G, b, s0)
        val = J(s)
        if val > best:
            s_opt, best = s, val
    return float(P_T) * best, s_opt


@dataclass
class RobustAoResult:
    feasible: bool
    phi: float                   # (1 + Bob power) / (1 + tau); -inf when infeasible
    w: np.ndarray
    s: np.ndarray
    bob_power: float             # |g_B w|^2, noise normalized
    interference: float          # |g_P w|^2, raw watts
    tau: float
    rounds: int
    trace: list = field(default_factory=list)   # Bob power at each boundary
    flags: tuple = ()


def _bob_power(ch, w, s):
    g_B = effective_row(ch.h_AB_n, ch.H_B_n, s)
    return float(np.abs(g_B @ w) ** 2)


def _interference(ch, w, s):
    g_P = effective_row(ch.h_AP, ch.H_P, s)
    return float(np.abs(g_P @ w) ** 2)


def _converged_w_step(ch, s, eps, tau, P_T, P_I, w_tilde, obj_tilde=None,
                      tol=WSTEP_TOL, max_iters=WSTEP_MAX_ITERS):
    """Iterate the certified beamformer ascent until its objective settles.

    obj_tilde is the known Bob power of the w_tilde seed; when the first
    solve already lands within tolerance of it, one solve suffices.
    """
    step = solve_beamformer_robust_step(ch, s, eps, tau, P_T, P_I,
                                        w_tilde=w_tilde)
    flags = step.flags
    if not step.feasible:
        return step, flags
    if (obj_tilde is not None
            and abs(step.objective - obj_tilde) <= tol * max(1.0, abs(obj_tilde))):
        return step, flags
    for _ in range(max_iters - 1):
        prev = step.objective
        nxt = solve_beamformer_robust_step(ch, s, eps, tau, P_T, P_I,
                                           w_tilde=step.w)
        flags += nxt.flags
        if not nxt.feasible:
            break
        if nxt.objective >= prev:
            step = nxt
        if abs(nxt.objective - prev) <= tol * max(1.0, abs(prev)):
            break
    return step, flags


def _converged_pccp(ch, w, eps, tau, P_I, s_tilde,
                    max_iters=PCCP_MAX_ITERS):
    """Run the penalized phase iteration until its slack budget is met."""
    gamma = PCCP_GAMMA0
    last = None
    flags = ()
    for _ in range(max_iters):
        step = pccp_phase_step(ch, w, eps, tau, P_I, s_tilde, gamma)
        flags += step.flags
        if not step.feasible:
            break
        last = step
        s_tilde, gamma = step.s, step.gamma_next
        if step.slack_sum <= PCCP_SLACK_TARGET:
            break
    if last is not None and last.slack_sum > PCCP_SLACK_TARGET:
        flags += ("pccp_slack_above_target",)
    return last, flags


def ao_robust(tau, ch, eps, P_T, P_I, init=None, w_init=None, rng=None,
              tol=AO_TOL, max_rounds=AO_MAX_ROUNDS):
    """Alternating worst-case design at a fixed Eve-power cap tau.

    Alternates the certified beamformer ascent with the penalized phase
    step, both to convergence, accepting a phase move only when Bob's power
    does not drop, and always finishing on a beam step so the final pair is
    certified at the final phases. Infeasibility is reported with a -inf
    objective, not raised.
    """
    if tau < 0:
        raise InputError(f"tau must be nonnegative, got {tau}")
    eps = eps_pair(eps)
    if init is None:
        if rng is None:
            rng = np.random.default_rng(0)
        s_cur = np.exp(2j * np.pi * rng.uniform(size=ch.n))
    else:
        s_cur = as_complex_array(init.s if hasattr(init, "s") else init,
                                 "phase start")
        if s_cur.size != ch.n:
            raise InputError(f"phase start has {s_cur.size} entries, surface {ch.n}")
    tau = float(tau)

    def failure(flags):
        return RobustAoResult(
            feasible=False, phi=-np.inf, w=np.zeros(ch.m, dtype=complex),
            s=s_cur, bob_power=0.0, interference=0.0, tau=tau, rounds=0,
            trace=[], flags=tuple(dict.fromkeys(flags + ("infeasible",))),
        )

    flags = ()
    warm_obj = None
    if w_init is not None:
        w_init = as_complex_array(w_init, "beamformer start")
        warm_obj = _bob_power(ch, w_init, s_cur)
    step, new_flags = _converged_w_step(ch, s_cur, eps, tau, P_T, P_I, w_init,
                                        obj_tilde=warm_obj)
    flags += new_flags
    if not step.feasible:
        return failure(flags)
    w_cur = step.w
    obj_cur = _bob_power(ch, w_cur, s_cur)
    trace = [obj_cur]
    rounds = 0
    for rounds in range(1, max_rounds + 1):
        moved = False
        if ch.n:
            phase, new_flags = _converged_pccp(ch, w_cur, eps, tau, P_I, s_cur)
            flags += new_flags
            if phase is not None and phase.feasible:
                s_cand = phase.s
                cand_seed = _bob_power(ch, w_cur, s_cand)
                cand_step, new_flags = _converged_w_step(
                    ch, s_cand, eps, tau, P_T, P_I, w_cur, obj_tilde=cand_seed)
                flags += new_flags
                if cand_step.feasible:
                    cand_obj = _bob_power(ch, cand_step.w, s_cand)
                    if cand_obj >= obj_cur:
                        s_cur, w_cur = s_cand, cand_step.w
                        obj_new = cand_obj
                        moved = True
        if not moved:
            # re-polish the beam at the unchanged phases
            step, new_flags = _converged_w_step(ch, s_cur, eps, tau, P_T, P_I,
                                                w_cur, obj_tilde=obj_cur)
            flags += new_flags
            if step.feasible:
                obj_new = _bob_power(ch, step.w, s_cur)
                if obj_new >= obj_cur:
                    w_cur = step.w
                else:
                    obj_new = obj_cur
            else:
                obj_new = obj_cur
        trace.append(obj_new)
        if abs(obj_new - obj_cur) <= tol * max(1.0, abs(obj_cur)):
            obj_cur = obj_new
            break
        obj_cur = obj_new

    if (float(np.linalg.norm(w_cur) ** 2) <= ZERO_BEAM_POWER * float(P_T)
            and obj_cur <= 1e-6):
        w_cur = np.zeros(ch.m, dtype=complex)
        obj_cur = 0.0
        trace[-1] = 0.0
    phi = (1.0 + obj_cur) / (1.0 + tau)
    return RobustAoResult(
        feasible=True, phi=phi, w=w_cur, s=s_cur, bob_power=obj_cur,
        interference=_interference(ch, w_cur, s_cur), tau=tau, rounds=rounds,
        trace=trace, flags=tuple(dict.fromkeys(flags)),
    )


@dataclass
class RobustResult:
    w: np.ndarray
    s: np.ndarray
    tau_opt: float
    phi: float
    C_s: float                   # certified worst-case rate, clamped at 0
    bob_power: float
    interference: float
    power: float                 # ||w||^2
    samples: list = field(default_factory=list)   # (tau, phi) pairs evaluated
    flags: tuple = ()


def tau_grid(tau_max):
    """Sampling grid for the one-dimensional tau search.

    Fine 1e-2 spacing where optima are typically found (up to 1), then a
    log-spaced tail up to tau_max.
    """
    if tau_max < 0:
        raise InputError(f"tau_max must be nonnegative, got {tau_max}")
    top = min(1.0, tau_max)
    fine = np.append(np.arange(0.0, top, TAU_FINE_STEP), top)
    if tau_max <= 1.0:
        return np.unique(fine)
    tail = np.geomspace(1.0 + TAU_FINE_STEP, tau_max, TAU_LOG_SAMPLES)
    return np.unique(np.concatenate([fine, tail]))


def _eve_row_norm_cap(ch):
    """Upper bound on ||h_AE + s^H H_E|| over unit-modulus s (normalized)."""
    rows = (np.linalg.norm(ch.H_E_n, axis=1) if ch.n
            else np.zeros(0))
    return float(np.linalg.norm(ch.h_AE_n) + rows.sum())


def _triangle_worst_case(ch, w, s, eps_E, eps_AE):
    """Closed-form bound on Eve's worst-case power for a fixed design.

    Triangle inequality over the admissible error balls: |(g_E + e)w| <=
    |g_E w| + (eps_AE + sqrt(n)*eps_E)*||w||, exact when both radii are 0.
    """
    g_E = effective_row(ch.h_AE_n, ch.H_E_n, s)
    nominal = float(np.abs(g_E @ w))
    spread = (eps_AE + np.sqrt(ch.n) * eps_E) * float(np.linalg.norm(w))
    return (nominal + spread) ** 2


def line_search_tau(ch, eps, P_T, P_I, rng=None, tol=AO_TOL):
    """Search tau for the best certified worst-case secrecy design.

    Scans tau_grid upward. A design certified at some tau stays certified at
    every larger tau (the cap only loosens), so the latest solved design can
    stand in for a later sample whenever the coarse bound (1 + tau_max) /
    (1 + tau) shows that sample cannot beat the current best; such samples
    are recorded without re-solving. Consecutive real evaluations warm start
    from the previous design. When the error radii are so large that any
    certifiable beam is provably worthless (an aligned in-ball error alone
    drives Eve's worst-case power past tau for any nonzero beam with
    phi > 1), the zero-beam design is returned outright. The result is the
    argmax sample with the certified rate max(0, log2 phi).
    """
    eps_E, eps_AE = eps_pair(eps)
    tau_max, s_opt = tau_upper_bound(ch, P_T)
    J_max = tau_max / float(P_T)
    grid = tau_grid(tau_max)                # ascending
    if rng is None:
        rng = np.random.default_rng(0)
    s_init = (np.exp(2j * np.pi * rng.uniform(size=ch.n))
              if ch.n else np.zeros(0, dtype=complex))

    margin = eps_AE + np.sqrt(ch.n) * eps_E - _eve_row_norm_cap(ch)
    if margin > 0 and J_max <= margin ** 2:
        # Any certified w obeys tau >= (margin*||w||)^2, so Bob's power is at
        # most J_max*tau/margin^2 <= tau and phi <= 1 everywhere: the zero
        # beam at tau = 0 is optimal.
        samples = [(float(t), 1.0 / (1.0 + float(t))) for t in grid]
        return RobustResult(
            w=np.zeros(ch.m, dtype=complex), s=s_init, tau_opt=0.0, phi=1.0,
            C_s=0.0, bob_power=0.0, interference=0.0, power=0.0,
            samples=samples, flags=("degenerate_radius",),
        )

    best = None
    incumbent = None       # latest solved design; certified at all later tau
    incumbent_wc = np.inf  # its closed-form worst-case Eve power
    samples = []
    flags = ()
    init, w_prev = s_init, None
    for tau in grid:
        fill = None
        if best is not None and incumbent is not None:
            if (1.0 + tau_max) / (1.0 + tau) <= best.phi:
                # even a beam hitting the global Bob-power cap loses to best
                fill = (1.0 + incumbent.bob_power) / (1.0 + tau)
            elif incumbent.bob_power > 0 and incumbent_wc <= tau:
                # cap slack at the incumbent, and the headroom it opens is
                # negligible: re-solving cannot move the value meaningfully
                headroom = (2.0 * np.sqrt(tau / incumbent.bob_power)
                            + tau / incumbent.bob_power)
                if headroom <= FILL_HEADROOM_TOL:
                    fill = (1.0 + incumbent.bob_power) / (1.0 + tau)
        if fill is not None:
            samples.append((float(tau), fill))
            continue
        res = ao_robust(tau, ch, (eps_E, eps_AE), P_T, P_I,
                        init=init, w_init=w_prev, tol=tol)
        flags += res.flags
        if not res.feasible:
            continue
        samples.append((float(tau), res.phi))
        if best is None or res.phi > best.phi:
            best = res
        incumbent = res
        incumbent_wc = _triangle_worst_case(ch, res.w, res.s, eps_E, eps_AE)
        init = res.s
        if float(np.linalg.norm(res.w)) > 0:
            w_prev = res.w
    if best is None:
        raise InputError("no feasible tau sample; tau_max with w = 0 "
                         "should always certify")
    C_s = max(0.0, float(np.log2(best.phi)))
    return RobustResult(
        w=best.w, s=best.s, tau_opt=best.tau, phi=best.phi, C_s=C_s,
        bob_power=best.bob_power, interference=best.interference,
        power=float(np.linalg.norm(best.w) ** 2),
        samples=samples, flags=tuple(dict.fromkeys(flags)),
    )


def sample_admissible_errors(eps, ch, rng, count=100):
    """Draw error matrices/rows on and inside the admissible balls.

    Yields (Delta_E, delta_AE) pairs in normalized units, a quarter of them
    pushed to the boundary radius where the certificate is tightest.
    """
    eps_E, eps_AE = eps_pair(eps)
    n, m = ch.n, ch.m
    for k in range(count):
        D = rng.standard_normal((n, m)) + 1j * rng.standard_normal((n, m))
        d = rng.standard_normal(m) + 1j * rng.standard_normal(m)
        if k % 4 == 0:
            scale_D = eps_E / max(np.linalg.norm(D), 1e-300)
            scale_d = eps_AE / max(np.linalg.norm(d), 1e-300)
        else:
            scale_D = eps_E * rng.uniform() / max(np.linalg.norm(D), 1e-300)
            scale_d = eps_AE * rng.uniform() / max(np.linalg.norm(d), 1e-300)
        yield D * scale_D, d * scale_d


def worst_case_eve_power(ch, w, s, errors):
    """Largest realized Eve power over the given error draws (normalized)."""
    w = as_complex_array(w, "beamformer")
    worst = 0.0
    for D, d in errors:
        g = effective_row(ch.h_AE_n + d, ch.H_E_n + D, s)
        worst = max(worst, float(np.abs(g @ w) ** 2))
    return worst
