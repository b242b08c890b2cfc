"""Alternating secrecy-rate maximization with complete channel knowledge.

The transmit beam and the surface phases are optimized in turns. The beam
step is globally optimal at fixed phases (see subproblems). The phase step
maximizes the Bob/Eve ratio at a fixed beam through three nested loops, all
closed form:

* outer: bisection on the fractional-programming multiplier u, driving the
  residual h_E(s) - u * h_B(s) to zero (h_x = 1 + received power, noise
  normalized),
* middle: successive convex approximation; each iterate maximizes a linear
  surrogate of u * power_B - power_E over unit-modulus phases,
* inner: when the interference surrogate is violated, the limit is folded
  into the objective with a weight mu found by bisection so the surrogate
  constraint lands on its boundary.

Every accepted phase vector keeps the true interference within its limit,
and the returned multiplier is the achieved form ratio, so the residual at
the output is zero to rounding.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .channel import effective_row, rates
from .linalg import (
    BisectionSpec,
    BracketError,
    InputError,
    as_complex_array,
    bisect,
    entrywise_phase,
    hermitian_eig,
    unimodular_quadratic_ascent,
)
from .subproblems import QuadraticForm, quadratic_params, solve_beamformer_full

SCA_TOL = 1e-3
SCA_MAX_ITERS = 200
MU_CAP_DOUBLINGS = 20
DINKELBACH_MAX_REFINES = 50
AO_TOL = 1e-3
AO_MAX_ROUNDS = 100


@dataclass(frozen=True)
class PhaseForms:
    """Received-power quadratics in the phases at a fixed beam."""

    bob: QuadraticForm       # noise normalized
    eve: QuadraticForm       # noise normalized
    primary: QuadraticForm   # raw watts


def phase_forms(ch, w):
    w = as_complex_array(w, "beamformer")
    R = np.outer(w, w.conj())
    return PhaseForms(
        bob=quadratic_params(R, ch.h_AB_n, ch.H_B_n),
        eve=quadratic_params(R, ch.h_AE_n, ch.H_E_n),
        primary=quadratic_params(R, ch.h_AP, ch.H_P),
    )


@dataclass(frozen=True)
class PhaseSurrogate:
    """Linear surrogates of the ratio objective and interference at s_tilde.

    Maximizing Re{s^H objective_vector} over unit-modulus s minimizes the
    convex majorant of power_E - u * power_B. The interference surrogate is
    penalty_offset(s) = 2 Re{s^H penalty_vector}, an upper bound on the raw
    interference shifted so that feasibility reads
    penalty_offset(s) <= penalty_threshold.
    """

    objective_vector: np.ndarray
    penalty_vector: np.ndarray
    penalty_threshold: float

    def penalty_offset(self, s):
        return 2.0 * float(np.real(s.conj() @ self.penalty_vector))

    def phases_at(self, mu):
        return entrywise_phase(self.objective_vector - mu * self.penalty_vector)


def build_surrogate(forms, u, s_tilde, P_I):
    """Surrogate coefficients for one SCA iterate around s_tilde."""
    s_tilde = as_complex_array(s_tilde, "expansion point")
    n = s_tilde.size
    Q = forms.eve.quadratic - u * forms.bob.quadratic
    lam = float(hermitian_eig(Q)[0][0]) if n else 0.0
    v0 = lam * s_tilde - Q @ s_tilde - (forms.eve.linear - u * forms.bob.linear)

    QP = forms.primary.quadratic
    lamP = float(hermitian_eig(QP)[0][0]) if n else 0.0
    shiftP = lamP * s_tilde - QP @ s_tilde
    p_lin = forms.primary.linear - shiftP
    threshold = (P_I - forms.primary.constant - 2.0 * n * lamP
                 + float(np.real(s_tilde.conj() @ QP @ s_tilde)))
    return PhaseSurrogate(
        objective_vector=v0, penalty_vector=p_lin, penalty_threshold=threshold,
    )


def penalty_bisection(surrogate, tolerance=1e-10):
    """Weight the interference surrogate into the phase update by bisection.

    The surrogate offset is non-increasing in the weight mu, so doubling
    from 1 brackets the boundary; 2^20 doublings without satisfaction is an
    error. Returns the feasible-side phases and the weight.
    """
    gap = lambda mu: (surrogate.penalty_offset(surrogate.phases_at(mu).s)
                      - surrogate.penalty_threshold)
    mu_hi = 1.0
    doublings = 0
    while gap(mu_hi) > 0:
        mu_hi *= 2.0
        doublings += 1
        if doublings > MU_CAP_DOUBLINGS:
            raise BracketError(
                "interference surrogate not satisfiable by penalty weighting",
                lower=0.0, upper=mu_hi, f_lower=gap(0.0), f_upper=gap(mu_hi),
            )
    tol = tolerance * max(1.0, mu_hi)
    spec = BisectionSpec(lower=0.0, upper=mu_hi, tolerance=tol,
                         evaluator=gap, direction="decreasing")
    mu_root, _ = bisect(spec)
    mu = mu_root
    if gap(mu) > 0:
        mu = mu_root + tol   # settle on the feasible side of the crossing
    return surrogate.phases_at(mu), mu


def _ratio_objective(forms, u, s):
    return forms.eve.value(s) - u * forms.bob.value(s)


def sca_phase(forms, u, s0, P_I, tol=SCA_TOL, max_iters=SCA_MAX_ITERS):
    """Minimize h_E - u * h_B over unit-modulus phases from a feasible start.

    Each iterate maximizes the linear surrogate; the interference limit is
    enforced through its own surrogate (tight at the expansion point, so
    surrogate feasibility implies true feasibility). Descent is guaranteed,
    with a guard against rounding noise. Returns (s, objective, iterations).
    """
    s_cur = as_complex_array(s0, "phase vector")
    if s_cur.size == 0:
        return s_cur, _ratio_objective(forms, u, s_cur), 0
    if forms.primary.power(s_cur) > P_I * (1 + 1e-9):
        raise InputError("phase optimization needs a feasible starting point")
    f_cur = _ratio_objective(forms, u, s_cur)
    for it in range(1, max_iters + 1):
        sur = build_surrogate(forms, u, s_cur, P_I)
        cand = sur.phases_at(0.0)
        if sur.penalty_offset(cand.s) > sur.penalty_threshold:
            cand, _ = penalty_bisection(sur)
        s_new = cand.s
        f_new = _ratio_objective(forms, u, s_new)
        if f_new > f_cur or forms.primary.power(s_new) > P_I * (1 + 1e-9):
            return s_cur, f_cur, it          # rounding noise: keep the best
        s_cur, f_prev = s_new, f_cur
        f_cur = f_new
        if abs(f_prev - f_new) <= tol * max(1.0, abs(f_prev)):
            return s_cur, f_cur, it
    return s_cur, f_cur, max_iters


def dinkelbach_bracket(ch, w, P_T):
    """Upper bisection bracket: 1 + P_T (||h_AB|| + sum of cascade row norms)^2.

    Bounds 1 + |g_B w|^2 for every unit-modulus phase vector and every beam
    within the power budget, hence also the optimal form ratio against an
    eavesdropper form that is at least one.
    """
    row_sum = float(np.linalg.norm(ch.h_AB_n))
    if ch.n:
        row_sum += float(np.sum(np.linalg.norm(ch.H_B_n, axis=1)))
    return 1.0 + float(P_T) * row_sum ** 2


@dataclass
class DinkelbachPhase:
    s: np.ndarray
    u: float               # achieved h_E / h_B form ratio at s
    residual: float        # h_E(s) - u * h_B(s); zero to rounding
    iterations: int        # outer bisection steps
    ratio: float           # h_B / h_E form ratio at s
    pool: list = field(default_factory=list)   # every candidate met


def dinkelbach_phase(ch, w, s0, P_T, P_I):
    """Phase vector maximizing the Bob/Eve form ratio at a fixed beam.

    Bisection on u with the SCA solver as inner evaluator; every phase
    vector met along the way joins a candidate pool, and the pool minimum
    defines the residual, which keeps it monotone in u. The returned phases
    are the pool's best by achieved ratio (never worse than the start), and
    the returned multiplier is their achieved form ratio.
    """
    forms = phase_forms(ch, w)
    s0 = as_complex_array(s0, "phase vector")
    if s0.size == 0:
        u = forms.eve.value(s0) / forms.bob.value(s0)
        return DinkelbachPhase(s=s0, u=u, residual=0.0, iterations=0,
                               ratio=1.0 / u)
    pool = [s0]

    def incumbent(u):
        vals = [forms.eve.value(s) - u * forms.bob.value(s) for s in pool]
        return pool[int(np.argmin(vals))]

    def residual_at(u):
        s_new, _, _ = sca_phase(forms, u, incumbent(u), P_I)
        pool.append(s_new)
        return min(forms.eve.value(s) - u * forms.bob.value(s) for s in pool)

    u_hi = dinkelbach_bracket(ch, w, P_T)
    spec = BisectionSpec(lower=0.0, upper=u_hi, tolerance=1e-9 * u_hi,
                         evaluator=residual_at, direction="decreasing")
    _, iterations = bisect(spec)

    def best_ratio():
        ratios = [forms.bob.value(s) / forms.eve.value(s) for s in pool]
        k = int(np.argmax(ratios))
        return pool[k], ratios[k]

    # Refine at the achieved ratio: solving the subproblem at u = 1/ratio can
    # only push the ratio further up, so repeat until that stalls.
    s_best, ratio = best_ratio()
    for _ in range(DINKELBACH_MAX_REFINES):
        s_new, _, _ = sca_phase(forms, 1.0 / ratio, s_best, P_I)
        pool.append(s_new)
        iterations += 1
        s_next, ratio_next = best_ratio()
        if ratio_next <= ratio * (1.0 + 1e-9):
            break
        s_best, ratio = s_next, ratio_next

    u_star = 1.0 / ratio
    residual = forms.eve.value(s_best) - u_star * forms.bob.value(s_best)
    return DinkelbachPhase(s=s_best, u=u_star, residual=residual,
                           iterations=iterations, ratio=ratio, pool=pool)


def residual_profile(ch, w, s0, P_T, P_I, us):
    """Dinkelbach residuals at given multipliers, shared candidate pool.

    Evaluating in the given order with a common pool makes the profile
    provably non-increasing for increasing u.
    """
    forms = phase_forms(ch, w)
    pool = [as_complex_array(s0, "phase vector")]
    out = []
    for u in us:
        vals = [forms.eve.value(s) - float(u) * forms.bob.value(s)
                for s in pool]
        s_new, _, _ = sca_phase(forms, float(u), pool[int(np.argmin(vals))],
                                P_I)
        pool.append(s_new)
        out.append(min(forms.eve.value(s) - float(u) * forms.bob.value(s)
                       for s in pool))
    return np.asarray(out)


@dataclass
class TracePoint:
    step: str              # "beam" or "phase"
    C_B: float
    C_E: float
    C_s: float
    power: float
    interference: float
    u: Optional[float] = None
    residual: Optional[float] = None


@dataclass
class FullCsiResult:
    w: np.ndarray
    s: np.ndarray
    C_B: float
    C_E: float
    C_s: float
    power: float
    interference: float
    rounds: int
    iterations: int = 0    # subproblem passes (beam or phase), trace rows - 1
    trace: list = field(default_factory=list)
    flags: tuple = ()


def _record(trace, ch, w, s, step, u=None, residual=None):
    C_B, C_E, C_s, intf = rates(ch, w, s)
    trace.append(TracePoint(step=step, C_B=C_B, C_E=C_E, C_s=C_s,
                            power=float(np.linalg.norm(w) ** 2),
                            interference=intf, u=u, residual=residual))
    return C_s


def _form_ratio(ch, w, s):
    """Achieved h_E / h_B form ratio and its (identically zero) residual."""
    g_B = effective_row(ch.h_AB_n, ch.H_B_n, s)
    g_E = effective_row(ch.h_AE_n, ch.H_E_n, s)
    h_B = 1.0 + float(np.abs(g_B @ w) ** 2)
    h_E = 1.0 + float(np.abs(g_E @ w) ** 2)
    u = h_E / h_B
    return u, abs(h_E - u * h_B)


def ao_full_csi(ch, P_T, P_I, s0=None, rng=None,
                tol=AO_TOL, max_rounds=AO_MAX_ROUNDS):
    """Alternating optimization of beam and phases under full CSI.

    Starts from given phases (or a random unit-modulus draw) and alternates
    the globally optimal beam step with the fractional-programming phase
    step. Phase candidates (the multiplier search's best, plus a
    Bob-cophasing ascent that piles the reflected path onto the direct one)
    are judged by the secrecy rate after re-solving the beam for them, so a
    candidate that sacrifices ratio at the stale beam can still win the
    round; whatever commits is a (beam, phase) pair whose rate never drops.
    Stops when the rate moves at most tol over a round.
    """
    if s0 is None:
        if rng is None:
            rng = np.random.default_rng(0)
        s_cur = np.exp(2j * np.pi * rng.uniform(size=ch.n))
    else:
        s_cur = as_complex_array(s0, "phase vector")
        if s_cur.size != ch.n:
            raise InputError(f"phase start has {s_cur.size} entries, surface {ch.n}")
    flags = ()
    w_cur = np.zeros(ch.m, dtype=complex)
    trace = []
    C_prev = _record(trace, ch, w_cur, s_cur, "init")
    if ch.n == 0:
        design = solve_beamformer_full(ch, s_cur, P_T, P_I)
        w_cur = design.w
        _record(trace, ch, w_cur, s_cur, "beam")
        C_B, C_E, C_s, intf = rates(ch, w_cur, s_cur)
        return FullCsiResult(
            w=w_cur, s=s_cur, C_B=C_B, C_E=C_E, C_s=C_s,
            power=float(np.linalg.norm(w_cur) ** 2), interference=intf,
            rounds=1, iterations=1, trace=trace,
            flags=tuple(dict.fromkeys(design.flags)),
        )
    cophase_G = ch.H_B_n @ ch.H_B_n.conj().T
    cophase_b = ch.H_B_n @ np.conj(ch.h_AB_n)
    rounds = 0
    for rounds in range(1, max_rounds + 1):
        design = solve_beamformer_full(ch, s_cur, P_T, P_I)
        flags += design.flags
        _, _, C_w, _ = rates(ch, design.w, s_cur)
        if C_w >= trace[-1].C_s:
            w_cur = design.w
        _record(trace, ch, w_cur, s_cur, "beam")

        candidates = []
        try:
            dk = dinkelbach_phase(ch, w_cur, s_cur, P_T, P_I)
        except BracketError:
            flags += ("phase_bracket",)
        else:
            candidates.append(dk.s)
        candidates.append(
            unimodular_quadratic_ascent(cophase_G, cophase_b, s_cur))
        best = (trace[-1].C_s, s_cur, w_cur, ())
        for cand in candidates:
            step_c = solve_beamformer_full(ch, cand, P_T, P_I)
            _, _, C_c, _ = rates(ch, step_c.w, cand)
            if C_c > best[0]:
                best = (C_c, cand, step_c.w, step_c.flags)
        _, s_cur, w_cur, won_flags = best
        flags += won_flags
        u, residual = _form_ratio(ch, w_cur, s_cur)
        C_now = _record(trace, ch, w_cur, s_cur, "phase", u=u, residual=residual)

        if abs(C_now - C_prev) <= tol:
            break
        C_prev = C_now
    C_B, C_E, C_s, intf = rates(ch, w_cur, s_cur)
    return FullCsiResult(
        w=w_cur, s=s_cur, C_B=C_B, C_E=C_E, C_s=C_s,
        power=float(np.linalg.norm(w_cur) ** 2), interference=intf,
        rounds=rounds, iterations=len(trace) - 1, trace=trace,
        flags=tuple(dict.fromkeys(flags)),
    )
