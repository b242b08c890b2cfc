"""Convex building blocks shared by the three designs.

Contents:

* quadratic coefficients of the received power as a function of the surface
  phases, for a fixed transmit covariance,
* a spectral majorizer turning those quadratics into linear surrogates,
* the ratio-maximizing beamformer step: a whitened generalized-eigenvalue
  solution when the interference limit is slack, and a quasiconvex bisection
  over small feasibility certificates (with Gaussian randomization) when it
  binds,
* one worst-case beamformer iterate under bounded eavesdropper-CSI error
  (sign-definiteness linear matrix inequality in the error radii),
* one penalized convex iterate for the surface phases under the same
  worst-case constraints (ring relaxation of unit modulus),
* one minimum-power beamformer iterate for the artificial-noise design.

All conic programs go through one interior-point backend with a fallback
chain; parametrized problems are cached per shape so repeated solves skip
canonicalization.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import NamedTuple, Optional

import cvxpy as cp
import numpy as np

from .channel import effective_row
from .linalg import (
    HermitianMatrix,
    InputError,
    as_complex_array,
    hermitian_eig,
    null_space_basis,
)

PCCP_GAMMA0 = 10.0
PCCP_GAMMA_GROWTH = 5.0
PCCP_GAMMA_MAX = 1e3
RANDOMIZATION_SAMPLES = 1000


class SolverError(RuntimeError):
    """All backends failed on a conic subproblem; carries their statuses."""

    def __init__(self, message, statuses=()):
        super().__init__(message)
        self.statuses = tuple(statuses)


# --------------------------------------------------------------------------
# conic backend: fallback chain, cached parametrized problems
# --------------------------------------------------------------------------

_SOLVER_CHAIN = (
    ("CLARABEL", {}),
    ("CVXOPT", {}),
    ("SCS", {"eps_abs": 1e-9, "eps_rel": 1e-9, "max_iters": 100_000}),
)

_INFEASIBLE = {cp.INFEASIBLE, cp.INFEASIBLE_INACCURATE}

class _ThreadLocalCache:
    """Per-thread store for parametrized problems.

    Solving writes the Parameter values in place, so a cached problem must
    never be shared between threads running concurrently.
    """

    def __init__(self):
        self._tls = threading.local()

    def _store(self):
        store = getattr(self._tls, "store", None)
        if store is None:
            store = self._tls.store = {}
        return store

    def __contains__(self, key):
        return key in self._store()

    def __getitem__(self, key):
        return self._store()[key]

    def __setitem__(self, key, value):
        self._store()[key] = value

    def clear(self):
        self._store().clear()


_problem_cache = _ThreadLocalCache()


def reset_problem_cache():
    """Drop the calling thread's cached problems."""
    _problem_cache.clear()


def _run(problem):
    """Solve with the fallback chain; returns (status, flags).

    status is 'optimal' or 'infeasible'; anything else raises SolverError.
    An accepted but low-accuracy solution is flagged 'inaccurate'.
    """
    statuses = []
    inaccurate_seen = False
    available = cp.installed_solvers()
    for name, kwargs in _SOLVER_CHAIN:
        if name not in available:
            continue
        try:
            problem.solve(solver=name, **kwargs)
        except (cp.error.SolverError, ZeroDivisionError, ValueError) as exc:
            statuses.append(f"{name}: raised {exc!r}")
            continue
        statuses.append(f"{name}: {problem.status}")
        if problem.status == cp.OPTIMAL:
            return "optimal", ()
        if problem.status in _INFEASIBLE:
            return "infeasible", ()
        if problem.status == cp.OPTIMAL_INACCURATE:
            inaccurate_seen = True
            # keep this solution but let a later solver improve on it
            continue
    if inaccurate_seen and problem.value is not None:
        return "optimal", ("inaccurate",)
    raise SolverError(
        "no conic backend produced a usable solution: " + "; ".join(statuses),
        statuses=statuses,
    )


def _hermitize(M):
    return 0.5 * (M + M.conj().T)


def _outer(g):
    return _hermitize(np.outer(np.conj(g), g))


# --------------------------------------------------------------------------
# quadratic phase dependence of received powers
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class QuadraticForm:
    """|(h_Ax + s^H H_x) w|^2 as a quadratic in s for fixed covariance R.

    power(s) = s^H Q s + 2 Re{s^H l} + c with Q PSD. value(s) adds the unit
    noise floor, 1 + power(s), which is the form entering the rate ratio.
    """

    constant: float
    linear: np.ndarray
    quadratic: np.ndarray

    def power(self, s):
        s = as_complex_array(s, "phase vector")
        quad = float(np.real(s.conj() @ self.quadratic @ s))
        lin = 2.0 * float(np.real(s.conj() @ self.linear))
        return quad + lin + self.constant

    def value(self, s):
        return 1.0 + self.power(s)


def quadratic_params(R, h_Ax, H_x):
    """Coefficients of the received power at one terminal versus the phases.

    R is the transmit covariance; h_Ax the direct row and H_x the cascade for
    that terminal (use noise-normalized rows for rate terms, raw rows for the
    interference limit).
    """
    R = HermitianMatrix(R).a
    h_Ax = as_complex_array(h_Ax, "direct row")
    H_x = as_complex_array(H_x, "cascade")
    if R.shape != (h_Ax.size, h_Ax.size) or H_x.shape[1] != h_Ax.size:
        raise InputError(
            f"covariance {R.shape}, direct row {h_Ax.shape} and cascade "
            f"{H_x.shape} are inconsistent"
        )
    Rh = R @ np.conj(h_Ax)
    return QuadraticForm(
        constant=float(np.real(h_Ax @ Rh)),
        linear=H_x @ Rh,
        quadratic=_hermitize(H_x @ R @ H_x.conj().T),
    )


class Majorizer(NamedTuple):
    """x^H A x <= scale * ||x||^2 - 2 Re{x^H shift} + constant, tight at x_tilde."""

    scale: float
    shift: np.ndarray
    constant: float


def majorize(A, x_tilde):
    """Spectral linearization of a Hermitian quadratic around x_tilde."""
    A = HermitianMatrix(A).a
    x_tilde = as_complex_array(x_tilde, "expansion point")
    vals, _ = hermitian_eig(A)
    lam1 = float(vals[0]) if vals.size else 0.0
    shifted = lam1 * x_tilde - A @ x_tilde
    return Majorizer(
        scale=lam1,
        shift=shifted,
        constant=float(np.real(x_tilde.conj() @ shifted)),
    )


# --------------------------------------------------------------------------
# full-CSI beamformer step
# --------------------------------------------------------------------------

@dataclass
class BeamformerDesign:
    w: np.ndarray
    R: np.ndarray
    objective: float      # (1 + |g_B w|^2-form) / (1 + |g_E w|^2-form) at R
    rank_ratio: float     # second / largest eigenvalue of R
    flags: tuple = ()


def beamformer_rows(ch, s):
    """Effective rows entering the beamformer problems for phases s.

    Bob and Eve rows are noise-normalized; the primary-receiver row is raw
    because its limit is in watts.
    """
    g_B = effective_row(ch.h_AB_n, ch.H_B_n, s)
    g_E = effective_row(ch.h_AE_n, ch.H_E_n, s)
    g_P = effective_row(ch.h_AP, ch.H_P, s)
    return g_B, g_E, g_P


def _ratio(R, g_B, g_E):
    num = 1.0 + float(np.real(g_B @ R @ np.conj(g_B)))
    den = 1.0 + float(np.real(g_E @ R @ np.conj(g_E)))
    return num / den


def _ratio_at(w, g_B, g_E):
    return (1.0 + float(np.abs(g_B @ w) ** 2)) / (1.0 + float(np.abs(g_E @ w) ** 2))


def _whiten(g_E, P_T):
    """Closed-form sqrt(P_T) * (I + P_T g_E^H g_E)^{-1/2} (rank-one update)."""
    m = g_E.size
    ne2 = float(np.linalg.norm(g_E) ** 2)
    S = np.eye(m, dtype=complex)
    if ne2 > 0:
        u = np.conj(g_E) / np.sqrt(ne2)
        S += (1.0 / np.sqrt(1.0 + P_T * ne2) - 1.0) * np.outer(u, u.conj())
    return np.sqrt(P_T) * S


def _pencil_peak(g_B, g_E, P_T):
    """Best ratio and direction ignoring the interference limit.

    Whitens the denominator quadratic with the closed-form inverse square
    root, so a single Hermitian eigendecomposition gives the exact optimum of
    (1 + |g_B w|^2) / (1 + |g_E w|^2) over ||w||^2 <= P_T. Full power is
    optimal whenever the peak exceeds one.
    """
    S = _whiten(g_E, P_T)
    C = S @ (np.eye(g_B.size) / P_T + _outer(g_B)) @ S
    vals, vecs = hermitian_eig(C)
    w = S @ vecs[:, 0]
    w *= np.sqrt(P_T) / np.linalg.norm(w)
    return float(vals[0]), w


def _feasible_cap(w, g_P, P_T, P_I):
    """Largest-power rescale of direction w meeting both limits."""
    nw = float(np.linalg.norm(w))
    if nw == 0:
        return w
    scale = np.sqrt(P_T) / nw
    if np.isfinite(P_I):
        pw = float(np.abs(g_P @ w))
        if pw > 0:
            scale = min(scale, np.sqrt(P_I) / pw)
    return w * scale


def _cached_ratio_certificate(m):
    key = ("ratio_cert", m)
    if key not in _problem_cache:
        Y = cp.Variable((m, m), hermitian=True)
        delta = cp.Variable()
        M1 = cp.Parameter((m, m), hermitian=True)   # Bob/t minus Eve quadratic
        T2 = cp.Parameter((m, m), hermitian=True)   # whitened transmit power
        P3 = cp.Parameter((m, m), hermitian=True)   # whitened interference / P_I
        rhs = cp.Parameter()
        cons = [
            cp.real(cp.trace(M1 @ Y)) >= rhs + delta,
            cp.real(cp.trace(T2 @ Y)) <= 1.0,
            cp.real(cp.trace(P3 @ Y)) <= 1.0,
            Y >> 0,
        ]
        prob = cp.Problem(cp.Maximize(delta), cons)
        _problem_cache[key] = (prob, {"M1": M1, "T2": T2, "P3": P3, "rhs": rhs},
                              Y, delta)
    return _problem_cache[key]


def solve_beamformer_full(ch, s, P_T, P_I):
    """Globally optimal transmit design for fixed phases under full CSI.

    Maximizes (1 + |g_B w|^2) / (1 + |g_E w|^2) subject to ||w||^2 <= P_T and
    raw interference <= P_I. The power-only optimum is a whitened Hermitian
    eigenproblem solved in closed form; when that solution violates the
    interference limit, the ratio is bisected with a small semidefinite
    feasibility certificate per trial level (denominator-whitened so the data
    stays well scaled at any SNR) and the final covariance is rounded to a
    beam by Gaussian randomization.
    """
    if not (np.isfinite(P_T) and P_T >= 0):
        raise InputError(f"P_T must be finite and nonnegative, got {P_T}")
    if not P_I > 0:
        raise InputError(f"P_I must be positive (possibly inf), got {P_I}")
    g_B, g_E, g_P = beamformer_rows(ch, s)
    m = ch.m

    def zero_design():
        return BeamformerDesign(
            w=np.zeros(m, dtype=complex), R=np.zeros((m, m), dtype=complex),
            objective=1.0, rank_ratio=0.0, flags=(),
        )

    def beam_design(w, flags=()):
        return BeamformerDesign(
            w=w, R=np.outer(w, w.conj()), objective=_ratio_at(w, g_B, g_E),
            rank_ratio=0.0, flags=flags,
        )

    if P_T == 0:
        return zero_design()
    peak, w_peak = _pencil_peak(g_B, g_E, P_T)
    if peak <= 1.0 + 1e-12:
        # Bob cannot beat Eve in any direction: staying silent is optimal
        return zero_design()
    if not np.isfinite(P_I) or np.abs(g_P @ w_peak) ** 2 <= P_I * (1 + 1e-12):
        return beam_design(w_peak)

    # Interference limit binds. Certified witnesses bracket the optimum:
    # the power-capped peak direction from below, the unconstrained peak
    # from above.
    cands = [_feasible_cap(w_peak, g_P, P_T, P_I)]
    if m > 1:
        # best direction in the null space of the primary-receiver row
        Q = null_space_basis(_outer(g_P))
        peak_perp, y = _pencil_peak(g_B @ Q, g_E @ Q, P_T)
        if peak_perp > 1.0:
            cands.append(Q @ y)
    best_w = max(cands, key=lambda c: _ratio_at(c, g_B, g_E))
    t_lo = max(1.0, _ratio_at(best_w, g_B, g_E))
    t_hi = peak
    if m == 1 or t_hi <= t_lo * (1 + 1e-10):
        return beam_design(best_w, flags=("ipc_capped",))

    S = _whiten(g_E, P_T)
    T2 = np.eye(m) + (1.0 / (1.0 + P_T * np.linalg.norm(g_E) ** 2) - 1.0) \
        * _outer(g_E) / max(np.linalg.norm(g_E) ** 2, 1e-300)
    bS, eS, pS = g_B @ S, g_E @ S, g_P @ S
    prob, params, Y, delta = _cached_ratio_certificate(m)
    params["T2"].value = _hermitize(T2)
    params["P3"].value = _outer(pS) / P_I
    flags = ("bisection",)
    Y_best = None
    for _ in range(80):
        if t_hi <= t_lo * (1 + 1e-10):
            break
        t = float(np.sqrt(t_lo * t_hi))
        params["M1"].value = _outer(bS) / t - _outer(eS)
        params["rhs"].value = (t - 1.0) / t
        try:
            status, _ = _run(prob)
        except SolverError:
            status = None
        if status == "optimal" and float(delta.value) >= -1e-9:
            t_lo = t
            Y_best = _hermitize(np.asarray(Y.value))
            cand = _feasible_cap(S @ hermitian_eig(Y_best)[1][:, 0], g_P, P_T, P_I)
            if _ratio_at(cand, g_B, g_E) > _ratio_at(best_w, g_B, g_E):
                best_w = cand
        else:
            t_hi = t

    if Y_best is not None:
        # round the last feasible covariance to a beam
        vals, vecs = hermitian_eig(Y_best)
        L = vecs * np.sqrt(np.clip(vals, 0.0, None))
        rng = np.random.default_rng(0)
        draws = L @ ((rng.standard_normal((m, RANDOMIZATION_SAMPLES))
                      + 1j * rng.standard_normal((m, RANDOMIZATION_SAMPLES)))
                     / np.sqrt(2.0))
        W = S @ draws
        norms = np.linalg.norm(W, axis=0)
        keep = norms > 0
        W = W[:, keep]
        scale = np.sqrt(P_T) / norms[keep]
        pw = np.abs(g_P @ W)
        hit = pw > 0
        scale[hit] = np.minimum(scale[hit], np.sqrt(P_I) / pw[hit])
        W = W * scale
        ratios = (1 + np.abs(g_B @ W) ** 2) / (1 + np.abs(g_E @ W) ** 2)
        k = int(np.argmax(ratios))
        if ratios[k] > _ratio_at(best_w, g_B, g_E):
            best_w = W[:, k]
        flags = flags + ("randomized",)
    return beam_design(best_w, flags=flags)


# --------------------------------------------------------------------------
# worst-case (bounded Eve-CSI error) steps
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class UncertaintyBounds:
    """Error radii for Eve's CSI on the noise-normalized scale.

    eps_E bounds the Frobenius norm of the cascaded-channel error, eps_AE
    the norm of the direct-row error. Physical (raw channel) radii enter via
    from_raw, which divides by the Eve noise amplitude once so every later
    consumer works in normalized units.
    """

    eps_E: float
    eps_AE: float

    def __post_init__(self):
        for name in ("eps_E", "eps_AE"):
            v = float(getattr(self, name))
            if not np.isfinite(v) or v < 0:
                raise InputError(f"{name} must be a finite nonnegative radius, got {v}")
            object.__setattr__(self, name, v)

    @classmethod
    def from_raw(cls, eps_E, eps_AE, sigma_E):
        if not sigma_E > 0:
            raise InputError(f"noise amplitude must be positive, got {sigma_E}")
        return cls(float(eps_E) / float(sigma_E), float(eps_AE) / float(sigma_E))

    @property
    def pair(self):
        return (self.eps_E, self.eps_AE)


def eps_pair(eps):
    """Accept an UncertaintyBounds or a bare (eps_E, eps_AE) pair."""
    if isinstance(eps, UncertaintyBounds):
        return eps.pair
    e = tuple(float(x) for x in eps)
    if len(e) != 2:
        raise InputError(f"expected two error radii, got {eps!r}")
    if any(not np.isfinite(v) or v < 0 for v in e):
        raise InputError(f"error radii must be finite and nonnegative, got {eps!r}")
    return e


@dataclass
class RobustStep:
    w: Optional[np.ndarray]
    u1: float
    u2: float
    objective: float      # |g_B w|^2 actually achieved
    feasible: bool
    flags: tuple = ()


def _lmi_blocks(tau_expr, e_expr, w_expr, u1, u2, eps_E, eps_AE, m):
    """Worst-case Eve-power certificate as a (2m+2) Hermitian block matrix.

    PSD of this matrix certifies |(g_E + error) w|^2 <= tau for every
    Frobenius-bounded cascade error (radius eps_E) and direct-row error
    (radius eps_AE), both on the noise-normalized scale.
    """
    zrow = np.zeros((1, m))
    wcol = cp.reshape(w_expr, (m, 1), order="C")
    wrow = cp.reshape(cp.conj(w_expr), (1, m), order="C")
    one = lambda x: cp.reshape(x, (1, 1), order="C")
    M = cp.bmat([
        [one(tau_expr), one(e_expr), zrow, zrow],
        [one(cp.conj(e_expr)), one(1.0 - u2), eps_E * wrow, eps_AE * wrow],
        [zrow.T, eps_E * wcol, u1 * np.eye(m), np.zeros((m, m))],
        [zrow.T, eps_AE * wcol, np.zeros((m, m)), u2 * np.eye(m)],
    ])
    return 0.5 * (M + cp.conj(cp.transpose(M)))


def _cached_robust_w(m, eps_E, eps_AE, with_ipc):
    key = ("robust_w", m, float(eps_E), float(eps_AE), with_ipc)
    if key not in _problem_cache:
        w = cp.Variable(m, complex=True)
        u1 = cp.Variable(nonneg=True)
        u2 = cp.Variable(nonneg=True)
        q = cp.Parameter(m, complex=True)
        gE = cp.Parameter(m, complex=True)
        tau = cp.Parameter(nonneg=True)
        s2 = cp.Parameter(nonneg=True)   # ||s||^2 in the certificate corner
        PT = cp.Parameter(nonneg=True)
        e = cp.sum(cp.multiply(gE, w))
        M = _lmi_blocks(tau - s2 * u1 - u2, e, w, u1, u2, eps_E, eps_AE, m)
        cons = [M >> 0, cp.sum_squares(w) <= PT]
        params = {"q": q, "gE": gE, "tau": tau, "s2": s2, "PT": PT}
        if with_ipc:
            gP = cp.Parameter(m, complex=True)
            sqrtPI = cp.Parameter(nonneg=True)
            cons.append(cp.abs(cp.sum(cp.multiply(gP, w))) <= sqrtPI)
            params.update(gP=gP, sqrtPI=sqrtPI)
        obj = cp.Maximize(cp.real(cp.sum(cp.multiply(cp.conj(q), w))))
        _problem_cache[key] = (cp.Problem(obj, cons), params, w, u1, u2)
    return _problem_cache[key]


def solve_beamformer_robust_step(ch, s, eps, tau, P_T, P_I, w_tilde=None):
    """One concave-linearization iterate of the worst-case beamformer.

    Maximizes Re{w^H g_B^H (g_B w_tilde)} subject to transmit power, raw
    interference, and the worst-case Eve-power certificate at level tau.
    w_tilde = None seeds the linearization with the matched-filter direction.
    Infeasibility (tau too small for the error radii) is reported in the
    result, not raised.
    """
    eps_E, eps_AE = eps_pair(eps)
    if tau < 0:
        raise InputError(f"tau must be nonnegative, got {tau}")
    g_B, g_E, g_P = beamformer_rows(ch, s)
    s_arr = as_complex_array(s.s if hasattr(s, "s") else s, "phase vector")
    with_ipc = np.isfinite(P_I)
    prob, params, w, u1, u2 = _cached_robust_w(ch.m, eps_E, eps_AE, with_ipc)
    if w_tilde is None:
        q = np.conj(g_B)
    else:
        q = np.conj(g_B) * (g_B @ as_complex_array(w_tilde, "w_tilde"))
    nq = np.linalg.norm(q)
    # only the direction matters; unit scale keeps the backends honest
    params["q"].value = q / nq if nq > 0 else q
    params["gE"].value = g_E
    params["tau"].value = float(tau)
    params["s2"].value = float(np.linalg.norm(s_arr) ** 2)
    params["PT"].value = float(P_T)
    if with_ipc:
        params["gP"].value = g_P
        params["sqrtPI"].value = float(np.sqrt(P_I))
    status, flags = _run(prob)
    if status == "infeasible":
        return RobustStep(w=None, u1=0.0, u2=0.0, objective=-np.inf,
                          feasible=False, flags=flags)
    w_val = np.asarray(w.value).reshape(-1)
    return RobustStep(
        w=w_val, u1=float(u1.value), u2=float(u2.value),
        objective=float(np.abs(g_B @ w_val) ** 2), feasible=True, flags=flags,
    )


@dataclass
class PccpStep:
    s: Optional[np.ndarray]
    slack_sum: float
    u1: float
    u2: float
    objective: float      # linearized Bob-power surrogate value (lower is better)
    gamma_next: float
    feasible: bool
    flags: tuple = ()


def _cached_pccp(n, m, eps_E, eps_AE, with_ipc):
    key = ("pccp", n, m, float(eps_E), float(eps_AE), with_ipc)
    if key not in _problem_cache:
        s = cp.Variable(n, complex=True)
        b = cp.Variable(n, nonneg=True)
        c = cp.Variable(n, nonneg=True)
        u1 = cp.Variable(nonneg=True)
        u2 = cp.Variable(nonneg=True)
        obj_vec = cp.Parameter(n, complex=True)    # conj(x_tilde) * (H_B w)
        e0 = cp.Parameter(complex=True)            # g_AE w
        evec = cp.Parameter(n, complex=True)       # (H_E w) rows
        wvecE = cp.Parameter(m, complex=True)      # eps_E * w
        wvecAE = cp.Parameter(m, complex=True)     # eps_AE * w
        tau = cp.Parameter(nonneg=True)
        gamma = cp.Parameter(nonneg=True)
        st_conj = cp.Parameter(n, complex=True)
        st_abs2 = cp.Parameter(n, nonneg=True)

        e = e0 + cp.sum(cp.multiply(cp.conj(s), evec))
        zrow = np.zeros((1, m))
        one = lambda x: cp.reshape(x, (1, 1), order="C")
        wcolE = cp.reshape(wvecE, (m, 1), order="C")
        wcolAE = cp.reshape(wvecAE, (m, 1), order="C")
        M = cp.bmat([
            [one(tau - n * u1 - u2), one(e), zrow, zrow],
            [one(cp.conj(e)), one(1.0 - u2),
             cp.reshape(cp.conj(wvecE), (1, m), order="C"),
             cp.reshape(cp.conj(wvecAE), (1, m), order="C")],
            [zrow.T, wcolE, u1 * np.eye(m), np.zeros((m, m))],
            [zrow.T, wcolAE, np.zeros((m, m)), u2 * np.eye(m)],
        ])
        M = 0.5 * (M + cp.conj(cp.transpose(M)))
        cons = [
            M >> 0,
            2.0 * cp.real(cp.multiply(st_conj, s)) - st_abs2 >= 1.0 - b,
            cp.square(cp.abs(s)) <= 1.0 + c,
        ]
        params = {
            "obj_vec": obj_vec, "e0": e0, "evec": evec, "wvecE": wvecE,
            "wvecAE": wvecAE, "tau": tau, "gamma": gamma,
            "st_conj": st_conj, "st_abs2": st_abs2,
        }
        if with_ipc:
            p0 = cp.Parameter(complex=True)
            pvec = cp.Parameter(n, complex=True)
            sqrtPI = cp.Parameter(nonneg=True)
            cons.append(
                cp.abs(p0 + cp.sum(cp.multiply(cp.conj(s), pvec))) <= sqrtPI
            )
            params.update(p0=p0, pvec=pvec, sqrtPI=sqrtPI)
        objective = cp.Minimize(
            -2.0 * cp.real(cp.sum(cp.multiply(cp.conj(s), obj_vec)))
            + gamma * (cp.sum(b) + cp.sum(c))
        )
        _problem_cache[key] = (
            cp.Problem(objective, cons), params, s, b, c, u1, u2,
        )
    return _problem_cache[key]


def pccp_phase_step(ch, w, eps, tau, P_I, s_tilde, gamma):
    """One penalized convex iterate for the phases under worst-case limits.

    Unit modulus is relaxed to a ring 1 - b_i <= |s_i|^2 <= 1 + c_i with the
    lower bound linearized at s_tilde; slack is charged gamma per unit. The
    Bob power objective is linearized at s_tilde as well. Returns the next
    penalty weight (growth 5x, capped at 1e3) along with the iterate.
    """
    eps_E, eps_AE = eps_pair(eps)
    w = as_complex_array(w, "beamformer")
    s_tilde = as_complex_array(
        s_tilde.s if hasattr(s_tilde, "s") else s_tilde, "phase vector")
    n, m = ch.n, ch.m
    if n == 0:
        raise InputError("phase step needs at least one reflecting element")
    with_ipc = np.isfinite(P_I)
    prob, params, s, b, c, u1, u2 = _cached_pccp(n, m, eps_E, eps_AE, with_ipc)

    a0 = complex(ch.h_AB_n @ w)
    avec = ch.H_B_n @ w
    x_tilde = a0 + s_tilde.conj() @ avec
    obj_vec = np.conj(x_tilde) * avec
    nv = np.linalg.norm(obj_vec)
    # unit objective scale: keeps the fixed penalty schedule meaningful at
    # any SNR (and the backends well conditioned)
    params["obj_vec"].value = obj_vec / nv if nv > 0 else obj_vec
    params["e0"].value = np.complex128(ch.h_AE_n @ w)
    params["evec"].value = ch.H_E_n @ w
    params["wvecE"].value = eps_E * w
    params["wvecAE"].value = eps_AE * w
    params["tau"].value = float(tau)
    params["gamma"].value = float(gamma)
    params["st_conj"].value = np.conj(s_tilde)
    params["st_abs2"].value = np.abs(s_tilde) ** 2
    if with_ipc:
        params["p0"].value = np.complex128(ch.h_AP @ w)
        params["pvec"].value = ch.H_P @ w
        params["sqrtPI"].value = float(np.sqrt(P_I))

    status, flags = _run(prob)
    gamma_next = min(PCCP_GAMMA_GROWTH * float(gamma), PCCP_GAMMA_MAX)
    if status == "infeasible":
        return PccpStep(s=None, slack_sum=np.inf, u1=0.0, u2=0.0,
                        objective=np.inf, gamma_next=gamma_next,
                        feasible=False, flags=flags)
    s_val = np.asarray(s.value).reshape(-1)
    slack = float(np.sum(b.value) + np.sum(c.value))
    lin = -2.0 * float(np.real(s_val.conj() @ params["obj_vec"].value))
    return PccpStep(
        s=s_val, slack_sum=slack, u1=float(u1.value), u2=float(u2.value),
        objective=lin, gamma_next=gamma_next, feasible=True, flags=flags,
    )


# --------------------------------------------------------------------------
# minimum-power step for the artificial-noise design
# --------------------------------------------------------------------------

@dataclass
class MinPowerStep:
    w: Optional[np.ndarray]
    power: float
    feasible: bool
    flags: tuple = ()


def _cached_minpower(m, with_ipc):
    key = ("minpower", m, with_ipc)
    if key not in _problem_cache:
        w = cp.Variable(m, complex=True)
        qos_vec = cp.Parameter(m, complex=True)   # conj(x_tilde) * g_B
        rhs = cp.Parameter()                      # T + |x_tilde|^2
        cons = [2.0 * cp.real(cp.sum(cp.multiply(qos_vec, w))) >= rhs]
        params = {"qos_vec": qos_vec, "rhs": rhs}
        if with_ipc:
            gP = cp.Parameter(m, complex=True)
            sqrtPI = cp.Parameter(nonneg=True)
            cons.append(cp.abs(cp.sum(cp.multiply(gP, w))) <= sqrtPI)
            params.update(gP=gP, sqrtPI=sqrtPI)
        prob = cp.Problem(cp.Minimize(cp.sum_squares(w)), cons)
        _problem_cache[key] = (prob, params, w)
    return _problem_cache[key]


def solve_minpower_step(ch, s, T, P_I, w_tilde):
    """One linearized iterate of power minimization under a Bob-SNR target.

    The target |g_B w|^2 >= T is linearized at w_tilde; the raw interference
    limit stays exact. There is no transmit-power cap here: the caller
    compares the returned power against its budget.
    """
    if not T > 0:
        raise InputError(f"SNR target must be positive, got {T}")
    g_B, _, g_P = beamformer_rows(ch, s)
    w_tilde = as_complex_array(w_tilde, "w_tilde")
    x_tilde = complex(g_B @ w_tilde)
    with_ipc = np.isfinite(P_I)
    prob, params, w = _cached_minpower(ch.m, with_ipc)
    rhs = float(T) + abs(x_tilde) ** 2
    # normalize the target row so its data stays near unit scale
    params["qos_vec"].value = np.conj(x_tilde) * g_B / rhs
    params["rhs"].value = 1.0
    if with_ipc:
        params["gP"].value = g_P
        params["sqrtPI"].value = float(np.sqrt(P_I))
    status, flags = _run(prob)
    if status == "infeasible":
        return MinPowerStep(w=None, power=np.inf, feasible=False, flags=flags)
    w_val = np.asarray(w.value).reshape(-1)
    return MinPowerStep(
        w=w_val, power=float(np.linalg.norm(w_val) ** 2), feasible=True,
        flags=flags,
    )
