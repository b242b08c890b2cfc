"""Artificial-noise transmission when the eavesdropper's channels are unknown.

Without eavesdropper CSI the transmitter cannot shape its beam against her,
so it does the next best thing: deliver exactly the required SNR T to Bob
with the least transmit power, then spend the leftover budget on isotropic
noise confined to the null space of the stacked Bob and primary-receiver
effective rows. The jamming is invisible to both protected parties and
degrades every other direction, whoever listens there.

* ao_power_min: alternate a linearized min-power beam step with an
  SNR-maximizing phase step; the power trace never increases and the
  returned beam meets the target with the interference limit respected.
* an_covariance: equal-power noise covariance on the null-space basis.
* actual_secrecy_rate: the rate actually achieved against a realized
  (but unknown at design time) eavesdropper channel; may be negative.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .channel import effective_row
from .fullcsi import phase_forms, sca_phase
from .linalg import InputError, as_complex_array, null_space_basis
from .subproblems import beamformer_rows, solve_minpower_step

AO_TOL = 1e-3
AO_MAX_ROUNDS = 100
WSTEP_TOL = 1e-4
WSTEP_MAX_ITERS = 60


def max_snr_phase(w, ch, P_I, s0):
    """Phase update maximizing Bob's SNR at a fixed beam under the IPC.

    Runs the shared phase SCA with the eavesdropper channel silenced, so the
    descent objective reduces to the negated Bob power; the interference
    limit is handled by the same surrogate/penalty machinery.
    """
    w = as_complex_array(w, "beamformer")
    s0 = as_complex_array(s0, "phase start")
    if ch.n == 0:
        return s0.copy()
    quiet = dataclasses.replace(
        ch, h_AE=np.zeros(ch.m, dtype=complex),
        H_E=np.zeros((ch.n, ch.m), dtype=complex))
    forms = phase_forms(quiet, w)
    s_new, _, _ = sca_phase(forms, 1.0, s0, P_I)
    return s_new


@dataclass
class PowerMinResult:
    feasible: bool
    P_S: float                  # transmit power of the information beam
    w: np.ndarray
    s: np.ndarray
    snr: float                  # delivered Bob SNR (noise normalized)
    interference: float         # |g_P w|^2, raw watts
    rounds: int
    trace: list = field(default_factory=list)   # ||w||^2 at each boundary
    flags: tuple = ()


def _minpower_sca(ch, s, T, P_I, w_tilde,
                  tol=WSTEP_TOL, max_iters=WSTEP_MAX_ITERS):
    """Iterate the linearized min-power step until the power settles, then
    rescale the beam so the delivered SNR pins the target exactly."""
    g_B, _, g_P = beamformer_rows(ch, s)
    step = solve_minpower_step(ch, s, T, P_I, w_tilde)
    flags = step.flags
    if not step.feasible:
        return step, flags
    for _ in range(max_iters - 1):
        prev = step
        nxt = solve_minpower_step(ch, s, T, P_I, prev.w)
        flags += nxt.flags
        if not nxt.feasible:
            break
        if nxt.power <= prev.power:
            step = nxt
        if abs(nxt.power - prev.power) <= tol * max(prev.power, 1e-30):
            break
    # The conservative linearization lands at or above T; shrinking the beam
    # to hit T exactly is a strict improvement that keeps all constraints.
    snr = float(np.abs(g_B @ step.w) ** 2)
    if np.isfinite(snr) and snr > 0:
        beta = float(np.sqrt(T / snr))
        scaled = beta * step.w
        if (beta <= 1.0
                or float(np.absolute(g_P @ scaled) ** 2) <= P_I):
            step = dataclasses.replace(
                step, w=scaled, power=beta ** 2 * step.power)
    return step, flags


def ao_power_min(ch, T, P_I, init=None, rng=None,
                 tol=AO_TOL, max_rounds=AO_MAX_ROUNDS):
    """Minimize transmit power for Bob-SNR target T by alternating steps.

    Beam steps linearize the SNR target and keep the raw interference limit
    exact; phase steps maximize Bob's SNR so the following beam step can
    scale the power down. A phase candidate is kept only if it does lower
    the re-solved power, which makes the power trace non-increasing by
    construction. Ends on a beam step. An unreachable target (the
    interference limit pins the beam below T) is reported, not raised.
    """
    T = float(T)
    if not T > 0:
        raise InputError(f"SNR target must be positive, got {T}")
    if init is None:
        if rng is None:
            rng = np.random.default_rng(0)
        s_cur = np.exp(2j * np.pi * rng.uniform(size=ch.n))
    else:
        s_cur = as_complex_array(init, "phase start")
        if s_cur.size != ch.n:
            raise InputError(f"phase start has {s_cur.size} entries, surface {ch.n}")

    def failure(flags):
        return PowerMinResult(
            feasible=False, P_S=np.inf, w=np.zeros(ch.m, dtype=complex),
            s=s_cur, snr=0.0, interference=0.0, rounds=0, trace=[],
            flags=tuple(dict.fromkeys(flags + ("infeasible",))),
        )

    flags = ()
    g_B, _, _ = beamformer_rows(ch, s_cur)
    gain = float(np.linalg.norm(g_B) ** 2)
    if gain <= 0:
        return failure(("zero_bob_channel",))
    w_seed = np.sqrt(T) * g_B.conj() / gain     # matched filter hitting T
    step, new_flags = _minpower_sca(ch, s_cur, T, P_I, w_seed)
    flags += new_flags
    if not step.feasible:
        return failure(flags)
    w_cur, P_cur = step.w, step.power
    trace = [P_cur]
    rounds = 0
    for rounds in range(1, max_rounds + 1):
        P_new = P_cur
        if ch.n:
            try:
                s_cand = max_snr_phase(w_cur, ch, P_I, s_cur)
            except InputError:
                flags += ("phase_step_failed",)
            else:
                cand, new_flags = _minpower_sca(ch, s_cand, T, P_I, w_cur)
                flags += new_flags
                if cand.feasible and cand.power <= P_cur:
                    s_cur, w_cur, P_new = s_cand, cand.w, cand.power
        trace.append(P_new)
        if abs(P_new - P_cur) <= tol * max(P_cur, 1e-30):
            P_cur = P_new
            break
        P_cur = P_new

    g_B, _, g_P = beamformer_rows(ch, s_cur)
    return PowerMinResult(
        feasible=True, P_S=P_cur, w=w_cur, s=s_cur,
        snr=float(np.abs(g_B @ w_cur) ** 2),
        interference=float(np.abs(g_P @ w_cur) ** 2),
        rounds=rounds, trace=trace, flags=tuple(dict.fromkeys(flags)),
    )


@dataclass(frozen=True)
class AnCovariance:
    R_AN: np.ndarray            # m x m PSD noise covariance
    U_AN: np.ndarray            # m x k semi-unitary null-space basis
    power: float                # trace(R_AN)
    flags: tuple = ()


def an_covariance(w, s, ch, P_T, P_S):
    """Equal-power noise covariance in the Bob/PR null space.

    The stacked raw Bob and primary-receiver effective rows form the
    protected subspace; the leftover budget P_T - P_S is spread uniformly
    over a basis of its orthogonal complement. With fewer than three
    transmit antennas there is no room left and the covariance is zero.
    """
    if not np.isfinite(P_S) or P_S < 0:
        raise InputError(f"beam power must be finite and nonnegative, got {P_S}")
    if P_S > float(P_T) * (1.0 + 1e-9):
        raise InputError(
            f"beam power {P_S} exceeds the transmit budget {P_T}")
    m = ch.m
    budget = max(0.0, float(P_T) - float(P_S))
    if m <= 2:
        return AnCovariance(
            R_AN=np.zeros((m, m), dtype=complex),
            U_AN=np.zeros((m, 0), dtype=complex),
            power=0.0, flags=("no_null_space",),
        )
    rows = np.stack([
        effective_row(ch.h_AB, ch.H_B, s),
        effective_row(ch.h_AP, ch.H_P, s),
    ])
    gram = rows.conj().T @ rows
    U = null_space_basis(gram)
    k = U.shape[1]
    if k == 0:
        return AnCovariance(R_AN=np.zeros((m, m), dtype=complex), U_AN=U,
                            power=0.0, flags=("no_null_space",))
    if budget > 0:
        R = (budget / k) * (U @ U.conj().T)
    else:
        R = np.zeros((m, m), dtype=complex)
    return AnCovariance(R_AN=R, U_AN=U, power=budget)


def actual_secrecy_rate(w, s, an, ch, T):
    """Secrecy rate realized against a known Eve draw, in bits.

    Bob decodes at log2(1+T); Eve sees the beam through her raw channel with
    the noise covariance added to her thermal floor. Negative when her
    post-jamming SNR still exceeds T.
    """
    w = as_complex_array(w, "beamformer")
    g_E = effective_row(ch.h_AE, ch.H_E, s)
    signal = float(np.abs(g_E @ w) ** 2)
    jam = float(np.real(g_E @ an.R_AN @ g_E.conj()))
    eve_snr = signal / (ch.sigma_E ** 2 + jam)
    return float(np.log2(1.0 + float(T)) - np.log2(1.0 + eve_snr))
