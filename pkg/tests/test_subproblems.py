import numpy as np
import pytest

from irssec.channel import ChannelSet, ScenarioConfig, dbm_to_watt, generate_channels
from irssec.linalg import InputError
from irssec.oracle import random_rank_one_beamformer
from irssec.subproblems import (
    PCCP_GAMMA0,
    beamformer_rows,
    majorize,
    pccp_phase_step,
    quadratic_params,
    solve_beamformer_full,
    solve_beamformer_robust_step,
    solve_minpower_step,
)


def _toy_channelset(rng, m, n):
    """Unit-noise channels with O(1) entries; normalized rows equal raw rows."""
    def row(k):
        return (rng.standard_normal(k) + 1j * rng.standard_normal(k)) / np.sqrt(2)

    H_AI = (rng.standard_normal((n, m)) + 1j * rng.standard_normal((n, m))) / np.sqrt(2)
    h_IB, h_IE, h_IP = row(n), row(n), row(n)
    return ChannelSet(
        m=m, n=n, positions=dict(),
        h_AB=row(m), h_AE=row(m), h_AP=row(m),
        H_AI=H_AI, h_IB=h_IB, h_IE=h_IE, h_IP=h_IP,
        H_B=h_IB[:, None] * H_AI, H_E=h_IE[:, None] * H_AI,
        H_P=h_IP[:, None] * H_AI,
        sigma_B=1.0, sigma_E=1.0,
    )


def _unit_phases(rng, n):
    return np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, n))


# --------------------------------------------------------------------------
# quadratic phase dependence
# --------------------------------------------------------------------------

def test_quadratic_params_matches_direct_evaluation():
    rng = np.random.default_rng(11)
    for _ in range(20):
        m, n = 3, 4
        ch = _toy_channelset(rng, m, n)
        A = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
        R = A @ A.conj().T
        form = quadratic_params(R, ch.h_AE, ch.H_E)
        s = _unit_phases(rng, n)
        g = ch.h_AE + s.conj() @ ch.H_E
        direct = float(np.real(g @ R @ np.conj(g)))
        assert form.power(s) == pytest.approx(direct, rel=1e-10)
        assert form.value(s) == pytest.approx(1.0 + direct, rel=1e-10)


def test_quadratic_params_validates_shapes():
    rng = np.random.default_rng(0)
    ch = _toy_channelset(rng, 3, 4)
    with pytest.raises(InputError):
        quadratic_params(np.eye(2), ch.h_AE, ch.H_E)


# --------------------------------------------------------------------------
# spectral majorizer
# --------------------------------------------------------------------------

def test_majorize_upper_bound_and_tightness():
    rng = np.random.default_rng(5)
    for _ in range(50):
        k = rng.integers(1, 6)
        A = rng.standard_normal((k, k)) + 1j * rng.standard_normal((k, k))
        A = 0.5 * (A + A.conj().T)
        x_tilde = rng.standard_normal(k) + 1j * rng.standard_normal(k)
        maj = majorize(A, x_tilde)

        def bound(x):
            return (maj.scale * np.linalg.norm(x) ** 2
                    - 2.0 * np.real(x.conj() @ maj.shift) + maj.constant)

        at_center = float(np.real(x_tilde.conj() @ A @ x_tilde))
        assert bound(x_tilde) == pytest.approx(at_center, rel=1e-9, abs=1e-9)
        for _ in range(10):
            x = rng.standard_normal(k) + 1j * rng.standard_normal(k)
            quad = float(np.real(x.conj() @ A @ x))
            assert quad <= bound(x) + 1e-9 * max(1.0, abs(quad))


# --------------------------------------------------------------------------
# full-CSI beamformer step
# --------------------------------------------------------------------------

def test_beamformer_matched_filter_limit():
    # no eavesdropper, no interference limit: maximum-ratio transmission
    rng = np.random.default_rng(3)
    ch = _toy_channelset(rng, 4, 0)
    ch = ChannelSet(**{**ch.__dict__, "h_AE": np.zeros(4, complex)})
    s = np.zeros(0, complex)
    P_T = 2.5
    d = solve_beamformer_full(ch, s, P_T, np.inf)
    g_B = ch.h_AB
    assert d.objective == pytest.approx(1.0 + P_T * np.linalg.norm(g_B) ** 2,
                                        rel=1e-10)
    align = abs(np.vdot(d.w, np.conj(g_B))) / (np.linalg.norm(d.w)
                                               * np.linalg.norm(g_B))
    assert align == pytest.approx(1.0, abs=1e-9)
    assert np.linalg.norm(d.w) ** 2 == pytest.approx(P_T, rel=1e-9)


def test_beamformer_silent_when_eve_dominates():
    rng = np.random.default_rng(4)
    ch = _toy_channelset(rng, 3, 0)
    ch = ChannelSet(**{**ch.__dict__, "h_AE": 2.0 * ch.h_AB})
    d = solve_beamformer_full(ch, np.zeros(0, complex), 1.0, np.inf)
    assert d.objective == 1.0
    assert np.linalg.norm(d.w) == 0.0


def test_beamformer_beats_sampler_oracle():
    rng = np.random.default_rng(12)
    for seed in range(4):
        ch = _toy_channelset(np.random.default_rng(seed), 3, 2)
        s = _unit_phases(rng, 2)
        g_B, g_E, g_P = beamformer_rows(ch, s)
        P_T, P_I = 4.0, 0.5
        d = solve_beamformer_full(ch, s, P_T, P_I)

        def objective(W):
            return ((1 + np.abs(W @ g_B) ** 2) / (1 + np.abs(W @ g_E) ** 2))

        def feasible(W):
            return np.abs(W @ g_P) ** 2 <= P_I

        _, best = random_rank_one_beamformer(
            objective, feasible, P_T, 3, samples=20_000,
            rng=np.random.default_rng(100 + seed))
        assert d.objective >= best * (1 - 1e-9)
        assert np.linalg.norm(d.w) ** 2 <= P_T * (1 + 1e-9)
        assert np.abs(g_P @ d.w) ** 2 <= P_I * (1 + 1e-9)


def test_beamformer_binding_interference_certified():
    rng = np.random.default_rng(21)
    ch = _toy_channelset(rng, 3, 0)
    # strong primary-receiver row forces the limit to bind
    ch = ChannelSet(**{**ch.__dict__, "h_AP": 4.0 * ch.h_AP})
    s = np.zeros(0, complex)
    g_B, g_E, g_P = beamformer_rows(ch, s)
    P_T, P_I = 4.0, 0.05
    assert np.linalg.norm(g_P) ** 2 * P_T > P_I  # limit really can bind
    d = solve_beamformer_full(ch, s, P_T, P_I)
    assert np.abs(g_P @ d.w) ** 2 <= P_I * (1 + 1e-9)
    assert np.linalg.norm(d.w) ** 2 <= P_T * (1 + 1e-9)

    def objective(W):
        return ((1 + np.abs(W @ g_B) ** 2) / (1 + np.abs(W @ g_E) ** 2))

    def feasible(W):
        return np.abs(W @ g_P) ** 2 <= P_I

    _, best = random_rank_one_beamformer(objective, feasible, P_T, 3,
                                         samples=50_000,
                                         rng=np.random.default_rng(7))
    assert d.objective >= best * (1 - 1e-6)


def test_beamformer_realistic_scale_closed_form():
    cfg = ScenarioConfig(m=4, n=8, seed=3)
    ch = generate_channels(cfg)
    rng = np.random.default_rng(1)
    s = _unit_phases(rng, cfg.n)
    P_T, P_I = dbm_to_watt(cfg.P_T), dbm_to_watt(cfg.P_I)
    d = solve_beamformer_full(ch, s, P_T, P_I)
    g_B, g_E, g_P = beamformer_rows(ch, s)
    # full power, interference within the limit, ratio above a direction scan
    assert np.linalg.norm(d.w) ** 2 == pytest.approx(P_T, rel=1e-9)
    assert np.abs(g_P @ d.w) ** 2 <= P_I
    V = rng.standard_normal((50_000, cfg.m)) + 1j * rng.standard_normal((50_000, cfg.m))
    V *= np.sqrt(P_T) / np.linalg.norm(V, axis=1, keepdims=True)
    scan = ((1 + np.abs(V @ g_B) ** 2) / (1 + np.abs(V @ g_E) ** 2)).max()
    assert d.objective >= scan
    # the ratio at the beam is what the design reports
    direct = (1 + abs(g_B @ d.w) ** 2) / (1 + abs(g_E @ d.w) ** 2)
    assert d.objective == pytest.approx(direct, rel=1e-12)


def test_beamformer_validates_inputs():
    rng = np.random.default_rng(0)
    ch = _toy_channelset(rng, 2, 0)
    s = np.zeros(0, complex)
    with pytest.raises(InputError):
        solve_beamformer_full(ch, s, -1.0, 1.0)
    with pytest.raises(InputError):
        solve_beamformer_full(ch, s, 1.0, 0.0)


# --------------------------------------------------------------------------
# worst-case beamformer step
# --------------------------------------------------------------------------

def test_robust_step_matched_filter_limit():
    # zero radii and a generous Eve cap reduce to power-limited matched filter
    rng = np.random.default_rng(8)
    ch = _toy_channelset(rng, 3, 2)
    s = _unit_phases(rng, 2)
    g_B, _, _ = beamformer_rows(ch, s)
    P_T = 2.0
    r = solve_beamformer_robust_step(ch, s, (0.0, 0.0), 1e9, P_T, np.inf)
    assert r.feasible
    assert r.objective == pytest.approx(P_T * np.linalg.norm(g_B) ** 2, rel=1e-6)


def test_robust_step_certificate_sound_under_sampled_errors():
    rng = np.random.default_rng(9)
    ch = _toy_channelset(rng, 3, 4)
    s = _unit_phases(rng, 4)
    eps = (0.3, 0.2)
    tau = 1.0
    r = solve_beamformer_robust_step(ch, s, eps, tau, 4.0, np.inf)
    assert r.feasible and np.linalg.norm(r.w) > 0.05
    _, g_E, _ = beamformer_rows(ch, s)
    worst = 0.0
    for k in range(300):
        scale_c = eps[0] if k % 3 == 0 else eps[0] * rng.uniform()
        scale_d = eps[1] if k % 3 == 0 else eps[1] * rng.uniform()
        D = rng.standard_normal((4, 3)) + 1j * rng.standard_normal((4, 3))
        D *= scale_c / np.linalg.norm(D)
        dlt = rng.standard_normal(3) + 1j * rng.standard_normal(3)
        dlt *= scale_d / np.linalg.norm(dlt)
        pert = g_E + dlt + s.conj() @ D
        worst = max(worst, abs(pert @ r.w) ** 2)
    assert worst <= tau * (1 + 1e-6)


def test_robust_step_iterates_never_regress():
    rng = np.random.default_rng(10)
    ch = _toy_channelset(rng, 3, 3)
    s = _unit_phases(rng, 3)
    eps = (0.2, 0.2)
    r1 = solve_beamformer_robust_step(ch, s, eps, 2.0, 3.0, np.inf)
    assert r1.feasible
    r2 = solve_beamformer_robust_step(ch, s, eps, 2.0, 3.0, np.inf, w_tilde=r1.w)
    assert r2.feasible
    assert r2.objective >= r1.objective * (1 - 1e-7)


def test_robust_step_tau_zero_silences():
    rng = np.random.default_rng(13)
    ch = _toy_channelset(rng, 2, 2)
    s = _unit_phases(rng, 2)
    r = solve_beamformer_robust_step(ch, s, (0.5, 0.5), 0.0, 1.0, np.inf)
    assert r.feasible
    assert r.objective <= 1e-6


def test_robust_step_validates_inputs():
    rng = np.random.default_rng(0)
    ch = _toy_channelset(rng, 2, 2)
    s = _unit_phases(rng, 2)
    with pytest.raises(InputError):
        solve_beamformer_robust_step(ch, s, (-0.1, 0.0), 1.0, 1.0, np.inf)
    with pytest.raises(InputError):
        solve_beamformer_robust_step(ch, s, (0.1, 0.1), -1.0, 1.0, np.inf)


# --------------------------------------------------------------------------
# penalized phase step
# --------------------------------------------------------------------------

def _converge_pccp(ch, w, eps, tau, P_I, s0, max_iters=12):
    gamma = PCCP_GAMMA0
    s_cur, step = s0, None
    for _ in range(max_iters):
        step = pccp_phase_step(ch, w, eps, tau, P_I, s_cur, gamma)
        if not step.feasible:
            return step
        s_cur, gamma = step.s, step.gamma_next
        if step.slack_sum <= 1e-4:
            break
    return step


def test_pccp_slack_converges_and_moduli_ring():
    rng = np.random.default_rng(14)
    ch = _toy_channelset(rng, 3, 4)
    s0 = _unit_phases(rng, 4)
    eps = (0.2, 0.2)
    tau = 1.5
    r = solve_beamformer_robust_step(ch, s0, eps, tau, 4.0, np.inf)
    assert r.feasible
    step = _converge_pccp(ch, r.w, eps, tau, np.inf, s0)
    assert step.feasible
    assert step.slack_sum <= 1e-4
    assert np.max(np.abs(np.abs(step.s) ** 2 - 1.0)) <= 1e-3


def test_pccp_no_worse_than_staying_put():
    # the previous phases with zero slack are feasible, so the minimizer's
    # penalized objective cannot exceed the stay-put value
    rng = np.random.default_rng(15)
    ch = _toy_channelset(rng, 3, 4)
    s0 = _unit_phases(rng, 4)
    eps = (0.15, 0.15)
    tau = 2.0
    r = solve_beamformer_robust_step(ch, s0, eps, tau, 4.0, np.inf)
    assert r.feasible
    step = pccp_phase_step(ch, r.w, eps, tau, np.inf, s0, PCCP_GAMMA0)
    assert step.feasible
    a0 = complex(ch.h_AB_n @ r.w)
    avec = ch.H_B_n @ r.w
    x_tilde = a0 + s0.conj() @ avec
    obj_vec = np.conj(x_tilde) * avec
    obj_vec /= np.linalg.norm(obj_vec)
    stay = -2.0 * float(np.real(s0.conj() @ obj_vec))
    assert step.objective + PCCP_GAMMA0 * step.slack_sum <= stay + 1e-7


def test_pccp_certificate_sound_at_returned_phases():
    rng = np.random.default_rng(16)
    ch = _toy_channelset(rng, 3, 4)
    s0 = _unit_phases(rng, 4)
    eps = (0.25, 0.25)
    tau = 1.2
    r = solve_beamformer_robust_step(ch, s0, eps, tau, 4.0, np.inf)
    assert r.feasible
    step = _converge_pccp(ch, r.w, eps, tau, np.inf, s0)
    assert step.feasible and step.slack_sum <= 1e-4
    s = step.s
    g_E = ch.h_AE_n + s.conj() @ ch.H_E_n
    worst = 0.0
    for k in range(200):
        D = rng.standard_normal((4, 3)) + 1j * rng.standard_normal((4, 3))
        D *= eps[0] / np.linalg.norm(D)
        dlt = rng.standard_normal(3) + 1j * rng.standard_normal(3)
        dlt *= eps[1] / np.linalg.norm(dlt)
        worst = max(worst, abs((g_E + dlt + s.conj() @ D) @ r.w) ** 2)
    assert worst <= tau * (1 + 1e-3)


def test_pccp_validates_inputs():
    rng = np.random.default_rng(0)
    ch = _toy_channelset(rng, 2, 0)
    with pytest.raises(InputError):
        pccp_phase_step(ch, np.ones(2, complex), (0.1, 0.1), 1.0, np.inf,
                        np.zeros(0, complex), 10.0)


# --------------------------------------------------------------------------
# minimum-power step
# --------------------------------------------------------------------------

def test_minpower_matched_filter_is_fixed_point():
    rng = np.random.default_rng(17)
    ch = _toy_channelset(rng, 3, 2)
    s = _unit_phases(rng, 2)
    g_B, _, _ = beamformer_rows(ch, s)
    T = 5.0
    w_mf = np.sqrt(T) * np.conj(g_B) / np.linalg.norm(g_B) ** 2
    mf_power = float(np.linalg.norm(w_mf) ** 2)
    step = solve_minpower_step(ch, s, T, np.inf, w_mf)
    assert step.feasible
    # matched filtering is the exact optimum without an interference limit
    assert step.power == pytest.approx(mf_power, rel=1e-6)
    assert abs(g_B @ step.w) ** 2 >= T * (1 - 1e-6)


def test_minpower_iterates_monotone_from_feasible_seed():
    rng = np.random.default_rng(18)
    ch = _toy_channelset(rng, 3, 2)
    ch = ChannelSet(**{**ch.__dict__, "h_AP": 3.0 * ch.h_AP})
    s = _unit_phases(rng, 2)
    g_B, _, g_P = beamformer_rows(ch, s)
    T, P_I = 5.0, 0.2
    w_mf = np.sqrt(T) * np.conj(g_B) / np.linalg.norm(g_B) ** 2
    s1 = solve_minpower_step(ch, s, T, P_I, w_mf)
    assert s1.feasible
    s2 = solve_minpower_step(ch, s, T, P_I, s1.w)
    assert s2.feasible
    assert s2.power <= s1.power * (1 + 1e-7)
    assert abs(g_B @ s2.w) ** 2 >= T * (1 - 1e-6)
    assert abs(g_P @ s2.w) ** 2 <= P_I * (1 + 1e-9)


def test_minpower_realistic_scale_high_target():
    cfg = ScenarioConfig(m=4, n=8, seed=3)
    ch = generate_channels(cfg)
    rng = np.random.default_rng(2)
    s = _unit_phases(rng, cfg.n)
    g_B, _, g_P = beamformer_rows(ch, s)
    P_I = dbm_to_watt(cfg.P_I)
    T = 1e10
    w_mf = np.sqrt(T) * np.conj(g_B) / np.linalg.norm(g_B) ** 2
    step = solve_minpower_step(ch, s, T, P_I, w_mf)
    assert step.feasible
    assert abs(g_B @ step.w) ** 2 >= T * (1 - 1e-6)
    assert abs(g_P @ step.w) ** 2 <= P_I * (1 + 1e-9)


def test_minpower_validates_inputs():
    rng = np.random.default_rng(0)
    ch = _toy_channelset(rng, 2, 0)
    with pytest.raises(InputError):
        solve_minpower_step(ch, np.zeros(0, complex), 0.0, np.inf,
                            np.ones(2, complex))
