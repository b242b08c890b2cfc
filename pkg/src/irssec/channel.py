"""Scenario description, channel generation, and rate evaluation.

Geometry and statistics follow the usual underlay layout: Alice at the
origin, Bob 100 m away on the x axis, the reflecting surface lifted between
them, the primary receiver dropped uniformly in a square around Alice and
the eavesdropper in a square beyond Bob. Every link coefficient is
sqrt(d^-alpha) times an independent CN(0, 1) draw; 1 m reference distance,
no extra intercept.

Bob and Eve rate expressions use noise-normalized channels (divided by the
respective noise standard deviation); the interference constraint at the
primary receiver is evaluated on raw channels in watts.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .linalg import InputError, PhaseVector, as_complex_array

DEFAULT_POSITIONS = {
    "alice": (0.0, 0.0, 0.0),
    "bob": (100.0, 0.0, 0.0),
    "irs": (50.0, 0.0, 50.0),
    "eve": None,   # None: uniform in [50, 150] x [-50, 50] x {0} per realization
    "pr": None,    # None: uniform in [-50, 50] x [-50, 50] x {0} per realization
}

_POSITION_KEYS = ("alice", "bob", "irs", "eve", "pr")


def dbm_to_watt(x):
    x = float(x)
    if np.isinf(x):
        return float("inf")
    return 10.0 ** ((x - 30.0) / 10.0)


def watt_to_dbm(x):
    return 30.0 + 10.0 * np.log10(float(x))


@dataclass
class ScenarioConfig:
    """Flat description of one simulation scenario.

    Powers are in dBm (P_I may be inf to disable the interference
    constraint), distances in meters. eve/pr positions may be None, meaning
    they are redrawn uniformly from their squares for every realization.
    """

    m: int = 4
    n: int = 8
    P_T: float = 30.0
    P_I: float = 30.0
    sigma2_B: float = -100.0
    sigma2_E: float = -100.0
    alpha_direct: float = 3.0
    alpha_reflect: float = 2.5
    seed: int = 0
    positions: dict = field(default_factory=lambda: dict(DEFAULT_POSITIONS))

    def __post_init__(self):
        if int(self.m) < 1:
            raise InputError(f"need at least one transmit antenna, got m={self.m}")
        if int(self.n) < 0:
            raise InputError(f"reflecting element count must be >= 0, got n={self.n}")
        self.m, self.n = int(self.m), int(self.n)
        for name in ("P_T", "sigma2_B", "sigma2_E", "alpha_direct", "alpha_reflect"):
            if not np.isfinite(float(getattr(self, name))):
                raise InputError(f"{name} must be finite")
        if float(self.alpha_direct) <= 0 or float(self.alpha_reflect) <= 0:
            raise InputError("path-loss exponents must be positive")
        pos = dict(DEFAULT_POSITIONS)
        pos.update(self.positions)
        for key in _POSITION_KEYS:
            val = pos.get(key)
            if val is None:
                if key in ("alice", "bob", "irs"):
                    raise InputError(f"position {key!r} must be fixed")
                continue
            val = tuple(float(v) for v in val)
            if len(val) != 3:
                raise InputError(f"position {key!r} must have 3 coordinates")
            pos[key] = val
        self.positions = pos

    # -- flat key/value config file round-trip ------------------------------

    def save(self, path):
        lines = []
        for name in ("m", "n", "P_T", "P_I", "sigma2_B", "sigma2_E",
                     "alpha_direct", "alpha_reflect", "seed"):
            lines.append(f"{name} = {getattr(self, name)!r}")
        for key in _POSITION_KEYS:
            val = self.positions[key]
            if val is None:
                lines.append(f"positions.{key} = random")
            else:
                lines.append(f"positions.{key} = {val[0]!r} {val[1]!r} {val[2]!r}")
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path):
        kwargs = {}
        positions = {}
        with open(path) as fh:
            for raw in fh:
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise InputError(f"bad config line: {raw.rstrip()!r}")
                key, value = (part.strip() for part in line.split("=", 1))
                if key.startswith("positions."):
                    name = key[len("positions."):]
                    if name not in _POSITION_KEYS:
                        raise InputError(f"unknown position key {name!r}")
                    if value == "random":
                        positions[name] = None
                    else:
                        positions[name] = tuple(float(v) for v in value.split())
                elif key in ("m", "n", "seed"):
                    kwargs[key] = int(value)
                elif key in ("P_T", "P_I", "sigma2_B", "sigma2_E",
                             "alpha_direct", "alpha_reflect"):
                    kwargs[key] = float(value)
                else:
                    raise InputError(f"unknown config key {key!r}")
        if positions:
            kwargs["positions"] = positions
        return cls(**kwargs)

    def with_overrides(self, **kwargs):
        return replace(self, **kwargs)


@dataclass
class ChannelSet:
    """One realization of all links, raw and noise-normalized.

    Rows are 1-D arrays: direct links have m entries, surface links n
    entries. Cascades H_x = diag(h_Ix) @ H_AI are n x m, so the effective
    row seen through phase configuration s is h_Ax + s^H H_x.
    """

    m: int
    n: int
    positions: dict
    h_AB: np.ndarray
    h_AE: np.ndarray
    h_AP: np.ndarray
    H_AI: np.ndarray
    h_IB: np.ndarray
    h_IE: np.ndarray
    h_IP: np.ndarray
    H_B: np.ndarray
    H_E: np.ndarray
    H_P: np.ndarray
    sigma_B: float
    sigma_E: float

    @property
    def h_AB_n(self):
        return self.h_AB / self.sigma_B

    @property
    def H_B_n(self):
        return self.H_B / self.sigma_B

    @property
    def h_AE_n(self):
        return self.h_AE / self.sigma_E

    @property
    def H_E_n(self):
        return self.H_E / self.sigma_E


def distance(p, q):
    return float(np.linalg.norm(np.asarray(p, dtype=float) - np.asarray(q, dtype=float)))


def _draw_cn(rng, shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def _link(rng, d, alpha, shape):
    # amplitude scale d^(-alpha/2) on each CN(0,1) coefficient
    return np.sqrt(d ** (-alpha)) * _draw_cn(rng, shape)


def cascade(h_Ix, H_AI):
    """Reflected-path cascade diag(h_Ix) @ H_AI, shape n x m."""
    h_Ix = as_complex_array(h_Ix, "surface-to-receiver row")
    H_AI = as_complex_array(H_AI, "transmitter-to-surface matrix")
    if H_AI.ndim != 2 or h_Ix.ndim != 1 or H_AI.shape[0] != h_Ix.size:
        raise InputError(
            f"cascade shape mismatch: h_Ix {h_Ix.shape}, H_AI {H_AI.shape}"
        )
    return h_Ix[:, None] * H_AI


def generate_channels(config, rng=None):
    """Draw one channel realization for the scenario.

    The draw order is fixed (eve position, pr position, then the seven
    links) so a given generator state always yields the same realization.
    """
    if rng is None:
        rng = np.random.default_rng(config.seed)
    pos = dict(config.positions)
    if pos["eve"] is None:
        pos["eve"] = (50.0 + 100.0 * rng.uniform(), -50.0 + 100.0 * rng.uniform(), 0.0)
    if pos["pr"] is None:
        pos["pr"] = (-50.0 + 100.0 * rng.uniform(), -50.0 + 100.0 * rng.uniform(), 0.0)

    m, n = config.m, config.n
    a_d, a_r = float(config.alpha_direct), float(config.alpha_reflect)
    alice, irs = pos["alice"], pos["irs"]

    h_AB = _link(rng, distance(alice, pos["bob"]), a_d, m)
    h_AE = _link(rng, distance(alice, pos["eve"]), a_d, m)
    h_AP = _link(rng, distance(alice, pos["pr"]), a_d, m)
    if n > 0:
        H_AI = _link(rng, distance(alice, irs), a_r, (n, m))
        h_IB = _link(rng, distance(irs, pos["bob"]), a_r, n)
        h_IE = _link(rng, distance(irs, pos["eve"]), a_r, n)
        h_IP = _link(rng, distance(irs, pos["pr"]), a_r, n)
    else:
        H_AI = np.zeros((0, m), dtype=complex)
        h_IB = h_IE = h_IP = np.zeros(0, dtype=complex)

    return ChannelSet(
        m=m, n=n, positions=pos,
        h_AB=h_AB, h_AE=h_AE, h_AP=h_AP,
        H_AI=H_AI, h_IB=h_IB, h_IE=h_IE, h_IP=h_IP,
        H_B=cascade(h_IB, H_AI), H_E=cascade(h_IE, H_AI), H_P=cascade(h_IP, H_AI),
        sigma_B=float(np.sqrt(dbm_to_watt(config.sigma2_B))),
        sigma_E=float(np.sqrt(dbm_to_watt(config.sigma2_E))),
    )


def _phase_array(s, n):
    if isinstance(s, PhaseVector):
        s = s.s
    s = as_complex_array(s, "phase vector")
    if s.shape != (n,):
        raise InputError(f"phase vector has shape {s.shape}, expected ({n},)")
    return s


def effective_row(h_Ax, H_x, s):
    """Effective downlink row h_Ax + s^H H_x for phase configuration s."""
    h_Ax = as_complex_array(h_Ax, "direct row")
    H_x = as_complex_array(H_x, "cascade")
    s = _phase_array(s, H_x.shape[0])
    if H_x.shape[1] != h_Ax.size:
        raise InputError(f"cascade {H_x.shape} does not match direct row {h_Ax.shape}")
    if H_x.shape[0] == 0:
        return h_Ax.copy()
    return h_Ax + s.conj() @ H_x


def rates(ch, w, s):
    """Bob/Eve rates and primary-receiver interference for a design (w, s).

    Returns (C_B, C_E, C_s, interference_W). Rates use noise-normalized
    channels; interference is |(h_AP + s^H H_P) w|^2 on raw channels. C_s is
    reported unclamped (negative means the design leaks more than it
    delivers).
    """
    w = as_complex_array(w, "beamformer")
    if w.shape != (ch.m,):
        raise InputError(f"beamformer has shape {w.shape}, expected ({ch.m},)")
    g_B = effective_row(ch.h_AB_n, ch.H_B_n, s)
    g_E = effective_row(ch.h_AE_n, ch.H_E_n, s)
    g_P = effective_row(ch.h_AP, ch.H_P, s)
    C_B = float(np.log2(1.0 + np.abs(g_B @ w) ** 2))
    C_E = float(np.log2(1.0 + np.abs(g_E @ w) ** 2))
    interference = float(np.abs(g_P @ w) ** 2)
    return C_B, C_E, C_B - C_E, interference
