"""Secrecy-rate optimization for an IRS-assisted cognitive-radio MISO downlink.

Three designs for the same underlay scenario: a secondary multi-antenna
transmitter serves a single-antenna user through a reflecting surface while
keeping its interference at a primary receiver below a hard limit and a
passive eavesdropper below the legitimate rate.

* full CSI: alternating transmit beamforming / surface phase optimization,
* bounded eavesdropper-CSI error: worst-case (certified) secrecy design,
* unknown eavesdropper CSI: minimum-power beamforming plus artificial noise.
"""

from .linalg import (
    BisectionSpec,
    BracketError,
    HermitianMatrix,
    InputError,
    PhaseVector,
    bisect,
    entrywise_phase,
    hermitian_eig,
    null_space_basis,
)
from .channel import ScenarioConfig, ChannelSet, generate_channels, cascade, effective_row, rates

__all__ = [
    "BisectionSpec",
    "BracketError",
    "HermitianMatrix",
    "InputError",
    "PhaseVector",
    "bisect",
    "entrywise_phase",
    "hermitian_eig",
    "null_space_basis",
    "ScenarioConfig",
    "ChannelSet",
    "generate_channels",
    "cascade",
    "effective_row",
    "rates",
]

__version__ = "0.1.0"
