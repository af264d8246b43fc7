"""Scattering matrices, resonances and solvable star-graph models
for single-electron transport on 2D quantum networks (wells joined by
straight wires).

The pipeline builds the Dirichlet-to-Neumann map of the network's
compact part, eliminates the closed channels against their evanescent
decrements, and evaluates the scattering matrix as a Cayley fraction of
the resulting intermediate-operator DN map.  Resonances come out of the
closed-channel dispersion equation; a fitted star-graph model with a
finite inner Hermitian matrix reproduces the essential scattering matrix
exactly.
"""

from .network import (
    Attachment,
    ChannelBasis,
    ChannelMode,
    NetworkSpec,
    WellSpec,
    WireSpec,
    classify_channels,
    k_minus,
    k_plus,
    spectral_band,
    threshold,
)
from .pipeline import NetworkOperator, ResonanceData
from .spectra import EigenPair, SpectralData

__version__ = "0.1.0"

__all__ = [
    "Attachment",
    "ChannelBasis",
    "ChannelMode",
    "EigenPair",
    "NetworkOperator",
    "NetworkSpec",
    "ResonanceData",
    "SpectralData",
    "WellSpec",
    "WireSpec",
    "classify_channels",
    "k_minus",
    "k_plus",
    "spectral_band",
    "threshold",
    "__version__",
]
