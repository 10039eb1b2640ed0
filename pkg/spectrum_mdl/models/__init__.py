"""
Models package for Spectrum MDL
"""

from .domain import Certificate, PerturbBox, QuantGrid, RepresentationSet, Spectrum, SpectrumParams, SpikingPattern
from .network import DenseNet, SpectrumVae
from .schemas import CertificationBudget, RunConfig, TrainConfig

__all__ = [
    "Certificate",
    "PerturbBox",
    "QuantGrid",
    "RepresentationSet",
    "Spectrum",
    "SpectrumParams",
    "SpikingPattern",
    "DenseNet",
    "SpectrumVae",
    "CertificationBudget",
    "RunConfig",
    "TrainConfig",
]
