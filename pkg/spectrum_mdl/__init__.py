"""
Spectrum MDL Package
Spectrum VAE training, robustness certification and achieved description lengths
"""

from .config import ARTIFACT_VERSION

__version__ = ARTIFACT_VERSION
