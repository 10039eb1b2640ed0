"""
Spectrum service
Truncation of encoder pre-activations and spiking-pattern extraction
Single Responsibility: spectrum semantics only
"""

from typing import List

import numpy as np

from ..errors import InvalidInputError, InvalidSpectrumError
from ..models.domain import Spectrum, SpectrumParams, SpikingPattern


def truncate_batch(z_pre: np.ndarray, params: SpectrumParams) -> np.ndarray:
    """
    Truncate pre-activations elementwise: 0 below a, b above b, identity between

    Args:
        z_pre: Array of pre-activations, any shape
        params: Spiking threshold and bound

    Returns:
        Array of the same shape with entries in {0} and [a, b]

    Raises:
        InvalidInputError: If any entry is not finite
    """
    return params.truncate_values(z_pre)


def truncate(z_pre: np.ndarray, params: SpectrumParams) -> Spectrum:
    """Truncate a single length-K pre-activation vector into a Spectrum"""
    z_pre = np.asarray(z_pre, dtype=np.float64)
    if z_pre.shape != (params.K,):
        raise InvalidInputError(f"Expected {params.K} pre-activations, got shape {z_pre.shape}")
    return Spectrum(truncate_batch(z_pre, params), params)


def pattern_of(z: Spectrum) -> SpikingPattern:
    """
    Spiking pattern of a spectrum

    Raises:
        InvalidSpectrumError: If z is not a Spectrum
    """
    if not isinstance(z, Spectrum):
        raise InvalidSpectrumError(f"Expected a Spectrum, got {type(z).__name__}")
    return SpikingPattern(tuple(int(i) + 1 for i in np.flatnonzero(z.values)))


def patterns_of_batch(spectra: np.ndarray) -> List[SpikingPattern]:
    """Spiking patterns of the rows of an (N, K) array of truncated spectra"""
    spectra = np.asarray(spectra)
    if spectra.ndim != 2:
        raise InvalidSpectrumError(f"Expected an (N, K) array, got shape {spectra.shape}")
    mask = spectra != 0.0
    # Patterns repeat heavily, so build each distinct row once
    unique_rows, inverse = np.unique(mask, axis=0, return_inverse=True)
    lookup = [SpikingPattern(tuple(int(i) + 1 for i in np.flatnonzero(row))) for row in unique_rows]
    return [lookup[i] for i in np.ravel(inverse)]


def is_preserved_by(z: Spectrum, pattern: SpikingPattern) -> bool:
    """True iff the nonzero dimensions of z are exactly the pattern"""
    return pattern_of(z) == pattern
