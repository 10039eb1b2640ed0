"""
Domain models representing core business entities
Immutable data structures for type safety and predictability
"""

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional, Tuple

import numpy as np

from ..errors import InvalidBoxError, InvalidInputError, InvalidSpectrumError


def _frozen_array(values) -> np.ndarray:
    array = np.array(values, dtype=np.float64)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class SpectrumParams:
    """
    Spiking threshold a, spiking bound b and latent width K
    Shared by every model compared within one description-length family
    """
    a: float
    b: float
    K: int

    def __post_init__(self):
        """Validate truncation parameters on creation"""
        if not (math.isfinite(self.a) and math.isfinite(self.b)):
            raise ValueError(f"Spiking threshold and bound must be finite, got a={self.a}, b={self.b}")
        if not 0 < self.a < self.b:
            raise ValueError(f"Require 0 < a < b, got a={self.a}, b={self.b}")
        if self.K < 1:
            raise ValueError(f"Latent width K must be positive, got {self.K}")

    @property
    def width(self) -> float:
        return self.b - self.a

    def truncate_values(self, z_pre: np.ndarray) -> np.ndarray:
        """Elementwise truncation: 0 below a, b above b, identity between"""
        z_pre = np.asarray(z_pre, dtype=np.float64)
        if not np.all(np.isfinite(z_pre)):
            raise InvalidInputError("Pre-activations must be finite")
        # Exact constants so that silent dimensions are bit-stable zeros
        return np.where(z_pre < self.a, 0.0, np.minimum(z_pre, self.b))


@dataclass(frozen=True)
class SpikingPattern:
    """
    Sorted set of 1-based latent dimensions that spike
    The empty pattern is the dormant pattern
    """
    dims: Tuple[int, ...] = ()

    def __post_init__(self):
        """Normalize to a sorted, deduplicated tuple of positive ints"""
        normalized = tuple(sorted({int(d) for d in self.dims}))
        if normalized and normalized[0] < 1:
            raise InvalidSpectrumError(f"Pattern dimensions are 1-based, got {normalized}")
        object.__setattr__(self, "dims", normalized)

    @classmethod
    def of(cls, dims: Iterable[int]) -> "SpikingPattern":
        return cls(tuple(dims))

    @classmethod
    def parse(cls, label: str) -> "SpikingPattern":
        """Inverse of `label`, e.g. '{2,3}' or '{}'"""
        body = label.strip().strip("{}").strip()
        if not body:
            return cls()
        try:
            dims = tuple(int(token) for token in body.split(","))
        except ValueError as e:
            raise InvalidSpectrumError(f"Malformed pattern label {label!r}") from e
        return cls(dims)

    @property
    def is_dormant(self) -> bool:
        return not self.dims

    @property
    def size(self) -> int:
        return len(self.dims)

    @property
    def indices(self) -> np.ndarray:
        """Zero-based positions of the spiking dimensions"""
        return np.array(self.dims, dtype=np.int64) - 1

    @property
    def label(self) -> str:
        return "{" + ",".join(str(d) for d in self.dims) + "}"

    def fits(self, K: int) -> bool:
        return not self.dims or self.dims[-1] <= K

    def __len__(self) -> int:
        return len(self.dims)

    def __str__(self) -> str:
        return self.label


@dataclass(frozen=True, eq=False)
class Spectrum:
    """
    Latent code of a Spectrum VAE
    Every entry is exactly 0 or lies in [a, b]
    """
    values: np.ndarray
    params: SpectrumParams

    def __post_init__(self):
        """Validate spectrum entries on creation"""
        values = _frozen_array(self.values)
        if values.shape != (self.params.K,):
            raise InvalidSpectrumError(
                f"Spectrum must have length K={self.params.K}, got shape {values.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise InvalidSpectrumError("Spectrum entries must be finite")
        nonzero = values != 0.0
        inside = (values >= self.params.a) & (values <= self.params.b)
        if np.any(nonzero & ~inside):
            bad = np.flatnonzero(nonzero & ~inside) + 1
            raise InvalidSpectrumError(
                f"Spectrum entries at dims {bad.tolist()} are neither 0 nor in "
                f"[{self.params.a}, {self.params.b}]"
            )
        object.__setattr__(self, "values", values)

    @property
    def is_dormant(self) -> bool:
        return not np.any(self.values)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Spectrum):
            return NotImplemented
        return self.params == other.params and np.array_equal(self.values, other.values)

    def __hash__(self) -> int:
        return hash((self.params, self.values.tobytes()))


@dataclass(frozen=True)
class Certificate:
    """
    Sampled evidence that a decoder is U-robust for a pattern
    A failing certificate is a valid result, not an error
    """
    pattern: SpikingPattern
    alphas: Tuple[float, ...]
    U: float
    base_points_tested: int
    perturbations_per_point: int
    violations: int
    max_observed_deviation: float
    seed: int
    lattice: bool = False

    @property
    def tests(self) -> int:
        return self.base_points_tested * self.perturbations_per_point

    @property
    def vacuous(self) -> bool:
        """No perturbation was evaluated, so nothing was certified"""
        return self.tests == 0

    @property
    def valid(self) -> bool:
        return not self.vacuous and self.violations == 0


@dataclass(frozen=True)
class PerturbBox:
    """
    Per-dimension half-widths of the uniform perturbations on a pattern
    """
    pattern: SpikingPattern
    alphas: Tuple[float, ...]
    certificate: Optional[Certificate] = field(default=None, compare=False)

    def __post_init__(self):
        """Validate the box against its pattern"""
        alphas = tuple(float(alpha) for alpha in self.alphas)
        if len(alphas) != self.pattern.size:
            raise InvalidBoxError(
                f"Box has {len(alphas)} half-widths for pattern {self.pattern} of size {self.pattern.size}"
            )
        if any(not math.isfinite(alpha) or alpha <= 0 for alpha in alphas):
            raise InvalidBoxError(f"Half-widths must be positive and finite, got {alphas}")
        object.__setattr__(self, "alphas", alphas)

    def scaled(self, factor: float) -> "PerturbBox":
        return PerturbBox(self.pattern, tuple(alpha * factor for alpha in self.alphas))


@dataclass(frozen=True, eq=False)
class QuantGrid:
    """
    Midpoint scales of Q equal segments of [a, b] for every spiking dimension
    """
    pattern: SpikingPattern
    alphas: Tuple[float, ...]
    counts: Tuple[int, ...]
    scales: Tuple[np.ndarray, ...]
    params: SpectrumParams

    def __post_init__(self):
        """Check that counts and scales agree per dimension"""
        if not (len(self.alphas) == len(self.counts) == len(self.scales) == self.pattern.size):
            raise InvalidBoxError("Grid counts, scales and half-widths must match the pattern size")
        for count, scale in zip(self.counts, self.scales):
            if count < 1 or len(scale) != count:
                raise InvalidBoxError(f"Grid count {count} does not match {len(scale)} scales")
            if count > 1 and not np.all(np.diff(scale) > 0):
                raise InvalidBoxError("Grid scales must be strictly increasing")

    @property
    def size(self) -> int:
        return math.prod(self.counts)


@dataclass(frozen=True, eq=False)
class RepresentationSet:
    """
    The finite set of quantized spectra spanned by a grid
    Enumeration is lexicographic over the pattern dimensions
    """
    grid: QuantGrid

    @property
    def size(self) -> int:
        return self.grid.size

    @property
    def pattern(self) -> SpikingPattern:
        return self.grid.pattern

    def code_at(self, multi_index: Tuple[int, ...]) -> Spectrum:
        """Quantized spectrum at one scale index per spiking dimension"""
        if len(multi_index) != self.grid.pattern.size:
            raise InvalidBoxError(f"Index {multi_index} does not match pattern {self.grid.pattern}")
        values = np.zeros(self.grid.params.K)
        for position, (dim_index, scale_index) in enumerate(zip(self.grid.pattern.indices, multi_index)):
            values[dim_index] = self.grid.scales[position][scale_index]
        return Spectrum(values, self.grid.params)

    def indices(self) -> Iterator[Tuple[int, ...]]:
        return itertools.product(*(range(count) for count in self.grid.counts))

    def codes(self) -> Iterator[Spectrum]:
        for multi_index in self.indices():
            yield self.code_at(multi_index)

    def code_matrix(self) -> np.ndarray:
        """All codes as rows of a (size, K) array, in enumeration order"""
        K = self.grid.params.K
        if self.grid.pattern.is_dormant:
            return np.zeros((1, K))
        mesh = np.meshgrid(*self.grid.scales, indexing="ij")
        matrix = np.zeros((self.size, K))
        for position, dim_index in enumerate(self.grid.pattern.indices):
            matrix[:, dim_index] = mesh[position].ravel()
        return matrix
