"""
Report records produced by the analysis services
Immutable so that every number can be re-checked from what was emitted
"""

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from .domain import Certificate, PerturbBox, QuantGrid, SpectrumParams, SpikingPattern

Complexity = Union[int, float]  # float only for the infinite sentinel


@dataclass(frozen=True)
class PatternCensus:
    """
    Observed spiking patterns with their counts
    Ordered by decreasing count, then by pattern dims
    """
    counts: Dict[SpikingPattern, int]

    def __post_init__(self):
        """Validate counts on creation"""
        if any(count < 1 for count in self.counts.values()):
            raise ValueError("Every census count must be positive")
        ordered = dict(sorted(self.counts.items(), key=lambda item: (-item[1], item[0].dims)))
        object.__setattr__(self, "counts", ordered)

    @property
    def N(self) -> int:
        return sum(self.counts.values())

    @property
    def M(self) -> int:
        return len(self.counts)

    @property
    def patterns(self) -> List[SpikingPattern]:
        return list(self.counts)

    @property
    def sizes(self) -> List[int]:
        return list(self.counts.values())


@dataclass(frozen=True)
class DominantRatioReport:
    """
    Minimal subset size N0 that observes every pattern with probability >= P0
    """
    P0: float
    N: int
    N0: int
    probability_at_N0: float
    probability_at_N0_minus_1: float
    sampling: str = "without"

    def __post_init__(self):
        """The two probabilities witness that N0 is minimal"""
        if not self.probability_at_N0 >= self.P0 > self.probability_at_N0_minus_1:
            raise ValueError(
                f"N0={self.N0} is not a minimality witness: P(N0)={self.probability_at_N0}, "
                f"P(N0-1)={self.probability_at_N0_minus_1}, P0={self.P0}"
            )

    @property
    def delta(self) -> Fraction:
        return Fraction(self.N, self.N0)


@dataclass(frozen=True, eq=False)
class PatternComplexity:
    """
    Certified complexity of one pattern (an upper bound on the true minimum)
    """
    pattern: SpikingPattern
    value: Complexity
    box: Optional[PerturbBox]
    grid: Optional[QuantGrid]

    @property
    def certificate(self) -> Optional[Certificate]:
        return self.box.certificate if self.box else None

    @property
    def finite(self) -> bool:
        return math.isfinite(self.value)

    @property
    def certified(self) -> bool:
        """Dormant patterns need no certificate; others need a valid one"""
        if self.pattern.is_dormant:
            return True
        return self.certificate is not None and self.certificate.valid


@dataclass(frozen=True, eq=False)
class CompatibilityReport:
    """
    Evidence for the two compatibility conditions of one model
    """
    params: SpectrumParams
    U: float
    gamma1: float
    gamma2: float
    n_samples: int
    max_recon_error: float
    errors: np.ndarray
    census: PatternCensus
    dominant: DominantRatioReport

    @property
    def condition_i(self) -> bool:
        return self.n_samples >= self.gamma1 and self.max_recon_error <= self.U

    @property
    def condition_ii(self) -> bool:
        return self.dominant.delta >= Fraction(self.gamma2)

    @property
    def compatible(self) -> bool:
        return self.condition_i and self.condition_ii


@dataclass(frozen=True, eq=False)
class DescriptionLengthReport:
    """
    Achieved description length: log2 of the summed certified (U/2)-complexities
    """
    params: SpectrumParams
    U: float
    entries: Tuple[PatternComplexity, ...]

    @property
    def total_sum(self) -> Complexity:
        return sum(entry.value for entry in self.entries)

    @property
    def regular(self) -> bool:
        return all(entry.finite for entry in self.entries)

    @property
    def bits(self) -> Optional[float]:
        return math.log2(self.total_sum) if self.regular else None

    @property
    def certificates_valid(self) -> bool:
        return all(entry.certified for entry in self.entries)

    def entry_for(self, pattern: SpikingPattern) -> Optional[PatternComplexity]:
        for entry in self.entries:
            if entry.pattern == pattern:
                return entry
        return None


@dataclass(frozen=True)
class GridConsistency:
    """
    Replay of a certified pattern at half scale and the decoded spread of adjacent codes
    Both stay within their bounds when the certificate is sound
    """
    pattern: SpikingPattern
    U: float
    shrink_violations: int
    adjacent_deviation: float

    @property
    def shrink_holds(self) -> bool:
        return self.shrink_violations == 0

    @property
    def adjacent_holds(self) -> bool:
        return self.adjacent_deviation <= self.U


@dataclass(frozen=True)
class SubQuantizationSample:
    """Triangle-inequality decomposition for one holdout sample"""
    pattern: SpikingPattern
    seen: bool
    certified: bool
    unquantized_error: float
    displacement: Optional[float]
    quantized_error: Optional[float]
    passed: bool


@dataclass(frozen=True)
class SubQuantizationReport:
    U: float
    samples: Tuple[SubQuantizationSample, ...]

    @property
    def fraction(self) -> float:
        return sum(sample.passed for sample in self.samples) / len(self.samples)

    @property
    def fraction_unquantized_half_u(self) -> float:
        return sum(sample.unquantized_error <= self.U / 2 for sample in self.samples) / len(self.samples)

    @property
    def unseen_count(self) -> int:
        return sum(not sample.seen for sample in self.samples)

    @property
    def violations_of_inequality(self) -> int:
        """Samples with error <= U/2 in a certified pattern whose quantized error exceeds U"""
        return sum(
            1 for sample in self.samples
            if sample.certified and sample.unquantized_error <= self.U / 2 and not sample.passed
        )


@dataclass(frozen=True)
class SelectionResult:
    index: Optional[int]
    ranking: Tuple[int, ...]

    @property
    def found(self) -> bool:
        return self.index is not None


@dataclass(frozen=True, eq=False)
class EssenceBounds:
    """
    Interval [packing, greedy cover] enclosing the U-essence at grid resolution
    """
    U: float
    grid_res: float
    lower: int
    upper: int
    cover_points: np.ndarray
    packing_points: np.ndarray
    grid_size: int

    def __post_init__(self):
        """Packing can never exceed covering"""
        if self.lower > self.upper:
            raise ValueError(f"Packing bound {self.lower} exceeds cover size {self.upper}")
        if self.upper != len(self.cover_points):
            raise ValueError("Cover size must equal the number of cover points")


@dataclass(frozen=True)
class PatternUsage:
    pattern: SpikingPattern
    set_size: int
    used: int

    def __post_init__(self):
        if self.used > self.set_size:
            raise ValueError(f"Pattern {self.pattern} uses {self.used} of only {self.set_size} codes")


@dataclass(frozen=True)
class UsageAccounting:
    """
    Representation-set sizes against the codes data actually hits
    """
    U: float
    per_pattern: Tuple[PatternUsage, ...]
    essence_lower: int
    essence_upper: int
    max_distance_to_used_code: float
    uncertified_patterns: Tuple[SpikingPattern, ...] = ()

    @property
    def total_set_size(self) -> int:
        return sum(usage.set_size for usage in self.per_pattern)

    @property
    def total_used(self) -> int:
        return sum(usage.used for usage in self.per_pattern)

    @property
    def residual(self) -> int:
        return self.total_set_size - self.total_used

    @property
    def redundancy_vs_lower(self) -> int:
        return self.total_used - self.essence_lower

    @property
    def redundancy_vs_upper(self) -> int:
        return self.total_used - self.essence_upper


@dataclass(frozen=True)
class LowerBoundCheck:
    """Achieved bits against log2 of the essence packing bound"""
    holds: bool
    margin_bits: float
    bits: float
    log2_lower: float
    certificates_valid: bool
    eligible: bool


@dataclass(frozen=True, eq=False)
class BoundaryPair:
    first: np.ndarray
    second: np.ndarray
    first_pattern: SpikingPattern
    second_pattern: SpikingPattern

    @property
    def distance(self) -> float:
        return float(np.linalg.norm(self.first - self.second))


@dataclass(frozen=True)
class BoundaryReport:
    """On-boundary pairs among essence cover points"""
    threshold: float
    pairs: Tuple[BoundaryPair, ...] = field(default=())

    @property
    def pair_count(self) -> int:
        return len(self.pairs)


@dataclass(frozen=True, eq=False)
class Histogram2D:
    """
    Joint counts of equal-width bins of two paired sequences
    """
    bins: int
    edges: np.ndarray
    joint: np.ndarray
    clamped: int = 0

    def __post_init__(self):
        if self.joint.shape != (self.bins, self.bins):
            raise ValueError(f"Joint counts must be {self.bins}x{self.bins}, got {self.joint.shape}")

    @property
    def total(self) -> int:
        return int(self.joint.sum())

    @property
    def row_marginal(self) -> np.ndarray:
        return self.joint.sum(axis=1)

    @property
    def column_marginal(self) -> np.ndarray:
        return self.joint.sum(axis=0)


@dataclass(frozen=True)
class DimensionInfo:
    dimension: int
    entropy_original: float
    entropy_reconstructed: float
    mutual_information: float
    clamped: int


@dataclass(frozen=True)
class MutualInformationReport:
    bins: int
    dimensions: Tuple[DimensionInfo, ...]

    @property
    def per_dimension(self) -> List[float]:
        return [row.mutual_information for row in self.dimensions]

    @property
    def total(self) -> float:
        return float(sum(self.per_dimension))
