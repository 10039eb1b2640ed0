"""
Robustness service
Perturbation, quantization grids and statistical U-robustness certification
Single Responsibility: pattern-level certification and complexity
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from ..config import (
    ALPHA_FLOOR_EXPONENT,
    ASCENT_FACTOR,
    DECODER_CHUNK_ROWS,
    LATTICE_MAX_DIMS,
    MAX_CORNER_VECTORS,
)
from ..errors import InvalidBoxError, PatternMismatchError
from ..models.domain import (
    Certificate,
    PerturbBox,
    QuantGrid,
    RepresentationSet,
    Spectrum,
    SpectrumParams,
    SpikingPattern,
)
from ..models.reports import Complexity, PatternComplexity
from ..models.schemas import CertificationBudget
from .spectrum_service import is_preserved_by

logger = logging.getLogger(__name__)

Decoder = Callable[[np.ndarray], np.ndarray]

INFINITE_COMPLEXITY = math.inf


def alpha_floor(params: SpectrumParams) -> float:
    return params.width / 2**ALPHA_FLOOR_EXPONENT


def alpha_ceiling(params: SpectrumParams) -> float:
    # Any half-width of b - a reaches the whole interval; it is the widest box with meaning
    return params.width


def _require_preserved(z: Spectrum, pattern: SpikingPattern) -> None:
    if not is_preserved_by(z, pattern):
        raise PatternMismatchError(f"Spectrum is not preserved by pattern {pattern}")


def perturb_truncate(
    z: Spectrum,
    pattern: SpikingPattern,
    eps: Sequence[float],
    params: SpectrumParams
) -> Spectrum:
    """
    Add eps on the spiking dimensions and clamp back into [a, b]

    Spiking dimensions are clamped to a, never dropped to 0, so the output
    keeps the pattern of z.

    Raises:
        PatternMismatchError: If z is not preserved by the pattern
    """
    _require_preserved(z, pattern)
    eps = np.asarray(eps, dtype=np.float64)
    if eps.shape != (pattern.size,):
        raise InvalidBoxError(f"Need {pattern.size} perturbations, got shape {eps.shape}")
    values = z.values.copy()
    idx = pattern.indices
    values[idx] = np.clip(values[idx] + eps, params.a, params.b)
    return Spectrum(values, params)


def segment_count(width: float, alpha: float) -> int:
    """Smallest integer strictly greater than width / (2 alpha), by exact rational comparison"""
    if not alpha > 0:
        raise InvalidBoxError(f"Half-width must be positive, got {alpha}")
    ratio = Fraction(width) / (2 * Fraction(alpha))
    return math.floor(ratio) + 1


def segment_midpoints(lower: float, upper: float, count: int) -> np.ndarray:
    """Midpoints of count equal segments of [lower, upper]"""
    steps = np.arange(1, 2 * count, 2, dtype=np.float64)
    return lower + steps * (upper - lower) / (2 * count)


def build_grid(
    pattern: SpikingPattern,
    alphas: Sequence[float],
    params: SpectrumParams
) -> QuantGrid:
    """
    Quantization grid of a box: Q midpoint scales per spiking dimension

    Raises:
        InvalidBoxError: If a half-width is not positive
    """
    box = PerturbBox(pattern, tuple(alphas))
    counts = tuple(segment_count(params.width, alpha) for alpha in box.alphas)
    scales = tuple(segment_midpoints(params.a, params.b, count) for count in counts)
    return QuantGrid(pattern, box.alphas, counts, scales, params)


def representation_set(grid: QuantGrid) -> RepresentationSet:
    return RepresentationSet(grid)


def quantize_values(values: np.ndarray, scales: np.ndarray) -> np.ndarray:
    """Snap values to the nearest scale; equidistant values go to the lower scale"""
    upper = np.clip(np.searchsorted(scales, values, side="left"), 0, len(scales) - 1)
    lower = np.clip(upper - 1, 0, len(scales) - 1)
    take_lower = np.abs(values - scales[lower]) <= np.abs(scales[upper] - values)
    return np.where(take_lower, scales[lower], scales[upper])


def quantize_batch(Z: np.ndarray, grid: QuantGrid) -> np.ndarray:
    """Quantize rows already known to carry the grid's pattern"""
    quantized = np.array(Z, dtype=np.float64, copy=True)
    for position, dim_index in enumerate(grid.pattern.indices):
        quantized[:, dim_index] = quantize_values(quantized[:, dim_index], grid.scales[position])
    return quantized


def quantize(z: Spectrum, grid: QuantGrid) -> Spectrum:
    """
    Quantize each spiking value of z to its nearest scale

    Raises:
        PatternMismatchError: If z is not preserved by the grid pattern
    """
    _require_preserved(z, grid.pattern)
    return Spectrum(quantize_batch(z.values[None, :], grid)[0], z.params)


def decode_in_chunks(decoder: Decoder, Z: np.ndarray) -> np.ndarray:
    parts = [np.atleast_2d(decoder(Z[start:start + DECODER_CHUNK_ROWS])) for start in range(0, len(Z), DECODER_CHUNK_ROWS)]
    return np.concatenate(parts, axis=0) if parts else np.zeros((0, 0))


@dataclass(frozen=True, eq=False)
class PerturbationSuite:
    """
    Fixed base spectra and perturbation vectors for one pattern
    Replaying it with scaled perturbations gives comparable evidence
    """
    pattern: SpikingPattern
    base: np.ndarray
    eps: np.ndarray  # (base points, perturbations, |P|)
    lattice: bool
    seed: int


def _pattern_seed(seed: int, pattern: SpikingPattern) -> np.random.SeedSequence:
    return np.random.SeedSequence([seed, len(pattern), *pattern.dims])


def _lattice_axes(
    alphas: Sequence[float],
    params: SpectrumParams,
    max_points: int
) -> Optional[List[np.ndarray]]:
    """Per-dimension sweep at resolution min(alpha)/2, or None if it would not fit"""
    resolution = min(alphas) / 2
    count = math.floor(params.width / resolution) + 1
    if count ** len(alphas) > max_points:
        return None
    axis = params.a + resolution * np.arange(count)
    if axis[-1] < params.b:
        axis = np.append(axis, params.b)
    if len(axis) ** len(alphas) > max_points:
        return None
    return [axis] * len(alphas)


def build_suite(
    pattern: SpikingPattern,
    box: PerturbBox,
    budget: CertificationBudget,
    params: SpectrumParams
) -> PerturbationSuite:
    """
    Base spectra and perturbations for certifying a box

    Sweeps a lattice at resolution min(alpha)/2 when |P| <= 3 and the lattice fits the
    budget, otherwise draws uniform base points. Every base point is perturbed by the
    signed corners (sampled when there are too many) and by its own random interior draws.
    """
    size = pattern.size
    alphas = np.array(box.alphas)
    base_seq, corner_seq, interior_seq = _pattern_seed(budget.seed, pattern).spawn(3)

    lattice = False
    if size == 0:
        base = np.zeros((1, 0))
    else:
        axes = _lattice_axes(box.alphas, params, budget.max_lattice_points) if size <= LATTICE_MAX_DIMS else None
        if axes is not None:
            lattice = True
            base = np.stack([grid.ravel() for grid in np.meshgrid(*axes, indexing="ij")], axis=1)
        else:
            base = np.random.default_rng(base_seq).uniform(params.a, params.b, size=(budget.base_points, size))

    n_base = len(base)
    directions = []
    if budget.corners and size > 0:
        if 2**size <= MAX_CORNER_VECTORS:
            signs = np.array(np.meshgrid(*([[-1.0, 1.0]] * size), indexing="ij")).reshape(size, -1).T
        else:
            signs = np.random.default_rng(corner_seq).choice([-1.0, 1.0], size=(MAX_CORNER_VECTORS, size))
        directions.append(np.broadcast_to(signs, (n_base, len(signs), size)))
    if budget.perturbs_per_point > 0 and size > 0:
        interior_rng = np.random.default_rng(interior_seq)
        directions.append(interior_rng.uniform(-1.0, 1.0, size=(n_base, budget.perturbs_per_point, size)))
    unit = np.concatenate(directions, axis=1) if directions else np.zeros((n_base, 0, size))

    eps = unit * alphas
    return PerturbationSuite(pattern, base, eps, lattice, budget.seed)


def certify_suite(
    decoder: Decoder,
    suite: PerturbationSuite,
    box: PerturbBox,
    U: float,
    params: SpectrumParams,
    scale: float = 1.0,
    workers: int = 1
) -> Certificate:
    """
    Evaluate decoder deviations over a suite, optionally with scaled perturbations

    Base points are split into chunks that may run on worker threads; counts are
    merged in chunk order so the result does not depend on scheduling.
    """
    pattern = suite.pattern
    n_base, n_perturb, size = suite.eps.shape
    if n_base == 0 or n_perturb == 0 or size == 0:
        return Certificate(pattern, box.alphas, U, n_base if size else 0, n_perturb, 0, 0.0, suite.seed, suite.lattice)

    idx = pattern.indices
    chunk = max(1, DECODER_CHUNK_ROWS // (n_perturb + 1))

    def evaluate(start: int) -> Tuple[int, float]:
        base = suite.base[start:start + chunk]
        eps = suite.eps[start:start + chunk] * scale
        Z = np.zeros((len(base), params.K))
        Z[:, idx] = base
        Z_perturbed = np.repeat(Z, n_perturb, axis=0)
        Z_perturbed[:, idx] = np.clip(Z_perturbed[:, idx] + eps.reshape(-1, size), params.a, params.b)
        reference = np.repeat(decode_in_chunks(decoder, Z), n_perturb, axis=0)
        deviation = np.sqrt(np.sum((decode_in_chunks(decoder, Z_perturbed) - reference) ** 2, axis=1))
        return int(np.count_nonzero(deviation > U)), float(deviation.max())

    starts = range(0, n_base, chunk)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(evaluate, starts))
    else:
        results = [evaluate(start) for start in starts]

    violations = sum(count for count, _ in results)
    worst = max(deviation for _, deviation in results)
    return Certificate(pattern, box.alphas, U, n_base, n_perturb, violations, worst, suite.seed, suite.lattice)


def certify(
    decoder: Decoder,
    pattern: SpikingPattern,
    box: PerturbBox,
    U: float,
    budget: CertificationBudget,
    params: SpectrumParams
) -> Certificate:
    """
    Statistically certify that the decoder is U-robust for a pattern under a box

    Args:
        decoder: Maps (n, K) spectra to (n, D) outputs
        pattern: Spiking pattern being certified
        box: Perturbation half-widths on the pattern
        U: Allowed output deviation
        budget: Sampling budget and seed
        params: Spectrum parameters

    Returns:
        Certificate; valid iff at least one test ran and no deviation exceeded U
    """
    if box.pattern != pattern:
        raise PatternMismatchError(f"Box pattern {box.pattern} differs from {pattern}")
    suite = build_suite(pattern, box, budget, params)
    certificate = certify_suite(decoder, suite, box, U, params, workers=budget.workers)
    logger.debug(
        "certify %s alphas=%s tests=%d violations=%d max=%.6g",
        pattern, box.alphas, certificate.tests, certificate.violations, certificate.max_observed_deviation
    )
    return certificate


class QualifiedBoxSearch:
    """
    Largest certified box for a pattern: shared-alpha bisection followed by
    per-dimension coordinate ascent
    """

    def __init__(self, decoder: Decoder, U: float, budget: CertificationBudget, params: SpectrumParams):
        """
        Initialize search

        Args:
            decoder: Maps (n, K) spectra to (n, D) outputs
            U: Allowed output deviation
            budget: Certification budget applied to every pattern
            params: Spectrum parameters
        """
        self._decoder = decoder
        self._U = U
        self._budget = budget
        self._params = params

    def _certify(self, pattern: SpikingPattern, alphas: Sequence[float]) -> Certificate:
        box = PerturbBox(pattern, tuple(alphas))
        return certify(self._decoder, pattern, box, self._U, self._budget, self._params)

    def search(self, pattern: SpikingPattern) -> Optional[PerturbBox]:
        """
        Returns:
            Certified box carrying its certificate, or None when even the
            smallest half-width fails
        """
        size = pattern.size
        if size == 0:
            return None
        low, high = alpha_floor(self._params), alpha_ceiling(self._params)

        top = self._certify(pattern, [high] * size)
        if top.valid:
            return self._ascend(pattern, [high] * size, top)
        best = self._certify(pattern, [low] * size)
        if not best.valid:
            logger.warning("pattern %s fails at the alpha floor %.3g; complexity is infinite", pattern, low)
            return None

        for _ in range(self._budget.search_iterations):
            middle = 0.5 * (low + high)
            certificate = self._certify(pattern, [middle] * size)
            if certificate.valid:
                low, best = middle, certificate
            else:
                high = middle
        logger.debug("pattern %s shared alpha %.6g", pattern, low)
        return self._ascend(pattern, [low] * size, best)

    def _ascend(self, pattern: SpikingPattern, alphas: List[float], certificate: Certificate) -> PerturbBox:
        ceiling = alpha_ceiling(self._params)
        for _ in range(self._budget.max_ascent_passes):
            grew = False
            for position in range(len(alphas)):
                if alphas[position] >= ceiling:
                    continue
                trial = list(alphas)
                trial[position] = min(alphas[position] * ASCENT_FACTOR, ceiling)
                candidate = self._certify(pattern, trial)
                if candidate.valid:
                    alphas, certificate, grew = trial, candidate, True
            if not grew:
                break
        return PerturbBox(pattern, tuple(alphas), certificate)


def search_qualified(
    decoder: Decoder,
    pattern: SpikingPattern,
    U: float,
    budget: CertificationBudget,
    params: SpectrumParams
) -> Optional[PerturbBox]:
    return QualifiedBoxSearch(decoder, U, budget, params).search(pattern)


def dormant_grid(params: SpectrumParams) -> QuantGrid:
    return QuantGrid(SpikingPattern(), (), (), (), params)


def complexity_from_box(
    pattern: SpikingPattern,
    box: Optional[PerturbBox],
    params: SpectrumParams
) -> PatternComplexity:
    if pattern.is_dormant:
        return PatternComplexity(pattern, 1, None, dormant_grid(params))
    if box is None:
        return PatternComplexity(pattern, INFINITE_COMPLEXITY, None, None)
    grid = build_grid(pattern, box.alphas, params)
    return PatternComplexity(pattern, grid.size, box, grid)


def certify_pattern(
    decoder: Decoder,
    pattern: SpikingPattern,
    U: float,
    budget: CertificationBudget,
    params: SpectrumParams
) -> PatternComplexity:
    """Search, certify and grid one pattern"""
    if pattern.is_dormant:
        return complexity_from_box(pattern, None, params)
    box = search_qualified(decoder, pattern, U, budget, params)
    record = complexity_from_box(pattern, box, params)
    logger.info("pattern %s certified complexity (upper bound) = %s", pattern, record.value)
    return record


def complexity(
    decoder: Decoder,
    pattern: SpikingPattern,
    U: float,
    budget: CertificationBudget,
    params: SpectrumParams
) -> Complexity:
    """Product of grid counts over the best certified box; inf when none certifies"""
    return certify_pattern(decoder, pattern, U, budget, params).value


def adjacent_code_deviation(
    decoder: Decoder,
    grid: QuantGrid,
    max_codes: int = 4096,
    seed: int = 0
) -> float:
    """
    Largest decoded distance between a code and its single-dimension neighbours

    Enumerates all codes when the representation set is small, otherwise a
    seeded sample of them.
    """
    if grid.pattern.is_dormant or all(count == 1 for count in grid.counts):
        return 0.0
    params = grid.params
    rep = RepresentationSet(grid)
    if rep.size <= max_codes:
        multi = np.array(list(rep.indices()), dtype=np.int64)
    else:
        rng = np.random.default_rng(seed)
        multi = np.stack([rng.integers(0, count, size=max_codes) for count in grid.counts], axis=1)

    worst = 0.0
    for position, count in enumerate(grid.counts):
        movable = multi[multi[:, position] < count - 1]
        if len(movable) == 0:
            continue
        neighbour = movable.copy()
        neighbour[:, position] += 1
        left = np.zeros((len(movable), params.K))
        right = np.zeros((len(movable), params.K))
        for p, dim_index in enumerate(grid.pattern.indices):
            left[:, dim_index] = grid.scales[p][movable[:, p]]
            right[:, dim_index] = grid.scales[p][neighbour[:, p]]
        distance = np.sqrt(np.sum((decode_in_chunks(decoder, left) - decode_in_chunks(decoder, right)) ** 2, axis=1))
        worst = max(worst, float(distance.max()))
    return worst


def replay_scaled(
    decoder: Decoder,
    record: PatternComplexity,
    budget: CertificationBudget,
    params: SpectrumParams,
    scale: float = 0.5
) -> Optional[Certificate]:
    """
    Replay the suite that certified a pattern with every perturbation scaled

    Returns None for dormant or uncertified records.
    """
    certificate = record.certificate
    if record.pattern.is_dormant or certificate is None:
        return None
    suite = build_suite(record.pattern, record.box, budget, params)
    return certify_suite(decoder, suite, record.box, certificate.U, params, scale=scale, workers=budget.workers)
