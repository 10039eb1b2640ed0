"""
Essence service
Covering and packing bounds of bounded supports, code usage accounting,
lower-bound and redundancy checks, and on-boundary pairs
Single Responsibility: data-side geometry of the description length
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree

from ..config import (
    DEFAULT_PACKING_RESTARTS,
    DISTANCE_TOLERANCE,
    ESSENCE_GRID_BUDGET,
    RING_CENTER,
    RING_RADII,
    TWO_CIRCLE_CENTERS,
    TWO_CIRCLE_RADIUS,
)
from ..errors import EmptyInputError, NotCertifiedError, ResolutionError
from ..models.network import SpectrumCodec
from ..models.reports import (
    BoundaryPair,
    BoundaryReport,
    DescriptionLengthReport,
    EssenceBounds,
    LowerBoundCheck,
    PatternUsage,
    UsageAccounting,
)
from .robustness_service import quantize_batch
from .spectrum_service import patterns_of_batch

logger = logging.getLogger(__name__)

Membership = Callable[[np.ndarray], np.ndarray]
Sampler = Callable[[int, np.random.Generator], np.ndarray]


@dataclass(frozen=True, eq=False)
class BoundedSupport:
    """
    Support of a bounded distribution inside the box prod_d [lower_d, upper_d]

    Continuous supports are discretized on a grid; finite supports list
    their atoms and use them directly.
    """
    lower: np.ndarray
    upper: np.ndarray
    membership: Membership
    sampler: Sampler
    tag: Optional[str] = None
    atoms: Optional[np.ndarray] = None

    def __post_init__(self):
        """Validate the bounding box"""
        lower = np.atleast_1d(np.asarray(self.lower, dtype=np.float64))
        upper = np.atleast_1d(np.asarray(self.upper, dtype=np.float64))
        if lower.shape != upper.shape:
            raise ValueError(f"Bounds differ in dimension: {lower.shape} vs {upper.shape}")
        if self.atoms is None and not np.all(lower < upper):
            raise ValueError(f"Continuous support needs lower < upper in every dimension, got {lower}, {upper}")
        if np.any(lower > upper):
            raise ValueError(f"Lower bounds exceed upper bounds: {lower}, {upper}")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def D(self) -> int:
        return len(self.lower)

    def contains(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        inside = np.all((points >= self.lower) & (points <= self.upper), axis=1)
        return inside & self.membership(points)

    def sample(self, n: int, seed: int) -> np.ndarray:
        if n < 1:
            raise ValueError(f"Need at least one sample, got n={n}")
        return self.sampler(n, np.random.default_rng(seed))

    def grid_points(self, grid_res: float) -> np.ndarray:
        """
        Support points of the axis grid with spacing grid_res anchored at the lower bounds

        Raises:
            ResolutionError: If the bounding-box grid exceeds the point budget
        """
        if self.atoms is not None:
            return np.unique(np.atleast_2d(self.atoms), axis=0)
        counts = np.floor((self.upper - self.lower) / grid_res + 1e-9).astype(np.int64) + 1
        total = math.prod(int(count) for count in counts)
        if total > ESSENCE_GRID_BUDGET:
            raise ResolutionError(
                f"Support grid would hold {total} points at resolution {grid_res}, budget is {ESSENCE_GRID_BUDGET}"
            )
        axes = [low + grid_res * np.arange(count) for low, count in zip(self.lower, counts)]
        points = np.stack([axis.ravel() for axis in np.meshgrid(*axes, indexing="ij")], axis=1)
        return points[self.membership(points)]


def _disk_sampler(centers: np.ndarray, inner: float, outer: float) -> Sampler:
    def sample(n: int, rng: np.random.Generator) -> np.ndarray:
        # Equal radii give equal areas, so the disk choice is fair
        choice = rng.integers(0, len(centers), size=n)
        points = np.empty((n, 2))
        for row in range(n):
            center = centers[choice[row]]
            while True:
                candidate = center + rng.uniform(-outer, outer, size=2)
                radius = np.linalg.norm(candidate - center)
                if inner <= radius <= outer:
                    points[row] = candidate
                    break
        return points
    return sample


def two_circles_support(
    centers: Sequence[Sequence[float]] = TWO_CIRCLE_CENTERS,
    radius: float = TWO_CIRCLE_RADIUS
) -> BoundedSupport:
    """Union of equal disks, sampled uniformly"""
    centers = np.asarray(centers, dtype=np.float64)

    def membership(points: np.ndarray) -> np.ndarray:
        distances = np.linalg.norm(points[:, None, :] - centers[None, :, :], axis=2)
        return np.any(distances <= radius + DISTANCE_TOLERANCE, axis=1)

    return BoundedSupport(
        lower=centers.min(axis=0) - radius,
        upper=centers.max(axis=0) + radius,
        membership=membership,
        sampler=_disk_sampler(centers, 0.0, radius),
        tag="two-circles",
    )


def ring_support(
    center: Sequence[float] = RING_CENTER,
    radii: Sequence[float] = RING_RADII
) -> BoundedSupport:
    """Annulus between two radii"""
    center = np.asarray(center, dtype=np.float64)
    inner, outer = radii
    if not 0 <= inner < outer:
        raise ValueError(f"Ring radii must satisfy 0 <= inner < outer, got {radii}")

    def membership(points: np.ndarray) -> np.ndarray:
        distance = np.linalg.norm(points - center, axis=1)
        return (distance >= inner - DISTANCE_TOLERANCE) & (distance <= outer + DISTANCE_TOLERANCE)

    return BoundedSupport(
        lower=center - outer,
        upper=center + outer,
        membership=membership,
        sampler=_disk_sampler(center[None, :], inner, outer),
        tag="ring",
    )


def interval_support(low: float = 0.0, high: float = 1.0) -> BoundedSupport:
    """Uniform distribution on a 1-D interval"""
    return BoundedSupport(
        lower=np.array([low]),
        upper=np.array([high]),
        membership=lambda points: np.ones(len(points), dtype=bool),
        sampler=lambda n, rng: rng.uniform(low, high, size=(n, 1)),
        tag="interval",
    )


def point_cloud_support(points: np.ndarray, tag: str = "point-cloud") -> BoundedSupport:
    """Empirical support: the listed points themselves"""
    atoms = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if atoms.size == 0:
        raise EmptyInputError("A point-cloud support needs at least one point")
    tree = cKDTree(atoms)

    def membership(candidates: np.ndarray) -> np.ndarray:
        distance, _ = tree.query(candidates)
        return distance <= DISTANCE_TOLERANCE

    return BoundedSupport(
        lower=atoms.min(axis=0),
        upper=atoms.max(axis=0),
        membership=membership,
        sampler=lambda n, rng: atoms[rng.integers(0, len(atoms), size=n)],
        tag=tag,
        atoms=atoms,
    )


def point_support(point: Sequence[float]) -> BoundedSupport:
    return point_cloud_support(np.asarray(point, dtype=np.float64)[None, :], tag="point")


def _greedy_cover(points: np.ndarray, tree: cKDTree, U: float) -> np.ndarray:
    """Indices of a greedy max-coverage cover; ties go to the lowest index"""
    balls = tree.query_ball_point(points, U + DISTANCE_TOLERANCE)
    gains = np.array([len(ball) for ball in balls], dtype=np.int64)
    uncovered = np.ones(len(points), dtype=bool)
    chosen: List[int] = []
    while uncovered.any():
        best = int(np.argmax(gains))
        chosen.append(best)
        newly = np.array([q for q in balls[best] if uncovered[q]], dtype=np.int64)
        uncovered[newly] = False
        # The ball relation is symmetric: each newly covered point lowers the gain of its neighbours
        for q in newly:
            np.subtract.at(gains, balls[q], 1)
    return np.array(chosen, dtype=np.int64)


def _greedy_packing(points: np.ndarray, tree: cKDTree, U: float, restarts: int, seed: int) -> np.ndarray:
    """Largest of several maximal packings whose points are more than 2U apart"""
    conflicts = tree.query_ball_point(points, 2 * U + 2 * DISTANCE_TOLERANCE)
    rng = np.random.default_rng(seed)
    best = np.zeros(0, dtype=np.int64)
    for restart in range(restarts):
        order = np.arange(len(points)) if restart == 0 else rng.permutation(len(points))
        blocked = np.zeros(len(points), dtype=bool)
        accepted = []
        for index in order:
            if not blocked[index]:
                accepted.append(index)
                blocked[conflicts[index]] = True
        if len(accepted) > len(best):
            best = np.array(accepted, dtype=np.int64)
    return np.sort(best)


def max_cover_distance(points: np.ndarray, cover_points: np.ndarray) -> float:
    """Largest distance from a point to its nearest cover point"""
    distance, _ = cKDTree(cover_points).query(points)
    return float(np.max(distance))


def essence_bounds(
    support: BoundedSupport,
    U: float,
    grid_res: Optional[float] = None,
    seed: int = 0,
    restarts: int = DEFAULT_PACKING_RESTARTS
) -> EssenceBounds:
    """
    Bracket the U-essence of a support between a packing and a greedy cover

    Args:
        support: Bounded support to discretize
        U: Ball radius
        grid_res: Grid spacing, at most U/4 (default U/4)
        seed: Seed of the packing restarts
        restarts: Packing orders tried (index order first)

    Returns:
        EssenceBounds; the cover is verified against every grid point

    Raises:
        ResolutionError: If grid_res > U/4, the grid exceeds the budget or misses the support
    """
    grid_res = U / 4 if grid_res is None else grid_res
    if not 0 < grid_res <= U / 4 * (1 + 1e-12):
        raise ResolutionError(f"grid_res={grid_res} must lie in (0, U/4={U / 4}]")
    points = support.grid_points(grid_res)
    if len(points) == 0:
        raise ResolutionError(f"No grid point at resolution {grid_res} falls inside the support")

    tree = cKDTree(points)
    cover = points[_greedy_cover(points, tree, U)]
    packing = points[_greedy_packing(points, tree, U, restarts, seed)]

    worst = max_cover_distance(points, cover)
    if worst > U + DISTANCE_TOLERANCE:
        raise RuntimeError(f"Greedy cover leaves a grid point {worst} away, above U={U}")

    if support.atoms is None:
        logger.warning("essence cover is verified at grid resolution %g only", grid_res)
    logger.info(
        "essence bounds U=%g: [%d, %d] over %d grid points", U, len(packing), len(cover), len(points)
    )
    return EssenceBounds(U, grid_res, len(packing), len(cover), cover, packing, len(points))


def used_codes(
    model: SpectrumCodec,
    samples,
    dl: DescriptionLengthReport,
    eb: EssenceBounds
) -> UsageAccounting:
    """
    Count the quantized spectra that samples actually hit

    Raises:
        NotCertifiedError: If some observed pattern has no grid
    """
    if not dl.regular:
        raise NotCertifiedError("Usage accounting needs a grid for every observed pattern")
    X = np.atleast_2d(np.asarray(samples, dtype=np.float64))
    if X.size == 0:
        raise EmptyInputError("At least one sample is required")
    Z = model.encode_batch(X)
    patterns = patterns_of_batch(Z)

    members: Dict = {}
    for row, pattern in enumerate(patterns):
        members.setdefault(pattern, []).append(row)

    usage = []
    used_rows = []
    for entry in dl.entries:
        rows = members.get(entry.pattern, [])
        if not rows:
            usage.append(PatternUsage(entry.pattern, entry.value, 0))
            continue
        codes = np.unique(quantize_batch(Z[rows], entry.grid), axis=0)
        used_rows.append(codes)
        usage.append(PatternUsage(entry.pattern, entry.value, len(codes)))

    uncertified = tuple(sorted((p for p in members if dl.entry_for(p) is None), key=lambda p: p.dims))
    if uncertified:
        logger.warning("%d sample patterns have no grid and are left out of usage", len(uncertified))

    decoded = model.decode_batch(np.concatenate(used_rows, axis=0)) if used_rows else None
    max_distance = max_cover_distance(X, decoded) if decoded is not None else math.inf

    accounting = UsageAccounting(dl.U, tuple(usage), eb.lower, eb.upper, max_distance, uncertified)
    logger.info(
        "code usage: %d of %d codes used, residual=%d, max distance to a used code %.6g",
        accounting.total_used, accounting.total_set_size, accounting.residual, max_distance
    )
    return accounting


def essence_lower_bound_check(
    dl: DescriptionLengthReport,
    eb: EssenceBounds,
    eligible: bool = True
) -> LowerBoundCheck:
    """
    Compare achieved bits with log2 of the packing lower bound on the essence

    Only eligible models (compatible on a fresh holdout) are expected to pass;
    a failure points at weak certification.

    Raises:
        NotCertifiedError: If the description length is not regular
    """
    if not dl.regular:
        raise NotCertifiedError("The lower-bound check needs a finite description length")
    if not math.isclose(dl.U, eb.U):
        raise ValueError(f"Description length at U={dl.U} cannot be compared with essence at U={eb.U}")
    log2_lower = math.log2(eb.lower)
    margin = dl.bits - log2_lower
    check = LowerBoundCheck(margin >= 0, margin, dl.bits, log2_lower, dl.certificates_valid, eligible)
    if eligible and not check.holds:
        logger.warning(
            "achieved %.4f bits fall below log2(essence lower bound)=%.4f; certificates valid: %s",
            dl.bits, log2_lower, dl.certificates_valid
        )
    return check


def redundancy_score(ua: UsageAccounting, against: str = "lower") -> int:
    """Residual plus redundancy, against the lower or upper essence bound"""
    if against == "lower":
        return ua.residual + ua.redundancy_vs_lower
    if against == "upper":
        return ua.residual + ua.redundancy_vs_upper
    raise ValueError(f"against must be 'lower' or 'upper', got '{against}'")


def on_boundary_pairs(model: SpectrumCodec, eb: EssenceBounds, U: float) -> BoundaryReport:
    """Cover-point pairs within U/2 whose encodings spike on different patterns"""
    points = np.atleast_2d(eb.cover_points)
    threshold = U / 2
    if len(points) < 2:
        return BoundaryReport(threshold)
    patterns = patterns_of_batch(model.encode_batch(points))
    pairs = tuple(
        BoundaryPair(points[i], points[j], patterns[i], patterns[j])
        for i, j in sorted(cKDTree(points).query_pairs(threshold))
        if patterns[i] != patterns[j]
    )
    logger.info("on-boundary pairs within %g: %d", threshold, len(pairs))
    return BoundaryReport(threshold, pairs)
