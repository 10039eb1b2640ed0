"""
Information service
Discrete entropy and mutual information between original and reconstructed data
Single Responsibility: histogram-based information diagnostics
"""

import logging
from typing import Sequence, Tuple

import numpy as np

from ..config import DEFAULT_INFO_BINS
from ..errors import EmptyInputError, InputShapeError
from ..models.reports import DimensionInfo, Histogram2D, MutualInformationReport

logger = logging.getLogger(__name__)

Bounds = Tuple[float, float]


def _check_bins(bins: int) -> None:
    if bins < 2:
        raise ValueError(f"Need at least 2 bins, got {bins}")


def _bin_indices(values: np.ndarray, bounds: Bounds, bins: int) -> Tuple[np.ndarray, int]:
    """Equal-width bin index of each value; out-of-range values land in the edge bins"""
    low, high = bounds
    if not low < high:
        raise ValueError(f"Bin bounds must satisfy low < high, got {bounds}")
    clamped = int(np.count_nonzero((values < low) | (values > high)))
    index = np.floor((values - low) / (high - low) * bins).astype(np.int64)
    return np.clip(index, 0, bins - 1), clamped


def _entropy_bits(counts: np.ndarray) -> float:
    p = counts[counts > 0] / counts.sum()
    return float(-np.sum(p * np.log2(p)))


def discrete_entropy(seq: Sequence[float], bounds: Bounds, bins: int = DEFAULT_INFO_BINS) -> float:
    """
    Plug-in entropy in bits of equal-width bin occupancy

    Raises:
        EmptyInputError: If seq is empty
    """
    _check_bins(bins)
    values = np.asarray(seq, dtype=np.float64).ravel()
    if values.size == 0:
        raise EmptyInputError("Entropy of an empty sequence is undefined")
    index, clamped = _bin_indices(values, bounds, bins)
    if clamped:
        logger.debug("%d values clamped into edge bins", clamped)
    return _entropy_bits(np.bincount(index, minlength=bins))


def histogram_2d(orig: Sequence[float], recon: Sequence[float], bounds: Bounds, bins: int = DEFAULT_INFO_BINS) -> Histogram2D:
    """Joint bin counts of two paired sequences over shared bounds"""
    _check_bins(bins)
    x = np.asarray(orig, dtype=np.float64).ravel()
    y = np.asarray(recon, dtype=np.float64).ravel()
    if x.shape != y.shape:
        raise InputShapeError(f"Paired sequences differ in length: {x.size} vs {y.size}")
    if x.size == 0:
        raise EmptyInputError("Histogram of empty sequences is undefined")
    i, clamped_x = _bin_indices(x, bounds, bins)
    j, clamped_y = _bin_indices(y, bounds, bins)
    joint = np.bincount(i * bins + j, minlength=bins * bins).reshape(bins, bins)
    edges = np.linspace(bounds[0], bounds[1], bins + 1)
    return Histogram2D(bins, edges, joint, clamped_x + clamped_y)


def _mutual_information_bits(hist: Histogram2D) -> float:
    p = hist.joint / hist.total
    rows = p.sum(axis=1, keepdims=True)
    columns = p.sum(axis=0, keepdims=True)
    occupied = p > 0
    expected = (rows * columns)[occupied]
    return max(0.0, float(np.sum(p[occupied] * np.log2(p[occupied] / expected))))


def _as_columns(data) -> np.ndarray:
    array = np.asarray(data, dtype=np.float64)
    return array[:, None] if array.ndim == 1 else array


def mutual_information(
    orig,
    recon,
    bounds: Sequence[Bounds],
    bins: int = DEFAULT_INFO_BINS
) -> MutualInformationReport:
    """
    Per-dimension mutual information between data and reconstructions

    Args:
        orig: (N, D) original samples
        recon: (N, D) reconstructions, row-aligned with orig
        bounds: (low, high) per dimension
        bins: Bins per axis

    Returns:
        MutualInformationReport with H(X_d), H(X~_d), I(X_d; X~_d) per dimension
    """
    X = _as_columns(orig)
    Y = _as_columns(recon)
    if X.shape != Y.shape:
        raise InputShapeError(f"Original {X.shape} and reconstruction {Y.shape} shapes differ")
    if len(bounds) != X.shape[1]:
        raise InputShapeError(f"Need bounds for {X.shape[1]} dimensions, got {len(bounds)}")

    rows = []
    for d in range(X.shape[1]):
        hist = histogram_2d(X[:, d], Y[:, d], bounds[d], bins)
        rows.append(DimensionInfo(
            dimension=d + 1,
            entropy_original=_entropy_bits(hist.row_marginal),
            entropy_reconstructed=_entropy_bits(hist.column_marginal),
            mutual_information=_mutual_information_bits(hist),
            clamped=hist.clamped,
        ))
    report = MutualInformationReport(bins, tuple(rows))
    logger.info("mutual information total %.4f bits over %d dimensions", report.total, len(rows))
    return report


def permutation_null(
    orig,
    recon,
    bounds: Sequence[Bounds],
    bins: int = DEFAULT_INFO_BINS,
    permutations: int = 100,
    seed: int = 0
) -> Tuple[float, float]:
    """Mean and standard deviation of total mutual information with shuffled pairing"""
    X = _as_columns(orig)
    Y = _as_columns(recon)
    rng = np.random.default_rng(seed)
    totals = []
    for _ in range(permutations):
        shuffled = Y[rng.permutation(len(Y))]
        totals.append(sum(
            _mutual_information_bits(histogram_2d(X[:, d], shuffled[:, d], bounds[d], bins))
            for d in range(X.shape[1])
        ))
    return float(np.mean(totals)), float(np.std(totals))
