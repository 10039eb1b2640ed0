"""
Pattern statistics service
Pattern census and the dominant-ratio statistic
Single Responsibility: counting patterns and subset-sampling probabilities
"""

import itertools
import logging
import math
from collections import Counter
from typing import Dict, Iterable, List, Sequence, Union

import numpy as np
from scipy.special import gammaln

from ..config import ENUMERATION_MAX_PATTERNS, LOG1P_RATIO_MAX_DRAWS
from ..errors import EmptyInputError
from ..models.domain import Spectrum, SpikingPattern
from ..models.reports import DominantRatioReport, PatternCensus
from .spectrum_service import pattern_of

logger = logging.getLogger(__name__)

SAMPLING_MODELS = ("without", "with")


def census(spectra: Iterable[Union[Spectrum, SpikingPattern]]) -> PatternCensus:
    """
    Count spiking patterns over encoded spectra (patterns are accepted directly too)

    Raises:
        EmptyInputError: If nothing was observed
    """
    counter: Counter = Counter()
    for item in spectra:
        counter[item if isinstance(item, SpikingPattern) else pattern_of(item)] += 1
    if not counter:
        raise EmptyInputError("Census needs at least one spectrum")
    return PatternCensus(dict(counter))


def _log_ratio(removed: int, n0: int, total: int) -> float:
    """log of C(total - removed, n0) / C(total, n0); -inf when the numerator vanishes"""
    if total - removed < n0:
        return -math.inf
    if removed == 0:
        return 0.0
    if n0 <= LOG1P_RATIO_MAX_DRAWS:
        steps = np.arange(n0, dtype=np.float64)
        return math.fsum(np.log1p(-removed / (total - steps)))
    return float(
        gammaln(total - removed + 1) - gammaln(total - removed - n0 + 1)
        - gammaln(total + 1) + gammaln(total - n0 + 1)
    )


def _signed_subset_sums(sizes: Sequence[int]) -> Dict[int, int]:
    """
    Signed count of pattern subsets per removed-sample total: sum over S of (-1)^|S|
    """
    if len(sizes) <= ENUMERATION_MAX_PATTERNS:
        coefficients: Dict[int, int] = {}
        for subset_size in range(len(sizes) + 1):
            sign = -1 if subset_size % 2 else 1
            for subset in itertools.combinations(sizes, subset_size):
                removed = sum(subset)
                coefficients[removed] = coefficients.get(removed, 0) + sign
        return coefficients

    # Coefficients of prod_m (1 - x^{N_m}), exact in integers
    coefficients = {0: 1}
    for size in sizes:
        updated = dict(coefficients)
        for removed, coefficient in coefficients.items():
            updated[removed + size] = updated.get(removed + size, 0) - coefficient
        coefficients = {removed: c for removed, c in updated.items() if c != 0}
    return coefficients


def prob_all_observed(c: PatternCensus, n0: int, sampling: str = "without") -> float:
    """
    Probability that n0 spectra drawn at random contain every observed pattern

    Inclusion-exclusion over pattern subsets S:
    sum_S (-1)^|S| C(N - sum_{m in S} N_m, n0) / C(N, n0) for draws without
    replacement, or sum_S (-1)^|S| (1 - sum_{m in S} N_m / N)^n0 with replacement.

    Raises:
        ValueError: If n0 is outside [1, N] or the sampling model is unknown
    """
    if sampling not in SAMPLING_MODELS:
        raise ValueError(f"Unknown sampling model '{sampling}', expected one of {SAMPLING_MODELS}")
    total = c.N
    if not 1 <= n0 <= total:
        raise ValueError(f"n0 must lie in [1, {total}], got {n0}")
    if c.M == 1:
        return 1.0

    terms = []
    for removed, coefficient in _signed_subset_sums(c.sizes).items():
        if sampling == "without":
            log_ratio = _log_ratio(removed, n0, total)
        else:
            remaining = 1.0 - removed / total
            log_ratio = n0 * math.log(remaining) if remaining > 0 else -math.inf
        if log_ratio > -math.inf:
            terms.append(coefficient * math.exp(log_ratio))
    return min(1.0, max(0.0, math.fsum(terms)))


def dominant_ratio(c: PatternCensus, p0: float, sampling: str = "without") -> DominantRatioReport:
    """
    Minimal N0 with prob_all_observed(N0) >= P0, by binary search

    Args:
        c: Pattern census
        p0: Target probability in (0, 1)
        sampling: 'without' (default) or 'with' replacement

    Returns:
        DominantRatioReport whose probabilities witness minimality
    """
    if not 0 < p0 < 1:
        raise ValueError(f"P0 must lie in (0, 1), got {p0}")
    low, high = 1, c.N
    while low < high:
        middle = (low + high) // 2
        if prob_all_observed(c, middle, sampling) >= p0:
            high = middle
        else:
            low = middle + 1
    at_n0 = prob_all_observed(c, low, sampling)
    before = prob_all_observed(c, low - 1, sampling) if low > 1 else 0.0
    logger.info("dominant ratio N=%d N0=%d delta=%s (%s replacement)", c.N, low, c.N / low, sampling)
    return DominantRatioReport(p0, c.N, low, at_n0, before, sampling)


def monte_carlo_prob_all_observed(
    c: PatternCensus,
    n0: int,
    trials: int = 100_000,
    seed: int = 0,
    sampling: str = "without"
) -> float:
    """Simulated frequency of drawing every pattern among n0 spectra"""
    rng = np.random.default_rng(seed)
    labels = np.repeat(np.arange(c.M), c.sizes)
    hits = 0
    batch = max(1, min(trials, 2_000_000 // max(n0, 1)))
    done = 0
    while done < trials:
        current = min(batch, trials - done)
        if sampling == "without":
            keys = rng.random((current, len(labels)))
            draws = labels[np.argpartition(keys, n0 - 1, axis=1)[:, :n0]] if n0 < len(labels) else np.tile(labels, (current, 1))
        else:
            draws = labels[rng.integers(0, len(labels), size=(current, n0))]
        seen = np.zeros((current, c.M), dtype=bool)
        seen[np.arange(current)[:, None], draws] = True
        hits += int(np.count_nonzero(seen.all(axis=1)))
        done += current
    return hits / trials


def census_rows(c: PatternCensus) -> List[Dict[str, object]]:
    return [{"pattern": pattern.label, "size": pattern.size, "count": count} for pattern, count in c.counts.items()]
