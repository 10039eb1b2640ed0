"""
MDL service
Compatibility, achieved description length, sub-quantization check and model selection
Single Responsibility: model-level MDL evidence
"""

import logging
import math
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..errors import EmptyInputError, MixedFamilyError, NotCertifiedError
from ..models.domain import PerturbBox, SpikingPattern
from ..models.network import SpectrumCodec
from ..models.reports import (
    CompatibilityReport,
    DescriptionLengthReport,
    GridConsistency,
    PatternCensus,
    PatternComplexity,
    SelectionResult,
    SubQuantizationReport,
    SubQuantizationSample,
)
from ..models.schemas import CertificationBudget, CompatibilityParams
from .pattern_stats_service import census, dominant_ratio
from .robustness_service import (
    adjacent_code_deviation,
    build_grid,
    certify,
    certify_pattern,
    complexity_from_box,
    quantize_batch,
    replay_scaled,
)
from .spectrum_service import patterns_of_batch

logger = logging.getLogger(__name__)


def _as_samples(samples) -> np.ndarray:
    X = np.asarray(samples, dtype=np.float64)
    if X.size == 0:
        raise EmptyInputError("At least one sample is required")
    return np.atleast_2d(X)


def _group_by_pattern(patterns: Sequence[SpikingPattern]) -> Dict[SpikingPattern, np.ndarray]:
    groups: Dict[SpikingPattern, List[int]] = {}
    for row, pattern in enumerate(patterns):
        groups.setdefault(pattern, []).append(row)
    return {pattern: np.array(rows) for pattern, rows in groups.items()}


def sample_census(model: SpectrumCodec, samples) -> PatternCensus:
    return census(patterns_of_batch(model.encode_batch(_as_samples(samples))))


def check_compatibility(
    model: SpectrumCodec,
    samples,
    params: CompatibilityParams,
    sampling: str = "without"
) -> CompatibilityReport:
    """
    Evaluate both compatibility conditions on a sample set

    Args:
        model: Encoder/decoder pair
        samples: (N, D) data
        params: U, gamma1, gamma2 and P0
        sampling: Sampling model of the dominant ratio

    Returns:
        CompatibilityReport with per-sample errors, census and dominant ratio

    Raises:
        EmptyInputError: If no samples were given
    """
    X = _as_samples(samples)
    Z = model.encode_batch(X)
    errors = np.sqrt(np.sum((X - model.decode_batch(Z)) ** 2, axis=1))
    observed = census(patterns_of_batch(Z))
    dominant = dominant_ratio(observed, params.p0, sampling)

    report = CompatibilityReport(
        params=model.params,
        U=params.U,
        gamma1=params.gamma1,
        gamma2=params.gamma2,
        n_samples=len(X),
        max_recon_error=float(errors.max()),
        errors=errors,
        census=observed,
        dominant=dominant,
    )
    logger.info(
        "compatibility: n=%d max_err=%.6g (U=%g) delta=%s (gamma2=%g) -> %s",
        report.n_samples, report.max_recon_error, params.U, dominant.delta, params.gamma2,
        "compatible" if report.compatible else "incompatible"
    )
    return report


def description_length(
    model: SpectrumCodec,
    samples,
    U: float,
    budget: CertificationBudget,
    observed: Optional[PatternCensus] = None
) -> DescriptionLengthReport:
    """
    Achieved description length: certified (U/2)-complexity summed over observed patterns

    An uncertifiable pattern contributes the infinite sentinel, which makes
    the report non-regular.
    """
    observed = observed or sample_census(model, samples)
    entries = tuple(
        certify_pattern(model.decode_batch, pattern, U / 2, budget, model.params)
        for pattern in observed.patterns
    )
    report = DescriptionLengthReport(model.params, U, entries)
    if report.regular:
        logger.info("description length: sum=%d bits=%.4f over %d patterns", report.total_sum, report.bits, len(entries))
    else:
        logger.warning("description length is infinite: some observed pattern has no certified box")
    return report


def uncertified_description_length(
    model: SpectrumCodec,
    samples,
    U: float,
    alpha: float,
    budget: CertificationBudget
) -> DescriptionLengthReport:
    """
    Description length from a fixed shared half-width without searching

    The box is still certified once so the report shows whether it holds.
    """
    params = model.params
    entries = []
    for pattern in sample_census(model, samples).patterns:
        if pattern.is_dormant:
            entries.append(complexity_from_box(pattern, None, params))
            continue
        alphas = (alpha,) * pattern.size
        box = PerturbBox(pattern, alphas)
        certificate = certify(model.decode_batch, pattern, box, U / 2, budget, params)
        grid = build_grid(pattern, alphas, params)
        entries.append(PatternComplexity(pattern, grid.size, PerturbBox(pattern, alphas, certificate), grid))
    return DescriptionLengthReport(params, U, tuple(entries))


def sub_quantization_check(
    model: SpectrumCodec,
    holdout,
    dl: DescriptionLengthReport
) -> SubQuantizationReport:
    """
    Quantize holdout spectra inside their pattern's grid and measure the error

    Samples whose pattern has no grid are failures and are reported as unseen.

    Raises:
        NotCertifiedError: If the description length is not regular
        EmptyInputError: If the holdout is empty
    """
    if not dl.regular:
        raise NotCertifiedError("Sub-quantization needs a grid for every observed pattern")
    X = _as_samples(holdout)
    U = dl.U
    Z = model.encode_batch(X)
    X_tilde = model.decode_batch(Z)
    unquantized = np.sqrt(np.sum((X - X_tilde) ** 2, axis=1))

    rows: List[Optional[SubQuantizationSample]] = [None] * len(X)
    for pattern, members in _group_by_pattern(patterns_of_batch(Z)).items():
        entry = dl.entry_for(pattern)
        if entry is None:
            logger.warning("%d holdout samples carry the unseen pattern %s", len(members), pattern)
            for row in members:
                rows[row] = SubQuantizationSample(pattern, False, False, float(unquantized[row]), None, None, False)
            continue
        X_hat = model.decode_batch(quantize_batch(Z[members], entry.grid))
        displacement = np.sqrt(np.sum((X_tilde[members] - X_hat) ** 2, axis=1))
        quantized = np.sqrt(np.sum((X[members] - X_hat) ** 2, axis=1))
        for position, row in enumerate(members):
            rows[row] = SubQuantizationSample(
                pattern, True, entry.certified, float(unquantized[row]),
                float(displacement[position]), float(quantized[position]), bool(quantized[position] <= U)
            )

    report = SubQuantizationReport(U, tuple(rows))
    logger.info(
        "sub-quantization: %.4f within U after quantization, %.4f within U/2 before, %d unseen, %d violations",
        report.fraction, report.fraction_unquantized_half_u, report.unseen_count, report.violations_of_inequality
    )
    return report


def grid_consistency_check(
    model: SpectrumCodec,
    dl: DescriptionLengthReport,
    budget: CertificationBudget,
    scale: float = 0.5
) -> Tuple[GridConsistency, ...]:
    """
    Replay each certifying suite at a smaller scale and measure adjacent-code spread

    A grid certified at U/2 keeps single-dimension neighbouring codes within U of
    each other after decoding. Dormant and uncertified patterns are skipped.
    """
    checks = []
    for entry in dl.entries:
        replay = replay_scaled(model.decode_batch, entry, budget, model.params, scale)
        if replay is None or entry.grid is None:
            continue
        deviation = adjacent_code_deviation(model.decode_batch, entry.grid, seed=budget.seed)
        check = GridConsistency(entry.pattern, dl.U, replay.violations, deviation)
        if not (check.shrink_holds and check.adjacent_holds):
            logger.warning(
                "pattern %s: %d violations at scale %.2f, adjacent spread %.4g against U=%.4g",
                entry.pattern, replay.violations, scale, deviation, dl.U
            )
        checks.append(check)
    return tuple(checks)


def _selection_key(index: int, compat: CompatibilityReport, dl: DescriptionLengthReport) -> Tuple:
    bits = dl.bits if dl.regular else math.inf
    return (not compat.compatible, bits, dl.total_sum, compat.max_recon_error, index)


def select_best(reports: Sequence[Tuple[CompatibilityReport, DescriptionLengthReport]]) -> SelectionResult:
    """
    Compatible candidate with the fewest bits

    Ties go to the smaller summed complexity, then the lower maximum error.

    Raises:
        EmptyInputError: If no candidates were given
        MixedFamilyError: If candidates differ in (a, b, K)
    """
    if not reports:
        raise EmptyInputError("select_best needs at least one candidate")
    families = {dl.params for _, dl in reports} | {compat.params for compat, _ in reports}
    if len(families) > 1:
        raise MixedFamilyError(f"Candidates span several (a, b, K) families: {sorted(map(str, families))}")

    ranking = tuple(sorted(range(len(reports)), key=lambda i: _selection_key(i, *reports[i])))
    best = ranking[0]
    if not reports[best][0].compatible:
        logger.warning("no compatible candidate among %d", len(reports))
        return SelectionResult(None, ranking)
    return SelectionResult(best, ranking)
