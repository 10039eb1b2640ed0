"""
Report writing utilities
CSV tables, JSON documents, manifest summaries and file digests
"""

import csv
import hashlib
import json
import math
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Union

import numpy as np

from ..config import ARTIFACT_VERSION
from ..models.domain import Certificate
from ..models.reports import (
    BoundaryReport,
    CompatibilityReport,
    DescriptionLengthReport,
    DominantRatioReport,
    EssenceBounds,
    GridConsistency,
    LowerBoundCheck,
    MutualInformationReport,
    PatternCensus,
    SubQuantizationReport,
    UsageAccounting,
)

PathLike = Union[str, Path]


def number(value: Optional[float]) -> Any:
    """JSON-safe number: infinities become strings, numpy scalars plain Python"""
    if value is None:
        return None
    if isinstance(value, (int, np.integer)):
        return int(value)
    value = float(value)
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    if math.isnan(value):
        return "nan"
    return value


def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path: PathLike, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(value) for value in row])
    return path


def write_json(path: PathLike, payload: Dict[str, Any]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")
    return path


def file_digest(path: PathLike) -> str:
    """sha256 of a file's bytes"""
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 16), b""):
            digest.update(block)
    return digest.hexdigest()


def digests(paths: Iterable[PathLike]) -> Dict[str, str]:
    return {Path(path).name: file_digest(path) for path in sorted(paths, key=lambda p: Path(p).name)}


def census_summary(c: PatternCensus) -> Dict[str, Any]:
    return {"N": c.N, "M": c.M, "counts": {pattern.label: count for pattern, count in c.counts.items()}}


def dominant_summary(report: DominantRatioReport) -> Dict[str, Any]:
    return {
        "P0": report.P0,
        "N": report.N,
        "N0": report.N0,
        "delta": str(report.delta),
        "delta_value": float(report.delta),
        "probability_at_N0": report.probability_at_N0,
        "probability_at_N0_minus_1": report.probability_at_N0_minus_1,
        "sampling": report.sampling,
    }


def compatibility_summary(report: CompatibilityReport) -> Dict[str, Any]:
    return {
        "U": report.U,
        "gamma1": report.gamma1,
        "gamma2": report.gamma2,
        "n_samples": report.n_samples,
        "max_recon_error": report.max_recon_error,
        "census": census_summary(report.census),
        "dominant_ratio": dominant_summary(report.dominant),
        "condition_i": report.condition_i,
        "condition_ii": report.condition_ii,
        "compatible": report.compatible,
    }


def certificate_summary(certificate: Optional[Certificate]) -> Optional[Dict[str, Any]]:
    if certificate is None:
        return None
    return {
        "pattern": certificate.pattern.label,
        "alphas": list(certificate.alphas),
        "U": certificate.U,
        "base_points_tested": certificate.base_points_tested,
        "perturbations_per_point": certificate.perturbations_per_point,
        "violations": certificate.violations,
        "max_observed_deviation": certificate.max_observed_deviation,
        "seed": certificate.seed,
        "lattice": certificate.lattice,
        "valid": certificate.valid,
    }


def description_length_summary(report: DescriptionLengthReport) -> Dict[str, Any]:
    return {
        "U": report.U,
        "total_sum": number(report.total_sum),
        "achieved_description_length_bits": number(report.bits),
        "regular": report.regular,
        "certificates_valid": report.certificates_valid,
        "certified_complexity_upper_bound": {entry.pattern.label: number(entry.value) for entry in report.entries},
    }


def sub_quantization_summary(report: SubQuantizationReport) -> Dict[str, Any]:
    return {
        "U": report.U,
        "n_samples": len(report.samples),
        "fraction": report.fraction,
        "fraction_unquantized_half_u": report.fraction_unquantized_half_u,
        "unseen_count": report.unseen_count,
        "violations_of_inequality": report.violations_of_inequality,
    }


def grid_consistency_summary(checks: Sequence[GridConsistency]) -> Dict[str, Any]:
    return {
        "patterns": {
            check.pattern.label: {
                "shrink_violations": check.shrink_violations,
                "adjacent_deviation": check.adjacent_deviation,
                "adjacent_within_U": check.adjacent_holds,
            }
            for check in checks
        },
        "all_hold": all(check.shrink_holds and check.adjacent_holds for check in checks),
    }


def essence_summary(eb: EssenceBounds) -> Dict[str, Any]:
    return {"U": eb.U, "grid_res": eb.grid_res, "lower": eb.lower, "upper": eb.upper, "grid_size": eb.grid_size}


def usage_summary(ua: UsageAccounting, scores: Dict[str, int]) -> Dict[str, Any]:
    return {
        "total_set_size": number(ua.total_set_size),
        "total_used": ua.total_used,
        "residual": number(ua.residual),
        "redundancy_vs_lower": ua.redundancy_vs_lower,
        "redundancy_vs_upper": ua.redundancy_vs_upper,
        "max_distance_to_used_code": number(ua.max_distance_to_used_code),
        "uncertified_patterns": [pattern.label for pattern in ua.uncertified_patterns],
        "scores": {key: number(value) for key, value in scores.items()},
    }


def lower_bound_summary(check: LowerBoundCheck) -> Dict[str, Any]:
    return {
        "holds": check.holds,
        "margin_bits": check.margin_bits,
        "bits": check.bits,
        "log2_lower": check.log2_lower,
        "certificates_valid": check.certificates_valid,
        "eligible": check.eligible,
    }


def info_summary(report: MutualInformationReport, null_mean: float, null_std: float) -> Dict[str, Any]:
    return {
        "bins": report.bins,
        "per_dimension": report.per_dimension,
        "total": report.total,
        "permutation_null": {"mean": null_mean, "std": null_std},
    }


def write_census(path: PathLike, c: PatternCensus) -> Path:
    return write_csv(path, ["pattern", "size", "count"], ([p.label, p.size, n] for p, n in c.counts.items()))


def write_complexity(path: PathLike, report: DescriptionLengthReport) -> Path:
    rows = []
    for entry in report.entries:
        alphas = ";".join(repr(alpha) for alpha in entry.box.alphas) if entry.box else ""
        counts = ";".join(str(count) for count in entry.grid.counts) if entry.grid else ""
        rows.append([entry.pattern.label, entry.pattern.size, alphas, counts, number(entry.value), entry.certified])
    return write_csv(path, ["pattern", "size", "alphas", "grid_counts", "certified_complexity_upper_bound", "certified"], rows)


def write_certificates(path: PathLike, reports: Dict[int, DescriptionLengthReport]) -> Path:
    candidates = {
        str(seed): {entry.pattern.label: certificate_summary(entry.certificate) for entry in report.entries}
        for seed, report in reports.items()
    }
    return write_json(path, {"artifact_version": ARTIFACT_VERSION, "candidates": candidates})


def write_per_sample_errors(path: PathLike, reports: Dict[int, CompatibilityReport]) -> Path:
    rows = (
        [seed, index, float(error), bool(error <= report.U)]
        for seed, report in reports.items()
        for index, error in enumerate(report.errors)
    )
    return write_csv(path, ["candidate_seed", "sample", "error", "within_U"], rows)


def write_sub_quantization(path: PathLike, report: SubQuantizationReport) -> Path:
    rows = (
        [index, s.pattern.label, s.seen, s.certified, s.unquantized_error, s.displacement, s.quantized_error, s.passed]
        for index, s in enumerate(report.samples)
    )
    header = ["sample", "pattern", "seen", "certified", "unquantized_error", "displacement", "quantized_error", "passed"]
    return write_csv(path, header, rows)


def write_points_table(path: PathLike, points: np.ndarray, kinds: List[str]) -> Path:
    points = np.atleast_2d(points)
    header = ["kind", *[f"x{d + 1}" for d in range(points.shape[1])]]
    return write_csv(path, header, ([kind, *map(float, point)] for kind, point in zip(kinds, points)))


def write_boundary_pairs(path: PathLike, report: BoundaryReport, dim: int) -> Path:
    header = [
        *[f"first_x{d + 1}" for d in range(dim)], *[f"second_x{d + 1}" for d in range(dim)],
        "first_pattern", "second_pattern", "distance",
    ]
    rows = (
        [*map(float, pair.first), *map(float, pair.second), pair.first_pattern.label, pair.second_pattern.label, pair.distance]
        for pair in report.pairs
    )
    return write_csv(path, header, rows)


def write_info(path: PathLike, report: MutualInformationReport) -> Path:
    rows = (
        [row.dimension, row.entropy_original, row.entropy_reconstructed, row.mutual_information, row.clamped]
        for row in report.dimensions
    )
    return write_csv(path, ["dimension", "entropy_original", "entropy_reconstructed", "mutual_information", "clamped"], rows)
