"""
Pipeline service
End-to-end run: data, candidate training, MDL evidence, essence geometry,
information diagnostics, and the run directory with its manifest
Single Responsibility: orchestration and run artifacts
"""

import logging
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Tuple

import numpy as np

from ..config import (
    ARTIFACT_VERSION,
    CSV_SCHEMA_VERSION,
    EXIT_CERTIFICATION_FAILED,
    EXIT_INCOMPATIBLE,
    EXIT_OK,
    MODEL_FORMAT_VERSION,
    NULL_PERMUTATIONS,
    OUTPUT_ROOT,
)
from ..errors import SpectrumMdlError, StageError
from ..models.network import SpectrumVae
from ..models.reports import (
    BoundaryReport,
    CompatibilityReport,
    DescriptionLengthReport,
    EssenceBounds,
    GridConsistency,
    LowerBoundCheck,
    MutualInformationReport,
    SelectionResult,
    SubQuantizationReport,
    UsageAccounting,
)
from ..models.schemas import RunConfig
from ..utils import report_writer
from ..utils.model_io import save_model
from ..utils.plot_renderer import render_codes_svg
from .autoencoder_service import SpectrumVaeTrainer, TrainingHistory, build_model
from .dataset_service import load_dataset_with_holdout, save_points, support_for
from .essence_service import (
    BoundedSupport,
    essence_bounds,
    essence_lower_bound_check,
    on_boundary_pairs,
    redundancy_score,
    used_codes,
)
from .info_service import mutual_information, permutation_null
from .mdl_service import (
    check_compatibility,
    description_length,
    grid_consistency_check,
    select_best,
    sub_quantization_check,
)

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"


@dataclass(eq=False)
class CandidateResult:
    """One trained candidate with its MDL evidence"""
    seed: int
    model: SpectrumVae
    history: TrainingHistory
    compatibility: CompatibilityReport
    description_length: DescriptionLengthReport


@dataclass(eq=False)
class AnalysisResult:
    """Evidence gathered for the analyzed candidate"""
    holdout_compatibility: CompatibilityReport
    essence: EssenceBounds
    boundary: BoundaryReport
    info: MutualInformationReport
    null_mean: float
    null_std: float
    sub_quantization: Optional[SubQuantizationReport] = None
    usage: Optional[UsageAccounting] = None
    lower_bound: Optional[LowerBoundCheck] = None
    grid_consistency: Tuple[GridConsistency, ...] = ()


@dataclass
class RunManifest:
    """
    Everything a run reports; timings are kept apart from the reproducible numbers
    """
    output_dir: Path
    exit_code: int
    report: Dict[str, Any]
    timings: Dict[str, float] = field(default_factory=dict)
    digests: Dict[str, str] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {**self.report, "exit_code": self.exit_code, "digests": self.digests, "timings": self.timings}

    def reproducible(self) -> Dict[str, Any]:
        """Manifest content without wall-clock timings"""
        return {key: value for key, value in self.to_dict().items() if key != "timings"}


class PipelineRunner:
    """
    Runs every stage in order and writes the run directory
    A failing stage raises StageError naming the stage
    """

    def __init__(self, config: RunConfig, output_dir: Optional[Path] = None):
        """
        Initialize runner

        Args:
            config: Validated run configuration
            output_dir: Run directory; defaults to config.output_dir or OUTPUT_ROOT/run_<seed>
        """
        self.config = config
        self.output_dir = Path(output_dir or config.output_dir or OUTPUT_ROOT / f"run_{config.seed}")
        self.timings: Dict[str, float] = {}
        self.outputs: List[Path] = []

    @contextmanager
    def _stage(self, name: str) -> Iterator[None]:
        logger.info("stage %s", name)
        started = time.perf_counter()
        try:
            yield
        except StageError:
            raise
        except (SpectrumMdlError, ValueError, RuntimeError) as e:
            raise StageError(name, str(e)) from e
        finally:
            self.timings[name] = self.timings.get(name, 0.0) + time.perf_counter() - started

    def _emit(self, path: Path) -> Path:
        self.outputs.append(path)
        return path

    def run(self) -> RunManifest:
        config = self.config
        self.output_dir.mkdir(parents=True, exist_ok=True)

        with self._stage("data"):
            train_points, holdout = load_dataset_with_holdout(config.dataset, config.seed)
            self._emit(save_points(self.output_dir / "points.csv", train_points))
            self._emit(save_points(self.output_dir / "holdout.csv", holdout))
            support = support_for(config.dataset.kind, train_points)

        candidates = [self._candidate(seed, train_points) for seed in config.seeds]

        with self._stage("selection"):
            selection = select_best([(c.compatibility, c.description_length) for c in candidates])
        analyzed = candidates[selection.index if selection.found else selection.ranking[0]]
        analysis = self._analyze(analyzed, train_points, holdout, support, eligible_candidate=selection.found)

        with self._stage("outputs"):
            self._write_outputs(candidates, analyzed, analysis, train_points)

        exit_code = self._exit_code(selection, analyzed, analysis)
        report = self._report(candidates, selection, analyzed, analysis)
        manifest = RunManifest(self.output_dir, exit_code, report, dict(self.timings))
        manifest.digests = self._digests()
        report_writer.write_json(self.output_dir / MANIFEST_NAME, manifest.to_dict())
        logger.info("run written to %s (exit code %d)", self.output_dir, exit_code)
        return manifest

    def _candidate(self, seed: int, points: np.ndarray) -> CandidateResult:
        config = self.config
        params = config.model.spectrum_params()
        with self._stage("train"):
            model = build_model(
                params, points.shape[1], config.model.encoder_hidden, config.model.decoder_hidden,
                config.model.hidden_activation, seed
            )
            trainer = SpectrumVaeTrainer(config.train.model_copy(update={"seed": seed}))
            model = trainer.train(model, points)
            self._emit(save_model(model, self.output_dir / f"model_{seed}.json"))
        with self._stage("compatibility"):
            compatibility = check_compatibility(model, points, config.compatibility())
        with self._stage("description_length"):
            dl = description_length(model, points, config.U, config.certification, compatibility.census)
        return CandidateResult(seed, model, trainer.history, compatibility, dl)

    def _analyze(
        self,
        candidate: CandidateResult,
        points: np.ndarray,
        holdout: np.ndarray,
        support: BoundedSupport,
        eligible_candidate: bool
    ) -> AnalysisResult:
        config = self.config
        model, dl = candidate.model, candidate.description_length

        with self._stage("holdout"):
            holdout_report = check_compatibility(model, holdout, config.compatibility())
        with self._stage("essence"):
            eb = essence_bounds(support, config.U, config.grid_res, config.seed, config.essence.packing_restarts)
        with self._stage("boundary"):
            boundary = on_boundary_pairs(model, eb, config.U)
        with self._stage("info"):
            bounds = info_bounds(support)
            reconstructed = model.decode_batch(model.encode_batch(points))
            info = mutual_information(points, reconstructed, bounds, config.info_bins)
            null_mean, null_std = permutation_null(
                points, reconstructed, bounds, config.info_bins, NULL_PERMUTATIONS, config.seed
            )

        analysis = AnalysisResult(holdout_report, eb, boundary, info, null_mean, null_std)
        if not dl.regular:
            logger.warning("candidate %d is not regular; quantization stages skipped", candidate.seed)
            return analysis

        with self._stage("sub_quantization"):
            analysis.sub_quantization = sub_quantization_check(model, holdout, dl)
        with self._stage("usage"):
            analysis.usage = used_codes(model, points, dl, eb)
        with self._stage("grid_consistency"):
            analysis.grid_consistency = grid_consistency_check(model, dl, config.certification)
        with self._stage("lower_bound"):
            eligible = eligible_candidate and holdout_report.compatible
            analysis.lower_bound = essence_lower_bound_check(dl, eb, eligible)
        return analysis

    def _write_outputs(
        self,
        candidates: List[CandidateResult],
        analyzed: CandidateResult,
        analysis: AnalysisResult,
        points: np.ndarray
    ) -> None:
        out = self.output_dir
        dl = analyzed.description_length
        eb = analysis.essence
        self._emit(report_writer.write_census(out / "census.csv", analyzed.compatibility.census))
        self._emit(report_writer.write_complexity(out / "complexity.csv", dl))
        self._emit(report_writer.write_certificates(
            out / "certificates.json", {c.seed: c.description_length for c in candidates}
        ))
        self._emit(report_writer.write_per_sample_errors(
            out / "per_sample_errors.csv", {c.seed: c.compatibility for c in candidates}
        ))
        if analysis.sub_quantization is not None:
            self._emit(report_writer.write_sub_quantization(out / "subquantization.csv", analysis.sub_quantization))
        self._emit(report_writer.write_points_table(
            out / "cover_points.csv",
            np.concatenate([eb.cover_points, eb.packing_points], axis=0),
            ["cover"] * eb.upper + ["packing"] * eb.lower,
        ))
        self._emit(report_writer.write_boundary_pairs(out / "boundary_pairs.csv", analysis.boundary, points.shape[1]))
        self._emit(report_writer.write_info(out / "info.csv", analysis.info))
        self._emit(render_codes_svg(
            out / "codes.svg", analyzed.model, points, dl, eb.cover_points, title=f"candidate seed {analyzed.seed}"
        ))

    @staticmethod
    def _exit_code(selection: SelectionResult, analyzed: CandidateResult, analysis: AnalysisResult) -> int:
        if not selection.found:
            return EXIT_INCOMPATIBLE
        if not analyzed.description_length.regular:
            return EXIT_CERTIFICATION_FAILED
        if analysis.sub_quantization.violations_of_inequality > 0:
            return EXIT_CERTIFICATION_FAILED
        lower_bound = analysis.lower_bound
        if lower_bound.eligible and not lower_bound.holds:
            return EXIT_CERTIFICATION_FAILED
        return EXIT_OK

    def _report(
        self,
        candidates: List[CandidateResult],
        selection: SelectionResult,
        analyzed: CandidateResult,
        analysis: AnalysisResult
    ) -> Dict[str, Any]:
        usage = None
        if analysis.usage is not None:
            scores = {against: redundancy_score(analysis.usage, against) for against in ("lower", "upper")}
            usage = report_writer.usage_summary(analysis.usage, scores)
        return {
            "artifact_version": ARTIFACT_VERSION,
            "model_format_version": MODEL_FORMAT_VERSION,
            "csv_schema_version": CSV_SCHEMA_VERSION,
            "config": self.config.model_dump(mode="json"),
            "candidates": [
                {
                    "seed": c.seed,
                    "epoch_losses": c.history.epoch_losses,
                    "compatibility": report_writer.compatibility_summary(c.compatibility),
                    "achieved_description_length": report_writer.description_length_summary(c.description_length),
                }
                for c in candidates
            ],
            "selection": {
                "selected_seed": candidates[selection.index].seed if selection.found else None,
                "ranking": [candidates[i].seed for i in selection.ranking],
                "analyzed_seed": analyzed.seed,
            },
            "holdout_compatibility": report_writer.compatibility_summary(analysis.holdout_compatibility),
            "sub_quantization": (
                report_writer.sub_quantization_summary(analysis.sub_quantization)
                if analysis.sub_quantization is not None else None
            ),
            "essence": report_writer.essence_summary(analysis.essence),
            "usage": usage,
            "grid_consistency": report_writer.grid_consistency_summary(analysis.grid_consistency),
            "lower_bound_check": (
                report_writer.lower_bound_summary(analysis.lower_bound) if analysis.lower_bound is not None else None
            ),
            "boundary": {"threshold": analysis.boundary.threshold, "pair_count": analysis.boundary.pair_count},
            "info": report_writer.info_summary(analysis.info, analysis.null_mean, analysis.null_std),
        }

    def _digests(self) -> Dict[str, str]:
        files = list(self.outputs)
        if self.config.dataset.kind == "custom":
            files.append(Path(self.config.dataset.path))
        return report_writer.digests(files)


def info_bounds(support: BoundedSupport) -> List[Tuple[float, float]]:
    """Histogram bounds per dimension; a degenerate extent is widened by one unit"""
    bounds = []
    for low, high in zip(support.lower, support.upper):
        if high > low:
            bounds.append((float(low), float(high)))
        else:
            bounds.append((float(low) - 0.5, float(high) + 0.5))
    return bounds


def run_pipeline(config: RunConfig, output_dir: Optional[Path] = None) -> RunManifest:
    """
    Train candidates, select the best compatible one and write every report

    Returns:
        RunManifest whose exit_code is 0, 2 (no compatible candidate) or
        3 (certification failed)

    Raises:
        StageError: If a stage fails; the original error is chained
    """
    return PipelineRunner(config, output_dir).run()
