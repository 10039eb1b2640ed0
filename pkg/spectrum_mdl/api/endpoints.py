"""
API endpoints for Spectrum MDL
Handles HTTP requests and orchestrates services
"""

import logging
import os
import uuid
from pathlib import Path

from fastapi import APIRouter, File, HTTPException, UploadFile
from fastapi.responses import FileResponse

from .. import config as settings
from ..config import ALLOWED_UPLOAD_EXTENSIONS, MAX_UPLOAD_SIZE_MB
from ..errors import ConfigError, SpectrumMdlError, StageError
from ..models.domain import SpikingPattern
from ..models.reports import PatternCensus
from ..models.schemas import (
    DatasetUploadResponse,
    DominantRatioRequest,
    DominantRatioResponse,
    ErrorResponse,
    RunConfig,
)
from ..services.dataset_service import load_points
from ..services.pattern_stats_service import dominant_ratio
from ..services.pipeline_service import run_pipeline

logger = logging.getLogger(__name__)

router = APIRouter(prefix="/api/v1", tags=["spectrum-mdl"])

MAX_UPLOAD_SIZE_BYTES = MAX_UPLOAD_SIZE_MB * 1024 * 1024
MEDIA_TYPES = {".svg": "image/svg+xml", ".csv": "text/csv", ".json": "application/json"}


def output_root() -> Path:
    return Path(settings.OUTPUT_ROOT)


@router.post(
    "/runs",
    responses={
        400: {"model": ErrorResponse},
        500: {"model": ErrorResponse}
    }
)
def create_run(config: RunConfig) -> dict:
    """
    Run the full pipeline into a fresh run directory

    Returns the manifest with the run id needed to fetch artifacts
    """
    if config.dataset.kind == "custom":
        validate_dataset_path(Path(config.dataset.path))

    run_id = str(uuid.uuid4())[:8]
    run_dir = output_root() / run_id

    try:
        manifest = run_pipeline(config, run_dir)
    except StageError as e:
        status = 400 if isinstance(e.__cause__, SpectrumMdlError) else 500
        raise HTTPException(status_code=status, detail=str(e))
    except SpectrumMdlError as e:
        raise HTTPException(status_code=400, detail=str(e))
    except Exception as e:
        logger.exception("run %s failed", run_id)
        raise HTTPException(status_code=500, detail=f"Run failed: {str(e)}")

    return {"run_id": run_id, **manifest.to_dict()}


@router.post(
    "/datasets",
    response_model=DatasetUploadResponse,
    responses={400: {"model": ErrorResponse}}
)
async def upload_dataset(
    file: UploadFile = File(..., description="Point CSV with an x1,...,xD header")
) -> DatasetUploadResponse:
    """
    Store a point file for use as a custom dataset
    """
    validate_uploaded_file(file)
    path = await save_uploaded_file(file)

    try:
        points = load_points(path)
    except ConfigError as e:
        cleanup_file(path)
        raise HTTPException(status_code=400, detail=str(e))

    return DatasetUploadResponse(path=str(path), n_points=len(points), dimension=points.shape[1])


@router.post(
    "/dominant-ratio",
    response_model=DominantRatioResponse,
    responses={400: {"model": ErrorResponse}}
)
def compute_dominant_ratio(request: DominantRatioRequest) -> DominantRatioResponse:
    """
    Dominant ratio of a pattern census given as label -> count
    """
    try:
        counts = {SpikingPattern.parse(label): count for label, count in request.counts.items()}
        census = PatternCensus(counts)
        report = dominant_ratio(census, request.p0, request.sampling)
    except ValueError as e:
        raise HTTPException(status_code=400, detail=str(e))

    return DominantRatioResponse(
        n=report.N,
        m=census.M,
        n0=report.N0,
        delta=str(report.delta),
        delta_value=float(report.delta),
        probability_at_n0=report.probability_at_N0,
        probability_at_n0_minus_1=report.probability_at_N0_minus_1,
    )


def validate_uploaded_file(file: UploadFile) -> None:
    """
    Validate uploaded file

    Raises:
        HTTPException: If file is invalid
    """
    if not file.filename:
        raise HTTPException(
            status_code=400,
            detail="No file provided"
        )

    file_extension = Path(file.filename).suffix.lower()
    if file_extension not in ALLOWED_UPLOAD_EXTENSIONS:
        raise HTTPException(
            status_code=400,
            detail=f"Invalid file type. Only {ALLOWED_UPLOAD_EXTENSIONS} allowed"
        )


async def save_uploaded_file(file: UploadFile) -> Path:
    """
    Save uploaded file under the datasets directory of the output root

    Returns:
        Path to saved file

    Raises:
        HTTPException: If file is too large or save fails
    """
    dataset_dir = output_root() / "datasets"
    os.makedirs(dataset_dir, exist_ok=True)

    saved_path = dataset_dir / f"{uuid.uuid4().hex[:8]}_{Path(file.filename).name}"

    try:
        file_content = await file.read()

        if len(file_content) > MAX_UPLOAD_SIZE_BYTES:
            raise HTTPException(
                status_code=400,
                detail=f"File too large. Max size: {MAX_UPLOAD_SIZE_MB}MB"
            )

        with open(saved_path, "wb") as f:
            f.write(file_content)

        return saved_path

    except HTTPException:
        raise
    except Exception as e:
        raise HTTPException(
            status_code=500,
            detail=f"Failed to save file: {str(e)}"
        )


def validate_dataset_path(path: Path) -> None:
    """
    Custom run data must come from the upload directory

    Raises:
        HTTPException: If the path leaves the datasets directory
    """
    try:
        path.resolve().relative_to((output_root() / "datasets").resolve())
    except ValueError:
        raise HTTPException(
            status_code=403,
            detail="Access denied: custom data must be uploaded through /api/v1/datasets"
        )


def cleanup_file(file_path: Path) -> None:
    """Remove a rejected upload"""
    try:
        if file_path.exists():
            os.remove(file_path)
    except OSError:
        logger.warning("could not remove %s", file_path)


@router.get("/runs/{run_id}/{filename}")
async def serve_artifact(run_id: str, filename: str):
    """
    Serve a run artifact

    Args:
        run_id: Run id returned by POST /runs
        filename: Artifact name (e.g., codes.svg, census.csv, manifest.json)

    Returns:
        Artifact file
    """
    artifact_path = output_root() / run_id / filename

    # Security: Ensure path is within the output root
    try:
        artifact_path.resolve().relative_to(output_root().resolve())
    except ValueError:
        raise HTTPException(
            status_code=403,
            detail="Access denied"
        )

    if not artifact_path.is_file():
        raise HTTPException(
            status_code=404,
            detail=f"Artifact not found: {filename}"
        )

    return FileResponse(
        artifact_path,
        media_type=MEDIA_TYPES.get(artifact_path.suffix.lower(), "application/octet-stream"),
        headers={"Cache-Control": "public, max-age=3600"}
    )
