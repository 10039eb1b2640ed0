"""
Pydantic schemas for configuration and transfer objects
Type-safe settings validated before any computation starts
"""

from typing import Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from ..config import (
    DEFAULT_BATCH_SIZE,
    DEFAULT_INFO_BINS,
    DEFAULT_LATTICE_POINTS,
    DEFAULT_LEARNING_RATE,
    DEFAULT_PACKING_RESTARTS,
    DEFAULT_PATTERN_PENALTY_WEIGHT,
    DEFAULT_SEARCH_ITERATIONS,
    DEFAULT_SPARSITY_WEIGHT,
    DEFAULT_STE_BAND,
    LATTICE_POINT_LIMIT,
    MAX_ASCENT_PASSES,
)
from .domain import SpectrumParams


class TrainConfig(BaseModel):
    """
    Training hyperparameters
    The surrogate band must stay below the spiking threshold of the model
    """
    model_config = ConfigDict(frozen=True)

    seed: int = 0
    epochs: int = Field(default=20, ge=0, description="Passes over the data (0 = no-op)")
    batch_size: int = Field(default=DEFAULT_BATCH_SIZE, ge=1)
    learning_rate: float = Field(default=DEFAULT_LEARNING_RATE, gt=0)
    sparsity_weight: float = Field(default=DEFAULT_SPARSITY_WEIGHT, ge=0)
    pattern_penalty_weight: float = Field(default=DEFAULT_PATTERN_PENALTY_WEIGHT, ge=0)
    ste_band: float = Field(default=DEFAULT_STE_BAND, ge=0, description="Surrogate-gradient band below a")

    def check_against(self, params: SpectrumParams) -> None:
        """Raise if the surrogate band reaches zero pre-activation"""
        if self.ste_band >= params.a:
            raise ValueError(f"ste_band={self.ste_band} must be below the spiking threshold a={params.a}")


class CertificationBudget(BaseModel):
    """
    Sampling budget for statistical U-robustness certification
    """
    model_config = ConfigDict(frozen=True)

    base_points: int = Field(default=64, ge=0, description="Random base spectra when not sweeping a lattice")
    perturbs_per_point: int = Field(default=8, ge=0, description="Random interior perturbations per base point")
    corners: bool = Field(default=True, description="Include the signed-corner perturbations")
    seed: int = 0
    max_lattice_points: int = Field(default=DEFAULT_LATTICE_POINTS, ge=1, le=LATTICE_POINT_LIMIT)
    search_iterations: int = Field(default=DEFAULT_SEARCH_ITERATIONS, ge=1, le=64)
    max_ascent_passes: int = Field(default=MAX_ASCENT_PASSES, ge=0)
    workers: int = Field(default=1, ge=1)


class CompatibilityParams(BaseModel):
    """Thresholds of the compatibility definition"""
    model_config = ConfigDict(frozen=True)

    U: float = Field(gt=0, description="Reconstruction error bound")
    gamma1: float = Field(gt=0, description="Minimum number of samples")
    gamma2: float = Field(gt=0, description="Minimum dominant ratio")
    p0: float = Field(gt=0, lt=1, description="Probability of observing every pattern")


class DatasetSpec(BaseModel):
    """Where training and holdout points come from"""
    kind: Literal["two-circles", "ring", "custom"] = "two-circles"
    n: int = Field(default=2000, ge=1)
    holdout_n: int = Field(default=1000, ge=1)
    path: Optional[str] = Field(default=None, description="Point CSV for the custom kind")

    @model_validator(mode="after")
    def require_path_for_custom(self) -> "DatasetSpec":
        if self.kind == "custom" and not self.path:
            raise ValueError("A custom dataset needs a point file path")
        return self


class ModelSpec(BaseModel):
    """Latent layout and network shape"""
    K: int = Field(default=8, ge=1)
    a: float = Field(default=0.2, gt=0)
    b: float = Field(default=1.0, gt=0)
    encoder_hidden: List[int] = Field(default_factory=lambda: [16])
    decoder_hidden: List[int] = Field(default_factory=lambda: [16])
    hidden_activation: Literal["tanh", "sigmoid", "identity"] = "tanh"

    @field_validator("encoder_hidden", "decoder_hidden")
    @classmethod
    def validate_hidden(cls, value: List[int]) -> List[int]:
        if any(size < 1 for size in value):
            raise ValueError("Hidden layer sizes must be positive")
        return value

    @model_validator(mode="after")
    def validate_threshold(self) -> "ModelSpec":
        if self.a >= self.b:
            raise ValueError(f"Spiking threshold a={self.a} must be below bound b={self.b}")
        return self

    def spectrum_params(self) -> SpectrumParams:
        return SpectrumParams(a=self.a, b=self.b, K=self.K)


class EssenceSpec(BaseModel):
    """Support discretization for the essence bounds"""
    grid_res: Optional[float] = Field(default=None, gt=0, description="Defaults to U/4")
    packing_restarts: int = Field(default=DEFAULT_PACKING_RESTARTS, ge=1)


class RunConfig(BaseModel):
    """
    Complete configuration of one pipeline run
    Re-running the same config reproduces every reported number
    """
    seed: int = 0
    dataset: DatasetSpec = Field(default_factory=DatasetSpec)
    model: ModelSpec = Field(default_factory=ModelSpec)
    train: TrainConfig = Field(default_factory=TrainConfig)
    U: float = Field(default=1.0, gt=0)
    gamma1: float = Field(default=100.0, gt=0)
    gamma2: float = Field(default=10.0, gt=0)
    p0: float = Field(default=0.99, gt=0, lt=1)
    certification: CertificationBudget = Field(default_factory=CertificationBudget)
    essence: EssenceSpec = Field(default_factory=EssenceSpec)
    info_bins: int = Field(default=DEFAULT_INFO_BINS, ge=2)
    candidate_seeds: Optional[List[int]] = Field(default=None, description="Defaults to [seed]")
    output_dir: Optional[str] = None

    @model_validator(mode="after")
    def validate_cross_fields(self) -> "RunConfig":
        if self.train.ste_band >= self.model.a:
            raise ValueError(f"train.ste_band={self.train.ste_band} must be below a={self.model.a}")
        if self.essence.grid_res is not None and self.essence.grid_res > self.U / 4:
            raise ValueError(f"essence.grid_res={self.essence.grid_res} must not exceed U/4={self.U / 4}")
        if self.candidate_seeds is not None and not self.candidate_seeds:
            raise ValueError("candidate_seeds must not be empty")
        return self

    @property
    def seeds(self) -> List[int]:
        return list(self.candidate_seeds) if self.candidate_seeds else [self.seed]

    @property
    def grid_res(self) -> float:
        return self.essence.grid_res if self.essence.grid_res is not None else self.U / 4

    def compatibility(self) -> CompatibilityParams:
        return CompatibilityParams(U=self.U, gamma1=self.gamma1, gamma2=self.gamma2, p0=self.p0)


class NetworkDocument(BaseModel):
    """Serialized DenseNet with row-major parameters"""
    layer_sizes: List[int]
    hidden_activation: str
    output_activation: str
    weights: List[List[List[float]]]
    biases: List[List[float]]


class ModelDocument(BaseModel):
    """Portable model file"""
    format_version: int
    K: int
    a: float
    b: float
    encoder: NetworkDocument
    decoder: NetworkDocument


class DominantRatioRequest(BaseModel):
    """Pattern counts keyed by label, e.g. {"{2,3}": 5000, "{2,9}": 5000}"""
    counts: Dict[str, int]
    p0: float = Field(default=0.99, gt=0, lt=1)
    sampling: Literal["without", "with"] = "without"

    @field_validator("counts")
    @classmethod
    def validate_counts(cls, value: Dict[str, int]) -> Dict[str, int]:
        if not value:
            raise ValueError("counts must not be empty")
        if any(count < 1 for count in value.values()):
            raise ValueError("every pattern count must be positive")
        return value


class DominantRatioResponse(BaseModel):
    n: int
    m: int
    n0: int
    delta: str = Field(description="Exact rational N/N0")
    delta_value: float
    probability_at_n0: float
    probability_at_n0_minus_1: float


class DatasetUploadResponse(BaseModel):
    path: str
    n_points: int
    dimension: int


class ErrorResponse(BaseModel):
    """
    Error response schema for failed requests
    Provides clear error information to client
    """
    error: str = Field(
        description="Error message describing what went wrong"
    )
    detail: Optional[str] = Field(
        default=None,
        description="Additional error details for debugging"
    )
