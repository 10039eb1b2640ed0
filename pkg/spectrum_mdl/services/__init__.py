"""
Services package for Spectrum MDL
Business logic layer
"""

from .autoencoder_service import SpectrumVaeTrainer
from .essence_service import BoundedSupport
from .pipeline_service import PipelineRunner, RunManifest, run_pipeline
from .robustness_service import QualifiedBoxSearch

__all__ = ["SpectrumVaeTrainer", "BoundedSupport", "PipelineRunner", "RunManifest", "run_pipeline", "QualifiedBoxSearch"]
