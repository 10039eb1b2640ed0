"""
Exception hierarchy for Spectrum MDL
Each error also derives from the builtin a caller would expect
"""

from typing import Optional


class SpectrumMdlError(Exception):
    """Base class for all package errors"""


class InputShapeError(SpectrumMdlError, ValueError):
    """Vector length does not match the layer or partner vector"""


class InvalidInputError(SpectrumMdlError, ValueError):
    """Non-finite or otherwise unusable numeric input"""


class InvalidSpectrumError(SpectrumMdlError, ValueError):
    """Entry outside {0} and [a, b]"""


class PatternMismatchError(SpectrumMdlError, ValueError):
    """Spectrum is not preserved by the given spiking pattern"""


class InvalidBoxError(SpectrumMdlError, ValueError):
    """Perturbation half-widths are not positive or do not fit the pattern"""


class EmptyInputError(SpectrumMdlError, ValueError):
    """An operation received no data"""


class RejectedGradientPointError(SpectrumMdlError, ValueError):
    """Gradient check point sits too close to the truncation discontinuity"""


class ResolutionError(SpectrumMdlError, ValueError):
    """Essence grid is too coarse or exceeds the point budget"""


class MixedFamilyError(SpectrumMdlError, ValueError):
    """Candidates with different (a, b, K) cannot be compared"""


class ConfigError(SpectrumMdlError, ValueError):
    """Unknown dataset spec, malformed model file or invalid run setup"""


class TrainingDivergenceError(SpectrumMdlError, RuntimeError):
    """Training loss became non-finite"""

    def __init__(self, epoch: int, batch_index: int, loss: float):
        self.epoch = epoch
        self.batch_index = batch_index
        self.loss = loss
        super().__init__(
            f"Training diverged at epoch {epoch}, batch {batch_index} (loss={loss})"
        )


class NotCertifiedError(SpectrumMdlError, RuntimeError):
    """Quantization was requested for a pattern without a certified grid"""


class StageError(SpectrumMdlError, RuntimeError):
    """A pipeline stage failed"""

    def __init__(self, stage: str, message: Optional[str] = None):
        self.stage = stage
        super().__init__(f"Stage '{stage}' failed: {message}" if message else f"Stage '{stage}' failed")
