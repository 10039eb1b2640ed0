"""
Spectrum VAE service
Forward evaluation, encoding, reconstruction and gradient-descent training
Single Responsibility: the encoder/decoder pair and its optimization
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from ..config import GRADIENT_CHECK_FLOOR, GRADIENT_CHECK_MARGIN
from ..errors import (
    InputShapeError,
    InvalidInputError,
    InvalidSpectrumError,
    RejectedGradientPointError,
    TrainingDivergenceError,
)
from ..models.domain import Spectrum, SpectrumParams
from ..models.network import DenseNet, SpectrumVae
from ..models.schemas import TrainConfig
from .spectrum_service import truncate, truncate_batch

logger = logging.getLogger(__name__)

MONITOR_BATCH_SIZE = 64


def build_model(
    params: SpectrumParams,
    data_dim: int,
    encoder_hidden: Sequence[int] = (16,),
    decoder_hidden: Sequence[int] = (16,),
    hidden_activation: str = "tanh",
    seed: int = 0
) -> SpectrumVae:
    """
    Create an untrained Spectrum VAE with seeded uniform initialization

    Args:
        params: Spiking threshold, bound and latent width
        data_dim: Dimension D of the data space
        encoder_hidden: Hidden widths between D and K
        decoder_hidden: Hidden widths between K and D
        hidden_activation: Smooth nonlinearity tag for hidden layers
        seed: Initialization seed

    Returns:
        SpectrumVae with identity output activations on both networks
    """
    rng = np.random.default_rng(seed)
    encoder = DenseNet.initialize([data_dim, *encoder_hidden, params.K], rng, hidden_activation)
    decoder = DenseNet.initialize([params.K, *decoder_hidden, data_dim], rng, hidden_activation)
    return SpectrumVae(encoder, decoder, params)


def forward(net: DenseNet, x: np.ndarray) -> np.ndarray:
    """Deterministic output of the last layer for a single input vector"""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise InputShapeError(f"forward expects a single vector, got shape {x.shape}")
    return net.forward(x)


def encode(model: SpectrumVae, x: np.ndarray) -> Spectrum:
    """Truncated encoder output for one data vector"""
    return truncate(forward(model.encoder, x), model.params)


def decode(model: SpectrumVae, z: Union[Spectrum, np.ndarray]) -> np.ndarray:
    """Decoder output for one spectrum"""
    values = z.values if isinstance(z, Spectrum) else np.asarray(z, dtype=np.float64)
    return forward(model.decoder, values)


def reconstruct(model: SpectrumVae, x: np.ndarray) -> np.ndarray:
    return decode(model, encode(model, x))


def reconstruction_error(x: np.ndarray, x_tilde: np.ndarray) -> float:
    """
    Euclidean distance between a sample and its reconstruction

    Raises:
        InputShapeError: If the vectors differ in length
    """
    x = np.asarray(x, dtype=np.float64)
    x_tilde = np.asarray(x_tilde, dtype=np.float64)
    if x.shape != x_tilde.shape:
        raise InputShapeError(f"Cannot compare shapes {x.shape} and {x_tilde.shape}")
    return float(np.sqrt(np.sum((x - x_tilde) ** 2)))


def reconstruction_errors(model, X: np.ndarray) -> np.ndarray:
    """Per-row Euclidean reconstruction errors of a batch"""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    X_tilde = model.decode_batch(model.encode_batch(X))
    return np.sqrt(np.sum((X - X_tilde) ** 2, axis=1))


def pattern_entropy(spikes: np.ndarray) -> Tuple[float, np.ndarray]:
    """
    Empirical pattern entropy of a batch and its relaxed gradient

    Patterns are compared through sim(n, m) = prod_k [g_nk g_mk + (1 - g_nk)(1 - g_mk)];
    with hard indicators mean_m sim(n, m) is the frequency of the pattern of n,
    so H = -mean_n log2(mean_m sim(n, m)) is exactly the batch pattern entropy.

    Args:
        spikes: (B, K) spike indicators g

    Returns:
        Entropy in bits and dH/dg of shape (B, K)
    """
    B, K = spikes.shape
    agree = spikes[:, None, :] * spikes[None, :, :] + (1.0 - spikes[:, None, :]) * (1.0 - spikes[None, :, :])
    frequency = np.prod(agree, axis=2).mean(axis=1)
    entropy = float(-np.mean(np.log2(frequency)))

    d_frequency = -1.0 / (B * frequency * np.log(2.0))
    signs = 2.0 * spikes - 1.0
    d_spikes = np.zeros_like(spikes)
    for k in range(K):
        others = np.prod(np.delete(agree, k, axis=2), axis=2)
        d_spikes[:, k] = (d_frequency * (others @ signs[:, k]) + others @ (d_frequency * signs[:, k])) / B
    return entropy, d_spikes


@dataclass(frozen=True)
class LossBreakdown:
    """Terms of the training objective for one batch"""
    reconstruction: float
    sparsity: float
    pattern_entropy: float
    total: float


@dataclass
class TrainingHistory:
    epoch_losses: List[float] = field(default_factory=list)
    initial_mean_error: Optional[float] = None
    final_mean_error: Optional[float] = None


class SpectrumVaeTrainer:
    """
    Mini-batch gradient descent with a straight-through truncation gradient
    Deterministic given the config seed
    """

    def __init__(self, config: TrainConfig):
        """
        Initialize trainer

        Args:
            config: Validated training hyperparameters
        """
        self._config = config
        self.history = TrainingHistory()

    def train(self, model: SpectrumVae, data: np.ndarray) -> SpectrumVae:
        """
        Train a copy of the model on the data

        Args:
            model: Model to start from, left untouched
            data: (N, D) array of samples from the bounded support

        Returns:
            Trained model

        Raises:
            TrainingDivergenceError: If a batch loss or the parameters become non-finite
        """
        self._config.check_against(model.params)
        X = self._check_data(model, data)
        trained = model.copy()
        self.history = TrainingHistory()
        if self._config.epochs == 0:
            return trained

        rng = np.random.default_rng(self._config.seed)
        monitor = X[:MONITOR_BATCH_SIZE]
        self.history.initial_mean_error = float(reconstruction_errors(trained, X).mean())

        for epoch in range(self._config.epochs):
            order = rng.permutation(len(X))
            batch_losses = []
            for batch_index, start in enumerate(range(0, len(X), self._config.batch_size)):
                batch = X[order[start:start + self._config.batch_size]]
                try:
                    losses, grads = self.loss_and_gradients(trained, batch, self._config.ste_band)
                except InvalidInputError as e:
                    raise TrainingDivergenceError(epoch, batch_index, float("nan")) from e
                if not np.isfinite(losses.total):
                    raise TrainingDivergenceError(epoch, batch_index, losses.total)
                self._apply_update(trained, grads)
                if not (trained.encoder.all_finite() and trained.decoder.all_finite()):
                    raise TrainingDivergenceError(epoch, batch_index, float("nan"))
                batch_losses.append(losses.total)

            try:
                self._check_monitor(trained, monitor)
            except InvalidInputError as e:
                raise TrainingDivergenceError(epoch, batch_index, float("nan")) from e
            epoch_loss = float(np.mean(batch_losses))
            self.history.epoch_losses.append(epoch_loss)
            logger.info("epoch %d/%d loss=%.6f", epoch + 1, self._config.epochs, epoch_loss)

        self.history.final_mean_error = float(reconstruction_errors(trained, X).mean())
        return trained

    def loss_and_gradients(
        self,
        model: SpectrumVae,
        X: np.ndarray,
        ste_band: float
    ) -> Tuple[LossBreakdown, List[np.ndarray]]:
        """
        Batch objective and its parameter gradients

        Returns:
            Loss terms and gradients ordered as encoder weights, encoder biases,
            decoder weights, decoder biases
        """
        params = model.params
        sparsity_weight = self._config.sparsity_weight
        pattern_weight = self._config.pattern_penalty_weight
        batch = len(X)

        encoder_outputs = model.encoder.forward_cached(X)
        z_pre = encoder_outputs[-1]
        z = truncate_batch(z_pre, params)
        decoder_outputs = model.decoder.forward_cached(z)
        diff = decoder_outputs[-1] - X

        reconstruction = float(np.sum(diff * diff) / batch)
        d_dec_w, d_dec_b, d_z = model.decoder.backward(decoder_outputs, 2.0 * diff / batch)

        # Straight-through: identity on [a - band, b], flat elsewhere
        floor = params.a - ste_band
        d_z_pre = d_z * ((z_pre >= floor) & (z_pre <= params.b))

        sparsity = 0.0
        if sparsity_weight > 0:
            excess = np.maximum(z_pre - floor, 0.0)
            sparsity = float(excess.mean())
            d_z_pre = d_z_pre + sparsity_weight * (z_pre > floor) / z_pre.size

        entropy = 0.0
        if pattern_weight > 0:
            spikes = (z_pre >= params.a).astype(np.float64)
            entropy, d_spikes = pattern_entropy(spikes)
            if ste_band > 0:
                ramp = ((z_pre >= floor) & (z_pre < params.a)) / ste_band
                d_z_pre = d_z_pre + pattern_weight * d_spikes * ramp

        d_enc_w, d_enc_b, _ = model.encoder.backward(encoder_outputs, d_z_pre)
        total = reconstruction + sparsity_weight * sparsity + pattern_weight * entropy
        losses = LossBreakdown(reconstruction, sparsity, entropy, total)
        return losses, [*d_enc_w, *d_enc_b, *d_dec_w, *d_dec_b]

    def _apply_update(self, model: SpectrumVae, grads: List[np.ndarray]) -> None:
        for parameter, grad in zip(self._parameters(model), grads):
            parameter -= self._config.learning_rate * grad

    @staticmethod
    def _parameters(model: SpectrumVae) -> List[np.ndarray]:
        return [*model.encoder.weights, *model.encoder.biases, *model.decoder.weights, *model.decoder.biases]

    @staticmethod
    def _check_data(model: SpectrumVae, data: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(data, dtype=np.float64))
        if X.shape[1] != model.data_dim:
            raise InputShapeError(f"Model expects {model.data_dim}-D samples, got shape {X.shape}")
        if len(X) == 0 or not np.all(np.isfinite(X)):
            raise ValueError("Training data must be a nonempty array of finite values")
        return X

    @staticmethod
    def _check_monitor(model: SpectrumVae, monitor: np.ndarray) -> None:
        """Encoded monitor entries must stay in {0} and [a, b]"""
        z = model.encode_batch(monitor)
        nonzero = z != 0.0
        inside = (z >= model.params.a) & (z <= model.params.b)
        if np.any(nonzero & ~inside):
            raise InvalidSpectrumError("Encoder produced a spectrum outside {0} and [a, b]")

    def gradient_check(self, model: SpectrumVae, x: np.ndarray, h: float = 1e-5) -> float:
        """
        Compare analytic gradients of the squared reconstruction error with
        central finite differences

        Args:
            model: Model to check, left untouched
            x: Sample to differentiate at
            h: Finite-difference step

        Returns:
            Maximum relative deviation over all parameters

        Raises:
            RejectedGradientPointError: If a pre-activation lies within 10h of a or b
        """
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        params = model.params
        z_pre = model.pre_activations(x)
        margin = GRADIENT_CHECK_MARGIN * h
        if np.any(np.abs(z_pre - params.a) < margin) or np.any(np.abs(z_pre - params.b) < margin):
            raise RejectedGradientPointError(
                f"Pre-activations {np.round(z_pre.ravel(), 6).tolist()} lie within {margin} of a or b"
            )

        checked = model.copy()
        plain = SpectrumVaeTrainer(TrainConfig(sparsity_weight=0.0, pattern_penalty_weight=0.0, ste_band=0.0))
        _, analytic = plain.loss_and_gradients(checked, x, ste_band=0.0)

        def squared_error() -> float:
            return float(np.sum((checked.decode_batch(checked.encode_batch(x)) - x) ** 2))

        worst = 0.0
        for parameter, grad in zip(self._parameters(checked), analytic):
            flat, flat_grad = parameter.reshape(-1), grad.reshape(-1)
            for index in range(flat.size):
                original = flat[index]
                flat[index] = original + h
                upper = squared_error()
                flat[index] = original - h
                lower = squared_error()
                flat[index] = original
                numeric = (upper - lower) / (2.0 * h)
                scale = max(abs(flat_grad[index]), abs(numeric), GRADIENT_CHECK_FLOOR)
                worst = max(worst, abs(flat_grad[index] - numeric) / scale)
        return worst


def train(model: SpectrumVae, data: np.ndarray, config: TrainConfig) -> SpectrumVae:
    """Functional entry point around SpectrumVaeTrainer"""
    return SpectrumVaeTrainer(config).train(model, data)


def gradient_check(model: SpectrumVae, x: np.ndarray, h: float = 1e-5) -> float:
    return SpectrumVaeTrainer(TrainConfig()).gradient_check(model, x, h)
