"""
Dense networks with hand-written reverse-mode gradients
Houses the encoder and decoder of a Spectrum VAE
"""

from dataclasses import dataclass
from typing import List, Protocol, Sequence, Tuple

import numpy as np

from ..errors import InputShapeError
from .domain import SpectrumParams

ACTIVATIONS = ("tanh", "sigmoid", "identity")


def _activate(tag: str, pre: np.ndarray) -> np.ndarray:
    if tag == "tanh":
        return np.tanh(pre)
    if tag == "sigmoid":
        return 1.0 / (1.0 + np.exp(-pre))
    return pre


def _activation_slope(tag: str, post: np.ndarray) -> np.ndarray:
    """Derivative expressed through the activation output"""
    if tag == "tanh":
        return 1.0 - post * post
    if tag == "sigmoid":
        return post * (1.0 - post)
    return np.ones_like(post)


@dataclass
class DenseNet:
    """
    Fully connected network: affine layers with a smooth hidden nonlinearity
    Weights are stored (fan_in, fan_out) so a batch multiplies as X @ W + b
    """
    layer_sizes: Tuple[int, ...]
    weights: List[np.ndarray]
    biases: List[np.ndarray]
    hidden_activation: str = "tanh"
    output_activation: str = "identity"

    def __post_init__(self):
        """Validate the layer chain"""
        self.layer_sizes = tuple(int(size) for size in self.layer_sizes)
        if len(self.layer_sizes) < 2 or min(self.layer_sizes) < 1:
            raise ValueError(f"Need at least two positive layer sizes, got {self.layer_sizes}")
        for tag in (self.hidden_activation, self.output_activation):
            if tag not in ACTIVATIONS:
                raise ValueError(f"Unknown activation '{tag}', expected one of {ACTIVATIONS}")
        if len(self.weights) != len(self.layer_sizes) - 1 or len(self.biases) != len(self.weights):
            raise ValueError("One weight matrix and bias vector per layer transition")
        for index, (weight, bias) in enumerate(zip(self.weights, self.biases)):
            expected = (self.layer_sizes[index], self.layer_sizes[index + 1])
            if weight.shape != expected or bias.shape != (expected[1],):
                raise ValueError(
                    f"Layer {index} has weight {weight.shape} and bias {bias.shape}, expected {expected}"
                )

    @classmethod
    def initialize(
        cls,
        layer_sizes: Sequence[int],
        rng: np.random.Generator,
        hidden_activation: str = "tanh",
        output_activation: str = "identity"
    ) -> "DenseNet":
        """Uniform init in [-s, s] with s = sqrt(6 / (fan_in + fan_out)), zero biases"""
        weights, biases = [], []
        for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
            biases.append(np.zeros(fan_out))
        return cls(tuple(layer_sizes), weights, biases, hidden_activation, output_activation)

    @property
    def input_size(self) -> int:
        return self.layer_sizes[0]

    @property
    def output_size(self) -> int:
        return self.layer_sizes[-1]

    def _layer_activation(self, index: int) -> str:
        return self.output_activation if index == len(self.weights) - 1 else self.hidden_activation

    def _check_input(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim not in (1, 2) or X.shape[-1] != self.input_size:
            raise InputShapeError(
                f"Network expects inputs of width {self.input_size}, got shape {X.shape}"
            )
        return X

    def forward(self, X: np.ndarray) -> np.ndarray:
        """Deterministic output for one vector or a batch of row vectors"""
        X = self._check_input(X)
        out = X
        for index, (weight, bias) in enumerate(zip(self.weights, self.biases)):
            out = _activate(self._layer_activation(index), out @ weight + bias)
        return out

    __call__ = forward

    def forward_cached(self, X: np.ndarray) -> List[np.ndarray]:
        """Forward pass keeping every layer output; element 0 is the input batch"""
        X = self._check_input(X)
        outputs = [np.atleast_2d(X)]
        for index, (weight, bias) in enumerate(zip(self.weights, self.biases)):
            outputs.append(_activate(self._layer_activation(index), outputs[-1] @ weight + bias))
        return outputs

    def backward(
        self,
        outputs: List[np.ndarray],
        d_out: np.ndarray
    ) -> Tuple[List[np.ndarray], List[np.ndarray], np.ndarray]:
        """
        Reverse-mode pass through the cached forward

        Args:
            outputs: Result of forward_cached
            d_out: Loss gradient with respect to the network output, shape (N, out)

        Returns:
            Weight gradients, bias gradients and the gradient with respect to the input
        """
        d_weights: List[np.ndarray] = [np.empty(0)] * len(self.weights)
        d_biases: List[np.ndarray] = [np.empty(0)] * len(self.biases)
        grad = d_out
        for index in reversed(range(len(self.weights))):
            grad = grad * _activation_slope(self._layer_activation(index), outputs[index + 1])
            d_weights[index] = outputs[index].T @ grad
            d_biases[index] = grad.sum(axis=0)
            grad = grad @ self.weights[index].T
        return d_weights, d_biases, grad

    def parameters(self) -> List[np.ndarray]:
        return [*self.weights, *self.biases]

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(p)) for p in self.parameters())

    def copy(self) -> "DenseNet":
        return DenseNet(
            self.layer_sizes,
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            self.hidden_activation,
            self.output_activation,
        )


class SpectrumCodec(Protocol):
    """Anything that encodes to truncated spectra and decodes them back"""
    params: SpectrumParams

    def encode_batch(self, X: np.ndarray) -> np.ndarray: ...

    def decode_batch(self, Z: np.ndarray) -> np.ndarray: ...


@dataclass
class SpectrumVae:
    """
    Encoder producing K pre-activations, truncation, and decoder from K
    """
    encoder: DenseNet
    decoder: DenseNet
    params: SpectrumParams

    def __post_init__(self):
        """Encoder and decoder must meet at the latent width"""
        if self.encoder.output_size != self.params.K or self.decoder.input_size != self.params.K:
            raise ValueError(
                f"Encoder output {self.encoder.output_size} and decoder input "
                f"{self.decoder.input_size} must both equal K={self.params.K}"
            )

    @property
    def data_dim(self) -> int:
        return self.encoder.input_size

    def pre_activations(self, X: np.ndarray) -> np.ndarray:
        return self.encoder.forward(X)

    def encode_batch(self, X: np.ndarray) -> np.ndarray:
        return self.params.truncate_values(np.atleast_2d(self.encoder.forward(X)))

    def decode_batch(self, Z: np.ndarray) -> np.ndarray:
        return np.atleast_2d(self.decoder.forward(Z))

    def copy(self) -> "SpectrumVae":
        return SpectrumVae(self.encoder.copy(), self.decoder.copy(), self.params)
