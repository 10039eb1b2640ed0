"""
Shared fixtures: small spectrum parameters, stub codecs and a tiny trained model
"""

from dataclasses import dataclass
from typing import Callable

import numpy as np
import pytest

from spectrum_mdl.models.domain import SpectrumParams
from spectrum_mdl.models.network import DenseNet, SpectrumVae
from spectrum_mdl.models.schemas import CertificationBudget, DatasetSpec, ModelSpec, RunConfig, TrainConfig
from spectrum_mdl.services.autoencoder_service import build_model, train
from spectrum_mdl.services.dataset_service import gen_data
from spectrum_mdl.services.spectrum_service import truncate_batch


@dataclass
class StubCodec:
    """Codec built from plain functions on batches"""
    params: SpectrumParams
    encoder: Callable[[np.ndarray], np.ndarray]
    decoder: Callable[[np.ndarray], np.ndarray]

    def encode_batch(self, X: np.ndarray) -> np.ndarray:
        return truncate_batch(self.encoder(np.atleast_2d(X)), self.params)

    def decode_batch(self, Z: np.ndarray) -> np.ndarray:
        return np.atleast_2d(self.decoder(np.atleast_2d(Z)))


@pytest.fixture
def params() -> SpectrumParams:
    return SpectrumParams(a=0.2, b=1.0, K=4)


@pytest.fixture
def small_budget() -> CertificationBudget:
    return CertificationBudget(base_points=16, perturbs_per_point=4, max_lattice_points=2000, search_iterations=10)


@pytest.fixture
def identity_codec() -> StubCodec:
    """
    1-D data x in [0.2, 1] maps to dimension 1 with value x and decodes back exactly
    """
    params = SpectrumParams(a=0.2, b=1.0, K=2)

    def encoder(X):
        return np.column_stack([X[:, 0], np.zeros(len(X))])

    def decoder(Z):
        return Z[:, :1]

    return StubCodec(params, encoder, decoder)


@pytest.fixture
def constant_codec(params) -> StubCodec:
    """Every spectrum decodes to the same point"""
    def encoder(X):
        return np.tile(X[:, :1], (1, params.K))

    def decoder(Z):
        return np.zeros((len(Z), 2))

    return StubCodec(params, encoder, decoder)


@pytest.fixture
def linear_codec_factory():
    """Codec whose decoder is slope * z_1 on one spiking dimension"""
    def make(slope: float) -> StubCodec:
        params = SpectrumParams(a=0.2, b=1.0, K=1)
        return StubCodec(params, lambda X: X[:, :1], lambda Z: slope * Z[:, :1])
    return make


@pytest.fixture(scope="session")
def two_circle_points() -> np.ndarray:
    return gen_data("two-circles", 300, seed=0)


@pytest.fixture(scope="session")
def trained_model(two_circle_points):
    params = SpectrumParams(a=0.2, b=1.0, K=4)
    model = build_model(params, 2, (12,), (12,), seed=1)
    return train(model, two_circle_points, TrainConfig(seed=1, epochs=5, learning_rate=0.01))


@pytest.fixture
def split_codec() -> StubCodec:
    """Spikes dimension 1 left of x = 5 and dimension 2 from there on"""
    params = SpectrumParams(a=0.2, b=1.0, K=2)

    def encoder(X):
        right = (X[:, 0] >= 5.0).astype(float)
        return 0.5 * np.column_stack([1.0 - right, right])

    return StubCodec(params, encoder, lambda Z: np.zeros((len(Z), 2)))


@pytest.fixture
def small_config() -> RunConfig:
    """A run that finishes in seconds"""
    return RunConfig(
        seed=0,
        dataset=DatasetSpec(kind="two-circles", n=200, holdout_n=100),
        model=ModelSpec(K=4, encoder_hidden=[8], decoder_hidden=[8]),
        train=TrainConfig(epochs=3),
        U=3.0,
        gamma1=100,
        gamma2=1.0,
        certification=CertificationBudget(
            base_points=16, perturbs_per_point=4, max_lattice_points=500, search_iterations=8
        ),
        info_bins=16,
    )


@pytest.fixture
def circle_splitter() -> SpectrumVae:
    """
    Pinned Spectrum VAE for the two-circle support: dimension 1 spikes on the
    left disk, dimension 2 on the right, and each pattern decodes to its centre
    """
    params = SpectrumParams(a=0.2, b=1.0, K=2)
    # z = (3.5 - x1, x1 - 3.5): at least 0.3 on the own disk, at most -0.3 on the other
    encoder = DenseNet(
        (2, 2),
        [np.array([[-1.0, 1.0], [0.0, 0.0]])],
        [np.array([3.5, -3.5])],
    )
    # Steep tanh turns any spiking value into exactly +1 and a dormant one into -1
    decoder = DenseNet(
        (2, 2, 2),
        [np.diag([1000.0, 1000.0]), np.array([[1.0, 1.0], [2.5, 1.0]])],
        [np.array([-100.0, -100.0]), np.array([3.5, 2.0])],
    )
    return SpectrumVae(encoder, decoder, params)
