"""
Tests for entropy and mutual information diagnostics
"""

import numpy as np
import pytest

from spectrum_mdl.errors import EmptyInputError, InputShapeError
from spectrum_mdl.services.info_service import (
    discrete_entropy,
    histogram_2d,
    mutual_information,
    permutation_null,
)


@pytest.fixture
def uniform_points() -> np.ndarray:
    return np.random.default_rng(0).uniform(0.0, 1.0, size=(2000, 2))


def test_constant_sequence_has_zero_entropy():
    assert discrete_entropy([0.1] * 10, (0.0, 1.0), bins=4) == 0.0


def test_one_value_per_bin_gives_two_bits():
    assert discrete_entropy([0.1, 0.3, 0.6, 0.9], (0.0, 1.0), bins=4) == pytest.approx(2.0)


def test_entropy_rejects_empty_sequence():
    with pytest.raises(EmptyInputError):
        discrete_entropy([], (0.0, 1.0))


def test_out_of_range_values_are_clamped():
    hist = histogram_2d([-1.0, 0.5, 2.0], [0.5, 0.5, 0.5], (0.0, 1.0), bins=4)

    assert hist.clamped == 2
    assert hist.total == 3
    assert hist.row_marginal.tolist() == [1, 0, 1, 1]


def test_perfect_reconstruction_keeps_all_information(uniform_points):
    report = mutual_information(uniform_points, uniform_points, [(0.0, 1.0)] * 2, bins=16)

    for row in report.dimensions:
        assert row.mutual_information == pytest.approx(row.entropy_original, abs=1e-9)


def test_small_noise_keeps_most_information(uniform_points):
    noise = np.random.default_rng(1).uniform(-1e-4, 1e-4, size=uniform_points.shape)
    report = mutual_information(uniform_points, uniform_points + noise, [(0.0, 1.0)] * 2, bins=8)

    for row in report.dimensions:
        assert row.mutual_information >= row.entropy_original - 0.1


def test_shuffled_reconstruction_matches_permutation_null(uniform_points):
    bounds = [(0.0, 1.0)] * 2
    shuffled = uniform_points[np.random.default_rng(2).permutation(len(uniform_points))]

    report = mutual_information(uniform_points, shuffled, bounds, bins=16)
    mean, std = permutation_null(uniform_points, uniform_points, bounds, bins=16, permutations=100, seed=3)

    assert abs(report.total - mean) <= 3 * std


def test_mutual_information_is_bounded_by_entropies():
    rng = np.random.default_rng(4)
    X = rng.uniform(0.0, 1.0, size=(500, 3))
    Y = np.clip(X + rng.normal(scale=0.2, size=X.shape), 0.0, 1.0)

    report = mutual_information(X, Y, [(0.0, 1.0)] * 3, bins=10)

    for row in report.dimensions:
        assert 0.0 <= row.mutual_information <= min(row.entropy_original, row.entropy_reconstructed) + 1e-9


def test_mismatched_lengths_are_rejected():
    with pytest.raises(InputShapeError):
        histogram_2d([0.1, 0.2], [0.1], (0.0, 1.0))
    with pytest.raises(InputShapeError):
        mutual_information(np.zeros((3, 2)), np.zeros((4, 2)), [(0.0, 1.0)] * 2)


def test_one_dimensional_input():
    x = np.linspace(0.0, 1.0, 100)

    report = mutual_information(x, x, [(0.0, 1.0)], bins=4)

    assert report.per_dimension == [pytest.approx(2.0)]
