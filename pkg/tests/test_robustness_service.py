"""
Tests for perturbation, quantization grids and certification
"""

import math
from fractions import Fraction

import numpy as np
import pytest

from spectrum_mdl.errors import InvalidBoxError, PatternMismatchError
from spectrum_mdl.models.domain import PerturbBox, Spectrum, SpectrumParams, SpikingPattern
from spectrum_mdl.models.schemas import CertificationBudget
from spectrum_mdl.services.robustness_service import (
    adjacent_code_deviation,
    build_grid,
    build_suite,
    certify,
    certify_pattern,
    complexity,
    perturb_truncate,
    quantize,
    quantize_values,
    replay_scaled,
    representation_set,
    segment_count,
)


def test_perturb_truncate_clamps_to_a_not_zero(params):
    """Spiking dimensions never fall silent under perturbation"""
    z = Spectrum(np.array([0.5, 0.0, 0.3, 0.0]), params)
    pattern = SpikingPattern((1, 3))

    perturbed = perturb_truncate(z, pattern, [-0.6, 0.9], params)

    assert perturbed.values.tolist() == [0.2, 0.0, 1.0, 0.0]


def test_perturb_truncate_keeps_pattern(params):
    rng = np.random.default_rng(0)
    pattern = SpikingPattern((2, 4))
    for _ in range(200):
        values = np.zeros(params.K)
        values[pattern.indices] = rng.uniform(params.a, params.b, size=2)
        perturbed = perturb_truncate(Spectrum(values, params), pattern, rng.uniform(-2, 2, size=2), params)
        assert np.array_equal(perturbed.values != 0, values != 0)


def test_perturb_truncate_rejects_other_pattern(params):
    z = Spectrum(np.array([0.5, 0.0, 0.3, 0.0]), params)

    with pytest.raises(PatternMismatchError):
        perturb_truncate(z, SpikingPattern((1,)), [0.1], params)


@pytest.mark.parametrize("width, alpha, expected", [
    (1.0, 0.5, 2),
    (1.0, 0.25, 3),
    (1.0, 0.3, 2),
    (1.0, 1.0, 1),
    (0.8, 0.4, 2),
])
def test_segment_count(width, alpha, expected):
    assert segment_count(width, alpha) == expected


def test_segment_count_is_smallest_integer_above_ratio():
    """Exact rational check over random widths and half-widths"""
    rng = np.random.default_rng(3)
    for _ in range(10_000):
        width = float(rng.uniform(0.01, 5.0))
        alpha = float(rng.uniform(1e-4, 2 * width))
        ratio = Fraction(width) / (2 * Fraction(alpha))
        count = segment_count(width, alpha)
        assert count > ratio >= count - 1


def test_segment_count_rejects_zero_alpha():
    with pytest.raises(InvalidBoxError):
        segment_count(1.0, 0.0)


def test_box_rejects_non_positive_alpha():
    with pytest.raises(InvalidBoxError):
        PerturbBox(SpikingPattern((1,)), (0.0,))


def test_build_grid_counts_and_size():
    params = SpectrumParams(a=0.25, b=1.0, K=3)

    grid = build_grid(SpikingPattern((1, 2)), (0.375, 0.125), params)

    assert grid.counts == (2, 4)
    assert grid.size == 8
    assert representation_set(grid).size == 8
    assert representation_set(grid).code_matrix().shape == (8, 3)


def test_quantize_ties_go_to_lower_scale():
    scales = np.array([0.375, 0.625, 0.875])

    assert quantize_values(np.array([0.5]), scales).tolist() == [0.375]
    assert quantize_values(np.array([0.75]), scales).tolist() == [0.625]


def test_quantization_error_is_within_alpha():
    """|z - q(z)| <= alpha on every spiking dimension"""
    rng = np.random.default_rng(4)
    for _ in range(50):
        a = float(rng.uniform(0.01, 1.0))
        b = a + float(rng.uniform(0.01, 2.0))
        params = SpectrumParams(a=a, b=b, K=2)
        alpha = float(rng.uniform(1e-3, b - a))
        grid = build_grid(SpikingPattern((1, 2)), (alpha, alpha), params)
        for values in rng.uniform(a, b, size=(100, 2)):
            z = Spectrum(values, params)
            assert np.max(np.abs(quantize(z, grid).values - values)) <= alpha + 1e-12


def test_quantize_keeps_the_pattern(params):
    grid = build_grid(SpikingPattern((2,)), (0.1,), params)
    z = Spectrum(np.array([0.0, 0.33, 0.0, 0.0]), params)

    assert np.flatnonzero(quantize(z, grid).values).tolist() == [1]


def test_quantize_rejects_other_pattern(params):
    grid = build_grid(SpikingPattern((2,)), (0.1,), params)

    with pytest.raises(PatternMismatchError):
        quantize(Spectrum(np.array([0.5, 0.0, 0.0, 0.0]), params), grid)


def test_constant_decoder_has_unit_complexity(constant_codec, small_budget):
    params = constant_codec.params
    for dims in [(1,), (1, 2), (1, 2, 3, 4)]:
        value = complexity(constant_codec.decode_batch, SpikingPattern(dims), 0.05, small_budget, params)
        assert value == 1


def test_dormant_pattern_has_unit_complexity(constant_codec, small_budget):
    record = certify_pattern(constant_codec.decode_batch, SpikingPattern(), 0.05, small_budget, constant_codec.params)

    assert record.value == 1
    assert record.certified


def test_linear_decoder_matches_analytic_complexity(linear_codec_factory):
    """A decoder c * z_1 is U-robust exactly up to alpha = U / |c|"""
    budget = CertificationBudget(base_points=16, perturbs_per_point=4, max_lattice_points=2000, search_iterations=16)
    rng = np.random.default_rng(5)
    for _ in range(20):
        slope = float(rng.uniform(0.5, 4.0))
        U = float(rng.uniform(0.05, 0.5))
        codec = linear_codec_factory(slope)
        width = codec.params.width
        analytic = 1 if U / slope >= width else math.floor(width * slope / (2 * U)) + 1

        value = complexity(codec.decode_batch, SpikingPattern((1,)), U, budget, codec.params)

        assert abs(value - analytic) <= 1


def test_uncertifiable_pattern_has_infinite_complexity(params, small_budget):
    """A decoder that jumps at every scale fails even at the smallest box"""
    def jumpy(Z):
        return np.sin(1e9 * Z[:, :1])

    value = complexity(jumpy, SpikingPattern((1,)), 1e-3, small_budget, params)

    assert value == math.inf


def test_certificate_without_tests_is_vacuous(constant_codec):
    pattern = SpikingPattern((1,))
    budget = CertificationBudget(corners=False, perturbs_per_point=0)

    certificate = certify(constant_codec.decode_batch, pattern, PerturbBox(pattern, (0.1,)), 0.05, budget, constant_codec.params)

    assert certificate.vacuous
    assert not certificate.valid


def test_certificate_is_reproducible(linear_codec_factory, small_budget):
    codec = linear_codec_factory(2.0)
    pattern = SpikingPattern((1,))
    box = PerturbBox(pattern, (0.3,))

    first = certify(codec.decode_batch, pattern, box, 0.1, small_budget, codec.params)
    second = certify(codec.decode_batch, pattern, box, 0.1, small_budget, codec.params)

    assert first == second
    assert first.violations > 0


def test_threaded_certification_matches_serial(linear_codec_factory):
    codec = linear_codec_factory(2.0)
    pattern = SpikingPattern((1,))
    box = PerturbBox(pattern, (0.01,))
    serial = CertificationBudget(max_lattice_points=100, base_points=20_000)
    threaded = serial.model_copy(update={"workers": 4})

    assert certify(codec.decode_batch, pattern, box, 0.1, serial, codec.params) == \
        certify(codec.decode_batch, pattern, box, 0.1, threaded, codec.params)


def test_adjacent_codes_of_linear_decoder(linear_codec_factory):
    codec = linear_codec_factory(2.0)
    grid = build_grid(SpikingPattern((1,)), (0.1,), codec.params)

    deviation = adjacent_code_deviation(codec.decode_batch, grid)

    assert deviation == pytest.approx(2.0 * codec.params.width / grid.counts[0])


def test_each_base_point_gets_its_own_interior_draws():
    params = SpectrumParams(a=0.2, b=1.0, K=4)
    pattern = SpikingPattern((1, 2, 3, 4))
    box = PerturbBox(pattern, (0.1, 0.1, 0.1, 0.1))
    budget = CertificationBudget(base_points=8, perturbs_per_point=5)

    suite = build_suite(pattern, box, budget, params)
    again = build_suite(pattern, box, budget, params)

    corners = 2 ** pattern.size
    assert suite.eps.shape == (8, corners + 5, 4)
    interior = suite.eps[:, corners:, :]
    assert not np.array_equal(interior[0], interior[1])
    assert len({point.tobytes() for point in interior}) == 8
    assert np.array_equal(suite.eps[:, :corners, :][0], suite.eps[:, :corners, :][7])
    assert np.array_equal(suite.base, again.base)
    assert np.array_equal(suite.eps, again.eps)


def test_lattice_suite_draws_differ_per_point():
    params = SpectrumParams(a=0.2, b=1.0, K=2)
    pattern = SpikingPattern((1, 2))
    box = PerturbBox(pattern, (0.2, 0.2))

    suite = build_suite(pattern, box, CertificationBudget(perturbs_per_point=3), params)

    assert suite.lattice
    interior = suite.eps[:, 4:, :]
    assert len({point.tobytes() for point in interior}) == len(suite.base)


def _bent_decoder(Z):
    """Increasing and concave on [a, b] for a = 0.2"""
    return 2.0 * np.tanh(3.0 * (Z[:, :1] - 0.2))


def test_half_scale_replay_of_certified_box_has_no_violations(small_budget):
    params = SpectrumParams(a=0.2, b=1.0, K=1)
    for U in (0.1, 0.3, 0.6):
        record = certify_pattern(_bent_decoder, SpikingPattern((1,)), U / 2, small_budget, params)
        assert record.certified

        replay = replay_scaled(_bent_decoder, record, small_budget, params, scale=0.5)

        assert replay.tests > 0
        assert replay.violations == 0
        assert replay.max_observed_deviation <= record.certificate.max_observed_deviation


def test_half_scale_replay_on_trained_model(trained_model, two_circle_points, small_budget):
    pattern = SpikingPattern.of(np.flatnonzero(trained_model.encode_batch(two_circle_points[:1])[0]) + 1)
    record = certify_pattern(trained_model.decode_batch, pattern, 0.5, small_budget, trained_model.params)
    if pattern.is_dormant:
        assert replay_scaled(trained_model.decode_batch, record, small_budget, trained_model.params) is None
        return

    replay = replay_scaled(trained_model.decode_batch, record, small_budget, trained_model.params, scale=0.5)

    assert record.certified
    assert replay.violations == 0


def test_replay_skips_dormant_and_uncertified_records(params, small_budget):
    def jumpy(Z):
        return np.sin(1e9 * Z[:, :1])

    dormant = certify_pattern(jumpy, SpikingPattern(), 1e-3, small_budget, params)
    failed = certify_pattern(jumpy, SpikingPattern((1,)), 1e-3, small_budget, params)

    assert replay_scaled(jumpy, dormant, small_budget, params) is None
    assert replay_scaled(jumpy, failed, small_budget, params) is None


def test_adjacent_codes_of_grid_certified_at_half_u_stay_within_u(small_budget):
    """Neighbouring midpoints each sit within one certified half-width of a shared point"""
    params = SpectrumParams(a=0.2, b=1.0, K=1)
    for U in (0.1, 0.3, 0.6):
        record = certify_pattern(_bent_decoder, SpikingPattern((1,)), U / 2, small_budget, params)
        assert record.grid.counts[0] > 1

        assert adjacent_code_deviation(_bent_decoder, record.grid) <= U
