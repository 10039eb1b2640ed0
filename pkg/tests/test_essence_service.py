"""
Tests for essence bounds, code usage and on-boundary pairs
"""

import math

import numpy as np
import pytest

from spectrum_mdl.errors import NotCertifiedError, ResolutionError
from spectrum_mdl.models.domain import SpectrumParams, SpikingPattern
from spectrum_mdl.models.reports import (
    DescriptionLengthReport,
    EssenceBounds,
    PatternComplexity,
    PatternUsage,
    UsageAccounting,
)
from spectrum_mdl.services.essence_service import (
    essence_bounds,
    essence_lower_bound_check,
    interval_support,
    max_cover_distance,
    on_boundary_pairs,
    point_cloud_support,
    point_support,
    redundancy_score,
    ring_support,
    two_circles_support,
    used_codes,
)
from spectrum_mdl.services.mdl_service import description_length


def test_unit_interval_needs_two_balls():
    eb = essence_bounds(interval_support(0.0, 1.0), 0.25, grid_res=0.0625)

    assert eb.lower == 2
    assert eb.upper == 2
    assert eb.cover_points.ravel().tolist() == [0.25, 0.75]


def test_single_point_support():
    eb = essence_bounds(point_support([0.5, 0.0]), 0.1)

    assert (eb.lower, eb.upper) == (1, 1)


def test_two_circle_cover_reaches_every_grid_point():
    support = two_circles_support()
    U = 0.3

    eb = essence_bounds(support, U)
    grid = support.grid_points(U / 4)

    assert 1 <= eb.lower <= eb.upper
    assert max_cover_distance(grid, eb.cover_points) <= U + 1e-12
    assert np.all(support.membership(eb.cover_points))


def test_packing_points_are_separated():
    eb = essence_bounds(ring_support(), 0.4)
    distances = np.linalg.norm(eb.packing_points[:, None] - eb.packing_points[None, :], axis=2)

    assert np.all(distances[np.triu_indices(eb.lower, 1)] > 0.8)


def test_essence_is_seeded():
    first = essence_bounds(ring_support(), 0.4, seed=5)
    second = essence_bounds(ring_support(), 0.4, seed=5)

    assert first.lower == second.lower
    assert np.array_equal(first.cover_points, second.cover_points)


def test_coarse_grid_is_rejected():
    with pytest.raises(ResolutionError):
        essence_bounds(interval_support(), 0.25, grid_res=0.1)


def test_grid_budget_is_enforced():
    with pytest.raises(ResolutionError):
        essence_bounds(interval_support(), 1e-7)


def test_point_cloud_uses_its_atoms():
    points = np.array([[0.0, 0.0], [0.05, 0.0], [3.0, 0.0]])

    eb = essence_bounds(point_cloud_support(points), 0.1)

    assert eb.grid_size == 3
    assert (eb.lower, eb.upper) == (2, 2)


def _regular_report(params, U, value):
    pattern = SpikingPattern((1, 2, 3, 4))
    return DescriptionLengthReport(params, U, (PatternComplexity(pattern, value, None, None),))


def test_used_codes_of_identical_samples(identity_codec, small_budget):
    X = np.full((10, 1), 0.5)
    dl = description_length(identity_codec, X, 0.1, small_budget)
    eb = essence_bounds(interval_support(0.2, 1.0), 0.1)

    usage = used_codes(identity_codec, X, dl, eb)

    assert usage.total_used == 1
    assert usage.residual == dl.total_sum - 1
    assert usage.max_distance_to_used_code <= 0.05
    assert usage.uncertified_patterns == ()


def test_used_codes_require_regular_report(identity_codec):
    dl = DescriptionLengthReport(
        identity_codec.params, 0.1, (PatternComplexity(SpikingPattern((1,)), math.inf, None, None),)
    )
    eb = essence_bounds(interval_support(0.2, 1.0), 0.1)

    with pytest.raises(NotCertifiedError):
        used_codes(identity_codec, np.full((3, 1), 0.5), dl, eb)


def test_lower_bound_holds_for_constant_decoder(constant_codec, small_budget):
    X = np.array([[0.5, 0.0]])
    dl = description_length(constant_codec, X, 0.1, small_budget)
    eb = essence_bounds(point_support([0.5, 0.0]), 0.1)

    check = essence_lower_bound_check(dl, eb)

    assert check.holds
    assert check.margin_bits == 0.0
    assert check.certificates_valid


def test_lower_bound_failure_is_reported(params):
    dl = _regular_report(params, 0.25, 1)
    eb = essence_bounds(interval_support(0.0, 1.0), 0.25, grid_res=0.0625)

    check = essence_lower_bound_check(dl, eb)

    assert not check.holds
    assert check.margin_bits == pytest.approx(-1.0)


def test_lower_bound_rejects_infinite_description_length(params):
    dl = _regular_report(params, 0.25, math.inf)
    eb = essence_bounds(interval_support(0.0, 1.0), 0.25)

    with pytest.raises(NotCertifiedError):
        essence_lower_bound_check(dl, eb)


def test_lower_bound_rejects_mismatched_U(params):
    dl = _regular_report(params, 0.5, 4)
    eb = essence_bounds(interval_support(0.0, 1.0), 0.25)

    with pytest.raises(ValueError):
        essence_lower_bound_check(dl, eb)


def test_redundancy_score():
    pattern = SpikingPattern((1,))
    usage = UsageAccounting(0.1, (PatternUsage(pattern, 6, 3),), 1, 2, 0.0)

    assert usage.residual == 3
    assert usage.redundancy_vs_lower == 2
    assert redundancy_score(usage) == 5
    assert redundancy_score(usage, against="upper") == 4


def test_redundancy_score_rejects_unknown_bound():
    usage = UsageAccounting(0.1, (), 1, 1, 0.0)

    with pytest.raises(ValueError):
        redundancy_score(usage, against="middle")


def _bounds_with_cover(cover: np.ndarray, U: float) -> EssenceBounds:
    return EssenceBounds(U, U / 4, 1, len(cover), cover, cover[:1], len(cover))


def test_boundary_pairs_straddle_the_split(split_codec):
    cover = np.array([[4.9, 2.0], [5.1, 2.0], [2.0, 2.0]])

    report = on_boundary_pairs(split_codec, _bounds_with_cover(cover, 0.6), 0.6)

    assert report.threshold == 0.3
    assert report.pair_count == 1
    pair = report.pairs[0]
    assert {pair.first_pattern, pair.second_pattern} == {SpikingPattern((1,)), SpikingPattern((2,))}
    assert pair.distance == pytest.approx(0.2)


def test_single_pattern_model_has_no_boundary_pairs(constant_codec):
    cover = np.array([[0.5, 0.0], [0.6, 0.0], [0.7, 0.0]])

    report = on_boundary_pairs(constant_codec, _bounds_with_cover(cover, 0.6), 0.6)

    assert report.pair_count == 0


def test_boundary_pairs_of_split_disk_cover_straddle_the_split(split_codec):
    eb = essence_bounds(two_circles_support(), 0.6)

    report = on_boundary_pairs(split_codec, eb, eb.U)

    assert report.threshold == 0.3
    for pair in report.pairs:
        assert min(pair.first[0], pair.second[0]) < 5.0 <= max(pair.first[0], pair.second[0])
        assert pair.distance <= 0.3


def test_model_splitting_the_circles_has_no_boundary_pairs(circle_splitter):
    """The disks are 0.6 apart, more than U/2"""
    eb = essence_bounds(two_circles_support(), 1.0)

    report = on_boundary_pairs(circle_splitter, eb, eb.U)

    assert len(eb.cover_points) > 1
    assert report.pair_count == 0
