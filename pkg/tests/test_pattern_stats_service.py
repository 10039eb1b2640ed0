"""
Tests for the pattern census and the dominant ratio
"""

import itertools
from fractions import Fraction

import numpy as np
import pytest

from spectrum_mdl.errors import EmptyInputError
from spectrum_mdl.models.domain import Spectrum, SpikingPattern
from spectrum_mdl.models.reports import PatternCensus
from spectrum_mdl.services import pattern_stats_service
from spectrum_mdl.services.pattern_stats_service import (
    census,
    dominant_ratio,
    monte_carlo_prob_all_observed,
    prob_all_observed,
)


def _census(*sizes: int) -> PatternCensus:
    return PatternCensus({SpikingPattern((m + 1,)): size for m, size in enumerate(sizes)})


def _brute_force(sizes, n0: int) -> float:
    labels = [m for m, size in enumerate(sizes) for _ in range(size)]
    subsets = list(itertools.combinations(range(len(labels)), n0))
    hits = sum(1 for subset in subsets if len({labels[i] for i in subset}) == len(sizes))
    return hits / len(subsets)


def test_census_orders_by_count_then_pattern(params):
    patterns = [SpikingPattern((2,))] * 3 + [SpikingPattern()] * 5 + [SpikingPattern((1,))] * 3

    observed = census(patterns)

    assert [p.label for p in observed.patterns] == ["{}", "{1}", "{2}"]
    assert observed.N == 11
    assert observed.M == 3


def test_census_of_spectra(params):
    spectra = [Spectrum(np.array([0.5, 0.0, 0.0, 0.0]), params), Spectrum(np.zeros(4), params)]

    assert census(spectra).counts == {SpikingPattern((1,)): 1, SpikingPattern(): 1}


def test_census_rejects_empty_input():
    with pytest.raises(EmptyInputError):
        census([])


def test_two_equal_patterns_of_ten_thousand():
    """5000 + 5000 samples need 8 draws for P0 = 0.99"""
    observed = PatternCensus({SpikingPattern((2, 3)): 5000, SpikingPattern((2, 9)): 5000})

    report = dominant_ratio(observed, 0.99)

    assert report.N0 == 8
    assert report.delta == Fraction(1250)
    assert report.probability_at_N0 >= 0.99 > report.probability_at_N0_minus_1


def test_single_pattern_needs_one_draw():
    report = dominant_ratio(_census(40), 0.99)

    assert report.N0 == 1
    assert report.delta == 40


def test_every_draw_needed_when_patterns_are_singletons():
    report = dominant_ratio(_census(1, 1, 1), 0.5)

    assert report.N0 == 3


@pytest.mark.parametrize("sizes", [(3, 2), (4, 1, 2), (2, 2, 2, 1), (5, 3, 1)])
def test_probability_matches_enumeration(sizes):
    observed = _census(*sizes)
    for n0 in range(1, observed.N + 1):
        assert prob_all_observed(observed, n0) == pytest.approx(_brute_force(sizes, n0), abs=1e-12)


def test_probability_is_monotone_in_draws():
    observed = _census(50, 20, 5, 1)
    values = [prob_all_observed(observed, n0) for n0 in range(1, observed.N + 1)]

    assert all(later >= earlier - 1e-12 for earlier, later in zip(values, values[1:]))
    assert values[-1] == pytest.approx(1.0)


def test_probability_rejects_out_of_range_draws():
    with pytest.raises(ValueError):
        prob_all_observed(_census(3, 2), 0)
    with pytest.raises(ValueError):
        prob_all_observed(_census(3, 2), 6)


def test_probability_rejects_unknown_sampling():
    with pytest.raises(ValueError):
        prob_all_observed(_census(3, 2), 2, sampling="bootstrap")


def test_generating_function_path_matches_enumeration(monkeypatch):
    observed = _census(30, 12, 7, 7, 3, 2, 1)
    expected = [prob_all_observed(observed, n0) for n0 in (7, 15, 40, 62)]

    monkeypatch.setattr(pattern_stats_service, "ENUMERATION_MAX_PATTERNS", 0)
    actual = [prob_all_observed(observed, n0) for n0 in (7, 15, 40, 62)]

    assert actual == pytest.approx(expected, abs=1e-12)


def test_many_patterns_use_integer_coefficients():
    """25 patterns cannot be enumerated; the polynomial path still gives a valid N0"""
    observed = _census(*([40] * 25))

    report = dominant_ratio(observed, 0.9)

    assert 25 <= report.N0 <= observed.N


def test_gammaln_path_matches_log1p_path(monkeypatch):
    observed = _census(9990, 10)
    expected = 1 - prob_all_observed(observed, 5000)

    monkeypatch.setattr(pattern_stats_service, "LOG1P_RATIO_MAX_DRAWS", 10**9)
    assert 1 - prob_all_observed(observed, 5000) == pytest.approx(expected, rel=1e-6)
    assert 0 < expected < 0.01


def test_with_replacement_closed_form():
    observed = _census(5000, 5000)

    assert prob_all_observed(observed, 8, sampling="with") == pytest.approx(1 - 2 / 256)
    assert dominant_ratio(observed, 0.99, sampling="with").N0 == 8


def test_monte_carlo_agrees_with_closed_form():
    """Simulated frequencies fall within three standard errors of the exact value"""
    rng = np.random.default_rng(7)
    trials = 100_000
    agreed = 0
    for _ in range(50):
        M = int(rng.integers(1, 5))
        sizes = rng.integers(1, 60, size=M)
        observed = _census(*map(int, sizes))
        n0 = int(rng.integers(1, observed.N + 1))
        exact = prob_all_observed(observed, n0)
        simulated = monte_carlo_prob_all_observed(observed, n0, trials, seed=int(rng.integers(2**31)))
        error = max(np.sqrt(exact * (1 - exact) / trials), 1 / trials)
        agreed += abs(simulated - exact) <= 3 * error
    assert agreed >= 48


def test_monte_carlo_with_replacement():
    observed = _census(60, 40)

    simulated = monte_carlo_prob_all_observed(observed, 3, 20_000, seed=1, sampling="with")

    assert simulated == pytest.approx(prob_all_observed(observed, 3, sampling="with"), abs=0.02)
