import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as hst

from randexchange import renewal, specfun as sf
from randexchange.renewal import GapSequence, PointConfiguration
from randexchange.specfun import RngHandle
from randexchange.stats import ks_test

positive_gaps = hst.lists(hst.floats(min_value=1e-6, max_value=1e6, allow_nan=False), min_size=1, max_size=200)


def test_deterministic_gaps():
    g = renewal.sample_gaps(sf.deterministic(2.5), 5, RngHandle(0).generator())
    assert g.gaps.tolist() == [2.5] * 5


def test_exponential_gap_mean():
    n = 10**5
    g = renewal.sample_gaps(sf.exponential(1.0), n, RngHandle(4).generator())
    assert abs(g.gaps.mean() - 1.0) <= 3 / math.sqrt(n)


def test_pareto_gaps_heavy_tail():
    F = sf.pareto_with_mean(1.5, 1.0)
    scale = F.params[1]
    assert scale == pytest.approx(1 / 3)
    means, variances = [], []
    for seed in range(8):
        g = renewal.sample_gaps(F, 10**4, RngHandle(seed).generator()).gaps
        assert g.min() >= scale
        means.append(g.mean())
        variances.append(g.var(ddof=1))
    assert abs(np.median(means) - 1.0) < 0.1
    # no finite second moment: sample variances scatter over a wide range
    assert max(variances) / min(variances) > 3


def test_sample_gaps_rejects_bad_laws():
    with pytest.raises(ValueError):
        renewal.sample_gaps(sf.lognormal(0, 1), 1, 0)
    with pytest.raises(ValueError):
        renewal.sample_gaps(sf.deterministic(0.0), 5, 0)
    with pytest.raises(ValueError):
        renewal.sample_gaps(sf.uniform(-1.0, 1.0), 5, 0)


def test_gaps_to_points_examples():
    assert renewal.gaps_to_points(GapSequence([1, 1, 1])).points.tolist() == [0, 1, 2, 3]
    assert renewal.gaps_to_points(GapSequence([0.5, 2.5])).points.tolist() == [0, 0.5, 3.0]


def test_points_to_gaps_examples():
    assert renewal.points_to_gaps(PointConfiguration([0, 1, 2, 3])).gaps.tolist() == [1, 1, 1]
    assert renewal.points_to_gaps(PointConfiguration([0, 0.25, 1.0])).gaps.tolist() == [0.25, 0.75]


def test_points_to_gaps_rejects_non_monotone():
    with pytest.raises(ValueError):
        PointConfiguration([0.0, 2.0, 1.0])
    with pytest.raises(ValueError):
        PointConfiguration([0.0, 1.0, 1.0])


def test_overflow_reported():
    with pytest.raises(OverflowError):
        renewal.gaps_to_points(GapSequence([1e308, 1e308]))


def test_invalid_gaps():
    for bad in ([1.0, 0.0], [1.0, -2.0], [math.nan], [math.inf], []):
        with pytest.raises(ValueError):
            GapSequence(bad)


@settings(max_examples=200, deadline=None)
@given(positive_gaps)
def test_round_trip_is_close(gaps):
    g = GapSequence(gaps)
    pts = renewal.gaps_to_points(g)
    assert pts.anchored
    assert np.all(np.diff(pts.points) > 0)
    back = renewal.points_to_gaps(pts).gaps
    # differencing a float cumulative sum is exact up to rounding of the running total
    np.testing.assert_allclose(back, g.gaps, rtol=0, atol=4 * np.spacing(pts.points[-1]))


@settings(max_examples=100, deadline=None)
@given(hst.lists(hst.integers(min_value=1, max_value=1000), min_size=1, max_size=100))
def test_round_trip_exact_on_dyadic_gaps(ints):
    g = GapSequence(np.asarray(ints, float) / 8.0)
    assert np.array_equal(renewal.points_to_gaps(renewal.gaps_to_points(g)).gaps, g.gaps)


def test_recovered_gaps_pass_ks():
    g = renewal.sample_gaps(sf.exponential(1.0), 10**5, RngHandle(21).generator())
    back = renewal.points_to_gaps(renewal.gaps_to_points(g))
    assert ks_test(back.gaps, sf.exponential(1.0)).passed


def test_recentred():
    p = PointConfiguration([2.0, 3.5, 7.0])
    assert not p.anchored
    assert p.recentred().points.tolist() == [0.0, 1.5, 5.0]


def test_csv_round_trip(tmp_path):
    g = renewal.sample_gaps(sf.gamma(0.3, 1.0), 500, RngHandle(1).generator())
    path = tmp_path / "gaps.csv"
    renewal.write_gaps_csv(path, g)
    assert path.read_text().startswith("tau\n")
    assert np.array_equal(renewal.read_gaps_csv(path).gaps, g.gaps)


def test_csv_integers_written_bare(tmp_path):
    path = tmp_path / "g.csv"
    renewal.write_gaps_csv(path, GapSequence([1.0, 1.0, 1.0]))
    assert path.read_text() == "tau\n1\n1\n1\n"


def test_csv_wrong_header(tmp_path):
    path = tmp_path / "g.csv"
    path.write_text("x\n1\n")
    with pytest.raises(ValueError):
        renewal.read_gaps_csv(path)


def test_seed_recorded_in_meta():
    g = renewal.sample_gaps(sf.exponential(), 10, RngHandle(7, 3))
    assert g.meta["seed"] == 7 and g.meta["stream"] == 3
