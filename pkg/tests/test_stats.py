import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as hst
from scipy import integrate, special

from randexchange import exchange as ex, renewal, specfun as sf, stats as st
from randexchange.specfun import RngHandle
from randexchange.stats import TestReport

NULL_REPS = 100
MIN_NULL_PASSES = 98


# --- oracles -----------------------------------------------------------------

def oracle_w1_uniform_vs_exp() -> float:
    """Exact W1 between U(0,2) and Exp(1): integral of |F_U - F_E| over [0, inf)."""
    inner, _ = integrate.quad(lambda x: abs(min(x / 2, 1.0) + math.expm1(-x)), 0, 2, points=[1.5936], limit=200)
    tail, _ = integrate.quad(lambda x: math.exp(-x), 2, math.inf)
    return inner + tail


def oracle_mc_self_w1(n: int, reps: int) -> float:
    """Average quantile distance between two independent Exp(1) samples of size n."""
    gen = RngHandle(555).generator()
    return float(np.mean([st.quantile_distance(gen.exponential(size=n), gen.exponential(size=n), 1000)
                          for _ in range(reps)]))


# --- Kolmogorov-Smirnov ------------------------------------------------------

def test_kolmogorov_sf_against_scipy():
    for lam in np.linspace(0.2, 3.5, 67):
        assert st.kolmogorov_sf(lam) == pytest.approx(special.kolmogorov(lam), abs=1e-9)
    assert st.kolmogorov_sf(0.0) == 1.0


@settings(max_examples=200, deadline=None)
@given(hst.floats(0.0, 5.0), hst.floats(0.0, 5.0))
def test_ks_p_value_monotone_in_statistic(a, b):
    lo, hi = sorted((a, b))
    assert st.kolmogorov_sf(hi) <= st.kolmogorov_sf(lo)


def test_ks_statistic_matches_scipy():
    from scipy.stats import kstest

    x = sf.sample(sf.gamma(2.0, 2.0), RngHandle(3).generator(), size=5000)
    r = st.ks_test(x, sf.gamma(2.0, 2.0))
    ref = kstest(x, "gamma", args=(2.0, 0, 0.5))
    assert r.statistic == pytest.approx(ref.statistic, abs=1e-12)


def test_ks_null_calibration():
    gen = RngHandle(9).generator()
    passes = sum(st.ks_test(gen.exponential(size=10**5), sf.exponential(1.0)).passed for _ in range(NULL_REPS))
    assert passes >= MIN_NULL_PASSES


def test_ks_detects_wrong_law():
    x = sf.sample(sf.exponential(1.0), RngHandle(10).generator(), size=10**4)
    assert st.ks_test(x, sf.gamma(2.0, 2.0)).p_value < 1e-6


def test_ks_constant_samples():
    r = st.ks_test(np.full(1000, 0.7), sf.exponential(1.0))
    assert r.statistic >= 0.5
    assert not r.passed


def test_ks_accepts_callable_cdf():
    x = RngHandle(1).generator().random(2000)
    assert st.ks_test(x, lambda v: np.clip(v, 0, 1)).passed


def test_ks_rejects_nan_and_tiny_samples():
    with pytest.raises(ValueError):
        st.ks_test(np.r_[np.ones(200), np.nan], sf.exponential())
    with pytest.raises(ValueError):
        st.ks_test(np.ones(50), sf.exponential())


# --- lag correlation ---------------------------------------------------------

def test_lag_correlation_iid():
    x = RngHandle(12).generator().exponential(size=10**5)
    assert abs(st.lag_correlation(x, 1)) < 4 / math.sqrt(x.size)


def test_lag_correlation_midpoint():
    h = RngHandle(13)
    g = renewal.sample_gaps(sf.exponential(1.0), 10**5, h.generator(0))
    out = ex.apply_exchange_line(g, sf.deterministic(0.5), h.generator(1)).gaps
    assert st.lag_correlation(out, 1) == pytest.approx(0.5, abs=0.02)


def test_lag_zero():
    x = RngHandle(14).generator().random(100)
    assert st.lag_correlation(x, 0) == pytest.approx(1.0, abs=1e-15)


def test_lag_matches_numpy():
    x = RngHandle(15).generator().random(500)
    assert st.lag_correlation(x, 3) == pytest.approx(np.corrcoef(x[:-3], x[3:])[0, 1], abs=1e-12)


def test_lag_undefined_cases():
    with pytest.raises(ValueError):
        st.lag_correlation(np.ones(100), 1)
    with pytest.raises(ValueError):
        st.lag_correlation(np.arange(20.0), 1)


# --- chi-square independence -------------------------------------------------

def test_chi2_null_calibration():
    gen = RngHandle(16).generator()
    passes = sum(st.chi2_independence(gen.gamma(2.0, size=(10**5, 2)), bins=8).passed for _ in range(NULL_REPS))
    assert passes >= MIN_NULL_PASSES


def test_chi2_full_dependence():
    x = RngHandle(17).generator().random(10**4)
    assert st.chi2_independence(np.column_stack((x, x))).p_value < 1e-10


def test_chi2_uniform_division_control():
    h = RngHandle(18)
    g = renewal.sample_gaps(sf.exponential(1.0), 10**5, h.generator(0))
    out = ex.apply_exchange_line(g, sf.beta(1, 1), h.generator(1)).gaps
    assert not st.chi2_independence(np.column_stack((out[:-1], out[1:]))).passed


def test_chi2_p_value_against_scipy():
    from scipy.stats import chi2

    pairs = RngHandle(19).generator().random((4000, 2))
    r = st.chi2_independence(pairs, bins=4)
    assert r.p_value == pytest.approx(chi2.sf(r.statistic, 9), rel=1e-9)


def test_chi2_too_few_samples():
    with pytest.raises(ValueError):
        st.chi2_independence(np.random.default_rng(0).random((1000, 2)), bins=8)


# --- Gamma fitting -----------------------------------------------------------

def test_gamma_fit_gamma_two():
    a, g = st.gamma_fit_mom(sf.sample(sf.gamma(2.0, 2.0), RngHandle(20).generator(), size=10**5))
    assert 1.9 <= a <= 2.1 and 1.9 <= g <= 2.1


def test_gamma_fit_exponential():
    a, g = st.gamma_fit_mom(sf.sample(sf.exponential(1.0), RngHandle(21).generator(), size=10**5))
    assert a == pytest.approx(1.0, rel=0.05) and g == pytest.approx(1.0, rel=0.05)


def test_gamma_fit_constant():
    with pytest.raises(ValueError):
        st.gamma_fit_mom(np.full(2000, 3.0))


def test_gamma_fit_error_halves():
    def mean_abs_error(n):
        gen = RngHandle(22, n).generator()
        return np.mean([abs(st.gamma_fit_mom(gen.gamma(2.0, 0.5, size=n))[0] - 2.0) for _ in range(200)])

    # four times the data, half the error
    ratio = mean_abs_error(4 * 10**4) / mean_abs_error(10**4)
    assert 0.35 <= ratio <= 0.65


# --- quantile distance -------------------------------------------------------

def test_w1_self_distance():
    x = sf.sample(sf.exponential(1.0), RngHandle(23).generator(), size=10**5)
    assert oracle_mc_self_w1(10**5, 5) < 0.02
    assert st.wasserstein1_vs_spec(x, sf.exponential(1.0), rng=RngHandle(23).generator(1)) < 0.02


def test_w1_uniform_vs_exponential():
    exact = oracle_w1_uniform_vs_exp()
    assert exact > 0.15
    x = sf.sample(sf.uniform(0, 2), RngHandle(24).generator(), size=10**5)
    w = st.wasserstein1_vs_spec(x, sf.exponential(1.0), rng=RngHandle(24).generator(1))
    assert w > 0.15
    # m-level quantile averaging truncates the exponential tail, so allow a loose match
    assert w == pytest.approx(exact, rel=0.1)


def test_w1_identical_samples():
    x = RngHandle(25).generator().random(3000)
    assert st.quantile_distance(x, x.copy(), 500) == 0.0


def test_w1_needs_enough_levels():
    with pytest.raises(ValueError):
        st.quantile_distance(np.arange(10.0), np.arange(10.0), 50)


# --- reports -----------------------------------------------------------------

def test_report_serialisation(tmp_path):
    r = TestReport("ks", 0.01, 0.3, True, 1000, seed=4)
    d = json.loads(r.to_json())
    assert d["verdict"] == "pass" and d["p_value"] == 0.3 and d["seed"] == 4
    st.write_reports_jsonl(tmp_path / "r.jsonl", [r, TestReport("x", 1.0, 0.0, False, 10)])
    lines = (tmp_path / "r.jsonl").read_text().splitlines()
    assert [json.loads(l)["verdict"] for l in lines] == ["pass", "fail"]


def test_report_rejects_bad_p_value():
    with pytest.raises(ValueError):
        TestReport("ks", 0.1, 1.5, True, 10)


def test_verdict_matches_significance():
    x = sf.sample(sf.exponential(1.0), RngHandle(26).generator(), size=2000)
    for alpha in (0.001, 0.05, 0.5):
        r = st.ks_test(x, sf.exponential(1.0), significance=alpha)
        assert r.passed == (r.p_value >= alpha)
