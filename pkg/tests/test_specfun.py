import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as hst
from scipy import integrate, stats as sps

from randexchange import specfun as sf
from randexchange.specfun import ConvergenceError, DomainError, RngHandle
from randexchange.stats import ks_test

ULP_SLACK = 4


def _lgamma_tol(value: float) -> float:
    # 1e-12 absolute, or a few ulp where the value itself is too large for that
    return max(1e-12, ULP_SLACK * math.ulp(abs(value)))


# --- oracles -----------------------------------------------------------------

def oracle_gamma_integral(x: float) -> float:
    """ln of int_0^inf t^(x-1) e^-t dt by quadrature, after t = u^2 to remove the endpoint singularity."""
    with mpmath.workdps(30):
        f = lambda u: 2 * u ** (2 * x - 1) * mpmath.exp(-u * u)
        return float(mpmath.log(mpmath.quad(f, [0, 1, mpmath.inf])))


def oracle_lower_gamma_2_2() -> float:
    val, _ = integrate.quad(lambda t: t * math.exp(-t), 0.0, 2.0, epsabs=1e-14, epsrel=1e-14)
    return val


# --- log_gamma ---------------------------------------------------------------

def test_log_gamma_trivial_values():
    assert sf.log_gamma(1.0) == pytest.approx(0.0, abs=1e-12)
    assert sf.log_gamma(5.0) == pytest.approx(math.log(24.0), abs=1e-12)
    assert math.log(24.0) == pytest.approx(3.178053830347946, abs=1e-15)


def test_log_gamma_half_matches_quadrature():
    ref = oracle_gamma_integral(0.5)
    assert ref == pytest.approx(0.5723649429247001, abs=1e-13)
    assert abs(sf.log_gamma(0.5) - ref) <= 1e-12


@pytest.mark.parametrize("x", [1e-3, 0.01, 0.37, 0.999, 1.5, 2.0, 7.25, 33.3, 171.5, 1e3, 4.2e4, 1e6])
def test_log_gamma_against_mpmath(x):
    ref = float(mpmath.loggamma(mpmath.mpf(x)))
    assert abs(sf.log_gamma(x) - ref) <= _lgamma_tol(ref)


@settings(max_examples=200, deadline=None)
@given(hst.floats(min_value=1e-3, max_value=1e6))
def test_log_gamma_property(x):
    ref = float(mpmath.loggamma(mpmath.mpf(x)))
    assert abs(sf.log_gamma(x) - ref) <= _lgamma_tol(ref)


def test_log_gamma_vectorised():
    xs = np.array([0.5, 1.0, 5.0])
    np.testing.assert_allclose(sf.log_gamma(xs), [math.lgamma(v) for v in xs], atol=1e-12)


@pytest.mark.parametrize("bad", [0.0, -1.0, -2.5, math.inf, math.nan])
def test_log_gamma_domain(bad):
    with pytest.raises(DomainError):
        sf.log_gamma(bad)


# --- regularized incomplete gamma -------------------------------------------

@pytest.mark.parametrize("x", [0.0, 1e-8, 0.3, 1.0, 2.0, 9.0, 40.0])
def test_gamma_p_exponential_case(x):
    assert sf.regularized_gamma_p(1.0, x) == pytest.approx(-math.expm1(-x), abs=1e-10)


@pytest.mark.parametrize("a", [0.1, 1.0, 3.0, 250.0])
def test_gamma_p_at_zero(a):
    assert sf.regularized_gamma_p(a, 0.0) == 0.0


def test_gamma_p_quadrature_oracle():
    ref = oracle_lower_gamma_2_2()
    assert ref == pytest.approx(0.5939941503, abs=1e-10)
    assert abs(sf.regularized_gamma_p(2.0, 2.0) - ref) <= 1e-10


@settings(max_examples=300, deadline=None)
@given(hst.floats(min_value=1e-2, max_value=500.0), hst.floats(min_value=0.0, max_value=2000.0))
def test_gamma_p_matches_scipy(a, x):
    from scipy.special import gammainc

    assert abs(sf.regularized_gamma_p(a, x) - gammainc(a, x)) <= 1e-10


@settings(max_examples=200, deadline=None)
@given(hst.floats(min_value=1e-2, max_value=200.0),
       hst.lists(hst.floats(min_value=0.0, max_value=600.0), min_size=2, max_size=30))
def test_gamma_p_monotone_and_bounded(a, xs):
    xs = np.sort(np.asarray(xs))
    p = np.asarray(sf.regularized_gamma_p(a, xs))
    assert np.all((p >= 0.0) & (p <= 1.0))
    assert np.all(np.diff(p) >= 0.0)


def test_gamma_p_q_complement():
    for a, x in [(0.5, 0.2), (3.0, 7.0), (40.0, 35.0)]:
        assert sf.regularized_gamma_p(a, x) + sf.regularized_gamma_q(a, x) == pytest.approx(1.0, abs=1e-14)


@pytest.mark.parametrize("a,x", [(0.0, 1.0), (-1.0, 1.0), (1.0, -0.1), (math.nan, 1.0), (1.0, math.nan)])
def test_gamma_p_domain(a, x):
    with pytest.raises(DomainError):
        sf.regularized_gamma_p(a, x)


def test_gamma_p_iteration_cap(monkeypatch):
    monkeypatch.setattr(sf, "MAX_ITER", 3)
    with pytest.raises(ConvergenceError):
        sf.regularized_gamma_p(50.0, 49.0)
    with pytest.raises(ConvergenceError):
        sf.regularized_gamma_p(50.0, 80.0)


def test_regularized_beta_against_scipy():
    from scipy.special import betainc

    for x, a, b in [(0.3, 0.5, 0.5), (0.9, 2.0, 5.0), (0.01, 0.2, 3.0), (0.5, 30.0, 30.0)]:
        assert sf.regularized_beta(x, a, b) == pytest.approx(betainc(a, b, x), abs=1e-12)


# --- sampling ----------------------------------------------------------------

def test_single_component_dirichlet():
    draws = sf.sample(sf.dirichlet([2.0]), RngHandle(3).generator(), size=1000)
    assert np.all(draws == 1.0)


def test_deterministic_sample():
    assert sf.sample(sf.deterministic(0.5), 0) == 0.5
    assert np.all(sf.sample(sf.deterministic(0.5), 0, size=50) == 0.5)


def test_gamma_moments_within_three_sigma():
    n = 10**6
    x = sf.sample(sf.gamma(3.0, 2.0), RngHandle(11).generator(), size=n)
    # closed forms: mean a/g, var a/g^2, fourth central moment 3a(a+2)/g^4
    mu, var, mu4 = 1.5, 0.75, 3 * 3 * 5 / 16
    assert abs(x.mean() - mu) <= 3 * math.sqrt(var / n)
    assert abs(x.var(ddof=1) - var) <= 3 * math.sqrt((mu4 - var**2) / n)


def test_dirichlet_rows_on_simplex():
    rows = sf.sample(sf.dirichlet([0.3, 1.0, 2.5, 0.05]), RngHandle(5).generator(), size=20000)
    assert rows.shape == (20000, 4)
    assert np.all(rows >= 0)
    # the renormalised rows sum to 1 up to the last bit of float64 rounding
    assert np.max(np.abs(rows.sum(axis=1) - 1.0)) <= 2 * np.finfo(float).eps


SCALAR_SPECS = [
    sf.exponential(1.0), sf.exponential(3.5), sf.gamma(0.3, 1.0), sf.gamma(2.0, 2.0), sf.gamma(7.5, 0.5),
    sf.beta(0.5, 0.5), sf.beta(0.15, 0.35), sf.beta(2.0, 5.0), sf.uniform(0.0, 2.0),
    sf.lognormal(0.0, 1.0), sf.pareto(1.5, 1.0 / 3.0), sf.pareto(3.0, 2.0),
]


@pytest.mark.parametrize("k", range(len(SCALAR_SPECS)), ids=[str(s) for s in SCALAR_SPECS])
def test_sampler_cdf_consistency(k):
    spec = SCALAR_SPECS[k]
    x = sf.sample(spec, RngHandle(2024).generator(k), size=10**5)
    assert ks_test(x, spec).passed


@pytest.mark.parametrize("spec", SCALAR_SPECS, ids=str)
def test_cdf_against_scipy(spec):
    frozen = {
        "exponential": lambda p: sps.expon(scale=1 / p[0]),
        "gamma": lambda p: sps.gamma(p[0], scale=1 / p[1]),
        "beta": lambda p: sps.beta(*p),
        "uniform_interval": lambda p: sps.uniform(p[0], p[1] - p[0]),
        "lognormal": lambda p: sps.lognorm(p[1], scale=math.exp(p[0])),
        "pareto": lambda p: sps.pareto(p[0], scale=p[1]),
    }[spec.kind](spec.params)
    grid = frozen.ppf(np.linspace(0.001, 0.999, 41))
    np.testing.assert_allclose(sf.cdf(spec, grid), frozen.cdf(grid), atol=1e-10)


@pytest.mark.parametrize("alphas", [(1.0, 1.0, 1.0), (0.2, 0.5, 1.3), (2 / 3, 2 / 3, 2 / 3), (3.0, 0.4)])
def test_dirichlet_marginals_are_beta(alphas):
    rows = sf.sample(sf.dirichlet(alphas), RngHandle(8).generator(), size=10**5)
    total = sum(alphas)
    for i, a in enumerate(alphas):
        assert ks_test(rows[:, i], sf.beta(a, total - a)).passed


def test_determinism_same_stream():
    spec = sf.gamma(0.4, 1.0)
    a = sf.sample(spec, RngHandle(99, 4).generator(), size=1000)
    b = sf.sample(spec, RngHandle(99, 4).generator(), size=1000)
    assert a.tobytes() == b.tobytes()


def test_distinct_streams_differ_and_look_independent():
    a = sf.sample(sf.exponential(), RngHandle(99, 0).generator(), size=50000)
    b = sf.sample(sf.exponential(), RngHandle(99, 1).generator(), size=50000)
    assert not np.array_equal(a, b)
    assert abs(np.corrcoef(a, b)[0, 1]) < 4 / math.sqrt(a.size)


@settings(max_examples=25, deadline=None)
@given(hst.integers(min_value=0, max_value=2**64 - 1), hst.integers(min_value=0, max_value=2**32))
def test_rng_handle_reproducible(seed, stream):
    h = RngHandle(seed, stream)
    assert h.generator().random(4).tobytes() == RngHandle(seed, stream).generator().random(4).tobytes()


# --- densities ---------------------------------------------------------------

def test_pdf_examples():
    assert sf.pdf(sf.beta(1, 1), 0.3) == pytest.approx(1.0, abs=1e-12)
    for g, x in [(0.5, 0.1), (2.0, 3.0), (7.0, 0.25)]:
        assert sf.pdf(sf.gamma(1, g), x) == pytest.approx(g * math.exp(-g * x), rel=1e-12)


def test_arcsine_density_at_half():
    direct = math.gamma(1.0) / math.gamma(0.5) ** 2 * 0.25**-0.5
    assert direct == pytest.approx(2 / math.pi, rel=1e-14)
    assert sf.pdf(sf.beta(0.5, 0.5), 0.5) == pytest.approx(direct, rel=1e-12)
    mass, _ = integrate.quad(lambda t: sf.pdf(sf.beta(0.5, 0.5), t), 0, 1, limit=200)
    assert mass == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("spec", [sf.gamma(2.5, 1.5), sf.beta(2.0, 3.0), sf.lognormal(0.2, 0.7), sf.pareto(2.5, 1.0)],
                         ids=str)
def test_pdf_integrates_to_one(spec):
    lo, hi = sf.support(spec)
    mass, _ = integrate.quad(lambda t: sf.pdf(spec, t), lo, hi, limit=200)
    assert mass == pytest.approx(1.0, abs=1e-7)


def test_pdf_outside_support_is_zero():
    assert sf.pdf(sf.beta(2, 2), 1.5) == 0.0
    assert sf.pdf(sf.exponential(), -1.0) == 0.0


def test_dirichlet_pdf_dimension_mismatch():
    with pytest.raises(DomainError):
        sf.pdf(sf.dirichlet([1.0, 1.0, 1.0]), [0.2, 0.3, 0.1, 0.4])


@pytest.mark.parametrize("kind,params", [("gamma", [-1.0, 1.0]), ("beta", [1.0]), ("exponential", [0.0]),
                                         ("dirichlet", []), ("nope", [1.0])])
def test_spec_validation(kind, params):
    with pytest.raises(DomainError):
        sf.DistributionSpec(kind, params)


def test_spec_roundtrip():
    for spec in SCALAR_SPECS + [sf.dirichlet([0.5, 0.5, 0.5]), sf.deterministic(1.0)]:
        assert sf.DistributionSpec.from_dict(spec.to_dict()) == spec
