"""Special functions, distribution specs and seeded samplers.

Everything random in the package goes through :class:`RngHandle` or a
``numpy.random.Generator`` derived from one, so a fixed ``(seed, stream)``
pair reproduces every draw bit for bit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

__all__ = [
    "DomainError",
    "ConvergenceError",
    "RngHandle",
    "DistributionSpec",
    "as_generator",
    "spawn_generators",
    "log_gamma",
    "regularized_gamma_p",
    "regularized_gamma_q",
    "regularized_beta",
    "sample",
    "pdf",
    "cdf",
    "mean",
    "variance",
    "support",
    "exponential",
    "gamma",
    "beta",
    "dirichlet",
    "deterministic",
    "uniform",
    "lognormal",
    "pareto",
    "pareto_with_mean",
]

MAX_ITER = 10_000
_EPS = 1e-15
_TINY = 1e-300
_U64 = 2**64


class DomainError(ValueError):
    """Argument outside the domain of a special function or distribution."""


class ConvergenceError(ArithmeticError):
    """Series or continued fraction hit the iteration cap."""


# ---------------------------------------------------------------------------
# RNG contract


@dataclass(frozen=True)
class RngHandle:
    """Value-like handle naming one reproducible random stream.

    Streams with distinct ids are independent (``SeedSequence`` spawn keys).
    """

    seed: int
    stream: int = 0

    def __post_init__(self):
        for name in ("seed", "stream"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or not 0 <= int(v) < _U64:
                raise ValueError(f"{name} must be an unsigned 64-bit integer, got {v!r}")

    def seed_sequence(self, *sub: int) -> np.random.SeedSequence:
        return np.random.SeedSequence(int(self.seed), spawn_key=(int(self.stream), *sub))

    def generator(self, *sub: int) -> np.random.Generator:
        """Fresh generator at the start of this stream (or of a sub-stream)."""
        return np.random.Generator(np.random.PCG64(self.seed_sequence(*sub)))

    def with_stream(self, stream: int) -> "RngHandle":
        return RngHandle(self.seed, stream)


RngLike = Union[RngHandle, np.random.Generator, int]


def as_generator(rng: RngLike) -> np.random.Generator:
    """Accept an RngHandle, a bare seed, or an existing Generator."""
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngHandle):
        return rng.generator()
    if isinstance(rng, (int, np.integer)):
        return RngHandle(int(rng)).generator()
    raise TypeError(f"cannot build a generator from {type(rng).__name__}")


def spawn_generators(rng: RngLike, count: int) -> list[np.random.Generator]:
    """``count`` independent child generators, deterministic in ``rng``."""
    if isinstance(rng, (int, np.integer)):
        rng = RngHandle(int(rng))
    if isinstance(rng, RngHandle):
        return [rng.generator(i) for i in range(count)]
    if isinstance(rng, np.random.Generator):
        return rng.spawn(count)
    raise TypeError(f"cannot spawn generators from {type(rng).__name__}")


# ---------------------------------------------------------------------------
# Special functions

# Lanczos-type approximation, g = 671/128 with 14 terms (Numerical Recipes, 3rd ed.).
_LANCZOS_G = 5.24218750000000000
_LANCZOS_COF = (
    57.1562356658629235,
    -59.5979603554754912,
    14.1360979747417471,
    -0.491913816097620199,
    0.339946499848118887e-4,
    0.465236289270485756e-4,
    -0.983744753048795646e-4,
    0.158088703224912494e-3,
    -0.210264441724104883e-3,
    0.217439618115212643e-3,
    -0.164318106536763890e-3,
    0.844182239838527433e-4,
    -0.261908384015814087e-4,
    0.368991826595316234e-5,
)
_LANCZOS_C0 = 0.999999999999997092
_SQRT_2PI = 2.5066282746310005


def _log_gamma_array(x: np.ndarray) -> np.ndarray:
    tmp = x + _LANCZOS_G
    tmp = (x + 0.5) * np.log(tmp) - tmp
    ser = np.full_like(x, _LANCZOS_C0)
    y = x.copy()
    for c in _LANCZOS_COF:
        y = y + 1.0
        ser = ser + c / y
    return tmp + np.log(_SQRT_2PI * ser / x)


def log_gamma(x):
    """ln Gamma(x) for x > 0; accepts scalars or arrays."""
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
        raise DomainError(f"log_gamma requires finite x > 0, got {x!r}")
    out = _log_gamma_array(np.atleast_1d(arr).astype(float))
    if arr.ndim == 0:
        return float(out[0])
    return out.reshape(arr.shape)


def _gamma_series(a: float, x: np.ndarray, gln: float) -> np.ndarray:
    # P(a, x) by the power series, intended for x < a + 1
    ap = np.full_like(x, a)
    term = np.full_like(x, 1.0 / a)
    total = term.copy()
    active = np.ones(x.shape, dtype=bool)
    for _ in range(MAX_ITER):
        ap[active] += 1.0
        term[active] *= x[active] / ap[active]
        total[active] += term[active]
        active &= np.abs(term) >= np.abs(total) * _EPS
        if not active.any():
            break
    else:
        raise ConvergenceError("incomplete gamma series did not converge")
    with np.errstate(divide="ignore"):
        logx = np.log(x)
    return total * np.exp(-x + a * logx - gln)


def _gamma_contfrac(a: float, x: np.ndarray, gln: float) -> np.ndarray:
    # Q(a, x) by the modified Lentz continued fraction, intended for x >= a + 1
    b = x + 1.0 - a
    c = np.full_like(x, 1.0 / _TINY)
    d = 1.0 / b
    h = d.copy()
    active = np.ones(x.shape, dtype=bool)
    for i in range(1, MAX_ITER + 1):
        an = -i * (i - a)
        b = b + 2.0
        d = an * d + b
        d = np.where(np.abs(d) < _TINY, _TINY, d)
        c = b + an / c
        c = np.where(np.abs(c) < _TINY, _TINY, c)
        d = 1.0 / d
        delta = d * c
        h = np.where(active, h * delta, h)
        active &= np.abs(delta - 1.0) >= _EPS
        if not active.any():
            break
    else:
        raise ConvergenceError("incomplete gamma continued fraction did not converge")
    return np.exp(-x + a * np.log(x) - gln) * h


def _incomplete_gamma(a, x, upper: bool):
    if not (np.isfinite(a) and a > 0):
        raise DomainError(f"shape a must be finite and > 0, got {a!r}")
    arr = np.asarray(x, dtype=float)
    if np.any(np.isnan(arr)) or np.any(arr < 0):
        raise DomainError("x must be >= 0")
    flat = np.atleast_1d(arr).astype(float).ravel()
    p = np.zeros_like(flat)
    gln = log_gamma(a)
    finite = np.isfinite(flat)
    p[~finite] = 1.0
    lo = finite & (flat < a + 1.0) & (flat > 0)
    hi = finite & (flat >= a + 1.0)
    if upper:
        q = 1.0 - p
        q[flat == 0] = 1.0
        if lo.any():
            q[lo] = 1.0 - _gamma_series(a, flat[lo], gln)
        if hi.any():
            q[hi] = _gamma_contfrac(a, flat[hi], gln)
        res = np.clip(q, 0.0, 1.0)
    else:
        if lo.any():
            p[lo] = _gamma_series(a, flat[lo], gln)
        if hi.any():
            p[hi] = 1.0 - _gamma_contfrac(a, flat[hi], gln)
        res = np.clip(p, 0.0, 1.0)
    if arr.ndim == 0:
        return float(res[0])
    return res.reshape(arr.shape)


def regularized_gamma_p(a: float, x):
    """Lower regularized incomplete gamma P(a, x).

    Series for x < a + 1, continued fraction otherwise. Raises
    :class:`ConvergenceError` after ``MAX_ITER`` iterations.
    """
    return _incomplete_gamma(a, x, upper=False)


def regularized_gamma_q(a: float, x):
    """Upper regularized incomplete gamma Q(a, x) = 1 - P(a, x), computed without cancellation."""
    return _incomplete_gamma(a, x, upper=True)


def _beta_contfrac(a: float, b: float, x: np.ndarray) -> np.ndarray:
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = np.ones_like(x)
    d = 1.0 - qab * x / qap
    d = np.where(np.abs(d) < _TINY, _TINY, d)
    d = 1.0 / d
    h = d.copy()
    active = np.ones(x.shape, dtype=bool)
    for m in range(1, MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = np.where(np.abs(d) < _TINY, _TINY, d)
        c = 1.0 + aa / c
        c = np.where(np.abs(c) < _TINY, _TINY, c)
        d = 1.0 / d
        h = np.where(active, h * d * c, h)
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = np.where(np.abs(d) < _TINY, _TINY, d)
        c = 1.0 + aa / c
        c = np.where(np.abs(c) < _TINY, _TINY, c)
        d = 1.0 / d
        delta = d * c
        h = np.where(active, h * delta, h)
        active &= np.abs(delta - 1.0) >= _EPS
        if not active.any():
            break
    else:
        raise ConvergenceError("incomplete beta continued fraction did not converge")
    return h


def regularized_beta(x, a: float, b: float):
    """Regularized incomplete beta I_x(a, b), vectorised over x."""
    if not (a > 0 and b > 0):
        raise DomainError("beta parameters must be > 0")
    arr = np.asarray(x, dtype=float)
    flat = np.clip(np.atleast_1d(arr).astype(float).ravel(), 0.0, 1.0)
    out = np.where(flat >= 1.0, 1.0, 0.0)
    inner = (flat > 0) & (flat < 1)
    if inner.any():
        xi = flat[inner]
        lbt = (log_gamma(a + b) - log_gamma(a) - log_gamma(b)
               + a * np.log(xi) + b * np.log1p(-xi))
        front = np.exp(lbt)
        direct = xi < (a + 1.0) / (a + b + 2.0)
        res = np.empty_like(xi)
        if direct.any():
            res[direct] = front[direct] * _beta_contfrac(a, b, xi[direct]) / a
        if (~direct).any():
            res[~direct] = 1.0 - front[~direct] * _beta_contfrac(b, a, 1.0 - xi[~direct]) / b
        out[inner] = res
    out = np.clip(out, 0.0, 1.0)
    if arr.ndim == 0:
        return float(out[0])
    return out.reshape(arr.shape)


# ---------------------------------------------------------------------------
# Distribution specs

_ARITY = {
    "exponential": 1,
    "gamma": 2,
    "beta": 2,
    "deterministic": 1,
    "uniform_interval": 2,
    "lognormal": 2,
    "pareto": 2,
}
KINDS = tuple(_ARITY) + ("dirichlet",)


@dataclass(frozen=True)
class DistributionSpec:
    """Declarative law description.

    Parameters by kind: exponential (rate), gamma (shape, rate),
    beta (a, b), dirichlet (alpha_1..alpha_r), deterministic (atom),
    uniform_interval (low, high), lognormal (mu, sigma),
    pareto (tail index, scale).
    """

    kind: str
    params: tuple

    def __post_init__(self):
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        k, p = self.kind, self.params
        if k not in KINDS:
            raise DomainError(f"unknown distribution kind {k!r}")
        if not all(math.isfinite(v) for v in p):
            raise DomainError(f"{k}: parameters must be finite")
        if k == "dirichlet":
            if not p or any(v <= 0 for v in p):
                raise DomainError("dirichlet needs a nonempty vector of positive parameters")
            return
        if len(p) != _ARITY[k]:
            raise DomainError(f"{k} takes {_ARITY[k]} parameter(s), got {len(p)}")
        if k in ("exponential", "gamma", "beta", "pareto") and any(v <= 0 for v in p):
            raise DomainError(f"{k}: parameters must be > 0")
        if k == "lognormal" and p[1] <= 0:
            raise DomainError("lognormal sigma must be > 0")
        if k == "uniform_interval" and not p[0] < p[1]:
            raise DomainError("uniform_interval needs low < high")

    @property
    def is_scalar(self) -> bool:
        return self.kind != "dirichlet"

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": list(self.params)}

    @classmethod
    def from_dict(cls, d: dict) -> "DistributionSpec":
        if not isinstance(d, dict) or "kind" not in d:
            raise DomainError(f"distribution must be an object with a 'kind', got {d!r}")
        params = d.get("params", [])
        if not isinstance(params, (list, tuple)):
            raise DomainError("'params' must be a list of numbers")
        return cls(str(d["kind"]), tuple(params))

    def __str__(self):
        return f"{self.kind}({', '.join(f'{v:g}' for v in self.params)})"


def exponential(rate: float = 1.0) -> DistributionSpec:
    return DistributionSpec("exponential", (rate,))


def gamma(shape: float, rate: float = 1.0) -> DistributionSpec:
    return DistributionSpec("gamma", (shape, rate))


def beta(a: float, b: float) -> DistributionSpec:
    return DistributionSpec("beta", (a, b))


def dirichlet(alphas: Sequence[float]) -> DistributionSpec:
    return DistributionSpec("dirichlet", tuple(alphas))


def deterministic(value: float) -> DistributionSpec:
    return DistributionSpec("deterministic", (value,))


def uniform(low: float = 0.0, high: float = 1.0) -> DistributionSpec:
    return DistributionSpec("uniform_interval", (low, high))


def lognormal(mu: float = 0.0, sigma: float = 1.0) -> DistributionSpec:
    return DistributionSpec("lognormal", (mu, sigma))


def pareto(tail: float, scale: float = 1.0) -> DistributionSpec:
    return DistributionSpec("pareto", (tail, scale))


def pareto_with_mean(tail: float, target_mean: float = 1.0) -> DistributionSpec:
    """Pareto law with the scale chosen so the mean equals ``target_mean`` (needs tail > 1)."""
    if tail <= 1:
        raise DomainError("a finite mean needs tail index > 1")
    return pareto(tail, target_mean * (tail - 1.0) / tail)


def support(spec: DistributionSpec) -> tuple[float, float]:
    """Closed hull of the support of a scalar law."""
    k, p = spec.kind, spec.params
    if k in ("exponential", "gamma", "lognormal"):
        return (0.0, math.inf)
    if k == "beta":
        return (0.0, 1.0)
    if k == "deterministic":
        return (p[0], p[0])
    if k == "uniform_interval":
        return (p[0], p[1])
    if k == "pareto":
        return (p[1], math.inf)
    raise DomainError("support is defined for scalar laws only")


def mean(spec: DistributionSpec):
    k, p = spec.kind, spec.params
    if k == "exponential":
        return 1.0 / p[0]
    if k == "gamma":
        return p[0] / p[1]
    if k == "beta":
        return p[0] / (p[0] + p[1])
    if k == "deterministic":
        return p[0]
    if k == "uniform_interval":
        return 0.5 * (p[0] + p[1])
    if k == "lognormal":
        return math.exp(p[0] + 0.5 * p[1] ** 2)
    if k == "pareto":
        return math.inf if p[0] <= 1 else p[0] * p[1] / (p[0] - 1.0)
    a = np.asarray(p)
    return a / a.sum()


def variance(spec: DistributionSpec) -> float:
    k, p = spec.kind, spec.params
    if k == "exponential":
        return 1.0 / p[0] ** 2
    if k == "gamma":
        return p[0] / p[1] ** 2
    if k == "beta":
        s = p[0] + p[1]
        return p[0] * p[1] / (s * s * (s + 1.0))
    if k == "deterministic":
        return 0.0
    if k == "uniform_interval":
        return (p[1] - p[0]) ** 2 / 12.0
    if k == "lognormal":
        s2 = p[1] ** 2
        return math.expm1(s2) * math.exp(2 * p[0] + s2)
    if k == "pareto":
        t, m = p
        if t <= 2:
            return math.inf
        return m * m * t / ((t - 1.0) ** 2 * (t - 2.0))
    raise DomainError("variance is defined for scalar laws only")


# ---------------------------------------------------------------------------
# Samplers


def _mt_gamma(alpha: float, n: int, gen: np.random.Generator) -> np.ndarray:
    # Marsaglia-Tsang squeeze-free rejection, valid for alpha >= 1
    d = alpha - 1.0 / 3.0
    c = 1.0 / math.sqrt(9.0 * d)
    out = np.empty(n)
    pending = np.arange(n)
    while pending.size:
        m = pending.size
        z = gen.standard_normal(m)
        u = gen.random(m)
        v = 1.0 + c * z
        pos = v > 0
        v3 = np.where(pos, v * v * v, 1.0)
        with np.errstate(divide="ignore"):
            accept = pos & (np.log(u) < 0.5 * z * z + d - d * v3 + d * np.log(v3))
        out[pending[accept]] = d * v3[accept]
        pending = pending[~accept]
    return out


def _log_standard_gamma(alpha: float, n: int, gen: np.random.Generator) -> np.ndarray:
    """Logs of Gamma(alpha, 1) draws; alpha < 1 is boosted via G(alpha+1) * U**(1/alpha)."""
    if alpha == 1.0:
        return np.log(gen.standard_exponential(n))
    if alpha > 1.0:
        return np.log(_mt_gamma(alpha, n, gen))
    g = _mt_gamma(alpha + 1.0, n, gen)
    u = gen.random(n)
    # 1 - u lies in (0, 1]
    return np.log(g) + np.log1p(-u) / alpha


def _standard_gamma(alpha: float, n: int, gen: np.random.Generator) -> np.ndarray:
    if alpha == 1.0:
        return gen.standard_exponential(n)
    if alpha > 1.0:
        return _mt_gamma(alpha, n, gen)
    return np.exp(_log_standard_gamma(alpha, n, gen))


def _beta_draws(a: float, b: float, n: int, gen: np.random.Generator) -> np.ndarray:
    # X / (X + Y) evaluated in log space so tiny shapes cannot produce 0/0
    lx = _log_standard_gamma(a, n, gen)
    ly = _log_standard_gamma(b, n, gen)
    return 1.0 / (1.0 + np.exp(ly - lx))


def _dirichlet_draws(alphas: Sequence[float], n: int, gen: np.random.Generator) -> np.ndarray:
    logs = np.column_stack([_log_standard_gamma(a, n, gen) for a in alphas])
    logs -= logs.max(axis=1, keepdims=True)
    w = np.exp(logs)
    w /= w.sum(axis=1, keepdims=True)
    if w.shape[1] > 1:
        # push the rounding residue into the largest coordinate
        idx = np.argmax(w, axis=1)
        rows = np.arange(n)
        w[rows, idx] = 0.0
        w[rows, idx] = np.maximum(1.0 - w.sum(axis=1), 0.0)
    else:
        w[:] = 1.0
    return w


def sample(spec: DistributionSpec, rng: RngLike, size: int | None = None):
    """Draw from ``spec``.

    Returns a float (or a length-r vector for dirichlet) when ``size`` is
    None, otherwise an array with ``size`` rows.
    """
    gen = as_generator(rng)
    n = 1 if size is None else int(size)
    if n < 0:
        raise ValueError("size must be nonnegative")
    k, p = spec.kind, spec.params
    if k == "exponential":
        x = gen.standard_exponential(n) / p[0]
    elif k == "gamma":
        x = _standard_gamma(p[0], n, gen) / p[1]
    elif k == "beta":
        x = _beta_draws(p[0], p[1], n, gen)
    elif k == "dirichlet":
        x = _dirichlet_draws(p, n, gen)
    elif k == "deterministic":
        x = np.full(n, p[0])
    elif k == "uniform_interval":
        x = p[0] + (p[1] - p[0]) * gen.random(n)
    elif k == "lognormal":
        x = np.exp(p[0] + p[1] * gen.standard_normal(n))
    elif k == "pareto":
        x = p[1] * (1.0 - gen.random(n)) ** (-1.0 / p[0])
    else:  # pragma: no cover - guarded by DistributionSpec
        raise DomainError(k)
    if size is None:
        return x[0].copy() if k == "dirichlet" else float(x[0])
    return x


# ---------------------------------------------------------------------------
# Densities and CDFs


def pdf(spec: DistributionSpec, x):
    """Density at ``x``; zero outside the support.

    For dirichlet, ``x`` holds the first r-1 simplex coordinates (a full
    length-r point is accepted and its last coordinate recomputed).
    """
    k, p = spec.kind, spec.params
    if k == "dirichlet":
        r = len(p)
        v = np.asarray(x, dtype=float).ravel()
        if v.size not in (r - 1, r) or r < 2:
            raise DomainError(f"dirichlet({r}) density needs {r - 1} coordinates, got {v.size}")
        head = v[: r - 1]
        last = 1.0 - head.sum()
        pt = np.append(head, last)
        if np.any(pt <= 0):
            return 0.0
        a = np.asarray(p)
        logc = log_gamma(a.sum()) - float(np.sum(log_gamma(a)))
        return float(math.exp(logc + np.sum((a - 1.0) * np.log(pt))))

    arr = np.asarray(x, dtype=float)
    v = np.atleast_1d(arr).astype(float)
    out = np.zeros_like(v)
    if k == "exponential":
        m = v >= 0
        out[m] = p[0] * np.exp(-p[0] * v[m])
    elif k == "gamma":
        m = v > 0
        a, g = p
        out[m] = np.exp(a * math.log(g) - log_gamma(a) + (a - 1.0) * np.log(v[m]) - g * v[m])
    elif k == "beta":
        m = (v > 0) & (v < 1)
        a, b = p
        logc = log_gamma(a + b) - log_gamma(a) - log_gamma(b)
        out[m] = np.exp(logc + (a - 1.0) * np.log(v[m]) + (b - 1.0) * np.log1p(-v[m]))
    elif k == "deterministic":
        out[v == p[0]] = math.inf
    elif k == "uniform_interval":
        m = (v >= p[0]) & (v <= p[1])
        out[m] = 1.0 / (p[1] - p[0])
    elif k == "lognormal":
        m = v > 0
        mu, s = p
        z = (np.log(v[m]) - mu) / s
        out[m] = np.exp(-0.5 * z * z) / (v[m] * s * _SQRT_2PI)
    elif k == "pareto":
        t, sc = p
        m = v >= sc
        out[m] = t * sc**t / v[m] ** (t + 1.0)
    return float(out[0]) if arr.ndim == 0 else out.reshape(arr.shape)


_erfc = np.frompyfunc(math.erfc, 1, 1)


def cdf(spec: DistributionSpec, x):
    """Distribution function of a scalar law, vectorised over ``x``."""
    k, p = spec.kind, spec.params
    arr = np.asarray(x, dtype=float)
    v = np.atleast_1d(arr).astype(float)
    out = np.zeros_like(v)
    if k == "exponential":
        m = v > 0
        out[m] = -np.expm1(-p[0] * v[m])
    elif k == "gamma":
        m = v > 0
        out[m] = regularized_gamma_p(p[0], p[1] * v[m])
    elif k == "beta":
        out = regularized_beta(v, p[0], p[1])
    elif k == "deterministic":
        out[v >= p[0]] = 1.0
    elif k == "uniform_interval":
        out = np.clip((v - p[0]) / (p[1] - p[0]), 0.0, 1.0)
    elif k == "lognormal":
        m = v > 0
        z = (np.log(v[m]) - p[0]) / (p[1] * math.sqrt(2.0))
        out[m] = 0.5 * _erfc(-z).astype(float)
    elif k == "pareto":
        t, sc = p
        m = v > sc
        out[m] = -np.expm1(t * np.log(sc / v[m]))
    else:
        raise DomainError("cdf is defined for scalar laws only")
    return float(out[0]) if arr.ndim == 0 else out.reshape(arr.shape)
