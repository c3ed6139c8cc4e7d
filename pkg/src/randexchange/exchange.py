"""Division shifts, the line exchange operator, and random mass exchange on a torus.

Index convention: ``b_k`` is the division variable of interval ``k``.
Interval ``k`` keeps ``(1 - b_k) tau_k`` and receives ``b_{k+1} tau_{k+1}``
from its right neighbour, so in sharing-row terms an agent keeps the
offset-0 proportion and sends the offset ``-1`` proportion one site left.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import specfun
from .renewal import GapSequence, PointConfiguration
from .specfun import DistributionSpec, RngLike, as_generator

SHARING_KINDS = ("two_diagonal", "dirichlet_window", "deterministic_window", "normalized_iid")


def check_division_law(G: DistributionSpec) -> None:
    if not G.is_scalar:
        raise ValueError("division law must be scalar")
    lo, hi = specfun.support(G)
    if lo < 0 or hi > 1:
        raise ValueError(f"division law {G} must be supported in [0, 1]")


@dataclass(frozen=True)
class SharingSpec:
    """Law of the random proportion vector an agent splits its mass by.

    ``two_diagonal`` uses a division law ``G`` on offsets (-1, 0);
    ``dirichlet_window`` takes Dirichlet parameters per offset;
    ``deterministic_window`` takes fixed weights per offset;
    ``normalized_iid`` normalises iid draws of ``weight_law`` over the offsets.
    """

    kind: str
    offsets: tuple = ()
    params: tuple = ()
    G: DistributionSpec | None = None
    weight_law: DistributionSpec | None = None

    def __post_init__(self):
        if self.kind not in SHARING_KINDS:
            raise ValueError(f"unknown sharing kind {self.kind!r}")
        if self.kind == "two_diagonal":
            if self.G is None:
                raise ValueError("two_diagonal sharing needs a division law G")
            check_division_law(self.G)
            object.__setattr__(self, "offsets", (-1, 0))
            object.__setattr__(self, "params", ())
            return
        offs = tuple(int(o) for o in self.offsets)
        if not offs or len(set(offs)) != len(offs):
            raise ValueError("offsets must be a nonempty set of distinct integers")
        object.__setattr__(self, "offsets", offs)
        pr = tuple(float(v) for v in self.params)
        object.__setattr__(self, "params", pr)
        if self.kind == "dirichlet_window":
            if len(pr) != len(offs) or any(not (v > 0 and math.isfinite(v)) for v in pr):
                raise ValueError("dirichlet_window needs one positive parameter per offset")
        elif self.kind == "deterministic_window":
            if len(pr) != len(offs) or any(v < 0 for v in pr):
                raise ValueError("deterministic_window needs one nonnegative weight per offset")
            if abs(math.fsum(pr) - 1.0) > 1e-12:
                raise ValueError("deterministic_window weights must sum to 1")
        else:
            if self.weight_law is None or not self.weight_law.is_scalar:
                raise ValueError("normalized_iid needs a scalar weight law")
            if specfun.support(self.weight_law)[0] < 0:
                raise ValueError("weight law must be nonnegative")

    # constructors

    @classmethod
    def two_diagonal(cls, G: DistributionSpec) -> "SharingSpec":
        return cls("two_diagonal", G=G)

    @classmethod
    def dirichlet_window(cls, offsets: Sequence[int], alphas: Sequence[float]) -> "SharingSpec":
        return cls("dirichlet_window", tuple(offsets), tuple(alphas))

    @classmethod
    def deterministic_window(cls, offsets: Sequence[int], weights: Sequence[float]) -> "SharingSpec":
        return cls("deterministic_window", tuple(offsets), tuple(weights))

    @classmethod
    def normalized_iid(cls, offsets: Sequence[int], weight_law: DistributionSpec) -> "SharingSpec":
        return cls("normalized_iid", tuple(offsets), (), weight_law=weight_law)

    # derived quantities

    @property
    def max_offset(self) -> int:
        return max(abs(o) for o in self.offsets)

    @property
    def is_deterministic(self) -> bool:
        if self.kind == "deterministic_window":
            return True
        return self.kind == "two_diagonal" and self.G.kind == "deterministic"

    def mean_weights(self) -> np.ndarray:
        """Expected proportions p_j, aligned with ``offsets``."""
        if self.kind == "two_diagonal":
            r = specfun.mean(self.G)
            return np.array([r, 1.0 - r])
        if self.kind == "dirichlet_window":
            a = np.asarray(self.params)
            return a / a.sum()
        if self.kind == "deterministic_window":
            return np.asarray(self.params)
        return np.full(len(self.offsets), 1.0 / len(self.offsets))

    def sample_rows(self, n: int, rng: RngLike) -> np.ndarray:
        """``n`` iid realised rows, shape ``(n, len(offsets))``."""
        gen = as_generator(rng)
        if self.kind == "two_diagonal":
            b = specfun.sample(self.G, gen, size=n)
            return np.column_stack((b, 1.0 - b))
        if self.kind == "dirichlet_window":
            return specfun.sample(specfun.dirichlet(self.params), gen, size=n)
        if self.kind == "deterministic_window":
            return np.broadcast_to(np.asarray(self.params), (n, len(self.offsets))).copy()
        w = specfun.sample(self.weight_law, gen, size=n * len(self.offsets))
        w = w.reshape(n, len(self.offsets))
        tot = w.sum(axis=1, keepdims=True)
        if np.any(tot <= 0):
            raise ValueError("weight law produced an all-zero row")
        return w / tot

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.kind == "two_diagonal":
            d["G"] = self.G.to_dict()
            return d
        d["offsets"] = list(self.offsets)
        if self.kind == "dirichlet_window":
            d["alpha"] = list(self.params)
        elif self.kind == "deterministic_window":
            d["weights"] = list(self.params)
        else:
            d["weight"] = self.weight_law.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SharingSpec":
        if not isinstance(d, dict) or "kind" not in d:
            raise ValueError(f"sharing must be an object with a 'kind', got {d!r}")
        kind = d["kind"]
        if kind == "two_diagonal":
            return cls.two_diagonal(DistributionSpec.from_dict(d.get("G")))
        offsets = d.get("offsets")
        if not isinstance(offsets, list):
            raise ValueError("sharing 'offsets' must be a list of integers")
        if kind == "dirichlet_window":
            return cls.dirichlet_window(offsets, d.get("alpha", []))
        if kind == "deterministic_window":
            return cls.deterministic_window(offsets, d.get("weights", []))
        if kind == "normalized_iid":
            return cls.normalized_iid(offsets, DistributionSpec.from_dict(d.get("weight")))
        raise ValueError(f"unknown sharing kind {kind!r}")


def sample_sharing_row(s: SharingSpec, rng: RngLike) -> dict[int, float]:
    row = s.sample_rows(1, rng)[0]
    return {o: float(v) for o, v in zip(s.offsets, row)}


# ---------------------------------------------------------------------------
# Neighbour-dependent shifts on the line


def apply_division_shift(p: PointConfiguration, G: DistributionSpec, rng: RngLike,
                         divisions: np.ndarray | None = None) -> PointConfiguration:
    """Replace every interval ``(x, y)`` by its division point ``x + b (y - x)``.

    n+1 input points give n division points, kept in absolute coordinates
    and indexed left to right. Passing ``divisions`` fixes the b sequence.
    """
    check_division_law(G)
    x = p.points
    if x.size < 2:
        raise ValueError("need at least two points")
    tau = np.diff(x)
    b = specfun.sample(G, rng, size=tau.size) if divisions is None else np.asarray(divisions, float)
    if b.shape != tau.shape:
        raise ValueError("one division variable per interval is required")
    return PointConfiguration(x[:-1] + b * tau)


def apply_exchange_line(g: GapSequence, G: DistributionSpec, rng: RngLike,
                        divisions: np.ndarray | None = None) -> GapSequence:
    """One application of ``tau'_k = (1 - b_k) tau_k + b_{k+1} tau_{k+1}``.

    The last gap has no right neighbour, so the output is one shorter.
    Draws exactly ``len(g)`` division variables, in the same order as
    :func:`apply_division_shift` on the matching points.
    """
    check_division_law(G)
    tau = g.gaps
    if tau.size < 2:
        raise ValueError("need at least two gaps")
    b = specfun.sample(G, rng, size=tau.size) if divisions is None else np.asarray(divisions, float)
    if b.shape != tau.shape:
        raise ValueError("one division variable per gap is required")
    out = (1.0 - b[:-1]) * tau[:-1] + b[1:] * tau[1:]
    return GapSequence(out, dict(g.meta))


def iterate_exchange(g: GapSequence, G: DistributionSpec, n_steps: int, rng: RngLike,
                     callback=None) -> GapSequence:
    """``n_steps`` successive exchange steps; ``callback(step, gaps)`` sees each iterate."""
    if n_steps < 0:
        raise ValueError("n_steps must be >= 0")
    if len(g) <= n_steps + 1 and n_steps > 0:
        raise ValueError(f"{len(g)} gaps cannot support {n_steps} steps")
    gen = as_generator(rng)
    cur = g
    if callback is not None:
        callback(0, cur)
    for step in range(1, n_steps + 1):
        cur = apply_exchange_line(cur, G, gen)
        if callback is not None:
            callback(step, cur)
    return cur


# ---------------------------------------------------------------------------
# Random exchange on the torus Z/NZ


@dataclass
class ExchangeState:
    masses: np.ndarray
    step: int = 0
    total_mass: float | None = None

    def __post_init__(self):
        m = np.asarray(self.masses, dtype=float)
        if m.ndim != 1 or m.size == 0:
            raise ValueError("masses must be a nonempty vector")
        if not np.all(np.isfinite(m)) or np.any(m < 0):
            raise ValueError("masses must be finite and nonnegative")
        self.masses = m
        total = math.fsum(m)
        if self.total_mass is None:
            self.total_mass = total
        elif abs(total - self.total_mass) > 1e-9 * max(abs(total), 1e-300):
            raise ValueError("cached total mass disagrees with the masses")

    @property
    def size(self) -> int:
        return self.masses.size


def _check_torus(N: int, s: SharingSpec) -> None:
    if N <= 2 * s.max_offset:
        raise ValueError(f"torus of size {N} too small for offsets up to {s.max_offset}")


def exchange_masses(masses: np.ndarray, rows: np.ndarray, offsets: Sequence[int]) -> np.ndarray:
    """Push ``masses[..., i] * rows[..., i, c]`` to site ``i + offsets[c]`` (cyclic, last axis)."""
    out = np.zeros_like(masses)
    for c, off in enumerate(offsets):
        out += np.roll(masses * rows[..., c], off, axis=-1)
    return out


def pull_column(values: np.ndarray, rows: np.ndarray, offsets: Sequence[int]) -> np.ndarray:
    """Matrix-vector product ``Pi v``: site i collects ``sum_c rows[i, c] v[i + offsets[c]]``."""
    out = np.zeros_like(values)
    for c, off in enumerate(offsets):
        out += rows[..., c] * np.roll(values, -off, axis=-1)
    return out


def step_random_exchange(st: ExchangeState, s: SharingSpec, rng: RngLike) -> ExchangeState:
    """Every agent samples a sharing row and distributes all its mass by it."""
    _check_torus(st.size, s)
    gen = as_generator(rng)
    rows = s.sample_rows(st.size, gen)
    new = exchange_masses(st.masses, rows, s.offsets)
    total = math.fsum(new)
    if abs(total - st.total_mass) > 1e-9 * max(abs(st.total_mass), 1e-300):
        raise ArithmeticError("mass conservation violated")
    return ExchangeState(new, st.step + 1, total)


@dataclass
class ExchangeTrajectory:
    final: ExchangeState
    snapshots: dict = field(default_factory=dict)
    summaries: list = field(default_factory=list)


def summarize(st: ExchangeState) -> tuple[int, float, float, float]:
    m = st.masses
    return (st.step, float(m.mean()), float(m.var(ddof=1)) if m.size > 1 else 0.0, st.total_mass)


def iterate_random_exchange(st: ExchangeState, s: SharingSpec, n_steps: int, rng: RngLike,
                            snapshots: Iterable[int] = (), summaries: bool = False) -> ExchangeTrajectory:
    """Run ``n_steps`` exchange steps, keeping copies of the masses at ``snapshots``.

    With ``summaries`` every step (including the initial state) contributes a
    ``(step, mean, var, total_mass)`` tuple.
    """
    if n_steps < 0:
        raise ValueError("n_steps must be >= 0")
    _check_torus(st.size, s)
    gen = as_generator(rng)
    want = {int(k) for k in snapshots}
    traj = ExchangeTrajectory(st)
    cur = st
    for step in range(n_steps + 1):
        if step > 0:
            cur = step_random_exchange(cur, s, gen)
        if cur.step in want:
            traj.snapshots[cur.step] = cur.masses.copy()
        if summaries:
            traj.summaries.append(summarize(cur))
    traj.final = cur
    return traj


def euler_sum_value(tau0: Sequence[float], p: float, n: int) -> float:
    """Binomially weighted sum ``sum_j tau0[j] p^j (1-p)^(n-j) C(n, j)``."""
    tau0 = np.asarray(tau0, dtype=float)
    if not 0 < p < 1:
        raise ValueError("p must lie in (0, 1)")
    if n < 0:
        raise ValueError("n must be >= 0")
    if tau0.size <= n:
        raise ValueError(f"need more than {n} initial masses, got {tau0.size}")
    if n == 0:
        return float(tau0[0])
    j = np.arange(n + 1, dtype=float)
    logw = (specfun.log_gamma(n + 1.0) - specfun.log_gamma(j + 1.0) - specfun.log_gamma(n - j + 1.0)
            + j * math.log(p) + (n - j) * math.log1p(-p))
    return math.fsum(tau0[: n + 1] * np.exp(logw))
