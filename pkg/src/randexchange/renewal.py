"""Palm gap sequences and point configurations of renewal processes."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import specfun
from .specfun import DistributionSpec, RngLike


def format_real(x: float) -> str:
    """Shortest round-trip decimal, without a trailing ``.0`` on integers."""
    s = repr(float(x))
    return s[:-2] if s.endswith(".0") else s


@dataclass
class GapSequence:
    """Lengths tau_1..tau_n of consecutive inter-point intervals."""

    gaps: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        g = np.asarray(self.gaps, dtype=float)
        if g.ndim != 1 or g.size < 1:
            raise ValueError("a gap sequence needs at least one gap")
        if not np.all(np.isfinite(g)) or np.any(g <= 0):
            raise ValueError("gaps must be finite and strictly positive")
        self.gaps = g

    def __len__(self):
        return self.gaps.size


@dataclass
class PointConfiguration:
    """Strictly increasing finite point set on the line.

    Configurations built from gaps start at the origin ``T_0 = 0``; the
    output of a division shift keeps absolute positions, so ``anchored`` may
    be False there (see :meth:`recentred`).
    """

    points: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.points, dtype=float)
        if p.ndim != 1 or p.size < 1:
            raise ValueError("need at least one point")
        if not np.all(np.isfinite(p)):
            raise ValueError("points must be finite")
        if np.any(np.diff(p) <= 0):
            raise ValueError("points must be strictly increasing")
        self.points = p

    @property
    def anchored(self) -> bool:
        return self.points[0] == 0.0

    def recentred(self) -> "PointConfiguration":
        return PointConfiguration(self.points - self.points[0])

    def __len__(self):
        return self.points.size


def sample_gaps(F: DistributionSpec, n: int, rng: RngLike) -> GapSequence:
    """``n`` iid interval lengths drawn from ``F``."""
    if not F.is_scalar:
        raise ValueError("interval law must be scalar")
    lo, _ = specfun.support(F)
    if lo < 0 or (F.kind == "deterministic" and F.params[0] <= 0):
        raise ValueError(f"interval law {F} must live on (0, inf)")
    if n < 2:
        raise ValueError("n must be >= 2")
    meta = {"F": F.to_dict()}
    if isinstance(rng, specfun.RngHandle):
        meta.update(seed=rng.seed, stream=rng.stream)
    return GapSequence(specfun.sample(F, rng, size=n), meta)


def gaps_to_points(g: GapSequence) -> PointConfiguration:
    with np.errstate(over="ignore"):
        pts = np.concatenate(([0.0], np.cumsum(g.gaps)))
    if not math.isfinite(pts[-1]):
        raise OverflowError("partial sums of gaps overflowed")
    return PointConfiguration(pts)


def points_to_gaps(p: PointConfiguration) -> GapSequence:
    return GapSequence(np.diff(p.points))


# CSV: header line then one decimal per line


def write_column_csv(path, values, header: str) -> None:
    buf = io.StringIO()
    buf.write(header + "\n")
    buf.write("\n".join(format_real(v) for v in values))
    buf.write("\n")
    Path(path).write_text(buf.getvalue())


def read_column_csv(path, header: str) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or [c.strip() for c in rows[0]] != [header]:
        raise ValueError(f"{path}: expected a single '{header}' column header")
    return np.array([float(r[0]) for r in rows[1:] if r and r[0].strip()])


def write_gaps_csv(path, g: GapSequence) -> None:
    write_column_csv(path, g.gaps, "tau")


def read_gaps_csv(path) -> GapSequence:
    return GapSequence(read_column_csv(path, "tau"), {"source": str(path)})
