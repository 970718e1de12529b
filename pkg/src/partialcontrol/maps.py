"""Continuous piecewise-linear maps of a compact interval.

A map is stored as breakpoints x0 < ... < xm plus the values at those
breakpoints, so continuity holds by construction.  Evaluation outside
[x0, xm] is an error: the simulator decides what leaving the domain
means, the map must not extrapolate.  Images and preimages of interval
sets are computed exactly, one monotone piece at a time.
"""

from __future__ import annotations

import json
import math
from bisect import bisect_right
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .intervals import Interval, IntervalSet, normalize


class MapDomainError(ValueError):
    """A point or set falls outside the map's domain."""


@dataclass(frozen=True)
class PiecewiseLinearMap:
    breakpoints: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self) -> None:
        bp, val = self.breakpoints, self.values
        if len(bp) < 2 or len(bp) != len(val):
            raise ValueError("need m >= 1 pieces: len(breakpoints) == len(values) >= 2")
        if any(not math.isfinite(x) for x in bp) or any(not math.isfinite(v) for v in val):
            raise ValueError("breakpoints and values must be finite")
        if any(b >= c for b, c in zip(bp, bp[1:])):
            raise ValueError("breakpoints must be strictly increasing")
        slopes = tuple((val[k + 1] - val[k]) / (bp[k + 1] - bp[k])
                       for k in range(len(bp) - 1))
        object.__setattr__(self, "_slopes", slopes)

    # -- structure ----------------------------------------------------

    @property
    def domain(self) -> Interval:
        return Interval(self.breakpoints[0], self.breakpoints[-1])

    @property
    def slopes(self) -> tuple[float, ...]:
        return self._slopes  # type: ignore[attr-defined]

    @property
    def is_expanding(self) -> bool:
        """|slope| > 1 on every piece."""
        return all(abs(s) > 1.0 for s in self.slopes)

    def piece_index(self, x: float) -> int:
        """Index of the piece whose closed span contains x (ties between
        adjacent pieces resolve to the left piece's right neighbour)."""
        self._check_in_domain(x)
        k = bisect_right(self.breakpoints, x) - 1
        return min(k, len(self.slopes) - 1)

    def piece_line(self, k: int) -> tuple[float, float]:
        """(slope, intercept) of piece k, so f(x) = slope*x + intercept."""
        s = self.slopes[k]
        return s, self.values[k] - s * self.breakpoints[k]

    def _check_in_domain(self, x: float) -> None:
        if not (self.breakpoints[0] <= x <= self.breakpoints[-1]):
            raise MapDomainError(
                f"x={x} outside domain [{self.breakpoints[0]}, {self.breakpoints[-1]}]")

    def in_domain(self, x: float) -> bool:
        return self.breakpoints[0] <= x <= self.breakpoints[-1]

    # -- evaluation ---------------------------------------------------

    def eval(self, x: float) -> float:
        self._check_in_domain(x)
        k = bisect_right(self.breakpoints, x) - 1
        if k >= len(self.slopes):
            return self.values[-1]
        return self.values[k] + self.slopes[k] * (x - self.breakpoints[k])

    def eval_array(self, xs: np.ndarray) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        if xs.size and (xs.min() < self.breakpoints[0] or xs.max() > self.breakpoints[-1]):
            raise MapDomainError("array evaluation outside domain")
        return np.interp(xs, self.breakpoints, self.values)

    def derivative_at(self, x: float) -> float:
        """Slope of the piece containing x; a breakpoint is an error
        because the map need not be differentiable there."""
        self._check_in_domain(x)
        if x in self.breakpoints:
            raise ValueError(f"derivative undefined at breakpoint x={x}")
        return self.slopes[bisect_right(self.breakpoints, x) - 1]

    # -- set images ---------------------------------------------------

    def image_of(self, X: IntervalSet) -> IntervalSet:
        """Exact f(X), computed per monotone piece and unioned."""
        if X.is_empty:
            return IntervalSet.empty()
        lo, hi = X.hull()
        if lo < self.breakpoints[0] or hi > self.breakpoints[-1]:
            raise MapDomainError("set exceeds map domain")
        out: list[Interval] = []
        for iv in X.intervals:
            for k in range(len(self.slopes)):
                a = max(iv.lo, self.breakpoints[k])
                b = min(iv.hi, self.breakpoints[k + 1])
                if a > b:
                    continue
                fa = self.values[k] + self.slopes[k] * (a - self.breakpoints[k])
                fb = self.values[k] + self.slopes[k] * (b - self.breakpoints[k])
                out.append(Interval(min(fa, fb), max(fa, fb)))
        return normalize(out)

    def preimage_of(self, Y: IntervalSet) -> IntervalSet:
        """Exact f^{-1}(Y) within the domain, solving each piece."""
        if Y.is_empty:
            return IntervalSet.empty()
        out: list[Interval] = []
        for k, s in enumerate(self.slopes):
            xk, xk1 = self.breakpoints[k], self.breakpoints[k + 1]
            vk, vk1 = self.values[k], self.values[k + 1]
            vlo, vhi = min(vk, vk1), max(vk, vk1)
            for iv in Y.intervals:
                ylo, yhi = max(iv.lo, vlo), min(iv.hi, vhi)
                if ylo > yhi:
                    continue
                if s == 0.0:
                    out.append(Interval(xk, xk1))
                    continue
                xa = xk + (ylo - vk) / s
                xb = xk + (yhi - vk) / s
                if s < 0:
                    xa, xb = xb, xa
                # clamp pure roundoff back into the piece
                xa, xb = max(xa, xk), min(xb, xk1)
                if xa <= xb:
                    out.append(Interval(xa, xb))
        return normalize(out)


def asymmetric_tent() -> PiecewiseLinearMap:
    """The built-in asymmetric tent map: slope 1.3 up to the peak at
    x = 0.7 (value 0.91), slope -3 down to f(1) = 0.01."""
    return PiecewiseLinearMap(breakpoints=(0.0, 0.7, 1.0), values=(0.0, 0.91, 0.01))


BUILTIN_MAPS = {"asymmetric-tent": asymmetric_tent}


def map_from_dict(d: dict) -> PiecewiseLinearMap:
    return PiecewiseLinearMap(breakpoints=tuple(float(x) for x in d["breakpoints"]),
                              values=tuple(float(v) for v in d["values"]))


def load_map(source: str) -> PiecewiseLinearMap:
    """Resolve a map from a builtin name or a JSON file path with
    {"breakpoints": [...], "values": [...]}."""
    if source in BUILTIN_MAPS:
        return BUILTIN_MAPS[source]()
    with open(source) as fh:
        return map_from_dict(json.load(fh))
