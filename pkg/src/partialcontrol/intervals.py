"""Finite unions of disjoint closed intervals on the real line.

Every set handled by the safe-set machinery (target region, safe set,
map images, dilations by the control bound, erosions by the disturbance
bound) is represented this way.  All operations are pure and return sets
in canonical form: components sorted, pairwise disjoint, separated by
more than ``MERGE_EPS``.  Degenerate single-point components are legal
and never dropped silently; a component collapsing to a point is exactly
what a vanishing-point bifurcation looks like, so it must stay visible.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

# Gap below which two components are fused during normalization.  All
# feature sizes in this problem class are >= 1e-4 state units, so 1e-12
# absorbs float roundoff without ever eating a real gap.
MERGE_EPS = 1e-12


class Interval(NamedTuple):
    """Closed interval [lo, hi]; lo == hi is a legal single point."""

    lo: float
    hi: float

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def midpoint(self) -> float:
        return 0.5 * (self.lo + self.hi)


def _check_endpoints(lo: float, hi: float) -> None:
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise ValueError(f"interval endpoints must be finite, got [{lo}, {hi}]")
    if lo > hi:
        raise ValueError(f"interval with lo > hi: [{lo}, {hi}]")


@dataclass(frozen=True)
class IntervalSet:
    """Canonical finite union of disjoint closed intervals.

    Construct through :func:`normalize`, :meth:`from_pairs` or the set
    operations below; the constructor itself validates canonical form.
    Instances are immutable and safe to share across threads.
    """

    intervals: tuple[Interval, ...] = ()

    def __post_init__(self) -> None:
        prev_hi = None
        for iv in self.intervals:
            _check_endpoints(iv.lo, iv.hi)
            if prev_hi is not None and iv.lo - prev_hi <= MERGE_EPS:
                raise ValueError(
                    f"components not separated by more than {MERGE_EPS}: "
                    f"...{prev_hi}], [{iv.lo}..."
                )
            prev_hi = iv.hi

    # -- constructors ------------------------------------------------

    @classmethod
    def empty(cls) -> "IntervalSet":
        return cls(())

    @classmethod
    def point(cls, x: float) -> "IntervalSet":
        return cls((Interval(x, x),))

    @classmethod
    def from_pairs(cls, pairs: Iterable[Sequence[float]],
                   merge_eps: float = MERGE_EPS) -> "IntervalSet":
        return normalize([Interval(float(p[0]), float(p[1])) for p in pairs],
                         merge_eps)

    def to_pairs(self) -> list[list[float]]:
        """JSON-friendly form: sorted list of [lo, hi] pairs, [] if empty."""
        return [[iv.lo, iv.hi] for iv in self.intervals]

    # -- basic queries -----------------------------------------------

    @property
    def is_empty(self) -> bool:
        return not self.intervals

    def num_components(self) -> int:
        return len(self.intervals)

    def measure(self) -> float:
        return sum(iv.hi - iv.lo for iv in self.intervals)

    def hull(self) -> Interval:
        if self.is_empty:
            raise ValueError("hull of empty set")
        return Interval(self.intervals[0].lo, self.intervals[-1].hi)

    def min_gap(self) -> float | None:
        """Smallest gap between adjacent components, None if < 2 components."""
        if len(self.intervals) < 2:
            return None
        return min(nxt.lo - cur.hi
                   for cur, nxt in zip(self.intervals, self.intervals[1:]))

    def gaps(self) -> list[float]:
        return [nxt.lo - cur.hi
                for cur, nxt in zip(self.intervals, self.intervals[1:])]

    def contains(self, x: float, tol: float = 0.0) -> bool:
        return self.point_distance(x) <= tol if self.intervals else False

    def point_distance(self, x: float) -> float:
        """Distance from x to the set (0 if x is a member)."""
        if self.is_empty:
            raise ValueError("distance to empty set")
        los = [iv.lo for iv in self.intervals]
        k = bisect_right(los, x)
        best = math.inf
        if k > 0:
            left = self.intervals[k - 1]
            if x <= left.hi:
                return 0.0
            best = x - left.hi
        if k < len(self.intervals):
            best = min(best, self.intervals[k].lo - x)
        return best

    def nearest_point(self, x: float) -> float:
        """Closest member of the set; at an exact tie the smaller one."""
        if self.is_empty:
            raise ValueError("nearest point of empty set")
        los = [iv.lo for iv in self.intervals]
        k = bisect_right(los, x)
        if k > 0:
            left = self.intervals[k - 1]
            if x <= left.hi:
                return x
            if k == len(self.intervals):
                return left.hi
            right = self.intervals[k]
            return left.hi if x - left.hi <= right.lo - x else right.lo
        return self.intervals[0].lo

    def is_subset(self, other: "IntervalSet", tol: float = 0.0) -> bool:
        """True if every component lies inside some component of other
        (endpoints may stick out by at most tol)."""
        if self.is_empty:
            return True
        if other.is_empty:
            return False
        los = [iv.lo for iv in other.intervals]
        for iv in self.intervals:
            k = bisect_right(los, iv.lo + tol)
            if k == 0:
                return False
            host = other.intervals[k - 1]
            if iv.lo < host.lo - tol or iv.hi > host.hi + tol:
                return False
        return True

    # -- set algebra --------------------------------------------------

    def union(self, other: "IntervalSet") -> "IntervalSet":
        return normalize(list(self.intervals) + list(other.intervals))

    def intersect(self, other: "IntervalSet") -> "IntervalSet":
        out: list[Interval] = []
        i = j = 0
        a, b = self.intervals, other.intervals
        while i < len(a) and j < len(b):
            lo = max(a[i].lo, b[j].lo)
            hi = min(a[i].hi, b[j].hi)
            if lo <= hi:
                out.append(Interval(lo, hi))
            if a[i].hi < b[j].hi:
                i += 1
            else:
                j += 1
        return normalize(out)

    def complement_within(self, lo: float, hi: float) -> "IntervalSet":
        """Closure of [lo, hi] minus this set."""
        _check_endpoints(lo, hi)
        clipped = self.intersect(IntervalSet((Interval(lo, hi),)))
        out: list[Interval] = []
        cursor = lo
        for iv in clipped.intervals:
            if iv.lo > cursor:
                out.append(Interval(cursor, iv.lo))
            cursor = max(cursor, iv.hi)
        if cursor < hi:
            out.append(Interval(cursor, hi))
        return normalize(out)

    def translate(self, c: float) -> "IntervalSet":
        if not math.isfinite(c):
            raise ValueError(f"translation must be finite, got {c}")
        return IntervalSet(tuple(Interval(iv.lo + c, iv.hi + c)
                                 for iv in self.intervals))

    # -- morphology ---------------------------------------------------

    def dilate(self, u: float) -> "IntervalSet":
        """All points within distance u of the set; gaps <= 2u close up."""
        _check_radius(u)
        return normalize([Interval(iv.lo - u, iv.hi + u) for iv in self.intervals])

    def erode(self, u: float) -> "IntervalSet":
        """Points whose u-ball fits inside the set; components narrower
        than 2u vanish, width exactly 2u leaves a single point."""
        _check_radius(u)
        out = [Interval(iv.lo + u, iv.hi - u)
               for iv in self.intervals if iv.hi - u >= iv.lo + u]
        return normalize(out)

    # -- metrics ------------------------------------------------------

    def directed_excess(self, other: "IntervalSet") -> tuple[float, float]:
        """sup over x in self of d(x, other), with a witness point.

        The supremum is attained at a component endpoint of self or at a
        gap midpoint of other lying inside a component of self.
        """
        if self.is_empty:
            return 0.0, math.nan
        if other.is_empty:
            raise ValueError("excess against empty set")
        mids = [0.5 * (cur.hi + nxt.lo)
                for cur, nxt in zip(other.intervals, other.intervals[1:])]
        worst, witness = -1.0, math.nan
        for iv in self.intervals:
            candidates = [iv.lo, iv.hi]
            candidates.extend(m for m in mids if iv.lo < m < iv.hi)
            for c in candidates:
                d = other.point_distance(c)
                if d > worst:
                    worst, witness = d, c
        return worst, witness

    def hausdorff_distance(self, other: "IntervalSet") -> float:
        if self.is_empty or other.is_empty:
            raise ValueError("Hausdorff distance needs nonempty operands")
        return max(self.directed_excess(other)[0],
                   other.directed_excess(self)[0])

    def __repr__(self) -> str:
        inner = " u ".join(f"[{iv.lo:.6g}, {iv.hi:.6g}]" for iv in self.intervals)
        return f"IntervalSet({inner or 'empty'})"


def _check_radius(u: float) -> None:
    if not (math.isfinite(u) and u >= 0.0):
        raise ValueError(f"radius must be finite and >= 0, got {u}")


def normalize(raw: Iterable[Interval | Sequence[float]],
              merge_eps: float = MERGE_EPS) -> IntervalSet:
    """Canonicalize a list of intervals: sort, fuse overlaps and gaps
    <= merge_eps.  Rejects lo > hi and non-finite endpoints."""
    items: list[Interval] = []
    for r in raw:
        iv = r if isinstance(r, Interval) else Interval(float(r[0]), float(r[1]))
        _check_endpoints(iv.lo, iv.hi)
        items.append(iv)
    items.sort()
    merged: list[Interval] = []
    for iv in items:
        if merged and iv.lo - merged[-1].hi <= merge_eps:
            last = merged[-1]
            if iv.hi > last.hi:
                merged[-1] = Interval(last.lo, iv.hi)
        else:
            merged.append(iv)
    return IntervalSet(tuple(merged))


def sets_close(a: IntervalSet, b: IntervalSet, tol: float = 1e-11) -> bool:
    """Equality up to tol in Hausdorff distance (empty == empty)."""
    if a.is_empty or b.is_empty:
        return a.is_empty and b.is_empty
    return a.hausdorff_distance(b) <= tol
