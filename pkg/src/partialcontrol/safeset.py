"""Maximal safe sets by the sculpting fixed-point iteration.

A set S inside the target Q is safe when for every x in S and every
disturbance |xi| <= beta some control |u| <= u_bound puts f(x)+xi+u back
in S; equivalently dilate(f(S), beta) is contained in dilate(S, u_bound).
The largest such set is the limit of the anti-monotone iteration

    S_{k+1} = S_k  intersect  f^{-1}( erode( dilate(S_k, u), beta ) )

started from Q.  For piecewise-linear maps the geometric tail of that
iteration is replaced by one exact linear solve (the polish pass) once
the iterate has converged, giving machine-precision endpoints.

A brute-force grid oracle implementing the quantifier definition
directly ("for every sampled xi there is a sampled u landing near a
surviving grid point") lives here too; it shares no code with the
interval path and is the independent cross-check for it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .boundary import (BoundaryClassificationError, build_boundary_system,
                       positions_to_set, solve_positions)
from .intervals import Interval, IntervalSet, MERGE_EPS, normalize
from .maps import PiecewiseLinearMap

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 100_000


class NonExpandingMapError(ValueError):
    """The map has a piece with |slope| <= 1 and no override was given."""


@dataclass(frozen=True)
class ControlParams:
    """Bounds and target region of one partial-control problem.

    u_bound is the control bound, beta the disturbance bound.  The
    interesting regime is u_bound < beta; larger control is accepted but
    flagged as outside the regime the theory addresses.
    """

    u_bound: float
    beta: float
    target: IntervalSet

    def __post_init__(self) -> None:
        if not (self.u_bound > 0 and math.isfinite(self.u_bound)):
            raise ValueError(f"u_bound must be positive, got {self.u_bound}")
        if not (self.beta > 0 and math.isfinite(self.beta)):
            raise ValueError(f"beta must be positive, got {self.beta}")
        if self.target.num_components() != 1:
            raise ValueError("target must be a single interval")
        if self.target.intervals[0].width <= 0:
            raise ValueError("target must be non-degenerate")

    @classmethod
    def make(cls, u_bound: float, beta: float, q_lo: float, q_hi: float) -> "ControlParams":
        return cls(u_bound, beta, IntervalSet((Interval(q_lo, q_hi),)))

    @property
    def target_interval(self) -> Interval:
        return self.target.intervals[0]

    @property
    def outside_regime(self) -> bool:
        return self.u_bound >= self.beta


@dataclass(frozen=True)
class SafeSetResult:
    safe_set: IntervalSet
    iterations: int
    converged: bool
    residual: float              # Hausdorff distance between the final two iterates
    maximality_residual: float   # 0.0 for the empty set
    polished: bool = False
    outside_regime: bool = False


@dataclass(frozen=True)
class SafeCheck:
    ok: bool
    worst_violation: float
    witness: float  # point of dilate(f(S), beta) farthest from dilate(S, u)


def _require_expanding(f: PiecewiseLinearMap, allow_nonexpanding: bool) -> None:
    if not f.is_expanding and not allow_nonexpanding:
        raise NonExpandingMapError(
            "map is not piecewise expanding (|slope| <= 1 somewhere); "
            "pass allow_nonexpanding=True to proceed anyway")


def sculpt_step(S: IntervalSet, f: PiecewiseLinearMap, p: ControlParams,
                allow_nonexpanding: bool = False) -> IntervalSet:
    """One deletion sweep: keep the part of S whose image, after the
    worst admissible disturbance, can still be pushed back into S."""
    _require_expanding(f, allow_nonexpanding)
    if S.is_empty:
        return S
    admissible = S.dilate(p.u_bound).erode(p.beta)
    if admissible.is_empty:
        return IntervalSet.empty()
    return S.intersect(f.preimage_of(admissible))


def maximal_safe_set(f: PiecewiseLinearMap, p: ControlParams,
                     tol: float = DEFAULT_TOL,
                     max_iter: int = DEFAULT_MAX_ITER,
                     polish: bool = True,
                     allow_nonexpanding: bool = False) -> SafeSetResult:
    """Largest safe set inside the target, with convergence diagnostics.

    An empty result with converged=True means no safe set exists at these
    bounds.  Non-convergence within max_iter is reported through
    converged=False, never silently.
    """
    if tol <= 0 or max_iter < 1:
        raise ValueError("tol must be > 0 and max_iter >= 1")
    _require_expanding(f, allow_nonexpanding)
    S = p.target
    residual = math.inf
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        nxt = sculpt_step(S, f, p, allow_nonexpanding)
        if nxt.is_empty:
            return SafeSetResult(nxt, iterations, True, 0.0, 0.0,
                                 outside_regime=p.outside_regime)
        residual = S.hausdorff_distance(nxt)
        S = nxt
        if residual <= tol:
            converged = True
            break
    polished = False
    if converged and polish and not S.is_empty:
        refined = _polish(S, f, p)
        if refined is not None:
            S, polished = refined, True
    maxres = verify_maximality(S, f, p) if (converged and not S.is_empty) else 0.0
    return SafeSetResult(S, iterations, converged, residual, maxres,
                         polished=polished, outside_regime=p.outside_regime)


def _polish(S: IntervalSet, f: PiecewiseLinearMap, p: ControlParams) -> IntervalSet | None:
    """Replace near-converged endpoints by the exact solution of their
    boundary equations; None when the structure does not classify."""
    try:
        sys = build_boundary_system(f, S, p.u_bound, p.beta,
                                    p.target_interval, tol=1e-5)
        pos = solve_positions(sys, p.u_bound, p.beta)
        refined = positions_to_set(sys, pos)
    except (BoundaryClassificationError, ValueError, np.linalg.LinAlgError):
        return None
    # the exact solution must sit where the iterate already is
    if refined.is_empty or refined.num_components() != S.num_components():
        return None
    if refined.hausdorff_distance(S) > 1e-4:
        return None
    if not verify_safe(refined, f, p, tol=1e-9).ok:
        return None
    return refined


def verify_safe(S: IntervalSet, f: PiecewiseLinearMap, p: ControlParams,
                tol: float = 1e-9) -> SafeCheck:
    """Check dilate(f(S), beta) inside dilate(S, u) up to Hausdorff slack
    tol; reports the worst-violating point.  Empty sets are vacuously
    safe."""
    if S.is_empty:
        return SafeCheck(True, 0.0, math.nan)
    needed = f.image_of(S).dilate(p.beta)
    available = S.dilate(p.u_bound)
    excess, witness = needed.directed_excess(available)
    return SafeCheck(excess <= tol, excess, witness)


def verify_maximality(S: IntervalSet, f: PiecewiseLinearMap,
                      p: ControlParams) -> float:
    """Residual of the maximality identity: Hausdorff distance between
    dilate(f(S), beta) and dilate(f(Q), beta) intersect dilate(S, u).
    Zero (to roundoff) certifies that S is the maximal safe set."""
    if S.is_empty:
        raise ValueError("maximality residual needs a nonempty set")
    lhs = f.image_of(S).dilate(p.beta)
    rhs = f.image_of(p.target).dilate(p.beta).intersect(S.dilate(p.u_bound))
    if rhs.is_empty:
        return math.inf
    return lhs.hausdorff_distance(rhs)


# -- independent grid oracle ------------------------------------------

def brute_force_safe_grid(f: PiecewiseLinearMap, p: ControlParams,
                          n_grid: int, n_xi: int, n_u: int):
    """Discretized safe set straight from the quantifier definition.

    The target is sampled at n_grid points; a point x survives a sweep
    when for every sampled disturbance xi some sampled control u brings
    f(x)+xi+u within one grid spacing of a surviving point.  Sweeps
    repeat until nothing more dies.  Returns (grid, mask).
    """
    if n_grid < 100:
        raise ValueError("n_grid must be >= 100")
    q = p.target_interval
    grid = np.linspace(q.lo, q.hi, n_grid)
    h = grid[1] - grid[0]
    images = f.eval_array(grid)
    xis = np.linspace(-p.beta, p.beta, n_xi)
    # worst disturbances first: lets the all-xi test fail fast
    xis = xis[np.argsort(-np.abs(xis), kind="stable")]
    us = np.linspace(-p.u_bound, p.u_bound, n_u)
    reach_tol = h + 1e-12

    alive = np.ones(n_grid, dtype=bool)
    while True:
        survivors = grid[alive]
        if survivors.size == 0:
            break
        idx = np.flatnonzero(alive)
        ok = np.ones(idx.size, dtype=bool)
        y = images[idx]
        for xi in xis:
            pending = np.flatnonzero(ok)
            if pending.size == 0:
                break
            targets = y[pending, None] + xi + us[None, :]
            flat = targets.ravel()
            j = np.searchsorted(survivors, flat)
            dist = np.full(flat.shape, np.inf)
            has_right = j < survivors.size
            dist[has_right] = survivors[j[has_right]] - flat[has_right]
            has_left = j > 0
            dist[has_left] = np.minimum(dist[has_left],
                                        flat[has_left] - survivors[j[has_left] - 1])
            reachable = (dist <= reach_tol).reshape(targets.shape).any(axis=1)
            ok[pending[~reachable]] = False
        if ok.all():
            break
        alive[idx[~ok]] = False
    return grid, alive


def mask_components(grid: np.ndarray, mask: np.ndarray) -> IntervalSet:
    """Runs of surviving grid points as an interval set."""
    if not mask.any():
        return IntervalSet.empty()
    padded = np.concatenate(([False], mask, [False]))
    starts = np.flatnonzero(padded[1:] & ~padded[:-1])
    ends = np.flatnonzero(~padded[1:] & padded[:-1]) - 1
    return normalize([Interval(float(grid[a]), float(grid[b]))
                      for a, b in zip(starts, ends)])
