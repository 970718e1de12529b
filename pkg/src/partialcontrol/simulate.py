"""Trajectory simulation: free, disturbed, and partially controlled runs.

Three layers of the same recursion x_{n+1} = f(x_n) + xi_n + u_n:

* uncontrolled: xi = u = 0,
* perturbed: |xi| <= beta chosen by a disturbance strategy, u = 0,
* controlled: the controller sees f(x_n) + xi_n and answers with the
  admissible u that moves the state to the nearest point of the safe
  set (zero if it is already inside).

Perturbed runs may leave the target region -- that is the phenomenon
under study -- and only stop early if they leave the map's domain,
which is reported through ``exit_step``.  Controlled runs must keep
every state inside the safe set; a violation beyond float roundoff is a
bug, not a tolerated outcome, and raises ``SafetyViolationError``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .intervals import Interval, IntervalSet
from .maps import PiecewiseLinearMap
from .safeset import ControlParams

# Distance by which a controlled state may miss the safe set before it
# is treated as a genuine invariant breach instead of float slip.
SAFETY_SNAP_TOL = 1e-9


class SafetyViolationError(RuntimeError):
    """A controlled trajectory left the safe set by more than roundoff."""


@dataclass(frozen=True)
class TrajectoryRecord:
    """One simulated run.

    states has length N+1; disturbances and controls have length N and
    satisfy x_{n+1} = f(x_n) + xi_n + u_n (to within SAFETY_SNAP_TOL on
    controlled steps, where the state is re-anchored onto the safe set).
    crash_flags marks states below crash_threshold.  exit_step is the
    index of the first state outside the map's domain, None for a
    completed run.
    """

    states: tuple[float, ...]
    disturbances: tuple[float, ...]
    controls: tuple[float, ...]
    crash_flags: tuple[bool, ...]
    mean_state: float
    crash_threshold: float
    exit_step: int | None = None

    @property
    def n_steps(self) -> int:
        return len(self.states) - 1

    @property
    def n_crashes(self) -> int:
        return sum(self.crash_flags)


@dataclass(frozen=True)
class DisturbanceStrategy:
    """Recipe for the disturbance sequence.

    kind: 'uniform' (xi ~ U(-beta, beta)), 'extremal' (xi = +-beta with
    random sign), 'adversarial' (deterministic greedy pessimization: the
    sign of beta that minimizes the smaller of the next two uncontrolled
    states), or 'scripted' (explicit values).
    """

    kind: str
    seed: int | None = None
    values: tuple[float, ...] = ()

    _KINDS = ("uniform", "extremal", "adversarial", "scripted")

    def __post_init__(self) -> None:
        if self.kind not in self._KINDS:
            raise ValueError(f"unknown strategy {self.kind!r}; pick from {self._KINDS}")

    def sampler(self, f: PiecewiseLinearMap, beta: float):
        """Per-run closure producing xi_n from (step, f(x_n))."""
        if self.kind == "scripted":
            script = self.values

            def scripted(step: int, fx: float) -> float:
                if step >= len(script):
                    raise ValueError(f"scripted disturbances exhausted at step {step}")
                xi = script[step]
                if abs(xi) > beta:
                    raise ValueError(f"scripted xi={xi} exceeds beta={beta}")
                return xi
            return scripted
        if self.kind == "adversarial":
            def adversarial(step: int, fx: float) -> float:
                best_xi, best_score = -beta, math.inf
                for xi in (-beta, beta):
                    x1 = fx + xi
                    score = min(x1, f.eval(x1)) if f.in_domain(x1) else x1
                    if score < best_score:
                        best_xi, best_score = xi, score
                return best_xi
            return adversarial
        rng = np.random.default_rng(self.seed)
        if self.kind == "uniform":
            return lambda step, fx: float(rng.uniform(-beta, beta))
        return lambda step, fx: float(beta if rng.integers(2) else -beta)


def _finish(states: list[float], xis: list[float], us: list[float],
            threshold: float, exit_step: int | None) -> TrajectoryRecord:
    crashes = tuple(x < threshold for x in states)
    return TrajectoryRecord(tuple(states), tuple(xis), tuple(us), crashes,
                            float(np.mean(states)), threshold, exit_step)


def simulate_uncontrolled(f: PiecewiseLinearMap, x0: float, n: int,
                          crash_threshold: float = 0.5) -> TrajectoryRecord:
    """n iterations of the bare map; stops early on domain exit."""
    return simulate_perturbed(f, x0, n, beta=0.0, strategy=None,
                              crash_threshold=crash_threshold)


def simulate_perturbed(f: PiecewiseLinearMap, x0: float, n: int, beta: float,
                       strategy: DisturbanceStrategy | None,
                       crash_threshold: float = 0.5) -> TrajectoryRecord:
    """Disturbed, uncontrolled dynamics; beta = 0 degenerates to the
    bare map.  States may leave the target region freely."""
    if n < 0:
        raise ValueError("n must be >= 0")
    if beta < 0:
        raise ValueError("beta must be >= 0")
    if not f.in_domain(x0):
        raise ValueError(f"x0={x0} outside map domain")
    sample = (strategy.sampler(f, beta) if strategy is not None and beta > 0
              else (lambda step, fx: 0.0))
    states, xis, us = [x0], [], []
    exit_step = None
    x = x0
    for k in range(n):
        fx = f.eval(x)
        xi = sample(k, fx)
        if abs(xi) > beta:
            raise AssertionError("strategy produced an inadmissible disturbance")
        x = fx + xi
        states.append(x)
        xis.append(xi)
        us.append(0.0)
        if not f.in_domain(x):
            exit_step = k + 1
            break
    return _finish(states, xis, us, crash_threshold, exit_step)


def control_law(S: IntervalSet, u_bound: float, y: float) -> float:
    """Minimal admissible correction: push the observed value y toward
    the nearest point of S, clamped to the control bound.  When the
    state was safe and the disturbance admissible, the clamp is
    inactive and y + u lands exactly on S."""
    if S.is_empty:
        raise ValueError("control law needs a nonempty safe set")
    u = S.nearest_point(y) - y
    return max(-u_bound, min(u_bound, u))


def simulate_controlled(f: PiecewiseLinearMap, x0: float, n: int,
                        p: ControlParams, S: IntervalSet,
                        strategy: DisturbanceStrategy | None,
                        crash_threshold: float | None = None) -> TrajectoryRecord:
    """Disturbance plus feedback control; every state stays in S.

    The controller observes f(x_n) + xi_n.  States are re-anchored onto
    S when float roundoff leaves them within SAFETY_SNAP_TOL of it; any
    larger excursion aborts with SafetyViolationError because it breaks
    the safe-set guarantee.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    if S.is_empty:
        raise ValueError("controlled run needs a nonempty safe set")
    if S.point_distance(x0) > SAFETY_SNAP_TOL:
        raise ValueError(f"x0={x0} is not in the safe set")
    if crash_threshold is None:
        crash_threshold = p.target_interval.lo
    sample = (strategy.sampler(f, p.beta) if strategy is not None and p.beta > 0
              else (lambda step, fx: 0.0))
    x = S.nearest_point(x0)
    states, xis, us = [x], [], []
    for k in range(n):
        fx = f.eval(x)
        xi = sample(k, fx)
        if abs(xi) > p.beta:
            raise AssertionError("strategy produced an inadmissible disturbance")
        y = fx + xi
        u = control_law(S, p.u_bound, y)
        x_next = y + u
        if not S.contains(x_next):
            slip = S.point_distance(x_next)
            if slip > SAFETY_SNAP_TOL:
                raise SafetyViolationError(
                    f"step {k}: state {x_next} misses the safe set by {slip:.3g}; "
                    "safe-set guarantee broken")
            x_next = S.nearest_point(x_next)
        x = x_next
        states.append(x)
        xis.append(xi)
        us.append(u)
    return _finish(states, xis, us, crash_threshold, None)


# -- escape certificates ----------------------------------------------

@dataclass(frozen=True)
class EscapeCertificate:
    """Disturbance script after which no admissible control keeps the
    state inside the target region, plus the verified step count."""

    start: float
    script: tuple[float, ...]
    steps: int


def _reach_step(R: IntervalSet, xi: float, f: PiecewiseLinearMap,
                p: ControlParams) -> IntervalSet:
    """States reachable in one step while staying in the target, over
    all admissible controls, for a fixed disturbance xi."""
    return f.image_of(R).translate(xi).dilate(p.u_bound).intersect(p.target)


def verify_escape(f: PiecewiseLinearMap, p: ControlParams, x0: float,
                  script: tuple[float, ...]) -> bool:
    """Exhaustive interval propagation: does the script leave an empty
    controller-reachable set inside the target?"""
    R = IntervalSet.point(x0)
    for xi in script:
        R = _reach_step(R, xi, f, p)
        if R.is_empty:
            return True
    return False


def adversarial_escape(f: PiecewiseLinearMap, p: ControlParams, S: IntervalSet,
                       x0: float, max_depth: int = 25,
                       node_budget: int = 50_000) -> EscapeCertificate | None:
    """Search for a disturbance script driving x0 out of the target no
    matter how the controller answers.

    The adversary plays xi in {-beta, +beta} (midpoint refinements are
    added if the extremes fail); the controller's options are tracked as
    a reachable interval set, which dominates every pointwise
    best-response.  A found script is re-verified by verify_escape
    before it is returned; None means nothing was found within
    max_depth, not that no escape exists.
    """
    if not p.target.contains(x0):
        raise ValueError(f"x0={x0} is outside the target region")
    if not S.is_empty and S.contains(x0):
        raise ValueError(f"x0={x0} lies in the safe set; it cannot be escaped")

    budget = [node_budget]

    def dfs(R: IntervalSet, depth: int, candidates: tuple[float, ...],
            seen: set) -> tuple[float, ...] | None:
        if depth >= max_depth or budget[0] <= 0:
            return None
        budget[0] -= 1
        key = tuple(round(v, 12) for iv in R.intervals for v in iv)
        if key in seen:
            return None
        seen = seen | {key}
        # most constraining branch first
        children = []
        for xi in candidates:
            nxt = _reach_step(R, xi, f, p)
            if nxt.is_empty:
                return (xi,)
            children.append((nxt.measure(), xi, nxt))
        children.sort()
        for _, xi, nxt in children:
            tail = dfs(nxt, depth + 1, candidates, seen)
            if tail is not None:
                return (xi,) + tail
        return None

    R0 = IntervalSet.point(x0)
    script = dfs(R0, 0, (-p.beta, p.beta), set())
    if script is None:
        script = dfs(R0, 0, (-p.beta, -0.5 * p.beta, 0.0, 0.5 * p.beta, p.beta),
                     set())
    if script is None:
        return None
    if not verify_escape(f, p, x0, script):
        raise AssertionError("search returned a script that fails verification")
    return EscapeCertificate(x0, script, len(script))
