"""Linear equations pinning the boundary points of a converged safe set.

For a piecewise-linear expanding map the endpoints of a maximal safe set
satisfy a square linear system: each boundary point is either stuck on
an edge of the target interval, or its image sits exactly on an edge of
the eroded dilation of the set, which ties it to another endpoint via
f(x_i) = x_sigma(i) +/- (u - beta).  Solving that system turns the
geometric tail of the sculpting iteration into machine-precision
endpoints, gives exact derivatives of the endpoints with respect to the
control bound, and exposes the Jacobian diag(f') - M whose determinant
factors into diagonal terms and cycle terms (products of slopes minus
one).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .intervals import Interval, IntervalSet, MERGE_EPS
from .maps import PiecewiseLinearMap


class BoundaryClassificationError(RuntimeError):
    """A boundary point fits neither the target-edge nor the image-pinned
    case: the set is not a converged maximal safe set at these bounds."""


@dataclass(frozen=True)
class BoundaryRow:
    """One equation of the system.

    kind 'edge':  x_i = const (point stuck on the target boundary).
    kind 'image': f(x_i) = x_{sigma} + delta_sign * (u - beta).
    """

    label: str                 # e.g. "c1.lo" = left end of component 1
    position: float            # position at build time
    slope: float               # f' on the piece containing the point
    intercept: float           # f(x) = slope*x + intercept on that piece
    kind: str                  # 'edge' | 'image'
    const: float = math.nan    # for 'edge'
    sigma: int = -1            # active index of the paired endpoint, for 'image'
    delta_sign: float = 0.0    # +1 -> +(u-beta), -1 -> -(u-beta)


@dataclass(frozen=True)
class BoundarySystem:
    """Reduced system in the active endpoints plus the dependent ones.

    Active endpoints are those at distance exactly u from the boundary of
    the dilated set; every other (dependent) endpoint is determined from
    them by a single image-pinned equation.
    """

    u_bound: float
    beta: float
    active_rows: tuple[BoundaryRow, ...]
    dependent_rows: tuple[BoundaryRow, ...]
    component_sides: tuple[tuple[str, str], ...]  # (lo_label, hi_label) per component

    @property
    def n_active(self) -> int:
        return len(self.active_rows)

    def pairing_matrix(self) -> np.ndarray:
        """M: zeros except M[i, sigma(i)] = 1 on image-pinned rows."""
        n = self.n_active
        M = np.zeros((n, n))
        for i, row in enumerate(self.active_rows):
            if row.kind == "image":
                M[i, row.sigma] = 1.0
        return M

    def jacobian(self) -> np.ndarray:
        """J - M with J = diag of slopes at the active points."""
        J = np.diag([row.slope for row in self.active_rows])
        return J - self.pairing_matrix()

    def delta_derivative(self) -> np.ndarray:
        """d/du of the offset vector at fixed beta."""
        return np.array([row.delta_sign if row.kind == "image" else 0.0
                         for row in self.active_rows])


def _cluster_components(comps: tuple[Interval, ...], u: float) -> list[tuple[int, int]]:
    """Group components whose dilations by u overlap or touch."""
    clusters: list[tuple[int, int]] = []
    start = 0
    for k in range(len(comps) - 1):
        if comps[k + 1].lo - comps[k].hi > 2.0 * u + MERGE_EPS:
            clusters.append((start, k))
            start = k + 1
    clusters.append((start, len(comps) - 1))
    return clusters


def build_boundary_system(f: PiecewiseLinearMap, S: IntervalSet,
                          u_bound: float, beta: float,
                          target: Interval,
                          tol: float = 1e-6) -> BoundarySystem:
    """Classify every endpoint of S into its defining equation.

    Raises BoundaryClassificationError when an endpoint matches neither
    case within tol, or sits on a breakpoint of the map.
    """
    if S.is_empty:
        raise ValueError("cannot build a boundary system for the empty set")
    comps = S.intervals
    clusters = _cluster_components(comps, u_bound)

    # Eroded-dilation edges with provenance: which endpoint generated them.
    # Cluster [first..last] dilates to [lo_first - u, hi_last + u]; erosion
    # by beta moves each edge inward.
    active_keys: list[tuple[int, str]] = []
    edge_values: list[float] = []        # value of the eroded edge
    edge_signs: list[float] = []         # +1: f pinned at x_sigma + (u-beta)
    for first, last in clusters:
        span = comps[last].hi + u_bound - (comps[first].lo - u_bound)
        if span < 2.0 * beta - MERGE_EPS:
            raise BoundaryClassificationError(
                "a dilated cluster does not survive erosion; set is degenerate")
        active_keys.append((first, "lo"))
        edge_values.append(comps[first].lo - u_bound + beta)
        edge_signs.append(-1.0)
        active_keys.append((last, "hi"))
        edge_values.append(comps[last].hi + u_bound - beta)
        edge_signs.append(+1.0)

    active_index = {key: i for i, key in enumerate(active_keys)}

    def classify(k: int, side: str) -> BoundaryRow:
        x = comps[k].lo if side == "lo" else comps[k].hi
        label = f"c{k}.{side}"
        for bp in f.breakpoints[1:-1]:
            if abs(x - bp) <= tol * 1e-3:
                raise BoundaryClassificationError(
                    f"endpoint {label} sits on a map breakpoint at {bp}")
        kpiece = f.piece_index(x)
        slope, intercept = f.piece_line(kpiece)
        if abs(x - target.lo) <= tol or abs(x - target.hi) <= tol:
            const = target.lo if abs(x - target.lo) <= tol else target.hi
            return BoundaryRow(label, x, slope, intercept, "edge", const=const)
        y = f.eval(x)
        best, best_i = math.inf, -1
        for i, e in enumerate(edge_values):
            if abs(y - e) < best:
                best, best_i = abs(y - e), i
        if best > tol:
            raise BoundaryClassificationError(
                f"f({label}) = {y} is {best:.3g} away from every eroded edge "
                "(not a converged maximal safe set?)")
        return BoundaryRow(label, x, slope, intercept, "image",
                           sigma=best_i, delta_sign=edge_signs[best_i])

    active_rows = []
    for k, side in active_keys:
        active_rows.append(classify(k, side))
    dependent_rows = []
    for k, iv in enumerate(comps):
        for side in ("lo", "hi"):
            if (k, side) not in active_index:
                dependent_rows.append(classify(k, side))

    sides = tuple((f"c{k}.lo", f"c{k}.hi") for k in range(len(comps)))
    return BoundarySystem(u_bound, beta, tuple(active_rows),
                          tuple(dependent_rows), sides)


def solve_positions(sys: BoundarySystem, u_bound: float,
                    beta: float | None = None) -> dict[str, float]:
    """Solve the system at new bounds (same pairing structure).

    Positions of a fixed structure depend on u and beta only through the
    equations below, which are linear for piecewise-linear maps, so this
    is exact: no Newton iteration is needed.
    """
    if beta is None:
        beta = sys.beta
    d = u_bound - beta
    n = sys.n_active
    A = np.zeros((n, n))
    b = np.zeros(n)
    for i, row in enumerate(sys.active_rows):
        if row.kind == "edge":
            A[i, i] = 1.0
            b[i] = row.const
        else:
            A[i, i] = row.slope
            A[i, row.sigma] -= 1.0
            b[i] = row.delta_sign * d - row.intercept
    x = np.linalg.solve(A, b)
    out = {row.label: float(x[i]) for i, row in enumerate(sys.active_rows)}
    for row in sys.dependent_rows:
        target_val = x[row.sigma] + row.delta_sign * d
        out[row.label] = float((target_val - row.intercept) / row.slope)
    return out


def derivative_wrt_u(sys: BoundarySystem) -> dict[str, float]:
    """d(endpoint)/du at fixed beta: solve (J - M) X' = Delta'."""
    xp = np.linalg.solve(sys.jacobian(), sys.delta_derivative())
    out = {row.label: float(xp[i]) for i, row in enumerate(sys.active_rows)}
    for row in sys.dependent_rows:
        out[row.label] = float((xp[row.sigma] + row.delta_sign) / row.slope)
    return out


def positions_to_set(sys: BoundarySystem, pos: dict[str, float]) -> IntervalSet:
    """Reassemble an IntervalSet from solved endpoint positions."""
    ivs = []
    for lo_label, hi_label in sys.component_sides:
        lo, hi = pos[lo_label], pos[hi_label]
        if hi < lo:
            if hi < lo - 1e-9:
                raise ValueError(f"component {lo_label[:-3]} inverted: [{lo}, {hi}]")
            lo = hi = 0.5 * (lo + hi)  # collapsed to a point within roundoff
        ivs.append(Interval(lo, hi))
    return IntervalSet(tuple(ivs))


# -- determinant factor structure ------------------------------------

def predicted_det_factors(diag: np.ndarray, M: np.ndarray):
    """Factor det(diag(d) - M) for a 0-1 matrix M with at most one 1 per
    row: peel columns containing no 1 (factor d_j), the rest is a
    permutation whose cycles contribute (prod of d over the cycle) - 1.

    Returns (value, factors) where factors is a list of
    ("diag", j, d_j) and ("cycle", (i1..ik), prod-1) entries.
    """
    n = len(diag)
    remaining = set(range(n))
    factors = []
    value = 1.0
    changed = True
    while changed:
        changed = False
        for j in sorted(remaining):
            if not any(M[i, j] for i in remaining):
                factors.append(("diag", j, float(diag[j])))
                value *= diag[j]
                remaining.discard(j)
                changed = True
    # remainder must be a permutation: decompose into cycles
    succ = {}
    for i in remaining:
        ones = [j for j in remaining if M[i, j]]
        if len(ones) != 1:
            raise ValueError("row structure is not 'at most one 1 per row'")
        succ[i] = ones[0]
    seen: set[int] = set()
    for i in sorted(remaining):
        if i in seen:
            continue
        cycle = [i]
        seen.add(i)
        j = succ[i]
        while j != i:
            cycle.append(j)
            seen.add(j)
            j = succ[j]
        prod = 1.0
        for k in cycle:
            prod *= diag[k]
        factors.append(("cycle", tuple(cycle), float(prod - 1.0)))
        value *= prod - 1.0
    return float(value), factors


def jacobian_nonsingular(sys: BoundarySystem):
    """det(J - M) with its predicted factor structure; raises if the
    determinant vanishes or disagrees with the factorization."""
    J_minus_M = sys.jacobian()
    det = float(np.linalg.det(J_minus_M))
    diag = np.array([row.slope for row in sys.active_rows])
    predicted, factors = predicted_det_factors(diag, sys.pairing_matrix())
    if abs(det - predicted) > 1e-9 * max(1.0, abs(predicted)):
        raise RuntimeError(
            f"determinant {det} disagrees with factor structure {predicted}")
    if abs(predicted) < 1e-12:
        raise RuntimeError("boundary-system Jacobian is singular")
    return predicted, factors


def enumerate_row_matrices(n: int):
    """All n x n 0-1 matrices with at most one 1 per row ((n+1)^n total)."""
    def rows(i: int, M: np.ndarray):
        if i == n:
            yield M.copy()
            return
        yield from rows(i + 1, M)
        for j in range(n):
            M[i, j] = 1.0
            yield from rows(i + 1, M)
            M[i, j] = 0.0
    yield from rows(0, np.zeros((n, n)))
