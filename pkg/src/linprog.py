"""
Dense linear programming for the small problems of the toolkit
Two-phase tableau simplex with Bland's rule plus vertex enumeration
of {x >= 0 : A x = a} for polyhedra of low dimension
"""

import logging
from dataclasses import dataclass
from enum import Enum
from itertools import combinations
from typing import List, Optional, Tuple

import numpy as np

logger = logging.getLogger(__name__)

PIVOT_TOL = 1e-9
DEFAULT_MAX_ITERS = 5000


class LPStatus(Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    ITERATION_LIMIT = "iteration_limit"


@dataclass
class LPResult:
    """Outcome of a simplex run"""
    status: LPStatus
    x: Optional[np.ndarray] = None
    fun: Optional[float] = None
    iterations: int = 0

    @property
    def success(self) -> bool:
        return self.status == LPStatus.OPTIMAL


def _pivot(T: np.ndarray, row: int, col: int) -> None:
    T[row] /= T[row, col]
    for i in range(T.shape[0]):
        if i != row and T[i, col] != 0.0:
            T[i] -= T[i, col] * T[row]


def _run_bland(T: np.ndarray, basis: List[int], n_cols: int, max_iters: int) -> Tuple[LPStatus, int]:
    """
    Iterate the tableau to optimality with Bland's anti-cycling rule

    The last row of T holds reduced costs and minus the objective value.
    Only the first n_cols columns may enter the basis.
    """
    m = T.shape[0] - 1
    for iteration in range(max_iters):
        reduced = T[-1, :n_cols]
        candidates = np.flatnonzero(reduced < -PIVOT_TOL)
        if candidates.size == 0:
            return LPStatus.OPTIMAL, iteration
        col = int(candidates[0])

        column = T[:m, col]
        rows = np.flatnonzero(column > PIVOT_TOL)
        if rows.size == 0:
            return LPStatus.UNBOUNDED, iteration
        ratios = T[rows, -1] / column[rows]
        best = ratios.min()
        ties = rows[ratios <= best + PIVOT_TOL * (1.0 + abs(best))]
        row = int(min(ties, key=lambda r: basis[r]))

        _pivot(T, row, col)
        basis[row] = col
    return LPStatus.ITERATION_LIMIT, max_iters


def simplex(c, A_eq, b_eq, max_iters: int = DEFAULT_MAX_ITERS) -> LPResult:
    """
    Solve min c^t x subject to A_eq x = b_eq, x >= 0

    Args:
        c: cost vector (n,)
        A_eq: constraint matrix (m, n)
        b_eq: right-hand side (m,)
        max_iters: pivot budget shared by both phases

    Returns:
        LPResult with status, primal point and objective value
    """
    c = np.asarray(c, dtype=float).ravel()
    n = c.size
    A = np.array(A_eq, dtype=float).reshape(-1, n)
    b = np.array(b_eq, dtype=float).ravel()
    m = A.shape[0]

    if m == 0:
        if np.any(c < -PIVOT_TOL):
            return LPResult(LPStatus.UNBOUNDED)
        return LPResult(LPStatus.OPTIMAL, np.zeros(n), 0.0)

    negative = b < 0
    A[negative] *= -1.0
    b[negative] *= -1.0

    # Phase 1: minimize the sum of artificial variables
    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = A
    T[:m, n:n + m] = np.eye(m)
    T[:m, -1] = b
    T[-1, :n] = -A.sum(axis=0)
    T[-1, -1] = -b.sum()
    basis = list(range(n, n + m))

    status, used = _run_bland(T, basis, n + m, max_iters)
    if status == LPStatus.ITERATION_LIMIT:
        logger.warning("Simplex phase 1 hit the iteration limit")
        return LPResult(status, iterations=used)
    if -T[-1, -1] > PIVOT_TOL * (1.0 + b.sum()):
        return LPResult(LPStatus.INFEASIBLE, iterations=used)

    # Drive artificial variables out of the basis; rows that cannot pivot are redundant
    keep_rows = []
    for r in range(m):
        if basis[r] >= n:
            pivots = np.flatnonzero(np.abs(T[r, :n]) > PIVOT_TOL)
            if pivots.size == 0:
                continue
            _pivot(T, r, int(pivots[0]))
            basis[r] = int(pivots[0])
        keep_rows.append(r)

    # Phase 2 on the original columns
    k = len(keep_rows)
    T2 = np.zeros((k + 1, n + 1))
    T2[:k, :n] = T[keep_rows, :n]
    T2[:k, -1] = T[keep_rows, -1]
    basis2 = [basis[r] for r in keep_rows]
    T2[-1, :n] = c
    for r, var in enumerate(basis2):
        T2[-1] -= c[var] * T2[r]

    status, used2 = _run_bland(T2, basis2, n, max_iters - used)
    iterations = used + used2
    if status != LPStatus.OPTIMAL:
        return LPResult(status, iterations=iterations)

    x = np.zeros(n)
    x[basis2] = np.maximum(T2[:k, -1], 0.0)
    return LPResult(LPStatus.OPTIMAL, x, float(c @ x), iterations)


def solve_lp(c, A_eq, b_eq, upper=None, max_iters: int = DEFAULT_MAX_ITERS) -> LPResult:
    """
    Solve min c^t x subject to A_eq x = b_eq, 0 <= x <= upper

    Finite entries of `upper` become slack rows; infinite ones are ignored.
    """
    c = np.asarray(c, dtype=float).ravel()
    n = c.size
    A = np.array(A_eq, dtype=float).reshape(-1, n)
    b = np.array(b_eq, dtype=float).ravel()
    if upper is None:
        return simplex(c, A, b, max_iters)

    upper = np.broadcast_to(np.asarray(upper, dtype=float), (n,))
    bounded = np.flatnonzero(np.isfinite(upper))
    s = bounded.size
    A_full = np.zeros((A.shape[0] + s, n + s))
    A_full[:A.shape[0], :n] = A
    for k, i in enumerate(bounded):
        A_full[A.shape[0] + k, i] = 1.0
        A_full[A.shape[0] + k, n + k] = 1.0
    b_full = np.concatenate([b, upper[bounded]])
    c_full = np.concatenate([c, np.zeros(s)])

    result = simplex(c_full, A_full, b_full, max_iters)
    if result.x is not None:
        result.x = result.x[:n]
    return result


def find_feasible_point(A, a) -> Optional[np.ndarray]:
    """Basic feasible point of {x >= 0 : A x = a}, or None when empty"""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    result = simplex(np.zeros(A.shape[1]), A, a)
    if result.status == LPStatus.OPTIMAL:
        return result.x
    if result.status == LPStatus.ITERATION_LIMIT:
        logger.warning("Feasibility LP did not terminate; treating the polyhedron as empty")
    return None


def _independent_rows(A: np.ndarray, a: np.ndarray, tol: float) -> Tuple[np.ndarray, np.ndarray]:
    rows: List[int] = []
    for i in range(A.shape[0]):
        trial = rows + [i]
        if np.linalg.matrix_rank(A[trial], tol=tol) == len(trial):
            rows.append(i)
    return A[rows], a[rows]


def enumerate_vertices(A, a, tol: float = 1e-9) -> List[np.ndarray]:
    """
    All vertices of {x >= 0 : A x = a} by basic column enumeration

    Args:
        A: (m, d) constraint matrix
        a: (m,) right-hand side
        tol: feasibility and singularity tolerance

    Returns:
        Vertices in the lexicographic order of their basic column sets
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    a = np.atleast_1d(np.asarray(a, dtype=float))
    d = A.shape[1]
    scale = tol * (1.0 + np.max(np.abs(A), initial=0.0))
    A_red, a_red = _independent_rows(A, a, scale)
    r = A_red.shape[0]

    if r == 0:
        return [np.zeros(d)] if np.max(np.abs(a), initial=0.0) <= tol else []

    vertices: List[np.ndarray] = []
    seen = set()
    for cols in combinations(range(d), r):
        basis = A_red[:, cols]
        if np.linalg.matrix_rank(basis, tol=scale) < r:
            continue
        x_basic = np.linalg.solve(basis, a_red)
        if np.any(x_basic < -tol * (1.0 + np.max(np.abs(x_basic)))):
            continue
        x = np.zeros(d)
        x[list(cols)] = np.maximum(x_basic, 0.0)
        if np.max(np.abs(A @ x - a), initial=0.0) > tol * (1.0 + np.max(np.abs(a))) * 10:
            continue
        key = tuple(np.round(x, 10))
        if key not in seen:
            seen.add(key)
            vertices.append(x)
    return vertices


def minimize_over_vertices(c, vertices: List[np.ndarray]) -> Tuple[int, float]:
    """Index and value of the lowest-index vertex minimizing c^t x"""
    if not vertices:
        raise ValueError("No vertices to minimize over")
    values = np.array([float(np.dot(c, v)) for v in vertices])
    best = values.min()
    index = int(np.flatnonzero(values <= best + 1e-12 * (1.0 + abs(best)))[0])
    return index, float(values[index])
