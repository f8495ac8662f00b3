"""
Problem data model for weighted vector equilibrium problems
Holds the interval-union sets, the interaction matrix and its factor,
the external fields and the polyhedron of admissible masses
"""

import math
import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial import polynomial as P

from linprog import LPStatus, enumerate_vertices, find_feasible_point, solve_lp

logger = logging.getLogger(__name__)

INF = math.inf

Interval = Tuple[float, float]


class VecEquilError(Exception):
    """Base class for all errors raised by the toolkit"""


class ConstructionError(VecEquilError):
    """Invalid sets, fields, shapes or problem data"""


class MatrixError(VecEquilError):
    """Interaction matrix is not symmetric or not positive semidefinite"""


class InfeasibleError(VecEquilError):
    """The mass polyhedron (or an auxiliary LP) has no feasible point"""


class UnboundedError(VecEquilError):
    """A linear program over the mass polyhedron is unbounded"""


class DegenerateGridError(VecEquilError):
    """A set has no interval of positive length left to discretize"""


class ConfigError(VecEquilError):
    """Malformed run configuration"""


class OutputExistsError(VecEquilError):
    """Output directory already holds artifacts and overwrite is off"""


def _freeze(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=float)
    array.setflags(write=False)
    return array


def parse_endpoint(value) -> float:
    """
    Convert a config token or number to an interval endpoint

    Args:
        value: number or one of the strings "inf", "+inf", "-inf"

    Returns:
        Float endpoint (math.inf for the symbolic markers)
    """
    if isinstance(value, str):
        token = value.strip().lower()
        if token in ("inf", "+inf", "infinity"):
            return INF
        if token in ("-inf", "-infinity"):
            return -INF
        try:
            return float(token)
        except ValueError:
            raise ConstructionError(f"Invalid interval endpoint: {value!r}")
    return float(value)


@dataclass(frozen=True)
class IntervalUnion:
    """Finite union of closed, disjoint real intervals sorted by left endpoint"""
    intervals: Tuple[Interval, ...]

    @property
    def lower(self) -> float:
        return self.intervals[0][0]

    @property
    def upper(self) -> float:
        return self.intervals[-1][1]

    @property
    def unbounded_below(self) -> bool:
        return self.lower == -INF

    @property
    def unbounded_above(self) -> bool:
        return self.upper == INF

    @property
    def is_bounded(self) -> bool:
        return not (self.unbounded_below or self.unbounded_above)

    def has_positive_length(self) -> bool:
        return any(b > a for a, b in self.intervals)

    def max_finite_magnitude(self) -> float:
        finite = [abs(x) for interval in self.intervals for x in interval if math.isfinite(x)]
        return max(finite) if finite else 0.0

    def contains(self, x: float) -> bool:
        return any(a <= x <= b for a, b in self.intervals)

    def clipped(self, radius: float) -> "IntervalUnion":
        """Clip infinite ends at -radius / +radius"""
        clipped = []
        for a, b in self.intervals:
            a, b = max(a, -radius), min(b, radius)
            if a <= b:
                clipped.append((a, b))
        if not clipped:
            raise DegenerateGridError(f"Truncation radius {radius} leaves nothing of {self}")
        return IntervalUnion(tuple(clipped))

    def shifted(self, t: float) -> "IntervalUnion":
        return IntervalUnion(tuple((a + t, b + t) for a, b in self.intervals))

    def __str__(self) -> str:
        return " U ".join(f"[{a:g},{b:g}]" for a, b in self.intervals)


def normalize_interval_union(raw: Iterable[Sequence]) -> IntervalUnion:
    """
    Build an IntervalUnion from raw intervals, merging overlaps and touches

    Args:
        raw: iterable of (a, b) pairs, endpoints numbers or "inf" tokens

    Returns:
        Normalized IntervalUnion covering the same point set
    """
    parsed: List[Interval] = []
    for item in raw:
        if len(item) != 2:
            raise ConstructionError(f"Interval must have two endpoints, got {item!r}")
        a, b = parse_endpoint(item[0]), parse_endpoint(item[1])
        if math.isnan(a) or math.isnan(b):
            raise ConstructionError("Interval endpoints must not be NaN")
        if a == INF or b == -INF:
            raise ConstructionError(f"Interval [{a}, {b}] has an infinite endpoint on the wrong side")
        if a > b:
            raise ConstructionError(f"Interval [{a}, {b}] has a > b")
        parsed.append((a, b))

    if not parsed:
        raise ConstructionError("Interval union must contain at least one interval")

    parsed.sort()
    merged = [parsed[0]]
    for a, b in parsed[1:]:
        last_a, last_b = merged[-1]
        if a <= last_b:
            merged[-1] = (last_a, max(last_b, b))
        else:
            merged.append((a, b))
    return IntervalUnion(tuple(merged))


def set_distance(s1: IntervalUnion, s2: IntervalUnion) -> float:
    """Euclidean distance between two closed interval unions (0 iff they meet)"""
    best = INF
    for a1, b1 in s1.intervals:
        for a2, b2 in s2.intervals:
            gap = max(a1, a2) - min(b1, b2)
            best = min(best, max(gap, 0.0))
            if best == 0.0:
                return 0.0
    return best


def intersect_intervals(sets: Sequence[IntervalUnion]) -> List[Interval]:
    """Common intersection of interval unions as a list of closed intervals (possibly empty)"""
    current = list(sets[0].intervals)
    for other in sets[1:]:
        nxt = []
        for a1, b1 in current:
            for a2, b2 in other.intervals:
                lo, hi = max(a1, a2), min(b1, b2)
                if lo <= hi:
                    nxt.append((lo, hi))
        current = nxt
        if not current:
            break
    return current


def intersection_capacity_positive(*sets: IntervalUnion) -> bool:
    """True iff the common intersection contains an interval of positive length"""
    if not sets:
        raise ConstructionError("At least one set is required")
    return any(b > a for a, b in intersect_intervals(sets))


@dataclass(frozen=True, eq=False)
class InteractionMatrix:
    """Symmetric PSD interaction matrix C with its factor C = B^t B"""
    entries: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    rank: int
    B: np.ndarray

    @property
    def d(self) -> int:
        return self.entries.shape[0]

    @property
    def is_invertible(self) -> bool:
        return self.rank == self.d

    def permuted(self, perm: Sequence[int]) -> "InteractionMatrix":
        perm = list(perm)
        return factorize(self.entries[np.ix_(perm, perm)])


def factorize(C, tol_psd: float = 1e-10, tol_fac: float = 1e-12) -> InteractionMatrix:
    """
    Validate and factor an interaction matrix

    Args:
        C: square symmetric matrix
        tol_psd: relative eigenvalue tolerance for rank and PSD tests
        tol_fac: relative tolerance for the B^t B == C reconstruction check

    Returns:
        InteractionMatrix with rank r and factor B of shape (r, d)
    """
    C = np.array(C, dtype=float)
    if C.ndim != 2 or C.shape[0] != C.shape[1] or C.shape[0] == 0:
        raise MatrixError(f"Interaction matrix must be square and nonempty, got shape {C.shape}")
    if not np.all(np.isfinite(C)):
        raise MatrixError("Interaction matrix has non-finite entries")
    if np.any(C != C.T):
        raise MatrixError("Interaction matrix is not symmetric")

    eigenvalues, eigenvectors = np.linalg.eigh(C)
    order = np.argsort(eigenvalues)[::-1]
    eigenvalues, eigenvectors = eigenvalues[order], eigenvectors[:, order]

    scale = max(eigenvalues[0], 0.0)
    if eigenvalues[-1] < -tol_psd * scale or (scale == 0.0 and eigenvalues[-1] < 0.0):
        raise MatrixError(f"Interaction matrix is not positive semidefinite (min eigenvalue {eigenvalues[-1]:.3e})")

    keep = eigenvalues > tol_psd * scale
    rank = int(np.count_nonzero(keep))
    B = np.sqrt(eigenvalues[keep])[:, None] * eigenvectors[:, keep].T

    residual = np.max(np.abs(B.T @ B - C)) if rank else np.max(np.abs(C))
    bound = tol_fac * (1.0 + np.max(np.abs(C)))
    if residual > bound:
        raise MatrixError(f"Factorization residual {residual:.3e} exceeds {bound:.3e}")

    return InteractionMatrix(
        entries=_freeze(C),
        eigenvalues=_freeze(eigenvalues),
        eigenvectors=_freeze(eigenvectors),
        rank=rank,
        B=_freeze(B.reshape(rank, C.shape[0])),
    )


@dataclass(frozen=True)
class ExternalField:
    """Q(x) = sum_k c_k (x - center)^k + alpha * log(1 + (x - center)^2)"""
    coefficients: Tuple[float, ...] = (0.0,)
    alpha: float = 0.0
    center: float = 0.0

    def __post_init__(self):
        coefficients = tuple(float(c) for c in self.coefficients) or (0.0,)
        if not all(math.isfinite(c) for c in coefficients):
            raise ConstructionError("Field coefficients must be finite")
        if self.alpha < 0 or not math.isfinite(self.alpha):
            raise ConstructionError(f"Log coefficient alpha must be finite and >= 0, got {self.alpha}")
        object.__setattr__(self, "coefficients", coefficients)

    @property
    def degree(self) -> int:
        nonzero = [k for k, c in enumerate(self.coefficients) if c != 0.0]
        return nonzero[-1] if nonzero else 0

    @property
    def leading(self) -> float:
        return self.coefficients[self.degree]

    def __call__(self, x):
        u = np.asarray(x, dtype=float) - self.center
        value = P.polyval(u, self.coefficients)
        if self.alpha:
            value = value + self.alpha * np.log1p(u * u)
        return value

    def polynomial_tends_to_infinity(self, direction: int) -> bool:
        """Polynomial part -> +inf as x -> direction * inf"""
        p = self.degree
        return p >= 1 and self.leading * (direction ** p) > 0

    def tends_to_infinity(self, direction: int) -> bool:
        """Whole field -> +inf as x -> direction * inf"""
        if self.degree >= 1:
            return self.polynomial_tends_to_infinity(direction)
        return self.alpha > 0

    def shifted(self, t: float) -> "ExternalField":
        return ExternalField(self.coefficients, self.alpha, self.center + t)

    def to_dict(self) -> dict:
        return {"coefficients": list(self.coefficients), "log_coefficient": self.alpha, "center": self.center}


@dataclass(frozen=True, eq=False)
class MassPolyhedron:
    """K = {x in R^d : x >= 0, A x = a}"""
    A: np.ndarray
    a: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.array(self.A, dtype=float))
        a = np.atleast_1d(np.array(self.a, dtype=float))
        if A.shape[0] != a.shape[0]:
            raise ConstructionError(f"Polyhedron rows mismatch: A is {A.shape}, a has {a.shape[0]} entries")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(a))):
            raise ConstructionError("Polyhedron data must be finite")
        object.__setattr__(self, "A", _freeze(A))
        object.__setattr__(self, "a", _freeze(a))

    @classmethod
    def simplex(cls, d: int, total: float = 1.0) -> "MassPolyhedron":
        return cls(np.ones((1, d)), np.array([total]))

    @classmethod
    def fixed(cls, masses: Sequence[float]) -> "MassPolyhedron":
        masses = np.asarray(masses, dtype=float)
        return cls(np.eye(masses.size), masses)

    @property
    def d(self) -> int:
        return self.A.shape[1]

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @cached_property
    def feasible_point(self) -> Optional[np.ndarray]:
        """A basic feasible point of K from the phase-1 LP, or None"""
        point = find_feasible_point(self.A, self.a)
        return None if point is None else _freeze(point)

    @property
    def is_feasible(self) -> bool:
        return self.feasible_point is not None

    @cached_property
    def recession_direction(self) -> Optional[np.ndarray]:
        """Nonzero x >= 0 with A x = 0 (normalized to max entry 1), or None when K is compact"""
        result = solve_lp(-np.ones(self.d), self.A, np.zeros(self.m), upper=np.ones(self.d))
        if result.status != LPStatus.OPTIMAL:
            logger.warning(f"Recession LP ended with status {result.status.name}")
            return None
        if -result.fun <= 1e-9:
            return None
        direction = np.where(result.x > 1e-12, result.x, 0.0)
        return _freeze(direction / np.max(direction))

    @property
    def is_compact(self) -> bool:
        return self.recession_direction is None

    @cached_property
    def vertices(self) -> Tuple[np.ndarray, ...]:
        return tuple(_freeze(v) for v in enumerate_vertices(self.A, self.a))

    def coordinate_range(self, i: int) -> Tuple[float, float]:
        """(min, max) of x_i over K; raises when K is infeasible or unbounded in x_i"""
        bounds = []
        for sign in (1.0, -1.0):
            c = np.zeros(self.d)
            c[i] = sign
            result = solve_lp(c, self.A, self.a)
            if result.status == LPStatus.INFEASIBLE:
                raise InfeasibleError("Mass polyhedron is empty")
            if result.status != LPStatus.OPTIMAL:
                raise UnboundedError(f"Mass of component {i} is unbounded over K")
            bounds.append(sign * result.fun)
        return bounds[0], bounds[1]

    def max_mass(self, i: int) -> float:
        return self.coordinate_range(i)[1]

    def contains(self, x, tol: float = 1e-9) -> bool:
        x = np.asarray(x, dtype=float)
        scale = 1.0 + np.max(np.abs(self.a), initial=0.0)
        return bool(np.all(x >= -tol) and np.max(np.abs(self.A @ x - self.a), initial=0.0) <= tol * scale)

    def permuted(self, perm: Sequence[int]) -> "MassPolyhedron":
        return MassPolyhedron(self.A[:, list(perm)], self.a)


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    """The data (Delta, C, Q, K) of a weighted vector equilibrium problem"""
    sets: Tuple[IntervalUnion, ...]
    C: InteractionMatrix
    fields: Tuple[ExternalField, ...]
    K: MassPolyhedron
    name: str = field(default="problem", compare=False)

    def __post_init__(self):
        object.__setattr__(self, "sets", tuple(self.sets))
        object.__setattr__(self, "fields", tuple(self.fields))
        d = len(self.sets)
        if d == 0:
            raise ConstructionError("Problem needs at least one component")
        if self.C.d != d or len(self.fields) != d or self.K.d != d:
            raise ConstructionError(
                f"Inconsistent component counts: {d} sets, C is {self.C.d}x{self.C.d}, "
                f"{len(self.fields)} fields, K has {self.K.d} columns"
            )
        for i, (s, q) in enumerate(zip(self.sets, self.fields)):
            if not s.has_positive_length():
                raise ConstructionError(f"Set {i + 1} ({s}) has zero capacity")
            for direction, unbounded in ((-1, s.unbounded_below), (1, s.unbounded_above)):
                if unbounded and not q.tends_to_infinity(direction):
                    raise ConstructionError(
                        f"Field {i + 1} is not bounded below toward {'+' if direction > 0 else '-'}inf on set {i + 1}"
                    )

    @property
    def d(self) -> int:
        return len(self.sets)

    def permuted(self, perm: Sequence[int]) -> "ProblemInstance":
        perm = list(perm)
        return ProblemInstance(
            sets=tuple(self.sets[i] for i in perm),
            C=self.C.permuted(perm),
            fields=tuple(self.fields[i] for i in perm),
            K=self.K.permuted(perm),
            name=f"{self.name}-permuted",
        )

    def shifted(self, t: float) -> "ProblemInstance":
        return ProblemInstance(
            sets=tuple(s.shifted(t) for s in self.sets),
            C=self.C,
            fields=tuple(q.shifted(t) for q in self.fields),
            K=self.K,
            name=f"{self.name}-shifted",
        )


def make_instance(
    C,
    sets: Sequence[Iterable[Sequence]],
    A=None,
    a=None,
    fields: Optional[Sequence[ExternalField]] = None,
    name: str = "problem",
    tol_psd: float = 1e-10,
) -> ProblemInstance:
    """
    Convenience builder from plain Python data

    Args:
        C: interaction matrix (nested lists)
        sets: one list of (a, b) intervals per component
        A, a: mass polyhedron rows; defaults to the unit simplex
        fields: external fields, defaults to Q = 0
        name: label used in logs and reports

    Returns:
        Validated ProblemInstance
    """
    interaction = factorize(C, tol_psd=tol_psd)
    d = interaction.d
    unions = tuple(normalize_interval_union(raw) for raw in sets)
    if A is None:
        polyhedron = MassPolyhedron.simplex(d)
    else:
        polyhedron = MassPolyhedron(A, a)
    if fields is None:
        fields = tuple(ExternalField() for _ in range(d))
    return ProblemInstance(sets=unions, C=interaction, fields=tuple(fields), K=polyhedron, name=name)
