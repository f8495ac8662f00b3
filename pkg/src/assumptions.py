"""
Hypothesis checks for weighted vector equilibrium problems
Each check returns a tri-state verdict with a witness; run_all_checks
fans the checks out on a thread pool and derives which of the
existence / uniqueness theorems applies to an instance
"""

import concurrent.futures
import logging
from dataclasses import dataclass, field
from enum import Enum
from itertools import combinations, product
from typing import Any, Dict, List, Optional, Tuple

import networkx as nx
import numpy as np

from graphs import DEFAULT_CYCLE_LIMIT, DirectedMultigraph, intersection_graph, undirected_cycles_edge_sets
from linprog import LPStatus, simplex
from model import ProblemInstance, intersection_capacity_positive, set_distance

logger = logging.getLogger(__name__)

RANK_TOL = 1e-10
KERNEL_TOL = 1e-9
MAX_SIGN_COMPONENTS = 16
MAX_FAMILY_VISITS = 1 << 18


class CheckStatus(Enum):
    PASS = "pass"
    FAIL = "fail"
    INDETERMINATE = "indeterminate"

    @classmethod
    def of(cls, ok: bool) -> "CheckStatus":
        return cls.PASS if ok else cls.FAIL


@dataclass
class CheckResult:
    """Verdict of a single hypothesis check"""
    status: CheckStatus
    witness: Any = None
    message: str = ""

    @property
    def passed(self) -> bool:
        return self.status == CheckStatus.PASS


@dataclass
class KCheck:
    """Feasibility, compactness and singleton status of the mass polyhedron"""
    feasible: bool
    compact: bool
    singleton: bool = False
    feasible_point: Optional[np.ndarray] = None
    recession_direction: Optional[np.ndarray] = None


@dataclass
class AssumptionReport:
    """Combined verdicts of every hypothesis check on one instance"""
    compatNS: CheckResult
    H2: CheckResult
    H1: CheckResult
    imageAC: CheckResult
    cij0: CheckResult
    admissibility: CheckResult
    K: KCheck
    image_equality: bool = False
    support_compact: bool = True
    timings: Dict[str, float] = field(default_factory=dict)

    @property
    def existence_guaranteed(self) -> bool:
        return self.H2.passed and self.K.compact and self.K.feasible and self.admissibility.passed

    @property
    def uniqueness_guaranteed(self) -> bool:
        return self.existence_guaranteed and self.H1.passed and self.imageAC.passed

    def to_dict(self) -> Dict[str, Any]:
        def pairs(result: CheckResult):
            return [[i + 1, j + 1] for i, j in (result.witness or [])]

        def vector(v):
            return None if v is None else [float(x) for x in v]

        return {
            "compatNS": {"status": self.compatNS.status.value, "pairs": pairs(self.compatNS)},
            "H2": {"status": self.H2.status.value, "witness": vector(self.H2.witness), "message": self.H2.message},
            "H1": {
                "status": self.H1.status.value,
                "violating_set": None if self.H1.witness is None else [i + 1 for i in self.H1.witness],
                "message": self.H1.message,
            },
            "imageAC": {"status": self.imageAC.status.value, "kernel_vector": vector(self.imageAC.witness)},
            "cij0": {"status": self.cij0.status.value, "pairs": pairs(self.cij0)},
            "admissible": {"status": self.admissibility.status.value, "per_field": list(self.admissibility.witness or [])},
            "K_compact": {"value": self.K.compact, "recession_direction": vector(self.K.recession_direction)},
            "K_feasible": {"value": self.K.feasible, "feasible_point": vector(self.K.feasible_point)},
            "K_singleton": self.K.singleton,
            "imageEq": self.image_equality,
            "support_compact": self.support_compact,
            "existence": self.existence_guaranteed,
            "uniqueness": self.uniqueness_guaranteed,
        }

    def to_text(self) -> str:
        lines = ["Assumption report"]
        for name, result in (
            ("compatNS", self.compatNS),
            ("H2", self.H2),
            ("H1", self.H1),
            ("imageAC", self.imageAC),
            ("cij0", self.cij0),
            ("admissible", self.admissibility),
        ):
            detail = f" ({result.message})" if result.message else ""
            lines.append(f"  {name:<12} {result.status.value}{detail}")
        lines.append(f"  {'K_feasible':<12} {self.K.feasible}")
        lines.append(f"  {'K_compact':<12} {self.K.compact}")
        lines.append(f"  {'K_singleton':<12} {self.K.singleton}")
        lines.append(f"  {'imageEq':<12} {self.image_equality}")
        lines.append(f"  {'supp_compact':<12} {self.support_compact}")
        lines.append(f"  existence guaranteed:  {self.existence_guaranteed}")
        lines.append(f"  uniqueness guaranteed: {self.uniqueness_guaranteed}")
        return "\n".join(lines)


def _touching_pairs(p: ProblemInstance) -> List[Tuple[int, int]]:
    return [
        (i, j)
        for i in range(p.d)
        for j in range(i + 1, p.d)
        if set_distance(p.sets[i], p.sets[j]) == 0.0
    ]


def check_compatNS(p: ProblemInstance) -> CheckResult:
    """Touching sets must carry a nonnegative interaction"""
    C = p.C.entries
    bad = [(i, j) for i, j in _touching_pairs(p) if C[i, j] < 0]
    return CheckResult(CheckStatus.of(not bad), bad)


def check_cij0(p: ProblemInstance) -> CheckResult:
    """Touching distinct sets must not interact at all"""
    C = p.C.entries
    bad = [(i, j) for i, j in _touching_pairs(p) if C[i, j] != 0]
    return CheckResult(CheckStatus.of(not bad), bad)


def _sign_feasible(C: np.ndarray, signs: np.ndarray) -> Tuple[LPStatus, Optional[np.ndarray]]:
    """Look for z with signs_i * (C z)_i >= 1 for all i"""
    d = C.shape[0]
    SC = signs[:, None] * C
    A_eq = np.hstack([SC, -SC, -np.eye(d)])
    result = simplex(np.zeros(3 * d), A_eq, np.ones(d))
    if result.status != LPStatus.OPTIMAL:
        return result.status, None
    z = result.x[:d] - result.x[d:2 * d]
    return LPStatus.OPTIMAL, C @ z


def check_H2(p: ProblemInstance) -> CheckResult:
    """
    Exists y in Im(C) with y_i y_j > 0 whenever dist(Delta_i, Delta_j) = 0

    Components of the intersection graph share a sign; every sign
    pattern (up to global flip) is tried as an LP feasibility problem.
    """
    C = p.C.entries
    if p.C.is_invertible:
        return CheckResult(CheckStatus.PASS, np.ones(p.d), "C invertible, y = (1,...,1)")

    components = sorted((sorted(c) for c in nx.connected_components(intersection_graph(p.sets))), key=min)
    k = len(components)
    if k > MAX_SIGN_COMPONENTS:
        return CheckResult(CheckStatus.INDETERMINATE, None, f"{k} intersection components, too many sign patterns")

    indeterminate = False
    for tail in product((1.0, -1.0), repeat=k - 1):
        pattern = (1.0,) + tail
        signs = np.empty(p.d)
        for sign, component in zip(pattern, components):
            signs[component] = sign
        status, y = _sign_feasible(C, signs)
        if status == LPStatus.OPTIMAL:
            return CheckResult(CheckStatus.PASS, y, f"sign pattern {[int(s) for s in pattern]}")
        if status == LPStatus.ITERATION_LIMIT:
            indeterminate = True

    if indeterminate:
        logger.warning("H2 check: some sign-pattern LPs did not terminate")
        return CheckResult(CheckStatus.INDETERMINATE, None, "LP iteration limit")
    return CheckResult(CheckStatus.FAIL, None, "no sign pattern admits a witness in Im(C)")


def _column_rank(C: np.ndarray, columns) -> int:
    tol = RANK_TOL * max(np.linalg.norm(C, 2), 1.0)
    return int(np.linalg.matrix_rank(C[:, list(columns)], tol=tol))


def _fat_pieces(pieces: List[Tuple[float, float]], s) -> List[Tuple[float, float]]:
    out = []
    for a1, b1 in pieces:
        for a2, b2 in s.intervals:
            lo, hi = max(a1, a2), min(b1, b2)
            if lo < hi:
                out.append((lo, hi))
    return out


def _maximal_fat_families(p: ProblemInstance) -> Tuple[List[Tuple[int, ...]], bool]:
    """Maximal index sets (size >= 2) whose sets share an interval of positive length"""
    families: List[Tuple[int, ...]] = []
    visits = 0

    def extend(current: Tuple[int, ...], pieces, start: int) -> bool:
        nonlocal visits
        visits += 1
        if visits > MAX_FAMILY_VISITS:
            return False
        grown = False
        for j in range(start, p.d):
            nxt = _fat_pieces(pieces, p.sets[j])
            if nxt:
                grown = True
                if not extend(current + (j,), nxt, j + 1):
                    return False
        if not grown and len(current) >= 2:
            families.append(current)
        return True

    complete = True
    for i in range(p.d):
        if not extend((i,), list(p.sets[i].intervals), i + 1):
            complete = False
            break

    maximal = [f for f in families if not any(set(f) < set(g) for g in families)]
    return maximal, complete


def _minimal_dependent_subset(C: np.ndarray, family: Tuple[int, ...]) -> Optional[Tuple[int, ...]]:
    for size in range(2, len(family) + 1):
        for subset in combinations(family, size):
            if _column_rank(C, subset) < size:
                return subset
    return None


def check_H1(p: ProblemInstance, g: Optional[DirectedMultigraph] = None, limit: int = DEFAULT_CYCLE_LIMIT) -> CheckResult:
    """
    Linearly dependent columns of C must have sets meeting in a polar set

    With a graph, the circuits of the column matroid are the undirected
    cycles; otherwise maximal families of fat intersection are searched
    for dependent columns.
    """
    C = p.C.entries
    if g is not None and g.d == p.d:
        cycles = undirected_cycles_edge_sets(g, limit)
        if not cycles.overflow:
            for cycle in cycles.cycles:
                members = sorted(cycle)
                if intersection_capacity_positive(*(p.sets[i] for i in members)):
                    return CheckResult(CheckStatus.FAIL, tuple(members), "undirected cycle with fat intersection")
            return CheckResult(CheckStatus.PASS, None, f"{len(cycles.cycles)} cycles checked")
        logger.info("Cycle enumeration overflowed; falling back to column-rank search")

    if p.C.is_invertible:
        return CheckResult(CheckStatus.PASS, None, "C invertible")

    families, complete = _maximal_fat_families(p)
    for family in families:
        if _column_rank(C, family) < len(family):
            subset = _minimal_dependent_subset(C, family)
            return CheckResult(CheckStatus.FAIL, subset, "dependent columns with fat intersection")
    if not complete:
        return CheckResult(CheckStatus.INDETERMINATE, None, "intersection family enumeration overflow")
    return CheckResult(CheckStatus.PASS, None, f"{len(families)} fat families checked")


def kernel_basis(A: np.ndarray) -> np.ndarray:
    """Orthonormal basis of Ker(A) as rows"""
    A = np.atleast_2d(A)
    _, s, Vt = np.linalg.svd(A)
    tol = RANK_TOL * (s[0] if s.size else 1.0)
    rank = int(np.count_nonzero(s > tol))
    return Vt[rank:]


def check_imageAC(p: ProblemInstance) -> CheckResult:
    """Ker(A) must lie in Ker(C)"""
    C = p.C.entries
    norm_C = max(np.linalg.norm(C, 2), 1.0)
    for v in kernel_basis(p.K.A):
        if np.linalg.norm(C @ v) > KERNEL_TOL * norm_C:
            first = v[np.flatnonzero(np.abs(v) > 1e-12)[0]]
            return CheckResult(CheckStatus.FAIL, v * np.sign(first), "Ker(A) not contained in Ker(C)")
    return CheckResult(CheckStatus.PASS)


def check_image_equality(p: ProblemInstance) -> bool:
    """Im(C) == Im(A^t)"""
    C, A = p.C.entries, p.K.A
    tol = RANK_TOL * max(np.linalg.norm(C, 2), np.linalg.norm(A, 2), 1.0)
    rank_C = np.linalg.matrix_rank(C, tol=tol)
    rank_At = np.linalg.matrix_rank(A.T, tol=tol)
    rank_both = np.linalg.matrix_rank(np.hstack([C, A.T]), tol=tol)
    return rank_C == rank_At == rank_both


def check_admissibility(p: ProblemInstance) -> CheckResult:
    """Growth condition Q(x) / log|x| -> inf at every infinite end of the set"""
    per_field = []
    for s, q in zip(p.sets, p.fields):
        ok = True
        if s.unbounded_below:
            ok = ok and q.polynomial_tends_to_infinity(-1)
        if s.unbounded_above:
            ok = ok and q.polynomial_tends_to_infinity(1)
        per_field.append(ok)
    failing = [i + 1 for i, ok in enumerate(per_field) if not ok]
    message = f"fields {failing} grow too slowly" if failing else ""
    return CheckResult(CheckStatus.of(not failing), per_field, message)


def check_K(p: ProblemInstance) -> KCheck:
    """Feasibility (phase 1), compactness (recession LP) and singleton test of K"""
    K = p.K
    point = K.feasible_point
    direction = K.recession_direction
    compact = direction is None
    singleton = False
    if point is not None and compact:
        singleton = True
        for i in range(K.d):
            low, high = K.coordinate_range(i)
            if high - low > 1e-9 * (1.0 + abs(high)):
                singleton = False
                break
    return KCheck(
        feasible=point is not None,
        compact=compact,
        singleton=singleton,
        feasible_point=point,
        recession_direction=direction,
    )


def check_support_compactness(p: ProblemInstance) -> bool:
    """Sufficient condition for compact supports: unbounded pairs interact nonnegatively"""
    unbounded = [i for i, s in enumerate(p.sets) if not s.is_bounded]
    C = p.C.entries
    return all(C[i, j] >= 0 for i in unbounded for j in unbounded)


def run_all_checks(p: ProblemInstance, g: Optional[DirectedMultigraph] = None, limit: int = DEFAULT_CYCLE_LIMIT) -> AssumptionReport:
    """
    Run every hypothesis check concurrently and combine the verdicts

    Args:
        p: problem instance
        g: optional multigraph whose incidence matrix generated C
        limit: cycle enumeration limit for the graph-based H1 check

    Returns:
        AssumptionReport
    """
    tasks = {
        "compatNS": (check_compatNS, (p,)),
        "H2": (check_H2, (p,)),
        "H1": (check_H1, (p, g, limit)),
        "imageAC": (check_imageAC, (p,)),
        "cij0": (check_cij0, (p,)),
        "admissibility": (check_admissibility, (p,)),
        "K": (check_K, (p,)),
        "image_equality": (check_image_equality, (p,)),
        "support_compact": (check_support_compactness, (p,)),
    }
    results: Dict[str, Any] = {}
    with concurrent.futures.ThreadPoolExecutor(max_workers=min(len(tasks), 4)) as executor:
        future_to_name = {executor.submit(fn, *args): name for name, (fn, args) in tasks.items()}
        for future in concurrent.futures.as_completed(future_to_name):
            name = future_to_name[future]
            results[name] = future.result()

    report = AssumptionReport(**results)
    logger.info(
        f"Checks for '{p.name}': H2={report.H2.status.value} H1={report.H1.status.value} "
        f"imageAC={report.imageAC.status.value} K_compact={report.K.compact} "
        f"existence={report.existence_guaranteed} uniqueness={report.uniqueness_guaranteed}"
    )
    return report
