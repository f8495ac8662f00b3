"""
Discretization of a vector equilibrium problem into a quadratic program
Uniform midpoint grids on each set, log-kernel energy blocks with an exact
self-cell correction, field vectors and the block mass map
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from model import (
    DegenerateGridError,
    InfeasibleError,
    IntervalUnion,
    MassPolyhedron,
    ProblemInstance,
    UnboundedError,
)
from utils import measure_execution_time

logger = logging.getLogger(__name__)

MIN_NODES_PER_INTERVAL = 8
COINCIDENT_TOL = 1e-14
DEFAULT_MARGIN = 10.0


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform midpoint cells over the (truncated) intervals of one set"""
    nodes: np.ndarray
    widths: np.ndarray
    parents: np.ndarray
    lefts: np.ndarray
    rights: np.ndarray
    truncated_low: bool = False
    truncated_high: bool = False

    @property
    def size(self) -> int:
        return self.nodes.size

    def interval_ends(self) -> List[Tuple[int, int]]:
        """(first cell, last cell) index pairs of each covered interval"""
        ends = []
        for parent in np.unique(self.parents):
            cells = np.flatnonzero(self.parents == parent)
            ends.append((int(cells[0]), int(cells[-1])))
        return ends


def build_grid(s: IntervalUnion, N: int, R: Optional[float] = None) -> Grid:
    """
    Uniform cells distributed over the intervals proportionally to length

    Args:
        s: normalized interval union
        N: total number of cells
        R: truncation radius, required when s is unbounded

    Returns:
        Grid with cell midpoints, widths and parent interval ids
    """
    if not s.is_bounded:
        if R is None or not np.isfinite(R) or R <= 0:
            raise DegenerateGridError(f"Unbounded set {s} needs a finite truncation radius")
        clipped = s.clipped(R)
    else:
        clipped = s

    pieces = [(k, a, b) for k, (a, b) in enumerate(clipped.intervals) if b > a]
    if not pieces:
        raise DegenerateGridError(f"Set {s} has no interval of positive length to discretize")
    if N < len(pieces):
        raise DegenerateGridError(f"{N} cells cannot cover {len(pieces)} intervals")
    if N < MIN_NODES_PER_INTERVAL * len(pieces):
        logger.warning(f"Only {N} cells for {len(pieces)} intervals; results will be coarse")

    lengths = np.array([b - a for _, a, b in pieces])
    shares = N * lengths / lengths.sum()
    counts = np.maximum(np.floor(shares).astype(int), 1)
    # largest remainder for the leftover cells
    while counts.sum() < N:
        counts[np.argmax(shares - counts)] += 1
    while counts.sum() > N:
        counts[np.argmax(np.where(counts > 1, counts - shares, -np.inf))] -= 1

    lefts, rights, widths, parents = [], [], [], []
    for (k, a, b), n in zip(pieces, counts):
        # neighbouring cells share bit-identical edges
        edges = np.linspace(a, b, n + 1)
        lefts.append(edges[:-1])
        rights.append(edges[1:])
        widths.append(np.full(n, (b - a) / n))
        parents.append(np.full(n, k))

    lefts, rights = np.concatenate(lefts), np.concatenate(rights)
    return Grid(
        nodes=0.5 * (lefts + rights),
        widths=np.concatenate(widths),
        parents=np.concatenate(parents),
        lefts=lefts,
        rights=rights,
        truncated_low=s.unbounded_below,
        truncated_high=s.unbounded_above,
    )


def _second_antiderivative(u: np.ndarray) -> np.ndarray:
    """F with F'' = log|u|: u^2 log|u| / 2 - 3 u^2 / 4"""
    u = np.asarray(u, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        value = 0.5 * u * u * np.log(np.abs(u)) - 0.75 * u * u
    return np.where(u == 0.0, 0.0, value)


def _first_antiderivative(u: np.ndarray) -> np.ndarray:
    """F with F' = log|u|: u log|u| - u"""
    u = np.asarray(u, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        value = u * np.log(np.abs(u)) - u
    return np.where(u == 0.0, 0.0, value)


def cell_pair_average(a, b, c, d) -> np.ndarray:
    """Average of -log|x - y| over x in [a, b], y in [c, d]"""
    F = _second_antiderivative
    total = F(np.subtract(b, c)) - F(np.subtract(a, c)) - F(np.subtract(b, d)) + F(np.subtract(a, d))
    return -total / (np.subtract(b, a) * np.subtract(d, c))


def cell_average(x, c, d) -> np.ndarray:
    """Average of -log|x - y| over y in [c, d]"""
    F = _first_antiderivative
    x = np.asarray(x, dtype=float)
    return -(F(x - c) - F(x - d)) / (np.subtract(d, c))


def self_energy(h) -> np.ndarray:
    """Double average of -log|x - y| over a cell of width h"""
    return 1.5 - np.log(h)


def energy_block(g1: Grid, g2: Grid) -> np.ndarray:
    """
    Mutual-energy kernel between two grids

    Midpoint values -log|x_k - y_l| off the diagonal; a cell's entry
    with itself is 3/2 - log h. Nodes of distinct grids that coincide
    get the exact two-cell average.
    """
    diff = np.abs(g1.nodes[:, None] - g2.nodes[None, :])
    with np.errstate(divide="ignore"):
        block = -np.log(diff)
    if g1 is g2:
        np.fill_diagonal(block, self_energy(g1.widths))
        return block

    k, l = np.nonzero(diff < COINCIDENT_TOL)
    if k.size:
        block[k, l] = cell_pair_average(g1.lefts[k], g1.rights[k], g2.lefts[l], g2.rights[l])
    return block


@dataclass(frozen=True)
class TruncationChoice:
    radius: Optional[float]
    support_compact: bool


def _unbounded_pairs_nonnegative(p: ProblemInstance) -> bool:
    unbounded = [i for i, s in enumerate(p.sets) if not s.is_bounded]
    C = p.C.entries
    return all(C[i, j] >= 0 for i in unbounded for j in unbounded)


def choose_truncation(p: ProblemInstance, i: int, margin: float = DEFAULT_MARGIN) -> TruncationChoice:
    """
    Radius beyond which the field dominates every possible potential

    Finds the smallest R >= 1 + max finite endpoint magnitude with
    Q_i(x) >= 2 sum_j |c_ij| M_j log(1 + |x|) + margin for |x| >= R,
    M_j being the largest mass of component j over K.

    Returns:
        TruncationChoice (radius None for bounded sets) and the
        support-compactness flag for the whole instance
    """
    support_compact = _unbounded_pairs_nonnegative(p)
    s, q = p.sets[i], p.fields[i]
    if s.is_bounded:
        return TruncationChoice(None, support_compact)

    if not p.K.is_compact:
        raise UnboundedError("Truncation needs bounded masses but K is not compact")
    max_masses = np.array([p.K.max_mass(j) for j in range(p.d)])
    kappa = 2.0 * float(np.abs(p.C.entries[i]) @ max_masses)
    sides = [side for side, open_end in ((-1.0, s.unbounded_below), (1.0, s.unbounded_above)) if open_end]

    def holds_beyond(R: float) -> bool:
        xs = R * np.geomspace(1.0, 1e3, 512)
        return all(np.all(q(side * xs) >= kappa * np.log1p(xs) + margin) for side in sides)

    r_min = 1.0 + s.max_finite_magnitude()
    if holds_beyond(r_min):
        return TruncationChoice(r_min, support_compact)

    r_hi = 2.0 * r_min
    for _ in range(200):
        if holds_beyond(r_hi):
            break
        r_hi *= 2.0
    else:
        raise UnboundedError(f"Field {i + 1} never dominates the logarithmic bound")

    r_lo = r_min
    for _ in range(80):
        mid = 0.5 * (r_lo + r_hi)
        if holds_beyond(mid):
            r_hi = mid
        else:
            r_lo = mid
    logger.info(f"Truncation radius for component {i + 1}: {r_hi:.6g} (kappa={kappa:.4g}, margin={margin})")
    return TruncationChoice(r_hi, support_compact)


@dataclass(frozen=True, eq=False)
class DiscreteProblem:
    """Finite-dimensional quadratic program approximating the weighted energy"""
    problem: ProblemInstance
    grids: Tuple[Grid, ...]
    E: np.ndarray
    M: np.ndarray
    q: np.ndarray
    S: np.ndarray
    offsets: np.ndarray
    radii: Tuple[Optional[float], ...]
    support_compact: bool

    @property
    def d(self) -> int:
        return len(self.grids)

    @property
    def N(self) -> int:
        return int(self.offsets[-1])

    @property
    def K(self) -> MassPolyhedron:
        return self.problem.K

    @property
    def A(self) -> np.ndarray:
        return self.problem.K.A

    @property
    def a(self) -> np.ndarray:
        return self.problem.K.a

    def block_slice(self, i: int) -> slice:
        return slice(int(self.offsets[i]), int(self.offsets[i + 1]))

    def block(self, w: np.ndarray, i: int) -> np.ndarray:
        return w[self.block_slice(i)]

    def energy_block(self, i: int, j: int) -> np.ndarray:
        return self.E[self.block_slice(i), self.block_slice(j)]

    def masses(self, w: np.ndarray) -> np.ndarray:
        return self.S @ w

    def objective(self, w: np.ndarray) -> float:
        return float(w @ (self.M @ w) + 2.0 * self.q @ w)

    def gradient(self, w: np.ndarray) -> np.ndarray:
        return 2.0 * (self.M @ w + self.q)

    def nodes(self) -> np.ndarray:
        return np.concatenate([g.nodes for g in self.grids])

    def feasibility_residual(self, w: np.ndarray) -> float:
        return float(np.max(np.abs(self.A @ (self.S @ w) - self.a), initial=0.0))


@measure_execution_time
def assemble(
    p: ProblemInstance,
    nodes: Union[int, Sequence[int]] = 400,
    radii: Optional[Sequence[Optional[float]]] = None,
    margin: float = DEFAULT_MARGIN,
) -> DiscreteProblem:
    """
    Build grids, energy blocks, field vectors and mass map

    Args:
        p: problem instance
        nodes: cells per component (one int for all, or a list)
        radii: optional truncation radius overrides per component
        margin: truncation margin for choose_truncation

    Returns:
        DiscreteProblem with objective w^t M w + 2 q^t w over {w >= 0 : A S w = a}
    """
    if not p.K.is_feasible:
        raise InfeasibleError(f"Mass polyhedron of '{p.name}' is empty")

    counts = [int(nodes)] * p.d if np.isscalar(nodes) else [int(n) for n in nodes]
    if len(counts) != p.d:
        raise DegenerateGridError(f"Expected {p.d} node counts, got {len(counts)}")

    chosen: List[Optional[float]] = []
    support_compact = _unbounded_pairs_nonnegative(p)
    for i in range(p.d):
        override = radii[i] if radii is not None else None
        if override is not None or p.sets[i].is_bounded:
            chosen.append(None if p.sets[i].is_bounded else float(override))
        else:
            choice = choose_truncation(p, i, margin)
            chosen.append(choice.radius)

    grids = tuple(build_grid(s, n, r) for s, n, r in zip(p.sets, counts, chosen))
    offsets = np.concatenate([[0], np.cumsum([g.size for g in grids])])
    N = int(offsets[-1])

    E = np.empty((N, N))
    for i in range(p.d):
        for j in range(i, p.d):
            block = energy_block(grids[i], grids[j])
            E[offsets[i]:offsets[i + 1], offsets[j]:offsets[j + 1]] = block
            E[offsets[j]:offsets[j + 1], offsets[i]:offsets[i + 1]] = block.T

    sizes = np.diff(offsets)
    weights = np.repeat(np.repeat(p.C.entries, sizes, axis=0), sizes, axis=1)
    M = weights * E

    q = np.concatenate([field(g.nodes) for field, g in zip(p.fields, grids)])
    if not np.all(np.isfinite(q)):
        raise DegenerateGridError("External field is not finite at some grid node")

    S = np.zeros((p.d, N))
    for i in range(p.d):
        S[i, offsets[i]:offsets[i + 1]] = 1.0

    logger.info(f"Assembled '{p.name}': d={p.d}, N={N}, radii={chosen}")
    return DiscreteProblem(
        problem=p,
        grids=grids,
        E=E,
        M=M,
        q=q,
        S=S,
        offsets=offsets,
        radii=tuple(chosen),
        support_compact=support_compact,
    )


@dataclass(frozen=True, eq=False)
class MeasureTuple:
    """Concatenated nonnegative cell weights, blocked by component"""
    dp: DiscreteProblem
    weights: np.ndarray

    def __post_init__(self):
        weights = np.array(self.weights, dtype=float)
        if weights.shape != (self.dp.N,):
            raise ValueError(f"Expected {self.dp.N} weights, got shape {weights.shape}")
        weights.setflags(write=False)
        object.__setattr__(self, "weights", weights)

    @property
    def d(self) -> int:
        return self.dp.d

    def block(self, i: int) -> np.ndarray:
        return self.dp.block(self.weights, i)

    @property
    def masses(self) -> np.ndarray:
        return self.dp.masses(self.weights)

    @property
    def total_mass(self) -> float:
        return float(self.weights.sum())
