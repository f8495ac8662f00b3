"""
Frank-Wolfe minimization of the discrete weighted energy
The feasible set {w >= 0 : A S w = a} is handled through its vertices:
one node per component carrying the masses of a vertex of K
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from discretize import DiscreteProblem, MeasureTuple
from linprog import LPStatus, minimize_over_vertices, solve_lp
from model import InfeasibleError, UnboundedError
from utils import measure_execution_time

logger = logging.getLogger(__name__)

# Above this dimension the mass LP goes through the simplex instead of vertex enumeration
MAX_ENUMERATION_DIM = 12
MASS_TOL = 1e-15


@dataclass
class SolveOptions:
    """Frank-Wolfe settings"""
    max_iters: int = 20000
    gap_tol: float = 1e-6
    line_search: str = "exact"
    away_steps: bool = True
    seed: int = 0
    tie_break: str = "lowest"
    history_stride: int = 1
    refresh_every: int = 500

    def validate(self) -> bool:
        return (
            self.max_iters >= 1
            and self.gap_tol > 0
            and self.line_search == "exact"
            and self.tie_break in ("lowest", "random")
            and self.history_stride >= 1
            and self.refresh_every >= 1
        )


@dataclass(frozen=True)
class Vertex:
    """Vertex of the discrete feasible set: mass t_i on global node nodes[i] (-1 when t_i = 0)"""
    nodes: Tuple[int, ...]
    masses: Tuple[float, ...]

    @property
    def key(self) -> Tuple:
        return self.nodes + self.masses

    def support(self) -> Tuple[np.ndarray, np.ndarray]:
        """Global indices and masses of the nonzero entries"""
        idx = [(k, t) for k, t in zip(self.nodes, self.masses) if k >= 0]
        if not idx:
            return np.zeros(0, dtype=int), np.zeros(0)
        nodes, masses = zip(*idx)
        return np.array(nodes, dtype=int), np.array(masses)

    def dense(self, N: int) -> np.ndarray:
        v = np.zeros(N)
        nodes, masses = self.support()
        np.add.at(v, nodes, masses)
        return v

    def dot(self, x: np.ndarray) -> float:
        nodes, masses = self.support()
        return float(masses @ x[nodes])

    def apply(self, M: np.ndarray) -> np.ndarray:
        """M v using only the columns at the support"""
        nodes, masses = self.support()
        return M[:, nodes] @ masses


@dataclass(frozen=True, eq=False)
class SolveResult:
    """Outcome of solve(); history holds the objective every history_stride iterations"""
    weights: MeasureTuple
    objective: float
    gap: float
    iterations: int
    converged: bool
    history: Tuple[float, ...] = field(default_factory=tuple)
    away_steps: int = 0
    drop_steps: int = 0

    @property
    def masses(self) -> np.ndarray:
        return self.weights.masses


def _make_vertex(dp: DiscreteProblem, masses: np.ndarray, local_nodes) -> Vertex:
    nodes = []
    for i in range(dp.d):
        if masses[i] > MASS_TOL and local_nodes[i] >= 0:
            nodes.append(int(dp.offsets[i] + local_nodes[i]))
        else:
            nodes.append(-1)
    return Vertex(tuple(nodes), tuple(float(t) for t in masses))


def _start_atoms(dp: DiscreteProblem, t0: np.ndarray) -> List[Tuple[Vertex, float]]:
    """Decompose the uniform start into vertices by merging the block breakpoints k / N_i"""
    sizes = np.diff(dp.offsets)
    breakpoints = np.unique(np.concatenate([np.arange(1, n + 1) / n for n in sizes]))
    atoms = []
    previous = 0.0
    for b in breakpoints:
        mid = 0.5 * (previous + b)
        local = [min(int(mid * n), n - 1) for n in sizes]
        atoms.append((_make_vertex(dp, t0, local), float(b - previous)))
        previous = b
    return atoms


def feasible_start(dp: DiscreteProblem) -> MeasureTuple:
    """Masses from the phase-1 point of K, spread uniformly over each block"""
    t0 = dp.K.feasible_point
    if t0 is None:
        raise InfeasibleError("Mass polyhedron is empty; no feasible start")
    w = np.concatenate([np.full(g.size, t / g.size) for g, t in zip(dp.grids, t0)])
    return MeasureTuple(dp, w)


def gradient(dp: DiscreteProblem, w: np.ndarray) -> np.ndarray:
    """2 (M w + q): twice the discrete U_i + Q_i at the nodes of each grid"""
    return dp.gradient(np.asarray(w, dtype=float))


def _block_argmin(g_block: np.ndarray, tie_break: str, rng: Optional[np.random.Generator]) -> int:
    if tie_break == "random" and rng is not None:
        ties = np.flatnonzero(g_block == g_block.min())
        return int(rng.choice(ties))
    return int(np.argmin(g_block))


def linear_subproblem(
    dp: DiscreteProblem,
    g: np.ndarray,
    tie_break: str = "lowest",
    rng: Optional[np.random.Generator] = None,
) -> Vertex:
    """
    Minimize g^t v over {v >= 0 : A S v = a}

    Args:
        dp: discrete problem
        g: gradient vector
        tie_break: "lowest" or "random" among equal block minima
        rng: generator used for random tie-breaking

    Returns:
        Vertex putting mass t_i* on the argmin node of each block
    """
    local = [_block_argmin(dp.block(g, i), tie_break, rng) for i in range(dp.d)]
    block_min = np.array([dp.block(g, i)[k] for i, k in enumerate(local)])

    K = dp.K
    if K.is_compact and K.d <= MAX_ENUMERATION_DIM:
        index, _ = minimize_over_vertices(block_min, list(K.vertices))
        t = np.asarray(K.vertices[index])
    else:
        result = solve_lp(block_min, K.A, K.a)
        if result.status == LPStatus.UNBOUNDED:
            raise UnboundedError("Linear subproblem is unbounded: K is not compact")
        if result.status != LPStatus.OPTIMAL:
            raise InfeasibleError(f"Linear subproblem over K failed with status {result.status.name}")
        t = result.x
    return _make_vertex(dp, t, local)


class _ActiveSet:
    """
    Convex decomposition of the iterate into vertices, stored as arrays

    Row r holds the node indices and masses of one vertex (zero-mass slots point at
    the padding index N) and its convex weight. Drops swap the last row into place.
    """

    def __init__(self, N: int, d: int, capacity: int = 64):
        self.N = N
        self.size = 0
        self._nodes = np.full((capacity, d), N, dtype=np.intp)
        self._masses = np.zeros((capacity, d))
        self._weights = np.zeros(capacity)
        self._keys: List[Tuple] = []
        self._rows: Dict[Tuple, int] = {}

    @property
    def weights(self) -> np.ndarray:
        return self._weights[:self.size]

    def _grow(self):
        capacity = 2 * self._weights.size
        nodes = np.full((capacity, self._nodes.shape[1]), self.N, dtype=np.intp)
        nodes[:self.size] = self._nodes[:self.size]
        masses = np.zeros((capacity, self._masses.shape[1]))
        masses[:self.size] = self._masses[:self.size]
        weights = np.zeros(capacity)
        weights[:self.size] = self._weights[:self.size]
        self._nodes, self._masses, self._weights = nodes, masses, weights

    def add(self, vertex: Vertex, weight: float):
        row = self._rows.get(vertex.key)
        if row is not None:
            self._weights[row] += weight
            return
        if self.size == self._weights.size:
            self._grow()
        row = self.size
        self._nodes[row] = [k if k >= 0 else self.N for k in vertex.nodes]
        self._masses[row] = vertex.masses
        self._weights[row] = weight
        self._keys.append(vertex.key)
        self._rows[vertex.key] = row
        self.size += 1

    def reset(self, vertex: Vertex):
        self.size = 0
        self._keys.clear()
        self._rows.clear()
        self.add(vertex, 1.0)

    def scale(self, factor: float):
        self._weights[:self.size] *= factor

    def remove(self, row: int):
        last = self.size - 1
        del self._rows[self._keys[row]]
        if row != last:
            self._nodes[row] = self._nodes[last]
            self._masses[row] = self._masses[last]
            self._weights[row] = self._weights[last]
            self._keys[row] = self._keys[last]
            self._rows[self._keys[row]] = row
        self._keys.pop()
        self.size = last

    def prune(self, floor: float):
        """Drop rows whose weight fell to the floor"""
        for row in range(self.size - 1, -1, -1):
            if self._weights[row] <= floor:
                self.remove(row)

    def values(self, g: np.ndarray) -> np.ndarray:
        """g^t v for every stored vertex v"""
        padded = np.append(g, 0.0)
        return (padded[self._nodes[:self.size]] * self._masses[:self.size]).sum(axis=1)

    def vertex(self, row: int) -> Vertex:
        return Vertex(
            tuple(int(k) if k < self.N else -1 for k in self._nodes[row]),
            tuple(float(t) for t in self._masses[row]),
        )

    def dense(self) -> np.ndarray:
        """sum_r weight_r v_r after renormalizing the weights to one"""
        self._weights[:self.size] /= self._weights[:self.size].sum()
        w = np.zeros(self.N + 1)
        contributions = self._weights[:self.size, None] * self._masses[:self.size]
        np.add.at(w, self._nodes[:self.size].ravel(), contributions.ravel())
        return w[:self.N]


@measure_execution_time
def solve(dp: DiscreteProblem, opts: Optional[SolveOptions] = None) -> SolveResult:
    """
    Frank-Wolfe with exact line search and optional away steps

    Args:
        dp: discrete problem
        opts: solver options

    Returns:
        SolveResult with the final tuple, objective, gap and history
    """
    opts = opts or SolveOptions()
    if not opts.validate():
        raise ValueError(f"Invalid solver options: {opts}")
    rng = np.random.default_rng(opts.seed)

    t0 = dp.K.feasible_point
    if t0 is None:
        raise InfeasibleError("Mass polyhedron is empty; no feasible start")
    active = _ActiveSet(dp.N, dp.d)
    for vertex, weight in _start_atoms(dp, np.asarray(t0)):
        active.add(vertex, weight)

    w = feasible_start(dp).weights.copy()
    Mw = dp.M @ w
    J = float(w @ Mw + 2.0 * dp.q @ w)
    history = [J]
    gap = np.inf
    converged = False
    n_away = n_drop = 0
    iteration = 0

    for iteration in range(1, opts.max_iters + 1):
        g = 2.0 * (Mw + dp.q)
        s = linear_subproblem(dp, g, opts.tie_break, rng)
        gw = float(g @ w)
        gap = gw - s.dot(g)
        if gap <= opts.gap_tol * (1.0 + abs(J)):
            converged = True
            iteration -= 1
            break

        away_row = None
        if opts.away_steps and active.size > 1:
            values = active.values(g)
            row = int(np.argmax(values))
            if values[row] - gw > gap and active.weights[row] < 1.0:
                away_row = row

        if away_row is None:
            Md = s.apply(dp.M) - Mw
            slope = s.dot(g) - gw
            curvature = s.dot(Md) - float(w @ Md)
            gamma_max = 1.0
        else:
            vertex, lam = active.vertex(away_row), float(active.weights[away_row])
            Md = Mw - vertex.apply(dp.M)
            slope = gw - vertex.dot(g)
            curvature = float(w @ Md) - vertex.dot(Md)
            gamma_max = lam / (1.0 - lam)

        if curvature > 0:
            gamma = min(max(-slope / (2.0 * curvature), 0.0), gamma_max)
        else:
            gamma = gamma_max

        if away_row is None:
            w = (1.0 - gamma) * w + gamma * s.dense(dp.N)
            if gamma >= 1.0:
                active.reset(s)
            else:
                active.scale(1.0 - gamma)
                active.add(s, gamma)
        else:
            n_away += 1
            w = (1.0 + gamma) * w - gamma * vertex.dense(dp.N)
            active.scale(1.0 + gamma)
            active.weights[away_row] -= gamma
            if gamma >= gamma_max:
                n_drop += 1
                active.remove(away_row)

        if iteration % opts.refresh_every == 0:
            active.prune(MASS_TOL)
            w = active.dense()
            Mw = dp.M @ w
            logger.debug(f"iter {iteration}: J={J:.12g} gap={gap:.3e} atoms={active.size}")
        else:
            Mw = Mw + gamma * Md
        np.maximum(w, 0.0, out=w)

        J = float(w @ Mw + 2.0 * dp.q @ w)
        if iteration % opts.history_stride == 0:
            history.append(J)

    if not converged:
        g = 2.0 * (Mw + dp.q)
        gap = float(g @ w) - linear_subproblem(dp, g, opts.tie_break, rng).dot(g)
        logger.warning(f"Frank-Wolfe stopped at max_iters={opts.max_iters} with gap {gap:.3e}")

    J = float(w @ (dp.M @ w) + 2.0 * dp.q @ w)
    if history[-1] != J:
        history.append(J)

    logger.info(
        f"Solved '{dp.problem.name}': J={J:.10g} gap={gap:.3e} iterations={iteration} "
        f"converged={converged} away={n_away} drops={n_drop}"
    )
    return SolveResult(
        weights=MeasureTuple(dp, w),
        objective=J,
        gap=float(gap),
        iterations=iteration,
        converged=converged,
        history=tuple(history),
        away_steps=n_away,
        drop_steps=n_drop,
    )
