"""
Closed-form reference solutions
Arcsine laws as exact per-cell masses, interval and condenser energies,
elliptic integrals by the arithmetic-geometric mean, and a catalogue of
named problem instances used as fixtures
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np

from discretize import Grid, MeasureTuple
from graphs import DirectedMultigraph, incidence_matrix, interaction_from_graph
from model import ConstructionError, ExternalField, MassPolyhedron, ProblemInstance, make_instance, normalize_interval_union

logger = logging.getLogger(__name__)

AGM_MAX_ITERS = 64
GRID_TOL = 1e-12


@dataclass(frozen=True)
class ClosedFormMeasure:
    """Arcsine law on [a, b] or a weighted mixture of arcsine laws"""
    kind: str
    parameters: Tuple[Tuple[float, float, float], ...]
    mass: float

    def __post_init__(self):
        if self.kind not in ("arcsine", "mixture"):
            raise ConstructionError(f"Unknown closed-form measure kind '{self.kind}'")
        if self.mass <= 0:
            raise ConstructionError("Closed-form measures need positive mass")
        for a, b, _ in self.parameters:
            if not b > a:
                raise ConstructionError(f"Arcsine law needs b > a, got [{a}, {b}]")

    @classmethod
    def arcsine(cls, a: float, b: float, mass: float = 1.0) -> "ClosedFormMeasure":
        return cls("arcsine", ((a, b, mass),), mass)

    @classmethod
    def mixture(cls, parts: Sequence[Tuple[float, float, float]]) -> "ClosedFormMeasure":
        parts = tuple((float(a), float(b), float(t)) for a, b, t in parts if t > 0)
        return cls("mixture", parts, sum(t for _, _, t in parts))

    def cell_masses(self, grid: Grid) -> np.ndarray:
        total = np.zeros(grid.size)
        for a, b, t in self.parameters:
            total += t * _clipped_arcsine_masses(a, b, grid.lefts, grid.rights)
        return total


def _arcsine_cdf(a: float, b: float, x: np.ndarray) -> np.ndarray:
    psi = np.clip((2.0 * x - a - b) / (b - a), -1.0, 1.0)
    return np.arcsin(psi) / np.pi


def _clipped_arcsine_masses(a: float, b: float, lefts: np.ndarray, rights: np.ndarray) -> np.ndarray:
    """Arcsine cell integrals; cells outside [a, b] get the part inside (possibly zero)"""
    return _arcsine_cdf(a, b, rights) - _arcsine_cdf(a, b, lefts)


def arcsine_weights(a: float, b: float, grid: Grid, mass: float = 1.0) -> np.ndarray:
    """
    Exact per-cell masses of the arcsine law of [a, b]

    Cell [u, v] gets (1/pi)(arcsin psi(v) - arcsin psi(u)) with psi the
    affine map of [a, b] onto [-1, 1].

    Raises:
        ValueError: when a cell of the grid leaves [a, b]
    """
    if not b > a:
        raise ValueError(f"Arcsine law needs b > a, got [{a}, {b}]")
    slack = GRID_TOL * (1.0 + max(abs(a), abs(b)))
    if grid.lefts.min() < a - slack or grid.rights.max() > b + slack:
        raise ValueError(f"Grid [{grid.lefts.min()}, {grid.rights.max()}] extends beyond [{a}, {b}]")
    return mass * _clipped_arcsine_masses(a, b, grid.lefts, grid.rights)


def interval_energy(a: float, b: float) -> float:
    """Energy of the equilibrium measure of [a, b]: log(4 / (b - a))"""
    return math.log(4.0 / (b - a))


def _agm(x: float, y: float) -> float:
    for _ in range(AGM_MAX_ITERS):
        if abs(x - y) <= 1e-16 * x:
            break
        x, y = 0.5 * (x + y), math.sqrt(x * y)
    return x


def elliptic_K(k: float) -> float:
    """Complete elliptic integral of the first kind, modulus k"""
    if not 0.0 <= k < 1.0:
        raise ValueError(f"elliptic_K needs 0 <= k < 1, got {k}")
    return math.pi / (2.0 * _agm(1.0, math.sqrt(1.0 - k * k)))


def elliptic_K_prime(k: float) -> float:
    """Complementary integral K'(k) = K(sqrt(1 - k^2)); needs 0 < k <= 1"""
    if not 0.0 < k <= 1.0:
        raise ValueError(f"elliptic_K_prime needs 0 < k <= 1, got {k}")
    return elliptic_K(math.sqrt(1.0 - k * k))


def condenser_energy(n: float) -> float:
    """Minimal energy of unit opposite charges on [-1/2, -1/n] and [1/n, 1/2]"""
    if not n > 2:
        raise ValueError(f"Condenser plates need n > 2, got {n}")
    k = 2.0 / n
    return 2.0 * math.pi * elliptic_K(k) / elliptic_K_prime(k)


def circle_potential(N: float, x) -> float:
    """Potential of the equilibrium measure of the circle |z| = e^{-N}: min(N, log 1/|x|)"""
    if not math.isfinite(N):
        raise ValueError("circle_potential needs a finite N")
    r = abs(x)
    if r == 0:
        return float(N)
    return min(float(N), -math.log(r))


def condenser2_masses(a1: float, a2: float) -> Tuple[float, float]:
    """Weights of the two arcsine laws forming the first component"""
    if a2 > 2.0 * a1:
        raise ValueError(f"Closed form needs a2 <= 2 a1, got a1={a1}, a2={a2}")
    if a1 < 0 or a2 < 0:
        raise ValueError("Masses must be nonnegative")
    return a1 - a2 / 2.0, a2 / 2.0


def condenser2_solution(
    a1: float,
    a2: float,
    delta1: Tuple[float, float],
    delta2: Tuple[float, float],
    grids: Sequence[Grid],
    dp=None,
) -> np.ndarray:
    """
    Per-cell weights of the nested-plates minimizer on the given grids

    mu_1 = (a1 - a2/2) w_{D1} + (a2/2) w_{D2}, mu_2 = a2 w_{D2}.
    Returns the concatenated weight vector, or a MeasureTuple when dp is given.
    """
    (l1, r1), (l2, r2) = delta1, delta2
    if not (l1 <= l2 < r2 <= r1):
        raise ValueError(f"Closed form needs D2 inside D1, got {delta1} and {delta2}")
    spread, inner = condenser2_masses(a1, a2)
    mu1 = ClosedFormMeasure.mixture([(l1, r1, spread), (l2, r2, inner)]) if a1 > 0 else None
    first = mu1.cell_masses(grids[0]) if mu1 is not None else np.zeros(grids[0].size)
    second = arcsine_weights(l2, r2, grids[1], a2) if a2 > 0 else np.zeros(grids[1].size)
    weights = np.concatenate([first, second])
    return MeasureTuple(dp, weights) if dp is not None else weights


def condenser2_energy(a1: float, a2: float, delta1: Tuple[float, float], delta2: Tuple[float, float]) -> float:
    """Energy of the nested-plates minimizer with C = [[2, -1], [-1, 2]]"""
    spread, inner = condenser2_masses(a1, a2)
    I1, I2 = interval_energy(*delta1), interval_energy(*delta2)
    # the potential of w_{D1} is constant on D2, so I(w_{D1}, w_{D2}) = I1
    self1 = spread * spread * I1 + 2.0 * spread * inner * I1 + inner * inner * I2
    mutual = a2 * (spread * I1 + inner * I2)
    self2 = a2 * a2 * I2
    return 2.0 * self1 - 2.0 * mutual + 2.0 * self2


def gaussian_field_energy() -> float:
    """Minimal I(mu) + 2 int x^2 dmu over unit measures on R (semicircle on [-1, 1])"""
    return 0.75 + math.log(2.0)


def _condenser(n: float = 4.0) -> ProblemInstance:
    return make_instance(
        [[1, -1], [-1, 1]], [[(-0.5, -1.0 / n)], [(1.0 / n, 0.5)]],
        A=np.eye(2), a=[1.0, 1.0], name=f"condenser-n{n:g}",
    )


def _condenser_touching() -> ProblemInstance:
    return make_instance(
        [[1, -1], [-1, 1]], [[(-0.5, 0.0)], [(0.0, 0.5)]],
        A=np.eye(2), a=[1.0, 1.0], name="condenser-touching",
    )


def _example0() -> ProblemInstance:
    return make_instance([[1, 1], [1, 1]], [[(-1, 1)], [(-1, 1)]], name="example0")


def _example1() -> ProblemInstance:
    # the quarter circle of masses is not a polyhedron; the simplex stands in for checks
    return make_instance(np.eye(2), [[(-1, 1)], [(-1, 1)]], name="example1")


def _example2() -> ProblemInstance:
    return make_instance(np.eye(2), [[(-4, 4)], [(-4, 4)]], name="example2")


def _condenser2(a1: float = 1.0, a2: float = 1.0, delta1=(-1.0, 1.0), delta2=(-0.5, 0.5)) -> ProblemInstance:
    return make_instance(
        [[2, -1], [-1, 2]], [[tuple(delta1)], [tuple(delta2)]],
        A=np.eye(2), a=[a1, a2], name="condenser2",
    )


AV_GRAPH = DirectedMultigraph.from_one_indexed(3, [(1, 3), (1, 2), (3, 2)])
NIKISHIN_GRAPH = DirectedMultigraph.from_one_indexed(4, [(1, 2), (2, 3), (3, 4)])
ANGELESCO_GRAPH = DirectedMultigraph.from_one_indexed(4, [(1, 2), (1, 3), (1, 4)])


def _graph_instance(g: DirectedMultigraph, sets, A, a, name: str) -> ProblemInstance:
    unions = tuple(normalize_interval_union(raw) for raw in sets)
    fields = tuple(ExternalField() for _ in unions)
    return ProblemInstance(unions, interaction_from_graph(g), fields, MassPolyhedron(A, a), name=name)


def _av_graph() -> ProblemInstance:
    return _graph_instance(
        AV_GRAPH, [[(-1, 0)], [(0, 1)], [(-0.5, 0.5)]],
        [[1, 1, 0], [1, 0, -1]], [2, 1], "av-graph",
    )


def _nikishin() -> ProblemInstance:
    return _graph_instance(
        NIKISHIN_GRAPH, [[(0, 1)], [(-2, -1)], [(2, 3)]],
        np.eye(3), [1.0, 1.0, 1.0], "nikishin",
    )


def _angelesco() -> ProblemInstance:
    return _graph_instance(
        ANGELESCO_GRAPH, [[(-2, -1)], [(-0.5, 0.5)], [(1, 2)]],
        np.ones((1, 3)), [1.0], "angelesco",
    )


def _scalar() -> ProblemInstance:
    return make_instance([[1]], [[(-1, 1)]], A=[[1]], a=[1], name="scalar")


def _scalar_wide() -> ProblemInstance:
    return make_instance([[1]], [[(-4, 4)]], A=[[1]], a=[1], name="scalar-wide")


def _gaussian() -> ProblemInstance:
    return make_instance(
        [[1]], [[("-inf", "inf")]], A=[[1]], a=[1],
        fields=[ExternalField((0.0, 0.0, 1.0))], name="gaussian",
    )


EXAMPLES: Dict[str, Callable[..., ProblemInstance]] = {
    "condenser": _condenser,
    "condenser_touching": _condenser_touching,
    "example0": _example0,
    "example1": _example1,
    "example2": _example2,
    "condenser2": _condenser2,
    "av_graph": _av_graph,
    "nikishin": _nikishin,
    "angelesco": _angelesco,
    "scalar": _scalar,
    "scalar_wide": _scalar_wide,
    "gaussian": _gaussian,
}

EXAMPLE_GRAPHS: Dict[str, DirectedMultigraph] = {
    "av_graph": AV_GRAPH,
    "nikishin": NIKISHIN_GRAPH,
    "angelesco": ANGELESCO_GRAPH,
}


def example_instance(name: str, **params) -> ProblemInstance:
    """Named fixture instance; keyword parameters go to the builder (e.g. n for the condenser)"""
    try:
        builder = EXAMPLES[name]
    except KeyError:
        raise KeyError(f"Unknown example '{name}'; choose from {sorted(EXAMPLES)}") from None
    return builder(**params)


def oracle_summary(name: str, **params) -> Dict:
    """
    Closed-form reference values for a named example

    Args:
        name: example name (see EXAMPLES) or "interval"/"circle"
        params: example parameters (n, a1, a2, a, b, N, x)

    Returns:
        Dictionary of reference quantities
    """
    if name == "condenser":
        n = float(params.get("n", 4.0))
        k = 2.0 / n
        return {
            "example": name, "n": n, "k": k,
            "K": elliptic_K(k), "K_prime": elliptic_K_prime(k),
            "energy": condenser_energy(n),
        }
    if name in ("scalar", "scalar_wide", "interval"):
        a, b = {"scalar": (-1.0, 1.0), "scalar_wide": (-4.0, 4.0)}.get(name, (params.get("a", -1.0), params.get("b", 1.0)))
        return {"example": name, "a": float(a), "b": float(b), "energy": interval_energy(a, b), "capacity": (b - a) / 4.0}
    if name == "example2":
        return {"example": name, "energy": interval_energy(-4.0, 4.0), "minimizers": [[1.0, 0.0], [0.0, 1.0]]}
    if name == "example0":
        return {"example": name, "energy": interval_energy(-1.0, 1.0)}
    if name == "condenser2":
        a1, a2 = float(params.get("a1", 1.0)), float(params.get("a2", 1.0))
        delta1, delta2 = (-1.0, 1.0), (-0.5, 0.5)
        spread, inner = condenser2_masses(a1, a2)
        return {
            "example": name, "a1": a1, "a2": a2,
            "mu1": {"spread_mass": spread, "inner_mass": inner},
            "mu2": {"inner_mass": a2},
            "energy": condenser2_energy(a1, a2, delta1, delta2),
        }
    if name == "gaussian":
        return {"example": name, "energy": gaussian_field_energy(), "support": [-1.0, 1.0]}
    if name == "circle":
        N, x = float(params.get("N", 1.0)), params.get("x", 1.0)
        return {"example": name, "N": N, "x": abs(x), "potential": circle_potential(N, x)}
    raise KeyError(f"No closed-form reference for '{name}'")
