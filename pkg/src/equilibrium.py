"""
Certification of candidate solutions against the equilibrium conditions
Recovers the level constants and the multiplier vector F, audits
U_i + Q_i - (A^t F)_i on refined grids and reports boundary mass
left near truncation radii
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from discretize import DiscreteProblem, Grid, MeasureTuple, cell_average, energy_block
from model import ConfigError, ExternalField, VecEquilError
from solver import linear_subproblem

logger = logging.getLogger(__name__)

DEFAULT_EQ_TOL = 5e-2
DEFAULT_BOUNDARY_TOL = 1e-3
DEFAULT_MASS_FLOOR = 1e-9
DEFAULT_AUDIT_DENSITY = 4
BOUNDARY_CELLS = 2
# relative slack for points on a cell edge
EDGE_TOL = 1e-12

SOLUTION_COLUMNS = ["component", "node", "cell_width", "weight"]
POTENTIAL_COLUMNS = ["component", "x", "U_i", "Q_i", "U_i+Q_i", "AtF_i"]


class InactiveSolutionError(VecEquilError):
    """Every component carries zero mass"""


@dataclass(frozen=True, eq=False)
class Multipliers:
    """Level constants w_i on active components and the multiplier F solving A^t F = w there"""
    levels: np.ndarray
    F: np.ndarray
    residual: float
    active: np.ndarray

    def AtF(self, A: np.ndarray) -> np.ndarray:
        return A.T @ self.F


@dataclass
class EquilibriumReport:
    """Per-component violations and the overall verdict"""
    levels: np.ndarray
    F: np.ndarray
    residual: float
    active: np.ndarray
    lower_violation: np.ndarray
    upper_violation: np.ndarray
    boundary_mass: np.ndarray
    eq_tol: float
    boundary_tol: float
    passed: bool
    advice: List[str] = field(default_factory=list)

    @property
    def max_lower_violation(self) -> float:
        return float(np.max(self.lower_violation, initial=0.0))

    @property
    def max_upper_violation(self) -> float:
        return float(np.max(self.upper_violation, initial=0.0))

    def to_dict(self) -> Dict:
        return {
            "w": [float(v) if np.isfinite(v) else None for v in self.levels],
            "F": self.F.tolist(),
            "residual": float(self.residual),
            "lower_violation": self.max_lower_violation,
            "upper_violation": self.max_upper_violation,
            "boundary_mass": self.boundary_mass.tolist(),
            "pass": bool(self.passed),
            "active": self.active.tolist(),
            "per_component": {
                "lower_violation": self.lower_violation.tolist(),
                "upper_violation": self.upper_violation.tolist(),
            },
            "eq_tol": self.eq_tol,
            "boundary_tol": self.boundary_tol,
            "advice": list(self.advice),
        }

    def to_text(self) -> str:
        lines = [f"Equilibrium verdict: {'PASS' if self.passed else 'FAIL'} (eq_tol={self.eq_tol:g})"]
        for i in range(self.levels.size):
            level = f"{self.levels[i]:.8g}" if self.active[i] else "inactive"
            lines.append(
                f"  component {i + 1}: w={level} lower={self.lower_violation[i]:.3e} "
                f"upper={self.upper_violation[i]:.3e} boundary_mass={self.boundary_mass[i]:.3e}"
            )
        lines.append(f"  F={np.array2string(self.F, precision=8)} residual={self.residual:.3e}")
        lines.extend(f"  note: {a}" for a in self.advice)
        return "\n".join(lines)


def _kernel_against_grid(grid: Grid, x: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """
    sum_k weights_k (-log|x - x_k|), with the single-cell average inside a node's own cell

    Cell edges count as inside, so a point on a shared edge averages over both cells.
    """
    carrying = np.flatnonzero(weights)
    if carrying.size == 0:
        return np.zeros(x.size)
    nodes = grid.nodes[carrying]
    half = grid.widths[carrying] / 2
    diff = np.abs(x[:, None] - nodes[None, :])
    with np.errstate(divide="ignore"):
        K = -np.log(diff)
    rows, cols = np.nonzero(diff <= half[None, :] * (1.0 + EDGE_TOL))
    if rows.size:
        lefts, rights = grid.lefts[carrying], grid.rights[carrying]
        K[rows, cols] = cell_average(x[rows], lefts[cols], rights[cols])
    return K @ weights[carrying]


def potential(m: MeasureTuple, i: int, x: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    """Logarithmic potential of component i at x (scalar or array)"""
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    values = _kernel_against_grid(m.dp.grids[i], xs, m.block(i))
    return float(values[0]) if np.ndim(x) == 0 else values


def partial_potential(
    m: MeasureTuple, C: Optional[np.ndarray], i: int, x: Union[float, np.ndarray]
) -> Union[float, np.ndarray]:
    """U_i = sum_j c_ij U^{mu_j}; C defaults to the problem's interaction matrix"""
    C = m.dp.problem.C.entries if C is None else np.asarray(C, dtype=float)
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    total = np.zeros(xs.size)
    for j in range(m.d):
        if C[i, j] != 0.0:
            total += C[i, j] * _kernel_against_grid(m.dp.grids[j], xs, m.block(j))
    return float(total[0]) if np.ndim(x) == 0 else total


def _field_plus_potential(m: MeasureTuple, i: int, x: np.ndarray) -> np.ndarray:
    return partial_potential(m, None, i, x) + m.dp.problem.fields[i](x)


def recover_multipliers(m: MeasureTuple, p=None, mass_floor: float = DEFAULT_MASS_FLOOR) -> Multipliers:
    """
    Level constants and multiplier vector of a solved tuple

    Args:
        m: solved tuple with masses in K
        p: problem instance (defaults to the one the tuple was discretized from)
        mass_floor: relative mass below which a node or component counts as empty

    Returns:
        Multipliers with w_i (nan on inactive components), least-squares F and residual
    """
    p = p or m.dp.problem
    floor = mass_floor * max(m.total_mass, 0.0)
    masses = m.masses
    active = masses > floor
    if not np.any(active):
        raise InactiveSolutionError("All components carry zero mass; no multipliers to recover")

    levels = np.full(m.d, np.nan)
    for i in np.flatnonzero(active):
        weights = m.block(i)
        carrying = weights > floor
        values = _field_plus_potential(m, i, m.dp.grids[i].nodes[carrying])
        levels[i] = float(weights[carrying] @ values / weights[carrying].sum())

    At = p.K.A.T[active]
    F, *_ = np.linalg.lstsq(At, levels[active], rcond=None)
    residual = float(np.linalg.norm(At @ F - levels[active]))
    logger.info(f"Recovered levels {levels} and F={F} (residual {residual:.3e})")
    return Multipliers(levels=levels, F=F, residual=residual, active=active)


def audit_points(grid: Grid, density: int = DEFAULT_AUDIT_DENSITY) -> np.ndarray:
    """Subcell midpoints of every cell plus interval ends moved inward by h/10"""
    offsets = (np.arange(density) + 0.5) / density
    inner = (grid.lefts[:, None] + grid.widths[:, None] * offsets[None, :]).ravel()
    ends = []
    for first, last in grid.interval_ends():
        ends.append(grid.lefts[first] + grid.widths[first] / 10)
        ends.append(grid.rights[last] - grid.widths[last] / 10)
    return np.sort(np.concatenate([inner, ends]))


def boundary_mass(m: MeasureTuple, i: int) -> float:
    """Fraction of component i's mass in the outermost cells at truncated ends"""
    grid, weights = m.dp.grids[i], m.block(i)
    total = weights.sum()
    if total <= 0:
        return 0.0
    mass = 0.0
    if grid.truncated_low:
        mass += weights[:BOUNDARY_CELLS].sum()
    if grid.truncated_high:
        mass += weights[-BOUNDARY_CELLS:].sum()
    return float(mass / total)


def verify(
    m: MeasureTuple,
    multipliers: Optional[Multipliers] = None,
    eq_tol: float = DEFAULT_EQ_TOL,
    boundary_tol: float = DEFAULT_BOUNDARY_TOL,
    mass_floor: float = DEFAULT_MASS_FLOOR,
    audit_density: int = DEFAULT_AUDIT_DENSITY,
) -> EquilibriumReport:
    """
    Audit the equilibrium inequalities on refined grids

    Lower check: U_i + Q_i - (A^t F)_i >= -eq_tol on every audit point.
    Upper check: U_i + Q_i - (A^t F)_i <= eq_tol on nodes carrying weight.

    Returns:
        EquilibriumReport; the verdict is never raised as an exception
    """
    multipliers = multipliers or recover_multipliers(m, mass_floor=mass_floor)
    AtF = multipliers.AtF(m.dp.A)
    floor = mass_floor * m.total_mass

    lower = np.zeros(m.d)
    upper = np.zeros(m.d)
    boundary = np.zeros(m.d)
    advice = []
    for i in range(m.d):
        grid = m.dp.grids[i]
        xs = audit_points(grid, audit_density)
        excess = _field_plus_potential(m, i, xs) - AtF[i]
        lower[i] = max(0.0, -float(excess.min()))

        carrying = m.block(i) > floor
        if np.any(carrying):
            excess = _field_plus_potential(m, i, grid.nodes[carrying]) - AtF[i]
            upper[i] = max(0.0, float(excess.max()))

        boundary[i] = boundary_mass(m, i)
        if boundary[i] > boundary_tol:
            advice.append(
                f"component {i + 1} keeps {boundary[i]:.2e} of its mass at the truncation radius; "
                f"rerun with a larger radius"
            )

    passed = bool(np.all(lower <= eq_tol) and np.all(upper <= eq_tol) and np.all(boundary <= boundary_tol))
    report = EquilibriumReport(
        levels=multipliers.levels,
        F=multipliers.F,
        residual=multipliers.residual,
        active=multipliers.active,
        lower_violation=lower,
        upper_violation=upper,
        boundary_mass=boundary,
        eq_tol=eq_tol,
        boundary_tol=boundary_tol,
        passed=passed,
        advice=advice,
    )
    log = logger.info if passed else logger.warning
    log(f"Equilibrium check {'passed' if passed else 'failed'}: lower={report.max_lower_violation:.3e} "
        f"upper={report.max_upper_violation:.3e} boundary={boundary.max(initial=0.0):.3e}")
    return report


def energy(
    m: MeasureTuple,
    C: Optional[np.ndarray] = None,
    fields: Optional[Sequence[ExternalField]] = None,
) -> float:
    """Discrete weighted energy recomputed block by block from the grids"""
    dp = m.dp
    C = dp.problem.C.entries if C is None else np.asarray(C, dtype=float)
    fields = dp.problem.fields if fields is None else fields
    total = 0.0
    for i in range(m.d):
        wi = m.block(i)
        if not np.any(wi):
            continue
        for j in range(m.d):
            wj = m.block(j)
            if C[i, j] == 0.0 or not np.any(wj):
                continue
            total += C[i, j] * float(wi @ energy_block(dp.grids[i], dp.grids[j]) @ wj)
        total += 2.0 * float(fields[i](dp.grids[i].nodes) @ wi)
    return total


def fw_gap(dp: DiscreteProblem, w: np.ndarray) -> float:
    """Frank-Wolfe gap g^t (w - v) of a feasible weight vector"""
    w = np.asarray(w, dtype=float)
    g = dp.gradient(w)
    return float(g @ w) - linear_subproblem(dp, g).dot(g)


def solution_frame(m: MeasureTuple) -> pd.DataFrame:
    """One row per cell: component (1-based), node, cell width and weight"""
    frames = []
    for i, grid in enumerate(m.dp.grids):
        frames.append(pd.DataFrame({
            "component": i + 1,
            "node": grid.nodes,
            "cell_width": grid.widths,
            "weight": m.block(i),
        }))
    return pd.concat(frames, ignore_index=True)[SOLUTION_COLUMNS]


def potentials_frame(m: MeasureTuple, multipliers: Multipliers, audit_density: int = DEFAULT_AUDIT_DENSITY) -> pd.DataFrame:
    """U_i, Q_i, their sum and (A^t F)_i on the audit points of each component"""
    AtF = multipliers.AtF(m.dp.A)
    frames = []
    for i, grid in enumerate(m.dp.grids):
        xs = audit_points(grid, audit_density)
        U = partial_potential(m, None, i, xs)
        Q = m.dp.problem.fields[i](xs)
        frames.append(pd.DataFrame({
            "component": i + 1,
            "x": xs,
            "U_i": U,
            "Q_i": Q,
            "U_i+Q_i": U + Q,
            "AtF_i": AtF[i],
        }))
    return pd.concat(frames, ignore_index=True)[POTENTIAL_COLUMNS]


def load_solution(path: str, dp: DiscreteProblem, tol: float = 1e-12) -> MeasureTuple:
    """
    Reload a solution.csv written for the same discretization

    Raises:
        ConfigError: when columns, component sizes or node positions do not match
    """
    try:
        frame = pd.read_csv(path, dtype=float, float_precision="round_trip")
    except (OSError, ValueError) as e:
        raise ConfigError(f"Cannot read solution file {path}: {e}") from e
    missing = [c for c in SOLUTION_COLUMNS if c not in frame.columns]
    if missing:
        raise ConfigError(f"{path}: missing columns {missing}")

    weights = []
    for i, grid in enumerate(dp.grids):
        rows = frame[frame["component"] == i + 1]
        if len(rows) != grid.size:
            raise ConfigError(f"{path}: component {i + 1} has {len(rows)} cells, expected {grid.size}")
        nodes = rows["node"].to_numpy()
        scale = 1.0 + np.max(np.abs(grid.nodes))
        if np.max(np.abs(nodes - grid.nodes)) > tol * scale:
            raise ConfigError(f"{path}: node positions of component {i + 1} do not match the grid")
        weights.append(rows["weight"].to_numpy())
    if len(frame) != dp.N:
        raise ConfigError(f"{path}: {len(frame)} rows, expected {dp.N}")
    return MeasureTuple(dp, np.concatenate(weights))
