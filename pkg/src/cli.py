"""
Command-line driver
Parses a JSON problem file, runs the hypothesis checks, discretizes,
solves, certifies and writes every artifact into one output directory
"""

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from typing import Any, Dict, List, Literal, Optional, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from assumptions import AssumptionReport, run_all_checks
from config import EquilibriumConfig, get_config
from discretize import MIN_NODES_PER_INTERVAL, assemble
from equilibrium import load_solution, potentials_frame, recover_multipliers, solution_frame, verify
from graphs import DirectedMultigraph, interaction_from_graph
from model import (
    ConfigError,
    ExternalField,
    MassPolyhedron,
    OutputExistsError,
    ProblemInstance,
    VecEquilError,
    factorize,
    normalize_interval_union,
)
from oracles import EXAMPLE_GRAPHS, example_instance, oracle_summary
from solver import SolveOptions, solve
from utils import FLOAT_DIGITS, PerformanceTracker, to_jsonable

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_NOT_CERTIFIED = 2
EXIT_ASSUMPTIONS = 3
EXIT_INPUT = 4

LOG_FORMAT = "%(asctime)s - %(levelname)s - %(message)s"
CSV_FLOAT_FORMAT = f"%.{FLOAT_DIGITS}g"
MIN_NODES = MIN_NODES_PER_INTERVAL

Endpoint = Union[float, str]


class GraphSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    vertices: int = Field(ge=2)
    edges: List[Tuple[int, int]] = Field(min_length=1)


class FieldSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    coefficients: List[float] = Field(default_factory=lambda: [0.0], min_length=1)
    log_coefficient: float = Field(default=0.0, ge=0.0)
    center: float = 0.0


class PolyhedronSpec(BaseModel):
    """Rows of A with right-hand side a, or a simplex total, or fixed masses"""
    model_config = ConfigDict(extra="forbid")

    A: Optional[List[List[float]]] = None
    a: Optional[List[float]] = None
    simplex: Optional[float] = Field(default=None, gt=0)
    fixed: Optional[List[float]] = None

    @model_validator(mode="after")
    def _one_form(self):
        forms = [self.A is not None or self.a is not None, self.simplex is not None, self.fixed is not None]
        if sum(forms) != 1:
            raise ValueError("give exactly one of {A, a}, simplex or fixed")
        if forms[0] and (self.A is None or self.a is None):
            raise ValueError("A and a must be given together")
        return self

    def build(self, d: int) -> MassPolyhedron:
        if self.simplex is not None:
            return MassPolyhedron.simplex(d, self.simplex)
        if self.fixed is not None:
            return MassPolyhedron.fixed(self.fixed)
        return MassPolyhedron(np.array(self.A, dtype=float), np.array(self.a, dtype=float))


class SolverSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    max_iters: Optional[int] = Field(default=None, ge=1)
    gap_tol: Optional[float] = Field(default=None, gt=0)
    away_steps: Optional[bool] = None
    seed: Optional[int] = None
    refresh_every: Optional[int] = Field(default=None, ge=1)
    tie_break: Optional[Literal["lowest", "random"]] = None


class EquilibriumSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    eq_tol: Optional[float] = Field(default=None, gt=0)
    boundary_tol: Optional[float] = Field(default=None, gt=0)
    mass_floor: Optional[float] = Field(default=None, ge=0)
    audit_density: Optional[int] = Field(default=None, ge=1)


class ProblemSpec(BaseModel):
    """Schema of the JSON problem file"""
    model_config = ConfigDict(extra="forbid")

    name: str = "problem"
    example: Optional[str] = None
    params: Dict[str, float] = Field(default_factory=dict)
    interaction: Optional[List[List[float]]] = None
    graph: Optional[GraphSpec] = None
    sets: Optional[List[List[Tuple[Endpoint, Endpoint]]]] = None
    fields: Optional[List[FieldSpec]] = None
    polyhedron: Union[Literal["simplex"], PolyhedronSpec] = "simplex"
    nodes: Optional[Union[int, List[int]]] = None
    truncation: Optional[List[Optional[float]]] = None
    solver: SolverSection = Field(default_factory=SolverSection)
    equilibrium: EquilibriumSection = Field(default_factory=EquilibriumSection)

    @field_validator("nodes")
    @classmethod
    def _positive_nodes(cls, value):
        counts = [value] if isinstance(value, int) else value
        if counts is not None and any(n < MIN_NODES for n in counts):
            raise ValueError(f"grid sizes must be at least {MIN_NODES}")
        return value

    @field_validator("sets")
    @classmethod
    def _valid_sets(cls, value):
        if value is None:
            return value
        for k, raw in enumerate(value):
            try:
                normalize_interval_union(raw)
            except VecEquilError as e:
                raise ValueError(f"set {k + 1}: {e}") from e
        return value

    @model_validator(mode="after")
    def _one_source(self):
        sources = [self.example is not None, self.interaction is not None, self.graph is not None]
        if sum(sources) != 1:
            raise ValueError("give exactly one of example, interaction or graph")
        if self.example is None and self.sets is None:
            raise ValueError("sets are required unless an example is named")
        return self


@dataclass
class RunConfig:
    """Everything one CLI invocation needs"""
    command: str
    instance: Optional[ProblemInstance] = None
    graph: Optional[DirectedMultigraph] = None
    nodes: List[int] = field(default_factory=list)
    radii: Optional[List[Optional[float]]] = None
    truncation_margin: float = 10.0
    solve_options: SolveOptions = field(default_factory=SolveOptions)
    equilibrium: EquilibriumConfig = field(default_factory=EquilibriumConfig)
    output_dir: Optional[str] = None
    cycle_limit: int = 1024
    force: bool = False
    overwrite: bool = False
    solution_path: Optional[str] = None
    oracle_name: Optional[str] = None
    oracle_params: Dict[str, float] = field(default_factory=dict)


def _validation_messages(error: ValidationError) -> List[str]:
    return [f"{'.'.join(str(part) for part in e['loc']) or '<root>'}: {e['msg']}" for e in error.errors()]


def load_problem_spec(path: str) -> ProblemSpec:
    """Read and validate a JSON problem file; errors carry line or field locations"""
    if not os.path.isfile(path):
        raise ConfigError(f"Config file not found: {path}")
    with open(path, "r", encoding="utf-8") as handle:
        text = handle.read()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}:{e.lineno}:{e.colno}: {e.msg}") from e
    try:
        return ProblemSpec.model_validate(raw)
    except ValidationError as e:
        raise ConfigError(f"{path}: " + "; ".join(_validation_messages(e))) from e


def build_instance(spec: ProblemSpec, tol_psd: float = 1e-10, tol_fac: float = 1e-12) -> Tuple[ProblemInstance, Optional[DirectedMultigraph]]:
    """Problem instance (and generating graph, if any) described by a validated spec"""
    if spec.example is not None:
        instance = example_instance(spec.example, **spec.params)
        return instance, EXAMPLE_GRAPHS.get(spec.example)

    graph = None
    if spec.graph is not None:
        graph = DirectedMultigraph.from_one_indexed(spec.graph.vertices, spec.graph.edges)
        C = interaction_from_graph(graph, tol_psd=tol_psd)
    else:
        C = factorize(np.array(spec.interaction, dtype=float), tol_psd=tol_psd, tol_fac=tol_fac)

    sets = tuple(normalize_interval_union(raw) for raw in spec.sets)
    d = len(sets)
    if spec.fields is None:
        fields = tuple(ExternalField() for _ in range(d))
    else:
        fields = tuple(ExternalField(tuple(f.coefficients), f.log_coefficient, f.center) for f in spec.fields)
    polyhedron = MassPolyhedron.simplex(d) if spec.polyhedron == "simplex" else spec.polyhedron.build(d)
    return ProblemInstance(sets, C, fields, polyhedron, name=spec.name), graph


def _parse_nodes(text: Optional[str]) -> Optional[List[int]]:
    if text is None:
        return None
    try:
        counts = [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise ConfigError(f"--nodes expects N or N,N,...; got {text!r}") from None
    if not counts or any(n < MIN_NODES for n in counts):
        raise ConfigError(f"--nodes needs grid sizes of at least {MIN_NODES}, got {text!r}")
    return counts


def _overlay(base: Dict[str, Any], *layers: Dict[str, Any]) -> Dict[str, Any]:
    merged = dict(base)
    for layer in layers:
        merged.update({k: v for k, v in layer.items() if v is not None})
    return merged


def parse_config(path: str, args: Optional[argparse.Namespace] = None) -> RunConfig:
    """
    Build a RunConfig from a problem file and optional CLI arguments

    Precedence: command-line flag > JSON section > VECEQUIL_* environment > defaults.

    Raises:
        ConfigError: schema violations, with field diagnostics
    """
    settings = get_config()
    spec = load_problem_spec(path)
    disc = settings.discretization
    instance, graph = build_instance(spec, disc.tol_psd, disc.tol_fac)

    cli = vars(args) if args is not None else {}
    nodes = _parse_nodes(cli.get("nodes"))
    if nodes is None and spec.nodes is not None:
        nodes = [spec.nodes] if isinstance(spec.nodes, int) else list(spec.nodes)
    if nodes is None:
        nodes = [disc.nodes_per_component]
    if len(nodes) == 1:
        nodes = nodes * instance.d
    if len(nodes) != instance.d:
        raise ConfigError(f"{path}: {len(nodes)} grid sizes given for {instance.d} components")
    for i, (n, s) in enumerate(zip(nodes, instance.sets)):
        pieces = sum(1 for a, b in s.intervals if b > a)
        if n < MIN_NODES * pieces:
            raise ConfigError(f"{path}: component {i + 1} spans {pieces} intervals and needs at least {MIN_NODES * pieces} cells, got {n}")
    if spec.truncation is not None and len(spec.truncation) != instance.d:
        raise ConfigError(f"{path}: truncation: expected {instance.d} entries, got {len(spec.truncation)}")

    solver_values = _overlay(
        {k: getattr(settings.solver, k) for k in ("max_iters", "gap_tol", "away_steps", "seed", "refresh_every")},
        spec.solver.model_dump(),
        {"gap_tol": cli.get("gap_tol"), "seed": cli.get("seed")},
    )
    equilibrium_values = _overlay(
        vars(settings.equilibrium).copy(),
        spec.equilibrium.model_dump(),
        {"eq_tol": cli.get("eq_tol")},
    )
    equilibrium = EquilibriumConfig(**equilibrium_values)
    options = SolveOptions(**solver_values)
    if not equilibrium.validate() or not options.validate():
        raise ConfigError(f"{path}: invalid solver or equilibrium settings")

    output_dir = cli.get("out") or os.path.join(settings.application.output_dir, instance.name)
    return RunConfig(
        command=cli.get("command", "solve"),
        instance=instance,
        graph=graph,
        nodes=nodes,
        radii=spec.truncation,
        truncation_margin=disc.truncation_margin,
        solve_options=options,
        equilibrium=equilibrium,
        output_dir=output_dir,
        cycle_limit=settings.application.cycle_limit,
        force=bool(cli.get("force", False)),
        overwrite=bool(cli.get("overwrite", False)),
        solution_path=cli.get("solution"),
    )


def _prepare_output(directory: str, overwrite: bool):
    if os.path.isdir(directory) and os.listdir(directory) and not overwrite:
        raise OutputExistsError(f"Output directory {directory} is not empty; pass --overwrite to replace its artifacts")
    os.makedirs(directory, exist_ok=True)


def _write_json(path: str, payload: Dict[str, Any]):
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(to_jsonable(payload), handle, indent=2)
        handle.write("\n")


def _write_csv(path: str, frame: pd.DataFrame):
    frame.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT)


def _guarantees_hold(report: AssumptionReport) -> bool:
    return report.existence_guaranteed and report.uniqueness_guaranteed


def _run_oracle(config: RunConfig) -> int:
    summary = oracle_summary(config.oracle_name, **config.oracle_params)
    print(json.dumps(to_jsonable(summary), indent=2))
    if config.output_dir:
        _prepare_output(config.output_dir, config.overwrite)
        _write_json(os.path.join(config.output_dir, "oracle.json"), summary)
    return EXIT_OK


def _certify(config: RunConfig, solution, tracker: PerformanceTracker):
    eq = config.equilibrium
    tracker.start_timer("verify")
    multipliers = recover_multipliers(solution, mass_floor=eq.mass_floor)
    report = verify(solution, multipliers, eq.eq_tol, eq.boundary_tol, eq.mass_floor, eq.audit_density)
    tracker.end_timer("verify")
    _write_csv(os.path.join(config.output_dir, "potentials.csv"), potentials_frame(solution, multipliers, eq.audit_density))
    return report


def run(config: RunConfig) -> int:
    """
    Execute one subcommand and write its artifacts

    Returns:
        Exit status: 0 solved and certified, 2 certification failed,
        3 assumptions preclude guarantees, 4 input error
    """
    if config.command == "oracle":
        return _run_oracle(config)

    _prepare_output(config.output_dir, config.overwrite)
    handler = logging.FileHandler(os.path.join(config.output_dir, "run.log"), mode="w", encoding="utf-8")
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    root = logging.getLogger()
    root.addHandler(handler)
    try:
        return _run_pipeline(config)
    finally:
        root.removeHandler(handler)
        handler.close()


def _run_pipeline(config: RunConfig) -> int:
    tracker = PerformanceTracker()
    p = config.instance

    tracker.start_timer("checks")
    assumptions = run_all_checks(p, config.graph, config.cycle_limit)
    assumptions.timings.update({"checks": tracker.end_timer("checks")})
    _write_json(os.path.join(config.output_dir, "assumptions.json"), assumptions.to_dict())
    logger.info("\n" + assumptions.to_text())
    guaranteed = _guarantees_hold(assumptions)

    if config.command == "check":
        return EXIT_OK if guaranteed else EXIT_ASSUMPTIONS
    if not guaranteed and not config.force:
        logger.warning("Assumptions do not guarantee a unique equilibrium; rerun with --force to solve anyway")
        return EXIT_ASSUMPTIONS

    tracker.start_timer("assemble")
    dp = assemble(p, config.nodes, config.radii, config.truncation_margin)
    tracker.end_timer("assemble")

    if config.command == "verify":
        if not config.solution_path:
            raise ConfigError("verify needs --solution PATH")
        solution = load_solution(config.solution_path, dp)
        report = _certify(config, solution, tracker)
        _write_json(os.path.join(config.output_dir, "report.json"), {
            "name": p.name,
            "equilibrium": report.to_dict(),
            "pass": report.passed,
            "timings": tracker.durations(),
        })
        logger.info("\n" + report.to_text())
        if not guaranteed:
            return EXIT_ASSUMPTIONS
        return EXIT_OK if report.passed else EXIT_NOT_CERTIFIED

    tracker.start_timer("solve")
    result = solve(dp, config.solve_options)
    tracker.end_timer("solve")
    _write_csv(os.path.join(config.output_dir, "solution.csv"), solution_frame(result.weights))

    report = _certify(config, result.weights, tracker)
    _write_json(os.path.join(config.output_dir, "report.json"), {
        "name": p.name,
        "objective": result.objective,
        "gap": result.gap,
        "iterations": result.iterations,
        "converged": result.converged,
        "masses": result.masses,
        "nodes": config.nodes,
        "radii": list(dp.radii),
        "F": report.F,
        "lower_violation": report.max_lower_violation,
        "upper_violation": report.max_upper_violation,
        "boundary_mass": report.boundary_mass,
        "pass": report.passed,
        "equilibrium": report.to_dict(),
        "assumptions_guarantee": guaranteed,
        "timings": tracker.durations(),
    })
    logger.info("\n" + report.to_text())

    if not guaranteed:
        return EXIT_ASSUMPTIONS
    return EXIT_OK if report.passed else EXIT_NOT_CERTIFIED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vecequil", description="Weighted vector equilibrium solver and verifier")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser, needs_config: bool = True):
        p.add_argument("--config", required=needs_config, help="JSON problem file")
        p.add_argument("--out", help="output directory")
        p.add_argument("--nodes", help="cells per component: N or N,N,...")
        p.add_argument("--gap-tol", dest="gap_tol", type=float)
        p.add_argument("--eq-tol", dest="eq_tol", type=float)
        p.add_argument("--seed", type=int)
        p.add_argument("--force", action="store_true", help="solve even when the assumptions fail")
        p.add_argument("--overwrite", action="store_true", help="replace artifacts in a non-empty output directory")

    add_common(sub.add_parser("check", help="hypothesis report only"))
    add_common(sub.add_parser("solve", help="check, discretize, solve and certify"))
    verify_parser = sub.add_parser("verify", help="certify an existing solution.csv")
    add_common(verify_parser)
    verify_parser.add_argument("--solution", required=True, help="solution.csv from an earlier run")

    oracle = sub.add_parser("oracle", help="closed-form reference values for a named example")
    oracle.add_argument("example", help="condenser, condenser2, scalar, scalar_wide, interval, example0, example2, gaussian, circle")
    oracle.add_argument("--n", type=float)
    oracle.add_argument("--a1", type=float)
    oracle.add_argument("--a2", type=float)
    oracle.add_argument("--a", type=float)
    oracle.add_argument("--b", type=float)
    oracle.add_argument("--N", dest="N", type=float)
    oracle.add_argument("--x", type=float)
    oracle.add_argument("--out", help="also write oracle.json here")
    oracle.add_argument("--overwrite", action="store_true")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Parse arguments, configure logging and run; returns the exit status"""
    args = build_parser().parse_args(argv)
    try:
        settings = get_config()
    except ValueError as e:
        logging.basicConfig(level=logging.INFO, format=LOG_FORMAT)
        logger.error(f"Invalid environment configuration: {e}")
        return EXIT_INPUT
    logging.basicConfig(level=getattr(logging, settings.application.log_level, logging.INFO), format=LOG_FORMAT)
    settings.log_configuration_summary()

    try:
        if args.command == "oracle":
            params = {k: getattr(args, k) for k in ("n", "a1", "a2", "a", "b", "N", "x") if getattr(args, k) is not None}
            config = RunConfig(
                command="oracle",
                output_dir=args.out,
                overwrite=args.overwrite,
                oracle_name=args.example,
                oracle_params=params,
            )
        else:
            config = parse_config(args.config, args)
        return run(config)
    except KeyError as e:
        logger.error(f"Input error: {e}")
        return EXIT_INPUT
    except (VecEquilError, ValueError) as e:
        logger.error(f"Input error: {e}")
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
