"""
Directed multigraph models of interaction matrices
Incidence matrices generate C = A^t A; cycle structure and the
intersection graph of the sets translate the problem hypotheses
into graph properties
"""

import logging
from dataclasses import dataclass, field
from typing import FrozenSet, List, Sequence, Tuple

import networkx as nx
import numpy as np
from networkx.utils import UnionFind

from model import ConstructionError, InteractionMatrix, IntervalUnion, factorize, set_distance

logger = logging.getLogger(__name__)

DEFAULT_CYCLE_LIMIT = 1024
# Cycle space dimension above which subset combination is not attempted
MAX_CYCLE_RANK = 16


@dataclass(frozen=True)
class DirectedMultigraph:
    """Vertices 0..n-1 and ordered edges (tail, head); edge i is column i of A"""
    n_vertices: int
    edges: Tuple[Tuple[int, int], ...]

    def __post_init__(self):
        edges = tuple((int(u), int(v)) for u, v in self.edges)
        if self.n_vertices < 2:
            raise ConstructionError("A multigraph needs at least two vertices")
        if not edges:
            raise ConstructionError("A multigraph needs at least one edge")
        for i, (u, v) in enumerate(edges):
            if not (0 <= u < self.n_vertices and 0 <= v < self.n_vertices):
                raise ConstructionError(f"Edge {i + 1} ({u}, {v}) references a missing vertex")
            if u == v:
                raise ConstructionError(f"Edge {i + 1} is a self-loop at vertex {u}")
        object.__setattr__(self, "edges", edges)

    @classmethod
    def from_one_indexed(cls, n_vertices: int, pairs: Sequence[Sequence[int]]) -> "DirectedMultigraph":
        return cls(n_vertices, tuple((u - 1, v - 1) for u, v in pairs))

    @property
    def d(self) -> int:
        return len(self.edges)

    def to_multidigraph(self) -> nx.MultiDiGraph:
        G = nx.MultiDiGraph()
        G.add_nodes_from(range(self.n_vertices))
        for i, (u, v) in enumerate(self.edges):
            G.add_edge(u, v, key=i)
        return G

    def to_multigraph(self) -> nx.MultiGraph:
        G = nx.MultiGraph()
        G.add_nodes_from(range(self.n_vertices))
        for i, (u, v) in enumerate(self.edges):
            G.add_edge(u, v, key=i)
        return G

    def edge_subgraph(self, edge_ids) -> "DirectedMultigraph":
        return DirectedMultigraph(self.n_vertices, tuple(self.edges[i] for i in sorted(edge_ids)))


@dataclass
class CycleEnumeration:
    """Undirected cycles as edge-index sets, with a truncation flag"""
    cycles: List[FrozenSet[int]] = field(default_factory=list)
    overflow: bool = False


def incidence_matrix(g: DirectedMultigraph) -> np.ndarray:
    """n x d incidence matrix: -1 at the tail row, +1 at the head row of each edge column"""
    A = np.zeros((g.n_vertices, g.d))
    for i, (u, v) in enumerate(g.edges):
        A[u, i] = -1.0
        A[v, i] = 1.0
    return A


def interaction_from_graph(g: DirectedMultigraph, tol_psd: float = 1e-10) -> InteractionMatrix:
    """Interaction matrix C = A^t A of the graph's incidence matrix"""
    A = incidence_matrix(g)
    return factorize(A.T @ A, tol_psd=tol_psd)


def has_undirected_cycle(g: DirectedMultigraph) -> bool:
    """More edges than a spanning forest can hold (parallel edges count)"""
    components = nx.number_connected_components(g.to_multigraph())
    return g.d > g.n_vertices - components


def has_directed_cycle(g: DirectedMultigraph) -> bool:
    return not nx.is_directed_acyclic_graph(g.to_multidigraph())


def _fundamental_cycles(g: DirectedMultigraph) -> List[FrozenSet[int]]:
    forest = nx.Graph()
    forest.add_nodes_from(range(g.n_vertices))
    components = UnionFind(range(g.n_vertices))
    chords = []
    for i, (u, v) in enumerate(g.edges):
        if components[u] != components[v]:
            components.union(u, v)
            forest.add_edge(u, v, edge_id=i)
        else:
            chords.append(i)

    basis = []
    for i in chords:
        u, v = g.edges[i]
        path = nx.shortest_path(forest, u, v)
        tree_edges = {forest[p][q]["edge_id"] for p, q in zip(path[:-1], path[1:])}
        basis.append(frozenset(tree_edges | {i}))
    return basis


def _is_simple_cycle(g: DirectedMultigraph, edge_ids: FrozenSet[int]) -> bool:
    sub = nx.MultiGraph()
    for i in edge_ids:
        sub.add_edge(*g.edges[i], key=i)
    return all(deg == 2 for _, deg in sub.degree()) and nx.is_connected(sub)


def undirected_cycles_edge_sets(g: DirectedMultigraph, limit: int = DEFAULT_CYCLE_LIMIT) -> CycleEnumeration:
    """
    All simple undirected cycles of the multigraph, as edge-index sets

    Cycles are generated as symmetric differences of fundamental cycles
    and kept when they form a connected 2-regular subgraph.

    Args:
        g: the multigraph
        limit: maximal number of cycles returned

    Returns:
        CycleEnumeration sorted by (size, edge ids); overflow set when truncated
    """
    basis = _fundamental_cycles(g)
    result = CycleEnumeration()
    if not basis:
        return result

    if len(basis) > MAX_CYCLE_RANK:
        logger.warning(f"Cycle space of dimension {len(basis)} too large to enumerate; returning the fundamental basis")
        result.cycles = sorted(basis, key=lambda c: (len(c), sorted(c)))[:limit]
        result.overflow = True
        return result

    found = set()
    for mask in range(1, 1 << len(basis)):
        combined: FrozenSet[int] = frozenset()
        for k, cycle in enumerate(basis):
            if mask >> k & 1:
                combined = combined ^ cycle
        if combined and combined not in found and _is_simple_cycle(g, combined):
            found.add(combined)
            if len(found) >= limit:
                result.overflow = mask < (1 << len(basis)) - 1
                break

    result.cycles = sorted(found, key=lambda c: (len(c), sorted(c)))
    return result


def intersection_graph(sets: Sequence[IntervalUnion]) -> nx.Graph:
    """Undirected graph on component indices with an edge where the sets are at distance 0"""
    G = nx.Graph()
    G.add_nodes_from(range(len(sets)))
    for i in range(len(sets)):
        for j in range(i + 1, len(sets)):
            if set_distance(sets[i], sets[j]) == 0.0:
                G.add_edge(i, j)
    return G


def _shared_vertex_pairs(g: DirectedMultigraph, sets: Sequence[IntervalUnion], consecutive_only: bool):
    pairs = []
    for i in range(g.d):
        for j in range(i + 1, g.d):
            (ti, hi), (tj, hj) = g.edges[i], g.edges[j]
            if consecutive_only:
                related = hi == tj or hj == ti
            else:
                related = bool({ti, hi} & {tj, hj})
            if related and set_distance(sets[i], sets[j]) == 0.0:
                pairs.append((i, j))
    return pairs


def check_compatNS_graph(g: DirectedMultigraph, sets: Sequence[IntervalUnion]) -> List[Tuple[int, int]]:
    """Edge pairs that follow each other and carry intersecting sets (empty list = condition holds)"""
    return _shared_vertex_pairs(g, sets, consecutive_only=True)


def check_cij0_graph(g: DirectedMultigraph, sets: Sequence[IntervalUnion]) -> List[Tuple[int, int]]:
    """Distinct edges with intersecting sets that share a vertex (empty list = condition holds)"""
    return _shared_vertex_pairs(g, sets, consecutive_only=False)


def check_H2_graph(g: DirectedMultigraph, sets: Sequence[IntervalUnion]) -> bool:
    """Every connected component of the intersection graph spans a subgraph without directed cycle"""
    for component in nx.connected_components(intersection_graph(sets)):
        if has_directed_cycle(g.edge_subgraph(component)):
            logger.info(f"Intersection component {sorted(i + 1 for i in component)} contains a directed cycle")
            return False
    return True
