"""Spectral convergence analysis of the randomized cluster iteration.

With x = q_C - q_C^opt the model-mode iteration is x(t+1) = F_r(t) x(t),
F_r = I - (Omega_r M Omega_r)^# M. This module computes the averaged matrix
F_ave, its rate bound beta, the lower bound over all clusterings, the exact
mean-square rate R on small instances, and the combinatorial checks
(hypergraph connectivity, edge-disjointness on trees) that go with them.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Sequence

import networkx as nx
import numpy as np

from .errors import InternalInconsistencyError, NotATreeError, ValidationError
from .grid import GridGraph
from .model import ClusterSet, QuadraticModel, cluster_projector, validate_rho

EXACT_R_MAX_M = 12
ANGLE_TOL = 1e-8
UNIT_TOL = 1e-9


def iteration_matrix(r: int, model: QuadraticModel, clusters: ClusterSet) -> np.ndarray:
    return np.eye(model.m) - clusters.hess_pinv_full(r) @ model.M


def iteration_matrices(model: QuadraticModel, clusters: ClusterSet) -> list[np.ndarray]:
    return [iteration_matrix(r, model, clusters) for r in range(len(clusters))]


def fixed_direction(M: np.ndarray) -> np.ndarray:
    """Unit vector x with M x in span(1): the direction every F_r leaves alone."""
    m = M.shape[0]
    A = np.hstack([M, -np.ones((m, 1))])
    _, _, Vt = np.linalg.svd(A)
    x = Vt[-1, :m]
    norm = np.linalg.norm(x)
    if norm == 0:
        raise InternalInconsistencyError("no fixed direction found")
    x = x / norm
    return x if x.sum() >= 0 else -x


def _sqrt_metric(M: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    m = M.shape[0]
    Mt = M + np.ones((m, m))
    w, V = np.linalg.eigh(0.5 * (Mt + Mt.T))
    if np.min(w) <= 0:
        raise InternalInconsistencyError("M is not positive definite on ker 1^T")
    half = (V * np.sqrt(w)) @ V.T
    half_inv = (V / np.sqrt(w)) @ V.T
    return half, half_inv


@dataclass(frozen=True)
class BetaResult:
    beta: float
    eigenvalues: np.ndarray
    F_ave: np.ndarray
    connected: bool


def beta(F_list: Sequence[np.ndarray], rho: Sequence[float], M: np.ndarray) -> BetaResult:
    """Largest |lambda| of F_ave once the fixed eigenvalue 1 is removed."""
    rho = validate_rho(rho, len(F_list))
    F_ave = sum(p * F for p, F in zip(rho, F_list))
    half, half_inv = _sqrt_metric(M)
    S = half @ F_ave @ half_inv
    w, V = np.linalg.eigh(0.5 * (S + S.T))
    near_one = np.abs(w - 1.0) < UNIT_TOL
    if near_one.sum() > 1:
        return BetaResult(1.0, w, F_ave, False)
    f = half @ fixed_direction(M)
    f /= np.linalg.norm(f)
    proj = V.T @ f
    j = int(np.argmax(np.abs(proj)))
    # sine of the angle from the residual; sqrt(1 - cos^2) loses half the digits
    if np.linalg.norm(f - proj[j] * V[:, j]) > ANGLE_TOL:
        raise InternalInconsistencyError("could not identify the unit eigenvector of F_ave")
    rest = np.delete(w, j)
    b = float(np.max(np.abs(rest))) if rest.size else 0.0
    return BetaResult(b, w, F_ave, bool(b < 1.0 - UNIT_TOL))


def rate_bound(sizes: Sequence[int], rho: Sequence[float], m: int) -> float:
    """Smallest beta any clustering with these sizes and probabilities can reach."""
    if m < 2:
        raise ValidationError("need at least two compensators")
    sizes = np.asarray(sizes, dtype=float)
    rho = np.asarray(rho, dtype=float)
    return float(1.0 - (np.dot(rho, sizes) - 1.0) / (m - 1))


def cooccurrence_matrix(clusters: Sequence[Sequence[int]], m: int) -> np.ndarray:
    """[W]_hk = number of clusters holding both h and k."""
    W = np.zeros((m, m), dtype=int)
    for c in clusters:
        idx = np.asarray(list(c), dtype=int)
        W[np.ix_(idx, idx)] += 1
    np.fill_diagonal(W, 0)
    return W


def hypergraph_connected(clusters: Sequence[Sequence[int]], m: int) -> bool:
    W = cooccurrence_matrix(clusters, m)
    g = nx.from_numpy_array(W)
    return m <= 1 or nx.is_connected(g)


def omega_span_connected(clusters: Sequence[Sequence[int]], m: int) -> bool:
    """rank [Omega_1 ... Omega_l] == m - 1, i.e. the projectors span ker 1^T."""
    if m <= 1:
        return True
    stacked = np.hstack([cluster_projector(c, m) for c in clusters])
    return int(np.linalg.matrix_rank(stacked, tol=1e-9)) == m - 1


def only_trivial_fixed_point(F_list: Sequence[np.ndarray]) -> bool:
    """True iff x = 0 is the only x in ker 1^T with F_r x = x for every r."""
    m = F_list[0].shape[0]
    stacked = np.vstack([np.eye(m) - F for F in F_list] + [np.ones((1, m))])
    scale = max(1.0, np.abs(stacked).max())
    return int(np.linalg.matrix_rank(stacked, tol=1e-9 * scale)) == m


def _require_tree(grid: GridGraph) -> nx.Graph:
    if not grid.is_tree():
        raise NotATreeError("operation needs a radial (tree) grid")
    g = nx.Graph()
    g.add_nodes_from(range(grid.n))
    for e, (s, t) in enumerate(grid.edges):
        g.add_edge(s, t, index=e)
    return g


def cluster_path_edges(grid: GridGraph, node_cluster: Sequence[int], tree=None) -> set:
    """Union of the tree-path edge sets over all pairs of the cluster's nodes."""
    g = tree if tree is not None else _require_tree(grid)
    nodes = list(node_cluster)
    edges = set()
    for a in range(len(nodes)):
        for b in range(a + 1, len(nodes)):
            path = nx.shortest_path(g, nodes[a], nodes[b])
            edges.update(g.edges[u, v]["index"] for u, v in zip(path, path[1:]))
    return edges


def edge_disjoint_check(node_clusters: Sequence[Sequence[int]], grid: GridGraph) -> bool:
    """Clusters given as grid node indices; True iff their path sets never overlap."""
    g = _require_tree(grid)
    seen = set()
    for c in node_clusters:
        P = cluster_path_edges(grid, c, g)
        if seen & P:
            return False
        seen |= P
    return True


def optimal_tree_clustering(grid: GridGraph, compensators: Sequence[int]) -> list[list[int]]:
    """Edge-disjoint, connected clustering of compensators on a radial grid.

    The tree is pruned to the smallest subtree spanning the compensators.
    Every edge between two compensators of that subtree becomes a pair; every
    connected run of non-compensator nodes becomes one cluster made of the
    compensators touching it. When all branch points are compensators this
    gives m - 1 pairs. Returned clusters hold positions into ``compensators``.
    """
    g = _require_tree(grid)
    comp = list(compensators)
    if len(comp) < 2:
        raise ValidationError("need at least two compensators")
    pos = {v: i for i, v in enumerate(comp)}
    steiner = g.copy()
    leaves = [v for v in steiner if steiner.degree(v) <= 1 and v not in pos]
    while leaves:
        steiner.remove_nodes_from(leaves)
        leaves = [v for v in steiner if steiner.degree(v) <= 1 and v not in pos]

    clusters = []
    for u, v in steiner.edges:
        if u in pos and v in pos:
            clusters.append(sorted((pos[u], pos[v])))
    inner = steiner.subgraph([v for v in steiner if v not in pos])
    for part in nx.connected_components(inner):
        touching = {w for v in part for w in steiner.neighbors(v) if w in pos}
        clusters.append(sorted(pos[w] for w in touching))
    clusters.sort()
    return clusters


def star_clustering(m: int) -> list[list[int]]:
    """Pairs {PCC, v} for every other compensator (PCC at position 0)."""
    return [[0, v] for v in range(1, m)]


def apply_L(Delta: np.ndarray, F_list: Sequence[np.ndarray], rho: Sequence[float]) -> np.ndarray:
    """One step of the second-moment recursion, E[F_r^T Delta F_r]."""
    return sum(p * F.T @ Delta @ F for p, F in zip(rho, F_list))


def lifted_operator(F_list: Sequence[np.ndarray], rho: Sequence[float]) -> np.ndarray:
    """sum_r rho_r F_r^T (x) F_r^T acting on vec(Delta)."""
    return sum(p * np.kron(F.T, F.T) for p, F in zip(rho, F_list))


def exact_rate_R(
    F_list: Sequence[np.ndarray], rho: Sequence[float], M: np.ndarray, tol: float = 1e-11
) -> float:
    """Exponential rate of E[x^T M x] for the worst x(0) in ker 1^T.

    Works on the output-relevant dynamics Delta -> Omega L(Omega Delta Omega) Omega,
    restricted to the Krylov subspace generated from Omega M Omega.
    """
    m = M.shape[0]
    if m > EXACT_R_MAX_M:
        raise ValidationError(f"exact rate needs m <= {EXACT_R_MAX_M}, got {m}")
    rho = validate_rho(rho, len(F_list))
    Om = np.eye(m) - np.full((m, m), 1.0 / m)
    P = np.kron(Om, Om)
    op = P @ lifted_operator(F_list, rho) @ P
    seed = (Om @ M @ Om).reshape(-1)
    norm = np.linalg.norm(seed)
    if norm == 0:
        return 0.0
    basis = [seed / norm]
    for _ in range(m * m):
        w = op @ basis[-1]
        for _ in range(2):
            for b in basis:
                w -= (b @ w) * b
        nw = np.linalg.norm(w)
        if nw <= tol:
            break
        basis.append(w / nw)
    V = np.array(basis).T
    H = V.T @ op @ V
    return float(np.max(np.abs(np.linalg.eigvals(H))))


@dataclass
class RateReport:
    beta: float
    bound: float
    connected: bool
    edge_disjoint: bool | None
    R_exact: float | None
    m: int
    n_clusters: int
    cluster_sizes: list
    rho: list
    F_ave_eigenvalues: list
    F_ave: list = field(repr=False)
    F_r: list = field(repr=False)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def rate_report(
    model: QuadraticModel,
    clusters: ClusterSet,
    grid: GridGraph | None = None,
) -> RateReport:
    F_list = iteration_matrices(model, clusters)
    connected = hypergraph_connected(clusters.clusters, model.m)
    if connected:
        res = beta(F_list, clusters.rho, model.M)
        b, eig, F_ave = res.beta, res.eigenvalues, res.F_ave
    else:
        F_ave = sum(p * F for p, F in zip(clusters.rho, F_list))
        b, eig = 1.0, np.sort(np.real(np.linalg.eigvals(F_ave)))
    disjoint = None
    if grid is not None and grid.is_tree():
        nodes = [[int(model.compensators[i]) for i in c] for c in clusters.clusters]
        disjoint = edge_disjoint_check(nodes, grid)
    R = None
    if model.m <= EXACT_R_MAX_M and connected:
        R = exact_rate_R(F_list, clusters.rho, model.M)
    return RateReport(
        beta=float(b),
        bound=rate_bound(clusters.sizes, clusters.rho, model.m),
        connected=bool(connected),
        edge_disjoint=disjoint,
        R_exact=R,
        m=model.m,
        n_clusters=len(clusters),
        cluster_sizes=[int(s) for s in clusters.sizes],
        rho=[float(p) for p in clusters.rho],
        F_ave_eigenvalues=[float(x) for x in np.sort(eig)],
        F_ave=np.asarray(F_ave).tolist(),
        F_r=[F.tolist() for F in F_list],
    )
