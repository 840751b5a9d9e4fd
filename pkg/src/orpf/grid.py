"""Electrical graph, Green-like matrix and effective impedances."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Sequence

import networkx as nx
import numpy as np
import scipy.linalg

from .errors import (
    DanglingEdgeError,
    DisconnectedGridError,
    DuplicateNodeError,
    InternalInconsistencyError,
    MissingPCCError,
    ValidationError,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class GridGraph:
    """Directed graph of power lines with the PCC frozen at index 0.

    ``edges`` holds ``(source_index, terminal_index)`` pairs in input order and
    ``z`` the matching complex impedances in ohms.
    """

    node_ids: tuple
    edges: tuple
    z: np.ndarray
    index: dict = field(repr=False)

    @property
    def n(self) -> int:
        return len(self.node_ids)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def pcc(self):
        return self.node_ids[0]

    @property
    def incidence(self) -> np.ndarray:
        """|E| x n matrix, -1 at the source node and +1 at the terminal node."""
        A = np.zeros((self.n_edges, self.n))
        for e, (s, t) in enumerate(self.edges):
            A[e, s] = -1.0
            A[e, t] = 1.0
        return A

    @property
    def laplacian(self) -> np.ndarray:
        A = self.incidence
        return A.T @ np.diag(1.0 / self.z) @ A

    def to_networkx(self) -> nx.MultiGraph:
        g = nx.MultiGraph()
        g.add_nodes_from(range(self.n))
        for e, (s, t) in enumerate(self.edges):
            g.add_edge(s, t, key=e, z=self.z[e])
        return g

    def is_tree(self) -> bool:
        return self.n_edges == self.n - 1 and nx.is_connected(self.to_networkx())

    def tree_path_edges(self, h: int, k: int) -> list[int]:
        """Edge indices on the unique path between node indices ``h`` and ``k``."""
        if not self.is_tree():
            raise ValidationError("tree paths are only defined on radial grids")
        g = self.to_networkx()
        nodes = nx.shortest_path(g, h, k)
        return [next(iter(g.get_edge_data(a, b))) for a, b in zip(nodes, nodes[1:])]


def build_grid(
    nodes: Sequence[Hashable],
    edges: Iterable[tuple],
    pcc: Hashable | None = None,
) -> GridGraph:
    """Validate nodes and edges and freeze the node ordering.

    ``edges`` is an iterable of ``(from_id, to_id, impedance)``. When ``pcc`` is
    omitted the first listed node is taken as the PCC. The PCC is moved to
    index 0, the other nodes keep their input order.
    """
    nodes = list(nodes)
    seen = set()
    for v in nodes:
        if v in seen:
            raise DuplicateNodeError(f"duplicate node id {v!r}")
        seen.add(v)
    if not nodes:
        raise MissingPCCError("grid has no nodes")
    if pcc is None:
        pcc = nodes[0]
    if pcc not in seen:
        raise MissingPCCError(f"PCC {pcc!r} is not among the nodes")

    order = [pcc] + [v for v in nodes if v != pcc]
    index = {v: i for i, v in enumerate(order)}

    pairs = []
    z = []
    for e, (a, b, ze) in enumerate(edges):
        for end in (a, b):
            if end not in index:
                raise DanglingEdgeError(f"edge {e} references unknown node {end!r}")
        if a == b:
            raise ValidationError(f"edge {e} is a self-loop on {a!r}")
        ze = complex(ze)
        if not ze.real > 0 or ze.imag < 0:
            raise ValidationError(
                f"edge {e} ({a!r}->{b!r}) needs Re(z) > 0 and Im(z) >= 0, got {ze}"
            )
        pairs.append((index[a], index[b]))
        z.append(ze)

    grid = GridGraph(tuple(order), tuple(pairs), np.asarray(z, dtype=complex), index)
    if grid.n > 1 and not nx.is_connected(grid.to_networkx()):
        parts = list(nx.connected_components(grid.to_networkx()))
        raise DisconnectedGridError(f"grid has {len(parts)} connected components")
    return grid


@dataclass(frozen=True, eq=False)
class GreenMatrix:
    X: np.ndarray
    theta: float
    residual: float = 0.0

    @property
    def X_real(self) -> np.ndarray:
        return self.X.real


def green_matrix(grid: GridGraph) -> GreenMatrix:
    """Solve the bordered system [[L, 1_0], [1_0^T, 0]]^-1 = [[X, 1], [1^T, 0]]."""
    n = grid.n
    B = np.zeros((n + 1, n + 1), dtype=complex)
    B[:n, :n] = grid.laplacian
    B[0, n] = B[n, 0] = 1.0
    try:
        lu = scipy.linalg.lu_factor(B, check_finite=True)
    except (ValueError, np.linalg.LinAlgError) as exc:
        raise InternalInconsistencyError(str(exc)) from exc
    if np.min(np.abs(np.diag(lu[0]))) < 1e-14 * np.max(np.abs(np.diag(lu[0]))):
        raise InternalInconsistencyError("bordered Laplacian system is singular")
    inv = scipy.linalg.lu_solve(lu, np.eye(n + 1, dtype=complex))
    X = inv[:n, :n]
    X = 0.5 * (X + X.T)
    X[0, :] = 0.0
    X[:, 0] = 0.0

    target = np.eye(n) - np.outer(np.ones(n), np.eye(n)[0])
    residual = np.linalg.norm(X @ grid.laplacian - target) / np.sqrt(n)
    theta = uniform_angle(grid).theta if grid.n_edges else 0.0
    return GreenMatrix(X, theta, float(residual))


def effective_impedance(green: GreenMatrix, v: int, w: int) -> complex:
    n = green.X.shape[0]
    for a in (v, w):
        if not 0 <= a < n:
            raise IndexError(f"node index {a} out of range for {n} nodes")
    X = green.X
    return complex(X[v, v] + X[w, w] - X[v, w] - X[w, v])


def effective_resistance_matrix(green: GreenMatrix, nodes: Sequence[int]) -> np.ndarray:
    """Re(Z_eff) between every pair of the given node indices."""
    idx = np.asarray(nodes, dtype=int)
    Xr = green.X.real[np.ix_(idx, idx)]
    d = np.diag(Xr)
    return d[:, None] + d[None, :] - Xr - Xr.T


@dataclass(frozen=True)
class AngleReport:
    theta: float
    spread: float
    flagged: bool


def uniform_angle(grid: GridGraph, tolerance: float = np.inf) -> AngleReport:
    """|z|-weighted mean impedance angle; ``spread`` is the largest deviation."""
    if np.any(grid.z == 0):
        raise ValidationError("zero-impedance edge")
    angles = np.angle(grid.z)
    w = np.abs(grid.z)
    theta = float(np.sum(w * angles) / np.sum(w))
    spread = float(np.max(np.abs(angles - theta)))
    flagged = spread > tolerance
    if flagged:
        logger.warning("impedance angle spread %.3f rad exceeds %.3f", spread, tolerance)
    return AngleReport(theta, spread, flagged)
