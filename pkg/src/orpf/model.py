"""Quadratic reactive-power model and per-cluster update laws.

The decision vector ``q_C`` holds the reactive power of the compensators in
the order given by ``QuadraticModel.compensators`` (PCC included). Cluster
members are positions into that vector, not grid node indices.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigurationError, InternalInconsistencyError, ValidationError
from .grid import GreenMatrix, effective_resistance_matrix

PINV_RTOL = 1e-12


def sym_pinv(A: np.ndarray, rtol: float = PINV_RTOL) -> np.ndarray:
    """Moore-Penrose pseudoinverse of a symmetric matrix via eigendecomposition."""
    A = 0.5 * (A + A.T)
    if A.size == 0:
        return A.copy()
    w, V = np.linalg.eigh(A)
    cutoff = rtol * max(np.max(np.abs(w)), 0.0)
    keep = np.abs(w) > cutoff if cutoff > 0 else np.zeros_like(w, dtype=bool)
    inv = np.zeros_like(w)
    inv[keep] = 1.0 / w[keep]
    P = (V * inv) @ V.T
    return 0.5 * (P + P.T)


def centering(c: int) -> np.ndarray:
    """c x c projector onto the zero-sum subspace."""
    return np.eye(c) - np.full((c, c), 1.0 / c)


@dataclass(frozen=True, eq=False)
class QuadraticModel:
    compensators: np.ndarray
    uncontrolled: np.ndarray
    M: np.ndarray
    N_block: np.ndarray
    q_fixed: np.ndarray
    X_real: np.ndarray = field(repr=False)

    @property
    def m(self) -> int:
        return len(self.compensators)

    @property
    def fixed_gradient(self) -> np.ndarray:
        """N q_fixed, the part of the gradient that never changes."""
        return self.N_block @ self.q_fixed

    def full_q(self, q_C: np.ndarray) -> np.ndarray:
        q = np.zeros(self.X_real.shape[0])
        q[self.compensators] = q_C
        q[self.uncontrolled] = self.q_fixed
        return q

    def cost(self, q_C: np.ndarray) -> float:
        q = self.full_q(q_C)
        return float(0.5 * q @ self.X_real @ q)

    def initial_state(self, q_init: Sequence[float] | None = None) -> np.ndarray:
        """Feasible start: given compensator values (default zero), PCC as slack.

        The PCC must be the first compensator.
        """
        q = np.zeros(self.m) if q_init is None else np.array(q_init, dtype=float)
        q[0] = 0.0
        q[0] = -(q.sum() + self.q_fixed.sum())
        return q


def quadratic_model(
    green: GreenMatrix,
    compensators: Sequence[int],
    q_fixed: Sequence[float],
) -> QuadraticModel:
    """Split Re(X) into the compensator block M and the coupling block N.

    The PCC is moved to the front of the compensator order; the others keep
    the order given.
    """
    n = green.X.shape[0]
    C = np.asarray(list(compensators), dtype=int)
    if len(set(C.tolist())) != len(C):
        raise ValidationError("compensator list has duplicates")
    if np.any((C < 0) | (C >= n)):
        raise ValidationError("compensator index out of range")
    if 0 not in C:
        raise ValidationError("the PCC (node 0) must be a compensator")
    C = np.concatenate([[0], C[C != 0]])
    rest = np.array([v for v in range(n) if v not in set(C.tolist())], dtype=int)
    q_fixed = np.asarray(q_fixed, dtype=float)
    if q_fixed.shape != rest.shape:
        raise ValidationError(
            f"q_fixed has {q_fixed.size} entries but {rest.size} nodes are uncontrolled"
        )
    Xr = green.X.real
    M = Xr[np.ix_(C, C)]
    M = 0.5 * (M + M.T)
    N = Xr[np.ix_(C, rest)]
    return QuadraticModel(C, rest, M, N, q_fixed, Xr)


def centralized_optimum(model: QuadraticModel) -> np.ndarray:
    """Minimize J over q_C subject to 1^T q = 0 through the KKT system."""
    m = model.m
    K = np.zeros((m + 1, m + 1))
    K[:m, :m] = model.M
    K[:m, m] = 1.0
    K[m, :m] = 1.0
    rhs = np.concatenate([-model.fixed_gradient, [-model.q_fixed.sum()]])
    try:
        sol = np.linalg.solve(K, rhs)
    except np.linalg.LinAlgError as exc:
        raise InternalInconsistencyError("singular KKT system") from exc
    res = np.linalg.norm(K @ sol - rhs) / max(1.0, np.linalg.norm(rhs))
    if res > 1e-10:
        raise InternalInconsistencyError(f"KKT residual {res:.2e}")
    return sol[:m]


def gradient(model: QuadraticModel, q_C: np.ndarray) -> np.ndarray:
    return model.M @ q_C + model.fixed_gradient


def cluster_projector(members: Sequence[int], m: int) -> np.ndarray:
    idx = np.asarray(list(members), dtype=int)
    if idx.size == 0:
        raise ValidationError("empty cluster")
    Om = np.zeros((m, m))
    Om[np.ix_(idx, idx)] = centering(idx.size)
    return Om


def hessian_from_reff(R_eff: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Cluster Hessian -1/2 Omega R_eff Omega and its pseudoinverse.

    Works in cluster-local coordinates: ``R_eff`` is |C_r| x |C_r|.
    """
    R = np.asarray(R_eff, dtype=float)
    if R.ndim != 2 or R.shape[0] != R.shape[1]:
        raise ValidationError("R_eff must be square")
    if not np.allclose(R, R.T, rtol=1e-10, atol=1e-14 * max(1.0, np.abs(R).max(initial=0))):
        raise ValidationError("R_eff is not symmetric")
    if np.any(np.diag(R) < 0):
        raise ValidationError("R_eff has a negative diagonal entry")
    Om = centering(R.shape[0])
    H = -0.5 * Om @ R @ Om
    H = 0.5 * (H + H.T)
    return H, sym_pinv(H)


def measurement_functional(u_C: np.ndarray, members: Sequence[int], theta: float) -> np.ndarray:
    """Per-cluster voltage functional whose scaled value tracks the gradient.

    [K]_k = mean_v |u_v||u_k| sin(angle u_v - angle u_k + theta) for k in the
    cluster, zero elsewhere.
    """
    u_C = np.asarray(u_C, dtype=complex)
    idx = np.asarray(list(members), dtype=int)
    ur = u_C[idx]
    # Im(e^{j theta} u_v conj(u_k)) averaged over v
    K_r = np.imag(np.exp(1j * theta) * ur.mean() * np.conj(ur))
    K = np.zeros(len(u_C))
    K[idx] = K_r
    return K


@dataclass(frozen=True, eq=False)
class ClusterSet:
    """Clusters of compensator positions with selection probabilities.

    ``hess_pinv[r]`` is (Omega_r M Omega_r)^# and ``reff_pinv[r]`` is
    (Omega_r R_eff Omega_r)^#, both restricted to the members of cluster r.
    """

    clusters: tuple
    rho: np.ndarray
    m: int
    reff: tuple = field(repr=False)
    hess: tuple = field(repr=False)
    hess_pinv: tuple = field(repr=False)
    reff_pinv: tuple = field(repr=False)

    def __len__(self) -> int:
        return len(self.clusters)

    @property
    def sizes(self) -> np.ndarray:
        return np.array([len(c) for c in self.clusters])

    def projector(self, r: int) -> np.ndarray:
        return cluster_projector(self.clusters[r], self.m)

    def hess_pinv_full(self, r: int) -> np.ndarray:
        idx = self.clusters[r]
        P = np.zeros((self.m, self.m))
        P[np.ix_(idx, idx)] = self.hess_pinv[r]
        return P


def validate_rho(rho: Sequence[float], n_clusters: int) -> np.ndarray:
    rho = np.asarray(rho, dtype=float)
    if rho.shape != (n_clusters,):
        raise ConfigurationError(f"need {n_clusters} probabilities, got {rho.size}")
    if np.any(~np.isfinite(rho)) or np.any(rho <= 0):
        raise ConfigurationError("every cluster probability must be strictly positive")
    if abs(rho.sum() - 1.0) > 1e-12:
        raise ConfigurationError(f"probabilities sum to {rho.sum():.15g}, not 1")
    return rho


def build_clusters(
    model: QuadraticModel,
    green: GreenMatrix,
    clusters: Sequence[Sequence[int]],
    rho: Sequence[float] | None = None,
) -> ClusterSet:
    """Offline step: gather R_eff per cluster and precompute the pseudoinverses."""
    m = model.m
    cl = []
    for r, members in enumerate(clusters):
        idx = np.asarray(list(members), dtype=int)
        if idx.size == 0:
            raise ConfigurationError(f"cluster {r} is empty")
        if len(set(idx.tolist())) != idx.size:
            raise ConfigurationError(f"cluster {r} repeats a member")
        if np.any((idx < 0) | (idx >= m)):
            raise ConfigurationError(f"cluster {r} references a non-compensator")
        cl.append(idx)
    covered = set(np.concatenate(cl).tolist()) if cl else set()
    if covered != set(range(m)):
        missing = sorted(set(range(m)) - covered)
        raise ConfigurationError(f"clusters do not cover compensators {missing}")
    if rho is None:
        rho = np.full(len(cl), 1.0 / len(cl))
    rho = validate_rho(rho, len(cl))

    R_all = effective_resistance_matrix(green, model.compensators)
    reff, hess, hpinv, rpinv = [], [], [], []
    for idx in cl:
        R = R_all[np.ix_(idx, idx)]
        H, Hp = hessian_from_reff(R)
        Om = centering(idx.size)
        reff.append(R)
        hess.append(H)
        hpinv.append(Hp)
        rpinv.append(sym_pinv(Om @ R @ Om))
    return ClusterSet(tuple(cl), rho, m, tuple(reff), tuple(hess), tuple(hpinv), tuple(rpinv))


def _centered(step: np.ndarray) -> np.ndarray:
    return step - step.mean()


def subproblem_update_exact(
    q_C: np.ndarray, r: int, model: QuadraticModel, clusters: ClusterSet
) -> np.ndarray:
    """Minimize J over the cluster's zero-sum subspace, others held fixed."""
    idx = clusters.clusters[r]
    grad = model.M[idx] @ q_C + model.fixed_gradient[idx]
    q_new = np.array(q_C, dtype=float)
    q_new[idx] -= _centered(clusters.hess_pinv[r] @ grad)
    return q_new


def subproblem_update_measured(
    q_C: np.ndarray,
    u_C: np.ndarray,
    members: Sequence[int],
    R_eff: np.ndarray,
    theta: float,
    reff_pinv: np.ndarray | None = None,
) -> np.ndarray:
    """Same step driven by measured voltages and local effective resistances.

    ``R_eff`` is the cluster-local block; ``reff_pinv`` may carry the
    precomputed (Omega R_eff Omega)^# from the offline procedure.
    """
    idx = np.asarray(list(members), dtype=int)
    if reff_pinv is None:
        Om = centering(idx.size)
        reff_pinv = sym_pinv(Om @ np.asarray(R_eff, dtype=float) @ Om)
    K = measurement_functional(u_C, idx, theta)[idx]
    q_new = np.array(q_C, dtype=float)
    q_new[idx] += _centered(2.0 * np.cos(theta) * (reff_pinv @ K))
    return q_new
