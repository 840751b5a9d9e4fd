"""Randomized cluster-by-cluster reactive power optimization.

Two modes are supported. In ``model`` mode each activated cluster applies
the exact minimizer of the quadratic cost over its subspace. In ``measured``
mode the grid is re-solved for the current injections and the cluster steps
using only its members' voltage phasors and local effective resistances.
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from .errors import ConfigurationError, NumericalError, ValidationError
from .grid import GreenMatrix, GridGraph
from .model import (
    ClusterSet,
    QuadraticModel,
    centralized_optimum,
    subproblem_update_exact,
    subproblem_update_measured,
    validate_rho,
)
from .powerflow import ScenarioSpec, SteadyState, solve_exact, total_losses
from .rates import hypergraph_connected

logger = logging.getLogger(__name__)

MODES = ("model", "measured")


@dataclass(frozen=True, eq=False)
class OrpfSystem:
    """Everything a simulation needs, built once and shared read-only."""

    grid: GridGraph
    green: GreenMatrix
    scenario: ScenarioSpec
    model: QuadraticModel
    clusters: ClusterSet

    @property
    def theta(self) -> float:
        return self.green.theta

    @property
    def compensator_ids(self) -> list:
        return [self.grid.node_ids[v] for v in self.model.compensators]

    def scenario_for(self, q_C: np.ndarray) -> ScenarioSpec:
        # the PCC entry of q_C is bookkeeping only; the slack absorbs it
        return self.scenario.with_reactive(self.model.compensators[1:], q_C[1:])

    def exact_state(self, q_C: np.ndarray) -> SteadyState:
        return solve_exact(self.grid, self.green, self.scenario_for(q_C))

    def exact_losses(self, q_C: np.ndarray) -> float:
        return total_losses(self.exact_state(q_C), self.grid)


@dataclass(frozen=True)
class SimulationConfig:
    mode: str = "model"
    iterations: int = 200
    seed: int = 0
    rho: tuple | None = None
    record_losses_exact: bool = False
    phasor_noise: float = 0.0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigurationError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.iterations < 0:
            raise ConfigurationError("iterations must be >= 0")
        if not self.phasor_noise >= 0:
            raise ConfigurationError("phasor_noise must be >= 0")


@dataclass
class Trace:
    """One row per iteration, t = 0 included; ``cluster[0]`` is -1."""

    compensator_ids: list
    cluster: list = field(default_factory=list)
    q: list = field(default_factory=list)
    J: list = field(default_factory=list)
    losses: list | None = None

    def append(self, r: int, q_C: np.ndarray, J: float, loss: float | None = None):
        self.cluster.append(int(r))
        self.q.append(np.array(q_C, dtype=float))
        self.J.append(float(J))
        if self.losses is not None:
            self.losses.append(float(loss))

    def __len__(self) -> int:
        return len(self.J)

    @property
    def q_array(self) -> np.ndarray:
        return np.array(self.q)


class RunAborted(NumericalError):
    """Power flow failed mid-run; ``trace`` holds the rows computed so far."""

    def __init__(self, message, trace):
        super().__init__(message)
        self.trace = trace


def select_cluster(rng: np.random.Generator, rho: Sequence[float]) -> int:
    rho = validate_rho(rho, len(rho))
    if len(rho) == 1:
        return 0
    return int(rng.choice(len(rho), p=rho))


def step(
    system: OrpfSystem,
    q_C: np.ndarray,
    r: int,
    mode: str = "model",
    state: SteadyState | None = None,
    noise: float = 0.0,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Apply one activation of cluster ``r``.

    In measured mode ``state`` may carry the steady state for ``q_C`` to
    avoid solving the power flow twice. ``noise`` adds complex Gaussian
    error with standard deviation ``noise * U_N`` to each measured phasor.
    """
    if mode == "model":
        return subproblem_update_exact(q_C, r, system.model, system.clusters)
    if mode == "measured":
        if state is None:
            state = system.exact_state(q_C)
        cl = system.clusters
        u_C = state.u[system.model.compensators]
        if noise > 0:
            if rng is None:
                raise ConfigurationError("phasor noise needs an rng")
            scale = noise * system.scenario.U_N / np.sqrt(2)
            u_C = u_C + scale * (rng.normal(size=u_C.size) + 1j * rng.normal(size=u_C.size))
        return subproblem_update_measured(
            q_C, u_C, cl.clusters[r], cl.reff[r], system.theta, cl.reff_pinv[r]
        )
    raise ConfigurationError(f"unknown mode {mode!r}")


def run(
    system: OrpfSystem,
    config: SimulationConfig,
    q0: np.ndarray | None = None,
) -> Trace:
    """Iterate ``config.iterations`` random activations and record every state."""
    rho = system.clusters.rho if config.rho is None else validate_rho(config.rho, len(system.clusters))
    if not hypergraph_connected(system.clusters.clusters, system.model.m):
        logger.warning("cluster hypergraph is disconnected; the run cannot reach the optimum")
    rng = np.random.default_rng(config.seed)
    q = system.model.initial_state() if q0 is None else np.array(q0, dtype=float)
    need_state = config.mode == "measured" or config.record_losses_exact
    trace = Trace(system.compensator_ids, losses=[] if config.record_losses_exact else None)

    def solve(qv):
        try:
            return system.exact_state(qv)
        except NumericalError as exc:
            raise RunAborted(f"power flow failed at t={len(trace)}: {exc}", trace) from exc

    state = solve(q) if need_state else None
    loss = total_losses(state, system.grid) if config.record_losses_exact else None
    trace.append(-1, q, system.model.cost(q), loss)
    for _ in range(config.iterations):
        r = select_cluster(rng, rho)
        q = step(system, q, r, config.mode, state, config.phasor_noise, rng)
        state = solve(q) if need_state else None
        loss = total_losses(state, system.grid) if config.record_losses_exact else None
        trace.append(r, q, system.model.cost(q), loss)
    return trace


def poisson_schedule(
    rates: Sequence[float], horizon: float, rng: np.random.Generator
) -> list[tuple[float, int]]:
    """Merge independent Poisson clocks, one per cluster, up to ``horizon``."""
    rates = np.asarray(rates, dtype=float)
    if rates.size == 0 or np.any(~(rates > 0)):
        raise ConfigurationError("every cluster rate must be positive")
    if horizon < 0:
        raise ValidationError("horizon must be >= 0")
    events = []
    for r, lam in enumerate(rates):
        t = rng.exponential(1.0 / lam)
        while t <= horizon:
            events.append((float(t), r))
            t += rng.exponential(1.0 / lam)
    events.sort()
    return events


def _max_threads() -> int:
    cap = os.environ.get("ORPF_THREADS")
    if cap:
        try:
            return max(1, int(cap))
        except ValueError as exc:
            raise ConfigurationError(f"ORPF_THREADS must be an integer, got {cap!r}") from exc
    return os.cpu_count() or 1


def ensemble_schedule(n_clusters: int, rho, runs: int, iterations: int, seed: int) -> np.ndarray:
    """Cluster draws for every run; run k uses its own stream (seed, k)."""
    rho = validate_rho(rho, n_clusters)
    out = np.empty((runs, iterations), dtype=np.int64)
    for k in range(runs):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(k,)))
        out[k] = rng.choice(n_clusters, size=iterations, p=rho)
    return out


def monte_carlo(
    system: OrpfSystem,
    runs: int,
    iterations: int,
    seed: int = 0,
    q0: np.ndarray | None = None,
    rho: Sequence[float] | None = None,
    threads: int | None = None,
    backend=None,
) -> np.ndarray:
    """J(q(t)) - J_opt for many independent model-mode runs, shape (runs, T+1)."""
    model, cl = system.model, system.clusters
    rho = cl.rho if rho is None else rho
    schedule = ensemble_schedule(len(cl), rho, runs, iterations, seed)
    q_init = model.initial_state() if q0 is None else np.asarray(q0, dtype=float)
    args = _kernel_args(model, cl, q_init)
    impl = kernels if backend is None else backend
    n_threads = max(1, min(threads or _max_threads(), _max_threads(), runs))
    if n_threads == 1:
        return impl.gossip_model_ensemble(*args, schedule)
    chunks = np.array_split(np.arange(runs), n_threads)
    with ThreadPoolExecutor(n_threads) as pool:
        parts = pool.map(
            lambda idx: impl.gossip_model_ensemble(*args, np.ascontiguousarray(schedule[idx])),
            chunks,
        )
        return np.vstack(list(parts))


def _kernel_args(model: QuadraticModel, cl: ClusterSet, q_init: np.ndarray):
    members = np.concatenate(cl.clusters).astype(np.int64)
    offsets = np.concatenate([[0], np.cumsum(cl.sizes)]).astype(np.int64)
    blocks = np.concatenate([P.reshape(-1) for P in cl.hess_pinv])
    block_offsets = np.concatenate([[0], np.cumsum(cl.sizes**2)]).astype(np.int64)
    return (
        np.ascontiguousarray(model.M),
        np.ascontiguousarray(model.fixed_gradient),
        np.ascontiguousarray(centralized_optimum(model)),
        np.ascontiguousarray(q_init, dtype=float),
        members,
        offsets,
        np.ascontiguousarray(blocks),
        block_offsets,
    )


def decay_slope(curve: np.ndarray, window: tuple[int, int]) -> float:
    """Least-squares slope of log(curve) over t in [start, stop)."""
    start, stop = window
    t = np.arange(start, stop)
    y = np.log(curve[start:stop])
    return float(np.polyfit(t, y, 1)[0])


def geometric_window(curve: np.ndarray, start: int = 10, floor: float = 1e-12) -> tuple[int, int]:
    """Range of t where ``curve`` still decays above round-off.

    Ends before the first t at which curve/curve[0] drops below ``floor``.
    """
    curve = np.asarray(curve, dtype=float)
    if curve.size == 0 or not curve[0] > 0:
        raise ValidationError("curve must start positive")
    below = np.nonzero(curve < floor * curve[0])[0]
    stop = int(below[0]) if below.size else curve.size
    if stop - start < 2:
        raise ValidationError(f"decay window [{start}, {stop}) is too short")
    return start, stop
