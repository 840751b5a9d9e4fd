"""Exact and first-order steady state of the microgrid."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import kernels
from .errors import ConvergenceError, ValidationError, ZeroVoltageError
from .grid import GreenMatrix, GridGraph

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 200


@dataclass(frozen=True, eq=False)
class ScenarioSpec:
    """Operating point: nominal voltage, PCC phase and per-node nominal powers.

    ``s`` and ``eta`` are indexed like the grid nodes; the PCC entry of ``s``
    is ignored (its power is whatever balances the others).
    """

    U_N: float
    s: np.ndarray
    eta: np.ndarray
    phi: float = 0.0

    def __post_init__(self):
        s = np.asarray(self.s, dtype=complex)
        eta = np.asarray(self.eta, dtype=float)
        if s.shape != eta.shape or s.ndim != 1:
            raise ValidationError("s and eta must be 1-D arrays of equal length")
        if not self.U_N > 0:
            raise ValidationError(f"U_N must be positive, got {self.U_N}")
        if np.any((eta[1:] < 0) | (eta[1:] > 2)):
            raise ValidationError("load exponents must lie in [0, 2]")
        s = s.copy()
        s[0] = 0.0
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "eta", eta)

    @property
    def s_balanced(self) -> np.ndarray:
        """Nominal powers with the PCC entry set to minus the sum of the rest."""
        s = self.s.copy()
        s[0] = -s[1:].sum()
        return s

    def with_voltage(self, U_N: float) -> "ScenarioSpec":
        return replace(self, U_N=U_N)

    def with_reactive(self, nodes: Sequence[int], q: Sequence[float]) -> "ScenarioSpec":
        s = self.s.copy()
        idx = np.asarray(nodes, dtype=int)
        s[idx] = s[idx].real + 1j * np.asarray(q, dtype=float)
        return replace(self, s=s)


@dataclass(frozen=True, eq=False)
class SteadyState:
    u: np.ndarray
    i: np.ndarray
    xi: np.ndarray
    converged: bool = True
    iterations: int = 0
    residual: float = 0.0
    meta: dict = field(default_factory=dict, repr=False)


def _edge_currents(grid: GridGraph, u: np.ndarray) -> np.ndarray:
    return -(grid.incidence @ u) / grid.z


def solve_exact(
    grid: GridGraph,
    green: GreenMatrix,
    scenario: ScenarioSpec,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> SteadyState:
    """Z-bus fixed point on u = X i(u) + U_N e^{j phi} 1 from a flat start.

    Raises ConvergenceError when the relative change in u is still above
    ``tol`` after ``max_iter`` sweeps, and ZeroVoltageError when a loaded node
    collapses to zero volts.
    """
    if not tol > 0:
        raise ValidationError("tol must be positive")
    if len(scenario.s) != grid.n:
        raise ValidationError(f"scenario has {len(scenario.s)} nodes, grid has {grid.n}")
    u_pcc = scenario.U_N * np.exp(1j * scenario.phi)
    u, iterations, status, change = kernels.zbus_fixed_point(
        np.ascontiguousarray(green.X),
        np.ascontiguousarray(scenario.s),
        np.ascontiguousarray(scenario.eta),
        complex(u_pcc),
        float(scenario.U_N),
        float(tol),
        int(max_iter),
    )
    u = np.asarray(u)
    if status == kernels.ZERO_VOLTAGE:
        raise ZeroVoltageError(f"zero voltage at a loaded node after {iterations} iterations")
    if status in (kernels.NOT_CONVERGED, kernels.DIVERGED):
        how = "diverged" if status == kernels.DIVERGED else "did not converge"
        raise ConvergenceError(
            f"power flow {how} after {iterations} iterations "
            f"(relative change {change:.3g}); load is outside the regular regime",
            iterations=iterations,
            residual=change,
        )
    i = np.zeros(grid.n, dtype=complex)
    load = slice(1, None)
    with np.errstate(divide="ignore", invalid="ignore"):
        i[load] = np.conj(scenario.s[load] * (np.abs(u[load]) / scenario.U_N) ** scenario.eta[load] / u[load])
    i[load][scenario.s[load] == 0] = 0.0
    i[0] = -i[1:].sum()
    return SteadyState(u, i, _edge_currents(grid, u), True, int(iterations), float(change))


def approx_state(grid: GridGraph, green: GreenMatrix, scenario: ScenarioSpec) -> SteadyState:
    """First-order expansion in 1/U_N of the steady state."""
    rot = np.exp(1j * scenario.phi)
    i = rot * np.conj(scenario.s_balanced) / scenario.U_N
    u = green.X @ i + scenario.U_N * rot
    return SteadyState(u, i, _edge_currents(grid, u), True, 0, 0.0)


def total_losses(state: SteadyState, grid: GridGraph) -> float:
    """Active power dissipated on the lines, sum |xi_e|^2 Re(z_e), in watts."""
    return float(np.sum(np.abs(state.xi) ** 2 * grid.z.real))


@dataclass(frozen=True)
class ApproximationReport:
    factors: tuple
    voltages: tuple
    max_rel_error: tuple
    residual: tuple
    decay_exponent: float
    u_exact: np.ndarray = field(repr=False)
    u_approx: np.ndarray = field(repr=False)


def approximation_error(
    grid: GridGraph,
    green: GreenMatrix,
    scenario: ScenarioSpec,
    scale_factors: Sequence[float] = (1.0,),
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> ApproximationReport:
    """Compare exact and first-order voltages while scaling U_N by each factor.

    ``residual`` is ||u_exact - u_first_order||_2 and ``decay_exponent`` is
    minus the log-log slope of the residual against the factor (2 for a
    remainder of order 1/U_N^2). The exponent is NaN when fewer than two
    factors give a nonzero residual.
    """
    if not scale_factors:
        raise ValidationError("need at least one scale factor")
    errs, res, volts = [], [], []
    u_ex0 = u_ap0 = None
    for k in scale_factors:
        sc = scenario.with_voltage(scenario.U_N * k)
        ex = solve_exact(grid, green, sc, tol=tol, max_iter=max_iter)
        ap = approx_state(grid, green, sc)
        mag = np.abs(ex.u)
        errs.append(float(np.max(np.abs(mag - np.abs(ap.u)) / mag)))
        res.append(float(np.linalg.norm(ex.u - ap.u)))
        volts.append(sc.U_N)
        if u_ex0 is None:
            u_ex0, u_ap0 = ex.u, ap.u
    k = np.asarray(scale_factors, dtype=float)
    r = np.asarray(res)
    good = r > 0
    if good.sum() >= 2:
        slope = np.polyfit(np.log(k[good]), np.log(r[good]), 1)[0]
        exponent = float(-slope)
    else:
        exponent = float("nan")
    return ApproximationReport(
        tuple(float(x) for x in scale_factors), tuple(volts), tuple(errs), tuple(res),
        exponent, u_ex0, u_ap0,
    )
