import numpy as np
import pytest

from orpf import kernels
from orpf.errors import ConvergenceError, ValidationError
from orpf.grid import build_grid, green_matrix
from orpf.powerflow import (
    ScenarioSpec,
    approx_state,
    approximation_error,
    solve_exact,
    total_losses,
)

from conftest import Z1, Z2
from oracles import newton_power_flow

TOL = 1e-10


def circuit_residuals(grid, st):
    A = grid.incidence
    kcl = np.linalg.norm(A.T @ st.xi + st.i)
    kvl = np.linalg.norm(A @ st.u + grid.z * st.xi)
    return kcl, kvl


def test_zero_load_is_flat(path3):
    grid, green = path3
    sc = ScenarioSpec(230.0, np.zeros(3), np.zeros(3), phi=0.3)
    st = solve_exact(grid, green, sc)
    np.testing.assert_allclose(st.u, 230 * np.exp(0.3j))
    assert st.iterations == 1
    assert np.all(st.i == 0) and np.all(st.xi == 0)
    ap = approx_state(grid, green, sc)
    np.testing.assert_allclose(ap.u, st.u)
    assert total_losses(st, grid) == 0


def test_three_node_exact_against_newton(path3, path3_scenario):
    grid, green = path3
    st = solve_exact(grid, green, path3_scenario)
    ref = newton_power_flow([(0, 1, Z1), (1, 2, Z2)], path3_scenario.s, path3_scenario.eta, 230.0)
    np.testing.assert_allclose(st.u, ref, rtol=0, atol=1e-8 * 230)
    assert abs(st.u[1]) < 230
    assert abs(st.u[2]) <= abs(st.u[1]) + 1e-12


@pytest.mark.parametrize("eta", [0.0, 1.0, 2.0, 0.7])
@pytest.mark.parametrize("phi", [0.0, -0.4])
def test_small_networks_against_newton(eta, phi):
    rng = np.random.default_rng(int(10 * eta + 100 * abs(phi)))
    for n, edges in [
        (2, [(0, 1, 0.3 + 0.1j)]),
        (3, [(0, 1, 0.2 + 0.1j), (0, 2, 0.1 + 0.1j), (1, 2, 0.4 + 0.2j)]),
        (3, [(0, 1, Z1), (1, 2, Z2)]),
    ]:
        grid = build_grid(range(n), edges)
        green = green_matrix(grid)
        s = np.concatenate([[0], -rng.uniform(500, 3000, n - 1) - 1j * rng.uniform(0, 1500, n - 1)])
        s[-1] = abs(s[-1].real) / 3  # a generator
        e = np.full(n, eta)
        sc = ScenarioSpec(230.0, s, e, phi)
        st = solve_exact(grid, green, sc)
        ref = newton_power_flow(edges, s, e, 230.0, phi)
        np.testing.assert_allclose(st.u, ref, rtol=0, atol=1e-8 * 230)


def test_divergence_far_outside_regime(path3):
    grid, green = path3
    sc = ScenarioSpec(230.0, np.array([0, -1e9, 0]), np.zeros(3))
    with pytest.raises(ConvergenceError) as info:
        solve_exact(grid, green, sc)
    assert info.value.iterations is not None


def test_first_order_hand_values(path3, path3_scenario):
    grid, green = path3
    ap = approx_state(grid, green, path3_scenario)
    assert ap.i[1] == pytest.approx(-4.3478261 + 2.1739130j, abs=1e-6)
    assert ap.u[1] == pytest.approx(230 - 125 / 230, abs=1e-9)
    assert abs(ap.i.sum()) < 1e-12
    assert total_losses(ap, grid) == pytest.approx((1118.034 / 230) ** 2 * 0.1, rel=1e-5)


def test_invariants_on_testbed(testbed):
    st = solve_exact(testbed.grid, testbed.green, testbed.scenario)
    scale = np.linalg.norm(st.i)
    assert abs(st.i.sum()) <= 10 * TOL * scale
    kcl, kvl = circuit_residuals(testbed.grid, st)
    assert kcl <= 10 * TOL * scale
    assert kvl <= 10 * TOL * np.linalg.norm(st.u)
    injected = np.sum((st.u * np.conj(st.i)).real)
    assert injected == pytest.approx(total_losses(st, testbed.grid), rel=1e-6)
    quad = float(np.real(np.conj(st.i) @ testbed.green.X.real @ st.i))
    assert quad == pytest.approx(total_losses(st, testbed.grid), rel=1e-9)


def test_total_load_near_2MW_1MVAR(testbed):
    s = testbed.scenario.s
    assert -s.real.sum() == pytest.approx(2e6, rel=0.05)
    assert -s.imag.sum() == pytest.approx(1e6, rel=0.05)
    assert set(np.unique(testbed.scenario.eta[s != 0])) == {0.0, 1.0, 2.0}


def test_approximation_report(testbed):
    rep = approximation_error(testbed.grid, testbed.green, testbed.scenario, [1, 2, 4])
    assert rep.max_rel_error[0] < 1e-3
    assert rep.max_rel_error[0] > rep.max_rel_error[1] > rep.max_rel_error[2]
    # the remainder shrinks at least like 1/U_N^2
    assert rep.decay_exponent >= 2 - 0.3
    r = rep.residual
    assert r[0] / r[1] >= 4 / 2


def test_approximation_zero_load(path3):
    grid, green = path3
    sc = ScenarioSpec(400.0, np.zeros(3), np.zeros(3))
    rep = approximation_error(grid, green, sc, [1, 2])
    assert rep.max_rel_error == (0.0, 0.0)
    assert rep.residual == (0.0, 0.0)
    assert np.isnan(rep.decay_exponent)


def test_scenario_validation():
    with pytest.raises(ValidationError):
        ScenarioSpec(0.0, np.zeros(2), np.zeros(2))
    with pytest.raises(ValidationError):
        ScenarioSpec(230.0, np.zeros(2), np.array([0, 3.0]))
    with pytest.raises(ValidationError):
        ScenarioSpec(230.0, np.zeros(2), np.zeros(3))
    sc = ScenarioSpec(230.0, np.array([5 + 5j, -1]), np.zeros(2))
    assert sc.s[0] == 0
    assert sc.s_balanced[0] == 1


@pytest.mark.parametrize("name", sorted(kernels.backends()))
def test_backends_agree_on_power_flow(name, testbed):
    mod = kernels.backends()[name]
    sc = testbed.scenario
    u, it, status, _ = mod.zbus_fixed_point(
        testbed.green.X, sc.s, sc.eta, complex(sc.U_N), sc.U_N, 1e-12, 200
    )
    ref = solve_exact(testbed.grid, testbed.green, sc, tol=1e-12).u
    assert status == kernels.OK
    np.testing.assert_allclose(u, ref, rtol=1e-12)
