import math

import numpy as np
import pytest
from scipy.linalg import expm

from heatlq import BlowupError, DomainError
from heatlq.closedloop import (
    full_batch,
    full_plant_setup,
    path_increments,
    path_rng,
    reconstruct_u,
    simulate_full,
    simulate_spectral,
    spectral_batch,
    time_grid,
    zero_schedule,
)
from heatlq.riccati import gains_on
from heatlq.spectral import GridFunction, build_basis, h1_inner
from heatlq.validation import em_order, scalar_sde_ops


def test_time_grid():
    assert len(time_grid(1.0, 1e-3)) == 1001
    with pytest.raises(DomainError):
        time_grid(1.0, 0.3)


def test_increments_depend_only_on_path_index():
    a = path_increments(5, [0, 1, 2, 3], 50, 0.01)
    b = path_increments(5, [2, 3], 50, 0.01)
    assert np.array_equal(a[2:], b)
    assert not np.array_equal(a[0], a[1])
    assert np.array_equal(path_rng(5, 3).standard_normal(50) * 0.1, a[3])


def test_deterministic_limit_is_explicit_euler(base_sol):
    ops, sched = base_sol.ops, base_sol.sched
    dt = 1e-3
    times = time_grid(1.0, dt)
    K = gains_on(sched, times)
    Z = np.array(base_sol.Z0)
    for i in range(len(times) - 1):
        V = -(K[i] @ Z)
        Z = Z + dt * (ops.Atot @ Z + ops.Bvec * V)
    path = simulate_spectral(ops, sched, base_sol.Z0, dt, dW=np.zeros(1000), backend="python")
    assert np.allclose(path.Z[-1], Z, rtol=1e-12, atol=1e-12)


def test_ode_limit_converges_first_order():
    A = np.array([[-1.0, 0.5], [0.2, -3.0]])
    from heatlq.assembly import AugmentedOperators

    ops = AugmentedOperators(dim=2, d=1, Atot=A, Ctot=np.zeros((2, 2)), Bvec=np.zeros(2),
                             Qmat=np.zeros((2, 2)), Gmat=np.zeros((2, 2)), Lrho=np.zeros(2),
                             M0=np.zeros(2), delta=1.0)
    z0 = np.array([1.0, -2.0])
    exact = expm(A) @ z0
    errs = []
    for dt in (1e-3, 1e-4):
        p = simulate_spectral(ops, zero_schedule(2, 1.0), z0, dt, dW=np.zeros(round(1 / dt)))
        errs.append(np.abs(p.Z[-1] - exact).max())
    assert 8.0 < errs[0] / errs[1] < 12.0


def test_em_strong_order():
    assert 0.4 <= em_order(paths=1000, seed=20250101) <= 0.6


def test_path_outputs(base_sol):
    p = simulate_spectral(base_sol.ops, base_sol.sched, base_sol.Z0, 1e-3,
                          rng=path_rng(1, 0))
    assert p.Z.shape == (1001, 6) and p.X.shape == (1001, 1) and p.z_coeffs.shape == (1001, 4)
    assert p.U[0] == pytest.approx(base_sol.u0)
    assert np.array_equal(p.Z[0], base_sol.Z0)
    assert abs(p.V[0]) < 1e-9 * abs(base_sol.u0)
    assert p.terminal_cost == pytest.approx(10.0 * p.X[-1, 0] ** 2)


def test_cost_additivity(base_sol):
    p = simulate_spectral(base_sol.ops, base_sol.sched, base_sol.Z0, 1e-3,
                          rng=path_rng(3, 0))
    whole = p.running_cost_between(0, 1000)
    assert whole == pytest.approx(p.running_cost, rel=1e-12)
    for k in (1, 337, 999):
        split = p.running_cost_between(0, k) + p.running_cost_between(k, 1000)
        assert split == pytest.approx(whole, rel=1e-12)


def test_batch_matches_single_paths(base_sol):
    o, s = base_sol.ops, base_sol.sched
    ZT, run, term = spectral_batch(o, s, base_sol.Z0, 1e-3, 11, [4, 9])
    for row, idx in enumerate([4, 9]):
        p = simulate_spectral(o, s, base_sol.Z0, 1e-3, rng=path_rng(11, idx))
        assert np.array_equal(p.Z[-1], ZT[row])
        assert p.running_cost == run[row] and p.terminal_cost == term[row]


def test_batch_invariance(base_sol):
    o, s = base_sol.ops, base_sol.sched
    a = spectral_batch(o, s, base_sol.Z0, 1e-3, 11, list(range(8)))
    b = spectral_batch(o, s, base_sol.Z0, 1e-3, 11, list(range(3, 6)))
    for x, y in zip(a, b):
        assert np.array_equal(x[3:6], y)


def test_reproducible(base_sol):
    o, s = base_sol.ops, base_sol.sched
    a = spectral_batch(o, s, base_sol.Z0, 1e-3, 99, [0, 1, 2])
    b = spectral_batch(o, s, base_sol.Z0, 1e-3, 99, [0, 1, 2])
    assert all(np.array_equal(x, y) for x, y in zip(a, b))


def test_spectral_blowup():
    ops = scalar_sde_ops(30.0, 0.0)
    with pytest.raises(BlowupError) as info:
        spectral_batch(ops, zero_schedule(1, 1.0), [1.0], 1e-3, 0, [0, 1])
    assert info.value.path_index == 0


def test_reconstruct_u(base_spec, base_sol):
    p = simulate_spectral(base_sol.ops, base_sol.sched, base_sol.Z0, 1e-3,
                          rng=path_rng(0, 0))
    xs = np.linspace(0, 1, 2001)
    fields = reconstruct_u(base_sol.basis, p, 0.5, 1.5, xs)
    assert len(fields) == 1001
    # at t = 0, u = P_N(u0 - rho U0) + rho U0 with u0 = 1, so u - 1 = (I - P_N)(rho U0)
    f0 = fields[0]
    resid = GridFunction(xs, f0.values - 1.0)
    # residual lies outside the first N+1 modes
    from heatlq.spectral import project
    assert np.abs(project(base_sol.basis, resid).coeffs).max() < 1e-5
    # Neumann flux at x = 1 carries the control up to the truncated cosine modes
    slope = (f0.values[-1] - f0.values[-2]) / (xs[1] - xs[0])
    assert slope == pytest.approx(p.U[0], rel=0.01)


def test_reconstruct_u_zero_control():
    from heatlq.closedloop import PathResult

    b = build_basis(2)
    Z = np.array([[0.0, 0.0, 2.0, 0.0, 0.0]])
    p = PathResult(times=np.zeros(1), Z=Z, V=np.zeros(1), integrand=np.zeros(1),
                   running_cost=0.0, terminal_cost=0.0, d=1)
    f = reconstruct_u(b, p, 0.0, 1.0, np.linspace(0, 1, 5))[0]
    assert np.allclose(f.values, 2.0)


# -- full plant -----------------------------------------------------------------


def heat_spec(base_spec, u0, T=0.1, m=128):
    return base_spec.replace(pde__c=0.0, pde__u0=u0, cost__T=T, disc__fd_grid_points=m,
                              control__mu=1.0, control__u0_mode="fixed",
                              control__u0_value=0.0, sde__A=[[0.0]], sde__C=[[0.0]])


def test_full_plant_constant_steady(base_spec):
    spec = heat_spec(base_spec, 1.0)
    basis = build_basis(3)
    st = simulate_full(spec, zero_schedule(6, 0.1), basis, 0.0, dW=np.zeros(100))
    assert np.allclose(st.u.values, 1.0, atol=1e-12)
    assert st.U == 0.0


def test_full_plant_cosine_decay(base_spec):
    xs = np.linspace(0, 1, 1001)
    spec = heat_spec(base_spec, GridFunction(xs, np.cos(np.pi * xs)))
    st = simulate_full(spec, zero_schedule(6, 0.1), build_basis(3), 0.0, dW=np.zeros(100))
    grid = st.u.xs
    expected = math.exp(-math.pi**2 * 0.1) * np.cos(np.pi * grid)
    assert np.abs(st.u.values - expected).max() < 0.01 * math.exp(-math.pi**2 * 0.1)


def test_full_plant_energy_nonincreasing(base_spec):
    xs = np.linspace(0, 1, 1001)
    rough = np.sign(np.sin(7 * np.pi * xs)) + xs**2
    spec = heat_spec(base_spec, GridFunction(xs, rough)).replace(pde__c=-0.5)
    st = simulate_full(spec, zero_schedule(6, 0.1), build_basis(3), 0.0, dW=np.zeros(100))
    grid = st.u.xs
    w = np.full(len(grid), grid[1] - grid[0])
    w[[0, -1]] *= 0.5
    energy = (st.u_path ** 2) @ w
    assert np.all(np.diff(energy) <= 1e-12)


def test_full_plant_matches_spectral_in_small_noise(base_spec):
    spec = base_spec.replace(disc__N=8, sde__C=[[0.0]], sde__D=[[0.0]])
    from heatlq.riccati import solve_spec

    sol = solve_spec(spec)
    full = simulate_full(spec, sol.sched, sol.basis, sol.u0, dW=np.zeros(1000))
    spec_path = simulate_spectral(sol.ops, sol.sched, sol.Z0, 1e-3, dW=np.zeros(1000))
    assert full.X[0] == pytest.approx(spec_path.X[-1, 0], rel=0.05, abs=0.05)
    assert full.cost == pytest.approx(spec_path.running_cost + spec_path.terminal_cost, rel=0.05)


def test_full_batch_matches_single(base_spec, base_sol):
    setup = full_plant_setup(base_spec, base_sol.basis)
    XT, UT, run, term = full_batch(base_spec, base_sol.sched, base_sol.basis, base_sol.u0,
                                   3, [5], setup=setup)
    st = simulate_full(base_spec, base_sol.sched, base_sol.basis, base_sol.u0,
                       rng=path_rng(3, 5), setup=setup)
    assert np.array_equal(XT[0], st.X) and UT[0] == st.U
    assert run[0] == st.running_cost and term[0] == st.terminal_cost


def test_full_plant_blowup(base_spec):
    spec = base_spec.replace(sde__A=[[40.0]], control__u0_mode="fixed")
    with pytest.raises(BlowupError):
        full_batch(spec, zero_schedule(6, 1.0), build_basis(3), 0.0, 0, [0])
