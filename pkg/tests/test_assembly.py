import math

import numpy as np
import pytest

from heatlq.assembly import assemble, dump_operators, initial_state, project_initial_profile
from heatlq.spectral import GridFunction, build_basis, eval_phi, rho_coeffs, rho_eval


@pytest.fixture(scope="module")
def ops(base_spec):
    return assemble(base_spec, build_basis(3))


def test_dimensions(ops):
    assert ops.dim == 6 and ops.d == 1 and ops.n_modes == 4
    for name in ("Atot", "Ctot", "Qmat", "Gmat"):
        assert getattr(ops, name).shape == (6, 6)


def test_drift_blocks(ops):
    A = ops.Atot
    assert A[0, 0] == 2.0
    assert A[1, 1] == 1.5
    assert A[3, 3] == pytest.approx(0.5 - math.pi**2)
    assert A[3, 3] == pytest.approx(-9.3696, abs=1e-4)
    assert A[2, 2] == 0.5
    b = build_basis(3)
    # coupling through the boundary trace u(t,0) = z(t,0) + rho(0) U
    assert A[0, 1] == pytest.approx(2.0 * rho_eval(0.5, 1.5, 0.0))
    assert np.allclose(A[0, 2:], 2.0 * b.norm_coeffs)


def test_zero_pattern(ops):
    A, C = ops.Atot, ops.Ctot
    assert np.all(A[1, [0, 2, 3, 4, 5]] == 0)
    assert np.all(A[2:, :2] == 0)
    z = A[2:, 2:]
    assert np.array_equal(z, np.diag(np.diag(z)))
    assert np.all(C[1:, :] == 0)
    assert C[0, 0] == 1.0
    assert np.allclose(C[0, 1:] / A[0, 1:], 0.25)


def test_noise_rank_one(ops):
    assert np.linalg.matrix_rank(ops.Ctot) == 1


def test_weights(ops):
    assert np.allclose(np.linalg.eigvalsh(ops.Qmat), sorted([10, 1, 0, 0, 0, 0]))
    assert np.linalg.eigvalsh(ops.Gmat).min() >= 0
    assert ops.Qmat[1, 1] == 1.0 and ops.Gmat[0, 0] == 10.0
    assert ops.delta == 0.5


def test_input_and_initial(ops):
    assert np.array_equal(ops.Bvec, ops.Lrho)
    assert ops.Bvec[1] == 1.0 and ops.Bvec[0] == 0.0
    assert np.allclose(ops.Bvec[2:], -rho_coeffs(build_basis(3), 0.5, 1.5).coeffs)
    assert np.allclose(ops.M0, [1, 0, 1, 0, 0, 0])
    Z = initial_state(ops, 2.0)
    assert np.allclose(Z, ops.M0 + 2.0 * ops.Lrho)
    assert Z[1] == 2.0


def test_arrays_read_only(ops):
    with pytest.raises(ValueError):
        ops.Atot[0, 0] = 1.0


def test_tabulated_profile_projects():
    b = build_basis(4)
    xs = np.linspace(0, 1, 2001)
    g = GridFunction(xs, 3.0 + 0.5 * eval_phi(b, 2, xs))
    assert np.allclose(project_initial_profile(b, g), [3, 0, 0.5, 0, 0], atol=1e-4)
    assert np.array_equal(project_initial_profile(b, 1.7), [1.7, 0, 0, 0, 0])


def test_basis_mismatch(base_spec):
    with pytest.raises(ValueError):
        assemble(base_spec, build_basis(5))


def test_dump_operators(ops, tmp_path):
    files = dump_operators(ops, tmp_path)
    assert len(files) == 7
    back = np.loadtxt(tmp_path / "Atot.csv", delimiter=",")
    assert np.array_equal(back, ops.Atot)
