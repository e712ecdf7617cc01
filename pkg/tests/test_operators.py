import numpy as np
import pytest

from nlstring import SpatialOperators, build_fd_operators, build_modal_basis
from nlstring.errors import DimensionTooSmall, TooManyModes


def test_backward_difference_of_constant_interior_field():
    n, h = 10, 0.1
    d_minus, _, _, _ = build_fd_operators(n, h)
    du = d_minus @ np.ones(n - 1)
    assert du[0] == pytest.approx(1.0 / h)
    assert du[-1] == pytest.approx(-1.0 / h)
    assert np.all(du[1:-1] == 0.0)


@pytest.mark.parametrize("n", [3, 7, 24, 101])
def test_forward_is_exact_negated_transpose(n):
    d_minus, d_plus, _, _ = build_fd_operators(n, 1.0 / n)
    assert (d_plus + d_minus.T).toarray().max() == 0.0
    assert (d_plus + d_minus.T).toarray().min() == 0.0


def test_second_difference_structure():
    n, h = 9, 1.0 / 9
    _, _, d2, d4 = build_fd_operators(n, h)
    d2a = d2.toarray()
    assert np.allclose(np.diag(d2a), -2.0 / h ** 2)
    assert np.allclose(np.diag(d2a, 1), 1.0 / h ** 2)
    assert np.allclose(d2a, d2a.T)
    d4a = d4.toarray()
    assert np.allclose(d4a, d4a.T)
    assert np.allclose(d4a, d2a @ d2a)


def test_second_difference_sine_eigenvectors():
    # analytic eigenpairs of the second-difference matrix with pinned ends
    n, L = 40, 1.0
    h = L / n
    _, _, d2, _ = build_fd_operators(n, h)
    x = h * np.arange(1, n)
    for m in (1, 3, 11):
        vec = np.sin(m * np.pi * x / L)
        lam = -(2.0 / h * np.sin(m * np.pi * h / (2 * L))) ** 2
        assert np.allclose(d2 @ vec, lam * vec, rtol=1e-12, atol=1e-9)


def test_dimension_guard():
    with pytest.raises(DimensionTooSmall):
        build_fd_operators(2, 0.5)
    with pytest.raises(DimensionTooSmall):
        build_fd_operators(10, 0.0)


def test_single_mode_normalisation():
    basis, eig = build_modal_basis(16, 1.0 / 16, 1.0, 1)
    assert np.dot(basis[:, 0], basis[:, 0]) == pytest.approx(1.0, abs=1e-14)


@pytest.mark.parametrize("n,n_modes", [(8, 7), (24, 5), (64, 63)])
def test_modal_orthogonality(n, n_modes):
    basis, _ = build_modal_basis(n, 1.0 / n, 1.0, n_modes)
    gram = basis.T @ basis
    assert np.max(np.abs(gram - np.eye(n_modes))) <= 1e-12


def test_modal_basis_diagonalises_d2(small_ops):
    ops = small_ops
    lhs = ops.basis.T @ (ops.d2 @ ops.basis)
    assert np.max(np.abs(lhs + np.diag(ops.eigvals))) <= 1e-10


def test_too_many_modes_rejected():
    with pytest.raises(TooManyModes):
        build_modal_basis(8, 1.0 / 8, 1.0, 8)
    with pytest.raises(TooManyModes):
        build_modal_basis(8, 1.0 / 8, 1.0, 0)


def test_discrete_eigenvalues_second_order_in_h():
    # (2/h sin(nu pi h / 2L))^2 -> (nu pi / L)^2 with O(h^2) error
    L, nu = 1.0, 3
    exact = (nu * np.pi / L) ** 2
    errs = []
    for n in (32, 64):
        _, eig = build_modal_basis(n, L / n, L, nu)
        errs.append(exact - eig[nu - 1])
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.05)
    _, eig_cont = build_modal_basis(32, L / 32, L, nu, variant="continuous")
    assert eig_cont[nu - 1] == pytest.approx(exact, rel=1e-15)


def test_quadratic_form_symmetry(small_ops):
    rng = np.random.default_rng(7)
    ops = small_ops
    h = ops.h
    for _ in range(20):
        f = rng.standard_normal(ops.n - 1)
        g = rng.standard_normal(ops.n - 1)
        lhs = h * f @ (ops.d2 @ g)
        rhs = h * g @ (ops.d2 @ f)
        assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)


def test_operator_spectra_signs(small_ops):
    ops = small_ops
    eig2 = np.linalg.eigvalsh(-ops.d2.toarray())
    eig4 = np.linalg.eigvalsh(ops.d4.toarray())
    assert np.all(eig2 > 0)
    assert np.all(eig4 >= -1e-9)


def test_appliers_match_matrices(small_ops):
    rng = np.random.default_rng(3)
    ops = small_ops
    x = rng.standard_normal(ops.n - 1)
    y = rng.standard_normal(ops.n)
    assert np.allclose(ops.apply_dminus(x), ops.d_minus @ x, rtol=1e-14, atol=1e-14)
    assert np.allclose(ops.apply_dplus(y), ops.d_plus @ y, rtol=1e-14, atol=1e-14)
    assert np.allclose(ops.apply_d2(x), ops.d2 @ x, rtol=1e-12, atol=1e-12)
    assert np.allclose(ops.apply_d4(x), ops.d4 @ x, rtol=1e-12, atol=1e-9)
