import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.linalg import eigh_tridiagonal

from mdspde.model import ModelSpec, equilibrium_values
from mdspde.specfun import quarter_period_M
from mdspde.spectral import (
    BoundaryCondition,
    ConfigurationError,
    check_spectral_gap,
    dirichlet_profile,
    laplacian_spectrum,
    linearized_spectrum,
)


def test_neumann_eigenvalues():
    b = laplacian_spectrum("neumann", 2.0, 5)
    np.testing.assert_allclose(b.lap_eigenvalues, (np.arange(5) * np.pi / 2.0) ** 2)


def test_dirichlet_eigenvalues():
    b = laplacian_spectrum("dirichlet", 3.0, 4)
    np.testing.assert_allclose(b.lap_eigenvalues, (np.arange(1, 5) * np.pi / 3.0) ** 2)


def test_periodic_pairs_are_degenerate():
    b = laplacian_spectrum("periodic", 1.0, 7)
    a = b.lap_eigenvalues
    assert a[0] == 0
    np.testing.assert_allclose(a[1::2], a[2::2])
    assert list(b.parity) == [0, 1, -1, 1, -1, 1, -1]
    assert np.all(np.diff(a) >= 0)


@pytest.mark.parametrize("bc", ["neumann", "dirichlet", "periodic"])
def test_eigenfunctions_orthonormal(bc):
    b = laplacian_spectrum(bc, 1.7, 9)
    gram = np.empty((9, 9))
    for i in range(9):
        for j in range(i, 9):
            val = quad(lambda x: b.eigenfunction(i, x)[0] * b.eigenfunction(j, x)[0], 0, 1.7, limit=200)[0]
            gram[i, j] = gram[j, i] = val
    np.testing.assert_allclose(gram, np.eye(9), atol=1e-10)


@pytest.mark.parametrize("bc", ["neumann", "dirichlet", "periodic"])
def test_eigenfunctions_solve_eigenproblem(bc):
    b = laplacian_spectrum(bc, 1.3, 6)
    x = np.linspace(0.1, 1.2, 7)
    d = 1e-4
    for j in range(6):
        lap = (b.eigenfunction(j, x + d) - 2 * b.eigenfunction(j, x) + b.eigenfunction(j, x - d)) / d ** 2
        np.testing.assert_allclose(-lap, b.lap_eigenvalues[j] * b.eigenfunction(j, x), atol=2e-4 * (1 + b.lap_eigenvalues[j]))


def test_bad_inputs():
    with pytest.raises(ConfigurationError):
        laplacian_spectrum("robin", 1.0, 3)
    with pytest.raises(ConfigurationError):
        laplacian_spectrum("neumann", -1.0, 3)
    with pytest.raises(ConfigurationError):
        laplacian_spectrum("neumann", 1.0, 0)
    assert BoundaryCondition.parse("NEUMANN") is BoundaryCondition.NEUMANN


def test_neumann_linearized_shift():
    model = ModelSpec()
    b = linearized_spectrum(model, laplacian_spectrum("neumann", 1.0, 4))
    np.testing.assert_allclose(b.lin_eigenvalues, 2.0 + (np.arange(4) * np.pi) ** 2)
    np.testing.assert_allclose(b.lin_vectors, np.eye(4))


def test_quintic_linearized_shift():
    model = ModelSpec(kind="quintic", mu=-0.5)
    b = linearized_spectrum(model, laplacian_spectrum("neumann", 1.0, 3))
    # f'(1) = 1 + 3 mu - 5 (mu + 1)
    assert b.lin_eigenvalues[0] == pytest.approx(-(1 - 1.5 - 2.5))


def _fd_linearized(ell, n=4000):
    # independent oracle: second-order finite differences of -(d^2/dx^2 + 1 - 3 x*^2) with zero ends
    model = ModelSpec(bc="dirichlet", ell=ell)
    dx = ell / n
    x = np.arange(1, n) * dx
    xs = equilibrium_values(model, x)
    diag = 2.0 / dx ** 2 - (1.0 - 3.0 * xs ** 2)
    off = np.full(n - 2, -1.0 / dx ** 2)
    return eigh_tridiagonal(diag, off, select="i", select_range=(0, 1))[0]


def test_dirichlet_linearized_against_finite_differences():
    ell = 3.81828
    b = linearized_spectrum(ModelSpec(bc="dirichlet", ell=ell), laplacian_spectrum("dirichlet", ell, 30))
    np.testing.assert_allclose(b.lin_eigenvalues, _fd_linearized(ell), rtol=1e-5)


def test_dirichlet_profile_amplitude():
    a, m, beta = dirichlet_profile(3.81828)
    assert a == pytest.approx(0.65, abs=1e-3)
    assert m == pytest.approx(a * a / (2 - a * a))
    assert beta == pytest.approx(math.sqrt(1 - a * a / 2))


def test_dirichlet_eigenvectors_unit_norm():
    ell = 4.5
    b = linearized_spectrum(ModelSpec(bc="dirichlet", ell=ell), laplacian_spectrum("dirichlet", ell, 40))
    np.testing.assert_allclose(np.linalg.norm(b.lin_vectors, axis=1), 1.0, atol=1e-6)
    assert abs(b.lin_vectors[0] @ b.lin_vectors[1]) < 1e-6


def test_linear_kind_spectrum_is_laplacian():
    b0 = laplacian_spectrum("dirichlet", math.pi, 3)
    b = linearized_spectrum(ModelSpec(kind="linear", bc="dirichlet", ell=math.pi), b0)
    np.testing.assert_allclose(b.lin_eigenvalues, [1, 4, 9])


def test_model_basis_mismatch():
    with pytest.raises(ConfigurationError):
        linearized_spectrum(ModelSpec(), laplacian_spectrum("periodic", 1.0, 3))


@pytest.mark.parametrize(
    "lam, expected",
    [
        ([2.0, 7.0, 10.0], (True, True, 1)),
        ([2.0, 5.0, 7.0], (False, True, 2)),
        ([2.0, 3.0, 7.0], (False, False, 2)),
        ([2.0, 3.0, 5.0, 6.5], (False, False, 3)),
        ([2.0, 3.0, 5.0], (False, False, None)),
        ([2.0, 2.0, 9.0], (False, False, None)),
        ([2.0], (True, True, 1)),
    ],
)
def test_gap_check(lam, expected):
    r = check_spectral_gap(lam)
    assert (r.strong, r.relaxed, r.weak_k0) == expected


def test_gap_check_needs_spectrum():
    with pytest.raises(ConfigurationError):
        check_spectral_gap(laplacian_spectrum("neumann", 1.0, 3))


def test_reference_spectra():
    np.testing.assert_allclose(laplacian_spectrum("neumann", 1.0, 3).lap_eigenvalues, [0, np.pi ** 2, 4 * np.pi ** 2])
    np.testing.assert_allclose(laplacian_spectrum("dirichlet", np.pi, 2).lap_eigenvalues, [1, 4])


def test_gap_reference_models():
    assert check_spectral_gap(linearized_spectrum(ModelSpec(), laplacian_spectrum("neumann", 1.0, 5))).strong
    b = linearized_spectrum(ModelSpec(ell=np.pi), laplacian_spectrum("neumann", np.pi, 5))
    np.testing.assert_allclose(b.lin_eigenvalues[:2], [2, 3])
    r = check_spectral_gap(b)
    assert not r.strong and not r.relaxed


def test_dirichlet_project_unit_vector():
    from mdspde.spectral import dirichlet_project

    b = laplacian_spectrum("dirichlet", 3.81828, 8)
    c, resid = dirichlet_project(lambda x: b.eigenfunction(3, x), b)
    np.testing.assert_allclose(c, np.eye(8)[3], atol=1e-8)
    assert resid < 1e-8
    with pytest.raises(ConfigurationError):
        dirichlet_project(lambda x: x, b, Q=20)
    with pytest.raises(ConfigurationError):
        dirichlet_project(lambda x: x, laplacian_spectrum("neumann", 1.0, 3))


def test_dirichlet_first_eigenfunction_projection_norm():
    ell = 3.81828
    b = linearized_spectrum(ModelSpec(bc="dirichlet", ell=ell), laplacian_spectrum("dirichlet", ell, 50))
    assert np.linalg.norm(b.lin_vectors[0]) == pytest.approx(1.0, abs=1e-6)
    # mpmath root of 2 M(a) = 3.81828 gives a = 0.649999356565727, a_1 = 1.5 a^2
    assert b.lin_eigenvalues[0] == pytest.approx(0.6337487453037887, abs=1e-12)
    ell = 2 * quarter_period_M(0.65)
    b = linearized_spectrum(ModelSpec(bc="dirichlet", ell=ell), laplacian_spectrum("dirichlet", ell, 10))
    assert b.lin_eigenvalues[0] == pytest.approx(1.5 * 0.65 ** 2, abs=1e-12)
