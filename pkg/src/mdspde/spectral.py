"""Laplacian eigenpairs, linearized spectra and spectral-gap checks on (0, ell)."""
from __future__ import annotations

import dataclasses
import enum
from dataclasses import dataclass
from typing import TYPE_CHECKING, Callable

import numpy as np

from .specfun import inverse_M, jacobi_elliptic

if TYPE_CHECKING:
    from .model import ModelSpec


class ConfigurationError(ValueError):
    """Inconsistent or unsupported problem configuration."""


class BoundaryCondition(str, enum.Enum):
    NEUMANN = "neumann"
    PERIODIC = "periodic"
    DIRICHLET = "dirichlet"

    @classmethod
    def parse(cls, value: "str | BoundaryCondition") -> "BoundaryCondition":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ConfigurationError(f"unknown boundary condition {value!r}") from None


@dataclass(frozen=True, eq=False)
class SpectralBasis:
    """Laplacian eigenbasis up to Galerkin level N, optionally with the linearized spectrum.

    Laplacian modes are stored in nondecreasing eigenvalue order. ``wavenumbers``
    holds the integer n of each mode; for periodic conditions ``parity`` is +1/-1
    for the (cos + sin) / (cos - sin) member of each degenerate pair.

    ``lin_vectors[n]`` holds the coefficients of the n-th linearized eigenvector
    on the Laplacian modes.
    """

    bc: BoundaryCondition
    ell: float
    N: int
    lap_eigenvalues: np.ndarray
    wavenumbers: np.ndarray
    parity: np.ndarray
    lin_eigenvalues: np.ndarray | None = None
    lin_vectors: np.ndarray | None = None

    @property
    def K_lin(self) -> int:
        return 0 if self.lin_eigenvalues is None else len(self.lin_eigenvalues)

    def eigenfunctions(self, xi) -> np.ndarray:
        """Matrix of Laplacian eigenfunctions, shape (len(xi), N)."""
        xi = np.atleast_1d(np.asarray(xi, dtype=float))[:, None]
        n = self.wavenumbers[None, :]
        ell = self.ell
        if self.bc is BoundaryCondition.NEUMANN:
            out = np.sqrt(2.0 / ell) * np.cos(n * np.pi * xi / ell)
            out[:, n[0] == 0] = ell ** -0.5
        elif self.bc is BoundaryCondition.DIRICHLET:
            out = np.sqrt(2.0 / ell) * np.sin(n * np.pi * xi / ell)
        else:
            theta = 2.0 * n * np.pi * xi / ell
            out = ell ** -0.5 * (np.cos(theta) + self.parity[None, :] * np.sin(theta))
        return out

    def eigenfunction(self, j: int, xi) -> np.ndarray:
        """Evaluate e_j (0-based mode index) at ``xi``."""
        return self.eigenfunctions(xi)[:, j]

    def synthesize(self, coeffs, xi) -> np.ndarray:
        """Pointwise values of sum_j coeffs_j e_j."""
        return self.eigenfunctions(xi) @ np.asarray(coeffs, dtype=float)

    def lin_eigenvector_values(self, n: int, xi) -> np.ndarray:
        if self.lin_vectors is None:
            raise ConfigurationError("linearized spectrum not computed")
        return self.synthesize(self.lin_vectors[n], xi)


def laplacian_spectrum(bc, ell: float, N: int) -> SpectralBasis:
    """Eigenpairs of the negative Laplacian on (0, ell) for the first N modes."""
    bc = BoundaryCondition.parse(bc)
    if not ell > 0:
        raise ConfigurationError(f"domain length must be positive, got {ell!r}")
    if int(N) != N or N < 1:
        raise ConfigurationError(f"Galerkin level must be a positive integer, got {N!r}")
    N = int(N)
    parity = np.zeros(N, dtype=int)
    if bc is BoundaryCondition.NEUMANN:
        n = np.arange(N)
        a = (n * np.pi / ell) ** 2
    elif bc is BoundaryCondition.DIRICHLET:
        n = np.arange(1, N + 1)
        a = (n * np.pi / ell) ** 2
    else:
        # 0, then (+1, -1), (+2, -2), ...
        idx = np.arange(1, N)
        n = np.concatenate([[0], (idx + 1) // 2])
        parity = np.concatenate([[0], np.where(idx % 2 == 1, 1, -1)])
        a = (2.0 * n * np.pi / ell) ** 2
    return SpectralBasis(bc, float(ell), N, a.astype(float), n.astype(int), parity)


def quadrature_grid(basis: SpectralBasis, Q: int) -> tuple[np.ndarray, float]:
    """Uniform midpoint grid on (0, ell) with Q points and its weight.

    The midpoint rule integrates products of the sine/cosine modes exactly as long
    as the combined wavenumber stays below 2Q, which is what the transforms rely on.
    """
    dx = basis.ell / Q
    return (np.arange(Q) + 0.5) * dx, dx


def dirichlet_project(func: Callable, basis: SpectralBasis, Q: int | None = None):
    """Project a pointwise function on the Dirichlet sine basis.

    Returns ``(coeffs, residual)`` where ``residual`` is the grid L2 norm of
    ``func - sum_j coeffs_j e_j``.
    """
    if basis.bc is not BoundaryCondition.DIRICHLET:
        raise ConfigurationError("dirichlet_project needs a Dirichlet basis")
    if Q is None:
        Q = 16 * basis.N
    if Q < 8 * basis.N:
        raise ConfigurationError(f"quadrature needs Q >= 8N = {8 * basis.N}, got {Q}")
    xi, dx = quadrature_grid(basis, Q)
    vals = np.asarray(func(xi), dtype=float)
    E = basis.eigenfunctions(xi)
    coeffs = dx * (E.T @ vals)
    resid = vals - E @ coeffs
    return coeffs, float(np.sqrt(dx * np.sum(resid ** 2)))


def dirichlet_profile(ell: float):
    """Amplitude, elliptic parameter and spatial rate of the Dirichlet Allen-Cahn equilibrium.

    x*(xi) = a sn(b xi, m) with a = M^{-1}(ell / 2), m = a^2 / (2 - a^2), b = sqrt(1 - a^2 / 2).
    """
    if not ell > np.pi:
        raise ConfigurationError(f"Dirichlet Allen-Cahn equilibria need ell > pi, got {ell!r}")
    a = inverse_M(ell / 2.0)
    return a, a * a / (2.0 - a * a), np.sqrt(1.0 - a * a / 2.0)


def linearized_spectrum(model: "ModelSpec", basis: SpectralBasis, Q: int | None = None) -> SpectralBasis:
    """Return ``basis`` with the spectrum of -(Laplacian + DF(x*)) filled in."""
    bc = model.bc
    if bc is not basis.bc or not np.isclose(model.ell, basis.ell):
        raise ConfigurationError("model and basis disagree on boundary condition or length")
    if model.kind == "linear":
        lin = basis.lap_eigenvalues.copy()
        vecs = np.eye(basis.N)
    elif bc in (BoundaryCondition.NEUMANN, BoundaryCondition.PERIODIC):
        # Constant equilibrium: same eigenvectors, eigenvalues shifted by -f'(x*).
        shift = -model.reaction_derivative(model.sign * 1.0)
        lin = basis.lap_eigenvalues + shift
        vecs = np.eye(basis.N)
    elif model.kind == "allen_cahn":
        a, m, b = dirichlet_profile(model.ell)
        lin = np.array([1.5 * a * a, 1.5 * (2.0 - a * a)])

        def mode(which):
            def g(xi):
                t = jacobi_elliptic(b * xi, m)
                return t.sn * (t.dn if which == 1 else t.cn)
            return g

        xi, dx = quadrature_grid(basis, Q or 16 * basis.N)
        vecs = []
        for which in (1, 2):
            # Normalise the function on the quadrature grid, then project.
            norm = np.sqrt(dx * np.sum(mode(which)(xi) ** 2))
            c, _ = dirichlet_project(mode(which), basis, Q)
            vecs.append(c / norm)
        vecs = np.array(vecs)
    else:
        raise ConfigurationError(f"no linearized spectrum for {model.kind} with {bc.value} conditions")
    return dataclasses.replace(basis, lin_eigenvalues=np.asarray(lin, float), lin_vectors=np.asarray(vecs, float))


@dataclass(frozen=True)
class GapReport:
    strong: bool
    relaxed: bool
    weak_k0: int | None

    def as_dict(self) -> dict:
        return {"strong": self.strong, "relaxed": self.relaxed, "weak_k0": self.weak_k0}


def check_spectral_gap(lin_eigenvalues) -> GapReport:
    """Spectral-gap conditions on a nondecreasing linearized spectrum.

    strong: 3 a_1 < a_2; relaxed: 2 a_1 < a_2; weak_k0: smallest k0 with
    3 a_1 < a_{k0+1} (and a_1 < a_2), None if no such k0 below K_lin.
    A single-mode spectrum satisfies all three vacuously (weak_k0 = 1).
    """
    if isinstance(lin_eigenvalues, SpectralBasis):
        lin_eigenvalues = lin_eigenvalues.lin_eigenvalues
    if lin_eigenvalues is None or len(lin_eigenvalues) < 1:
        raise ConfigurationError("gap check needs a linearized spectrum")
    lam = np.asarray(lin_eigenvalues, dtype=float)
    if lam.size == 1:
        return GapReport(True, True, 1)
    a1 = lam[0]
    strong = bool(3 * a1 < lam[1])
    relaxed = bool(2 * a1 < lam[1])
    weak = None
    if a1 < lam[1]:
        hits = np.nonzero(3 * a1 < lam[1:])[0]
        if hits.size:
            weak = int(hits[0]) + 1
    return GapReport(strong, relaxed, weak)
