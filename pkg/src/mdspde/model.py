"""Reaction nonlinearities, stable equilibria and the spectral <-> grid transforms."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

from .spectral import (
    BoundaryCondition,
    ConfigurationError,
    SpectralBasis,
    dirichlet_profile,
    dirichlet_project,
    quadrature_grid,
)
from .specfun import jacobi_elliptic

KINDS = ("allen_cahn", "quintic", "linear")


@dataclass(frozen=True)
class ModelSpec:
    """Reaction term, boundary condition, domain length and which stable equilibrium.

    ``kind`` is ``"allen_cahn"`` (f = x - x^3), ``"quintic"``
    (f = x + mu x^3 - (mu + 1) x^5, mu in (-1, 0]) or ``"linear"`` (f = 0, the
    Ornstein-Uhlenbeck toy with equilibrium 0; ``sign`` is ignored).
    """

    kind: str = "allen_cahn"
    bc: BoundaryCondition = BoundaryCondition.NEUMANN
    ell: float = 1.0
    sign: int = 1
    mu: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "bc", BoundaryCondition.parse(self.bc))
        if self.kind not in KINDS:
            raise ConfigurationError(f"model kind must be one of {KINDS}, got {self.kind!r}")
        if self.sign not in (1, -1):
            raise ConfigurationError(f"equilibrium sign must be +1 or -1, got {self.sign!r}")
        if not self.ell > 0:
            raise ConfigurationError(f"ell must be positive, got {self.ell!r}")
        if self.kind == "quintic" and not (-1.0 < self.mu <= 0.0):
            raise ConfigurationError(f"quintic model needs mu in (-1, 0], got {self.mu!r}")
        if self.bc is BoundaryCondition.DIRICHLET:
            if self.kind == "quintic":
                raise ConfigurationError("Dirichlet conditions are not supported for the quintic model")
            if self.kind == "allen_cahn" and not self.ell > np.pi:
                raise ConfigurationError(f"Dirichlet Allen-Cahn needs ell > pi for a stable equilibrium, got {self.ell!r}")

    @property
    def p0(self) -> int:
        """Polynomial degree of the reaction term."""
        return {"allen_cahn": 3, "quintic": 5, "linear": 1}[self.kind]

    def reaction(self, x):
        if self.kind == "linear":
            return np.zeros_like(x)
        if self.kind == "allen_cahn":
            return x - x * x * x
        x2 = x * x
        return x * (1.0 + x2 * (self.mu - (self.mu + 1.0) * x2))

    def reaction_derivative(self, x):
        if self.kind == "linear":
            return np.zeros_like(x)
        if self.kind == "allen_cahn":
            return 1.0 - 3.0 * x * x
        x2 = x * x
        return 1.0 + 3.0 * self.mu * x2 - 5.0 * (self.mu + 1.0) * x2 * x2


def reaction(model: ModelSpec, x):
    return model.reaction(x)


def min_grid_size(basis: SpectralBasis, degree: int) -> int:
    """Smallest grid for which projecting f(sum c_j e_j) onto the N modes is alias-free."""
    kmax = int(basis.wavenumbers.max())
    if basis.bc is BoundaryCondition.PERIODIC:
        return (degree + 1) * kmax + 1
    return (degree + 1) * kmax // 2 + 1


class GridTransform:
    """Exact transform pair between N mode coefficients and G physical grid values.

    Neumann uses DCT-II/III on the midpoint grid, Dirichlet DST-II/III on the
    midpoint grid, periodic a real FFT on the uniform grid ``i * ell / G`` with the
    Hartley-type (cos +/- sin) basis. Normalisation makes the discrete inner
    product reproduce the L2 inner product exactly for band-limited data.
    Works on arrays of shape (..., N) / (..., G); holds no mutable state.
    """

    def __init__(self, basis: SpectralBasis, G: int):
        N = basis.N
        if G < 2 * N + 1:
            raise ConfigurationError(f"grid size {G} below the aliasing guard 2N+1 = {2 * N + 1}")
        self.basis = basis
        self.N = N
        self.G = int(G)
        ell = basis.ell
        self.dx = ell / G
        if basis.bc is BoundaryCondition.PERIODIC:
            self.grid = np.arange(G) * self.dx
            self._n = basis.wavenumbers
            self._par = basis.parity
            self._plus = np.nonzero(self._par == 1)[0]
            self._minus = np.nonzero(self._par == -1)[0]
        else:
            self.grid = (np.arange(G) + 0.5) * self.dx
            scale = np.full(N, np.sqrt(2.0 / ell))
            if basis.bc is BoundaryCondition.NEUMANN:
                scale[0] = ell ** -0.5
            self._scale = scale

    def to_grid(self, coeffs: np.ndarray) -> np.ndarray:
        coeffs = np.asarray(coeffs, dtype=float)
        lead = coeffs.shape[:-1]
        N, G = self.N, self.G
        bc = self.basis.bc
        if bc is BoundaryCondition.NEUMANN:
            pad = np.zeros(lead + (G,))
            pad[..., :N] = coeffs * self._scale
            pad[..., 1:N] *= 0.5
            return sfft.dct(pad, type=3, axis=-1)
        if bc is BoundaryCondition.DIRICHLET:
            pad = np.zeros(lead + (G,))
            pad[..., :N] = 0.5 * coeffs * self._scale
            return sfft.dst(pad, type=3, axis=-1)
        spec = np.zeros(lead + (G // 2 + 1,), dtype=complex)
        c = 0.5 * G * self.basis.ell ** -0.5
        spec[..., 0] = 2.0 * c * coeffs[..., 0]
        # (cos + sin) member -> (1 - i), (cos - sin) member -> (1 + i); each wavenumber once per parity
        spec[..., self._n[self._plus]] += c * (1 - 1j) * coeffs[..., self._plus]
        spec[..., self._n[self._minus]] += c * (1 + 1j) * coeffs[..., self._minus]
        return sfft.irfft(spec, n=G, axis=-1)

    def from_grid(self, values: np.ndarray) -> np.ndarray:
        values = np.asarray(values, dtype=float)
        N, G = self.N, self.G
        bc = self.basis.bc
        if bc is BoundaryCondition.NEUMANN:
            y = sfft.dct(values, type=2, axis=-1)[..., :N]
            return 0.5 * self.dx * y * self._scale
        if bc is BoundaryCondition.DIRICHLET:
            y = sfft.dst(values, type=2, axis=-1)[..., :N]
            return 0.5 * self.dx * y * self._scale
        X = sfft.rfft(values, axis=-1)
        c = self.basis.ell ** -0.5
        Xn = X[..., self._n]
        out = c * self.dx * (Xn.real - self._par * Xn.imag)
        return out


def default_grid_size(model: ModelSpec, basis: SpectralBasis) -> int:
    """Alias-free grid size for the model's polynomial degree, rounded up to a fast FFT length."""
    g = max(2 * basis.N + 1, min_grid_size(basis, model.p0))
    return sfft.next_fast_len(g, real=True)


def nonlinearity_in_modes(model: ModelSpec, basis: SpectralBasis, state_coeffs, transform: GridTransform | None = None):
    """Coefficients <P_N F(sum_j state_j e_j), e_k> via grid evaluation of the reaction term."""
    state_coeffs = np.asarray(state_coeffs, dtype=float)
    if state_coeffs.shape[-1] != basis.N:
        raise ConfigurationError(f"state has {state_coeffs.shape[-1]} modes, basis has {basis.N}")
    if transform is None:
        transform = GridTransform(basis, default_grid_size(model, basis))
    return transform.from_grid(model.reaction(transform.to_grid(state_coeffs)))


def equilibrium_values(model: ModelSpec, xi) -> np.ndarray:
    """Pointwise values of the stable equilibrium x*."""
    xi = np.asarray(xi, dtype=float)
    if model.kind == "linear":
        return np.zeros_like(xi)
    if model.bc is BoundaryCondition.DIRICHLET:
        a, m, b = dirichlet_profile(model.ell)
        return model.sign * a * jacobi_elliptic(b * xi, m).sn
    return np.full_like(xi, float(model.sign))


@dataclass(frozen=True)
class Equilibrium:
    coeffs: np.ndarray
    grid: np.ndarray
    values: np.ndarray
    projection_residual: float

    @property
    def l2_norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))


def equilibrium(model: ModelSpec, basis: SpectralBasis, Q: int | None = None) -> Equilibrium:
    """Stable equilibrium as Galerkin coefficients plus its values on a quadrature grid."""
    if model.bc is not basis.bc or not np.isclose(model.ell, basis.ell):
        raise ConfigurationError("model and basis disagree on boundary condition or length")
    if model.kind == "linear":
        xi, _ = quadrature_grid(basis, Q or 16 * basis.N)
        return Equilibrium(np.zeros(basis.N), xi, np.zeros_like(xi), 0.0)
    if model.bc is BoundaryCondition.DIRICHLET:
        coeffs, resid = dirichlet_project(lambda x: equilibrium_values(model, x), basis, Q)
        xi, _ = quadrature_grid(basis, Q or 16 * basis.N)
        return Equilibrium(coeffs, xi, equilibrium_values(model, xi), resid)
    coeffs = np.zeros(basis.N)
    # constant mode e_0 = ell^{-1/2}, so x* = +/-1 has coefficient +/- sqrt(ell)
    coeffs[0] = model.sign * np.sqrt(basis.ell)
    xi, _ = quadrature_grid(basis, Q or 16 * basis.N)
    return Equilibrium(coeffs, xi, equilibrium_values(model, xi), 0.0)
