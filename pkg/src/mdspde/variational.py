"""Closed forms of the limiting variational problem for the linearized dynamics.

Everything here works on the linearized spectrum a_1 <= a_2 <= ... (an array, or
a :class:`SpectralBasis` carrying one) and on coefficient vectors in the
linearized eigenbasis. Mode indices in results are 1-based.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .spectral import SpectralBasis


class DomainError(ValueError):
    """Argument outside the domain where the closed form holds."""


def _spectrum(spectrum) -> np.ndarray:
    if isinstance(spectrum, SpectralBasis):
        spectrum = spectrum.lin_eigenvalues
    if spectrum is None:
        raise DomainError("a linearized spectrum is required")
    return np.asarray(spectrum, dtype=float)


def _one_minus_exp(x):
    """1 - e^{-x}, accurate for small x."""
    return -np.expm1(-x)


def _path_weight(a, tau):
    """a / (1 - e^{-2 a tau}) with the a -> 0 limit 1 / (2 tau)."""
    a = np.asarray(a, dtype=float)
    small = np.abs(a * tau) < 1e-12
    safe = np.where(small, 1.0, a)
    return np.where(small, 1.0 / (2.0 * tau), safe / _one_minus_exp(2.0 * safe * tau))


@dataclass(frozen=True, eq=False)
class MinimizerPath:
    """Straight-to-the-boundary minimizer hitting ``z`` (|z| = L) at time ``tau``."""

    z: np.ndarray
    tau: float
    spectrum: np.ndarray
    L: float = 1.0

    def __post_init__(self):
        z = np.asarray(self.z, dtype=float)
        spec = _spectrum(self.spectrum)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "spectrum", spec)
        if not self.tau > 0:
            raise DomainError(f"hitting time must be positive, got {self.tau!r}")
        if z.ndim != 1 or z.size > spec.size:
            raise DomainError("endpoint must be a vector with at most as many modes as the spectrum")
        if abs(float(z @ z) - self.L ** 2) > 1e-10:
            raise DomainError(f"endpoint must lie on the sphere of radius {self.L}, |z|^2 = {float(z @ z)!r}")


def minimizer_eval(path: MinimizerPath, t: float) -> np.ndarray:
    """Coefficients z_k sinh(a_k t) / sinh(a_k tau) at time t in [0, tau]."""
    tau = path.tau
    if not (0.0 <= t <= tau):
        raise DomainError(f"t must lie in [0, {tau}], got {t!r}")
    a = np.abs(path.spectrum[: path.z.size])
    if t == tau:
        return path.z.copy()
    small = a * tau < 1e-12
    safe = np.where(small, 1.0, a)
    # e^{a(t - tau)} (1 - e^{-2at}) / (1 - e^{-2a tau}) stays finite for large a tau
    ratio = np.exp(safe * (t - tau)) * _one_minus_exp(2.0 * safe * t) / _one_minus_exp(2.0 * safe * tau)
    return path.z * np.where(small, t / tau, ratio)


def lambda_weights(spectrum, k0: int, tau: float) -> np.ndarray:
    """Weights lambda_{k0,j} = a_j [j <= k0] + a_j / (1 - e^{-2 a_j tau})."""
    if not tau > 0:
        raise DomainError(f"tau must be positive, got {tau!r}")
    a = _spectrum(spectrum)
    boundary = np.where(np.arange(1, a.size + 1) <= k0, a, 0.0)
    return boundary + _path_weight(a, tau)


class ExitDirection(NamedTuple):
    index: int
    value: float
    minimizers: tuple[int, ...]


def exit_direction(spectrum, k0: int, T: float, L: float = 1.0) -> ExitDirection:
    """Mode j* minimising lambda_{k0,j}(T) (smallest index on ties) and I* = L^2 lambda_{j*}.

    ``minimizers`` lists every index whose weight is within 1e-12 of the minimum,
    which matters for degenerate periodic pairs.
    """
    if not T > 0:
        raise DomainError(f"horizon must be positive, got {T!r}")
    lam = lambda_weights(spectrum, k0, T)
    j = int(np.argmin(lam))
    ties = tuple(int(i) + 1 for i in np.nonzero(np.abs(lam - lam[j]) <= 1e-12 * max(1.0, abs(lam[j])))[0])
    return ExitDirection(j + 1, float(L * L * lam[j]), ties)


def direction_crossover(spectrum, k0: int, T_grid) -> float | None:
    """Largest grid horizon at which the exit direction is still mode 1 while it differs later.

    Returns None when the direction is the same on the whole grid.
    """
    T_grid = np.sort(np.asarray(T_grid, dtype=float))
    dirs = np.array([exit_direction(spectrum, k0, T).index for T in T_grid])
    if np.all(dirs == dirs[0]):
        return None
    ones = np.nonzero(dirs == 1)[0]
    return float(T_grid[ones[-1]]) if ones.size else None


def t_star(a1: float, a2: float) -> float:
    """Horizon beyond which the exit is along the second mode when 2 a_1 >= a_2."""
    if not (0.0 < a1 < a2):
        raise DomainError(f"need 0 < a1 < a2, got a1={a1!r}, a2={a2!r}")
    if a2 > 2.0 * a1:
        raise DomainError(f"a2={a2!r} exceeds 2 a1={2 * a1!r}: the first mode always wins")
    if a2 == 2.0 * a1:
        return math.inf
    return -math.log1p(-a2 / (2.0 * a1)) / (2.0 * a2)


class DecayRates(NamedTuple):
    G_T: float
    U0: float
    optimal: float
    scheme: float


def decay_rates(a1: float, L: float, T: float) -> DecayRates:
    """Second-moment decay rates: G_T, U(0,0) = a_1 L^2, the optimum 2 G_T and the scheme's U0 + G_T."""
    if not (a1 > 0 and L > 0 and T > 0):
        raise DomainError("a1, L and T must be positive")
    G = a1 * L * L / float(_one_minus_exp(2.0 * a1 * T))
    U0 = a1 * L * L
    return DecayRates(G, U0, 2.0 * G, U0 + G)


def action_functional(path_samples, spectrum, k_modes: int, dt: float) -> float:
    """Midpoint discretisation of (1/2) int |phi' + a phi|^2 dt over the first ``k_modes`` modes.

    ``path_samples`` has one row of linearized-basis coefficients per time node,
    nodes ``dt`` apart.
    """
    phi = np.asarray(path_samples, dtype=float)
    if phi.ndim == 1:
        phi = phi[:, None]
    if phi.shape[0] < 3:
        raise DomainError("the action needs at least three time samples")
    if not dt > 0:
        raise DomainError(f"dt must be positive, got {dt!r}")
    a = _spectrum(spectrum)[:k_modes]
    phi = phi[:, :k_modes]
    resid = np.diff(phi, axis=0) / dt + a * 0.5 * (phi[1:] + phi[:-1])
    return float(0.5 * np.sum(resid * resid) * dt)


def quasipotential(spectrum, eta_coeffs) -> float:
    """V(eta) = sum_k a_k <eta, e_k>^2 over the available linearized modes.

    With a :class:`SpectralBasis` the state is given in Laplacian coordinates and
    projected on the stored eigenvectors; with a plain spectrum it is taken to be
    in linearized coordinates already.
    """
    eta = np.asarray(eta_coeffs, dtype=float)
    if isinstance(spectrum, SpectralBasis):
        p = eta @ spectrum.lin_vectors.T
        a = spectrum.lin_eigenvalues
    else:
        a = _spectrum(spectrum)
        p = eta[..., : a.size]
        a = a[: p.shape[-1]]
    v = np.sum(a * p * p, axis=-1)
    return float(v) if np.ndim(v) == 0 else v
