"""Changes of measure: quasipotential feedback and its exponentially mollified version.

The moderate-deviation state ``eta`` is always given in Laplacian-basis
coordinates (last axis of length N); projections on the linearized eigenvectors
use the coefficient vectors stored on the :class:`SpectralBasis`.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .spectral import ConfigurationError, SpectralBasis, check_spectral_gap

VARIANTS = ("none", "asymptotic", "mollified")


@dataclass(frozen=True, eq=False)
class ControlPolicy:
    """Feedback control u(eta).

    variant: ``"none"`` (standard Monte Carlo), ``"asymptotic"`` (gradient of the
    quasipotential projected on the first ``k0`` linearized modes) or
    ``"mollified"`` (soft minimum of that subsolution and a constant one,
    temperature ``delta = 2 / h^2``).
    """

    variant: str
    basis: SpectralBasis | None = None
    L: float = 1.0
    kappa: float = 0.9
    k0: int = 1

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigurationError(f"control variant must be one of {VARIANTS}, got {self.variant!r}")
        if not self.L > 0:
            raise ConfigurationError(f"exit radius L must be positive, got {self.L!r}")
        if self.variant == "none":
            return
        b = self.basis
        if b is None or b.lin_eigenvalues is None:
            raise ConfigurationError(f"{self.variant} control needs a linearized spectrum")
        gap = check_spectral_gap(b.lin_eigenvalues)
        if self.variant == "mollified":
            if not (0.0 < self.kappa < 1.0):
                raise ConfigurationError(f"kappa must lie in (0, 1), got {self.kappa!r}")
            if not gap.strong:
                raise ConfigurationError("mollified control requires the strong spectral gap 3 a_1 < a_2")
        else:
            if not (1 <= self.k0 <= b.K_lin):
                raise ConfigurationError(f"k0 must lie in [1, {b.K_lin}], got {self.k0!r}")
            if gap.weak_k0 is None or gap.weak_k0 > self.k0:
                raise ConfigurationError(
                    f"asymptotic control with k0={self.k0} violates the weak spectral gap (needs k0 >= {gap.weak_k0})"
                )

    @property
    def a1(self) -> float:
        return float(self.basis.lin_eigenvalues[0])

    @property
    def e1(self) -> np.ndarray:
        return self.basis.lin_vectors[0]


def delta_of(h: float) -> float:
    return 2.0 / (h * h)


def _exponents(policy: ControlPolicy, p1, h: float):
    """F1(eta), F2 and delta for the mollified subsolution."""
    a1, L = policy.a1, policy.L
    F1 = a1 * (L * L - p1 * p1)
    F2 = a1 * (L * L - h ** (-2.0 * policy.kappa))
    return F1, F2, delta_of(h)


def rho_eps(policy: ControlPolicy, eta_coeffs, h: float):
    """Weight of the quasipotential branch, 1 / (1 + exp((F1 - F2) / delta))."""
    if policy.variant != "mollified":
        raise ConfigurationError("rho_eps is defined for the mollified control only")
    p1 = np.asarray(eta_coeffs, dtype=float) @ policy.e1
    F1, F2, delta = _exponents(policy, p1, h)
    return np.clip(expit((F2 - F1) / delta), 0.0, 1.0)


def control_eval(policy: ControlPolicy, eta_coeffs, h: float) -> np.ndarray:
    """Control vector in Laplacian coordinates; batched over leading axes of ``eta_coeffs``."""
    eta = np.asarray(eta_coeffs, dtype=float)
    if policy.variant == "none":
        return np.zeros_like(eta)
    if policy.variant == "mollified":
        p1 = eta @ policy.e1
        F1, F2, delta = _exponents(policy, p1, h)
        rho = expit((F2 - F1) / delta)
        return (2.0 * policy.a1 * rho * p1)[..., None] * policy.e1
    k = policy.k0
    V = policy.basis.lin_vectors[:k]
    lam = policy.basis.lin_eigenvalues[:k]
    p = eta @ V.T
    return 2.0 * (p * lam) @ V


def subsolution_value(policy: ControlPolicy, eta_coeffs, h: float):
    """Subsolution whose negative gradient is the control."""
    eta = np.asarray(eta_coeffs, dtype=float)
    if policy.variant == "none":
        raise ConfigurationError("no subsolution for the uncontrolled scheme")
    if policy.variant == "mollified":
        p1 = eta @ policy.e1
        F1, F2, delta = _exponents(policy, p1, h)
        return -delta * np.logaddexp(-F1 / delta, -F2 / delta)
    k = policy.k0
    V = policy.basis.lin_vectors[:k]
    lam = policy.basis.lin_eigenvalues[:k]
    p = eta @ V.T
    return policy.a1 * policy.L ** 2 - (lam * p * p).sum(axis=-1)


def check_h_schedule(eps_grid, h_exponent: float) -> bool:
    """Whether sqrt(eps) h(eps)^3 decreases as eps decreases along the grid; warns if not."""
    eps = np.sort(np.asarray(list(eps_grid), dtype=float))[::-1]
    vals = np.sqrt(eps) * eps ** (-3.0 * h_exponent)
    ok = bool(np.all(np.diff(vals) < 0)) if vals.size > 1 else 0.5 - 3.0 * h_exponent > 0
    if not ok:
        warnings.warn(
            f"sqrt(eps) h(eps)^3 is not decreasing on the epsilon grid for h_exponent={h_exponent}",
            stacklevel=2,
        )
    return ok
