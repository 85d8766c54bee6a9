"""Complete elliptic integral K, Jacobi elliptic functions and the quarter-period map.

Parameter convention: ``m`` multiplies ``x**2`` in the integrand, i.e.

    K(m) = int_0^1 dx / sqrt((1 - x^2) (1 - m x^2)),

which is the Abramowitz-Stegun / Matlab ``ellipke`` convention.
"""
from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np
from scipy.optimize import brentq

_AGM_TOL = 1e-16
_MAX_LADDER = 64


class EllipticTriple(NamedTuple):
    sn: np.ndarray | float
    cn: np.ndarray | float
    dn: np.ndarray | float


def _agm_ladder(m: float) -> tuple[list[float], list[float]]:
    """Descending AGM ladder (a_n, c_n) started from a_0 = 1, b_0 = sqrt(1-m), c_0 = sqrt(m)."""
    a, b, c = 1.0, math.sqrt(1.0 - m), math.sqrt(m)
    aa, cc = [a], [c]
    while abs(c) > _AGM_TOL * a and len(aa) < _MAX_LADDER:
        a, b, c = 0.5 * (a + b), math.sqrt(a * b), 0.5 * (a - b)
        aa.append(a)
        cc.append(c)
    return aa, cc


def elliptic_K(m: float) -> float:
    """Complete elliptic integral of the first kind via the arithmetic-geometric mean."""
    if not (0.0 <= m < 1.0):
        raise ValueError(f"elliptic_K requires 0 <= m < 1, got {m!r}")
    if m == 0.0:
        return math.pi / 2
    aa, _ = _agm_ladder(m)
    return math.pi / (2.0 * aa[-1])


def jacobi_elliptic(x, m: float) -> EllipticTriple:
    """Return (sn, cn, dn)(x | m); vectorised over ``x`` for a scalar parameter ``m``.

    Uses the descending Landen (AGM) recursion run until the complementary
    modulus term drops below 1e-16. ``m == 1`` falls back to the hyperbolic limit.
    """
    if not (0.0 <= m <= 1.0):
        raise ValueError(f"jacobi_elliptic requires 0 <= m <= 1, got {m!r}")
    scalar = np.ndim(x) == 0
    x = np.asarray(x, dtype=float)
    if m == 0.0:
        sn, cn, dn = np.sin(x), np.cos(x), np.ones_like(x)
    elif m == 1.0:
        sn, cn = np.tanh(x), 1.0 / np.cosh(x)
        dn = cn.copy()
    else:
        aa, cc = _agm_ladder(m)
        n = len(aa) - 1
        # sn has period 4K; reducing first keeps 2^n a_n x small.
        period = 2.0 * math.pi / aa[-1]
        xr = np.remainder(x, period)
        phi = (2.0 ** n) * aa[n] * xr
        prev = phi
        for k in range(n, 0, -1):
            prev = phi
            phi = 0.5 * (phi + np.arcsin(np.clip(cc[k] / aa[k] * np.sin(phi), -1.0, 1.0)))
        sn, cn = np.sin(phi), np.cos(phi)
        dn = np.sqrt(np.maximum(1.0 - m * sn * sn, 0.0))
        if n > 0:
            # cn / cos(phi_1 - phi_0) is accurate for small dn but 0/0 near cn = 0.
            den = np.cos(prev - phi)
            ok = np.abs(den) > 0.25
            dn = np.where(ok, cn / np.where(ok, den, 1.0), dn)
    if scalar:
        return EllipticTriple(float(sn), float(cn), float(dn))
    return EllipticTriple(sn, cn, dn)


def quarter_period_M(a: float) -> float:
    """Scaled quarter-period map M(a) = sqrt(2)/sqrt(2-a^2) K(a^2/(2-a^2)), 0 < a < 1.

    The Dirichlet interval length and the equilibrium amplitude are linked by ell = 2 M(a).
    """
    if not (0.0 < a < 1.0):
        raise ValueError(f"quarter_period_M requires 0 < a < 1, got {a!r}")
    a2 = a * a
    return math.sqrt(2.0) / math.sqrt(2.0 - a2) * elliptic_K(a2 / (2.0 - a2))


_A_LO = 1e-12
_A_HI = 1.0 - 1e-15


def inverse_M(target: float) -> float:
    """Amplitude ``a`` in (0, 1) with M(a) = target, by bracketed root finding."""
    if not target > math.pi / 2:
        raise ValueError(f"inverse_M requires target > pi/2, got {target!r}")
    hi_val = quarter_period_M(_A_HI)
    if target >= hi_val:
        raise ValueError(f"inverse_M target {target!r} beyond representable range (< {hi_val:.3f})")
    # M(a) - pi/2 ~ 3 pi a^2 / 16 near zero; start the bracket just below that estimate.
    lo = max(_A_LO, 0.5 * math.sqrt(16.0 * (target - math.pi / 2) / (3.0 * math.pi)))
    lo = min(lo, 0.5)
    while quarter_period_M(lo) > target:
        lo *= 0.5
    return brentq(lambda a: quarter_period_M(a) - target, lo, _A_HI, xtol=1e-16, rtol=4 * np.finfo(float).eps, maxiter=200)


class Check(NamedTuple):
    name: str
    passed: bool
    detail: str


def _quad_K(m: float) -> float:
    # x = sin(t) removes the endpoint singularity of the defining integral
    from scipy.integrate import quad

    return quad(lambda t: 1.0 / math.sqrt(1.0 - m * math.sin(t) ** 2), 0.0, math.pi / 2, epsabs=0.0, epsrel=1e-13, limit=200)[0]


def self_test(seed: int = 12345) -> list[Check]:
    """Tolerance checks of this module against quadrature and the defining identities."""
    out = []

    def check(name, err, tol):
        out.append(Check(name, bool(err <= tol), f"error {err:.3e} (tolerance {tol:.0e})"))

    check("K(0) = pi/2", abs(elliptic_K(0.0) - math.pi / 2), 1e-14)
    for m in (0.1, 0.5, 0.9, 0.99):
        check(f"K({m}) against quadrature", abs(elliptic_K(m) - _quad_K(m)) / _quad_K(m), 1e-12)
    rng = np.random.default_rng(seed)
    x = rng.uniform(-20.0, 20.0, 1000)
    m = rng.uniform(0.0, 1.0, 1000)
    pyth = dn_id = 0.0
    for xi, mi in zip(x, m):
        sn, cn, dn = jacobi_elliptic(xi, mi)
        pyth = max(pyth, abs(sn * sn + cn * cn - 1.0))
        dn_id = max(dn_id, abs(dn * dn - (1.0 - mi * sn * sn)))
    check("sn^2 + cn^2 = 1 on 1000 random points", pyth, 1e-12)
    check("dn^2 = 1 - m sn^2 on 1000 random points", dn_id, 1e-12)
    check("sn(K(0.4), 0.4) = 1", abs(jacobi_elliptic(_quad_K(0.4), 0.4).sn - 1.0), 1e-10)
    per = max(abs(jacobi_elliptic(xi + 4 * elliptic_K(mi), mi).sn - jacobi_elliptic(xi, mi).sn)
              for xi, mi in zip(x[:100], np.minimum(m[:100], 0.999)))
    check("sn(x + 4K) = sn(x)", per, 1e-9)
    check("M(1e-6) -> pi/2", abs(quarter_period_M(1e-6) - math.pi / 2), 1e-5)
    check("2 M(sqrt(2)/2) = 4.0043", abs(2 * quarter_period_M(math.sqrt(0.5)) - 4.0043), 1e-4)
    check("2 M(0.65) = 3.81828", abs(2 * quarter_period_M(0.65) - 3.81828), 1e-5)
    grid = np.linspace(0.01, 0.99, 100)
    check("inverse_M(M(a)) = a on 100 points", max(abs(inverse_M(quarter_period_M(a)) - a) for a in grid), 1e-9)
    check("inverse_M(1.90914) = 0.65", abs(inverse_M(1.90914) - 0.65), 1e-3)
    return out
