"""Independent plane-plane free-energy oracle (Lifshitz formula).

This module is the reference the grating pipeline is benchmarked against:
specular Fresnel coefficients at imaginary frequency plus a continuous
radial wavevector integral per Matsubara term. It deliberately shares no
code with the modal/S-matrix machinery.

Sign conventions: r_s and r_p below are the standard Lifshitz reflection
coefficients (r_p > 0 for vacuum over metal). The grating pipeline's
mode-pair convention flips the sign of its p-diagonal relative to r_p; the
free energy only ever sees the convention-free products r1*r2.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.integrate import quad

from .constants import C_LIGHT, HBAR, K_BOLTZMANN
from .grids import MatsubaraGrid
from .materials import Material

__all__ = [
    "fresnel_rs",
    "fresnel_rp",
    "fresnel_rs_static",
    "fresnel_rp_static",
    "lifshitz_plane_plane",
    "ideal_casimir_energy",
]


def fresnel_rs(eps1, mu1, eps2, mu2, xi, k):
    """TE reflection at i*xi for incidence from medium 1 onto medium 2."""
    q2 = (xi / C_LIGHT) ** 2
    k1 = np.sqrt(eps1 * mu1 * q2 + k * k)
    k2 = np.sqrt(eps2 * mu2 * q2 + k * k)
    return (mu2 * k1 - mu1 * k2) / (mu2 * k1 + mu1 * k2)


def fresnel_rp(eps1, mu1, eps2, mu2, xi, k):
    """TM reflection at i*xi for incidence from medium 1 onto medium 2."""
    q2 = (xi / C_LIGHT) ** 2
    k1 = np.sqrt(eps1 * mu1 * q2 + k * k)
    k2 = np.sqrt(eps2 * mu2 * q2 + k * k)
    return (eps2 * k1 - eps1 * k2) / (eps2 * k1 + eps1 * k2)


def fresnel_rs_static(mat1: Material, mat2: Material):
    """xi -> 0 limit of r_s; vanishes for non-magnetic media."""
    m1, m2 = mat1.mu(0.0), mat2.mu(0.0)
    return (m2 - m1) / (m2 + m1)


def fresnel_rp_static(mat1: Material, mat2: Material):
    """xi -> 0 limit of r_p, taking the conductivity pole first.

    Any medium with a zero-frequency pole dominates: a conductor facing a
    dielectric reflects TM perfectly at zero frequency (Drude prescription).
    """
    s1, s2 = mat1.sigma_dc(), mat2.sigma_dc()
    if s1 > 0 and s2 > 0:
        return (s2 - s1) / (s2 + s1)
    if s2 > 0:
        return 1.0
    if s1 > 0:
        return -1.0
    e1, e2 = mat1.eps(0.0), mat2.eps(0.0)
    return (e2 - e1) / (e2 + e1)


_TAIL_EFOLDS = 60.0  # exp(-60) is far below any epsrel in use


def _integral_finite_xi(mat1, mat2, gap, a, xi, epsrel):
    """(1/2pi) * int k dk sum_pol log(1 - r1 r2 exp(-2 kappa_c a)) at xi > 0.

    Substituting k dk = kappa dkappa and t = 2 a kappa turns this into a
    well-scaled integral over a finite window of ~60 decay lengths.
    """
    eg, mg = gap.eps(xi), gap.mu(xi)
    e1, m1 = mat1.eps(xi), mat1.mu(xi)
    e2, m2 = mat2.eps(xi), mat2.mu(xi)
    kap0 = math.sqrt(eg * mg) * xi / C_LIGHT
    t0 = 2.0 * a * kap0

    def integrand(t):
        kappa = t / (2.0 * a)
        k = math.sqrt(max(kappa * kappa - kap0 * kap0, 0.0))
        rs = (fresnel_rs(eg, mg, e1, m1, xi, k)
              * fresnel_rs(eg, mg, e2, m2, xi, k))
        rp = (fresnel_rp(eg, mg, e1, m1, xi, k)
              * fresnel_rp(eg, mg, e2, m2, xi, k))
        damp = math.exp(-t)
        return t * (math.log1p(-rs * damp) + math.log1p(-rp * damp))

    val, _ = quad(integrand, t0, t0 + _TAIL_EFOLDS,
                  epsabs=0.0, epsrel=epsrel, limit=200)
    return val / (2.0 * math.pi) / (2.0 * a) ** 2


def _integral_zero_xi(mat1, mat2, gap, a, epsrel):
    rs12 = fresnel_rs_static(gap, mat1) * fresnel_rs_static(gap, mat2)
    rp12 = fresnel_rp_static(gap, mat1) * fresnel_rp_static(gap, mat2)

    def integrand(t):
        damp = math.exp(-t)
        return t * (math.log1p(-rs12 * damp) + math.log1p(-rp12 * damp))

    val, _ = quad(integrand, 0.0, _TAIL_EFOLDS,
                  epsabs=0.0, epsrel=epsrel, limit=200)
    return val / (2.0 * math.pi) / (2.0 * a) ** 2


def lifshitz_plane_plane(mat1: Material, mat2: Material, gap: Material,
                         a: float, grid: MatsubaraGrid,
                         epsrel: float = 1e-10,
                         adaptive_tail: float | None = None):
    """Free energy per unit area (J/m^2) between two homogeneous half-spaces.

    Parameters
    ----------
    mat1, mat2 : Material
        The two half-spaces.
    gap : Material
        Homogeneous gap medium (no conductivity pole).
    a : float
        Surface-to-surface separation in meters.
    grid : MatsubaraGrid
        Temperature and truncation l_max of the thermal sum.
    epsrel : float
        Relative tolerance of the adaptive radial integration.
    adaptive_tail : float, optional
        If given, keep summing beyond l_max until the last term falls below
        this fraction of the accumulated sum.
    """
    if gap.sigma_dc() != 0.0:
        raise ValueError("gap medium must not have a zero-frequency pole")
    kbt = K_BOLTZMANN * grid.temperature
    terms = [0.5 * _integral_zero_xi(mat1, mat2, gap, a, epsrel)]
    for l in range(1, grid.l_max + 1):
        terms.append(_integral_finite_xi(mat1, mat2, gap, a, grid.xi(l), epsrel))
    if adaptive_tail is not None:
        total = math.fsum(terms)
        l = grid.l_max
        while True:
            l += 1
            term = _integral_finite_xi(mat1, mat2, gap, a, grid.xi(l), epsrel)
            terms.append(term)
            total = math.fsum(terms)
            if abs(term) < adaptive_tail * abs(total) or l > 200000:
                break
    return kbt * math.fsum(terms)


def ideal_casimir_energy(a: float) -> float:
    """Zero-temperature perfect-mirror energy per area, -pi^2 hbar c/(720 a^3)."""
    return -math.pi**2 * HBAR * C_LIGHT / (720.0 * a**3)


def lifshitz_on_grid(mat1: Material, mat2: Material, gap: Material, a: float,
                     grid: MatsubaraGrid, quad, order) -> float:
    """Plane-plane free energy on a discrete Brillouin-zone rule (J/m^2).

    Same physics as lifshitz_plane_plane, but the radial integral is
    replaced by the given Gauss-Legendre zone rule folded over diffraction
    channels, i.e. the exact measure the periodic pipeline uses. Built from
    Fresnel coefficients only; the specular problem block-diagonalizes, so
    log det reduces to a sum of per-channel log terms.
    """
    kx, ky, w = quad.nodes()
    n, m = order.channel_orders()
    Lx, Ly = quad.cell.Lx, quad.cell.Ly
    alphas = kx[:, None] + 2.0 * np.pi * n[None, :] / Lx   # (nodes, channels)
    betas = ky[:, None] + 2.0 * np.pi * m[None, :] / Ly
    kmag = np.hypot(alphas, betas)
    kbt = K_BOLTZMANN * grid.temperature

    rs0 = fresnel_rs_static(gap, mat1) * fresnel_rs_static(gap, mat2)
    rp0 = fresnel_rp_static(gap, mat1) * fresnel_rp_static(gap, mat2)
    damp0 = np.exp(-2.0 * a * kmag)
    node_sum = (np.log1p(-rs0 * damp0) + np.log1p(-rp0 * damp0)).sum(axis=1)
    terms = [0.5 * float(node_sum @ w) / (2.0 * math.pi) ** 2]

    for l in range(1, grid.l_max + 1):
        xi = grid.xi(l)
        eg, mg = gap.eps(xi), gap.mu(xi)
        kappa = np.sqrt(eg * mg * (xi / C_LIGHT) ** 2 + kmag**2)
        damp = np.exp(-2.0 * a * kappa)
        rs = (fresnel_rs(eg, mg, mat1.eps(xi), mat1.mu(xi), xi, kmag)
              * fresnel_rs(eg, mg, mat2.eps(xi), mat2.mu(xi), xi, kmag))
        rp = (fresnel_rp(eg, mg, mat1.eps(xi), mat1.mu(xi), xi, kmag)
              * fresnel_rp(eg, mg, mat2.eps(xi), mat2.mu(xi), xi, kmag))
        node_sum = (np.log1p(-rs * damp) + np.log1p(-rp * damp)).sum(axis=1)
        terms.append(float(node_sum @ w) / (2.0 * math.pi) ** 2)
    return kbt * math.fsum(terms)
