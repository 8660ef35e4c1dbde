"""Zero Matsubara frequency (l = 0) reflection via the TM conductivity solve.

At zero frequency, with the conductivity pole taken before any other limit,
only transverse-magnetic solutions survive (a longitudinal H would demand a
DC surface current) and the TE reflection vanishes identically. The TM
fields reduce to a scalar potential phi (E_t = grad phi) and the surface
curl psi of H_t, obeying

    d/dz phi = c * (1/s) * psi,        d/dz psi = (1/c) * div(s grad phi),

with s(x, y) the spatially varying DC conductivity. In Fourier space, with
Sh = Toeplitz(s) and Rinv = Toeplitz(1/s)^-1, the decay constants obey the
symmetric-definite generalized problem

    kappa^2 * Sh phi = (A Rinv A + B Sh B) phi,

one TM mode pair per diffraction channel (kappa = |K_nm| in homogeneous
regions, independent of s). The factorization follows the continuity
structure of the products: s*E_z and s*E_y pair a jumping factor with a
continuous one (plain Toeplitz), while the normal current s*E_x is
continuous across lateral walls where both factors jump, which demands the
inverted-Toeplitz form. This keeps the discretized problem well defined as
the vacuum-region conductivity floor goes to zero; factorizing everything
with plain Toeplitz rules instead makes the l = 0 term drift like the
square root of the floor and never reach floor independence at fixed
truncation. Results are checked to be floor-independent. The modes fit the
same paired basis structure as the finite-frequency solver, so the
identical S-matrix recursion runs on the TM subspace.

The alternative route, extrapolating the full finite-frequency reflection
matrix to xi -> 0 from a few small frequencies, is kept as a cross-check
and as the physically correct l = 0 prescription for all-dielectric stacks
(where the conductivity formulation degenerates to a uniform floor and
loses the static dielectric contrast).
"""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla

from .constants import C_LIGHT
from .errors import (DegenerateEigenbasis, ExtrapolationUnstable,
                     NonConvergedFloor)
from .geometry import LayerSpec, LayerStack, cell_coefficient, toeplitz_from_table
from .materials import Material
from .modal import ModalBasis, TransverseWavevector, _ExplicitInverter
from .smatrix import gap_side_reflection

__all__ = [
    "stack_sigma_floor",
    "zero_freq_reflection",
    "small_xi_extrapolation",
    "tm_basis",
]

def _stack_materials(stack: LayerStack):
    mats = [stack.incident_halfspace, stack.exit_halfspace]
    for layer in stack.layers:
        mats.append(layer.background)
        mats.extend(inc.material for inc in layer.inclusions)
    return mats


def stack_sigma_floor(stack: LayerStack) -> float:
    """Default conductivity floor: 1e-11 of the largest sigma in the stack,
    or 1e-2 rad/s absolute for an all-dielectric stack.

    The floor enters only through the contrast sigma/floor; the direct
    solver extrapolates a three-decade ladder below this value, which is
    deep enough that the extrapolated reflection of the benchmark grating
    moves by < 1e-5 when the ladder starts one decade lower, while the
    deepest rung visited by the floor check (f0/10 ladder bottom, 1e-14 of
    sigma) stays inside the numerically healthy contrast range."""
    sigmas = [m.sigma_dc() for m in _stack_materials(stack)]
    smax = max(sigmas) if sigmas else 0.0
    return 1e-11 * smax if smax > 0 else 1e-2


def _sigma_value(material: Material, floor: float) -> float:
    return max(material.sigma_dc(), floor)


def _sigma_tables(layer: LayerSpec, cell, kt, floor):
    """Toeplitz matrices of s and 1/s for one layer."""
    order = kt.order
    bg = _sigma_value(layer.background, floor)
    patches_s = [(inc, _sigma_value(inc.material, floor)) for inc in layer.inclusions]
    patches_r = [(inc, 1.0 / _sigma_value(inc.material, floor))
                 for inc in layer.inclusions]
    N2, M2 = 2 * order.N, 2 * order.M
    tab_s = np.empty((2 * N2 + 1, 2 * M2 + 1))
    tab_r = np.empty_like(tab_s)
    for i, dn in enumerate(range(-N2, N2 + 1)):
        for j, dm in enumerate(range(-M2, M2 + 1)):
            tab_s[i, j] = cell_coefficient(cell, bg, patches_s, dn, dm).real
            tab_r[i, j] = cell_coefficient(cell, 1.0 / bg, patches_r, dn, dm).real
    return toeplitz_from_table(tab_s, order), toeplitz_from_table(tab_r, order)


def _kappa_clamp(cell):
    """Tiny decay floor for the k_parallel = 0 channel at zero frequency.

    Quadrature rules with a node at the zone center meet the TM channel
    with kappa = 0 exactly (the energy integrand's integrable log point).
    Clamping kappa regularizes the mode algebra; the residual log offset in
    the energy cancels in pressure/force-gradient differences as long as
    the clamp is far below 1/(2a), which 1e-9 of a reciprocal-lattice unit
    always is.
    """
    return 1e-9 * 2.0 * np.pi / max(cell.Lx, cell.Ly)


def tm_basis(layer_or_material, cell, kt: TransverseWavevector,
             floor: float, layer_key=None) -> ModalBasis:
    """Zero-frequency TM mode basis of one layer (C modes, one per channel)."""
    a, b = kt.alphas, kt.betas
    K = np.maximum(np.hypot(a, b), _kappa_clamp(cell))
    if isinstance(layer_or_material, Material) or layer_or_material.is_homogeneous:
        mat = (layer_or_material if isinstance(layer_or_material, Material)
               else layer_or_material.background)
        s = _sigma_value(mat, floor)
        kappas = K.copy()
        phi = np.eye(K.size)
        psi_diag = s * K / C_LIGHT
        yh = np.diag(psi_diag)
        return ModalBasis(kappas=kappas, ye=phi, yh=yh, q=0.0, kt=kt,
                          layer_key=layer_key,
                          _inv_e=_ExplicitInverter(phi),
                          _inv_h=_ExplicitInverter(np.diag(1.0 / psi_diag)))
    Sh, Rh = _sigma_tables(layer_or_material, cell, kt, floor)
    rinv = sla.inv(Rh)
    W2 = a[:, None] * rinv * a[None, :] + b[:, None] * Sh * b[None, :]
    lam, phi = sla.eigh(W2, Sh, check_finite=False)
    if lam.min() <= -1e-12 * lam.max():
        raise DegenerateEigenbasis(
            "zero-frequency TM eigenvalues are not positive")
    kappas = np.maximum(np.sqrt(np.maximum(lam, 0.0)), _kappa_clamp(cell))
    psi = (Sh @ phi) * (kappas / C_LIGHT)[None, :]
    norms = np.sqrt((phi * phi).sum(axis=0) + (psi * psi).sum(axis=0))
    return ModalBasis(kappas=kappas, ye=phi / norms, yh=psi / norms, q=0.0,
                      kt=kt, layer_key=layer_key)


def _reflection_once(stack: LayerStack, kt, floor) -> np.ndarray:
    chain = [(tm_basis(stack.incident_halfspace, stack.cell, kt, floor,
                       "incident"), 0.0)]
    chain += [(tm_basis(ly, stack.cell, kt, floor), ly.thickness)
              for ly in stack.layers]
    chain.append((tm_basis(stack.exit_halfspace, stack.cell, kt, floor), 0.0))
    return gap_side_reflection(chain)


def _passivity_clip(R, margin=1e-10):
    """Project a reflection matrix onto the passivity bound rho(R) <= 1.

    Extrapolated reflections can overshoot unity by their fit error at
    singular quadrature points (zone center at zero frequency, where the
    physical eigenvalue is exactly -1); passive bodies cannot exceed unit
    spectral radius, so the overshoot is pure regulator error.
    """
    rho = np.abs(np.linalg.eigvals(R)).max()
    if rho >= 1.0 - margin:
        return R * ((1.0 - margin) / rho)
    return R


def _extrapolate_in_floor(stack, kt, floor):
    """Entrywise quadratic fit in sqrt(floor) over {floor, floor/10,
    floor/100}, evaluated at zero.

    The conductivity floor regularizes the tooth-edge current singularity;
    at fixed truncation the solution approaches its floor->0 limit only
    like sqrt(floor), so plain evaluation at any practical floor is not
    converged. The sqrt-fit removes the leading regulator error.
    """
    mats = np.stack([_reflection_once(stack, kt, floor * 10.0 ** (-i))
                     for i in range(3)])
    u = np.array([1.0, 10.0 ** -0.5, 0.1])
    coeff = np.polynomial.polynomial.polyfit(u, mats.reshape(3, -1), 2)
    return _passivity_clip(coeff[0].reshape(mats.shape[1:]))


def zero_freq_reflection(stack: LayerStack, kt: TransverseWavevector,
                         sigma_floor: float | None = None,
                         check_floor: bool = True,
                         floor_tol: float = 1e-4) -> np.ndarray:
    """TM-sector reflection matrix of a stack at exactly zero frequency.

    The matrix is C x C, one row/column per diffraction channel. The TE
    sector contributes exactly zero at l = 0 and is not represented. The
    returned matrix is the sqrt(floor)-extrapolated limit of solves at
    {sigma_floor, sigma_floor/10, sigma_floor/100}.

    Raises NonConvergedFloor if starting the extrapolation one decade lower
    moves the result by more than floor_tol (relative, matrix norm).
    """
    if sigma_floor is None:
        sigma_floor = stack_sigma_floor(stack)
    if sigma_floor <= 0:
        raise ValueError("sigma_floor must be positive")
    R = _extrapolate_in_floor(stack, kt, sigma_floor)
    if check_floor:
        R10 = _extrapolate_in_floor(stack, kt, sigma_floor / 10.0)
        scale = max(np.abs(R).max(), 1e-300)
        if np.abs(R10 - R).max() > floor_tol * scale:
            raise NonConvergedFloor(
                "zero-frequency reflection depends on the conductivity floor; "
                f"floor={sigma_floor:g}")
    return R


def default_xi_samples(stack: LayerStack, xi_ref: float,
                       kt: TransverseWavevector):
    """Extrapolation samples: four decade-spaced frequencies below xi_ref.

    For homogeneous stacks the reflection entries are analytic in xi within
    a radius ~ k_min^2 c^2 / sigma_max, so the top sample is kept safely
    inside it (the closed-form bases stay numerically exact at any depth).
    Patterned stacks approach the limit like sqrt(xi) at every depth, but
    their eigensolves degrade below ~1e-5 of xi_ref, which caps the span.
    """
    modulated = any(not ly.is_homogeneous for ly in stack.layers)
    if modulated:
        top = xi_ref * 1e-2
    else:
        kmin = float(np.hypot(kt.alphas, kt.betas).min())
        smax = max(m.sigma_dc() for m in _stack_materials(stack))
        radius = kmin**2 * C_LIGHT**2 / smax if smax > 0 else kmin * C_LIGHT
        top = min(xi_ref * 1e-2, 0.02 * radius)
    return [top, top * 1e-1, top * 1e-2, top * 1e-3]


def small_xi_extrapolation(stack: LayerStack, kt: TransverseWavevector,
                           xi_samples, residual_tol: float = 1e-3):
    """Extrapolate the full reflection matrix to xi -> 0.

    Evaluates the finite-frequency pipeline at the given strictly
    decreasing xi samples and least-squares fits each matrix entry with a
    polynomial of degree <= 2 in u = sqrt(xi); returns (R0, residual),
    where the residual is the worst fit misfit relative to the entry
    scale. The sqrt variable covers both regimes of conductor response:
    entries are analytic in xi only within a radius k^2 c^2 / sigma and
    cross over to sqrt(xi) behavior beyond it (grating edge fields
    approach their limit like sqrt(xi) throughout).

    A residual above residual_tol means the samples are outside the
    asymptotic regime and the xi -> 0 value cannot be trusted; deeply
    etched conductor gratings at high truncation orders genuinely exhibit
    this (their edge currents approach the static limit only
    logarithmically), which is why the direct conductivity solve is the
    production path.
    """
    from .smatrix import stack_reflection

    xis = np.asarray(list(xi_samples), dtype=float)
    if len(xis) < 3 or np.any(np.diff(xis) >= 0):
        raise ValueError("need >= 3 strictly decreasing xi samples")
    mats = np.stack([stack_reflection(stack, kt, xi, robust_eig=True)
                     for xi in xis])
    flat = mats.reshape(len(xis), -1)
    scale = max(np.abs(mats).max(), 1e-300)
    u = np.sqrt(xis / xis[0])
    coeff = np.polynomial.polynomial.polyfit(u, flat, min(2, len(xis) - 2))
    fit = np.polynomial.polynomial.polyval(u, coeff).T
    residual = np.abs(fit - flat).max() / scale
    if residual > residual_tol:
        raise ExtrapolationUnstable(
            f"extrapolation residual {residual:.2e} above {residual_tol:g}")
    return _passivity_clip(coeff[0].reshape(mats.shape[1:])), residual
