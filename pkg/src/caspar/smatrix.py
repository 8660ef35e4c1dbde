"""Interface transfer matrices, S-matrices, and the stable stack recursion.

Tangential-field continuity projects the modes of the layer nearer the gap
onto the duals of the next layer, giving the transfer blocks

    t11 = t22 = (P + Q)/2,   t12 = t21 = (P - Q)/2,
    P = Ye_out^-1 @ Ye_in,   Q = Yh_out^-1 @ Yh_in,

the equalities being a consequence of the shared-E mode pairing. The
interface S-matrix is the Schur-complement rearrangement of t; attaching the
inner layer's decay factors exp(-kappa*h) (never growing exponentials) gives
the layer S-matrix, and the star recursion composes layers into the stack
S-matrix. The transfer-matrix route would overflow for thick layers; the
S-matrix route only ever multiplies by factors <= 1.

Amplitude bookkeeping follows the network convention: for a stack whose
medium 0 faces the gap, Sigma21 maps incoming gap amplitudes to outgoing
ones, i.e. it is the reflection operator entering the dispersion-energy
round trip, expressed in the gap's Rayleigh (channel, s/p) ordering.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
from scipy.linalg import lapack as _lapack

from .constants import C_LIGHT
from .errors import ResonantInversion, SingularT22
from .geometry import LayerStack, TruncationOrder
from .modal import (ModalBasis, TransverseWavevector, assemble_waveguide_matrix,
                    check_same_grid, rayleigh_basis, solve_modes)
from .geometry import fourier_blocks

__all__ = [
    "InterfaceTransfer",
    "LayerScattering",
    "StackScattering",
    "interface_transfer",
    "interface_smatrix",
    "layer_smatrix",
    "star_compose",
    "identity_scattering",
    "stack_reflection",
    "layer_basis",
]

_COND_LIMIT = 1e12


@dataclass(frozen=True, eq=False)
class InterfaceTransfer:
    """Blocks of the amplitude transfer matrix across one interface."""

    t11: np.ndarray
    t12: np.ndarray
    t21: np.ndarray
    t22: np.ndarray


@dataclass(frozen=True, eq=False)
class LayerScattering:
    """Interface S-matrix with the inner layer's decay factors attached."""

    s11: np.ndarray
    s12: np.ndarray
    s21: np.ndarray
    s22: np.ndarray


@dataclass(frozen=True, eq=False)
class StackScattering:
    """Accumulated S-matrix of the stack between medium 0 and medium i."""

    s11: np.ndarray
    s12: np.ndarray
    s21: np.ndarray
    s22: np.ndarray

    # Network-ordered view: S = [[R_left, T_right], [T_left, R_right]].
    @property
    def r_left(self):
        """Reflection for illumination from the medium-0 (gap) side."""
        return self.s21

    @property
    def t_left(self):
        return self.s11

    @property
    def t_right(self):
        return self.s22

    @property
    def r_right(self):
        return self.s12


def interface_transfer(inner: ModalBasis, outer: ModalBasis) -> InterfaceTransfer:
    """Project inner-layer modes onto the outer layer's dual basis."""
    check_same_grid(inner, outer)
    P = outer.solve_e(inner.ye)
    Q = outer.solve_h(inner.yh)
    plus = 0.5 * (P + Q)
    minus = 0.5 * (P - Q)
    return InterfaceTransfer(t11=plus, t12=minus, t21=minus, t22=plus)


def _guarded_lu(mat, exc, what):
    lu, piv = sla.lu_factor(mat, check_finite=False)
    anorm = np.abs(mat).sum(axis=0).max()
    rcond = _lapack.dgecon(lu, anorm, norm="1")[0]
    if not np.isfinite(rcond) or rcond < 1.0 / _COND_LIMIT:
        raise exc(f"{what}: condition number above {_COND_LIMIT:g}")
    return lu, piv


def interface_smatrix(t: InterfaceTransfer):
    """Schur-complement S-matrix blocks (sigma11, sigma12, sigma21, sigma22)."""
    lu_piv = _guarded_lu(t.t22, SingularT22, "t22 in interface S-matrix")
    D = t.t22.shape[0]
    inv_t21 = sla.lu_solve(lu_piv, t.t21, check_finite=False)
    sigma22 = sla.lu_solve(lu_piv, np.eye(D), check_finite=False)
    sigma21 = -inv_t21
    sigma12 = t.t12 @ sigma22
    sigma11 = t.t11 - t.t12 @ inv_t21
    return sigma11, sigma12, sigma21, sigma22


def layer_smatrix(sigma, inner: ModalBasis, h: float) -> LayerScattering:
    """Attach the inner layer's propagation decay to an interface S-matrix.

    At imaginary frequency the factors exp(i k0 gamma h) = exp(-kappa h)
    are real and <= 1, so nothing can overflow regardless of h.
    """
    sigma11, sigma12, sigma21, sigma22 = sigma
    if h == 0.0:
        return LayerScattering(s11=sigma11, s12=sigma12, s21=sigma21, s22=sigma22)
    decay = inner.decay(h)
    return LayerScattering(
        s11=sigma11 * decay[None, :],
        s12=sigma12,
        s21=decay[:, None] * sigma21 * decay[None, :],
        s22=decay[:, None] * sigma22,
    )


def identity_scattering(D: int) -> StackScattering:
    eye = np.eye(D)
    zero = np.zeros((D, D))
    return StackScattering(s11=eye, s12=zero, s21=zero, s22=eye)


def star_compose(acc: StackScattering, nxt: LayerScattering) -> StackScattering:
    """Attach one more layer S-matrix to the accumulated stack S-matrix.

    Eliminating the shared-layer amplitudes gives, with
    W = (1 - acc.s12 @ nxt.s21)^-1,

        s11' = nxt.s11 W acc.s11
        s12' = nxt.s12 + nxt.s11 W acc.s12 nxt.s22
        s21' = acc.s21 + acc.s22 nxt.s21 W acc.s11
        s22' = acc.s22 (s22 + nxt.s21 W acc.s12 nxt.s22)
    """
    D = acc.s11.shape[0]
    resolvent = np.eye(D) - acc.s12 @ nxt.s21
    lu_piv = _guarded_lu(resolvent, ResonantInversion,
                         "(1 - s21*Sigma12) in star product")
    U = sla.lu_solve(lu_piv, acc.s11, check_finite=False)
    V = sla.lu_solve(lu_piv, acc.s12 @ nxt.s22, check_finite=False)
    return StackScattering(
        s11=nxt.s11 @ U,
        s12=nxt.s12 + nxt.s11 @ V,
        s21=acc.s21 + acc.s22 @ (nxt.s21 @ U),
        s22=acc.s22 @ (nxt.s22 + nxt.s21 @ V),
    )


def layer_basis(layer_or_material, cell, kt: TransverseWavevector, xi: float,
                layer_key=None, robust_eig: bool = False) -> ModalBasis:
    """Modal basis of a layer: closed-form Rayleigh if homogeneous, else the
    waveguide eigenproblem."""
    q = xi / C_LIGHT
    from .geometry import LayerSpec
    from .materials import Material

    if isinstance(layer_or_material, Material):
        mat = layer_or_material
        return rayleigh_basis(mat.eps(xi), mat.mu(xi), kt, q, layer_key=layer_key)
    layer: LayerSpec = layer_or_material
    if layer.is_homogeneous:
        mat = layer.background
        return rayleigh_basis(mat.eps(xi), mat.mu(xi), kt, q, layer_key=layer_key)
    blocks = fourier_blocks(layer, cell, xi, kt.order)
    H = assemble_waveguide_matrix(blocks, kt, q)
    return solve_modes(H, layer_key=layer_key, robust=robust_eig)


def stack_scattering(stack: LayerStack, kt: TransverseWavevector, xi: float,
                     gap_basis: ModalBasis | None = None) -> StackScattering:
    """Full stack S-matrix seen from the incident (gap-side) half-space."""
    if gap_basis is None:
        gap_basis = layer_basis(stack.incident_halfspace, stack.cell, kt, xi,
                                layer_key="incident")
    acc = identity_scattering(gap_basis.D)
    prev = gap_basis
    prev_h = 0.0
    media = [(ly, ly.thickness, f"layer{i}") for i, ly in enumerate(stack.layers)]
    media.append((stack.exit_halfspace, 0.0, "exit"))
    for medium, h, key in media:
        nxt = layer_basis(medium, stack.cell, kt, xi, layer_key=key)
        t = interface_transfer(prev, nxt)
        sigma = interface_smatrix(t)
        s = layer_smatrix(sigma, prev, prev_h)
        acc = star_compose(acc, s)
        prev, prev_h = nxt, h
    return acc


def gap_side_reflection(bases_with_thickness) -> np.ndarray:
    """Reflection seen from the first basis of a (basis, thickness) chain.

    Same recursion as stack_scattering, with two shortcuts: the identity
    seed makes the first composition trivial, and only the sigma21 block of
    the terminating interface feeds the reflection.
    """
    seq = list(bases_with_thickness)
    prev, prev_h = seq[0]
    acc = None
    for i, (nxt, h) in enumerate(seq[1:]):
        t = interface_transfer(prev, nxt)
        last = i == len(seq) - 2
        if last:
            lu_piv = _guarded_lu(t.t22, SingularT22, "t22 in interface S-matrix")
            sigma21 = -sla.lu_solve(lu_piv, t.t21, check_finite=False)
            if prev_h > 0.0:
                decay = prev.decay(prev_h)
                sigma21 = decay[:, None] * sigma21 * decay[None, :]
            if acc is None:
                return sigma21
            resolvent = np.eye(acc.s11.shape[0]) - acc.s12 @ sigma21
            lu_piv = _guarded_lu(resolvent, ResonantInversion,
                                 "(1 - s21*Sigma12) in star product")
            U = sla.lu_solve(lu_piv, acc.s11, check_finite=False)
            return acc.s21 + acc.s22 @ (sigma21 @ U)
        s = layer_smatrix(interface_smatrix(t), prev, prev_h)
        acc = s if acc is None else star_compose(acc, s)
        prev, prev_h = nxt, h
    raise ValueError("need at least two media to form an interface")


def stack_reflection(stack: LayerStack, kt: TransverseWavevector, xi: float,
                     order: TruncationOrder | None = None,
                     gap_basis: ModalBasis | None = None,
                     robust_eig: bool = False) -> np.ndarray:
    """Gap-side reflection matrix of a stack, in the gap Rayleigh basis.

    Index ordering is the public contract: row/column
    ((n+N)*(2M+1) + (m+M))*2 + pol with pol in {s=0, p=1}.
    """
    if order is not None and order.num_channels != kt.order.num_channels:
        raise ValueError("kt was built for a different truncation order")
    if gap_basis is None:
        gap_basis = layer_basis(stack.incident_halfspace, stack.cell, kt, xi,
                                layer_key="incident")
    chain = [(gap_basis, 0.0)]
    chain += [(layer_basis(ly, stack.cell, kt, xi, layer_key=f"layer{i}",
                           robust_eig=robust_eig), ly.thickness)
              for i, ly in enumerate(stack.layers)]
    chain.append((layer_basis(stack.exit_halfspace, stack.cell, kt, xi,
                              layer_key="exit"), 0.0))
    return gap_side_reflection(chain)
