"""Layer eigenmodes at imaginary frequency.

The transverse Maxwell equations in a z-invariant patterned layer reduce, in
the Fourier basis, to a first-order system on F = (F_E; F_H) with a
block-anti-diagonal matrix H = [[0, H_H], [H_E, 0]]. At imaginary frequency
xi > 0 (k0^2 = -(xi/c)^2) H is real and its eigenvalues come in pairs
+-q*kappa_nu with q = xi/c and real decay constants kappa_nu > 0: the mode
z-profiles are the real exponentials exp(-+kappa_nu z). We solve the reduced
problem

    (H_H @ H_E) Ye_nu = (q*kappa_nu)**2 Ye_nu

and recover the magnetic block Yh_nu = H_E @ Ye_nu / (q*kappa_nu). Forward
(decaying toward +z) columns are (Ye; -Yh), backward columns (Ye; +Yh). In
the conventional bookkeeping gamma_nu = i*kappa_nu/q, so that the layer
propagation factor exp(i k0 gamma h) equals exp(-(xi/c)|gamma| h) =
exp(-kappa h) <= 1; we simply store kappa directly.

The duals (left eigenvectors) follow from the shared-E pair structure: with
Y = [[Ye, Ye], [Yh, -Yh]] one has Y^-1 = 0.5*[[Ye^-1, Yh^-1],
[Ye^-1, -Yh^-1]], so one D x D factorization per field block replaces a
2D x 2D inversion. A homogeneous layer has the closed-form plane-wave
(Rayleigh) basis: per diffraction channel kappa = sqrt(eps*mu*q^2 + K^2)
twice (s and p), with polarization vectors built from e_s = K x z / |K x z|.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg as sla
from scipy.linalg import lapack as _lapack

from .errors import BasisMismatch, DegenerateEigenbasis, DimensionMismatch
from .geometry import FourierBlocks, TruncationOrder, UnitCell

__all__ = [
    "TransverseWavevector",
    "WaveguideMatrix",
    "ModalBasis",
    "assemble_waveguide_matrix",
    "solve_modes",
    "rayleigh_basis",
    "channel_kappas",
]

_COND_LIMIT = 1e12
_PURITY_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class TransverseWavevector:
    """Bloch vector in the first Brillouin zone plus per-channel offsets.

    alphas[c] = kx + 2*pi*n_c/Lx and betas[c] = ky + 2*pi*m_c/Ly follow the
    channel flattening of TruncationOrder (n-major, then m).
    """

    kx: float
    ky: float
    alphas: np.ndarray
    betas: np.ndarray
    order: TruncationOrder

    @classmethod
    def build(cls, kx, ky, cell: UnitCell, order: TruncationOrder):
        bx, by = np.pi / cell.Lx, np.pi / cell.Ly
        if not (-bx <= kx <= bx and -by <= ky <= by):
            raise ValueError(
                f"(kx, ky) = ({kx}, {ky}) outside the first Brillouin zone")
        n, m = order.channel_orders()
        alphas = kx + 2.0 * np.pi * n / cell.Lx
        betas = ky + 2.0 * np.pi * m / cell.Ly
        return cls(kx=kx, ky=ky, alphas=alphas, betas=betas, order=order)


def channel_kappas(eps_c: float, mu_c: float, kt: TransverseWavevector, q: float):
    """Decay constants sqrt(eps*mu*q^2 + alpha^2 + beta^2) per channel."""
    return np.sqrt(eps_c * mu_c * q * q + kt.alphas**2 + kt.betas**2)


@dataclass(frozen=True, eq=False)
class WaveguideMatrix:
    """Off-diagonal blocks of H at one (xi, k_parallel); both are real D x D."""

    h_e: np.ndarray
    h_h: np.ndarray
    q: float  # xi / c, rad/m
    kt: TransverseWavevector

    @property
    def full(self):
        """The 2D x 2D block-anti-diagonal matrix [[0, H_H], [H_E, 0]]."""
        D = self.h_e.shape[0]
        H = np.zeros((2 * D, 2 * D))
        H[:D, D:] = self.h_h
        H[D:, :D] = self.h_e
        return H


def assemble_waveguide_matrix(blocks: FourierBlocks, kt: TransverseWavevector,
                              q: float) -> WaveguideMatrix:
    """Build H_E and H_H from the layer's Fourier blocks.

    The k0^2 entries carry their imaginary-frequency value -q^2, which makes
    both blocks real.
    """
    if blocks.order.num_channels != kt.order.num_channels:
        raise DimensionMismatch("Fourier blocks and wavevector disagree on order")
    a = kt.alphas
    b = kt.betas
    k0sq = -q * q
    chi, zeta, eps, mu = blocks.chi, blocks.zeta, blocks.eps, blocks.mu

    def sandwich(mat, left, right):
        return left[:, None] * mat * right[None, :]

    h_h = np.block([
        [sandwich(chi, a, b), -sandwich(chi, a, a) + k0sq * mu],
        [sandwich(chi, b, b) - k0sq * mu, -sandwich(chi, b, a)],
    ])
    h_e = np.block([
        [-sandwich(zeta, a, b), sandwich(zeta, a, a) - k0sq * eps],
        [-sandwich(zeta, b, b) + k0sq * eps, sandwich(zeta, b, a)],
    ])
    return WaveguideMatrix(h_e=h_e, h_h=h_h, q=q, kt=kt)


class _Inverter:
    """Apply the inverse of a square matrix, guarding the condition number."""

    def __init__(self, mat, what):
        self._lu, self._piv = sla.lu_factor(mat, check_finite=False)
        anorm = np.abs(mat).sum(axis=0).max()
        rcond = _lapack.dgecon(self._lu, anorm, norm="1")[0]
        if not np.isfinite(rcond) or rcond < 1.0 / _COND_LIMIT:
            raise DegenerateEigenbasis(
                f"{what} matrix has condition number above {_COND_LIMIT:g}")

    def solve(self, rhs):
        return sla.lu_solve((self._lu, self._piv), rhs, check_finite=False)


class _ExplicitInverter:
    def __init__(self, inv):
        self._inv = inv

    def solve(self, rhs):
        return self._inv @ rhs


@dataclass(frozen=True, eq=False)
class ModalBasis:
    """Eigenmode basis of one layer at one (xi, k_parallel).

    kappas are the D forward decay constants (rad/m); ye / yh are the shared
    electric and magnetic field blocks, so the full right-eigenvector matrix
    is [[ye, ye], [yh, -yh]] with columns [backward | forward].
    """

    kappas: np.ndarray
    ye: np.ndarray
    yh: np.ndarray
    q: float
    kt: TransverseWavevector
    layer_key: object = None
    _inv_e: object = None
    _inv_h: object = None

    @property
    def order(self):
        return self.kt.order

    @property
    def D(self):
        return self.ye.shape[0]

    @property
    def gammas(self):
        """Dimensionless propagation constants i*kappa/q (forward set)."""
        return 1j * self.kappas / self.q

    def decay(self, h: float):
        """Per-mode propagation factors exp(-kappa*h), all in (0, 1]."""
        return np.exp(-self.kappas * h)

    def solve_e(self, rhs):
        return self._ie.solve(rhs)

    def solve_h(self, rhs):
        return self._ih.solve(rhs)

    @cached_property
    def _ie(self):
        return self._inv_e if self._inv_e is not None else _Inverter(self.ye, "Ye")

    @cached_property
    def _ih(self):
        return self._inv_h if self._inv_h is not None else _Inverter(self.yh, "Yh")

    @property
    def right_vectors(self):
        """2D x 2D eigenvector matrix, columns [backward | forward]."""
        return np.block([[self.ye, self.ye], [self.yh, -self.yh]])

    @property
    def left_inverse(self):
        """Rows are the bi-orthogonal duals of right_vectors' columns."""
        D = self.D
        eye = np.eye(D)
        inv_e = self.solve_e(eye)
        inv_h = self.solve_h(eye)
        return 0.5 * np.block([[inv_e, inv_h], [inv_e, -inv_h]])

    def same_grid(self, other: "ModalBasis") -> bool:
        return (self.D == other.D and self.q == other.q
                and self.kt.kx == other.kt.kx and self.kt.ky == other.kt.ky)


def orthonormalize_degenerate(lam: np.ndarray, vec: np.ndarray,
                              rel_tol: float = 1e-11) -> np.ndarray:
    """Replace eigenvector columns of (near-)degenerate clusters by an
    orthonormal basis of their span.

    Exact symmetry degeneracies (e.g. +-n channels at a high-symmetry Bloch
    point) leave the individual eigenvectors ill-determined, and LAPACK may
    return nearly parallel columns; the invariant subspace itself is well
    conditioned. Clustering at a tight relative tolerance leaves genuinely
    distinct modes untouched.
    """
    order = np.argsort(lam, kind="stable")
    scale = np.abs(lam).max()
    i = 0
    while i < lam.size:
        j = i + 1
        while j < lam.size and abs(lam[order[j]] - lam[order[i]]) <= rel_tol * scale:
            j += 1
        if j - i > 1:
            cols = order[i:j]
            Q, _ = np.linalg.qr(vec[:, cols])
            vec[:, cols] = Q
        i = j
    return vec


def real_eigenpairs(W: np.ndarray, context: str):
    """Real eigenvalues and a real eigenbasis of a real matrix.

    At imaginary frequency the spectrum is real and positive; degenerate
    eigenvalues (s/p pairs of weakly modulated layers) may round-split into
    conjugate pairs with imaginary parts at machine-noise level. For such a
    pair the returned columns are (Re v, Im v), which span the same real
    invariant subspace. Genuinely complex spectra are rejected.
    """
    lam, vec = sla.eig(W, check_finite=False)
    scale = np.abs(lam).max()
    bad = np.abs(lam.imag) > np.maximum(_PURITY_TOL * np.abs(lam), 1e-13 * scale)
    if bad.any() or lam.real.min() <= 0.0:
        raise DegenerateEigenbasis(
            f"{context}: eigenvalues are not real positive at imaginary "
            "frequency")
    complex_cols = lam.imag != 0.0
    out = vec.real.copy()
    j = 0
    while j < lam.size:
        if complex_cols[j]:
            out[:, j + 1] = vec[:, j].imag
            j += 2
        else:
            j += 1
    return lam.real, orthonormalize_degenerate(lam.real,
                                               np.ascontiguousarray(out))


def _solve_modes_full(H: WaveguideMatrix, layer_key=None) -> ModalBasis:
    """Fallback eigensolve on the full 2D x 2D matrix.

    The reduced problem squares the condition number; at very small xi
    (deep extrapolation samples) its lowest eigenvalues sink below the
    round-off floor. The full matrix has eigenvalues -+q*kappa whose spread
    is only the kappa ratio, so it stays resolvable. Forward modes are the
    negative-real half of the spectrum; the pairing structure rebuilds the
    backward set exactly.
    """
    q = H.q
    D = H.h_e.shape[0]
    lam, vec = sla.eig(H.full, check_finite=False)
    scale = np.abs(lam).max()
    # clustered deep-evanescent eigenvalues round-split into conjugate pairs
    # with relative imaginary parts up to ~1e-3 at the deepest frequencies;
    # realification keeps their invariant subspace, and such modes decay out
    # of the layer anyway. Reject only genuinely complex spectra.
    bad = np.abs(lam.imag) > np.maximum(2e-3 * np.abs(lam), 1e-6 * scale)
    if bad.any():
        raise DegenerateEigenbasis(
            "waveguide eigenproblem: complex eigenvalues at imaginary frequency")
    # realify round-split conjugate pairs: columns (Re v, Im v)
    out = vec.real.copy()
    j = 0
    while j < lam.size:
        if lam.imag[j] != 0.0:
            out[:, j + 1] = vec[:, j].imag
            j += 2
        else:
            j += 1
    lam = lam.real
    fwd = np.flatnonzero(lam < 0.0)
    if fwd.size != D:
        raise DegenerateEigenbasis(
            "waveguide eigenproblem: spectrum does not split into +- pairs")
    kappas = -lam[fwd] / q
    idx = np.argsort(kappas, kind="stable")
    kappas = kappas[idx]
    cols = fwd[idx]
    fwd_vecs = orthonormalize_degenerate(-kappas * q, out[:, cols].copy())
    ye = fwd_vecs[:D]
    yh = -fwd_vecs[D:]
    norms = np.sqrt((ye * ye).sum(axis=0) + (yh * yh).sum(axis=0))
    return ModalBasis(kappas=kappas, ye=ye / norms, yh=yh / norms, q=q,
                      kt=H.kt, layer_key=layer_key)


def solve_modes(H: WaveguideMatrix, layer_key=None,
                robust: bool = False) -> ModalBasis:
    """Diagonalize the reduced problem and build the paired mode basis.

    The reduced eigenvalues (q*kappa)^2 of H_H @ H_E must be real and
    positive at imaginary frequency; residual imaginary parts beyond the
    purity tolerance signal a truncation/geometry pathology. ``robust``
    selects the full-matrix solve directly (the squared problem silently
    loses its smallest eigenvalues to round-off at very small xi, where
    callers doing zero-frequency extrapolation know to ask for it).
    """
    if robust:
        return _solve_modes_full(H, layer_key=layer_key)
    q = H.q
    W = H.h_h @ H.h_e
    try:
        lam, vec = real_eigenpairs(W, "waveguide eigenproblem")
    except DegenerateEigenbasis:
        return _solve_modes_full(H, layer_key=layer_key)

    kappas = np.sqrt(lam) / q
    idx = np.argsort(kappas, kind="stable")
    kappas = kappas[idx]
    ye = vec[:, idx]
    yh = (H.h_e @ ye) / (q * kappas)[None, :]
    norms = np.sqrt((ye * ye).sum(axis=0) + (yh * yh).sum(axis=0))
    ye /= norms[None, :]
    yh /= norms[None, :]
    return ModalBasis(kappas=kappas, ye=ye, yh=yh, q=q, kt=H.kt,
                      layer_key=layer_key)


def rayleigh_basis(eps_c: float, mu_c: float, kt: TransverseWavevector,
                   q: float, layer_key=None) -> ModalBasis:
    """Closed-form plane-wave basis of a homogeneous medium.

    Per channel kappa = sqrt(eps*mu*q^2 + K^2) carries an s column
    (E along e_s = K x z/|K x z|) and a p column (H along e_s), in the
    (channel, polarization) ordering used by every reflection matrix. The
    degenerate K = 0 channel uses e_s = y, e_p = x. Signs match the pairing
    convention of solve_modes, so the two bases are interchangeable.
    """
    order = kt.order
    C = order.num_channels
    a, b = kt.alphas, kt.betas
    K = np.hypot(a, b)
    kap = np.sqrt(eps_c * mu_c * q * q + K * K)

    Ksafe = np.where(K > 0, K, 1.0)
    # e_s = K x z / |K x z| = (b, -a)/K; the K = 0 channel uses e_s = +y.
    esx = np.where(K > 0, b / Ksafe, 0.0)
    esy = np.where(K > 0, -a / Ksafe, 1.0)
    zx_esx, zx_esy = -esy, esx  # z x e_s

    cols = np.arange(C)
    ye = np.zeros((2 * C, 2 * C))
    yh = np.zeros((2 * C, 2 * C))
    # s columns: Ye = e_s, Yh = -(kappa/(q*mu)) z x e_s
    fac_s = kap / (q * mu_c)
    ye[cols, 2 * cols] = esx
    ye[C + cols, 2 * cols] = esy
    yh[cols, 2 * cols] = -fac_s * zx_esx
    yh[C + cols, 2 * cols] = -fac_s * zx_esy
    # p columns: Yh = -e_s, Ye = (kappa/(q*eps)) z x Yh
    fac_p = kap / (q * eps_c)
    yh[cols, 2 * cols + 1] = -esx
    yh[C + cols, 2 * cols + 1] = -esy
    ye[cols, 2 * cols + 1] = -fac_p * zx_esx
    ye[C + cols, 2 * cols + 1] = -fac_p * zx_esy

    # Analytic inverses: Ye = [e_s | f_p * zhat x e_s] per 2x2 channel block.
    inv_ye = np.zeros((2 * C, 2 * C))
    inv_yh = np.zeros((2 * C, 2 * C))
    # rows of inv: dual vectors; for Ye: row_s = e_s, row_p = (z x e_s)/f_p
    inv_ye[2 * cols, cols] = esx
    inv_ye[2 * cols, C + cols] = esy
    inv_ye[2 * cols + 1, cols] = -zx_esx / fac_p
    inv_ye[2 * cols + 1, C + cols] = -zx_esy / fac_p
    # for Yh: columns are (-f_s z x e_s | -e_s)
    inv_yh[2 * cols, cols] = -zx_esx / fac_s
    inv_yh[2 * cols, C + cols] = -zx_esy / fac_s
    inv_yh[2 * cols + 1, cols] = -esx
    inv_yh[2 * cols + 1, C + cols] = -esy

    kappas = np.repeat(kap, 2)
    return ModalBasis(kappas=kappas, ye=ye, yh=yh, q=q, kt=kt,
                      layer_key=layer_key,
                      _inv_e=_ExplicitInverter(inv_ye),
                      _inv_h=_ExplicitInverter(inv_yh))


def check_same_grid(inner: ModalBasis, outer: ModalBasis):
    if not inner.same_grid(outer):
        raise BasisMismatch("modal bases do not share (xi, k_parallel, order)")
