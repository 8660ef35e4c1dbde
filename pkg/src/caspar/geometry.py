"""Periodic unit cell, multilayer stack, and Fourier factorization.

A layer is a piecewise-constant pattern: a background material plus
non-overlapping axis-aligned rectangular inclusions. For such cells every
Fourier coefficient of eps, mu and their pointwise reciprocals has a closed
form (product of sinc-type factors), so no numerical quadrature enters the
main path. The shifted-index (block-Toeplitz) matrices built here feed the
modal solver; plain Laurent-rule factorization is used throughout.

Lateral registration convention: inclusions should be placed so the cell has
inversion symmetry (e.g. centered strips/pillars), which makes all
coefficients real. The solver works at imaginary frequency with real
arithmetic and rejects cells whose coefficient matrices come out complex.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, UnknownMaterial
from .materials import Material

__all__ = [
    "UnitCell",
    "Inclusion",
    "LayerSpec",
    "LayerStack",
    "TruncationOrder",
    "FourierBlocks",
    "fourier_coefficient",
    "fourier_blocks",
]

_IMAG_TOL = 1e-12


@dataclass(frozen=True)
class UnitCell:
    """Rectangular periods Lx, Ly in meters; 1D gratings use Ly = Lx."""

    Lx: float
    Ly: float

    def __post_init__(self):
        if not (self.Lx > 0 and self.Ly > 0):
            raise ValueError("unit cell periods must be positive")


@dataclass(frozen=True)
class Inclusion:
    """Axis-aligned rectangle of a different material inside a layer.

    (x0, y0) is the lower corner, (wx, wy) the widths, all in meters.
    """

    material: Material
    x0: float
    y0: float
    wx: float
    wy: float


@dataclass(frozen=True)
class LayerSpec:
    """One z-invariant slab: thickness, background and inclusions."""

    thickness: float
    background: Material
    inclusions: tuple[Inclusion, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "inclusions", tuple(self.inclusions))
        if self.thickness < 0 or not math.isfinite(self.thickness):
            raise ValueError("layer thickness must be finite and >= 0")

    @property
    def is_homogeneous(self):
        return len(self.inclusions) == 0

    def validate_in_cell(self, cell: UnitCell):
        problems = []
        for inc in self.inclusions:
            if not (0 <= inc.x0 and inc.x0 + inc.wx <= cell.Lx + 1e-15 * cell.Lx):
                problems.append(f"inclusion x-range [{inc.x0}, {inc.x0 + inc.wx}] "
                                f"outside cell [0, {cell.Lx}]")
            if not (0 <= inc.y0 and inc.y0 + inc.wy <= cell.Ly + 1e-15 * cell.Ly):
                problems.append(f"inclusion y-range [{inc.y0}, {inc.y0 + inc.wy}] "
                                f"outside cell [0, {cell.Ly}]")
        return problems


@dataclass(frozen=True)
class LayerStack:
    """Half-space / layers / half-space description of one body.

    Medium 0 (the incident half-space, z > 0) faces the vacuum gap; the
    layers follow in physical order going away from the gap, and the exit
    half-space terminates the body. Both half-spaces are homogeneous.
    """

    cell: UnitCell
    incident_halfspace: Material
    layers: tuple[LayerSpec, ...]
    exit_halfspace: Material

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))

    def validate(self):
        problems = []
        for i, layer in enumerate(self.layers):
            for p in layer.validate_in_cell(self.cell):
                problems.append(f"layer {i}: {p}")
        return problems

    def fingerprint(self):
        """Hashable description used to key reflection caches."""
        def mat_key(m):
            return (m.label, repr(m.permittivity), m.permeability.mu_r)

        layers = tuple(
            (ly.thickness, mat_key(ly.background),
             tuple((mat_key(i.material), i.x0, i.y0, i.wx, i.wy)
                   for i in ly.inclusions))
            for ly in self.layers)
        return (self.cell.Lx, self.cell.Ly, mat_key(self.incident_halfspace),
                layers, mat_key(self.exit_halfspace))


@dataclass(frozen=True)
class TruncationOrder:
    """Retained diffraction orders: n in [-N, N], m in [-M, M]."""

    N: int
    M: int = -1

    def __post_init__(self):
        if self.M < 0:
            object.__setattr__(self, "M", self.N)
        if self.N < 0:
            raise ValueError("N must be >= 0")

    @property
    def nx(self):
        return 2 * self.N + 1

    @property
    def ny(self):
        return 2 * self.M + 1

    @property
    def num_channels(self):
        """(2N+1)(2M+1) diffraction channels."""
        return self.nx * self.ny

    @property
    def D(self):
        """2*(2N+1)(2M+1); reflection matrices are D x D."""
        return 2 * self.num_channels

    def channel_orders(self):
        """(C,) arrays of n and m per flattened channel, n-major."""
        n = np.repeat(np.arange(-self.N, self.N + 1), self.ny)
        m = np.tile(np.arange(-self.M, self.M + 1), self.nx)
        return n, m


@dataclass(frozen=True, eq=False)
class FourierBlocks:
    """Shifted-index coefficient matrices of eps, mu, chi=1/eps, zeta=1/mu.

    Entry [(n,m), (n',m')] holds the cell Fourier coefficient at
    (n-n', m-m'); each matrix is (C, C) with C = (2N+1)(2M+1).
    """

    eps: np.ndarray
    mu: np.ndarray
    chi: np.ndarray
    zeta: np.ndarray
    order: TruncationOrder

    @property
    def is_diagonal(self):
        off = self.eps - np.diag(np.diag(self.eps))
        return not np.any(off)


_WHICH_FUNCS = {
    "eps": lambda mat, xi: mat.eps(xi),
    "mu": lambda mat, xi: mat.mu(xi),
    "chi": lambda mat, xi: 1.0 / mat.eps(xi),
    "zeta": lambda mat, xi: 1.0 / mat.mu(xi),
}


def _interval_factor(n: int, x0: float, w: float, L: float) -> complex:
    """(1/L) * integral of exp(-i 2 pi n x / L) over [x0, x0 + w]."""
    if n == 0:
        return w / L
    k = 2.0 * math.pi * n / L
    xc = x0 + 0.5 * w
    return (math.sin(0.5 * k * w) * 2.0 / (k * L)) * cmath.exp(-1j * k * xc)


def cell_coefficient(cell: UnitCell, bg_value: float, patches, n: int, m: int) -> complex:
    """Fourier coefficient at (n, m) of a piecewise-constant cell function.

    ``patches`` is an iterable of (Inclusion-like, value) pairs; each patch
    contributes (value - bg_value) times the product of two interval
    factors. Exact analytics, no quadrature.
    """
    coeff = complex(bg_value) if (n == 0 and m == 0) else 0.0j
    for patch, value in patches:
        coeff += (value - bg_value) * (
            _interval_factor(n, patch.x0, patch.wx, cell.Lx)
            * _interval_factor(m, patch.y0, patch.wy, cell.Ly))
    return coeff


def _layer_patches(layer: LayerSpec, func, xi):
    try:
        bg = func(layer.background, xi)
        patches = [(inc, func(inc.material, xi)) for inc in layer.inclusions]
    except AttributeError as exc:
        raise UnknownMaterial(str(exc)) from exc
    return bg, patches


def fourier_coefficient(layer: LayerSpec, cell: UnitCell, xi: float,
                        n: int, m: int, which: str = "eps") -> float:
    """Real Fourier coefficient of eps/mu/chi/zeta at shift (n, m).

    The complex closed form is evaluated and the imaginary residue checked
    against 1e-12 of the coefficient scale; asymmetric cells that produce
    genuinely complex coefficients are rejected.
    """
    func = _WHICH_FUNCS[which]
    bg, patches = _layer_patches(layer, func, xi)
    c = cell_coefficient(cell, bg, patches, n, m)
    scale = max(abs(bg), 1.0)
    if abs(c.imag) > _IMAG_TOL * max(abs(c.real), scale):
        raise ValueError(
            f"complex Fourier coefficient at ({n},{m}): {c}; "
            "place inclusions symmetrically in the cell")
    return c.real


def _coefficient_table(layer, cell, xi, which, order):
    """Coefficients on the doubled grid dn in [-2N, 2N], dm in [-2M, 2M]."""
    func = _WHICH_FUNCS[which]
    bg, patches = _layer_patches(layer, func, xi)
    N2, M2 = 2 * order.N, 2 * order.M
    table = np.empty((2 * N2 + 1, 2 * M2 + 1))
    for i, dn in enumerate(range(-N2, N2 + 1)):
        for j, dm in enumerate(range(-M2, M2 + 1)):
            c = cell_coefficient(cell, bg, patches, dn, dm)
            scale = max(abs(bg), 1.0)
            if abs(c.imag) > _IMAG_TOL * max(abs(c.real), scale):
                raise ValueError(
                    f"complex Fourier coefficient at ({dn},{dm}): {c}; "
                    "place inclusions symmetrically in the cell")
            table[i, j] = c.real
    return table


def toeplitz_from_table(table: np.ndarray, order: TruncationOrder) -> np.ndarray:
    """Assemble the (C, C) shifted-index matrix from a doubled-grid table."""
    n, m = order.channel_orders()
    dn = n[:, None] - n[None, :] + 2 * order.N
    dm = m[:, None] - m[None, :] + 2 * order.M
    return table[dn, dm]


def fourier_blocks(layer: LayerSpec, cell: UnitCell, xi: float,
                   order: TruncationOrder) -> FourierBlocks:
    """All four block-Toeplitz matrices of a layer at imaginary frequency xi."""
    out = {}
    for which in ("eps", "mu", "chi", "zeta"):
        if layer.is_homogeneous:
            func = _WHICH_FUNCS[which]
            value = func(layer.background, xi)
            out[which] = value * np.eye(order.num_channels)
        else:
            table = _coefficient_table(layer, cell, xi, which, order)
            out[which] = toeplitz_from_table(table, order)
    return FourierBlocks(order=order, **out)


def check_blocks_order(blocks: FourierBlocks, order: TruncationOrder):
    if blocks.eps.shape != (order.num_channels, order.num_channels):
        raise DimensionMismatch(
            f"blocks built for C={blocks.eps.shape[0]}, expected "
            f"C={order.num_channels}")
