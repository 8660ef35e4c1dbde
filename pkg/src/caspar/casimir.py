"""Free energy, forces, and the proximity-force approximation.

The free energy per unit area of two periodic bodies across a homogeneous
gap is a primed Matsubara sum of Brillouin-zone integrals of
log det(1 - R1 X R2 X), with R1, R2 the gap-side reflection operators of
the two stacks (each described with the gap as its incident half-space) and
X the diagonal one-way translation factor exp(-a*kappa_c) per diffraction
channel. The l = 0 term is computed on the TM sector by the zero-frequency
conductivity solver (weight 1/2); the TE sector vanishes there.

Work is organized as independent (l, node) items; results are binned by
item index and reduced with compensated summation in a fixed order, so the
output is bit-identical for any worker count.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .constants import C_LIGHT, K_BOLTZMANN
from .errors import NonConvergedTail, SpectralRadiusExceeded, StepTooCoarse
from .geometry import LayerStack, TruncationOrder
from .grids import BZQuadrature, MatsubaraGrid
from .materials import Material
from .modal import TransverseWavevector, channel_kappas, rayleigh_basis
from .smatrix import stack_reflection
from . import zerofreq

__all__ = [
    "TranslationFactor",
    "FreeEnergyResult",
    "round_trip",
    "log_det_one_minus",
    "free_energy_per_area",
    "ForceCurve",
    "force_and_gradient",
    "pfa_force",
    "pfa_force_gradient",
]

_TAIL_TOL = 1e-4
_HARD_L_CAP = 4096


@dataclass(frozen=True, eq=False)
class TranslationFactor:
    """Diagonal one-way gap translation exp(-a*kappa) per matrix slot."""

    kappas: np.ndarray
    a: float

    @property
    def factors(self):
        return np.exp(-self.a * self.kappas)

    @classmethod
    def for_gap(cls, gap: Material, kt: TransverseWavevector, xi: float, a: float):
        """Factors for the full (channel, s/p) ordering at xi > 0."""
        q = xi / C_LIGHT
        kap = channel_kappas(gap.eps(xi), gap.mu(xi), kt, q)
        return cls(kappas=np.repeat(kap, 2), a=a)

    @classmethod
    def for_tm_zero(cls, kt: TransverseWavevector, a: float):
        """TM-sector factors at xi = 0, kappa = |K_nm| per channel."""
        return cls(kappas=np.hypot(kt.alphas, kt.betas), a=a)


def round_trip(R1: np.ndarray, R2: np.ndarray, X: TranslationFactor) -> np.ndarray:
    """M = R1 @ diag(x) @ R2 @ diag(x) with x the translation factors."""
    x = X.factors
    if R1.shape[1] != x.size or R2.shape[1] != x.size:
        from .errors import DimensionMismatch
        raise DimensionMismatch("round-trip operands disagree on index layout")
    return (R1 * x[None, :]) @ (R2 * x[None, :])


def log_det_one_minus(M: np.ndarray, method: str = "lu") -> float:
    """log det(1 - M) for a contraction M (spectral radius < 1).

    The default route is an LU factorization of 1 - M; method="eig" sums
    log(1 - lambda) over the spectrum as a cross-check.
    """
    eye = np.eye(M.shape[0])
    if method == "eig":
        lam = np.linalg.eigvals(M)
        if np.abs(lam).max() >= 1.0:
            raise SpectralRadiusExceeded(
                f"round-trip spectral radius {np.abs(lam).max():.6f} >= 1")
        val = np.sum(np.log1p(-lam))
        return float(val.real)
    sign, logabs = np.linalg.slogdet(eye - M)
    if sign <= 0:
        raise SpectralRadiusExceeded(
            "det(1 - M) is not positive; round-trip operator is not a contraction")
    return float(logabs)


@dataclass(frozen=True, eq=False)
class FreeEnergyResult:
    """Free energy per unit area plus convergence diagnostics."""

    separations: np.ndarray         # (n_a,) meters
    values: np.ndarray              # (n_a,) J/m^2
    per_l: np.ndarray               # (n_l, n_a) contributions, J/m^2
    tail_ratio: np.ndarray          # (n_a,) |last l term| / |sum|
    l_max: int
    nodes_per_dim: int
    zero_freq_mode: str
    l0_method_delta: float | None = None  # direct vs extrapolated l=0 integrand

    @property
    def value(self):
        return float(self.values[0]) if self.values.size == 1 else self.values


@dataclass(frozen=True, eq=False)
class _Job:
    stack1: LayerStack
    stack2: LayerStack
    gap: Material
    separations: tuple
    order: TruncationOrder
    grid: MatsubaraGrid
    quad_kx: np.ndarray
    quad_ky: np.ndarray
    zero_freq: str
    sigma_floor: float | None


def _finite_item(job: _Job, l: int, j: int):
    """log det integrand of one (l > 0, node) pair for every separation."""
    xi = job.grid.xi(l)
    kt = TransverseWavevector.build(job.quad_kx[j], job.quad_ky[j],
                                    job.stack1.cell, job.order)
    q = xi / C_LIGHT
    gap_basis = rayleigh_basis(job.gap.eps(xi), job.gap.mu(xi), kt, q,
                               layer_key="gap")
    R1 = stack_reflection(job.stack1, kt, xi, gap_basis=gap_basis)
    R2 = stack_reflection(job.stack2, kt, xi, gap_basis=gap_basis)
    kap = np.repeat(channel_kappas(job.gap.eps(xi), job.gap.mu(xi), kt, q), 2)
    out = np.empty(len(job.separations))
    for ia, a in enumerate(job.separations):
        x = np.exp(-a * kap)
        M = (R1 * x[None, :]) @ (R2 * x[None, :])
        out[ia] = log_det_one_minus(M)
    return out


def _zero_item_direct(job: _Job, j: int):
    kt = TransverseWavevector.build(job.quad_kx[j], job.quad_ky[j],
                                    job.stack1.cell, job.order)
    f1 = job.sigma_floor or zerofreq.stack_sigma_floor(job.stack1)
    f2 = job.sigma_floor or zerofreq.stack_sigma_floor(job.stack2)
    R1 = zerofreq.zero_freq_reflection(job.stack1, kt, sigma_floor=f1)
    R2 = zerofreq.zero_freq_reflection(job.stack2, kt, sigma_floor=f2)
    K = np.hypot(kt.alphas, kt.betas)
    out = np.empty(len(job.separations))
    for ia, a in enumerate(job.separations):
        x = np.exp(-a * K)
        out[ia] = log_det_one_minus((R1 * x[None, :]) @ (R2 * x[None, :]))
    return out


def _zero_item_extrapolate(job: _Job, j: int):
    kt = TransverseWavevector.build(job.quad_kx[j], job.quad_ky[j],
                                    job.stack1.cell, job.order)
    xi1 = job.grid.xi(1)
    R1, _ = zerofreq.small_xi_extrapolation(
        job.stack1, kt, zerofreq.default_xi_samples(job.stack1, xi1, kt))
    R2, _ = zerofreq.small_xi_extrapolation(
        job.stack2, kt, zerofreq.default_xi_samples(job.stack2, xi1, kt))
    K = np.repeat(np.hypot(kt.alphas, kt.betas), 2)
    out = np.empty(len(job.separations))
    for ia, a in enumerate(job.separations):
        x = np.exp(-a * K)
        out[ia] = log_det_one_minus((R1 * x[None, :]) @ (R2 * x[None, :]))
    return out


def _zero_item(job: _Job, j: int):
    if job.zero_freq == "direct":
        return _zero_item_direct(job, j), None
    if job.zero_freq == "extrapolate":
        return _zero_item_extrapolate(job, j), None
    if job.zero_freq == "both":
        direct = _zero_item_direct(job, j)
        extrap = _zero_item_extrapolate(job, j)
        scale = max(np.abs(direct).max(), 1e-300)
        return direct, float(np.abs(direct - extrap).max() / scale)
    raise ValueError(f"unknown zero_freq mode {job.zero_freq!r}")


def _compute_item(job: _Job, item):
    kind, l, j = item
    if kind == "l0":
        vals, delta = _zero_item(job, j)
        return item, vals, delta
    return item, _finite_item(job, l, j), None


_WORKER_JOB = None


def _init_worker(job):
    global _WORKER_JOB
    _WORKER_JOB = job


def _run_item(item):
    return _compute_item(_WORKER_JOB, item)


def _map_items(job, items, workers):
    if workers <= 1:
        for item in items:
            yield _compute_item(job, item)
        return
    with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker,
                             initargs=(job,)) as pool:
        yield from pool.map(_run_item, items, chunksize=4)


def free_energy_per_area(stack1: LayerStack, stack2: LayerStack, gap: Material,
                         separations, order: TruncationOrder,
                         grid: MatsubaraGrid, quad: BZQuadrature,
                         workers: int = 1, zero_freq: str = "direct",
                         sigma_floor: float | None = None,
                         adaptive_matsubara: bool = False,
                         tail_tol: float = _TAIL_TOL,
                         raise_on_tail: bool = False,
                         progress=None) -> FreeEnergyResult:
    """Casimir free energy per unit area (J/m^2) for each separation.

    Both stacks must be described on the same unit cell with the gap as
    their incident half-space. Reflection operators are computed once per
    (l, node) item and reused across all separations; the reduction order
    is fixed (ascending l, then node index) with compensated summation.
    """
    if (stack1.cell.Lx != stack2.cell.Lx) or (stack1.cell.Ly != stack2.cell.Ly):
        raise ValueError("stacks must share the (reduced common) unit cell")
    if gap.sigma_dc() != 0.0:
        raise ValueError("gap medium must not have a zero-frequency pole")
    seps = np.atleast_1d(np.asarray(separations, dtype=float))
    if np.any(seps <= 0):
        raise ValueError("separations must be positive")

    kx, ky, w = quad.nodes()
    job = _Job(stack1=stack1, stack2=stack2, gap=gap,
               separations=tuple(seps), order=order, grid=grid,
               quad_kx=kx, quad_ky=ky, zero_freq=zero_freq,
               sigma_floor=sigma_floor)

    n_nodes = kx.size
    kbt = K_BOLTZMANN * grid.temperature
    measure = w / (2.0 * np.pi) ** 2

    def run_block(ls):
        items = [("l0", 0, j) if l == 0 else ("l", l, j)
                 for l in ls for j in range(n_nodes)]
        block = np.empty((len(ls), n_nodes, seps.size))
        deltas = []
        seen = set()
        for (kind, l, j), vals, delta in _map_items(job, items, workers):
            block[ls.index(l), j, :] = vals
            if delta is not None:
                deltas.append(delta)
            if progress is not None and l not in seen:
                seen.add(l)
                progress(l, ls[-1])
        return block, deltas

    ls = list(range(grid.l_max + 1))
    block, deltas = run_block(ls)
    per_l = [kbt * wl * np.array([math.fsum(measure * block[i, :, ia])
                                  for ia in range(seps.size)])
             for i, wl in enumerate(np.where(np.array(ls) == 0, 0.5, 1.0))]

    if adaptive_matsubara:
        l = grid.l_max
        while l < _HARD_L_CAP:
            total = np.array([math.fsum(p[ia] for p in per_l)
                              for ia in range(seps.size)])
            ratio = np.abs(per_l[-1]) / np.maximum(np.abs(total), 1e-300)
            if ratio.max() < tail_tol:
                break
            new_ls = list(range(l + 1, min(l + 9, _HARD_L_CAP + 1)))
            ext_block, _ = run_block(new_ls)
            for i in range(len(new_ls)):
                per_l.append(kbt * np.array([math.fsum(measure * ext_block[i, :, ia])
                                             for ia in range(seps.size)]))
            l = new_ls[-1]

    per_l = np.vstack(per_l)
    values = np.array([math.fsum(per_l[:, ia]) for ia in range(seps.size)])
    tail = np.abs(per_l[-1]) / np.maximum(np.abs(values), 1e-300)
    if raise_on_tail and tail.max() > tail_tol:
        raise NonConvergedTail(
            f"last Matsubara term is {tail.max():.2e} of the sum "
            f"(tolerance {tail_tol:g}); increase l_max or use "
            "adaptive_matsubara")
    l0_delta = max(deltas) if deltas else None
    return FreeEnergyResult(separations=seps, values=values, per_l=per_l,
                            tail_ratio=tail, l_max=per_l.shape[0] - 1,
                            nodes_per_dim=quad.nodes_per_dim,
                            zero_freq_mode=zero_freq,
                            l0_method_delta=l0_delta)


@dataclass(frozen=True, eq=False)
class ForceCurve:
    """Pressure -dF/da and curvature d2F/da2 sampled on a separation grid."""

    separations: np.ndarray
    energy: np.ndarray            # J/m^2
    pressure: np.ndarray          # N/m^2, -dF/da
    curvature: np.ndarray         # N/m^3, d2F/da2
    pressure_err: np.ndarray      # relative step-halving estimate
    curvature_err: np.ndarray


def force_and_gradient(evaluate, separations, check_step: bool = True,
                       step_tol: float = 0.01) -> ForceCurve:
    """Differentiate a free-energy evaluator on a separation grid.

    ``evaluate`` maps an array of separations to F (J/m^2); it is called
    once on the union grid {a, a +- h, a +- h/2} with h = max(0.5 nm,
    a/200), so reflection operators can be shared across all points.
    Central differences give the pressure, the 3-point stencil the second
    derivative; the step-halving discrepancy is reported and, when
    check_step is set, enforced at step_tol.
    """
    a = np.atleast_1d(np.asarray(separations, dtype=float))
    h = np.maximum(0.5e-9, a / 200.0)
    points = np.concatenate([a, a - h, a + h, a - h / 2, a + h / 2])
    F = np.asarray(evaluate(points))
    n = a.size
    F0, Fm, Fp, Fm2, Fp2 = (F[:n], F[n:2 * n], F[2 * n:3 * n],
                            F[3 * n:4 * n], F[4 * n:])
    pressure = -(Fp - Fm) / (2.0 * h)
    pressure_h2 = -(Fp2 - Fm2) / h
    curvature = (Fp - 2.0 * F0 + Fm) / h**2
    curvature_h2 = (Fp2 - 2.0 * F0 + Fm2) / (h / 2) ** 2
    p_err = np.abs(pressure - pressure_h2) / np.maximum(np.abs(pressure_h2), 1e-300)
    c_err = np.abs(curvature - curvature_h2) / np.maximum(np.abs(curvature_h2), 1e-300)
    if check_step and p_err.max() > step_tol:
        raise StepTooCoarse(
            f"halving the step changes the pressure by {p_err.max():.2%}")
    return ForceCurve(separations=a, energy=F0, pressure=pressure,
                      curvature=curvature, pressure_err=p_err,
                      curvature_err=c_err)


def _check_pfa_scale(R_sphere, a):
    if a is not None and R_sphere < 100.0 * np.max(a):
        warnings.warn(
            f"PFA marginal: R/a = {R_sphere / np.max(a):.1f} < 100",
            stacklevel=3)


def pfa_force(R_sphere: float, F_per_area, a=None):
    """Sphere-body force 2 pi R F_plane-body(a), in newtons."""
    _check_pfa_scale(R_sphere, a)
    return 2.0 * np.pi * R_sphere * np.asarray(F_per_area)


def pfa_force_gradient(R_sphere: float, pressure, a=None):
    """Sphere-body force gradient 2 pi R times the plane-body pressure (N/m)."""
    _check_pfa_scale(R_sphere, a)
    return 2.0 * np.pi * R_sphere * np.asarray(pressure)
