"""caspar: finite-temperature Casimir interactions of 2D-periodic multilayers.

Reflection operators of patterned stacks come from a Fourier modal method
(layer eigenmodes + stable S-matrix recursion); the free energy follows
from the scattering formula as a Matsubara sum of Brillouin-zone integrals
of log det(1 - R1 X R2 X). An independent Lifshitz plane-plane oracle is
included for validation.
"""

__version__ = "0.1.0"

import os as _os

# Kernel sizes here (a few hundred) gain nothing from threaded BLAS, and
# OpenBLAS thread synchronization is ruinous under container CPU quotas;
# parallelism belongs to the (Matsubara, node) sweep instead.
for _var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
    _os.environ.setdefault(_var, "1")
try:
    from threadpoolctl import threadpool_limits as _threadpool_limits
    _threadpool_limits(limits=1)
except Exception:  # pragma: no cover - best effort
    pass

from .casimir import (ForceCurve, FreeEnergyResult, TranslationFactor,
                      force_and_gradient, free_energy_per_area,
                      log_det_one_minus, pfa_force, pfa_force_gradient,
                      round_trip)
from .config import JobConfig, load_config, parse_config
from .geometry import (Inclusion, LayerSpec, LayerStack, TruncationOrder,
                       UnitCell, fourier_blocks, fourier_coefficient)
from .grids import BZQuadrature, MatsubaraGrid
from .lifshitz import lifshitz_plane_plane
from .materials import (Composite, Constant, Drude, LorentzPole, MagneticModel,
                        Material, dc_conductivity, permittivity_at, preset)
from .modal import (ModalBasis, TransverseWavevector, WaveguideMatrix,
                    assemble_waveguide_matrix, rayleigh_basis, solve_modes)
from .smatrix import (interface_smatrix, interface_transfer, layer_smatrix,
                      stack_reflection, star_compose)
from .zerofreq import small_xi_extrapolation, zero_freq_reflection

__all__ = [
    "__version__",
    "BZQuadrature", "Composite", "Constant", "Drude", "ForceCurve",
    "FreeEnergyResult", "Inclusion", "JobConfig", "LayerSpec", "LayerStack",
    "LorentzPole", "MagneticModel", "Material", "MatsubaraGrid", "ModalBasis",
    "TranslationFactor", "TransverseWavevector", "TruncationOrder", "UnitCell",
    "WaveguideMatrix", "assemble_waveguide_matrix", "dc_conductivity",
    "force_and_gradient", "fourier_blocks", "fourier_coefficient",
    "free_energy_per_area", "interface_smatrix", "interface_transfer",
    "layer_smatrix", "lifshitz_plane_plane", "load_config",
    "log_det_one_minus", "parse_config", "permittivity_at", "pfa_force",
    "pfa_force_gradient", "preset", "rayleigh_basis", "round_trip",
    "small_xi_extrapolation", "solve_modes", "stack_reflection",
    "star_compose", "zero_freq_reflection",
]
