"""Physical constants (SI values, Gaussian-style usage).

All frequencies are angular (rad/s), lengths are meters. The free-space
decay rate at imaginary frequency xi is q = xi / C_LIGHT (rad/m).
"""

from scipy.constants import c as C_LIGHT, hbar as HBAR, k as K_BOLTZMANN

__all__ = ["C_LIGHT", "HBAR", "K_BOLTZMANN"]
