"""Physical constants (SI) used throughout the package.

Values follow CODATA 2018. Kept here rather than pulling in
``scipy.constants`` at import time in the hot numba kernels.
"""

HBAR = 1.054571817e-34  # J s
C = 2.99792458e8  # m/s
KB = 1.380649e-23  # J/K
EV = 1.602176634e-19  # J

# rad/s per eV for converting dielectric-model parameters
EV_TO_RAD_S = EV / HBAR
