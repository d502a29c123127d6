"""Magnetic Schroedinger operators with delta interactions supported on curves.

Modules: ``specfun`` (special functions), ``geometry`` (curves and panels),
``landau`` (free Landau Hamiltonian), ``bie`` (boundary integral operators),
``spectral`` (eigenvalue clusters), ``toeplitz`` (Toeplitz-type operators),
``capacity`` (logarithmic capacity), ``approx`` (squeezed potentials) and
``cli`` (command line front end).
"""

from . import approx, bie, capacity, geometry, landau, specfun, spectral, toeplitz
from .errors import ConfigError, NumericalFailure

__version__ = "0.1.0"

__all__ = [
    "approx",
    "bie",
    "capacity",
    "geometry",
    "landau",
    "specfun",
    "spectral",
    "toeplitz",
    "ConfigError",
    "NumericalFailure",
]
