"""Rydberg-dressed effective spin-1/2 couplings between ground-state atoms.

Energies are in 2pi*MHz, lengths in um, C6 coefficients in 2pi*MHz*um^6.
"""

__version__ = "0.1.0"

from . import design, dressing, lattice, pair, vdw, wigner
from .design import *  # noqa: F401,F403
from .dressing import *  # noqa: F401,F403
from .estimators import DressedCouplingModel, DriveDesigner, check_geometries
from .exceptions import ConfigError, InfeasibleError, InvalidArgumentError, NotFoundError, PoleError, ResonanceError
from .lattice import *  # noqa: F401,F403
from .pair import *  # noqa: F401,F403
from .vdw import *  # noqa: F401,F403
from .wigner import *  # noqa: F401,F403

__all__ = (
    ["__version__", "DressedCouplingModel", "DriveDesigner", "check_geometries", "ConfigError", "InfeasibleError",
     "InvalidArgumentError", "NotFoundError", "PoleError", "ResonanceError"]
    + design.__all__ + dressing.__all__ + lattice.__all__ + pair.__all__ + vdw.__all__ + wigner.__all__
)
