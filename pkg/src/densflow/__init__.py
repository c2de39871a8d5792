"""densflow: radial simulator and analysis bench for the weighted doubly
nonlinear diffusion equation rho(x) u_t = div(u^(m-1) |grad u|^(p-2) grad u).
"""

from .geometry import Exponents, ManifoldProfile
from .density import DensityProfile

__version__ = "0.1.0"

__all__ = ["Exponents", "ManifoldProfile", "DensityProfile", "__version__"]
