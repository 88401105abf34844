"""Rate and power adaptation for a quasi-stationary Gaussian source over Rayleigh block fading."""

__version__ = "0.1.0"

from .copacr import Copacr
from .crcp import Crcp
from .exceptions import QsflError
from .model import SourceModel, SystemConfig, make_source_d, make_source_g, make_source_u
from .schemes import SCHEMES, make_scheme
from .scoracp import Scoracp
from .scorpa import Scorpa

__all__ = [
    "Copacr",
    "Crcp",
    "Scoracp",
    "Scorpa",
    "SCHEMES",
    "make_scheme",
    "SourceModel",
    "SystemConfig",
    "make_source_u",
    "make_source_g",
    "make_source_d",
    "QsflError",
    "__version__",
]
