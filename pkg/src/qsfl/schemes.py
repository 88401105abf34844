"""Name-to-estimator registry."""

from __future__ import annotations

from .copacr import Copacr
from .crcp import Crcp
from .exceptions import ConfigError
from .model import SystemConfig
from .scoracp import Scoracp
from .scorpa import Scorpa

SCHEMES = {"SCORPA": Scorpa, "COPACR": Copacr, "SCORACP": Scoracp, "CRCP": Crcp}


def scheme_class(name: str):
    try:
        return SCHEMES[name.upper()]
    except KeyError:
        raise ConfigError(f"unknown scheme {name!r}; expected one of {', '.join(SCHEMES)}") from None


def make_scheme(name: str, cfg: SystemConfig):
    """Unfitted estimator for ``name`` configured from ``cfg``."""
    return scheme_class(name).from_config(cfg)
