"""Coupled kinetic / condensate-wave simulator for a Bose gas on a periodic slab."""
from .core import (ConfigurationError, KineticField, ModelParams, MomentumGrid, WaveField,
                   build_grid)

__all__ = ["ConfigurationError", "KineticField", "ModelParams", "MomentumGrid", "WaveField",
           "build_grid"]
__version__ = "0.1.0"
