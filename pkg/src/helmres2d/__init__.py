"""Subwavelength resonances of a close-to-touching pair of 2D inclusions.

Boundary integral formulation with Nystrom discretization, characteristic-value
search for the two hybridized resonances and the gap-gradient blow-up study.
"""

__version__ = "0.1.0"

from .geometry import CurveSpec, Mesh, discretize, make_pair
from .resonance import MediumParams, ResonanceResult, find_resonance

__all__ = [
    "CurveSpec",
    "MediumParams",
    "Mesh",
    "ResonanceResult",
    "discretize",
    "find_resonance",
    "make_pair",
]
