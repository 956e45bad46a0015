"""fiberlab: spectral split-step simulator and verification workbench for
single-mode fiber Schrodinger models."""

__version__ = "0.1.0"

from .grid import Envelope, NormReport, TimeGrid, norms, spectral_derivative

__all__ = [
    "Envelope",
    "NormReport",
    "TimeGrid",
    "norms",
    "spectral_derivative",
    "__version__",
]
