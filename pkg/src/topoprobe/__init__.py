"""Topological probes of neural-network layer representations.

The package builds a 4-D twisted torus, trains a small feedforward
classifier on it, and measures how layer representations carry the
torus' topology using a Vietoris-Rips persistent homology engine.
"""

__version__ = "0.1.0"

from .errors import (
    CapacityError,
    CorruptFiltrationError,
    DivergenceError,
    NumericOverflowError,
    ParameterError,
    ShapeError,
    TopoprobeError,
)

__all__ = [
    "__version__",
    "CapacityError",
    "CorruptFiltrationError",
    "DivergenceError",
    "NumericOverflowError",
    "ParameterError",
    "ShapeError",
    "TopoprobeError",
]
