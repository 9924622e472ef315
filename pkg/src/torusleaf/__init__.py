"""Neighborhood type of a torus leaf of a suspension foliation, read off from
its holonomy germ."""

from .errors import (
    CapExceeded,
    DomainError,
    NotHyperbolicError,
    ParseError,
    PrecisionExhausted,
    PreconditionError,
    TorusLeafError,
)

__version__ = "0.1.0"

__all__ = [
    "CapExceeded",
    "DomainError",
    "NotHyperbolicError",
    "ParseError",
    "PrecisionExhausted",
    "PreconditionError",
    "TorusLeafError",
]
