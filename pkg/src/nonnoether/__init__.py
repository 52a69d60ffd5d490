"""Numerical toolkit for conserved quantities generated by non-Noether symmetries."""

from .errors import (
    CapacityError,
    DegenerateSymplecticError,
    DegreeError,
    DomainExitWarning,
    IntegrationError,
    KindError,
    MissingSymmetryError,
    NumericalDomainError,
    ValidationError,
)
from .hamiltonian import HamiltonianSystem, SymplecticStructure

__version__ = "0.1.0"

__all__ = [
    "CapacityError",
    "DegenerateSymplecticError",
    "DegreeError",
    "DomainExitWarning",
    "HamiltonianSystem",
    "IntegrationError",
    "KindError",
    "MissingSymmetryError",
    "NumericalDomainError",
    "SymplecticStructure",
    "ValidationError",
    "__version__",
]
