"""Numerical construction of exceptional domains bifurcating from cylinder exteriors.

Modules
-------
special_functions  K_nu(x) by quadrature, closed forms and recurrences
dispersion         Lambda(rho), the spectrum lambda_k(T) and the critical period
geometry           boundary profiles and the straightening diffeomorphism
pullback           the transported Laplacian and its chain-rule oracle
solver             Dirichlet solves, exact straight modes, the overdetermined map
bifurcation        bifurcation certificate, branch continuation, verification
"""

__version__ = "0.1.0"

from .dispersion import critical_rho, eigenvalue, eigenvalue_table
from .errors import ContractError, DomainError, NumericalError, SingularityError
from .geometry import DomainSpec, Perturbation
from .grid import GridConfig, GridField

__all__ = [
    "ContractError",
    "DomainError",
    "DomainSpec",
    "GridConfig",
    "GridField",
    "NumericalError",
    "Perturbation",
    "SingularityError",
    "critical_rho",
    "eigenvalue",
    "eigenvalue_table",
]
