"""Ensemble-equivalence numerics for two mean-field lattice models.

Subpackages:

* ``coupling``   — specific p-norm fluctuation distances, error-bound
  lemmas, an exact LP transport oracle, Monte Carlo cost estimates;
* ``paramagnet`` — exact combinatorics for the discrete paramagnet;
* ``spherical``  — the mean-field spherical model (five ensembles,
  sampling, quadrature, transport maps);
* ``laplace``    — leading-order Laplace asymptotics with a quadrature
  reference;
* ``experiments``/``cli`` — rate-study drivers and the command line.
"""

from .errors import (
    CapacityError,
    DegenerateEnsembleError,
    DomainError,
    EnsembleLabError,
    QuadratureError,
    SampleError,
)

__version__ = "0.1.0"

__all__ = [
    "EnsembleLabError",
    "DomainError",
    "CapacityError",
    "DegenerateEnsembleError",
    "QuadratureError",
    "SampleError",
    "__version__",
]
