"""Leading-order asymptotics of Laplace-type integrals.

For I(lambda) = int_a^b phi(x) e^{-lambda h(x)} dx with the global minimum
of h at the left endpoint and local expansions h(x) ~ h(a) + a0 (x-a)^mu,
phi(x) ~ b0 (x-a)^{alpha-1}, the leading term is

    I(lambda) ~ e^{-lambda h(a)} Gamma(alpha/mu) c0 lambda^{-alpha/mu},
    c0 = b0 / (mu a0^{alpha/mu}).

Interior minima are handled by splitting the interval at the minimum and
summing two endpoint problems.  Higher-order coefficients are deliberately
not implemented.  An adaptive-quadrature reference evaluates I(lambda)
directly for validation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

from scipy import integrate
from scipy.special import gamma as gamma_fn

from .errors import DomainError, QuadratureError

__all__ = [
    "LaplaceProblem",
    "leading_term",
    "interior_min_ratio",
    "quadrature_reference",
    "REGISTERED_PROBLEMS",
]


@dataclass(frozen=True)
class LaplaceProblem:
    """Endpoint-minimum Laplace problem on [a, b].

    ``mu_exp``, ``a0`` describe h near the minimum, ``alpha``, ``b0`` the
    prefactor phi; ``h_eval``/``phi_eval`` drive the quadrature reference.
    ``min_location`` is "left_endpoint" or "interior"; interior problems
    carry the minimizer in ``interior_point`` and are evaluated by splitting.
    """

    a: float
    b: float
    h_at_min: float
    mu_exp: float
    a0: float
    alpha: float
    b0: float
    h_eval: Callable[[float], float]
    phi_eval: Callable[[float], float]
    min_location: str = "left_endpoint"
    interior_point: float | None = None
    name: str = ""

    def __post_init__(self):
        if self.mu_exp <= 0:
            raise DomainError("mu_exp must be positive")
        if self.a0 == 0 or self.b0 == 0:
            raise DomainError("a0 and b0 must be nonzero")
        if self.alpha <= 0:
            raise DomainError("alpha must have positive real part")
        if self.min_location not in ("left_endpoint", "interior"):
            raise DomainError("min_location must be left_endpoint or interior")
        if self.min_location == "interior" and self.interior_point is None:
            raise DomainError("interior problems need interior_point")


def leading_term(problem: LaplaceProblem, lam: float) -> float:
    """The s = 0 term of the asymptotic expansion of I(lambda)."""
    if lam <= 0:
        raise DomainError("lambda must be positive")
    if problem.min_location == "interior":
        left, right = _split_interior(problem)
        return leading_term(left, lam) + leading_term(right, lam)
    ratio = problem.alpha / problem.mu_exp
    if problem.a0 <= 0 and ratio != round(ratio):
        raise DomainError("a0 <= 0 with non-integer alpha/mu: real power undefined")
    c0 = problem.b0 / (problem.mu_exp * problem.a0**ratio)
    return math.exp(-lam * problem.h_at_min) * gamma_fn(ratio) * c0 * lam ** (-ratio)


def _split_interior(problem: LaplaceProblem) -> tuple[LaplaceProblem, LaplaceProblem]:
    """Interior minimum at x0: treat [x0, b] and the reflection of [a, x0]
    as two left-endpoint problems with the same local data."""
    x0 = problem.interior_point
    right = LaplaceProblem(
        a=x0, b=problem.b, h_at_min=problem.h_at_min,
        mu_exp=problem.mu_exp, a0=problem.a0, alpha=problem.alpha, b0=problem.b0,
        h_eval=problem.h_eval, phi_eval=problem.phi_eval,
        name=problem.name + "/right",
    )
    left = LaplaceProblem(
        a=x0, b=x0 + (x0 - problem.a), h_at_min=problem.h_at_min,
        mu_exp=problem.mu_exp, a0=problem.a0, alpha=problem.alpha, b0=problem.b0,
        h_eval=lambda x: problem.h_eval(2 * x0 - x),
        phi_eval=lambda x: problem.phi_eval(2 * x0 - x),
        name=problem.name + "/left",
    )
    return left, right


def interior_min_ratio(i: int, h2: float, phi_i: float, lam: float) -> float:
    """Asymptotic ratio <phi around an interior quadratic minimum> for the
    first non-vanishing derivative order i of phi at the minimum:

    (Gamma((i+1)/2)/Gamma(1/2)) (1/i!) phi^{(i)}(b) (h''(b)/2)^{-i/2}
    lambda^{-i/2}.
    """
    if i < 0:
        raise DomainError("derivative order must be nonnegative")
    if h2 <= 0:
        raise DomainError("h'' at the minimum must be positive")
    if lam <= 0:
        raise DomainError("lambda must be positive")
    return (
        gamma_fn((i + 1) / 2.0)
        / gamma_fn(0.5)
        / math.factorial(i)
        * phi_i
        * (h2 / 2.0) ** (-i / 2.0)
        * lam ** (-i / 2.0)
    )


def quadrature_reference(problem: LaplaceProblem, lam: float, rtol: float = 1e-10) -> float:
    """Direct adaptive quadrature of int phi e^{-lambda h} for validation."""
    if lam <= 0:
        raise DomainError("lambda must be positive")

    def integrand(x):
        return problem.phi_eval(x) * math.exp(-lam * (problem.h_eval(x) - problem.h_at_min))

    points = None
    if problem.min_location == "interior":
        points = [problem.interior_point]
    val, err = integrate.quad(
        integrand, problem.a, problem.b, epsabs=0, epsrel=rtol, limit=500, points=points
    )
    if val != 0 and err > 10 * rtol * abs(val):
        raise QuadratureError(
            f"quadrature reference missed rtol={rtol}",
            best_estimate=val * math.exp(-lam * problem.h_at_min),
            achieved_tolerance=err / abs(val),
        )
    return val * math.exp(-lam * problem.h_at_min)


# Registered closed-form validation problems: h = x, h = x^2 and h = x + x^2
# on [0, 1] with phi = 1 (mu = 1, 2 and 1; a0 = 1; alpha = 1; b0 = 1).
REGISTERED_PROBLEMS = (
    LaplaceProblem(
        a=0.0, b=1.0, h_at_min=0.0, mu_exp=1.0, a0=1.0, alpha=1.0, b0=1.0,
        h_eval=lambda x: x, phi_eval=lambda x: 1.0, name="linear",
    ),
    LaplaceProblem(
        a=0.0, b=1.0, h_at_min=0.0, mu_exp=2.0, a0=1.0, alpha=1.0, b0=1.0,
        h_eval=lambda x: x * x, phi_eval=lambda x: 1.0, name="quadratic",
    ),
    LaplaceProblem(
        a=0.0, b=1.0, h_at_min=0.0, mu_exp=1.0, a0=1.0, alpha=1.0, b0=1.0,
        h_eval=lambda x: x + x * x, phi_eval=lambda x: 1.0, name="linear_plus_quadratic",
    ),
)
