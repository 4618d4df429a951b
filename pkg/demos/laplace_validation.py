"""Laplace asymptotics: leading term versus adaptive quadrature.

For each registered closed-form problem the table shows the relative error
of the leading-order term against a 1e-10 quadrature reference, next to the
expected O(lambda^{-1/mu}) envelope.

Run:  python3 demos/laplace_validation.py
"""

from ensemble_lab import laplace


def main():
    for prob in laplace.REGISTERED_PROBLEMS:
        print(f"problem '{prob.name}' (mu = {prob.mu_exp:g}):")
        print(f"  {'lambda':>8} {'|quad/lead - 1|':>16} {'lambda^(-1/mu)':>15}")
        for lam in (10.0, 100.0, 1000.0, 10**4):
            ref = laplace.quadrature_reference(prob, lam)
            lead = laplace.leading_term(prob, lam)
            rel = abs(ref / lead - 1.0)
            print(f"  {lam:>8.0f} {rel:>16.3e} {lam ** (-1 / prob.mu_exp):>15.3e}")
        print()


if __name__ == "__main__":
    main()
