"""Critical exponents of the conformal scalar-curvature equation in dimension n."""

from dataclasses import dataclass
from fractions import Fraction

SUPPORTED_DIMENSIONS = (3, 4, 5)


@dataclass(frozen=True)
class Exponents:
    """Exponent bundle for dimension n: the equation power q = (n+2)/(n-2),
    its Hoelder conjugate q' = (n+2)/4, and the length power 2/(n-2)."""

    n: int
    q: Fraction
    q_prime: Fraction
    length_exp: Fraction

    @classmethod
    def for_dimension(cls, n):
        if n not in SUPPORTED_DIMENSIONS:
            raise ValueError(f"dimension must be one of {SUPPORTED_DIMENSIONS}, got {n}")
        q = Fraction(n + 2, n - 2)
        qp = Fraction(n + 2, 4)
        exps = cls(n=n, q=q, q_prime=qp, length_exp=Fraction(2, n - 2))
        assert Fraction(1, 1) / q + Fraction(1, 1) / qp == 1
        return exps

    @property
    def qf(self):
        return float(self.q)

    @property
    def q_primef(self):
        return float(self.q_prime)

    @property
    def length_expf(self):
        return float(self.length_exp)

    @property
    def capacity_scale_exp(self):
        """Exponent (n-2)/2 in the capacity scaling law cap(tE) ~ t^((n-2)/2) cap(E)."""
        return Fraction(self.n - 2, 2)

    @property
    def blowup_rate(self):
        """Exponent (n-2)/2 of the boundary blow-up profile d^(-(n-2)/2)."""
        return Fraction(self.n - 2, 2)

    @property
    def blowup_amplitude(self):
        """Coefficient (n(n-2)/4)^((n-2)/4) of the blow-up profile at a smooth wall."""
        return float(self.n * (self.n - 2) / 4.0) ** ((self.n - 2) / 4.0)
