from fractions import Fraction

import pytest

from yamcap.exponents import Exponents


@pytest.mark.parametrize("n", [3, 4, 5])
def test_conjugate_identity_exact(n):
    e = Exponents.for_dimension(n)
    assert Fraction(1, 1) / e.q + Fraction(1, 1) / e.q_prime == 1
    assert e.q > 1 and e.q_prime > 1


def test_values_n3():
    e = Exponents.for_dimension(3)
    assert e.q == Fraction(5, 1)
    assert e.q_prime == Fraction(5, 4)
    assert e.length_exp == Fraction(2, 1)
    assert abs(e.blowup_amplitude - 0.75**0.25) < 1e-15


def test_values_n4_n5():
    e4 = Exponents.for_dimension(4)
    assert e4.q == Fraction(3, 1) and e4.q_prime == Fraction(3, 2)
    e5 = Exponents.for_dimension(5)
    assert e5.q == Fraction(7, 3) and e5.q_prime == Fraction(7, 4)
    assert e5.length_exp == Fraction(2, 3)


def test_unsupported_dimension_rejected():
    with pytest.raises(ValueError):
        Exponents.for_dimension(6)
    with pytest.raises(ValueError):
        Exponents.for_dimension(2)
