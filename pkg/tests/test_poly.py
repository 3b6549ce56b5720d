from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from jetcert import poly
from jetcert.poly import (
    DEGREE_CAP,
    DegreeCapExceeded,
    DerivationParams,
    E,
    ONE,
    Poly,
    S,
    X1,
    X2,
    X3,
    ZERO,
    constant,
    derive_space,
    derive_time,
    evaluate,
    from_text,
    monomial,
    to_text,
)

XI0 = (Fraction(0), Fraction(1), Fraction(11, 10), Fraction(12, 10), Fraction(13, 10))
PARAMS = DerivationParams()

# the radial coefficient of the first eliminated equation: S(-4x1^3 - 4x1 x2^2)
COEFF = Poly({(0, 1, 3, 0, 0): Fraction(-4), (0, 1, 1, 2, 0): Fraction(-4)})


coeffs = st.fractions(
    min_value=-8, max_value=8, max_denominator=6
).filter(lambda f: True)
exponents = st.tuples(*(st.integers(min_value=0, max_value=4) for _ in range(5)))
polys = st.dictionaries(exponents, coeffs, max_size=6).map(Poly)
points = st.tuples(*(st.fractions(min_value=-3, max_value=3, max_denominator=8)
                     for _ in range(5)))


def test_add_zero_identity():
    p = COEFF
    assert p + ZERO == p


def test_difference_of_squares():
    assert (X1 + X2) * (X1 - X2) == X1 * X1 - X2 * X2


def test_scaled_product_term_by_term():
    # S * (-4 X1^3 - 4 X1 X2^2) multiplied by X3, expanded by hand
    got = COEFF * X3
    want = Poly({
        (0, 1, 3, 0, 1): Fraction(-4),
        (0, 1, 1, 2, 1): Fraction(-4),
    })
    assert got == want


def test_derive_space_power():
    assert derive_space(X1 * X1 * X1, 1) == (X1 * X1).scale(3)


def test_derive_space_radial_coefficient():
    # d/dX1 of S(-4X1^3 - 4X1X2^2) = S(-12X1^2 - 4X2^2)
    want = Poly({(0, 1, 2, 0, 0): Fraction(-12), (0, 1, 0, 2, 0): Fraction(-4)})
    assert derive_space(COEFF, 1) == want


def test_derive_space_bad_axis():
    with pytest.raises(ValueError):
        derive_space(X1, 0)


def test_derive_time_E():
    assert derive_time(E, PARAMS) == E * E


def test_derive_time_S():
    want = (S * E * E * E * E * E * E).scale(-5)
    assert derive_time(S, PARAMS) == want


def test_derive_time_S_with_nu():
    params = DerivationParams(nu=Fraction(3, 2))
    want = (S * E * E * E * E * E * E).scale(Fraction(-15, 2))
    assert derive_time(S, params) == want


def test_derive_time_constant():
    assert derive_time(constant(7), PARAMS).is_zero


def test_nu_must_be_positive():
    with pytest.raises(ValueError):
        DerivationParams(nu=Fraction(0))


def test_evaluate_radial_coefficient():
    assert evaluate(COEFF, XI0) == Fraction(-583, 50)


def test_evaluate_E_laden_vanishes():
    q = Poly({(1, 0, 2, 1, 0): Fraction(5), (3, 1, 0, 0, 2): Fraction(-7)})
    assert evaluate(q, XI0) == 0
    assert not q.is_zero  # nonzero polynomial, zero value


def test_is_identically_zero():
    assert ZERO.is_zero
    assert poly.is_identically_zero(Poly({}))
    assert not (E * X1).is_zero


def test_degree_cap():
    with pytest.raises(DegreeCapExceeded):
        Poly({(DEGREE_CAP + 1, 0, 0, 0, 0): Fraction(1)})


def test_canonical_equality_and_hash():
    a = (X1 + X2) + X3
    b = X3 + (X2 + X1)
    assert a == b and hash(a) == hash(b)


def test_text_round_trip():
    p = COEFF + E.scale(Fraction(2, 3)) - ONE
    assert from_text(to_text(p)) == p
    assert to_text(ZERO) == "0"
    assert from_text("0") == ZERO


def test_text_rejects_garbage():
    with pytest.raises(ValueError):
        from_text("1/2 e^0 s^0")
    with pytest.raises(ValueError):
        from_text("1/2 q^0 s^0 x1^0 x2^0 x3^0")


@settings(max_examples=1000, deadline=None)
@given(polys, polys)
def test_time_derivation_leibniz(p, q):
    lhs = derive_time(p * q, PARAMS)
    rhs = derive_time(p, PARAMS) * q + p * derive_time(q, PARAMS)
    assert lhs == rhs


@settings(max_examples=1000, deadline=None)
@given(polys, st.integers(min_value=1, max_value=3))
def test_time_space_derivations_commute(p, axis):
    a = derive_time(derive_space(p, axis), PARAMS)
    b = derive_space(derive_time(p, PARAMS), axis)
    assert a == b


@settings(max_examples=1000, deadline=None)
@given(polys, polys, points)
def test_evaluation_is_ring_homomorphism(p, q, pt):
    assert evaluate(p + q, pt) == evaluate(p, pt) + evaluate(q, pt)
    assert evaluate(p * q, pt) == evaluate(p, pt) * evaluate(q, pt)


@settings(max_examples=300, deadline=None)
@given(polys, polys)
def test_subtraction_annihilates(p, q):
    assert (p - p).is_zero
    assert ((p + q) - q) == p


unit_points = st.tuples(*(st.fractions(min_value=-1, max_value=1, max_denominator=8)
                          for _ in range(5)))


@settings(max_examples=200, deadline=None)
@given(polys, unit_points)
def test_space_derivative_matches_finite_difference(p, pt):
    # central difference in X1 approximates the exact derivative; with exact
    # rationals and |pt| <= 1 the truncation error is ~h^2 * f''', far below
    # the relative tolerance
    h = Fraction(1, 1 << 20)
    up = list(pt)
    dn = list(pt)
    up[2] += h
    dn[2] -= h
    numeric = (evaluate(p, up) - evaluate(p, dn)) / (2 * h)
    exact = evaluate(derive_space(p, 1), pt)
    tol = abs(exact) * Fraction(1, 10 ** 6) + Fraction(1, 10 ** 7)
    assert abs(numeric - exact) <= tol
