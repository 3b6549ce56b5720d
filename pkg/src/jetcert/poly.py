"""Exact sparse polynomials in the five variables (E, S, X1, X2, X3).

E stands for the reciprocal of the remaining time and S for the damped
control amplitude, so differentiation in time acts through the chain rules

    dE/dt = E**2,        dS/dt = -5*nu * S * E**6,

while the space variables X1, X2, X3 differentiate in the ordinary way with
E and S held fixed.  Coefficients are exact rationals throughout; monomials
are exponent 5-tuples (e, s, x1, x2, x3).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping

Exponents = tuple[int, int, int, int, int]

#: Guard against mis-wired derivation loops.  Deep time prolongation pushes
#: the E exponent up by 6 per derivative, so legitimate builds reach total
#: degree well above 100; anything past the cap indicates a runaway loop.
DEGREE_CAP = 256


class DegreeCapExceeded(ArithmeticError):
    """A monomial exceeded the configured total-degree cap."""


@dataclass(frozen=True)
class DerivationParams:
    """Parameters of the time-derivation rule; nu is the damping exponent weight."""

    nu: Fraction = Fraction(1)

    def __post_init__(self):
        if self.nu <= 0:
            raise ValueError("nu must be positive")


class Poly:
    """Immutable sparse polynomial with Fraction coefficients.

    The term map never stores zero coefficients, so two equal polynomials
    always compare (and hash) equal regardless of how they were built.
    """

    __slots__ = ("terms", "_hash", "_key")

    def __init__(self, terms: Mapping[Exponents, Fraction] | None = None):
        clean: dict[Exponents, Fraction] = {}
        if terms:
            for exps, coeff in terms.items():
                if coeff == 0:
                    continue
                if sum(exps) > DEGREE_CAP:
                    raise DegreeCapExceeded(f"monomial {exps} beyond degree {DEGREE_CAP}")
                clean[exps] = coeff
        object.__setattr__(self, "terms", clean)
        object.__setattr__(self, "_hash", None)
        object.__setattr__(self, "_key", None)

    def __setattr__(self, name, value):
        raise AttributeError("Poly is immutable")

    # -- canonical form ---------------------------------------------------

    def key(self) -> tuple:
        """Canonical sorted term tuple; identical for equal polynomials."""
        k = object.__getattribute__(self, "_key")
        if k is None:
            k = tuple(sorted((e, c) for e, c in self.terms.items()))
            object.__setattr__(self, "_key", k)
        return k

    def __hash__(self) -> int:
        h = object.__getattribute__(self, "_hash")
        if h is None:
            h = hash(self.key())
            object.__setattr__(self, "_hash", h)
        return h

    def __eq__(self, other) -> bool:
        if not isinstance(other, Poly):
            return NotImplemented
        return self.terms == other.terms

    def __repr__(self) -> str:
        return f"Poly({to_text(self)!r})"

    # -- ring operations ---------------------------------------------------

    def __add__(self, other: "Poly") -> "Poly":
        out = dict(self.terms)
        for exps, coeff in other.terms.items():
            acc = out.get(exps)
            if acc is None:
                out[exps] = coeff
            else:
                acc = acc + coeff
                if acc == 0:
                    del out[exps]
                else:
                    out[exps] = acc
        return Poly(out)

    def __neg__(self) -> "Poly":
        return Poly({e: -c for e, c in self.terms.items()})

    def __sub__(self, other: "Poly") -> "Poly":
        return self + (-other)

    def __mul__(self, other: "Poly") -> "Poly":
        out: dict[Exponents, Fraction] = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                exps = (e1[0] + e2[0], e1[1] + e2[1], e1[2] + e2[2],
                        e1[3] + e2[3], e1[4] + e2[4])
                acc = out.get(exps)
                out[exps] = c1 * c2 if acc is None else acc + c1 * c2
        return Poly(out)

    def scale(self, c) -> "Poly":
        c = Fraction(c)
        if c == 0:
            return ZERO
        return Poly({e: coeff * c for e, coeff in self.terms.items()})

    @property
    def is_zero(self) -> bool:
        return not self.terms


def is_identically_zero(p: Poly) -> bool:
    """True iff the canonical term map is empty (not merely zero at a point)."""
    return p.is_zero


# -- constructors ----------------------------------------------------------

def constant(c) -> Poly:
    c = Fraction(c)
    if c == 0:
        return Poly()
    return Poly({(0, 0, 0, 0, 0): c})


def monomial(exps: Exponents, c=1) -> Poly:
    return Poly({exps: Fraction(c)})


ZERO = Poly()
ONE = constant(1)
E = monomial((1, 0, 0, 0, 0))
S = monomial((0, 1, 0, 0, 0))
X1 = monomial((0, 0, 1, 0, 0))
X2 = monomial((0, 0, 0, 1, 0))
X3 = monomial((0, 0, 0, 0, 1))


# -- derivations -----------------------------------------------------------

def derive_space(p: Poly, axis: int) -> Poly:
    """Exact d/dX_axis for axis in {1, 2, 3}; E and S are constants in space."""
    if axis not in (1, 2, 3):
        raise ValueError("space axis must be 1, 2 or 3")
    slot = axis + 1
    out: dict[Exponents, Fraction] = {}
    for exps, coeff in p.terms.items():
        k = exps[slot]
        if k == 0:
            continue
        dropped = list(exps)
        dropped[slot] = k - 1
        key = tuple(dropped)
        acc = out.get(key)
        term = coeff * k
        out[key] = term if acc is None else acc + term
    return Poly(out)


def derive_time(p: Poly, params: DerivationParams) -> Poly:
    """Exact d/dt through dE/dt = E^2 and dS/dt = -5*nu*S*E^6."""
    factor = -5 * params.nu
    out: dict[Exponents, Fraction] = {}

    def put(exps: Exponents, coeff: Fraction) -> None:
        acc = out.get(exps)
        if acc is None:
            out[exps] = coeff
        else:
            acc = acc + coeff
            if acc == 0:
                del out[exps]
            else:
                out[exps] = acc

    for exps, coeff in p.terms.items():
        e, s, a, b, c = exps
        if e:
            put((e + 1, s, a, b, c), coeff * e)
        if s:
            put((e + 6, s, a, b, c), coeff * s * factor)
    return Poly(out)


def evaluate(p: Poly, point: Iterable) -> Fraction:
    """Exact value at a 5-point (e, s, x1, x2, x3) of rationals."""
    pt = [Fraction(v) for v in point]
    if len(pt) != 5:
        raise ValueError("evaluation point must have 5 components")
    # power tables keep repeated Fraction exponentiation off the hot path
    maxes = [0] * 5
    for exps in p.terms:
        for i, k in enumerate(exps):
            if k > maxes[i]:
                maxes[i] = k
    powers = []
    for i in range(5):
        row = [Fraction(1)]
        for _ in range(maxes[i]):
            row.append(row[-1] * pt[i])
        powers.append(row)
    total = Fraction(0)
    for exps, coeff in p.terms.items():
        val = coeff
        for i, k in enumerate(exps):
            if k:
                val = val * powers[i][k]
        total += val
    return total


# -- text form -------------------------------------------------------------

_VAR_NAMES = ("e", "s", "x1", "x2", "x3")


def to_text(p: Poly) -> str:
    """Canonical one-line form: sorted `num/den e^i s^j x1^k x2^l x3^m` terms."""
    if p.is_zero:
        return "0"
    chunks = []
    for exps, coeff in sorted(p.terms.items()):
        parts = [f"{coeff.numerator}/{coeff.denominator}"]
        parts.extend(f"{name}^{k}" for name, k in zip(_VAR_NAMES, exps))
        chunks.append(" ".join(parts))
    return " ".join(chunks)


def from_text(text: str) -> Poly:
    """Inverse of ``to_text``."""
    text = text.strip()
    if text == "0":
        return ZERO
    tokens = text.split()
    if len(tokens) % 6 != 0:
        raise ValueError(f"malformed polynomial text: {text!r}")
    terms: dict[Exponents, Fraction] = {}
    for i in range(0, len(tokens), 6):
        coeff = Fraction(tokens[i])
        exps = []
        for j, name in enumerate(_VAR_NAMES):
            tok = tokens[i + 1 + j]
            prefix = name + "^"
            if not tok.startswith(prefix):
                raise ValueError(f"expected {prefix}<int>, got {tok!r}")
            exps.append(int(tok[len(prefix):]))
        key = tuple(exps)
        terms[key] = terms.get(key, Fraction(0)) + coeff
    return Poly(terms)
