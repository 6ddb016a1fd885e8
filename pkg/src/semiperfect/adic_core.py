"""
Exact arithmetic in the two local base rings.

Truncated backend: R_N = F_p[t]/(t^N), values stored as coefficient vectors of
length exactly N (lowest degree first).
Pattern backend: A = F_p[t]_(t), values stored as reduced fractions
num(t)/den(t) with monic denominator and den(0) != 0.

Both backends share one value class, ``AdicScalar``; a truncated value is a
fraction whose denominator is always ``(1,)``.
"""
import logging
import math
import re
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, List, Optional, Sequence, Tuple, Union

from sympy import Poly, Symbol, fraction, isprime, together
from sympy.parsing.sympy_parser import (convert_xor, parse_expr,
                                        standard_transformations)
from sympy.polys import galoistools as gf
from sympy.polys.domains import ZZ

from .errors import InputError, NonUnit, ScalarParseError

logger = logging.getLogger(__name__)

INFINITY = math.inf

_T = Symbol("t")
_TRANSFORMATIONS = standard_transformations + (convert_xor,)
_SCALAR_SYNTAX = re.compile(r"^[\s0-9t+\-*^()/]+$")


class Backend(Enum):
    TRUNCATED = "truncated"
    PATTERN = "pattern"


@dataclass(frozen=True)
class RingDescriptor:
    backend: Backend
    prime: int
    precision: Optional[int] = None

    def __post_init__(self):
        if not isinstance(self.prime, int) or not isprime(self.prime):
            raise InputError(f"Characteristic must be a prime, got {self.prime!r}")
        if self.backend is Backend.TRUNCATED:
            if not isinstance(self.precision, int) or self.precision < 1:
                raise InputError(f"Truncated precision must be a positive integer, got {self.precision!r}")
        elif self.precision is not None:
            raise InputError("Pattern backend is exact and carries no precision")

    @classmethod
    def truncated(cls, prime: int, precision: int) -> "RingDescriptor":
        return cls(Backend.TRUNCATED, prime, precision)

    @classmethod
    def pattern(cls, prime: int) -> "RingDescriptor":
        return cls(Backend.PATTERN, prime)

    @property
    def is_truncated(self) -> bool:
        return self.backend is Backend.TRUNCATED

    @property
    def is_pattern(self) -> bool:
        return self.backend is Backend.PATTERN

    @property
    def nilpotency(self) -> Union[int, float]:
        """Smallest n with t^n = 0 (infinite for the pattern ring)."""
        return self.precision if self.is_truncated else INFINITY

    def residue_field(self) -> "RingDescriptor":
        """F_p, realized as R_1 = F_p[t]/(t)."""
        return RingDescriptor.truncated(self.prime, 1)

    def zero(self) -> "AdicScalar":
        return AdicScalar.constant(self, 0)

    def one(self) -> "AdicScalar":
        return AdicScalar.constant(self, 1)

    def uniformizer(self) -> "AdicScalar":
        return AdicScalar.from_coefficients(self, [0, 1])

    def scalar(self, value: Union[int, str, "AdicScalar"]) -> "AdicScalar":
        """Coerce an int, a scalar string or a scalar of this ring."""
        if isinstance(value, AdicScalar):
            if value.ring != self:
                raise InputError(f"Scalar over {value.ring.label} used in {self.label}")
            return value
        if isinstance(value, str):
            return AdicScalar.parse(self, value)
        if isinstance(value, int):
            return AdicScalar.constant(self, value)
        raise InputError(f"Cannot interpret {value!r} as a scalar")

    @property
    def label(self) -> str:
        if self.is_truncated:
            return f"F_{self.prime}[t]/(t^{self.precision})"
        return f"F_{self.prime}[t]_(t)"


def _strip(coeffs: Sequence[int]) -> Tuple[int, ...]:
    values = list(coeffs)
    while values and values[-1] == 0:
        values.pop()
    return tuple(values)


def _to_gf(coeffs: Sequence[int], p: int) -> List[int]:
    """Lowest-degree-first tuple -> galoistools dense list (highest first)."""
    return gf.gf_trunc([int(c) for c in reversed(coeffs)], p)


def _from_gf(poly: Sequence[int]) -> Tuple[int, ...]:
    return _strip(int(c) for c in reversed(poly))


def _series_quotient(num: Sequence[int], den: Sequence[int], terms: int, p: int) -> List[int]:
    """First ``terms`` coefficients of num/den; den[0] must be invertible mod p."""
    inverse_lead = pow(den[0] % p, -1, p)
    out: List[int] = []
    for n in range(terms):
        acc = num[n] if n < len(num) else 0
        for i in range(1, min(n, len(den) - 1) + 1):
            acc -= den[i] * out[n - i]
        out.append((acc * inverse_lead) % p)
    return out


def _format_polynomial(coeffs: Sequence[int]) -> str:
    terms = []
    for degree, c in enumerate(coeffs):
        if c == 0:
            continue
        if degree == 0:
            terms.append(str(c))
        else:
            power = "t" if degree == 1 else f"t^{degree}"
            terms.append(power if c == 1 else f"{c}*{power}")
    return " + ".join(terms) if terms else "0"


@dataclass(frozen=True)
class AdicScalar:
    ring: RingDescriptor
    num: Tuple[int, ...]
    den: Tuple[int, ...] = (1,)

    # -- construction ---------------------------------------------------

    @classmethod
    def from_coefficients(cls, ring: RingDescriptor, coeffs: Iterable[int]) -> "AdicScalar":
        p = ring.prime
        values = [int(c) % p for c in coeffs]
        if ring.is_truncated:
            n = ring.precision
            values = (values + [0] * n)[:n]
            return cls(ring, tuple(values))
        return cls(ring, _strip(values))

    @classmethod
    def constant(cls, ring: RingDescriptor, value: int) -> "AdicScalar":
        return cls.from_coefficients(ring, [value])

    @classmethod
    def from_fraction(cls, ring: RingDescriptor, num: Sequence[int], den: Sequence[int]) -> "AdicScalar":
        p = ring.prime
        f = _to_gf(num, p)
        g = _to_gf(den, p)
        if not g:
            raise InputError("Zero denominator")
        if ring.is_truncated:
            den_low = _from_gf(g)
            if den_low[0] % p == 0:
                raise InputError(f"Denominator {_format_polynomial(den_low)} is not a unit in {ring.label}")
            return cls.from_coefficients(ring, _series_quotient(_from_gf(f), den_low, ring.precision, p))
        if not f:
            return cls(ring, ())
        common = gf.gf_gcd(f, g, p, ZZ)
        f = gf.gf_quo(f, common, p, ZZ)
        g = gf.gf_quo(g, common, p, ZZ)
        lead, g = gf.gf_monic(g, p, ZZ)
        f = gf.gf_mul_ground(f, pow(int(lead), -1, p), p, ZZ)
        den_low = _from_gf(g)
        if den_low[0] == 0:
            raise InputError(f"Denominator {_format_polynomial(den_low)} vanishes at t=0; not an element of {ring.label}")
        return cls(ring, _from_gf(f), den_low)

    @classmethod
    def parse(cls, ring: RingDescriptor, text: str) -> "AdicScalar":
        """Parse ``"1 + t + 2*t^3"`` or ``"(<poly>)/(<poly>)"``."""
        if not isinstance(text, str) or not text.strip() or not _SCALAR_SYNTAX.match(text):
            raise ScalarParseError(f"Malformed scalar {text!r}")
        try:
            expr = parse_expr(text, local_dict={"t": _T}, transformations=_TRANSFORMATIONS)
            num_expr, den_expr = fraction(together(expr))
            num_coeffs = Poly(num_expr, _T).all_coeffs()
            den_coeffs = Poly(den_expr, _T).all_coeffs()
        except Exception as e:
            raise ScalarParseError(f"Malformed scalar {text!r}: {e}") from e
        if not all(c.is_Integer for c in list(num_coeffs) + list(den_coeffs)):
            raise ScalarParseError(f"Scalar {text!r} must have integer coefficients")
        num = [int(c) for c in reversed(num_coeffs)]
        den = [int(c) for c in reversed(den_coeffs)]
        try:
            return cls.from_fraction(ring, num, den)
        except InputError as e:
            raise ScalarParseError(f"Scalar {text!r}: {e}") from e

    # -- structure ------------------------------------------------------

    @property
    def is_polynomial(self) -> bool:
        return self.den == (1,)

    def is_zero(self) -> bool:
        return not any(self.num)

    def valuation(self) -> Union[int, float]:
        for degree, c in enumerate(self.num):
            if c:
                return degree
        return INFINITY

    def residue(self) -> int:
        lead = self.num[0] if self.num else 0
        return (lead * pow(self.den[0], -1, self.ring.prime)) % self.ring.prime

    def is_unit(self) -> bool:
        return self.residue() != 0

    def series(self, terms: int) -> List[int]:
        """First ``terms`` power-series coefficients."""
        if terms <= 0:
            return []
        if self.ring.is_truncated:
            return list(self.num[:terms]) + [0] * max(0, terms - len(self.num))
        return _series_quotient(self.num, self.den, terms, self.ring.prime)

    def truncate(self, length: Union[int, float]) -> "AdicScalar":
        """Canonical representative of this value modulo t^length."""
        if length == INFINITY:
            return self
        length = int(length)
        if self.ring.is_truncated:
            if length >= self.ring.precision:
                return self
            return AdicScalar.from_coefficients(self.ring, self.num[:max(length, 0)])
        return AdicScalar.from_coefficients(self.ring, self.series(length))

    def reduce_to(self, target: RingDescriptor) -> "AdicScalar":
        """Image under the reduction map onto a truncated ring of the same characteristic."""
        if target.prime != self.ring.prime or not target.is_truncated:
            raise InputError(f"No reduction map {self.ring.label} -> {target.label}")
        if self.ring.is_truncated and target.precision > self.ring.precision:
            raise InputError(f"Cannot refine precision {self.ring.precision} to {target.precision}")
        return AdicScalar.from_coefficients(target, self.series(target.precision))

    def lift_to(self, target: RingDescriptor) -> "AdicScalar":
        """Same coefficients read in another ring of the same characteristic."""
        if target.is_truncated:
            return AdicScalar.from_coefficients(target, self.series(target.precision))
        if not self.is_polynomial:
            return AdicScalar.from_fraction(target, self.num, self.den)
        return AdicScalar.from_coefficients(target, self.num)

    # -- arithmetic -----------------------------------------------------

    def _coerce(self, other: Union["AdicScalar", int]) -> "AdicScalar":
        if isinstance(other, int):
            return AdicScalar.constant(self.ring, other)
        if not isinstance(other, AdicScalar):
            return NotImplemented
        if other.ring != self.ring:
            raise InputError(f"Mixing scalars of {self.ring.label} and {other.ring.label}")
        return other

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        p = self.ring.prime
        if self.ring.is_truncated:
            return AdicScalar(self.ring, tuple((a + b) % p for a, b in zip(self.num, other.num)))
        if self.den == other.den:
            num = gf.gf_add(_to_gf(self.num, p), _to_gf(other.num, p), p, ZZ)
            return AdicScalar.from_fraction(self.ring, _from_gf(num), self.den)
        left = gf.gf_mul(_to_gf(self.num, p), _to_gf(other.den, p), p, ZZ)
        right = gf.gf_mul(_to_gf(other.num, p), _to_gf(self.den, p), p, ZZ)
        den = gf.gf_mul(_to_gf(self.den, p), _to_gf(other.den, p), p, ZZ)
        return AdicScalar.from_fraction(self.ring, _from_gf(gf.gf_add(left, right, p, ZZ)), _from_gf(den))

    __radd__ = __add__

    def __neg__(self):
        p = self.ring.prime
        if self.ring.is_truncated:
            return AdicScalar(self.ring, tuple((-a) % p for a in self.num))
        return AdicScalar(self.ring, tuple((-a) % p for a in self.num), self.den)

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        p = self.ring.prime
        product = gf.gf_mul(_to_gf(self.num, p), _to_gf(other.num, p), p, ZZ)
        if self.ring.is_truncated:
            return AdicScalar.from_coefficients(self.ring, _from_gf(product))
        den = gf.gf_mul(_to_gf(self.den, p), _to_gf(other.den, p), p, ZZ)
        return AdicScalar.from_fraction(self.ring, _from_gf(product), _from_gf(den))

    __rmul__ = __mul__

    def __pow__(self, exponent: int) -> "AdicScalar":
        if exponent < 0:
            return self.invert() ** (-exponent)
        result = self.ring.one()
        base = self
        while exponent:
            if exponent & 1:
                result = result * base
            base = base * base
            exponent >>= 1
        return result

    def invert(self) -> "AdicScalar":
        """Inverse in the local ring; NonUnit when the residue vanishes."""
        if not self.is_unit():
            raise NonUnit(f"{self} is not a unit of {self.ring.label}")
        if self.ring.is_truncated:
            return AdicScalar.from_coefficients(
                self.ring, _series_quotient([1], self.num, self.ring.precision, self.ring.prime))
        return AdicScalar.from_fraction(self.ring, self.den, self.num)

    def shift_down(self, places: int) -> "AdicScalar":
        """Exact quotient by t^places; the valuation must be at least ``places``."""
        if places == 0:
            return self
        if self.valuation() < places:
            raise NonUnit(f"{self} is not divisible by t^{places}")
        if self.ring.is_truncated:
            return AdicScalar.from_coefficients(self.ring, self.num[places:])
        return AdicScalar.from_fraction(self.ring, self.num[places:], self.den)

    def __str__(self) -> str:
        if self.is_polynomial:
            return _format_polynomial(self.num)
        return f"({_format_polynomial(self.num)})/({_format_polynomial(self.den)})"

    def __repr__(self) -> str:
        return f"AdicScalar({self}, {self.ring.label})"


def valuation(x: AdicScalar) -> Union[int, float]:
    """t-adic order; +inf for zero (and for values >= N in the truncated ring)."""
    return x.valuation()


def invert(x: AdicScalar) -> AdicScalar:
    return x.invert()


def residue(x: AdicScalar) -> int:
    """Image in the residue field F_p."""
    return x.residue()


def parse_scalar(ring: RingDescriptor, text: str) -> AdicScalar:
    return AdicScalar.parse(ring, text)
