"""Precision policy and the small numeric helpers every other module leans on.

Two arithmetic domains are used throughout the package:

* exact rationals (:class:`fractions.Fraction`) for the oracle paths, and
* multiprecision floats (:mod:`mpmath` ``mpf``/``mpc``) carried at
  ``PrecisionPolicy.work_bits``.

Code that is generic over the two relies only on ``+ - * /`` and comparisons,
so the same routine can run in either domain.
"""

from __future__ import annotations

import math
from contextlib import contextmanager
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational
from typing import Iterator, Union

from mpmath import mp, mpc, mpf

from .errors import DomainError

Number = Union[int, Fraction, mpf, mpc, float, complex]

DEFAULT_GUARD_BITS = 32


@dataclass(frozen=True)
class PrecisionPolicy:
    """Working precision and truncation rules.

    ``tail_eps`` is an absolute tolerance for the discarded tail of any
    infinite sum or product; it may be given as a float, a Fraction or a
    decimal string ("1e-40").
    """

    work_bits: int = 256
    tail_eps: Union[str, float, Fraction] = "1e-40"
    max_terms: int = 20000
    derived_guard_bits: int = DEFAULT_GUARD_BITS

    def __post_init__(self) -> None:
        if self.work_bits < 64:
            raise DomainError(f"work_bits must be >= 64, got {self.work_bits}")
        if self.max_terms < 8:
            raise DomainError(f"max_terms must be >= 8, got {self.max_terms}")
        if self.derived_guard_bits < 0:
            raise DomainError("derived_guard_bits must be non-negative")
        if not Fraction(str(self.tail_eps)) > 0:
            raise DomainError(f"tail_eps must be positive, got {self.tail_eps}")

    @property
    def eps(self) -> mpf:
        """``tail_eps`` as an mpf at the current working precision."""
        if isinstance(self.tail_eps, Rational):
            return to_mp(self.tail_eps)
        return mpf(str(self.tail_eps))

    @contextmanager
    def workprec(self) -> Iterator[None]:
        with mp.workprec(self.work_bits):
            yield

    def with_eps(self, tail_eps) -> "PrecisionPolicy":
        return PrecisionPolicy(self.work_bits, tail_eps, self.max_terms, self.derived_guard_bits)

    def with_bits(self, work_bits: int) -> "PrecisionPolicy":
        return PrecisionPolicy(work_bits, self.tail_eps, self.max_terms, self.derived_guard_bits)

    @classmethod
    def auto(cls, q, alpha, n_max: int, guard_bits: int = DEFAULT_GUARD_BITS, **kw) -> "PrecisionPolicy":
        """Policy sized so that gamma_{n_max} keeps 64 significant bits.

        The tail tolerance is tied to the same scale: 2^-(bits - guard).
        """
        bits = required_bits(q, alpha, n_max, guard_bits)
        kw.setdefault("tail_eps", Fraction(1, 2 ** (bits - guard_bits)))
        return cls(work_bits=bits, derived_guard_bits=guard_bits, **kw)


DEFAULT_POLICY = PrecisionPolicy()


def required_bits(q, alpha, n_max: int, guard_bits: int = 0) -> int:
    """Bits needed to carry q^{n(n-1+alpha)/2} at n = n_max with 64 significant bits.

    >>> required_bits(Fraction(1, 2), 0, 16)
    184
    """
    q = to_fraction_or_mp(q)
    if not 0 < q < 1:
        raise DomainError(f"q out of range (0, 1): {q}")
    if n_max < 0:
        raise DomainError("n_max must be non-negative")
    with mp.workprec(128):
        a = max(to_mp(alpha), mpf(0))
        exponent = mpf(n_max) * (n_max - 1 + a) / 2 * mp.log(1 / to_mp(q), 2)
        # log2 of an exact power of two comes out exact; nudge away float fuzz
        scale = int(mp.ceil(exponent - mpf(2) ** -100)) if exponent > 0 else 0
    return scale + 64 + guard_bits


def geometric_tail_terms(ratio, first_term_mag, eps) -> int:
    """Smallest J with first_term_mag * ratio^J / (1 - ratio) <= eps."""
    ratio, first, eps = (Fraction(str(x)) if not isinstance(x, (mpf, Fraction, int)) else x
                         for x in (ratio, first_term_mag, eps))
    if not 0 < ratio < 1:
        raise DomainError(f"ratio must lie in (0, 1), got {ratio}")
    if not first > 0 or not eps > 0:
        raise DomainError("first_term_mag and eps must be positive")
    bound = first / (1 - ratio)
    j = 0
    while bound > eps:
        bound *= ratio
        j += 1
    return j


# --------------------------------------------------------------------------
# conversions


def to_mp(x):
    """Convert an int/Fraction/float/complex/str to mpf or mpc at current precision."""
    if isinstance(x, (mpf, mpc)):
        return +x
    if isinstance(x, Rational):
        return mpf(x.numerator) / x.denominator
    if isinstance(x, complex):
        return mpc(x)
    if isinstance(x, str):
        return mpf(x) if "/" not in x else to_mp(Fraction(x))
    return mpf(x)


def to_fraction_or_mp(x):
    """Keep rationals exact; everything else becomes mp."""
    if isinstance(x, (Fraction, int)):
        return Fraction(x)
    if isinstance(x, str):
        try:
            return Fraction(x)
        except ValueError:
            return to_mp(x)
    return to_mp(x)


def parse_rational(text: str) -> Fraction:
    """Parse "p/r", an integer or a finite decimal literal exactly."""
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise DomainError(f"not a rational literal: {text!r}") from exc


def is_exact(x) -> bool:
    return isinstance(x, (int, Fraction))


def is_integer_exact(x) -> bool:
    return is_exact(x) and Fraction(x).denominator == 1


def mp_abs(x):
    return abs(x) if not is_exact(x) else abs(Fraction(x))


def format_value(x, work_bits: int | None = None) -> str:
    """Deterministic text form: "p/r" for rationals, decimal string otherwise."""
    if is_exact(x):
        x = Fraction(x)
        return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"
    bits = work_bits or mp.prec
    digits = max(15, int(math.ceil(bits * math.log10(2))))
    if isinstance(x, mpc):
        if x.imag == 0:
            x = x.real
        else:
            return f"{mp.nstr(x.real, digits)}{'+' if x.imag >= 0 else '-'}{mp.nstr(abs(x.imag), digits)}j"
    return mp.nstr(x, digits)


def real_if_close(x):
    """Drop an exactly-zero imaginary part."""
    if isinstance(x, mpc) and x.imag == 0:
        return x.real
    return x
