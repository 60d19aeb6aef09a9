"""q-calculus primitives: Pochhammer products, Jackson sums and the functions
h^alpha, f, g, g_n used by the model Riemann-Hilbert solution.

All routines take a :class:`~qortho.numerics.PrecisionPolicy`; infinite objects
are truncated with an explicit tail bound and raise
:class:`~qortho.errors.TruncationError` rather than returning a best effort.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Callable, Mapping, Optional, Sequence

from mpmath import mp, mpc, mpf

from .errors import DomainError, PoleProximityError, TableMissError, TruncationError
from .numerics import (
    DEFAULT_POLICY,
    PrecisionPolicy,
    is_exact,
    is_integer_exact,
    real_if_close,
    to_fraction_or_mp,
    to_mp,
)


@dataclass(frozen=True)
class QParams:
    q: Any
    alpha: Any = Fraction(0)

    def __post_init__(self) -> None:
        object.__setattr__(self, "q", to_fraction_or_mp(self.q))
        object.__setattr__(self, "alpha", to_fraction_or_mp(self.alpha))
        if not 0 < self.q < 1:
            raise DomainError(f"q out of range (0, 1): {self.q}")
        if not self.alpha > -1:
            raise DomainError(f"alpha must exceed -1, got {self.alpha}")

    @property
    def exact(self) -> bool:
        """True when q is rational and q^alpha is rational (integer alpha)."""
        return is_exact(self.q) and is_integer_exact(self.alpha)

    def q_pow_alpha(self):
        if self.exact:
            return Fraction(self.q) ** int(self.alpha)
        return to_mp(self.q) ** to_mp(self.alpha)


@dataclass(frozen=True, eq=False)
class LatticeFn:
    """A function known either as a callable or as a table on the lattice +-q^k.

    ``table`` maps k to the pair (f(q^k), f(-q^k)).  ``poly`` optionally gives
    polynomial coefficients (lowest degree first); when present, Jackson sums
    with rational q are evaluated in closed form.
    """

    func: Optional[Callable[[Any], Any]] = None
    table: Optional[Mapping[int, tuple]] = None
    poly: Optional[tuple] = None

    def __post_init__(self) -> None:
        if self.func is None and self.table is None and self.poly is None:
            raise DomainError("LatticeFn needs a callable, a table or polynomial coefficients")

    @classmethod
    def polynomial(cls, coeffs: Sequence) -> "LatticeFn":
        coeffs = tuple(to_fraction_or_mp(c) for c in coeffs)
        return cls(func=lambda x: _horner(coeffs, x), poly=coeffs)

    @classmethod
    def constant(cls, value=1) -> "LatticeFn":
        return cls.polynomial([value])

    @property
    def table_size(self) -> Optional[int]:
        return None if self.table is None else max(self.table) + 1

    def __call__(self, x):
        if self.func is None:
            if self.poly is not None:
                return _horner(self.poly, x)
            raise DomainError("tabulated LatticeFn can only be read at lattice points")
        return self.func(x)

    def at_lattice(self, k: int, sign: int, q):
        """Value at sign * q^k."""
        if self.table is not None:
            if k not in self.table:
                raise TableMissError(f"table has no entry for k={k} (stored k < {self.table_size})")
            return self.table[k][0 if sign > 0 else 1]
        x = q ** k
        return self(x if sign > 0 else -x)


def _horner(coeffs, x):
    acc = 0
    for c in reversed(coeffs):
        acc = acc * x + c
    return acc


def _as_lattice_fn(f) -> LatticeFn:
    return f if isinstance(f, LatticeFn) else LatticeFn(func=f)


# --------------------------------------------------------------------------
# Pochhammer symbols


def pochhammer_fin(z, q, n: int):
    """Finite product prod_{j<n} (1 - z q^j); exact when z and q are rational."""
    if n < 0:
        raise DomainError("n must be non-negative")
    if is_exact(z) and is_exact(q):
        z, q = Fraction(z), Fraction(q)
    else:
        z, q = to_mp(z), to_mp(q)
    acc, qj = 1, 1
    for _ in range(n):
        acc *= 1 - z * qj
        qj *= q
    return acc


def pochhammer_inf(z, q, eps=None, policy: PrecisionPolicy = DEFAULT_POLICY):
    """(z; q)_inf truncated so that the relative tail is at most ``eps``.

    The tail factor prod_{j>=J}(1 - z q^j) is bounded through
    sum_{j>=J} |z| q^j / (1 - |z| q^j) <= |z| q^J / ((1 - q)(1 - |z| q^J)),
    valid once |z| q^J < 1/2.
    """
    with policy.workprec():
        z, q = to_mp(z), to_mp(q)
        if not 0 < q < 1:
            raise DomainError(f"q out of range (0, 1): {q}")
        eps = policy.eps if eps is None else to_mp(eps)
        if z == 0:
            return mpf(1)
        az = abs(z)
        one_minus_q = 1 - q
        acc = mpf(1)
        zq = z
        u = az
        for _ in range(policy.max_terms):
            if u < 0.5 and u / (one_minus_q * (1 - u)) <= eps:
                return real_if_close(acc)
            factor = 1 - zq
            if factor == 0:
                return mpf(0)
            acc *= factor
            zq *= q
            u *= q
        raise TruncationError(f"(z;q)_inf did not reach eps={mp.nstr(eps, 5)} within {policy.max_terms} factors")


# --------------------------------------------------------------------------
# Jackson integrals


def jackson_poly_exact(coeffs: Sequence, q, alpha=0, two_sided: bool = True):
    """Closed form of the Jackson sum of sum_p c_p x^p |x|^alpha.

    Each monomial contributes c_p (1 + (-1)^p) / (1 - q^{p+1+alpha}) on [-1, 1]
    or c_p / (1 - q^{p+1+alpha}) on (0, 1].  Exact for rational q, integer alpha.
    """
    if not (is_exact(q) and is_integer_exact(alpha)):
        raise DomainError("closed-form Jackson sums need rational q and integer alpha")
    q, alpha = Fraction(q), int(alpha)
    if alpha <= -1:
        raise DomainError("alpha must exceed -1")
    total = Fraction(0)
    for p, c in enumerate(coeffs):
        if c == 0 or (two_sided and p % 2):
            continue
        total += Fraction(c) * (2 if two_sided else 1) / (1 - q ** (p + 1 + alpha))
    return total


def _jackson(f, q, eps, policy: PrecisionPolicy, signs: tuple):
    f = _as_lattice_fn(f)
    two_sided = len(signs) == 2
    if f.poly is not None and f.table is None and is_exact(q) and all(is_exact(c) for c in f.poly):
        return jackson_poly_exact(f.poly, q, 0, two_sided)
    with policy.workprec():
        qm = to_mp(q)
        if not 0 < qm < 1:
            raise DomainError(f"q out of range (0, 1): {q}")
        eps = policy.eps if eps is None else to_mp(eps)
        total = mpf(0)
        prev_major = None
        qk = mpf(1)
        for k in range(policy.max_terms):
            vals = [to_mp(f.at_lattice(k, s, q if is_exact(q) else qm)) for s in signs]
            total += sum(vals) * qk
            major = sum(abs(v) for v in vals) * qk
            if prev_major is not None and k >= 2:
                if major == 0 and prev_major == 0:
                    return real_if_close(total)
                if prev_major > 0:
                    r = major / prev_major
                    if r < 1 and major * r / (1 - r) <= eps:
                        return real_if_close(total)
            prev_major = major
            qk *= qm
        raise TruncationError(f"Jackson sum did not converge within {policy.max_terms} terms")


def jackson_two_sided(f, q, eps=None, policy: PrecisionPolicy = DEFAULT_POLICY):
    """sum_k (f(q^k) + f(-q^k)) q^k with a ratio-certified geometric tail."""
    return _jackson(f, q, eps, policy, (1, -1))


def jackson_one_sided(f, q, eps=None, policy: PrecisionPolicy = DEFAULT_POLICY):
    """sum_k f(q^k) q^k with a ratio-certified geometric tail."""
    return _jackson(f, q, eps, policy, (1,))


# --------------------------------------------------------------------------
# h^alpha, f, g, g_n


def _tail_count(ratio, lead, eps, max_terms):
    """Smallest K >= 0 with lead * ratio^K / (1 - ratio) <= eps."""
    bound = lead / (1 - ratio)
    k = 0
    while bound > eps:
        bound *= ratio
        k += 1
        if k > max_terms:
            raise TruncationError("bilateral sum needs more than max_terms terms")
    return k


def h_alpha(z, params: QParams, eps=None, policy: PrecisionPolicy = DEFAULT_POLICY):
    """Bilateral sum  sum_{k in Z} 2 z q^{k(1+alpha)} / (z^2 - q^{2k}).

    Only -1 < alpha < 1 is accepted: for alpha >= 1 the k -> -inf terms grow.
    The two tails are truncated independently, with rates q^{1+alpha} (k -> +inf)
    and q^{1-alpha} (k -> -inf).
    """
    with policy.workprec():
        z = to_mp(z)
        q, alpha = to_mp(params.q), to_mp(params.alpha)
        if not -1 < alpha < 1:
            raise DomainError(f"h^alpha is only summable for -1 < alpha < 1, got {alpha}")
        if z == 0:
            return mpf(0)
        eps = policy.eps if eps is None else to_mp(eps)
        az = abs(z)
        lq = mp.log(q)
        # positive k: once q^{2k} <= |z|^2/2 each term is <= 4 q^{k(1+a)} / |z|
        k0 = max(0, int(mp.ceil(mp.log(az ** 2 / 2) / (2 * lq))) + 1)
        r_plus = q ** (1 + alpha)
        k_plus = k0 + _tail_count(r_plus, 4 * r_plus ** k0 / az, eps / 2, policy.max_terms)
        # negative k = -m: once q^{-2m} >= 2|z|^2 each term is <= 4 |z| q^{m(1-a)}
        m0 = max(0, int(mp.ceil(mp.log(2 * az ** 2) / (-2 * lq))) + 1)
        r_minus = q ** (1 - alpha)
        k_minus = m0 + _tail_count(r_minus, 4 * az * r_minus ** m0, eps / 2, policy.max_terms)

        pole_radius = q ** k_plus / 8
        z2 = z * z
        total = mpf(0)
        for k in range(-k_minus, k_plus + 1):
            qk = q ** k
            if min(abs(z - qk), abs(z + qk)) < pole_radius:
                raise PoleProximityError(f"z={z} lies within {mp.nstr(pole_radius, 3)} of the lattice point +-q^{k}")
            total += 2 * z * q ** (k * (1 + alpha)) / (z2 - qk * qk)
        return real_if_close(total)


def f_fn(z, q, eps=None, policy: PrecisionPolicy = DEFAULT_POLICY):
    """f(z) = (z^{-2}; q^2)_inf."""
    with policy.workprec():
        z = to_mp(z)
        if z == 0:
            raise DomainError("f is undefined at z = 0")
        q = to_mp(q)
        return pochhammer_inf(1 / (z * z), q * q, eps, policy)


def g_fn(z, q, eps=None, policy: PrecisionPolicy = DEFAULT_POLICY):
    """g(z) = (q^2 z^2, z^{-2}; q^2)_inf, each factor truncated at eps/2."""
    with policy.workprec():
        z = to_mp(z)
        if z == 0:
            raise DomainError("g is undefined at z = 0")
        q = to_mp(q)
        eps = policy.eps if eps is None else to_mp(eps)
        q2 = q * q
        z2 = z * z
        return real_if_close(pochhammer_inf(q2 * z2, q2, eps / 2, policy) * pochhammer_inf(1 / z2, q2, eps / 2, policy))


def g_n_fn(z, q, n: int, eps=None, policy: PrecisionPolicy = DEFAULT_POLICY):
    """g_n(z) = f(z) prod_{j=1}^{n/2} (1 - q^{2j} z^2), defined for even n."""
    if n < 0 or n % 2:
        raise DomainError(f"g_n is defined for even n >= 0 only, got n={n}")
    with policy.workprec():
        z, qm = to_mp(z), to_mp(q)
        acc = f_fn(z, qm, eps, policy)
        q2 = qm * qm
        q2j = q2
        for _ in range(n // 2):
            acc *= 1 - q2j * z * z
            q2j *= q2
        return real_if_close(acc)
