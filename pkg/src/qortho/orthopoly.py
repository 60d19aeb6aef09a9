"""Moments, three-term recurrence data and evaluation of the monic polynomials
orthogonal with respect to |x|^alpha w(x) d_q x on the lattice +-q^k.

The recurrence is built from moments by coefficient convolution; the
orthogonality residual re-sums the lattice independently.  ``hankel_oracle``
is a determinant-based cross-check that shares nothing with the Stieltjes path.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Any, Optional, Sequence

from mpmath import mp, mpf

from .errors import (
    DegenerateMeasureError,
    DivergentMomentError,
    DomainError,
    NoSignChangeError,
    TableMissError,
    TruncationError,
)
from .numerics import (
    DEFAULT_POLICY,
    PrecisionPolicy,
    format_value,
    is_exact,
    is_integer_exact,
    real_if_close,
    to_mp,
)
from .weights import WeightSpec


# --------------------------------------------------------------------------
# lattice values


@lru_cache(maxsize=64)
def lattice_weights(spec: WeightSpec, k_max: int, policy: PrecisionPolicy = DEFAULT_POLICY) -> tuple:
    """(w(q^k), w(-q^k)) for k = 0..k_max-1 as mp values, computed once per weight and policy.

    Product weights are evaluated once at the deepest point and walked back
    with their one-step ratio, e.g. w(q^k) = (1 - q^{2k+2}) w(q^{k+1}) for qhermite1.
    """
    with policy.workprec():
        if spec.kind not in ("qhermite1", "little_qjacobi") or k_max < 2:
            return tuple((to_mp(spec.lattice_value(k, 1, policy=policy)),
                          to_mp(spec.lattice_value(k, -1, policy=policy))) for k in range(k_max))
        q = to_mp(spec.q)
        last = k_max - 1
        cur = [to_mp(spec.lattice_value(last, s, policy=policy)) for s in (1, -1)]
        out = [tuple(cur)]
        for k in range(last - 1, -1, -1):
            qk1 = q ** (k + 1)
            if spec.kind == "qhermite1":
                f = 1 - qk1 * qk1
                cur = [cur[0] * f, cur[1] * f]
            else:
                b = to_mp(spec.b)
                cur = [cur[0] * (1 - qk1) / (1 - b * qk1), cur[1] * (1 + qk1) / (1 + b * qk1)]
            out.append(tuple(cur))
        return tuple(reversed(out))


def _lattice_cutoff(q, alpha, eps, wmax, max_terms) -> int:
    """K with 2 wmax sum_{k>=K} q^{k(1+alpha)} <= eps."""
    r = q ** (1 + alpha)
    bound = 2 * wmax / (1 - r)
    k = 0
    while bound > eps:
        bound *= r
        k += 1
        if k > max_terms:
            raise TruncationError("lattice sum needs more than max_terms points")
    return k


def _weight_bound(spec: WeightSpec, policy: PrecisionPolicy):
    """Crude sup |w| on the lattice tail: w(+-q^k) -> w(0) = 1 for admissible weights."""
    probe = lattice_weights(spec, min(8, _table_len(spec) or 8), policy)
    return 2 * max(max(abs(p), abs(m)) for p, m in probe) + 2


def _table_len(spec: WeightSpec) -> Optional[int]:
    if spec.kind == "user_table":
        return max(spec.table) + 1
    if spec.kind == "folded" and spec.part.table is not None:
        return spec.part.table_size
    return None


# --------------------------------------------------------------------------
# moments


@dataclass(frozen=True)
class MomentTable:
    q: Any
    alpha: Any
    weight_id: str
    mu: tuple
    exact: bool
    even: bool
    work_bits: int

    @property
    def m_max(self) -> int:
        return len(self.mu) - 1


def moments(spec: WeightSpec, n_max: int, eps=None, policy: PrecisionPolicy = DEFAULT_POLICY) -> MomentTable:
    """mu[m] = sum_k q^{k(m+alpha+1)} (w(q^k) + (-1)^m w(-q^k)) for m = 0..2 n_max + 1.

    Polynomial weights use the closed form
    mu[m] = sum_p c_p (1 + (-1)^{m+p}) / (1 - q^{m+p+alpha+1}),
    exactly when q is rational and alpha an integer.  Other weights are summed
    on the lattice with a certified tail.
    """
    if n_max < 0:
        raise DomainError("n_max must be non-negative")
    if not spec.alpha > -1:
        raise DivergentMomentError(f"moments diverge for alpha <= -1 (alpha={spec.alpha})")
    count = 2 * n_max + 2
    coeffs = spec.poly_coeffs()
    if coeffs is not None:
        exact = is_exact(spec.q) and is_integer_exact(spec.alpha) and all(is_exact(c) for c in coeffs)
        if exact:
            q, a = Fraction(spec.q), int(spec.alpha)
            mu = tuple(sum((Fraction(c) * 2 / (1 - q ** (m + p + a + 1)) for p, c in enumerate(coeffs)
                            if c != 0 and (m + p) % 2 == 0), Fraction(0)) for m in range(count))
        else:
            with policy.workprec():
                q, a = to_mp(spec.q), to_mp(spec.alpha)
                mu = tuple(sum((to_mp(c) * 2 / (1 - q ** (m + p + a + 1)) for p, c in enumerate(coeffs)
                                if c != 0 and (m + p) % 2 == 0), mpf(0)) for m in range(count))
        return MomentTable(spec.q, spec.alpha, spec.weight_id, mu, exact, spec.is_even, policy.work_bits)

    with policy.workprec():
        eps = policy.eps if eps is None else to_mp(eps)
        q, a = to_mp(spec.q), to_mp(spec.alpha)
        k_cut = _lattice_cutoff(q, a, eps, _weight_bound(spec, policy), policy.max_terms)
        size = _table_len(spec)
        if size is not None and k_cut > size:
            raise TableMissError(f"weight table stops at k={size - 1}; the moment tail needs k up to {k_cut - 1}")
        ws = lattice_weights(spec, k_cut, policy)
        base = [q ** (k * (1 + a)) for k in range(k_cut)]
        mu = []
        qk = [q ** k for k in range(k_cut)]
        powk = list(base)
        for m in range(count):
            sign = 1 if m % 2 == 0 else -1
            mu.append(sum(pk * (wp + sign * wm) for pk, (wp, wm) in zip(powk, ws)))
            powk = [p * x for p, x in zip(powk, qk)]
        return MomentTable(spec.q, spec.alpha, spec.weight_id, tuple(mu), False, spec.is_even, policy.work_bits)


def one_sided_moments(w, q, n_max: int) -> tuple:
    """Exact moments sum_k q^{k(m+1)} w(q^k) of a polynomial one-sided weight."""
    coeffs = w.poly if hasattr(w, "poly") else tuple(w)
    if coeffs is None or not is_exact(q):
        raise DomainError("one_sided_moments needs polynomial coefficients and rational q")
    q = Fraction(q)
    return tuple(sum((Fraction(c) / (1 - q ** (m + p + 1)) for p, c in enumerate(coeffs) if c != 0), Fraction(0))
                 for m in range(2 * n_max + 2))


def moment_table_from(mu: Sequence, q, alpha=0, weight_id="custom", even=False) -> MomentTable:
    """Wrap raw moments (e.g. one-sided ones) as a MomentTable."""
    exact = all(is_exact(m) for m in mu)
    return MomentTable(q, alpha, weight_id, tuple(mu), exact, even, mp.prec)


# --------------------------------------------------------------------------
# recurrence tables


@dataclass(frozen=True)
class RecurrenceTable:
    q: Any
    alpha: Any
    weight_id: str
    n_max: int
    a: tuple  # a[0] is None; a[n] for n = 1..n_max
    b: tuple  # b[n] for n = 0..n_max-1
    gamma: tuple  # gamma[n] for n = 0..n_max
    coeffs: tuple = field(repr=False)  # coeffs[n][j], lowest degree first
    exact: bool = False
    work_bits: int = DEFAULT_POLICY.work_bits

    def to_dict(self) -> dict:
        bits = self.work_bits
        return {
            "q": format_value(self.q),
            "alpha": format_value(self.alpha, bits),
            "weight": self.weight_id,
            "n_max": self.n_max,
            "exact": self.exact,
            # a_0 does not exist; index 0 is null so every array is indexed by n
            "a": [None] + [format_value(x, bits) for x in self.a[1:]],
            "b": [format_value(x, bits) for x in self.b],
            "gamma": [format_value(x, bits) for x in self.gamma],
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        out = csv.writer(buf, lineterminator="\n")
        out.writerow(["n", "a_n", "b_n", "gamma_n"])
        bits = self.work_bits
        for n in range(self.n_max + 1):
            out.writerow([
                n,
                format_value(self.a[n], bits) if n >= 1 else "",
                format_value(self.b[n], bits) if n < self.n_max else "",
                format_value(self.gamma[n], bits),
            ])
        return buf.getvalue()


def _inner(p, r, mu):
    acc = 0
    for i, pi in enumerate(p):
        if pi == 0:
            continue
        for j, rj in enumerate(r):
            if rj != 0:
                acc += pi * rj * mu[i + j]
    return acc


def _inner_scale(p, r, mu):
    acc = 0
    for i, pi in enumerate(p):
        for j, rj in enumerate(r):
            acc += abs(pi * rj * mu[i + j])
    return acc


def recurrence_stieltjes(moms: MomentTable, n_max: int) -> RecurrenceTable:
    """Stieltjes procedure on moments: gamma_n = <P_n, P_n>, b_n = <x P_n, P_n>/gamma_n.

    Inner products are coefficient convolutions against ``moms.mu``.  In
    inexact mode a gamma_n that has lost more than half the working bits to
    cancellation is treated as degenerate.
    """
    if 2 * n_max > moms.m_max:
        raise DomainError(f"moment table covers m <= {moms.m_max}; n_max={n_max} needs 2 n_max")
    mu = moms.mu
    ctx = _Ctx(moms.exact, moms.work_bits)
    with ctx:
        zero = Fraction(0) if moms.exact else mpf(0)
        one = Fraction(1) if moms.exact else mpf(1)
        floor = None if moms.exact else mpf(2) ** (-(moms.work_bits // 2))
        polys = [[one]]
        gamma, a, b = [], [None], []
        for n in range(n_max + 1):
            p = polys[n]
            g = _inner(p, p, mu)
            if g == 0 or (floor is not None and abs(g) < floor * _inner_scale(p, p, mu)):
                raise DegenerateMeasureError(f"gamma_{n} vanishes (Hankel determinant D_{n + 1} = 0)")
            gamma.append(g)
            if n >= 1:
                a.append(g / gamma[n - 1])
            if n == n_max:
                break
            xp = [zero] + p
            bn = _inner(xp, p, mu) / g
            b.append(bn)
            nxt = [xp[i] - (bn * p[i] if i < len(p) else zero) - (a[n] * polys[n - 1][i] if n >= 1 and i < len(polys[n - 1]) else zero)
                   for i in range(n + 2)]
            polys.append(nxt)
        return RecurrenceTable(moms.q, moms.alpha, moms.weight_id, n_max, tuple(a), tuple(b), tuple(gamma),
                               tuple(tuple(p) for p in polys), moms.exact, moms.work_bits)


class _Ctx:
    """workprec for inexact tables, no-op for exact ones."""

    def __init__(self, exact: bool, bits: int):
        self._cm = None if exact else mp.workprec(bits)

    def __enter__(self):
        if self._cm is not None:
            self._cm.__enter__()

    def __exit__(self, *exc):
        if self._cm is not None:
            return self._cm.__exit__(*exc)
        return False


def _det(matrix):
    """Determinant by Gaussian elimination (exact for Fractions, partial pivoting otherwise)."""
    m = [list(row) for row in matrix]
    n = len(m)
    det = 1
    for c in range(n):
        if all(is_exact(m[r][c]) for r in range(c, n)):
            piv = next((r for r in range(c, n) if m[r][c] != 0), None)
        else:
            piv = max(range(c, n), key=lambda r: abs(m[r][c]))
            if m[piv][c] == 0:
                piv = None
        if piv is None:
            return 0
        if piv != c:
            m[c], m[piv] = m[piv], m[c]
            det = -det
        pv = m[c][c]
        det *= pv
        for r in range(c + 1, n):
            f = m[r][c] / pv
            if f != 0:
                for j in range(c, n):
                    m[r][j] -= f * m[c][j]
    return det


def hankel_oracle(moms: MomentTable, n_max: int) -> RecurrenceTable:
    """Recurrence data from Hankel determinants D_n = det(mu[i+j])_{i,j<n}.

    gamma_n = D_{n+1}/D_n; the monic P_n has coefficient (-1)^{n+j} M_j / D_n
    for x^j, with M_j the minor of the moment rows 0..n-1 without column j;
    b_n is read off the subleading coefficients.
    """
    if not moms.exact:
        raise DomainError("hankel_oracle needs an exact-rational moment table")
    if 2 * n_max > moms.m_max:
        raise DomainError(f"moment table covers m <= {moms.m_max}; n_max={n_max} needs 2 n_max")
    mu = moms.mu
    with _Ctx(moms.exact, moms.work_bits):
        one = Fraction(1) if moms.exact else mpf(1)
        dets = [one]
        for n in range(1, n_max + 2):
            if 2 * n - 2 > moms.m_max:
                break
            dets.append(_det([[mu[i + j] for j in range(n)] for i in range(n)]))
        for n, d in enumerate(dets[: n_max + 1]):
            if d == 0:
                raise DegenerateMeasureError(f"Hankel determinant D_{n} vanishes")
        gamma = tuple(dets[n + 1] / dets[n] for n in range(n_max + 1))
        if any(g == 0 for g in gamma):
            raise DegenerateMeasureError("a Hankel determinant vanishes")
        coeffs = []
        for n in range(n_max + 1):
            rows = [[mu[i + j] for j in range(n + 1)] for i in range(n)]
            row = []
            for j in range(n + 1):
                minor = [[r[c] for c in range(n + 1) if c != j] for r in rows]
                row.append((-1) ** (n + j) * _det(minor) / dets[n])
            coeffs.append(tuple(row))
        a = (None,) + tuple(gamma[n] / gamma[n - 1] for n in range(1, n_max + 1))
        # P_{n+1} = (x - b_n) P_n - a_n P_{n-1}: compare x^n coefficients
        b = tuple(coeffs[n][n - 1] - coeffs[n + 1][n] if n >= 1 else -coeffs[1][0] for n in range(n_max))
        return RecurrenceTable(moms.q, moms.alpha, moms.weight_id, n_max, a, b, gamma, tuple(coeffs),
                               moms.exact, moms.work_bits)


def build_recurrence(spec: WeightSpec, n_max: int, policy: PrecisionPolicy = DEFAULT_POLICY) -> RecurrenceTable:
    """moments followed by recurrence_stieltjes."""
    return recurrence_stieltjes(moments(spec, n_max, policy=policy), n_max)


# --------------------------------------------------------------------------
# evaluation


def eval_poly(rec: RecurrenceTable, n: int, z):
    """P_n(z) by the forward three-term recurrence."""
    if not 0 <= n <= rec.n_max:
        raise DomainError(f"n={n} outside 0..{rec.n_max}")
    exact = rec.exact and is_exact(z)
    with _Ctx(exact, rec.work_bits):
        if not exact:
            z = to_mp(z)
        prev, cur = 0, (Fraction(1) if exact else mpf(1))
        for k in range(n):
            prev, cur = cur, (z - rec.b[k]) * cur - (rec.a[k] * prev if k >= 1 else 0)
        return cur if exact else real_if_close(cur)


def eval_coeffs(rec: RecurrenceTable, n: int, z):
    """P_n(z) by Horner on the stored monic coefficients."""
    if not 0 <= n <= rec.n_max:
        raise DomainError(f"n={n} outside 0..{rec.n_max}")
    exact = rec.exact and is_exact(z)
    with _Ctx(exact, rec.work_bits):
        if not exact:
            z = to_mp(z)
        acc = 0
        for c in reversed(rec.coeffs[n]):
            acc = acc * z + c
        return acc if exact else real_if_close(acc)


def orthogonality_residual(rec: RecurrenceTable, spec: WeightSpec, n: int, m: int, eps=None,
                           policy: PrecisionPolicy = DEFAULT_POLICY) -> Any:
    """|<P_n, P_m> - gamma_n delta_nm| / sqrt(gamma_n gamma_m), with <.,.> summed on the lattice.

    The lattice sum uses the recurrence values of P_n at +-q^k and the weight
    values directly, so it does not reuse the moments.  For exact tables with a
    rational q, integer alpha and a weight that is zero on no point the odd
    products vanish identically and the result is exactly 0.
    """
    for d in (n, m):
        if not 0 <= d <= rec.n_max:
            raise DomainError(f"degree {d} outside 0..{rec.n_max}")
    with policy.workprec():
        eps = policy.eps if eps is None else to_mp(eps)
        q, a = to_mp(spec.q), to_mp(spec.alpha)
        size = _table_len(spec)
        wbound = _weight_bound(spec, policy)
        total = mpf(0)
        prev_major = None
        k = 0
        chunk = 64
        ws = ()
        while True:
            if k >= len(ws):
                if size is not None and k >= size:
                    raise TableMissError(f"weight table stops at k={size - 1} before the residual sum converged")
                want = k + chunk if size is None else min(size, k + chunk)
                ws = lattice_weights(spec, want, policy)
            x = q ** k
            wp, wm = ws[k]
            pp = eval_poly(rec, n, x) * eval_poly(rec, m, x)
            pm = eval_poly(rec, n, -x) * eval_poly(rec, m, -x)
            scale = q ** (k * (1 + a))
            total += scale * (pp * wp + pm * wm)
            major = scale * (abs(pp) + abs(pm)) * wbound
            if prev_major is not None and k >= 2 and prev_major > 0:
                r = major / prev_major
                if major == 0 or (r < 1 and major * r / (1 - r) <= eps):
                    break
            prev_major = major
            k += 1
            if k > policy.max_terms:
                raise TruncationError("orthogonality residual sum did not converge within max_terms")
        gn, gm = to_mp(rec.gamma[n]), to_mp(rec.gamma[m])
        target = gn if n == m else 0
        res = abs(total - target) / mp.sqrt(abs(gn * gm))
        return res


def smallest_positive_zero(rec: RecurrenceTable, n: int, work_bits: Optional[int] = None):
    """Smallest positive zero of P_n.

    Scans the grid x = q^{j/8} upward (j descending), starting below the
    expected zero scale q^{n/2}, then bisects to relative width 2^{-bits/2}.
    """
    if n < 1:
        raise DomainError("P_0 has no zeros")
    bits = work_bits or rec.work_bits
    with mp.workprec(bits):
        q = to_mp(rec.q)

        def sign_at(x):
            v = eval_poly(rec, n, x)
            return 0 if v == 0 else (1 if v > 0 else -1)

        j = 8 * (n // 2 + 6)
        # make sure nothing hides between 0 and the first grid point
        near_zero = eval_poly(rec, n, 0)
        while near_zero != 0 and sign_at(q ** (mpf(j) / 8)) * (1 if near_zero > 0 else -1) < 0:
            j += 8 * 4
        x_prev = q ** (mpf(j) / 8)
        s_prev = sign_at(x_prev)
        lo = hi = None
        for jj in range(j - 1, -1, -1):
            x = q ** (mpf(jj) / 8)
            s = sign_at(x)
            if s == 0:
                return x
            if s_prev != 0 and s != s_prev:
                lo, hi = x_prev, x
                break
            x_prev, s_prev = x, s
        if lo is None:
            raise NoSignChangeError(f"P_{n} has no sign change on (0, 1]")
        s_lo = sign_at(lo)
        width = mpf(2) ** (-(bits // 2))
        while hi - lo > width * hi:
            mid = (lo + hi) / 2
            s = sign_at(mid)
            if s == 0:
                return mid
            if s == s_lo:
                lo = mid
            else:
                hi = mid
        return (lo + hi) / 2
