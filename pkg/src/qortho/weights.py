"""Orthogonality weights on the lattice +-q^k.

A :class:`WeightSpec` describes the weight *without* its |x|^alpha factor; the
polynomial engine applies |x|^alpha itself as q^{k alpha} on the lattice.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Mapping, Optional

from mpmath import mp, mpf

from .errors import DomainError, InadmissibleWeightError, TableMissError
from .numerics import (
    DEFAULT_POLICY,
    PrecisionPolicy,
    format_value,
    is_exact,
    parse_rational,
    to_fraction_or_mp,
    to_mp,
)
from .qcalc import LatticeFn, pochhammer_inf

KINDS = ("unit", "qhermite1", "little_qjacobi", "poly_perturbation", "user_table", "folded")

# strict vs relaxed admissibility: fitted rate <= q * (1 + RATE_TOL) counts as strict
RATE_TOL = 0.15


@dataclass(frozen=True, eq=False)
class WeightSpec:
    kind: str
    q: Any
    alpha: Any = Fraction(0)
    b: Any = None
    c: Any = None
    table: Optional[Mapping[int, tuple]] = None
    part: Optional[LatticeFn] = None
    label: Optional[str] = None

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise DomainError(f"unknown weight kind {self.kind!r}; expected one of {KINDS}")
        object.__setattr__(self, "q", to_fraction_or_mp(self.q))
        object.__setattr__(self, "alpha", to_fraction_or_mp(self.alpha))
        if not 0 < self.q < 1:
            raise DomainError(f"q out of range (0, 1): {self.q}")
        if not self.alpha > -1:
            raise DomainError(f"alpha must exceed -1, got {self.alpha}")
        if self.kind == "little_qjacobi":
            if self.b is None:
                raise DomainError("little_qjacobi needs the parameter b")
            object.__setattr__(self, "b", to_fraction_or_mp(self.b))
            if not abs(self.b) < 1 / self.q:
                raise DomainError("little_qjacobi needs |b| < 1/q so no pole meets the lattice")
        if self.kind == "poly_perturbation":
            if self.c is None:
                raise DomainError("poly_perturbation needs the parameter c")
            object.__setattr__(self, "c", to_fraction_or_mp(self.c))
        if self.kind == "user_table" and not self.table:
            raise DomainError("user_table weight needs a non-empty table")
        if self.kind == "folded" and self.part is None:
            raise DomainError("folded weight needs its w-part")

    @property
    def weight_id(self) -> str:
        if self.label:
            return self.label
        if self.kind == "little_qjacobi":
            return f"littleqjacobi:b={format_value(self.b)}"
        if self.kind == "poly_perturbation":
            return f"polyperturbation:c={format_value(self.c)}"
        return self.kind

    def poly_coeffs(self) -> Optional[tuple]:
        """Polynomial coefficients of w when w is a polynomial, else None."""
        if self.kind == "unit":
            return (Fraction(1),)
        if self.kind == "poly_perturbation":
            return (Fraction(1), Fraction(0), self.c)
        if self.kind == "folded" and self.part.poly is not None and self.part.table is None:
            return self.part.poly
        return None

    @property
    def is_even(self) -> bool:
        if self.kind == "little_qjacobi":
            return False
        if self.kind == "user_table":
            return all(p == m for p, m in self.table.values())
        return True

    def lattice_value(self, k: int, sign: int, eps=None, policy: PrecisionPolicy = DEFAULT_POLICY):
        """w(sign * q^k); exact for rational q and polynomial or tabulated weights."""
        if self.kind == "user_table":
            if k not in self.table:
                raise TableMissError(f"weight table has no entry for k={k} (stored k < {max(self.table) + 1})")
            return self.table[k][0 if sign > 0 else 1]
        if self.kind == "folded" and self.part.table is not None:
            # folded tables are stored on the fine lattice already
            return self.part.at_lattice(k, sign, self.q)
        x = self.q ** k if is_exact(self.q) else to_mp(self.q) ** k
        return eval_weight(self, x if sign > 0 else -x, eps, policy)


def eval_weight(spec: WeightSpec, x, eps=None, policy: PrecisionPolicy = DEFAULT_POLICY):
    """The weight w(x), excluding |x|^alpha."""
    kind = spec.kind
    if kind == "unit":
        return Fraction(1) if is_exact(x) else mpf(1)
    if kind == "poly_perturbation":
        if is_exact(x) and is_exact(spec.c):
            return 1 + spec.c * Fraction(x) ** 2
        with policy.workprec():
            return 1 + to_mp(spec.c) * to_mp(x) ** 2
    if kind == "user_table":
        return _table_lookup(spec, x)
    if kind == "folded":
        if spec.part.table is not None:
            return _table_lookup(spec, x)
        return spec.part(x)
    with policy.workprec():
        eps = policy.eps if eps is None else to_mp(eps)
        q, xm = to_mp(spec.q), to_mp(x)
        if kind == "qhermite1":
            return pochhammer_inf(q * q * xm * xm, q * q, eps, policy)
        # little_qjacobi: (qx; q)_inf / (bqx; q)_inf
        b = to_mp(spec.b)
        return pochhammer_inf(q * xm, q, eps / 2, policy) / pochhammer_inf(b * q * xm, q, eps / 2, policy)


def _table_lookup(spec: WeightSpec, x):
    ax = abs(x)
    if ax == 0:
        raise TableMissError("x = 0 is not a lattice point")
    sign = 1 if x > 0 else -1
    size = max(spec.table) + 1 if spec.kind == "user_table" else spec.part.table_size
    for k in range(size):
        qk = spec.q ** k
        if ax == qk or (not is_exact(ax) and abs(ax - to_mp(qk)) <= abs(ax) * mpf(2) ** (-mp.prec + 8)):
            return spec.lattice_value(k, sign)
    raise TableMissError(f"{x} is not a stored lattice point")


# --------------------------------------------------------------------------
# admissibility


@dataclass(frozen=True)
class AdmissibilityReport:
    is_strict: bool
    classification: str
    fitted_rate: Any
    c_estimate: Any
    n_range: tuple
    deviations: tuple = field(default=(), repr=False)

    def to_dict(self) -> dict:
        return {
            "is_strict": self.is_strict,
            "classification": self.classification,
            "fitted_rate": format_value(self.fitted_rate, 64),
            "c_estimate": format_value(self.c_estimate, 64),
            "n_range": [self.n_range[0], self.n_range[-1]],
            "deviations": [{"n": n, "d": format_value(d, 64)} for n, d in self.deviations],
        }


def check_admissibility(spec: WeightSpec, n_range=range(4, 21), policy: PrecisionPolicy = DEFAULT_POLICY) -> AdmissibilityReport:
    """Fit d_n = max |1 - w(+-q^{n/2})| ~ c rho^n over the even n in ``n_range``.

    strict: rho <= q (1 + RATE_TOL); relaxed: d_n still decays (so w(0) = 1)
    but more slowly; anything else raises InadmissibleWeightError.
    """
    ns = [n for n in n_range if n % 2 == 0]
    if len(ns) < 4:
        raise DomainError("n_range must contain at least 4 even values")
    with policy.workprec():
        for k in range(0, ns[-1] // 2 + 1):
            for s in (1, -1):
                if spec.lattice_value(k, s, policy=policy) == 0:
                    raise InadmissibleWeightError(f"w vanishes at lattice point {'+' if s > 0 else '-'}q^{k}")
        devs = []
        for n in ns:
            d = max(abs(1 - to_mp(spec.lattice_value(n // 2, s, policy=policy))) for s in (1, -1))
            devs.append((n, d))
        q = to_mp(spec.q)
        positive = [(n, d) for n, d in devs if d > 0]
        if not positive:
            return AdmissibilityReport(True, "strict", mpf(0), mpf(0), tuple(ns), tuple(devs))
        if len(positive) < 2:
            raise InadmissibleWeightError("too few non-zero deviations to fit a decay rate")
        xs = [mpf(n) for n, _ in positive]
        ys = [mp.log(d) for _, d in positive]
        slope, intercept = _least_squares(xs, ys)
        rate = mp.exp(slope)
        c_est = mp.exp(intercept)
        if not (rate < mpf("0.98") and positive[-1][1] < positive[0][1]):
            raise InadmissibleWeightError(
                f"deviation |1 - w(+-q^(n/2))| does not decay (fitted rate {mp.nstr(rate, 6)}); w(0) != 1")
        strict = rate <= q * (1 + RATE_TOL)
        return AdmissibilityReport(bool(strict), "strict" if strict else "relaxed", rate, c_est, tuple(ns), tuple(devs))


def _least_squares(xs, ys):
    n = len(xs)
    mx = sum(xs) / n
    my = sum(ys) / n
    sxx = sum((x - mx) ** 2 for x in xs)
    sxy = sum((x - mx) * (y - my) for x, y in zip(xs, ys))
    slope = sxy / sxx
    return slope, my - slope * mx


# --------------------------------------------------------------------------
# folding a one-sided weight onto the two-sided lattice


def _sqrt_exact(q):
    if is_exact(q):
        q = Fraction(q)
        rn, rd = _isqrt_exact(q.numerator), _isqrt_exact(q.denominator)
        if rn is not None and rd is not None:
            return Fraction(rn, rd)
    return mp.sqrt(to_mp(q))


def _isqrt_exact(n: int):
    import math

    r = math.isqrt(n)
    return r if r * r == n else None


def fold_one_sided(w_one_sided: LatticeFn, q) -> WeightSpec:
    """Turn a weight for sum_k f(q^k) w(q^k) q^k into an even two-sided weight.

    The result lives on +-rho^k with rho = sqrt(q), has w-part z -> w(z^2) and
    alpha = 1 (the |z| factor).  rho stays rational when q is a rational square.
    """
    q = to_fraction_or_mp(q)
    if not 0 < q < 1:
        raise DomainError(f"q out of range (0, 1): {q}")
    rho = _sqrt_exact(q)
    w = w_one_sided
    if w.table is not None:
        # w(rho^{2k}) = w(q^k): identical on both signs of the fine lattice
        part = LatticeFn(table={k: (v[0], v[0]) for k, v in w.table.items()})
    elif w.poly is not None:
        coeffs = []
        for c in w.poly:
            coeffs.extend([c, 0])
        part = LatticeFn.polynomial(coeffs[:-1] if len(coeffs) > 1 else coeffs)
    else:
        part = LatticeFn(func=lambda z, _w=w: _w(z * z))
    return WeightSpec("folded", rho, Fraction(1), part=part, label="folded")


# --------------------------------------------------------------------------
# construction from ids and JSON


def parse_weight(text: str, q, alpha=0) -> WeightSpec:
    """Build a catalog weight from an id such as ``littleqjacobi:b=1/3``.

    ``table:<path>`` loads a user table (its own q and alpha take precedence).
    """
    name, _, rest = text.partition(":")
    key = name.strip().lower().replace("_", "").replace("-", "")
    params = {}
    if rest and key != "table":
        for item in rest.split(","):
            k, _, v = item.partition("=")
            params[k.strip()] = parse_rational(v)
    if key == "unit":
        return WeightSpec("unit", q, alpha)
    if key in ("qhermite1", "qhermite", "discreteqhermite1"):
        return WeightSpec("qhermite1", q, alpha)
    if key == "littleqjacobi":
        return WeightSpec("little_qjacobi", q, alpha, b=params.get("b"))
    if key == "polyperturbation":
        return WeightSpec("poly_perturbation", q, alpha, c=params.get("c"))
    if key == "table":
        return load_user_table(rest)
    raise DomainError(f"unknown weight id {text!r}")


def load_user_table(source) -> WeightSpec:
    """Load ``{"q": "1/2", "alpha": 0, "values": [{"k": 0, "plus": "1", "minus": "1"}, ...]}``.

    ``source`` is a path, a JSON string or an already-parsed dict.
    """
    if isinstance(source, Mapping):
        doc = source
    else:
        text = str(source)
        doc = json.loads(text) if text.lstrip().startswith("{") else json.loads(Path(text).read_text())
    try:
        q = parse_rational(str(doc["q"]))
        alpha = parse_rational(str(doc.get("alpha", 0)))
        table = {int(row["k"]): (parse_rational(str(row["plus"])), parse_rational(str(row["minus"])))
                 for row in doc["values"]}
    except (KeyError, TypeError) as exc:
        raise DomainError(f"malformed weight table: {exc}") from exc
    if sorted(table) != list(range(len(table))):
        raise DomainError("weight table must cover k = 0..K without gaps")
    return WeightSpec("user_table", q, alpha, table=table, label="user_table")


def dump_user_table(spec: WeightSpec) -> dict:
    if spec.kind != "user_table":
        raise DomainError("only user_table weights serialise to the table format")
    return {
        "q": format_value(spec.q),
        "alpha": format_value(spec.alpha),
        "values": [{"k": k, "plus": format_value(p), "minus": format_value(m)} for k, (p, m) in sorted(spec.table.items())],
    }
