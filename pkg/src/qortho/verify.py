"""Numerical checks of the large-degree asymptotics.

Every check produces an :class:`AsymptoticReport`: per-n errors, a decay rate
fitted by least squares on log e_n, and a pass flag for the claim's band.
Rates are reported per unit n (``fitted_rate``) and per even step
(``step_rate`` = fitted_rate^2), since all claims concern even n.
"""

from __future__ import annotations

import csv
import io
import time
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Iterable, Optional, Sequence

from mpmath import mp, mpc, mpf

from .errors import DomainError, NoSignChangeError
from .modelrhp import ModelSolution, connection_residual
from .numerics import (
    PrecisionPolicy,
    format_value,
    is_exact,
    required_bits,
    to_mp,
)
from .orthopoly import RecurrenceTable, build_recurrence, eval_poly, smallest_positive_zero
from .qcalc import QParams, f_fn, pochhammer_inf
from .weights import WeightSpec

# off-lattice points for the connection and determinant checks
DEFAULT_GRID = (
    "0.3", "1.7j", "-2.4+0.3j", "0.5+0.5j", "-0.7", "1.3",
    "0.9j", "2.5-1.1j", "-1.5-0.4j", "0.15+0.05j", "2.83", "-1.1+1.9j",
)


def grid_points(grid: Sequence[str] = DEFAULT_GRID):
    return [mpc(complex(s)) if "j" in s else mpf(s) for s in grid]


def recurrence_policy(q, alpha, n_max: int, guard_bits: int = 32) -> PrecisionPolicy:
    """Working precision for moment-based recurrences up to degree n_max.

    Building P_n from O(1) moments cancels about as many bits as the scale of
    gamma_n, and the degeneracy floor wants half the bits left, so the
    required_bits estimate is doubled.
    """
    bits = 2 * required_bits(q, alpha, n_max, guard_bits)
    return PrecisionPolicy(work_bits=bits, tail_eps=Fraction(1, 2 ** (bits - guard_bits)), derived_guard_bits=guard_bits)


# --------------------------------------------------------------------------
# reports


@dataclass(frozen=True)
class AsymptoticReport:
    claim: str
    q: Any
    alpha: Any
    weight: str
    ns: tuple
    errors: tuple
    fitted_rate: Any
    fit_residual: Any
    passed: bool
    band: Optional[tuple] = None
    ms: Optional[tuple] = None
    extra: dict = field(default_factory=dict)

    @property
    def step_rate(self):
        return None if self.fitted_rate is None else self.fitted_rate ** 2

    def ratios(self) -> list:
        """e_{n+2}/e_n for consecutive entries."""
        return [self.errors[i + 1] / self.errors[i] if self.errors[i] != 0 else None
                for i in range(len(self.errors) - 1)]

    def to_dict(self) -> dict:
        rows = []
        for i, n in enumerate(self.ns):
            row = {"n": n, "error": format_value(self.errors[i], 64)}
            if self.ms is not None:
                row["ms"] = self.ms[i]
            rows.append(row)
        out = {
            "claim": self.claim,
            "q": format_value(self.q),
            "alpha": format_value(self.alpha, 64),
            "weight": self.weight,
            "rows": rows,
            "fitted_rate": None if self.fitted_rate is None else format_value(self.fitted_rate, 64),
            "step_rate": None if self.fitted_rate is None else format_value(self.step_rate, 64),
            "fit_residual": None if self.fit_residual is None else format_value(self.fit_residual, 64),
            "passed": self.passed,
        }
        if self.band is not None:
            out["band"] = [format_value(b, 64) for b in self.band]
        for k, v in self.extra.items():
            out[k] = _jsonable(v)
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "error"] + (["ms"] if self.ms is not None else []))
        for i, n in enumerate(self.ns):
            w.writerow([n, format_value(self.errors[i], 64)] + ([self.ms[i]] if self.ms is not None else []))
        return buf.getvalue()


def _jsonable(v):
    if isinstance(v, (bool, int, str)) or v is None:
        return v
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return format_value(v, 64)


def fit_decay_rate(ns: Sequence[int], errors: Sequence, floor=None, last: int = 4) -> tuple:
    """Least-squares fit of log e_n = c + n log rate over the largest ``last`` n with e_n above ``floor``.

    Returns (rate per unit n, rms residual of the fit); (None, None) when fewer
    than two usable points remain.
    """
    with mp.workprec(128):
        pts = [(mpf(n), mp.log(to_mp(abs(e)))) for n, e in zip(ns, errors)
               if e != 0 and (floor is None or abs(e) > floor)]
        pts = pts[-last:]
        if len(pts) < 2:
            return None, None
        k = len(pts)
        mx = sum(x for x, _ in pts) / k
        my = sum(y for _, y in pts) / k
        sxx = sum((x - mx) ** 2 for x, _ in pts)
        slope = sum((x - mx) * (y - my) for x, y in pts) / sxx
        resid = mp.sqrt(sum((y - my - slope * (x - mx)) ** 2 for x, y in pts) / k)
        return mp.exp(slope), resid


def _even(n_set: Iterable[int]) -> tuple:
    ns = tuple(sorted(set(n_set)))
    if any(n % 2 for n in ns):
        raise DomainError("the asymptotic claims are stated for even n")
    return ns


class _Timer:
    def __init__(self, enabled: bool):
        self.enabled = enabled
        self.ms = []

    def run(self, fn: Callable):
        t0 = time.perf_counter()
        out = fn()
        if self.enabled:
            self.ms.append(round((time.perf_counter() - t0) * 1000, 3))
        return out

    def result(self):
        return tuple(self.ms) if self.enabled else None


def _in_band(rate, band) -> bool:
    return rate is not None and band[0] <= rate <= band[1]


# --------------------------------------------------------------------------
# leading-order asymptotics of gamma_n and a_n


def gamma_constants(params: QParams, policy: Optional[PrecisionPolicy] = None) -> dict:
    """The two candidate leading constants 2 (q^2;q^2)^2 and 2 (q^2;q^2)."""
    policy = policy or PrecisionPolicy()
    with policy.workprec():
        q = to_mp(params.q)
        p = pochhammer_inf(q * q, q * q, policy=policy)
        return {"squared": 2 * p * p, "unsquared": 2 * p}


def predict_gamma(n: int, params: QParams, variant: str = "squared", policy: Optional[PrecisionPolicy] = None):
    """q^{n(n-1+alpha)/2} times the leading constant."""
    if n < 0 or n % 2:
        raise DomainError("predict_gamma is stated for even n >= 0")
    policy = policy or PrecisionPolicy()
    with policy.workprec():
        q, a = to_mp(params.q), to_mp(params.alpha)
        return q ** (mpf(n) * (n - 1 + a) / 2) * gamma_constants(params, policy)[variant]


def predict_gamma_companion(n: int, params: QParams, variant: str = "squared",
                            policy: Optional[PrecisionPolicy] = None):
    """Prediction for gamma_{n-1}: q^{((n-2)/2)(n-1+alpha)} times the same constant."""
    if n < 2 or n % 2:
        raise DomainError("the companion prediction needs even n >= 2")
    policy = policy or PrecisionPolicy()
    with policy.workprec():
        q, a = to_mp(params.q), to_mp(params.alpha)
        return q ** (mpf(n - 2) / 2 * (n - 1 + a)) * gamma_constants(params, policy)[variant]


def predict_a(n: int, params: QParams):
    """q^{n-1+alpha}; exact for rational q and integer alpha."""
    if n < 1:
        raise DomainError("a_n is defined for n >= 1")
    if params.exact:
        return Fraction(params.q) ** (n - 1 + int(params.alpha))
    return to_mp(params.q) ** (n - 1 + to_mp(params.alpha))


@dataclass(frozen=True)
class Theorem2Result:
    gamma: AsymptoticReport
    a: AsymptoticReport
    constant_variant: Optional[str]
    variant_errors: dict

    @property
    def passed(self) -> bool:
        return self.gamma.passed and self.a.passed and self.constant_variant is not None

    def to_dict(self) -> dict:
        return {
            "claim": "theorem2",
            "constant_variant": self.constant_variant,
            "variant_errors": {k: [format_value(e, 64) for e in v] for k, v in self.variant_errors.items()},
            "gamma": self.gamma.to_dict(),
            "a": self.a.to_dict(),
            "passed": self.passed,
        }


def _decays(errors) -> bool:
    """Crude "e_n -> 0": the last error is a tenth of the first and the fit rate is below 1."""
    rate, _ = fit_decay_rate(list(range(0, 2 * len(errors), 2)), errors)
    return rate is not None and rate < mpf("0.95") and abs(errors[-1]) * 10 < abs(errors[0])


def theorem2_report(rec: RecurrenceTable, params: QParams, n_set=range(4, 17, 2), band_factor=(0.7, 1.3),
                    timings: bool = False, mono_from: int = 8) -> Theorem2Result:
    """gamma_n and a_n against their predictions.

    Passes when the gamma errors decrease from ``mono_from`` on, both step rates
    lie in band_factor * q^2 and exactly one constant variant gives e_n -> 0.
    """
    ns = _even(n_set)
    if ns[-1] > rec.n_max:
        raise DomainError(f"table stops at n={rec.n_max}")
    policy = PrecisionPolicy(rec.work_bits)
    with policy.workprec():
        q = to_mp(params.q)
        band = (band_factor[0] * q * q, band_factor[1] * q * q)
        consts = gamma_constants(params, policy)
        timer = _Timer(timings)
        variant_errors = {}
        for name in consts:
            variant_errors[name] = [abs(to_mp(rec.gamma[n]) / predict_gamma(n, params, name, policy) - 1) for n in ns]
        decaying = [name for name, errs in variant_errors.items() if _decays(errs)]
        variant = decaying[0] if len(decaying) == 1 else None
        g_err = tuple(timer.run(lambda n=n: abs(to_mp(rec.gamma[n]) / predict_gamma(n, params, variant or "squared", policy) - 1))
                      for n in ns)
        g_ms = timer.result()
        timer = _Timer(timings)
        a_err = tuple(timer.run(lambda n=n: abs(to_mp(rec.a[n]) / to_mp(predict_a(n, params)) - 1)) for n in ns)
        a_ms = timer.result()
        floor = mpf(2) ** (-(rec.work_bits // 2))
        g_rate, g_res = fit_decay_rate(ns, g_err, floor)
        a_rate, a_res = fit_decay_rate(ns, a_err, floor)
        mono = all(g_err[i + 1] < g_err[i] for i in range(len(ns) - 1) if ns[i] >= mono_from)
        g_ok = mono and g_rate is not None and _in_band(g_rate ** 2, band)
        a_ok = a_rate is not None and _in_band(a_rate ** 2, band)
        if variant is None:
            warnings.warn(f"constant variants decaying: {decaying or 'none'}; expected exactly one")
        gamma_rep = AsymptoticReport("theorem2.gamma", params.q, params.alpha, rec.weight_id, ns, g_err, g_rate, g_res,
                                     bool(g_ok and variant is not None), band, g_ms,
                                     {"variant": variant, "monotone_from": mono_from, "monotone": mono})
        a_rep = AsymptoticReport("theorem2.a", params.q, params.alpha, rec.weight_id, ns, a_err, a_rate, a_res,
                                 bool(a_ok), band, a_ms)
        return Theorem2Result(gamma_rep, a_rep, variant, {k: tuple(v) for k, v in variant_errors.items()})


# --------------------------------------------------------------------------
# scaled polynomials against the model solution


def _scaled_pn(rec: RecurrenceTable, n: int, t):
    half = n // 2
    q = to_mp(rec.q)
    return (-1) ** half * q ** (-half * (half - 1)) * eval_poly(rec, n, to_mp(t) * q ** half)


def theorem1_inner_error(rec: RecurrenceTable, sol: ModelSolution, n: int, t):
    """|(-1)^{n/2} q^{-(n/2)(n/2-1)} P_n(t q^{n/2}) - psi(t)|."""
    if n % 2 or n < 2:
        raise DomainError("n must be even and >= 2")
    with mp.workprec(max(rec.work_bits, sol.policy.work_bits)):
        return abs(_scaled_pn(rec, n, t) - sol.psi(t))


def theorem1_companion_error(rec: RecurrenceTable, sol: ModelSolution, n: int, t):
    """|(-1)^{n/2} q^{(n/2)(n/2-1+alpha)} gamma_{n-1}^{-1} P_{n-1}(t q^{n/2}) - varphi(t)|."""
    if n % 2 or n < 2:
        raise DomainError("n must be even and >= 2")
    with mp.workprec(max(rec.work_bits, sol.policy.work_bits)):
        half = n // 2
        q, a = to_mp(rec.q), to_mp(rec.alpha)
        val = (-1) ** half * q ** (half * (half - 1 + a)) / to_mp(rec.gamma[n - 1]) * eval_poly(rec, n - 1, to_mp(t) * q ** half)
        return abs(val - sol.varphi(t))


def theorem1_outer_error(rec: RecurrenceTable, n: int, z, normalized: bool = True):
    """Outer-region error of P_n(z) against z^n (z^{-2}; q^2)_inf.

    ``normalized`` (default) returns |z^{-n} P_n(z) - f(z)|, which is O(q^n);
    the unnormalized |P_n(z) - z^n f(z)| carries the extra factor |z|^n.
    """
    with mp.workprec(rec.work_bits):
        z = to_mp(z)
        q = to_mp(rec.q)
        k = int(mp.nint(mp.log(abs(z)) / mp.log(q))) if z != 0 else 0
        if k >= 0 and abs(abs(z) - q ** k) < q ** k * mpf("1e-6"):
            warnings.warn(f"z={z} sits near the lattice point +-q^{k}, where f vanishes")
        f = f_fn(z, q, policy=PrecisionPolicy(rec.work_bits))
        p = eval_poly(rec, n, z)
        return abs(p / z ** n - f) if normalized else abs(p - z ** n * f)


def _band_ratios(errors, band) -> bool:
    return all(e0 != 0 and band[0] <= e1 / e0 <= band[1] for e0, e1 in zip(errors, errors[1:]))


def theorem1_report(rec: RecurrenceTable, sol: Optional[ModelSolution], n_set=(8, 10, 12), ts=("0", "0.7"),
                    zs=("0.75", "2"), band_factor=(0.5, 2.0), timings: bool = False) -> list:
    """Inner, companion and outer error sequences; each passes if every e_{n+2}/e_n is in band_factor * q^2."""
    ns = _even(n_set)
    reports = []
    with mp.workprec(rec.work_bits):
        q = to_mp(rec.q)
        band = (band_factor[0] * q * q, band_factor[1] * q * q)
    jobs = []
    if sol is not None:
        for t in ts:
            jobs.append((f"theorem1.inner[t={t}]", lambda n, t=t: theorem1_inner_error(rec, sol, n, mpf(t))))
            if mpf(t) != 0:  # both sides of the companion row are odd
                jobs.append((f"theorem1.companion[t={t}]", lambda n, t=t: theorem1_companion_error(rec, sol, n, mpf(t))))
    for z in zs:
        jobs.append((f"theorem1.outer[z={z}]", lambda n, z=z: theorem1_outer_error(rec, n, mpf(z))))
    for claim, fn in jobs:
        timer = _Timer(timings)
        errs = tuple(timer.run(lambda n=n: fn(n)) for n in ns)
        rate, res = fit_decay_rate(ns, errs)
        ok = _band_ratios(errs, band)
        reports.append(AsymptoticReport(claim, rec.q, rec.alpha, rec.weight_id, ns, errs, rate, res, bool(ok),
                                        band, timer.result(),
                                        {"ratios": [e1 / e0 if e0 != 0 else None for e0, e1 in zip(errs, errs[1:])]}))
    return reports


# --------------------------------------------------------------------------
# b_n, Painleve, zeros, universality


def bn_decay_check(rec: RecurrenceTable, n_set=range(4, 17, 2), timings: bool = False) -> AsymptoticReport:
    """|b_n| over n_set; passes when all vanish or the sequence decays (no rate is asserted)."""
    ns = _even(n_set)
    if ns[-1] >= len(rec.b):
        raise DomainError(f"b_n is stored for n < {len(rec.b)}; build the table to n_max > {ns[-1]}")
    with mp.workprec(rec.work_bits):
        timer = _Timer(timings)
        errs = tuple(timer.run(lambda n=n: abs(to_mp(rec.b[n]))) for n in ns)
        if all(e == 0 for e in errs):
            return AsymptoticReport("bn", rec.q, rec.alpha, rec.weight_id, ns, errs, None, None, True,
                                    None, timer.result(), {"identically_zero": True})
        rate, res = fit_decay_rate(ns, errs)
        ok = rate is not None and rate < 1 and errs[-1] < errs[0]
        return AsymptoticReport("bn", rec.q, rec.alpha, rec.weight_id, ns, errs, rate, res, bool(ok), None,
                                timer.result(), {"identically_zero": False})


def painleve_residual(a_seq, n: int, q):
    """|LHS/RHS - 1| for
    a_n (a_{n+1} + q^{1-n} a_n + q^2 a_{n-1} + q^{3-2n} a_{n+1} a_n a_{n-1}) = q^{n-1} (1 - q^n).

    ``a_seq[n]`` must exist for n-1, n, n+1.  Exact when all inputs are rational.
    """
    if n < 2:
        raise DomainError("need n >= 2 so that a_{n-1} exists and the right-hand side is non-zero")
    vals = [a_seq[n - 1], a_seq[n], a_seq[n + 1]]
    if all(is_exact(v) for v in vals) and is_exact(q):
        q = Fraction(q)
        am, a0, ap = (Fraction(v) for v in vals)
    else:
        q = to_mp(q)
        am, a0, ap = (to_mp(v) for v in vals)
    rhs = q ** (n - 1) * (1 - q ** n)
    if rhs == 0:
        raise ZeroDivisionError("right-hand side vanishes")
    lhs = a0 * (ap + q ** (1 - n) * a0 + q ** 2 * am + q ** (3 - 2 * n) * ap * a0 * am)
    return abs(lhs / rhs - 1)


def model_a_sequence(q, n_max: int) -> list:
    """a_n = q^{n-1}, with a placeholder at index 0."""
    q = Fraction(q) if is_exact(q) else to_mp(q)
    return [None] + [q ** (n - 1) for n in range(1, n_max + 1)]


def painleve_report(rec: RecurrenceTable, n_set=None, band_factor=(0.7, 1.3), timings: bool = False) -> list:
    """Residual for the computed a_n and for the model sequence; each decay rate must lie in band_factor * q."""
    n_set = tuple(n_set or range(4, rec.n_max))
    if max(n_set) + 1 > rec.n_max:
        raise DomainError("painleve residual needs a_{n+1}")
    out = []
    with mp.workprec(rec.work_bits):
        q = to_mp(rec.q)
        band = (band_factor[0] * q, band_factor[1] * q)
        for label, seq in (("computed", list(rec.a)), ("model", model_a_sequence(rec.q, rec.n_max))):
            timer = _Timer(timings)
            errs = tuple(timer.run(lambda n=n: painleve_residual(seq, n, rec.q)) for n in n_set)
            rate, res = fit_decay_rate(n_set, errs)
            out.append(AsymptoticReport(f"painleve.{label}", rec.q, rec.alpha, rec.weight_id, tuple(n_set), errs,
                                        rate, res, _in_band(rate, band), band, timer.result()))
    return out


def smallest_zero_psi(sol: ModelSolution, t_max="20", step="0.05"):
    """Smallest positive zero of psi by a uniform sign scan and bisection."""
    with sol.policy.workprec():
        step, t_max = mpf(step), mpf(t_max)
        lo, f_lo = mpf(0), sol.psi(0)
        t = step
        while t <= t_max:
            f = sol.psi(t)
            if f == 0:
                return t
            if (f > 0) != (f_lo > 0):
                hi = t
                width = mpf(2) ** (-(sol.policy.work_bits // 2))
                while hi - lo > width * hi:
                    mid = (lo + hi) / 2
                    fm = sol.psi(mid)
                    if (fm > 0) == (f_lo > 0):
                        lo = mid
                    else:
                        hi = mid
                return (lo + hi) / 2
            lo, f_lo = t, f
            t += step
        raise NoSignChangeError(f"psi has no sign change on (0, {t_max}]")


def smallest_zero_scaling(rec: RecurrenceTable, sol: ModelSolution, n_set=range(4, 17, 2), ratio_cap=2.0,
                          timings: bool = False) -> AsymptoticReport:
    """r_n = (smallest positive zero of P_n) / q^{n/2} against the smallest zero t* of psi.

    Passes when |r_n - t*| shrinks by at most ratio_cap * q^2 per even step.
    """
    ns = _even(n_set)
    with mp.workprec(max(rec.work_bits, sol.policy.work_bits)):
        q = to_mp(rec.q)
        t_star = smallest_zero_psi(sol)
        timer = _Timer(timings)
        rs = tuple(timer.run(lambda n=n: smallest_positive_zero(rec, n) / q ** (mpf(n) / 2)) for n in ns)
        errs = tuple(abs(r - t_star) for r in rs)
        rate, res = fit_decay_rate(ns, errs)
        cap = ratio_cap * q * q
        ok = all(e0 != 0 and e1 / e0 <= cap for e0, e1 in zip(errs, errs[1:]))
        return AsymptoticReport("zeros", rec.q, rec.alpha, rec.weight_id, ns, errs, rate, res, bool(ok),
                                (mpf(0), cap), timer.result(), {"t_star": t_star, "r_n": list(rs)})


def universality_report(recs: Sequence[RecurrenceTable], params: QParams, n_ref: int = 16) -> dict:
    """Scaled norms gamma_n / q^{n(n-1+alpha)/2} at n_ref for several weights.

    Passes when every pair agrees within 10 * max(e_ref) in relative terms,
    e_ref being each weight's |gamma_ref / predict_gamma(n_ref) - 1|.
    """
    bits = max(r.work_bits for r in recs)
    policy = PrecisionPolicy(bits)
    with policy.workprec():
        q, a = to_mp(params.q), to_mp(params.alpha)
        scale = q ** (mpf(n_ref) * (n_ref - 1 + a) / 2)
        limits = {r.weight_id: to_mp(r.gamma[n_ref]) / scale for r in recs}
        errs = {r.weight_id: abs(to_mp(r.gamma[n_ref]) / predict_gamma(n_ref, params, "squared", policy) - 1) for r in recs}
        pairs = []
        ok = True
        names = list(limits)
        for i in range(len(names)):
            for j in range(i + 1, len(names)):
                u, v = names[i], names[j]
                diff = abs(limits[u] / limits[v] - 1)
                tol = 10 * max(errs[u], errs[v])
                pairs.append({"pair": [u, v], "rel_diff": diff, "tol": tol, "ok": bool(diff <= tol)})
                ok = ok and diff <= tol
        return {
            "claim": "universality",
            "n_ref": n_ref,
            "limits": {k: _jsonable(v) for k, v in limits.items()},
            "errors": {k: _jsonable(v) for k, v in errs.items()},
            "pairs": [_jsonable(p) for p in pairs],
            "passed": bool(ok),
        }


# --------------------------------------------------------------------------
# model identities


def connection_report(sol: ModelSolution, grid: Sequence[str] = DEFAULT_GRID, tol="1e-25") -> dict:
    with sol.policy.workprec():
        res = [connection_residual(sol, t) for t in grid_points(grid)]
        worst = max(res)
        return {"claim": "connection", "grid": list(grid), "residuals": [_jsonable(r) for r in res],
                "max_residual": _jsonable(worst), "tol": tol, "passed": bool(worst <= mpf(tol))}


def det_report(sol: ModelSolution, grid: Sequence[str] = DEFAULT_GRID, tol="1e-25") -> dict:
    with sol.policy.workprec():
        res = [abs(sol.det(t) - 1) for t in grid_points(grid)]
        worst = max(res)
        return {"claim": "det", "grid": list(grid), "residuals": [_jsonable(r) for r in res],
                "max_residual": _jsonable(worst), "tol": tol, "passed": bool(worst <= mpf(tol))}


def build_for(spec: WeightSpec, n_max: int, policy: Optional[PrecisionPolicy] = None) -> RecurrenceTable:
    """Recurrence table with the precision sized by recurrence_policy."""
    policy = policy or recurrence_policy(spec.q, spec.alpha, n_max)
    return build_recurrence(spec, n_max, policy)
