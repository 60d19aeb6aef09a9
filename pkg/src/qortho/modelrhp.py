"""Series solution of the model Riemann-Hilbert problem.

S_A and S_B solve S(qt) = M(t) S(t) near 0 with

    M_A(t) = [[1, -t], [t q^{2-alpha}, q^{-alpha} - t^2 q^{2-alpha}]],   M_B = q^alpha M_A,

and S_C solves S_C(qt) = -(q t)^{-2} M_B(t) S_C(t) near infinity.  They are
tied together by the connection identity

    S_C(t) = kappa1 g(t) h^alpha(t) S_A(t) + kappa2 g(t) S_B(t),

whose two scales are pinned at one reference point.  The model matrix is

    [[psi, phi], [varphi, rho]] = [[S_A^1 / C0, S_B^1 / kappa1], [kappa1 S_A^2, C0 S_B^2]]

with C0 = lim S_A^1 / g along the ray t = q^{-r-1/2}; its determinant is 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Any, Optional

from mpmath import mp, mpf

from .errors import DomainError, NonConvergenceError, ResonanceError, TruncationError
from .numerics import PrecisionPolicy, format_value, is_exact, real_if_close, to_mp
from .qcalc import QParams, g_fn, h_alpha, pochhammer_fin, pochhammer_inf

MODEL_POLICY = PrecisionPolicy(work_bits=512, tail_eps="1e-40")

# which component is even/odd; for C the parities refer to powers of 1/t
PARITY = {"A": ("even", "odd"), "B": ("odd", "even"), "C": ("odd", "even")}


@dataclass(frozen=True)
class SeriesSolution:
    """Coefficients of one series solution.

    A: comp1[l] multiplies t^{2l},      comp2[j] multiplies t^{2j+1}
    B: comp1[j] multiplies t^{2j+1},    comp2[l] multiplies t^{2l}
    C: comp1[j] multiplies t^{-(2j+1)}, comp2[l] multiplies t^{-2l}
    """

    label: str
    q: Any
    alpha: Any
    j_max: int
    comp1: tuple = field(repr=False)
    comp2: tuple = field(repr=False)
    seeds: tuple = ()
    exact: bool = False
    work_bits: int = MODEL_POLICY.work_bits

    @property
    def parity(self) -> tuple:
        return PARITY[self.label]

    def power(self, component: int, index: int) -> int:
        odd = self.parity[component - 1] == "odd"
        p = 2 * index + (1 if odd else 0)
        return -p if self.label == "C" else p

    def scaled(self, c1, c2=None) -> "SeriesSolution":
        """Multiply both components by c1 (and component 2 by c2 if given)."""
        c2 = c1 if c2 is None else c2
        return replace(self, comp1=tuple(c1 * x for x in self.comp1), comp2=tuple(c2 * x for x in self.comp2),
                       exact=self.exact and is_exact(c1) and is_exact(c2))

    def evaluate(self, t, eps=None, policy: Optional[PrecisionPolicy] = None):
        """(S^1(t), S^2(t)); raises TruncationError if the last terms exceed eps."""
        policy = policy or PrecisionPolicy(self.work_bits, MODEL_POLICY.tail_eps)
        with policy.workprec():
            eps = policy.eps if eps is None else to_mp(eps)
            t = to_mp(t)
            if self.label == "C":
                if t == 0:
                    raise DomainError("S_C is a series at infinity; t = 0 is excluded")
                u, odd_factor = 1 / (t * t), 1 / t
            else:
                u, odd_factor = t * t, t
            out = []
            for comp, par in zip((self.comp1, self.comp2), self.parity):
                coeffs = [to_mp(c) for c in comp]
                acc = mpf(0)
                for c in reversed(coeffs):
                    acc = acc * u + c
                if par == "odd":
                    acc *= odd_factor
                scale = abs(odd_factor) if par == "odd" else 1
                last = abs(coeffs[-1]) * abs(u) ** (len(coeffs) - 1) * scale
                before = abs(coeffs[-2]) * abs(u) ** (len(coeffs) - 2) * scale if len(coeffs) > 1 else last
                if last + before > eps * max(1, abs(acc)) and not (last == 0 and before == 0):
                    raise TruncationError(
                        f"S_{self.label} truncated at j_max={self.j_max} leaves a tail ~{mp.nstr(last + before, 3)} at |t|={mp.nstr(abs(t), 5)}")
                out.append(real_if_close(acc))
            return tuple(out)

    def to_dict(self, C0=None) -> dict:
        bits = self.work_bits
        coeffs = []
        for comp, values in ((1, self.comp1), (2, self.comp2)):
            for i, v in enumerate(values):
                coeffs.append({"component": comp, "power": self.power(comp, i), "value": format_value(v, bits)})
        out = {
            "label": self.label,
            "q": format_value(self.q),
            "alpha": format_value(self.alpha, bits),
            "j_max": self.j_max,
            "parity": list(self.parity),
            "seeds": {k: format_value(v, bits) for k, v in self.seeds},
            "coeffs": coeffs,
        }
        if C0 is not None:
            out["C0"] = format_value(C0, bits)
        return out


def _arith(params: QParams, exact: Optional[bool]):
    exact = params.exact if exact is None else exact
    if exact and not params.exact:
        raise DomainError("exact series need rational q and integer alpha")
    if exact:
        q = Fraction(params.q)
        return True, q, q ** int(params.alpha), Fraction(1)
    q = to_mp(params.q)
    return False, q, q ** to_mp(params.alpha), mpf(1)


def _check_resonance(value, ref, exact: bool, what: str):
    if value == 0 or (not exact and abs(value) <= abs(ref) * mpf(2) ** (-(mp.prec // 2))):
        raise ResonanceError(f"resonance: {what} vanishes; this alpha needs logarithmic terms")


def build_series_A(params: QParams, j_max: int, policy: PrecisionPolicy = MODEL_POLICY,
                   exact: Optional[bool] = None, seed=1) -> SeriesSolution:
    """S_A with A_{1,0} = seed; A_{2,1} is then forced to q^{2-alpha} A_{1,0} / (q - q^{-alpha}).

    A_{1,2j} = A_{2,2j-1} / (1 - q^{2j}),
    A_{2,2j+1} = q^{2-alpha} (A_{1,2j} - A_{2,2j-1}) / (q^{2j+1} - q^{-alpha}).
    """
    if j_max < 2:
        raise DomainError("j_max must be at least 2")
    with policy.workprec():
        exact, q, qa, one = _arith(params, exact)
        c = q * q / qa
        inv_qa = one / qa
        a1 = [seed * one]
        d = q - inv_qa
        _check_resonance(d, q, exact, "q - q^{-alpha}")
        a2 = [c * a1[0] / d]
        q2j = one
        for j in range(1, j_max + 1):
            q2j *= q * q
            a1.append(a2[j - 1] / (1 - q2j))
            d = q2j * q - inv_qa
            _check_resonance(d, inv_qa, exact, f"q^{2 * j + 1} - q^(-alpha)")
            a2.append(c * (a1[j] - a2[j - 1]) / d)
        return SeriesSolution("A", params.q, params.alpha, j_max, tuple(a1), tuple(a2),
                              (("A_1_0", a1[0]),), exact, policy.work_bits)


def build_series_B(params: QParams, j_max: int, policy: PrecisionPolicy = MODEL_POLICY,
                   exact: Optional[bool] = None, seed=1) -> SeriesSolution:
    """S_B with B_{2,0} = seed.

    B_{1,2j+1} = q^alpha B_{2,2j} / (q^alpha - q^{2j+1}),
    B_{2,2j+2} = q^2 (B_{2,2j} - B_{1,2j+1}) / (1 - q^{2j+2}).
    Resonant when alpha is an odd positive integer.
    """
    if j_max < 2:
        raise DomainError("j_max must be at least 2")
    with policy.workprec():
        exact, q, qa, one = _arith(params, exact)
        b2 = [seed * one]
        b1 = []
        q2j1 = q
        for j in range(j_max + 1):
            d = qa - q2j1
            _check_resonance(d, qa, exact, f"q^alpha - q^{2 * j + 1}")
            b1.append(qa * b2[j] / d)
            if j < j_max:
                b2.append(q * q * (b2[j] - b1[j]) / (1 - q2j1 * q))
            q2j1 *= q * q
        return SeriesSolution("B", params.q, params.alpha, j_max, tuple(b1), tuple(b2),
                              (("B_2_0", b2[0]),), exact, policy.work_bits)


def build_series_C(params: QParams, j_max: int, policy: PrecisionPolicy = MODEL_POLICY,
                   exact: Optional[bool] = None, seed=1) -> SeriesSolution:
    """S_C at infinity with C_{2,0} = seed; C_{1,1} = q^{alpha-1} C_{2,0} is forced.

    C_{2,2l+2} = (q^2 C_{1,2l+1} + C_{2,2l}) / (q^2 - q^{-2l}),
    C_{1,2l+3} = -q^{2l+1+alpha} (C_{1,2l+1} - C_{2,2l+2}).
    """
    if j_max < 2:
        raise DomainError("j_max must be at least 2")
    with policy.workprec():
        exact, q, qa, one = _arith(params, exact)
        c2 = [seed * one]
        c1 = [qa / q * c2[0]]
        q2l = one
        for l in range(j_max):
            c2.append((q * q * c1[l] + c2[l]) / (q * q - one / q2l))
            c1.append(-q2l * q * qa * (c1[l] - c2[l + 1]))
            q2l *= q * q
        return SeriesSolution("C", params.q, params.alpha, j_max, tuple(c1), tuple(c2),
                              (("C_2_0", c2[0]),), exact, policy.work_bits)


def M_A(t, params: QParams):
    q, a = to_mp(params.q), to_mp(params.alpha)
    c = q ** (2 - a)
    return ((1, -t), (t * c, q ** (-a) - t * t * c))


def M_B(t, params: QParams):
    q, a = to_mp(params.q), to_mp(params.alpha)
    qa = q ** a
    return ((qa, -t * qa), (t * q * q, 1 - t * t * q * q))


def _apply(m, v):
    return (m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1])


def difference_residual(series: SeriesSolution, t, policy: Optional[PrecisionPolicy] = None):
    """max-norm of the q-difference residual of ``series`` at t, relative to |S(qt)| when that exceeds 1."""
    policy = policy or PrecisionPolicy(series.work_bits, MODEL_POLICY.tail_eps)
    params = QParams(series.q, series.alpha)
    with policy.workprec():
        t = to_mp(t)
        q = to_mp(series.q)
        lhs = series.evaluate(q * t, policy=policy)
        s = series.evaluate(t, policy=policy)
        if series.label == "A":
            rhs = _apply(M_A(t, params), s)
        elif series.label == "B":
            rhs = _apply(M_B(t, params), s)
        else:
            f = -1 / (q * q * t * t)
            r = _apply(M_B(t, params), s)
            rhs = (f * r[0], f * r[1])
        scale = max(1, abs(lhs[0]), abs(lhs[1]))
        return max(abs(lhs[0] - rhs[0]), abs(lhs[1] - rhs[1])) / scale


# --------------------------------------------------------------------------
# model solution


def _series_terms_for(t_abs_log2: float, bits: int, log2_inv_q: float, margin: int = 8) -> int:
    """Terms needed for an entire series with coefficients ~ q^{j^2} at |t| = 2^{t_abs_log2}."""
    k = max(t_abs_log2, 0.0) / log2_inv_q
    return int(math.ceil(k + math.sqrt(k * k + bits / log2_inv_q))) + margin


@dataclass(frozen=True, eq=False)
class ModelSolution:
    params: QParams
    j_max: int
    series_A: SeriesSolution
    series_B: SeriesSolution
    series_C: SeriesSolution
    kappa1: Any
    kappa2: Any
    C0: Any
    C0_gap: Any
    t_star: Any
    policy: PrecisionPolicy
    normalized: bool = False

    # entries -------------------------------------------------------------
    def _check(self):
        if not self.normalized:
            raise DomainError("call normalize_det before reading the model entries")

    def psi(self, t):
        self._check()
        with self.policy.workprec():
            return self.series_A.evaluate(t, policy=self.policy)[0] / self.C0

    def varphi(self, t):
        """(2,1) entry."""
        self._check()
        with self.policy.workprec():
            return self.kappa1 * self.series_A.evaluate(t, policy=self.policy)[1]

    def phi(self, t):
        """(1,2) entry."""
        self._check()
        with self.policy.workprec():
            return self.series_B.evaluate(t, policy=self.policy)[0] / self.kappa1

    def rho(self, t):
        self._check()
        with self.policy.workprec():
            return self.C0 * self.series_B.evaluate(t, policy=self.policy)[1]

    def matrix(self, t):
        return ((self.psi(t), self.phi(t)), (self.varphi(t), self.rho(t)))

    def det(self, t):
        (a, b), (c, d) = self.matrix(t)
        with self.policy.workprec():
            return a * d - b * c

    @property
    def consistency_gap(self):
        """|kappa2 / C0 - 1|: the connection scale of S_B equals the ray limit C0."""
        with self.policy.workprec():
            return abs(self.kappa2 / self.C0 - 1)

    def to_dict(self) -> dict:
        bits = self.policy.work_bits
        return {
            "q": format_value(self.params.q),
            "alpha": format_value(self.params.alpha, bits),
            "j_max": self.j_max,
            "t_star": format_value(self.t_star, bits),
            "C0": format_value(self.C0, bits),
            "C0_gap": format_value(self.C0_gap, 64),
            "kappa1": format_value(self.kappa1, bits),
            "kappa2": format_value(self.kappa2, bits),
            "kappa2_vs_C0": format_value(self.consistency_gap, 64),
            "series": [s.to_dict() for s in (self.series_A, self.series_B, self.series_C)],
        }


def compute_C0(series_A: SeriesSolution, policy: PrecisionPolicy = MODEL_POLICY, r_max: int = 40,
               tol=None) -> tuple:
    """lim S_A^1(t)/g(t) along t_r = q^{-r-1/2}.

    T_r = S_A^1(t_r)/g(t_r) approaches the limit with corrections in powers of
    t_r^{-2} = q^{2r+1}, so the sequence is Richardson-extrapolated with the
    factors q^{2i}.  Returns (C0, gap), gap being the last change of the best
    estimate; stops once gap <= tol (default tail_eps).
    """
    params = QParams(series_A.q, series_A.alpha)
    with policy.workprec():
        tol = policy.eps if tol is None else to_mp(tol)
        q = to_mp(params.q)
        log2_inv_q = float(-mp.log(q, 2))
        guard = policy.work_bits + 64
        rows = []
        best_prev = None
        for r in range(r_max + 1):
            t_log2 = (r + 0.5) * log2_inv_q
            j = _series_terms_for(t_log2, guard, log2_inv_q)
            with mp.workprec(guard):
                sa = series_A if series_A.j_max >= j else build_series_A(
                    params, j, PrecisionPolicy(guard, policy.tail_eps), exact=False, seed=series_A.comp1[0])
                t = q ** (-r - mpf(1) / 2)
                value = sa.evaluate(t, eps=mpf(2) ** (-guard + 16), policy=PrecisionPolicy(guard, policy.tail_eps))[0]
                value = value / g_fn(t, q, mpf(2) ** (-guard), PrecisionPolicy(guard, policy.tail_eps))
            row = [value]
            for i in range(1, len(rows) + 1):
                f = q ** (2 * i)
                row.append((row[i - 1] - f * rows[-1][i - 1]) / (1 - f))
            rows.append(row)
            best = row[-1]
            if best_prev is not None:
                gap = abs(best - best_prev)
                if gap <= tol:
                    return +best, gap
            best_prev = best
        raise NonConvergenceError(f"C0 ray sequence did not settle within r <= {r_max}")


def _solve_kappas(sa, sb, sc, t, params, policy):
    a = sa.evaluate(t, policy=policy)
    b = sb.evaluate(t, policy=policy)
    c = sc.evaluate(t, policy=policy)
    g = g_fn(t, params.q, policy=policy)
    h = h_alpha(t, params, policy=policy)
    m11, m12 = g * h * a[0], g * b[0]
    m21, m22 = g * h * a[1], g * b[1]
    det = m11 * m22 - m12 * m21
    if det == 0:
        raise DomainError("connection system is singular at the reference point")
    k1 = (c[0] * m22 - m12 * c[1]) / det
    k2 = (m11 * c[1] - m21 * c[0]) / det
    return real_if_close(k1), real_if_close(k2)


def build_model(params: QParams, j_max: int = 80, policy: PrecisionPolicy = MODEL_POLICY, t_star="0.3",
                normalize: bool = True) -> ModelSolution:
    """Series A, B, C with unit seeds, the connection scales at t_star and C0."""
    with policy.workprec():
        if not -1 < to_mp(params.alpha) < 1:
            raise DomainError("the model solution needs h^alpha, i.e. -1 < alpha < 1")
        sa = build_series_A(params, j_max, policy, exact=False)
        sb = build_series_B(params, j_max, policy, exact=False)
        sc = build_series_C(params, j_max, policy, exact=False)
        t_star = to_mp(t_star)
        k1, k2 = _solve_kappas(sa, sb, sc, t_star, params, policy)
        c0, gap = compute_C0(sa, policy)
        sol = ModelSolution(params, j_max, sa, sb, sc, k1, k2, c0, gap, t_star, policy)
        return normalize_det(sol) if normalize else sol


def normalize_det(sol: ModelSolution) -> ModelSolution:
    """Fix the scales so that det [[psi, phi], [varphi, rho]] = 1.

    psi rho - phi varphi = S_A^1 S_B^2 - S_B^1 S_A^2 is a q-invariant entire
    function, hence equal to its value A_{1,0} B_{2,0} at 0; the seeds are
    rescaled so that this constant is 1.
    """
    with sol.policy.workprec():
        w0 = sol.series_A.comp1[0] * sol.series_B.comp2[0]
        if w0 == 0 or sol.C0 == 0 or sol.kappa1 == 0:
            raise DomainError("zero determinant: psi(0) rho(0) vanishes")
        if w0 != 1:
            sb = sol.series_B.scaled(1 / w0)
            sol = replace(sol, series_B=sb, kappa2=sol.kappa2 * w0)
        return replace(sol, normalized=True)


def connection_residual(sol: ModelSolution, t):
    """max-norm of S_C - kappa1 g h^alpha S_A - kappa2 g S_B at t."""
    with sol.policy.workprec():
        t = to_mp(t)
        a = sol.series_A.evaluate(t, policy=sol.policy)
        b = sol.series_B.evaluate(t, policy=sol.policy)
        c = sol.series_C.evaluate(t, policy=sol.policy)
        g = g_fn(t, sol.params.q, policy=sol.policy)
        h = h_alpha(t, sol.params, policy=sol.policy)
        return max(abs(c[i] - sol.kappa1 * g * h * a[i] - sol.kappa2 * g * b[i]) for i in (0, 1))


def g_prime_at_zero(k: int, q, policy: PrecisionPolicy = MODEL_POLICY):
    """g'(q^{-k}) for k >= 1: only the factor 1 - q^{2k} t^2 vanishes there.

    g'(q^{-k}) = -2 q^k prod_{m=1}^{k-1} (1 - q^{-2m}) (q^2; q^2)_inf (q^{2k}; q^2)_inf.
    """
    if k < 1:
        raise DomainError("g vanishes at t = q^{-k} for k >= 1 only")
    with policy.workprec():
        q = to_mp(q)
        q2 = q * q
        return (-2 * q ** k * pochhammer_fin(1 / q2, 1 / q2, k - 1)
                * pochhammer_inf(q2, q2, policy=policy) * pochhammer_inf(q ** (2 * k), q2, policy=policy))


def residue_at(sol_or_params, k: int, policy: PrecisionPolicy = MODEL_POLICY):
    """Residue of S_A^1(t)/g(t) at t = q^{-k} (raw seed A_{1,0} = 1).

    S_A^1 is tiny at these points compared with its largest terms, so the
    series is rebuilt at a precision raised by about 2 k^2 log2(1/q) bits.
    """
    params = sol_or_params.params if isinstance(sol_or_params, ModelSolution) else sol_or_params
    if k < 1:
        raise DomainError("residues sit at t = q^{-k}, k >= 1")
    with mp.workprec(128):
        log2_inv_q = float(-mp.log(to_mp(params.q), 2))
    bits = policy.work_bits + int(math.ceil(2 * k * k * log2_inv_q)) + 64
    hp = PrecisionPolicy(bits, policy.tail_eps, policy.max_terms)
    j = _series_terms_for(k * log2_inv_q, bits, log2_inv_q)
    with hp.workprec():
        sa = build_series_A(params, j, hp, exact=False)
        t = to_mp(params.q) ** (-k)
        a = sa.evaluate(t, eps=mpf(2) ** (-bits + 16), policy=hp)[0]
        res = a / g_prime_at_zero(k, params.q, hp)
    with policy.workprec():
        return +res


def residue_law(k: int, params: QParams):
    """t^4 q^{4-alpha} at t = q^{-k}: predicted Res(q^{-(k-1)}) / Res(q^{-k})."""
    q, a = to_mp(params.q), to_mp(params.alpha)
    return q ** (-4 * k) * q ** (4 - a)


def qhermite_limit_check(params: QParams, rec, n: int, t):
    """Residual of the scaled polynomial vector in the alpha = 0 limit system.

    S(t) = c_n [P_n(t q^{n/2}), q^{n/2} P_{n-1}(t q^{n/2})] with
    c_n = (-1)^{n/2} q^{-(n/2)(n/2-1)}; returns max|S(qt) - M_A(t) S(t)|, expected O(q^n).
    """
    from .orthopoly import eval_poly

    if params.alpha != 0:
        raise DomainError("the limit system is stated for alpha = 0")
    if n < 2 or n % 2 or n > rec.n_max:
        raise DomainError(f"n must be even, >= 2 and <= {rec.n_max}")
    with mp.workprec(rec.work_bits):
        q = to_mp(params.q)
        half = n // 2
        cn = (-1) ** half * q ** (-half * (half - 1))
        sq = q ** half

        def S(x):
            z = x * sq
            return (cn * eval_poly(rec, n, z), cn * sq * eval_poly(rec, n - 1, z))

        t = to_mp(t)
        lhs = S(q * t)
        rhs = _apply(M_A(t, params), S(t))
        return max(abs(lhs[0] - rhs[0]), abs(lhs[1] - rhs[1]))
