from fractions import Fraction
import random

import pytest
from mpmath import mp, mpc, mpf

from qortho.errors import DomainError, ResonanceError, TruncationError
from qortho.modelrhp import (
    MODEL_POLICY,
    build_model,
    build_series_A,
    build_series_B,
    build_series_C,
    compute_C0,
    connection_residual,
    difference_residual,
    g_prime_at_zero,
    qhermite_limit_check,
    residue_at,
    residue_law,
)
from qortho.numerics import PrecisionPolicy, to_mp
from qortho.orthopoly import eval_poly
from qortho.qcalc import QParams, g_fn

HALF = Fraction(1, 2)
P0 = QParams(HALF, 0)
TOL = mpf(10) * mpf("1e-40")
# 1 / (q; q^2)_inf at q = 1/2 from a plain 400-factor product at 60 digits
INV_Q_Q2 = "2.3842310290313717241498992886783972387716195165084334576921"


# --------------------------------------------------------------------------
# independent oracle: the q-difference equation read coefficient by coefficient
# as one square linear system in all powers (no parity assumed), solved by
# plain Gaussian elimination


def _rows(label, q, qa, n):
    """Equations for u_0..u_n (component 1) and v_0..v_n (component 2)."""
    one = q ** 0
    U = lambda m: m
    V = lambda m: n + 1 + m
    rows = []
    for m in range(n + 1):
        r1, r2 = {}, {}

        def add(r, idx, c):
            if idx is not None:
                r[idx] = r.get(idx, 0) + c

        prev = lambda f, k: f(k) if k >= 0 else None
        if label == "A":  # S(qt) = M_A(t) S(t)
            c = q * q / qa
            add(r1, U(m), q ** m - one); add(r1, prev(V, m - 1), one)
            add(r2, V(m), q ** m - one / qa); add(r2, prev(U, m - 1), -c); add(r2, prev(V, m - 2), c)
        elif label == "B":  # S(qt) = M_B(t) S(t)
            add(r1, U(m), q ** m - qa); add(r1, prev(V, m - 1), qa)
            add(r2, V(m), q ** m - one); add(r2, prev(U, m - 1), -q * q); add(r2, prev(V, m - 2), q * q)
        else:  # in s = 1/t: S(s/q) = -(s^2/q^2) M_B(1/s) S(s)
            add(r1, U(m), q ** -m); add(r1, prev(U, m - 2), qa / q ** 2); add(r1, prev(V, m - 1), -qa / q ** 2)
            add(r2, V(m), q ** -m - one); add(r2, prev(U, m - 1), one); add(r2, prev(V, m - 2), q ** -2)
        rows += [r1, r2]
    return rows


def _solve(rows, pins, size, zero):
    # trivial equations (identically zero) are replaced by the seed pins
    eqs = [(r, zero) for r in rows if any(v != 0 for v in r.values())]
    eqs += [({i: zero + 1}, val) for i, val in pins.items()]
    assert len(eqs) == size
    A = [[r.get(j, zero) for j in range(size)] + [b] for r, b in eqs]
    for col in range(size):
        piv = max(range(col, size), key=lambda i: abs(A[i][col]))
        A[col], A[piv] = A[piv], A[col]
        for i in range(size):
            if i != col and A[i][col] != 0:
                f = A[i][col] / A[col][col]
                A[i] = [x - f * y for x, y in zip(A[i], A[col])]
    return [A[i][size] / A[i][i] for i in range(size)]


def oracle(label, q, qa, n, seed):
    zero = q * 0
    rows = _rows(label, q, qa, n)
    pins = {"A": {0: seed}, "B": {n + 1: seed}, "C": {n + 1: seed}}[label]
    nontrivial = sum(1 for r in rows if any(v != 0 for v in r.values()))
    if nontrivial + len(pins) < 2 * n + 2:  # alpha = 0: the other parity's seed is pinned to zero
        pins[{"A": n + 1, "B": 0, "C": 0}[label]] = zero
    sol = _solve(rows, pins, 2 * n + 2, zero)
    return sol[: n + 1], sol[n + 1:]


def _compare(series, u, v, close):
    n = len(u) - 1
    comps = {1: u, 2: v}
    seen = {1: set(), 2: set()}
    for c, coeffs in ((1, series.comp1), (2, series.comp2)):
        for i, val in enumerate(coeffs):
            p = abs(series.power(c, i))
            if p <= n:
                assert close(comps[c][p], val)
                seen[c].add(p)
    # every power not carried by the series vanishes in the oracle (parity)
    for c in (1, 2):
        for p in range(n + 1):
            if p not in seen[c]:
                assert comps[c][p] == 0


@pytest.mark.parametrize("label,build", [("A", build_series_A), ("B", build_series_B), ("C", build_series_C)])
def test_series_match_linear_system_exact(label, build):
    s = build(P0, 8, seed=Fraction(3, 5))
    assert s.exact
    u, v = oracle(label, HALF, Fraction(1), 14, Fraction(3, 5))
    _compare(s, u, v, lambda a, b: a == b)


@pytest.mark.parametrize("label,build", [("A", build_series_A), ("B", build_series_B), ("C", build_series_C)])
def test_series_match_linear_system_mp(label, build):
    p = QParams(Fraction(1, 3), Fraction(1, 2))
    with mp.workprec(300):
        s = build(p, 10, PrecisionPolicy(300, "1e-60"))
        q = to_mp(p.q)
        u, v = oracle(label, q, q ** mpf("0.5"), 16, mpf(1))
        _compare(s, u, v, lambda a, b: abs(a - b) <= mpf("1e-70") * max(1, abs(b)))


def test_series_A_examples():
    s = build_series_A(P0, 6)
    assert s.comp2[1] / s.comp2[0] == Fraction(-2, 21)
    assert s.comp1[1] / s.comp2[0] == Fraction(4, 3)
    q = HALF
    for j in range(3, 7):
        assert abs(s.comp2[j] / s.comp2[j - 1]) <= q ** (2 * j - 1)


def test_parities_recorded():
    assert build_series_A(P0, 3).parity == ("even", "odd")
    assert build_series_B(P0, 3).parity == ("odd", "even")
    assert build_series_C(P0, 3).parity == ("odd", "even")


def test_resonance_rejected():
    with pytest.raises(ResonanceError):
        build_series_B(QParams(HALF, 1), 5)
    with pytest.raises(ResonanceError):
        build_series_B(QParams(HALF, 3), 5)
    with pytest.raises(DomainError):
        build_series_A(P0, 1)


def test_series_to_dict():
    d = build_series_A(P0, 3).to_dict(C0=Fraction(2))
    assert d["label"] == "A" and d["C0"] == "2"
    assert {"component": 2, "power": 3, "value": "1/21"} in d["coeffs"]


def _points(seed, count=10, radius=2):
    rng = random.Random(seed)
    return [mpc(rng.uniform(-radius, radius), rng.uniform(-radius, radius)) for _ in range(count)]


@pytest.mark.parametrize("alpha", [0, Fraction(1, 2), Fraction(-1, 2)])
def test_difference_equations(alpha):
    p = QParams(HALF, alpha)
    with MODEL_POLICY.workprec():
        sa, sb = build_series_A(p, 60, exact=False), build_series_B(p, 60, exact=False)
        sc = build_series_C(p, 60, exact=False)
        for t in _points(1):
            assert difference_residual(sa, t) <= TOL
            assert difference_residual(sb, t) <= TOL
            assert difference_residual(sc, t + 3 * t / abs(t)) <= TOL
        assert difference_residual(sb, mpc("0.4", "0.2")) <= mpf("1e-25")
        assert difference_residual(sc, mpf("3.1")) <= mpf("1e-25")


def test_series_C_refinement_and_limit():
    with MODEL_POLICY.workprec():
        s60, s80 = build_series_C(P0, 60, exact=False), build_series_C(P0, 80, exact=False)
        a, b = s60.evaluate(mpf("2.5")), s80.evaluate(mpf("2.5"))
        assert max(abs(a[0] - b[0]), abs(a[1] - b[1])) <= mpf("1e-30")
        far = s60.evaluate(mpf(10) ** 6)
        assert abs(far[0]) < mpf("1e-5") and abs(far[1] - 1) < mpf("1e-11")


def test_truncation_is_reported():
    with MODEL_POLICY.workprec():
        with pytest.raises(TruncationError):
            build_series_A(P0, 4, exact=False).evaluate(mpf(50))


def test_C0_value_and_consistency(model):
    with MODEL_POLICY.workprec():
        assert abs(model.C0) > 0
        assert abs(model.C0 - mpf(INV_Q_Q2)) <= mpf("1e-40")
        assert model.C0_gap <= mpf("1e-40")
        assert model.consistency_gap <= mpf("1e-35")
        looser, gap = compute_C0(model.series_A, tol=mpf("1e-20"))
        assert abs(looser - model.C0) <= 10 * max(gap, mpf("1e-40"))


def test_psi0_matches_polynomial_limit(model, unit_rec):
    # (-1)^{n/2} q^{-(n/2)(n/2-1)} P_n(0) -> psi(0) with error ~ q^n
    with MODEL_POLICY.workprec():
        q = mpf("0.5")
        psi0 = model.psi(0)

        def seq(n):
            h = n // 2
            return (-1) ** h * q ** (-h * (h - 1)) * eval_poly(unit_rec, n, 0)

        e12, e14 = abs(seq(12) / psi0 - 1), abs(seq(14) / psi0 - 1)
        assert 0.7 * q ** 2 <= e14 / e12 <= 1.3 * q ** 2
        extrap = (seq(14) - q ** 2 * seq(12)) / (1 - q ** 2)
        assert abs(extrap / psi0 - 1) <= e14 * q ** 2


def test_entry_parities(model):
    with MODEL_POLICY.workprec():
        for t in _points(2, 4):
            assert abs(model.psi(-t) - model.psi(t)) <= TOL * abs(model.psi(t))
            assert abs(model.rho(-t) - model.rho(t)) <= TOL * max(1, abs(model.rho(t)))
            assert abs(model.phi(-t) + model.phi(t)) <= TOL * max(1, abs(model.phi(t)))
            assert abs(model.varphi(-t) + model.varphi(t)) <= TOL * max(1, abs(model.varphi(t)))


def test_determinant(model):
    with MODEL_POLICY.workprec():
        assert abs(model.psi(0) * model.rho(0) - 1) <= TOL
        for t in _points(3) + [mpf(2) ** mpf("1.5")]:
            assert abs(model.det(t) - 1) <= mpf("1e-25")


def test_entries_need_normalization():
    sol = build_model(P0, 40, normalize=False)
    with pytest.raises(DomainError):
        sol.psi(0)


@pytest.mark.parametrize("t", [mpf("0.3"), mpc(0, "1.7"), mpc("-2.4", "0.3")])
def test_connection_examples(model, t):
    assert connection_residual(model, t) <= mpf("1e-25")


def test_connection_alpha_half():
    sol = build_model(QParams(HALF, Fraction(1, 2)), 80)
    for t in (mpc("0.7", "0.4"), mpf("2.6"), mpc(0, "-1.3")):
        assert connection_residual(sol, t) <= mpf("1e-25")


def test_model_rejects_alpha_outside_h_range():
    with pytest.raises(DomainError):
        build_model(QParams(HALF, Fraction(3, 2)), 20)


def test_g_prime_matches_difference_quotient():
    with mp.workprec(300):
        for k in (1, 2, 4):
            t = mpf(2) ** k
            h = mpf(2) ** -80
            fd = (g_fn(t + h, HALF) - g_fn(t - h, HALF)) / (2 * h)
            assert abs(fd / g_prime_at_zero(k, HALF) - 1) <= mpf("1e-40")


def test_residue_law():
    res = {k: residue_at(P0, k) for k in range(1, 10)}
    assert res[1] != 0 and mp.isfinite(res[1])
    assert abs((res[7] / res[8]) / residue_law(8, P0) - 1) <= mpf("0.1")
    drift = [abs((res[k - 1] / res[k]) / residue_law(k, P0) - 1) for k in range(4, 10)]
    assert all(b < a for a, b in zip(drift, drift[1:]))


def test_qhermite_limit_system(unit_rec):
    q = mpf("0.5")
    r = {n: qhermite_limit_check(P0, unit_rec, n, "0.5") for n in (8, 10, 12)}
    # r_n = K rho^n fitted through n = 8, 10
    rho2 = r[10] / r[8]
    assert 0.7 * q ** 2 <= rho2 <= 1.3 * q ** 2
    assert r[12] <= r[10] * rho2
    assert 0.7 * q ** 2 <= r[12] / r[10] <= 1.3 * q ** 2
    assert qhermite_limit_check(P0, unit_rec, 12, 0) <= r[10] * rho2
    with pytest.raises(DomainError):
        qhermite_limit_check(QParams(HALF, HALF), unit_rec, 12, 0)
