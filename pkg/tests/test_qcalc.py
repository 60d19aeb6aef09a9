from fractions import Fraction

import pytest
from hypothesis import given, strategies as st
from mpmath import mp, mpc, mpf

from qortho.errors import DomainError, PoleProximityError, TableMissError, TruncationError
from qortho.numerics import PrecisionPolicy, to_mp
from qortho.qcalc import (
    LatticeFn,
    QParams,
    f_fn,
    g_fn,
    g_n_fn,
    h_alpha,
    jackson_one_sided,
    jackson_two_sided,
    pochhammer_fin,
    pochhammer_inf,
)

HALF = Fraction(1, 2)
P = PrecisionPolicy(work_bits=256, tail_eps="1e-40")
EPS = mpf("1e-40")

# independent truncated products at 60 digits (600 factors, no tail rule)
QQ_HALF = ("0.288788095086602421278899721929230780088911904840685784114741")
QUARTER_QUARTER = ("0.688537537120339715456514357293508184675549819378335735340157")
# bilateral sum over -400 <= k < 400 at 60 digits
H0_THREE_HALVES = ("-1.23933953904398718168552157040676477934853747978074561721267")

annulus = st.builds(
    lambda r, th: mp.mpc(r * mp.cos(th), r * mp.sin(th)),
    st.floats(min_value=0.5, max_value=4.0), st.floats(min_value=0.0, max_value=6.283),
)


def off_lattice(z, q=HALF, gap=1e-3):
    return all(abs(abs(z) - to_mp(q) ** k) > gap for k in range(-6, 40))


def test_pochhammer_inf_trivial():
    assert pochhammer_inf(0, HALF) == 1
    assert pochhammer_inf(1, HALF) == 0


def test_pochhammer_inf_matches_truncated_product():
    with P.workprec():
        assert abs(pochhammer_inf(HALF, HALF, policy=P) - mpf(QQ_HALF)) <= 4 * EPS
        assert abs(pochhammer_inf(HALF, HALF, mpf("1e-20"), P) - mpf(QQ_HALF)) <= mpf("4e-20")


def test_pochhammer_inf_zero_factor_is_exact():
    assert pochhammer_inf(8, HALF) == 0


def test_pochhammer_inf_reports_cap():
    with pytest.raises(TruncationError):
        pochhammer_inf(HALF, Fraction(999, 1000), policy=PrecisionPolicy(max_terms=10))


def test_pochhammer_fin():
    assert pochhammer_fin(5, HALF, 0) == 1
    assert pochhammer_fin(1, HALF, 2) == 0
    assert pochhammer_fin(HALF, HALF, 2) == Fraction(3, 8)


@given(st.fractions(min_value=-3, max_value=3, max_denominator=50), st.integers(min_value=0, max_value=12))
def test_pochhammer_fin_splits(z, n):
    # (z;q)_{n+1} = (z;q)_n (1 - z q^n)
    assert pochhammer_fin(z, HALF, n + 1) == pochhammer_fin(z, HALF, n) * (1 - z * HALF ** n)


def test_jackson_two_sided_examples():
    assert jackson_two_sided(LatticeFn.constant(1), HALF) == 4
    assert jackson_two_sided(LatticeFn.polynomial([0, 1]), HALF) == 0
    assert jackson_two_sided(LatticeFn.polynomial([0, 0, 1]), HALF) == Fraction(16, 7)


def test_jackson_two_sided_callable_path():
    with P.workprec():
        assert abs(jackson_two_sided(lambda x: 1, HALF, policy=P) - 4) <= 4 * EPS
        assert abs(jackson_two_sided(lambda x: x * x, HALF, policy=P) - mpf(16) / 7) <= 4 * EPS
        assert jackson_two_sided(lambda x: x, HALF, policy=P) == 0


def test_jackson_one_sided_examples():
    assert jackson_one_sided(LatticeFn.constant(1), HALF) == 2
    assert jackson_one_sided(LatticeFn.polynomial([0, 1]), HALF) == Fraction(4, 3)
    assert jackson_one_sided(LatticeFn.constant(0), HALF) == 0
    with P.workprec():
        assert abs(jackson_one_sided(lambda x: x, HALF, policy=P) - mpf(4) / 3) <= 4 * EPS


def test_jackson_table_exhausted():
    table = {k: (1, 1) for k in range(5)}
    with pytest.raises(TableMissError):
        jackson_two_sided(LatticeFn(table=table), HALF, policy=P)


def test_h_alpha_odd():
    z = mpc("0.3", "0.7")
    p = QParams(HALF, 0)
    with P.workprec():
        assert abs(h_alpha(-z, p, policy=P) + h_alpha(z, p, policy=P)) <= 4 * EPS


@pytest.mark.parametrize("alpha", [Fraction(-1, 2), 0, Fraction(1, 2)])
def test_h_alpha_q_shift(alpha):
    p = QParams(HALF, alpha)
    z = mpc("1.3", "0.4")
    with P.workprec():
        lhs = h_alpha(HALF * z, p, policy=P)
        rhs = to_mp(HALF) ** to_mp(alpha) * h_alpha(z, p, policy=P)
        assert abs(lhs - rhs) <= 4 * EPS


def test_h_alpha_value_and_refinement():
    p = QParams(HALF, 0)
    with P.workprec():
        v1 = h_alpha(mpf(3) / 2, p, policy=P)
        v2 = h_alpha(mpf(3) / 2, p, EPS / 2, policy=P)
        assert abs(v1 - mpf(H0_THREE_HALVES)) <= 2 * EPS
        assert abs(v1 - v2) <= 2 * EPS


def test_h_alpha_domain_and_poles():
    with pytest.raises(DomainError):
        h_alpha(mpf("0.3"), QParams(HALF, 1))
    with pytest.raises(PoleProximityError):
        h_alpha(to_mp(HALF) ** 3, QParams(HALF, 0))


def test_f_examples():
    with P.workprec():
        assert f_fn(1, HALF, policy=P) == 0
        assert f_fn(-1, HALF, policy=P) == 0
        assert abs(f_fn(2, HALF, policy=P) - mpf(QUARTER_QUARTER)) <= 4 * EPS
        z = mpf("2.7")
        assert abs(f_fn(HALF * z, HALF, policy=P) - (1 - 1 / (to_mp(HALF) ** 2 * z * z)) * f_fn(z, HALF, policy=P)) <= 4 * EPS
    with pytest.raises(DomainError):
        f_fn(0, HALF)


def test_g_examples():
    with P.workprec():
        assert g_fn(1, HALF, policy=P) == 0
        assert g_fn(2, HALF, policy=P) == 0  # q^2 z^2 = 1 at z = 1/q
        z = mpc("1.6", "0.2")
        assert abs(g_fn(HALF * z, HALF, policy=P) + g_fn(z, HALF, policy=P) / (to_mp(HALF) ** 2 * z * z)) <= 4 * EPS
        v1 = g_fn(mpf("2.5"), HALF, policy=P)
        assert abs(v1 - g_fn(mpf("2.5"), HALF, EPS / 2, P)) <= 2 * EPS


@given(annulus)
def test_f_g_functional_equations_on_annulus(z):
    with P.workprec():
        z = mpc(z)
        q = to_mp(HALF)
        fz, gz = f_fn(z, q, policy=P), g_fn(z, q, policy=P)
        assert abs(f_fn(q * z, q, policy=P) - (1 - 1 / (q * q * z * z)) * fz) <= 10 * EPS * max(1, abs(fz))
        assert abs(g_fn(q * z, q, policy=P) + gz / (q * q * z * z)) <= 10 * EPS * max(1, abs(gz) / abs(q * z) ** 2)


@given(annulus)
def test_parities(z):
    with P.workprec():
        z = mpc(z)
        assert f_fn(-z, HALF, policy=P) == f_fn(z, HALF, policy=P)
        assert g_n_fn(-z, HALF, 4, policy=P) == g_n_fn(z, HALF, 4, policy=P)
        if off_lattice(z):
            p = QParams(HALF, 0)
            assert abs(h_alpha(-z, p, policy=P) + h_alpha(z, p, policy=P)) <= 4 * EPS * max(1, abs(h_alpha(z, p, policy=P)))


def test_g_n_zero_is_f():
    with P.workprec():
        for z in (mpf("1.7"), mpc("0.4", "2"), mpf(-3)):
            assert g_n_fn(z, HALF, 0, policy=P) == f_fn(z, HALF, policy=P)
    with pytest.raises(DomainError):
        g_n_fn(mpf(2), HALF, 3)


@pytest.mark.parametrize("n", [0, 2, 4, 8])
def test_scaled_constant_identity(n):
    # (q^{n/2} z)^n f(q^{n/2} z) = i^n q^{(n/2)(n/2-1)} g_n(z)
    q = to_mp(HALF)
    with P.workprec():
        for z in [mpf("1.7"), mpc("0.9", "0.1"), mpc("2.2", "-1.3"), mpf("-3.3"), mpc("0.6", "0.8"),
                  mpf("5.1"), mpc("-1.1", "1.4"), mpf("0.77"), mpc("3", "3"), mpf("1.33")]:
            x = q ** (n // 2) * z
            lhs = x ** n * f_fn(x, q, policy=P)
            rhs = mpc(0, 1) ** n * q ** ((n // 2) * (n // 2 - 1)) * g_n_fn(z, q, n, policy=P)
            assert abs(lhs - rhs) <= 16 * EPS * max(1, abs(rhs))


def test_g_over_g_n_tail():
    q = to_mp(HALF)
    z = mpc("0.9", "0.1")
    with P.workprec():
        ratio = g_fn(z, q, policy=P) / g_n_fn(z, q, 6, policy=P)
        assert abs(ratio - pochhammer_inf(q ** 8 * z * z, q * q, policy=P)) <= 4 * EPS


def test_qparams_validation():
    with pytest.raises(DomainError):
        QParams(2, 0)
    with pytest.raises(DomainError):
        QParams(HALF, -1)
    assert QParams(HALF, 0).exact
    assert not QParams(HALF, HALF).exact
