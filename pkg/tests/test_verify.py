import json
import warnings
from fractions import Fraction

import pytest
from mpmath import mp, mpf

from qortho.errors import DomainError
from qortho.numerics import PrecisionPolicy, to_mp
from qortho.qcalc import QParams
from qortho.verify import (
    AsymptoticReport,
    bn_decay_check,
    build_for,
    connection_report,
    det_report,
    fit_decay_rate,
    gamma_constants,
    model_a_sequence,
    painleve_report,
    painleve_residual,
    predict_a,
    predict_gamma,
    predict_gamma_companion,
    recurrence_policy,
    smallest_zero_psi,
    smallest_zero_scaling,
    theorem1_outer_error,
    theorem1_report,
    theorem2_report,
    universality_report,
)
from qortho.weights import WeightSpec

HALF = Fraction(1, 2)
P0 = QParams(HALF, 0)
# 2 (q^2; q^2)^2 q^{28} with (1/4; 1/4)_inf from a plain 600-factor product at 60 digits
GAMMA8 = "3.53220060485410087989196255406867760151856902624859833489292e-9"
QQ2 = "0.688537537120339715456514357293508184675549819378335735340157"


def test_predict_gamma_examples():
    with mp.workprec(256):
        p = mpf(QQ2)
        # the default policy truncates (q^2;q^2) at 1e-40
        assert abs(predict_gamma(0, P0) - 2 * p * p) <= mpf("4e-40")
        tight = PrecisionPolicy(256, "1e-60")
        assert abs(predict_gamma(8, P0, policy=tight) / mpf(GAMMA8) - 1) <= mpf("1e-55")
        assert abs(gamma_constants(P0)["unsquared"] - 2 * p) <= mpf("4e-40")
    with pytest.raises(DomainError):
        predict_gamma(3, P0)


def test_predict_a_examples():
    assert predict_a(2, P0) == HALF
    assert predict_a(8, P0) == Fraction(1, 128)
    with mp.workprec(256):
        for n in (2, 6, 10):
            ratio = predict_gamma(n, P0) / predict_gamma_companion(n, P0)
            assert abs(ratio / to_mp(predict_a(n, P0)) - 1) <= mpf("1e-60")
        p = QParams(HALF, HALF)
        assert abs(predict_gamma(6, p) / predict_gamma_companion(6, p) / predict_a(6, p) - 1) <= mpf("1e-60")


def test_fit_decay_rate():
    ns = [4, 6, 8, 10, 12]
    errs = [mpf(3) * mpf("0.5") ** n for n in ns]
    rate, res = fit_decay_rate(ns, errs)
    assert abs(rate - mpf("0.5")) < mpf("1e-20") and res < mpf("1e-20")
    rate, _ = fit_decay_rate(ns, errs[:1] + [mpf(0)] * 4)
    assert rate is None
    rate, _ = fit_decay_rate(ns, errs, floor=errs[2])
    assert rate is None or abs(rate - mpf("0.5")) < mpf("1e-20")


def test_recurrence_policy_grows_with_n():
    a, b = recurrence_policy(HALF, 0, 10), recurrence_policy(HALF, 0, 20)
    assert b.work_bits > a.work_bits
    assert b.eps < a.eps


def test_theorem2_unit(unit_rec):
    res = theorem2_report(unit_rec, P0)
    assert res.constant_variant == "squared"
    assert res.passed
    q2 = mpf("0.25")
    assert 0.7 * q2 <= res.gamma.step_rate <= 1.3 * q2
    assert 0.7 * q2 <= res.a.step_rate <= 1.3 * q2
    assert res.variant_errors["unsquared"][-1] > mpf("0.1")
    d = res.to_dict()
    assert d["constant_variant"] == "squared" and d["gamma"]["rows"][0]["n"] == 4


def test_theorem2_a_monotone(unit_rec):
    res = theorem2_report(unit_rec, P0)
    errs = res.a.errors
    assert all(e1 < e0 for e0, e1 in zip(errs, errs[1:]))
    assert 0.8 * 0.5 <= res.a.fitted_rate <= 1.2 * 0.5


def test_theorem2_third_q():
    q = Fraction(1, 3)
    rec = build_for(WeightSpec("unit", q), 16)
    res = theorem2_report(rec, QParams(q, 0))
    assert res.passed and res.constant_variant == "squared"


def test_theorem2_qhermite_same_limits(catalog_recs):
    res = theorem2_report(catalog_recs["qhermite1"], P0)
    assert res.passed and res.constant_variant == "squared"


def test_theorem1_unit(unit_rec, model):
    reps = theorem1_report(unit_rec, model)
    claims = [r.claim for r in reps]
    assert "theorem1.inner[t=0]" in claims and "theorem1.companion[t=0.7]" in claims
    assert "theorem1.companion[t=0]" not in claims
    for r in reps:
        assert r.passed, (r.claim, r.ratios())


def test_theorem1_outer_parity(unit_rec):
    for n in (8, 10, 12):
        assert theorem1_outer_error(unit_rec, n, mpf("0.75")) == theorem1_outer_error(unit_rec, n, mpf("-0.75"))
    q8 = mpf("0.5") ** 8
    assert theorem1_outer_error(unit_rec, 8, 2) < theorem1_outer_error(unit_rec, 8, mpf("0.75"))
    assert theorem1_outer_error(unit_rec, 8, 2) <= q8
    with pytest.warns(UserWarning):
        theorem1_outer_error(unit_rec, 8, mpf("0.25"))


def test_bn_decay():
    assert bn_decay_check(build_for(WeightSpec("unit", HALF), 17)).extra["identically_zero"]
    assert bn_decay_check(build_for(WeightSpec("poly_perturbation", HALF, c=-2), 17)).extra["identically_zero"]
    rep = bn_decay_check(build_for(WeightSpec("little_qjacobi", HALF, b=Fraction(1, 3)), 17))
    assert rep.passed and not rep.extra["identically_zero"]
    with pytest.raises(DomainError):
        bn_decay_check(build_for(WeightSpec("unit", HALF), 10))


def test_painleve_model_sequence_exact():
    seq = model_a_sequence(HALF, 12)
    assert painleve_residual(seq, 6, HALF) == Fraction(4, 63)
    assert painleve_residual(seq, 10, HALF) == Fraction(4, 2 ** 10) / (1 - Fraction(1, 2 ** 10))
    for n in range(2, 12):
        qn = HALF ** n
        assert painleve_residual(seq, n, HALF) == 4 * qn / (1 - qn)
    with pytest.raises(DomainError):
        painleve_residual(seq, 1, HALF)


def test_painleve_report_model_rate(unit_rec):
    computed, model_rep = painleve_report(unit_rec, range(4, 17))
    assert model_rep.passed
    assert abs(model_rep.fitted_rate - mpf("0.5")) <= mpf("0.3") * mpf("0.5")
    assert computed.fitted_rate < 1  # decays, at its own rate


def test_smallest_zero_scaling(unit_rec, model, catalog_recs):
    rep = smallest_zero_scaling(unit_rec, model)
    assert rep.passed
    r_unit = rep.extra["r_n"][-1]
    assert abs(r_unit - rep.extra["t_star"]) < mpf("1e-4") * rep.extra["t_star"]
    rep2 = smallest_zero_scaling(catalog_recs["qhermite1"], model, range(4, 15, 2))
    assert rep2.passed
    assert abs(rep2.extra["r_n"][-1] - rep.extra["r_n"][-2]) < mpf("1e-4") * r_unit


def test_psi_zero_is_a_sign_change(model):
    t = smallest_zero_psi(model)
    with model.policy.workprec():
        h = t * mpf(2) ** -200
        assert model.psi(t - h) * model.psi(t + h) <= 0
        assert 1 < t < 2


def test_universality(catalog_recs):
    rep = universality_report(list(catalog_recs.values()), P0)
    assert rep["passed"]
    assert len(rep["pairs"]) == 3


def test_model_identity_reports(model):
    c = connection_report(model)
    d = det_report(model)
    assert c["passed"] and d["passed"]
    assert len(c["residuals"]) == 12
    json.dumps(c), json.dumps(d)


def test_report_serialization():
    rep = AsymptoticReport("x", HALF, 0, "unit", (4, 6), (mpf("0.5"), mpf("0.125")), mpf("0.5"), mpf(0), True,
                           (mpf("0.1"), mpf("0.3")), (1, 2))
    d = rep.to_dict()
    assert d["rows"] == [{"n": 4, "error": "0.5", "ms": 1}, {"n": 6, "error": "0.125", "ms": 2}]
    assert rep.to_csv().splitlines()[0] == "n,error,ms"
    assert rep.ratios() == [mpf("0.25")]


def test_alpha_half_inexact_mode():
    p = QParams(HALF, HALF)
    rec = build_for(WeightSpec("unit", HALF, HALF), 16)
    assert not rec.exact
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        res = theorem2_report(rec, p)
    assert res.a.passed
