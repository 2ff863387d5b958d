import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pulledfront import model
from pulledfront.errors import HypothesisViolated, ModelInvalid, NotPinched
from oracles import power_sum

finite = st.floats(-3, 3, allow_nan=False, allow_infinity=False)


def test_dispersion_plus_fkpp_double_root():
    # (-1)^2 + 2(-1) + 1 = 0
    assert model.eval_dispersion_plus(model.fisher_kpp(), 2.0, 0.0, -1.0) == 0.0


def test_dispersion_plus_at_zero_is_constant_term():
    m = model.extended_fkpp(0.1)
    lam = model.eval_dispersion_plus(m, 1.3, 0.0, 0.0)
    assert model.eval_dispersion_plus(m, 1.3, lam, 0.0) == 0.0


def test_dispersion_plus_complex_point():
    nu = -1 + 1j
    # (-1+i)^2 + 2(-1+i) + 1 = -2i - 2 + 2i + 1 = -1
    assert model.eval_dispersion_plus(model.fisher_kpp(), 2.0, 0.0, nu) == pytest.approx(-1.0)


def test_dispersion_minus_examples():
    m = model.fisher_kpp()
    assert model.eval_dispersion_minus(m, 2.0, 0.0, 0.0) == -1.0
    assert model.eval_dispersion_minus(m, 2.0, m.fprime1, 0.0) == 0.0
    k = 0.7
    assert model.eval_dispersion_minus(m, 2.0, 0.0, 1j * k) == pytest.approx(-k * k + 2j * k - 1)


@settings(max_examples=60, deadline=None)
@given(re=finite, im=finite, c=finite, lam_re=finite, lam_im=finite)
def test_horner_matches_power_sum(re, im, c, lam_re, lam_im):
    m = model.turing_amplitude(4.5, -4.0, 0.1)
    nu = complex(re, im)
    lam = complex(lam_re, lam_im)
    ref = power_sum(m.dispersion_poly(c, lam, "plus"), nu)
    val = model.eval_dispersion_plus(m, c, lam, nu)
    assert abs(val - ref) <= 1e-13 * max(1.0, abs(ref)) * 10


def test_fkpp_speed_exact():
    ss = model.find_spreading_speed(model.fisher_kpp(), 1.5, 0.8)
    assert (ss.c_star, ss.eta_star, ss.alpha) == pytest.approx((2.0, 1.0, 1.0), abs=1e-12)
    assert ss.pinched


def test_efkpp_speed_residual_and_alpha():
    m = model.extended_fkpp(0.1)
    ss = model.find_spreading_speed(m, 2.0, 1.0)
    assert ss.newton_residual <= 1e-10
    assert ss.c_star < 2.0
    nu = -ss.eta_star
    assert abs(model.eval_dispersion_plus(m, ss.c_star, 0.0, nu)) <= 1e-10
    assert abs(model.eval_dispersion_plus(m, ss.c_star, 0.0, nu, deriv=1)) <= 1e-10
    # second derivative by central differences
    h = 1e-3
    fd = (model.eval_dispersion_plus(m, ss.c_star, 0.0, nu + h)
          - 2 * model.eval_dispersion_plus(m, ss.c_star, 0.0, nu)
          + model.eval_dispersion_plus(m, ss.c_star, 0.0, nu - h)) / h ** 2
    assert 0.5 * fd.real == pytest.approx(ss.alpha, abs=1e-6)


def test_efkpp_speed_by_continuation_in_eps():
    prev = model.find_spreading_speed(model.fisher_kpp(), certify=False)
    for eps in (0.02, 0.05, 0.08, 0.1):
        ss = model.find_spreading_speed(model.extended_fkpp(eps), prev.c_star, prev.eta_star,
                                        certify=False)
        assert ss.c_star < prev.c_star
        prev = ss
    direct = model.find_spreading_speed(model.extended_fkpp(0.1), certify=False)
    assert direct.c_star == pytest.approx(prev.c_star, abs=1e-12)


def test_bistable_linear_speed():
    ss = model.find_spreading_speed(model.bistable(0.4))
    assert ss.c_star == pytest.approx(2 * math.sqrt(0.24), abs=1e-10)


def test_model_validation():
    with pytest.raises(ModelInvalid):
        model.ScalarModel(2, (0.0, -1.0), (0.0, 1.0, -1.0))
    with pytest.raises(ModelInvalid):
        model.ScalarModel(2, (0.0, 1.0), (0.0, 1.0, -0.5))
    with pytest.raises(ModelInvalid):
        model.ScalarModel(3, (0.0, 1.0, 1.0), (0.0, 1.0, -1.0))


def test_model_roundtrip_dict():
    m = model.extended_fkpp(0.1)
    assert model.ScalarModel.from_dict(m.to_dict()) == m


def test_pinching_fkpp_closed_form_paths():
    m = model.fisher_kpp()
    ss = model.find_spreading_speed(m, certify=False)
    cert = model.verify_pinching(m, ss)
    assert cert.pinched
    lam = cert.lambdas
    assert np.allclose(cert.nu_plus, -1 + np.sqrt(lam), atol=1e-9)
    assert np.allclose(cert.nu_minus, -1 - np.sqrt(lam), atol=1e-9)
    assert cert.max_residual <= 1e-9


def test_pinching_empty_range():
    m = model.fisher_kpp()
    ss = model.find_spreading_speed(m, certify=False)
    with pytest.raises(NotPinched):
        model.verify_pinching(m, ss, lambda_max=0.0)


def test_pinching_efkpp_refinement_agrees():
    m = model.extended_fkpp(0.1)
    ss = model.find_spreading_speed(m, certify=False)
    a = model.verify_pinching(m, ss, steps=100)
    b = model.verify_pinching(m, ss, steps=1000)
    assert a.pinched and b.pinched
    assert a.nu_plus[-1] == pytest.approx(b.nu_plus[-1], abs=1e-9)
    assert a.max_residual <= 1e-9 and b.max_residual <= 1e-9


def test_border_fkpp_closed_forms():
    m = model.fisher_kpp()
    k = np.linspace(-3, 3, 13)
    assert np.allclose(model.fredholm_border(m, 2.0, 1.0, "right", k), -k ** 2, atol=1e-14)
    assert np.allclose(model.fredholm_border(m, 2.0, 0.0, "right", k), -k ** 2 + 2j * k + 1)
    assert np.allclose(model.fredholm_border(m, 2.0, 0.0, "left", k), -k ** 2 + 2j * k - 1)
    assert model.fredholm_border(m, 2.0, 1.0, "right", [0.0])[0] == 0


def test_spectrum_hypotheses_fkpp_pass():
    m = model.fisher_kpp()
    rep = model.verify_spectrum_hypotheses(m, model.find_spreading_speed(m, certify=False))
    assert rep.passed
    assert rep.right_max_re < 0 and rep.left_max_re <= -1 + 1e-12
    assert abs(rep.right_at_zero) <= 1e-14


def test_spectrum_hypotheses_left_violation():
    m = model.fisher_kpp()
    ss = model.find_spreading_speed(m, certify=False)
    # the constructor rejects f'(1) > 0, so bypass validation
    bad = model.ScalarModel.__new__(model.ScalarModel)
    object.__setattr__(bad, "order_2m", 2)
    object.__setattr__(bad, "p_coeffs", (0.0, 1.0))
    # u (1 - u)(1 - 3u): f(0) = f(1) = 0, f'(1) = 2
    object.__setattr__(bad, "f_coeffs", (0.0, 1.0, -4.0, 3.0))
    object.__setattr__(bad, "name", "bad")
    assert bad.fprime1 > 0
    with pytest.raises(HypothesisViolated) as info:
        model.verify_spectrum_hypotheses(bad, ss)
    assert info.value.clause == "left"


def test_turing_model_sign_of_stability():
    # threshold d = 2 - g0 = 6 in the small-eps limit
    good = model.turing_amplitude(5.5, -4.0, 0.02)
    bad = model.turing_amplitude(6.5, -4.0, 0.02)
    rg = model.verify_spectrum_hypotheses(good, model.find_spreading_speed(good, certify=False),
                                         raise_on_fail=False)
    rb = model.verify_spectrum_hypotheses(bad, model.find_spreading_speed(bad, certify=False),
                                         raise_on_fail=False)
    assert rg.passed
    assert rb.failed == ["right"] and rb.right_max_re > 0
