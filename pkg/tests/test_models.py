import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracomp.errors import NonPositiveFrequency, NonPositiveParameter, UnknownModel, WrongParameterCount
from fracomp.models import (
    FRACTIONAL_TAGS,
    MODEL_TAGS,
    Limit,
    canonical_theta,
    catalogue,
    default_bounds_and_init,
    evaluate,
    evaluate_s,
    get_model,
    low_frequency_limit,
    parse_models,
    total_compliance_estimate,
)

W = np.array([0.3, 1.0, 6.0, 40.0])


def test_registry():
    assert MODEL_TAGS == ("A", "B", "C", "D", "E", "F", "G")
    assert FRACTIONAL_TAGS == ("A", "B", "C", "D", "E")
    assert [get_model(t).n_params for t in MODEL_TAGS] == [2, 3, 2, 3, 4, 9, 2]


def test_parse_models():
    assert parse_models("a, B,E,a") == ("A", "B", "E")
    with pytest.raises(UnknownModel, match="unknown model"):
        parse_models("A,Z")


def test_model_a_capacitor_case():
    np.testing.assert_allclose(evaluate("A", [2.5, 1.0], W), 2.5 + 0j, atol=1e-15)


def test_model_b_without_resistance_is_model_a():
    np.testing.assert_allclose(evaluate("B", [0.0, 1.3, 0.7], W), evaluate("A", [1.3, 0.7], W),
                               rtol=1e-15)


def test_model_b_integer_order_is_voigt():
    np.testing.assert_allclose(evaluate("B", [0.1, 1.3, 1.0], W), evaluate("G", [0.1, 1.3], W),
                               rtol=1e-14)


def test_model_c_frozen_value():
    # j^0.5 / (j^0.5 + j) by hand: (1 + j)/sqrt2 over (1 + j(1 + sqrt2))/sqrt2
    z = evaluate("C", [1.0, 0.5], np.array([1.0]))[0]
    assert z.real == pytest.approx(0.5, abs=1e-15)
    assert z.imag == pytest.approx(-0.20710678118654752, abs=1e-15)


def test_model_d_without_resistance_is_model_c():
    np.testing.assert_allclose(evaluate("D", [0.0, 2.0, 0.6], W), evaluate("C", [2.0, 0.6], W),
                               rtol=1e-15)


def test_model_e_formula():
    r1, r2, c, a = 0.74, 37.91, 0.08, 1.29
    s = 1j * W
    expected = (1 + (r1 + r2) * c * s ** (a - 1)) / (r1 * (1 + r2 * c * s ** a))
    np.testing.assert_allclose(evaluate("E", [r1, r2, c, a], W), expected, rtol=1e-14)


def test_model_f_low_frequency_limit():
    theta = [1.7, 0.5, 2.0, 8.0, 30.0, 0.9, 3.0, 12.0, 50.0]
    z = evaluate("F", theta, np.array([1e-6]))[0]
    assert abs(z - 1.7) < 1e-5
    est = total_compliance_estimate("F", theta, 1e-6)
    assert est.limit is Limit.FINITE and est.limit_value == 1.7


def test_model_g_low_frequency():
    est = total_compliance_estimate("G", [0.1, 1.3], 1e-5)
    assert est.value == pytest.approx(1.3, rel=1e-10)
    assert not est.divergent


def test_model_a_divergent_flag():
    est = total_compliance_estimate("A", [1.0, 0.6], 0.5)
    assert est.divergent and est.limit is Limit.DIVERGENT
    assert est.value == pytest.approx(0.5 ** -0.4, rel=1e-14)


@pytest.mark.parametrize("model, theta, kind, value", [
    ("A", [2.0, 1.0], Limit.FINITE, 2.0),
    ("A", [2.0, 1.3], Limit.VANISHING, 0.0),
    ("B", [0.1, 2.0, 0.6], Limit.DIVERGENT, None),
    ("C", [2.0, 0.6], Limit.FINITE, 2.0),
    ("C", [2.0, 1.0], Limit.FINITE, 1.0),
    ("D", [0.1, 2.0, 1.3], Limit.VANISHING, 0.0),
    ("E", [0.74, 37.91, 0.08, 1.29], Limit.FINITE, 1 / 0.74),
    ("E", [0.7, 3.0, 0.5, 0.8], Limit.DIVERGENT, None),
])
def test_low_frequency_classification_matches_numerics(model, theta, kind, value):
    got_kind, got_value = low_frequency_limit(model, theta)
    assert got_kind is kind
    tiny = np.array([1e-9, 1e-10])
    mag = np.abs(evaluate(model, theta, tiny))
    if kind is Limit.FINITE:
        assert got_value == pytest.approx(value, rel=1e-12)
        assert mag[-1] == pytest.approx(value, rel=1e-2)
    elif kind is Limit.DIVERGENT:
        assert mag[1] > mag[0] > 1e2
    else:
        assert mag[1] < mag[0] < 1e-1


def test_validation():
    with pytest.raises(WrongParameterCount):
        evaluate("A", [1.0], W)
    with pytest.raises(NonPositiveParameter):
        evaluate("G", [0.0, 1.0], W)
    with pytest.raises(NonPositiveParameter):
        evaluate("B", [-0.1, 1.0, 0.5], W)
    with pytest.raises(NonPositiveParameter):
        evaluate("A", [1.0, -0.5], W)
    with pytest.raises(NonPositiveFrequency):
        evaluate("A", [1.0, 0.5], np.array([0.0, 1.0]))
    with pytest.raises(UnknownModel):
        evaluate("H", [1.0], W)


def test_default_bounds_and_init():
    lo, hi, init = default_bounds_and_init("A")
    np.testing.assert_array_equal(init, [1.0, 0.8])
    assert len(default_bounds_and_init("B")[0]) == 3
    lo, hi, init = default_bounds_and_init("F")
    assert lo.size == hi.size == init.size == 9
    assert np.all(init >= lo) and np.all(init <= hi)
    # no zero starts on its own pole
    assert not np.any(np.isclose(init[1:5], init[5:]))


def test_canonical_theta_is_permutation_invariant():
    theta = np.array([1.0, 5.0, 0.5, 2.0, 9.0, 3.0, 1.0, 4.0, 7.0])
    perm = theta.copy()
    perm[1:5] = theta[[4, 2, 1, 3]]
    perm[5:] = theta[[8, 6, 5, 7]]
    np.testing.assert_array_equal(canonical_theta("F", theta), canonical_theta("F", perm))
    np.testing.assert_allclose(evaluate("F", canonical_theta("F", theta), W),
                               evaluate("F", theta, W), rtol=1e-13)


def test_evaluate_s_matches_evaluate():
    np.testing.assert_allclose(evaluate_s("E", [0.7, 3.0, 0.5, 0.8], 1j * W),
                               evaluate("E", [0.7, 3.0, 0.5, 0.8], W))


def test_catalogue_lists_every_model():
    cat = catalogue()
    assert [c["model"] for c in cat] == list(MODEL_TAGS)
    assert all(len(c["params"]) == c["n_params"] for c in cat)


@settings(max_examples=80, deadline=None)
@given(c=st.floats(0.05, 20), a=st.floats(0.001, 1.999), w=st.floats(0.01, 100))
def test_alpha_continuity(c, a, w):
    eps = 1e-9
    z0 = evaluate("A", [c, a], np.array([w]))[0]
    z1 = evaluate("A", [c, a + eps], np.array([w]))[0]
    assert abs(z1 - z0) <= 1e-6 * abs(z0)


@settings(max_examples=40, deadline=None)
@given(r=st.floats(1e-3, 1.0), c=st.floats(0.1, 10), a=st.floats(0.05, 1.95))
def test_model_b_reduces_to_a_as_resistance_vanishes(r, c, a):
    zb = evaluate("B", [r * 1e-9, c, a], W)
    za = evaluate("A", [c, a], W)
    np.testing.assert_allclose(zb, za, rtol=1e-6)
