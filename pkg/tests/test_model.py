import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from robinlayer import oracles
from robinlayer.model import (BoundaryCoupling, Corrector, DomainError, HypothesisViolation,
                              constants_from_norms, eval_alpha, eval_corrector, eval_grad_abs,
                              from_preset, lemma22_kernels, sup_norms, theorem_constants)


# -- eval_alpha ---------------------------------------------------------------

def test_constant_alpha_everywhere():
    c = BoundaryCoupling.constant(1.0)
    assert eval_alpha(c, 3.7) == 1.0
    np.testing.assert_array_equal(eval_alpha(c, np.linspace(-5, 5, 7)), 1.0)


def test_step_with_zero_strength_is_constant():
    c = BoundaryCoupling.step(1.0, 0.0)
    np.testing.assert_array_equal(eval_alpha(c, np.linspace(-3, 3, 13)), 1.0)


def test_sharp_step_inside_support():
    c = BoundaryCoupling.step(1.0, -0.05, half_width=1.0, amplitude=1.0)
    assert eval_alpha(c, 0.0) == pytest.approx(0.95, abs=1e-15)
    assert eval_alpha(c, 2.0) == 1.0


def test_d3_points_use_the_radius():
    c = BoundaryCoupling.gauss(0.0, 1.0, 1.0)
    pts = np.array([[0.6, 0.8], [1.0, 0.0]])
    np.testing.assert_allclose(eval_alpha(c, pts), [math.exp(-0.5)] * 2, rtol=1e-15)


def test_sampled_coupling_interpolates_and_rejects_outside(tmp_path):
    p = tmp_path / "a.csv"
    p.write_text("x,alpha\n-1,1\n0,3\n1,1\n")
    c = from_preset(f"sampled:{p}")
    assert eval_alpha(c, 0.5) == pytest.approx(2.0)
    assert c.norms_are_lower_bounds
    with pytest.raises(DomainError):
        eval_alpha(c, 1.5)


def test_sampled_header_is_checked(tmp_path):
    p = tmp_path / "a.csv"
    p.write_text("x,a\n0,1\n1,1\n2,1\n")
    with pytest.raises(ValueError):
        BoundaryCoupling.from_csv(p)


def test_sampled_rejects_d3_points(tmp_path):
    p = tmp_path / "a.csv"
    p.write_text("x,alpha\n-1,1\n0,1\n1,1\n")
    with pytest.raises(DomainError):
        eval_alpha(from_preset(f"sampled:{p}"), np.zeros((2, 2)))


def test_invalid_profiles_rejected():
    with pytest.raises(ValueError):
        BoundaryCoupling.gauss(1.0, sigma=0.0)
    with pytest.raises(ValueError):
        BoundaryCoupling.step(1.0, 1.0, half_width=1.0, smoothing=3.0)
    with pytest.raises(ValueError):
        from_preset("bogus")


# -- sup norms ----------------------------------------------------------------

def test_sup_norms_constant():
    assert sup_norms(BoundaryCoupling.constant(2.0)) == (2.0, 0.0)


def test_sup_norms_gaussian_matches_calculus():
    a, g = sup_norms(BoundaryCoupling.gauss(0.0, 1.0, 1.0))
    assert a == 1.0
    assert g == pytest.approx(math.exp(-0.5), rel=1e-15)
    xs = np.linspace(-5, 5, 200001)
    assert np.max(eval_grad_abs(BoundaryCoupling.gauss(0.0, 1.0, 1.0), xs)) == pytest.approx(g, rel=1e-9)


def test_sharp_step_gradient_flagged():
    c = BoundaryCoupling.step(1.0, 0.5)
    assert sup_norms(c) == (1.5, math.inf)
    with pytest.raises(HypothesisViolation):
        theorem_constants(c, 0.1)


def test_smoothed_step_gradient_matches_sampling():
    c = BoundaryCoupling.step(1.0, 0.5, half_width=1.0, amplitude=1.0, smoothing=0.4)
    _, g = sup_norms(c)
    xs = np.linspace(-2, 2, 400001)
    num = np.max(np.abs(np.gradient(eval_alpha(c, xs), xs)))
    assert g == pytest.approx(num, rel=1e-6)


def test_integral_beta_of_smoothed_indicator():
    c = BoundaryCoupling.step(1.0, -0.01, half_width=1.0, amplitude=1.0, smoothing=0.5)
    xs = np.linspace(-3, 3, 600001)
    beta = (eval_alpha(c, xs) - 1.0) / c.c
    assert c.integral_beta(2) == pytest.approx(2.0, rel=1e-15)
    assert np.trapezoid(beta, xs) == pytest.approx(2.0, rel=1e-8)


# -- constants ----------------------------------------------------------------

def test_constants_vanish_without_coupling():
    k = constants_from_norms(0.0, 0.0, 0.3)
    assert k.C == pytest.approx(1 / math.pi, rel=1e-15)
    assert k.C_eps == pytest.approx(1 / math.pi, rel=1e-15)
    assert k.C1_eps == 0.0 and k.C0 == 0.0


def test_constants_against_high_precision():
    k = constants_from_norms(1.0, 0.0, 0.1)
    assert k.C == pytest.approx(1.19777064456250, rel=1e-13)
    assert k.C1_eps == pytest.approx(0.600127671673328, rel=1e-13)
    ref = oracles.constants_reference(1.0, 0.0, 0.1)
    for got, want in zip((k.C, k.C_eps, k.C1_eps, k.C0), ref):
        assert got == pytest.approx(float(want), rel=1e-13)


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 10), st.floats(0, 10), st.floats(1e-4, 1))
def test_constants_property_vs_mpmath(a, g, eps):
    k = constants_from_norms(a, g, eps)
    ref = oracles.constants_reference(a, g, eps)
    for got, want in zip((k.C, k.C_eps, k.C1_eps, k.C0), ref):
        assert got == pytest.approx(float(want), rel=1e-12, abs=1e-300)


@settings(max_examples=100, deadline=None)
@given(st.floats(0, 5), st.floats(0, 5), st.floats(1e-3, 1), st.floats(1e-3, 1))
def test_constants_monotone_in_norms(a, g, e1, e2):
    lo, hi = sorted((e1, e2))
    assert constants_from_norms(a, g, lo).C_eps <= constants_from_norms(a, g, hi).C_eps + 1e-15
    assert constants_from_norms(a, g, lo).C <= constants_from_norms(a + 0.1, g, lo).C


# -- exponential estimates ----------------------------------------------------

def test_exp_estimates_zero_coupling():
    vals = lemma22_kernels(0.0, 0.0, 0.7)
    assert all(float(v) == 0.0 for v in vals)


def test_exp_estimates_half_turn():
    l1, r1, *_ = lemma22_kernels(1.0, 0.0, math.pi)
    assert float(l1) == pytest.approx(2.0, rel=1e-15)
    assert float(r1) == pytest.approx(math.pi, rel=1e-15)


def test_exp_estimates_second_order_value():
    _, _, l2, r2, _, _ = lemma22_kernels(1.0, 0.0, 0.1)
    ref = oracles.lemma22_reference(1.0, 0.1)[1]
    assert float(l2) == pytest.approx(float(ref), rel=1e-14)
    assert float(l2) == pytest.approx(0.004998611265425363, rel=1e-14)
    assert float(l2) <= float(r2) == pytest.approx(0.005)


@settings(max_examples=300, deadline=None)
@given(st.floats(-50, 50), st.floats(0, 50), st.floats(0, 2))
def test_exp_estimates_pointwise(a, g, xd):
    l1, r1, l2, r2, l3, r3 = lemma22_kernels(a, g, xd)
    assert l1 <= r1 and l2 <= r2 and l3 <= r3


@settings(max_examples=100, deadline=None)
@given(st.floats(-5, 5), st.floats(0, 1))
def test_exp_estimates_lhs_vs_mpmath(a, xd):
    l1, _, l2, *_ = lemma22_kernels(a, 0.0, xd)
    r1, r2 = oracles.lemma22_reference(a, xd)
    assert float(l1) == pytest.approx(float(r1), rel=1e-12, abs=1e-300)
    assert float(l2) == pytest.approx(float(r2), rel=1e-12, abs=1e-300)


def test_exp_estimates_rejects_negative_depth():
    with pytest.raises(ValueError):
        lemma22_kernels(1.0, 0.0, -0.1)


# -- corrector ------------------------------------------------------------------

def test_corrector_values():
    one = Corrector(BoundaryCoupling.constant(1.0))
    assert eval_corrector(one, 0.3, 0.0) == 0
    assert eval_corrector(one, 0.3, 0.1) == pytest.approx(-0.1j)
    step = Corrector(BoundaryCoupling.step(1.0, -0.05))
    assert eval_corrector(step, 0.0, 0.05) == pytest.approx(-0.0475j, abs=1e-16)
