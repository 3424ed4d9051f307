"""Amplitude algebra: profiles, exact differentiation, supports, grammar."""

import math
from fractions import Fraction

import numpy as np
import pytest

from equiloc._exact import Poly, QQi
from equiloc.amplitudes import (
    AmplitudeExpr,
    SupportBox,
    bump_block,
    constant,
    gauss_block,
    gauss_quad,
    head_cutoff,
    mixed_pairing_derivative,
    parse_amplitude,
    poly_amplitude,
    profile_value,
    shell_cutoff,
    sup_abs,
    support_box,
)
from equiloc.errors import CapabilityError, DataError, DomainError, PreconditionError


def test_profile_endpoints_and_symmetry():
    assert profile_value(-1.0) == 1.0
    assert profile_value(1.0) == 0.0
    assert profile_value(-3.0) == 1.0
    assert profile_value(5.0) == 0.0
    # even mollifier: half the mass sits on each side
    assert profile_value(0.0) == pytest.approx(0.5, abs=1e-11)
    u = np.linspace(-0.999, 0.999, 400)
    v = profile_value(u)
    assert np.all(np.diff(v) < 0)


@pytest.mark.parametrize("order", [0, 1, 2, 3, 4, 5])
def test_profile_derivative_consistency(order):
    h = 1e-5
    for u in (-0.8, -0.3, 0.1, 0.6, 0.92):
        fd = (profile_value(u + h, order) - profile_value(u - h, order)) / (2 * h)
        exact = profile_value(u, order + 1)
        assert fd == pytest.approx(exact, rel=2e-7, abs=1e-9)


def test_profile_flat_at_both_ends():
    for order in range(1, 13):
        assert profile_value(-0.99999, order) == pytest.approx(0.0, abs=1e-30)
        assert profile_value(0.99999, order) == pytest.approx(0.0, abs=1e-30)


def test_profile_steepness_parameter():
    # larger beta concentrates the mollifier, steepening the middle
    assert profile_value(0.0, 1, beta=4) < profile_value(0.0, 1, beta=1) < 0


def test_bump_plateau_and_support():
    b = bump_block(1, 0, "p", 1, 2)
    inside = b.evaluate(np.array([[0.3, 0.4], [0.6, -0.8]]))
    assert np.array_equal(inside, [1.0, 1.0])
    assert b.evaluate(np.array([2.0, 0.0])) == 0.0
    mid = b.evaluate(np.array([1.5, 0.0]))
    assert 0.0 < mid < 1.0


def test_rising_bump_vanishes_near_origin():
    b = bump_block(1, 0, "p", 1, 2, rising=True)
    assert b.evaluate(np.array([0.5, 0.5])) == 0.0
    assert b.evaluate(np.array([2.5, 0.0])) == 1.0


def random_mixed_amplitude():
    dim = 3  # n = 1, r = 1
    p = Poly(dim, {(2, 0, 0): QQi(1, 0), (0, 1, 1): QQi(Fraction(-1, 2), 0),
                   (0, 0, 0): QQi(Fraction(1, 3), 0)})
    a = poly_amplitude(1, 1, p) * gauss_block(1, 1, "p") \
        * gauss_block(1, 1, "X", Fraction(1, 4)) * bump_block(1, 1, "p", 1, 2)
    return a + constant(1, 1, Fraction(1, 7)) * gauss_block(1, 1, "p", 2)


def test_differentiate_matches_finite_differences():
    a = random_mixed_amplitude()
    rng = np.random.default_rng(2)
    pts = rng.uniform(-1.8, 1.8, size=(40, 3))
    h = 1e-5
    for axis in range(3):
        da = a.differentiate(axis)
        e = np.zeros(3)
        e[axis] = h
        fd = (a.evaluate(pts + e) - a.evaluate(pts - e)) / (2 * h)
        exact = da.evaluate(pts)
        assert np.max(np.abs(fd - exact)) < 5e-7 * max(1.0, np.max(np.abs(exact)))


def test_second_derivative_through_the_bump_shoulder():
    a = bump_block(1, 0, "p", 1, 2)
    d2 = a.differentiate(0).differentiate(0)
    h = 1e-4
    for x in (1.1, 1.5, 1.9):
        pt = np.array([x, 0.2])
        fd = (a.evaluate(pt + [h, 0]) - 2 * a.evaluate(pt)
              + a.evaluate(pt - [h, 0])) / h**2
        assert d2.evaluate(pt) == pytest.approx(fd, rel=1e-5, abs=1e-7)


def test_derivative_order_cap():
    a = bump_block(1, 0, "p", 1, 2)
    for _ in range(12):
        a = a.differentiate(0)
    with pytest.raises(CapabilityError):
        a.differentiate(0)


def test_shell_equals_cutoff_difference():
    # (1 - phi(t)) phi(t/2) and phi(t/2) - phi(t) agree identically
    shell = shell_cutoff(1, 0)
    head = head_cutoff(1, 0)
    inner = bump_block(1, 0, "p", Fraction(1, 4), Fraction(1, 2))
    t = np.linspace(0.0, 1.2, 300)
    pts = np.stack([t, np.zeros_like(t)], axis=-1)
    lhs = shell.evaluate(pts)
    rhs = head.evaluate(pts) - inner.evaluate(pts)
    assert np.max(np.abs(lhs - rhs)) < 1e-13


def test_dyadic_shells_sum_to_one():
    shell = shell_cutoff(1, 0)
    L = 6
    t = np.linspace(2.0 ** (-L - 1), 0.5, 500)
    total = np.zeros_like(t)
    for l in range(L + 1):
        pts = np.stack([2.0**l * t, np.zeros_like(t)], axis=-1)
        total += shell.evaluate(pts)
    assert np.max(np.abs(total - 1.0)) < 1e-12


def test_rescale_is_exact_substitution():
    a = random_mixed_amplitude()
    tau = Fraction(3, 7)
    rng = np.random.default_rng(9)
    pts = rng.uniform(-2.0, 2.0, size=(30, 3))
    scaled_pts = pts.copy()
    scaled_pts[:, :2] *= float(tau)
    got = a.rescale_p(tau).evaluate(pts)
    want = a.evaluate(scaled_pts)
    assert np.max(np.abs(got - want)) < 1e-13


def test_rescale_then_differentiate_commutes_with_chain_rule():
    a = bump_block(1, 0, "p", Fraction(1, 2), 1) * gauss_block(1, 0, "p")
    tau = Fraction(1, 4)
    left = a.rescale_p(tau).differentiate(0)
    right = a.differentiate(0).rescale_p(tau) * float(tau)
    pts = np.array([[1.2, 0.4], [3.0, 1.0], [0.3, -0.1]])
    assert np.max(np.abs(left.evaluate(pts) - right.evaluate(pts))) < 1e-13


def test_mixed_pairing_derivatives_of_gaussian():
    # exp(-(B^2 + xi^2)/2) has pairing derivatives 1, 0, 1, 0, 9, 0, 225
    a = gauss_block(1, 0, "p", Fraction(1, 2))
    origin = np.zeros(2)
    expected = [1.0, 0.0, 1.0, 0.0, 9.0, 0.0, 225.0]
    for k, want in enumerate(expected):
        assert mixed_pairing_derivative(a, k).evaluate(origin) == want


def test_support_box_gaussian_widths():
    a = gauss_block(1, 1, "p") * gauss_block(1, 1, "X", Fraction(1, 16))
    box = support_box(a, cutoff=1e-14)
    w = math.sqrt(-math.log(1e-14))
    assert box.halfwidths[0] == pytest.approx(w, rel=1e-12)
    assert box.halfwidths[1] == pytest.approx(w, rel=1e-12)
    assert box.halfwidths[2] == pytest.approx(4 * w, rel=1e-12)
    assert box.p_radius is None
    corner = np.array(box.halfwidths)
    assert abs(a.evaluate(corner)) < 1e-14 * 3


def test_support_box_accounts_for_polynomial_growth():
    a = parse_amplitude("poly(p1^4) * gauss(p)", 1, 0)
    box = support_box(a, cutoff=1e-14)
    plain = math.sqrt(-math.log(1e-14))
    assert box.halfwidths[0] > plain
    edge = np.array([box.halfwidths[0], 0.0])
    assert abs(a.evaluate(edge)) < 1e-13


def test_support_box_bump_caps_and_radius():
    a = gauss_block(1, 0, "p") * bump_block(1, 0, "p", 1, 2)
    box = support_box(a)
    assert box.halfwidths == (2.0, 2.0)
    assert box.p_radius == (0.0, 2.0)
    assert support_box(shell_cutoff(1, 0)).p_radius == (0.25, 1.0)


def test_support_box_rejects_undamped_axis():
    a = poly_amplitude(1, 0, Poly.var(2, 0))
    with pytest.raises(DomainError):
        support_box(a)


def test_sup_abs_bounds_the_peak():
    a = gauss_block(1, 0, "p")
    assert sup_abs(a) == pytest.approx(2.0, rel=1e-6)
    two = constant(1, 0, 2) * a
    assert sup_abs(two) == pytest.approx(4.0, rel=1e-6)


def test_quadratic_form_must_be_psd():
    with pytest.raises(PreconditionError):
        gauss_quad(1, 0, ((1, 2), (2, 1)))
    gauss_quad(1, 0, ((1, 0), (0, 1)))


def test_parser_round_trip_values():
    a = parse_amplitude("gauss(p) * gauss(X, 1/16)", 2, 1)
    pt = np.array([0.3, -0.2, 0.1, 0.5, 1.2])
    want = math.exp(-(0.09 + 0.04 + 0.01 + 0.25)) * math.exp(-1.44 / 16)
    assert a.evaluate(pt) == pytest.approx(want, rel=1e-14)

    b = parse_amplitude("2 * poly(p1^2 - 1/2 * X1) * gauss(p)", 1, 1)
    pt = np.array([0.5, 0.0, 0.8])
    want = 2 * (0.25 - 0.4) * math.exp(-0.25)
    assert b.evaluate(pt) == pytest.approx(want, rel=1e-14)

    c = parse_amplitude("gauss(p) + bump(p, 1, 2) - 1/3", 1, 0)
    assert c.evaluate(np.zeros(2)) == pytest.approx(1.0 + 1.0 - 1 / 3, rel=1e-14)


def test_parser_sphere_of_errors():
    with pytest.raises(DataError):
        parse_amplitude("gauss(q)", 1, 0)
    with pytest.raises(DataError):
        parse_amplitude("p1 * gauss(p)", 1, 0)
    with pytest.raises(DataError):
        parse_amplitude("poly(p5)", 1, 0)
    with pytest.raises(DataError):
        parse_amplitude("poly(gauss(p))", 1, 0)
    with pytest.raises(DataError):
        parse_amplitude("gauss(p) gauss(p)", 1, 0)
    with pytest.raises(DataError):
        parse_amplitude("bump(p, 2, 1)", 1, 0)


def test_parser_locates_the_offending_token():
    with pytest.raises(DataError, match="offset 9"):
        parse_amplitude("gauss(p) ?", 1, 0)


def test_amplitude_arithmetic_via_evaluation():
    a = parse_amplitude("gauss(p)", 1, 0)
    b = parse_amplitude("bump(p, 1, 2)", 1, 0)
    pts = np.array([[0.2, 0.1], [1.4, 0.3], [2.5, 0.0]])
    av, bv = a.evaluate(pts), b.evaluate(pts)
    assert np.allclose((a + b).evaluate(pts), av + bv, rtol=0, atol=1e-15)
    assert np.allclose((a * b).evaluate(pts), av * bv, rtol=0, atol=1e-15)
    assert np.allclose((a - b).evaluate(pts), av - bv, rtol=0, atol=1e-15)
    assert np.allclose((3 * a).evaluate(pts), 3 * av, rtol=0, atol=1e-15)


def test_complex_coefficients_evaluate_complex():
    p = Poly(2, {(1, 0): QQi(0, 1)})
    a = poly_amplitude(1, 0, p)
    v = a.evaluate(np.array([2.0, 0.0]))
    assert v == 2j


def test_evaluate_keeps_leading_shape():
    a = gauss_block(1, 1, "p")
    pts = np.zeros((4, 5, 3))
    assert a.evaluate(pts).shape == (4, 5)


def test_dimension_mismatch_rejected():
    a = gauss_block(1, 0, "p")
    b = gauss_block(2, 0, "p")
    with pytest.raises(PreconditionError):
        a * b
