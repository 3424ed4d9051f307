import math
from fractions import Fraction

import numpy as np
import pytest

from equiloc._exact import Poly, QQi
from equiloc.amplitudes import (
    bump_block,
    gauss_block,
    gauss_quad,
    head_cutoff,
    poly_amplitude,
    shell_cutoff,
    sup_abs,
    support_box,
)
from equiloc.desing import (
    DyadicPartition,
    desingularize,
    dyadic_weights,
    format_tree,
    homogeneity_check,
    leading_term_L0,
    leading_term_regular,
    rescale_amplitude,
    strata_catalog,
)
from equiloc.errors import (
    CapabilityError,
    DomainError,
    PreconditionError,
    UnsupportedModelError,
)
from equiloc.models import LinearHamiltonianModel
from equiloc.oscillatory import brute_force_I, gaussian_exact_I


def circle(weights):
    return LinearHamiltonianModel(len(weights), 1, tuple((w,) for w in weights))


def gauss_amp(n, cx=Fraction(1, 16)):
    dim = 2 * n + 1
    quad = [[1 if (i == j and i < 2 * n) else 0 for j in range(dim)]
            for i in range(dim)]
    return gauss_quad(n, 1, quad) * gauss_block(n, 1, "X", cx)


class TestDyadicPartition:
    def test_boundary_radius_has_single_unit_weight(self):
        part = DyadicPartition()
        assert dyadic_weights(part, [0.5, 0.0]) == {0: 1.0}
        assert dyadic_weights(part, [0.25, 0.0]) == {1: 1.0}

    def test_generic_radius_splits_over_two_levels(self):
        part = DyadicPartition()
        w = dyadic_weights(part, [2.0 ** -10 / 3.0, 0.0])
        assert sorted(w) == [10, 11]
        assert all(0.0 < v < 1.0 for v in w.values())
        assert abs(sum(w.values()) - 1.0) <= 1e-12

    def test_partition_of_unity(self):
        part = DyadicPartition()
        rng = np.random.default_rng(31)
        worst = 0.0
        for _ in range(300):
            v = rng.standard_normal(4)
            v *= 0.5 * rng.random() ** 2 / np.linalg.norm(v)
            if not np.any(v):
                continue
            weights = dyadic_weights(part, v)
            assert len(weights) <= 2
            worst = max(worst, abs(sum(weights.values()) - 1.0))
        assert worst <= 1e-12

    def test_partition_of_unity_other_profile(self):
        part = DyadicPartition(beta=3)
        total = sum(dyadic_weights(part, [0.09, 0.02]).values())
        assert abs(total - 1.0) <= 1e-12

    def test_domain_errors(self):
        part = DyadicPartition()
        with pytest.raises(DomainError):
            dyadic_weights(part, [0.0, 0.0])
        with pytest.raises(PreconditionError):
            dyadic_weights(part, [0.6, 0.0])
        with pytest.raises(PreconditionError):
            DyadicPartition(beta=0)

    def test_shell_cutoff_matches_profile_difference(self):
        part = DyadicPartition()
        shell = shell_cutoff(1, 1)
        radii = np.linspace(0.01, 1.2, 57)
        pts = np.stack([radii, np.zeros_like(radii), np.zeros_like(radii)],
                       axis=1)
        assert np.max(np.abs(shell.evaluate(pts) - part.sigma(radii))) <= 1e-14


class TestRescale:
    def test_level_zero_multiplies_by_one_shell(self):
        a = gauss_amp(1)
        direct = a * shell_cutoff(1, 1)
        scaled = rescale_amplitude(a, 0)
        pts = np.array([[0.3, 0.1, 0.5], [0.6, -0.2, -1.0], [0.9, 0.3, 0.0]])
        assert np.allclose(scaled.evaluate(pts), direct.evaluate(pts),
                           rtol=0, atol=1e-15)

    def test_gaussian_level_one_widens_by_four(self):
        a = gauss_amp(1)
        scaled = rescale_amplitude(a, 1)
        shell = shell_cutoff(1, 1)
        pts = np.array([[0.4, 0.2, 0.7], [0.8, -0.1, 0.2]])
        s = pts[:, 0] ** 2 + pts[:, 1] ** 2
        want = np.exp(-s / 4) * np.exp(-pts[:, 2] ** 2 / 16) * shell.evaluate(pts)
        assert np.allclose(scaled.evaluate(pts), want, rtol=1e-14, atol=0)

    def test_rescaling_contracts_derivative_sup(self):
        a = gauss_amp(2)
        da = a.differentiate(0)
        db = a.rescale_p(Fraction(1, 2)).differentiate(0)
        assert sup_abs(db) <= sup_abs(da) * (1 + 1e-9)

    def test_recovery_identity(self):
        # summing the rescaled shell integrals over 13 levels rebuilds the
        # head-cutoff integral
        m = circle([1, -1])
        a = gauss_amp(2)
        mu = 0.1
        ref = brute_force_I(m, a * head_cutoff(2, 1), mu)
        acc = 0.0
        for level in range(13):
            tau = 0.5 ** level
            val = brute_force_I(m, rescale_amplitude(a, level), mu / tau ** 2)
            acc += tau ** 4 * val
        assert abs(acc - ref) / abs(ref) <= 1e-5


class TestStrataCatalog:
    def test_hyperbolic_pair_with_origin(self):
        cat = strata_catalog(circle([1, -1]), None)
        assert [rec.label for rec in cat.records] == ["trivial", "S^1"]
        reg, origin = cat.records
        assert (reg.stratum_dim, reg.gap, reg.finite_order) == (2, 0, 1)
        assert (origin.stratum_dim, origin.gap) == (0, 2)
        assert origin.active_sets == ((),)
        assert cat.regular is reg
        assert cat.lambda_a == 1
        assert not cat.chain_counts_differ

    def test_annulus_support_drops_the_origin(self):
        ann = gauss_amp(2) * shell_cutoff(2, 1)
        cat = strata_catalog(circle([1, -1]), support_box(ann))
        assert [rec.label for rec in cat.records] == ["trivial"]
        assert cat.lambda_a == 0
        full = strata_catalog(circle([1, -1]), None)
        assert full.lambda_a >= cat.lambda_a

    def test_four_weights_have_gap_six(self):
        cat = strata_catalog(circle([1, -1, 1, -1]), None)
        dims = {rec.label: rec.stratum_dim for rec in cat.records}
        assert dims == {"trivial": 6, "S^1": 0}
        assert cat.records[1].gap == 6
        assert cat.lambda_a == 0

    def test_double_weights_give_orbifold_regular_class(self):
        cat = strata_catalog(circle([2, -2]), None)
        assert cat.regular.label == "Z/2"
        assert cat.regular.finite_order == 2
        assert cat.lambda_a == 1

    def test_positive_dimensional_regular_stabilizer_rejected(self):
        with pytest.raises(UnsupportedModelError):
            strata_catalog(circle([1, 1]), None)

    def test_rank_two_product_chain(self):
        m = LinearHamiltonianModel(4, 2, ((1, 0), (-1, 0), (0, 1), (0, -1)))
        cat = strata_catalog(m, None)
        labels = [rec.label for rec in cat.records]
        assert labels == ["trivial", "S^1", "S^1", "T^2"]
        assert [rec.stratum_dim for rec in cat.records] == [4, 2, 2, 0]
        assert cat.lambda_a == 2
        assert not cat.chain_counts_differ

    def test_rank_cap(self):
        m = LinearHamiltonianModel(3, 3, ((1, 0, 0), (0, 1, 0), (0, 0, 1)))
        with pytest.raises(CapabilityError):
            strata_catalog(m, None)


class TestLeadingTerm:
    def test_frozen_values(self):
        cases = [([1, -1], math.pi ** 2),
                 ([2, -2], math.pi ** 2 / 2),
                 ([1, -2], 2 * math.pi ** 2 / 3),
                 ([2, -3], 2 * math.pi ** 2 / 5)]
        for weights, want in cases:
            got = leading_term_L0(circle(weights), gauss_amp(len(weights)))
            assert abs(got - want) <= 1e-12 * want

    def test_four_weight_value(self):
        got = leading_term_L0(circle([1, -1, 1, -1]), gauss_amp(4))
        want = math.pi ** 4 / 2
        assert abs(got - want) <= 1e-10 * want

    def test_linear_in_the_amplitude(self):
        m = circle([1, -1])
        a = gauss_amp(2)
        assert abs(leading_term_L0(m, 3 * a) - 3 * leading_term_L0(m, a)) \
            <= 1e-12

    def test_matches_small_parameter_limit(self):
        m = circle([1, -1])
        mu = 0.01
        val = gaussian_exact_I(m, gauss_amp(2), mu) / (2 * math.pi * mu)
        assert abs(val - math.pi ** 2) <= 0.02 * math.pi ** 2

    def test_regular_levels_follow_exponential_law(self):
        m = circle([1, -1])
        a = gauss_amp(2)
        L0 = leading_term_L0(m, a)
        prev = math.inf
        for eta in (0.2, 0.1, 0.05):
            got = leading_term_regular(m, a, eta)
            want = math.pi ** 2 * math.exp(-2 * eta)
            assert abs(got - want) <= 1e-12 * want
            gap = abs(got - L0)
            assert gap < prev
            prev = gap

    def test_level_beyond_the_support_vanishes(self):
        m = circle([1, -1])
        ann = gauss_amp(2) * shell_cutoff(2, 1)
        assert leading_term_regular(m, ann, 5.0) == 0.0

    def test_singular_level_rejected(self):
        with pytest.raises(PreconditionError):
            leading_term_regular(circle([1, -1]), gauss_amp(2), 0.0)

    def test_polynomial_angle_average(self):
        # x1^2 averages to s/2 on the orbit, pinned at s = 1 by the level
        m = circle([2])
        px = Poly.var(3, 0) * Poly.var(3, 0)
        amp = poly_amplitude(1, 1, px) * gauss_amp(1)
        got = leading_term_regular(m, amp, -1.0)
        want = math.pi * math.exp(-1.0) / 2
        assert abs(got - want) <= 1e-12 * want

    def test_rank_two_unsupported(self):
        m = LinearHamiltonianModel(4, 2, ((1, 0), (-1, 0), (0, 1), (0, -1)))
        quad = [[1 if (i == j and i < 8) else 0 for j in range(10)]
                for i in range(10)]
        with pytest.raises(UnsupportedModelError):
            leading_term_L0(m, gauss_quad(4, 2, quad))


class TestDesingularize:
    def test_hyperbolic_pair(self):
        res = desingularize(circle([1, -1]), gauss_amp(2),
                            mus=[0.2, 0.1, 0.05, 0.02, 0.01])
        assert res.kappa == 1
        assert abs(res.L0 - math.pi ** 2) <= 1e-12 * math.pi ** 2
        assert res.lambda_a == 1
        assert res.depth == 1
        assert 1.8 <= res.alpha <= 2.2
        assert abs(res.beta) <= 0.5
        assert res.tree.label == "root"
        (child,) = res.tree.children
        assert child.label == "S^1"
        assert not child.children
        for mu, _, pred in res.table:
            assert pred == pytest.approx(2 * math.pi * mu * res.L0)
        assert format_tree(res.tree).splitlines() == [
            "root (regular trivial, singular S^1)",
            "  S^1 (regular trivial, singular none)",
        ]

    def test_leading_term_ignores_partition_and_cap(self):
        base = desingularize(circle([1, -1]), gauss_amp(2))
        other = desingularize(circle([1, -1]), gauss_amp(2),
                              partition=DyadicPartition(beta=3), depth_cap=2)
        assert abs(base.L0 - other.L0) <= 1e-10

    def test_free_action_has_flat_tree_and_clean_order(self):
        # pair widths differ and the X factor has an odd part, so the first
        # correction beyond the leading term is genuinely of relative order
        # mu; the shell support keeps the action free
        diag = [1, 1, 2, 2, Fraction(1, 4)]
        quad = [[diag[i] if i == j else 0 for j in range(5)]
                for i in range(5)]
        onepx = Poly.const(5, QQi(1, 0)) + Poly.var(5, 4)
        amp = (gauss_quad(2, 1, quad) * poly_amplitude(2, 1, onepx)
               * shell_cutoff(2, 1) * bump_block(2, 1, "X", 1, 2))
        res = desingularize(circle([1, -1]), amp,
                            mus=np.geomspace(0.004, 0.05, 7))
        assert res.lambda_a == 0
        assert res.depth == 0
        assert not res.tree.children
        assert res.kappa + 0.8 <= res.alpha <= res.kappa + 1.2

    def test_four_weights_carry_no_log(self):
        res = desingularize(circle([1, -1, 1, -1]), gauss_amp(4),
                            mus=[0.2, 0.1, 0.05, 0.02, 0.01])
        assert res.lambda_a == 0
        assert res.depth == 1
        assert abs(res.L0 - math.pi ** 4 / 2) <= 1e-9 * math.pi ** 4 / 2
        assert abs(res.beta) <= 0.5


class TestHomogeneity:
    def test_binary_scales_are_exact(self):
        m = LinearHamiltonianModel(2, 1, ((3,), (-5,)))
        rng = np.random.default_rng(11)
        w = rng.standard_normal(4)
        X = [0.37]
        for c in (0.0, 1.0, 2.0, 0.5, 4.0, 0.25):
            assert homogeneity_check(m, w, X, c) == 0.0

    def test_generic_scales_at_machine_precision(self):
        m = LinearHamiltonianModel(2, 2, ((3, -1), (2, 5)))
        rng = np.random.default_rng(12)
        w = rng.standard_normal(4)
        X = rng.standard_normal(2)
        psi = abs(m.phase(w, X))
        for c in (1.7, 0.3, 2.9):
            assert homogeneity_check(m, w, X, c) <= \
                1e-14 * max(psi, 1.0) * max(1.0, c * c)
