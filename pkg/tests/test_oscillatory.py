"""Oscillatory integral routes checked against closed forms and each other."""

import math

import numpy as np
import pytest

from equiloc import _kernels
from equiloc.amplitudes import gauss_block, parse_amplitude
from equiloc.errors import CapabilityError, DataError, PreconditionError, \
    ResolutionError
from equiloc.models import LinearHamiltonianModel
from equiloc.oscillatory import (
    QuadratureSpec,
    brute_force_I,
    fit_order,
    gaussian_exact_I,
    inner_sp_expansion,
)


def hyperbolic_pair():
    return LinearHamiltonianModel(2, 1, ((1,), (-1,)))


def scaled_erfc(x: float) -> float:
    return math.exp(x * x) * math.erfc(x)


class TestGaussianRoute:
    def test_matches_erfc_closed_form(self):
        # int pi^2 e^{-cX^2} / (1 + (X/2mu)^2) dX = 2 pi mu pi^2 E(2 sqrt(c) mu)
        model = hyperbolic_pair()
        amp = parse_amplitude("gauss(p) * gauss(X, 1/16)", 2, 1)
        for mu in (0.2, 0.05, 0.01):
            got = gaussian_exact_I(model, amp, mu)
            want = 2 * math.pi * mu * math.pi ** 2 * scaled_erfc(0.5 * mu)
            assert abs(got.imag) < 1e-12 * want
            assert abs(got.real - want) < 1e-12 * want

    def test_four_weight_closed_form(self):
        # two hyperbolic pairs share the closed form through the same E(x)
        model = LinearHamiltonianModel(4, 1, ((1,), (-1,), (1,), (-1,)))
        amp = parse_amplitude("gauss(p) * gauss(X, 1/16)", 4, 1)
        c = 1.0 / 16.0
        for mu in (0.1, 0.02):
            x = 2.0 * math.sqrt(c) * mu
            E = scaled_erfc(x)
            want = (math.pi ** 5 * mu * E
                    - 8 * c * math.pi ** 5 * mu ** 3 * E
                    + 4 * math.sqrt(c) * math.pi ** 4.5 * mu ** 2)
            got = gaussian_exact_I(model, amp, mu)
            assert abs(got.real - want) < 1e-10 * want
            assert abs(got.imag) < 1e-10 * want

    def test_eta_shift_leading_exponential(self):
        # at a shifted level the ratio tends to pi^2 e^{-2 eta}
        model = hyperbolic_pair()
        amp = parse_amplitude("gauss(p) * gauss(X, 1/16)", 2, 1)
        eta = 0.3
        lead = math.pi ** 2 * math.exp(-2 * eta)
        vals = []
        for mu in (0.02, 0.005):
            got = gaussian_exact_I(model, amp, mu, eta=[eta])
            vals.append(abs(got.real / (2 * math.pi * mu) - lead) / lead)
        assert vals[1] < 1e-4
        assert vals[1] < 0.3 * vals[0]      # second-order convergence

    def test_rejects_radial_cutoffs(self):
        model = LinearHamiltonianModel(1, 1, ((2,),))
        amp = parse_amplitude("gauss(p) * bump(p, 1, 2) * gauss(X, 1)", 1, 1)
        with pytest.raises(CapabilityError):
            gaussian_exact_I(model, amp, 0.1)

    def test_rejects_high_parameter_rank(self):
        model = LinearHamiltonianModel(1, 3, ((1, 1, 1),))
        amp = gauss_block(1, 3, "p") * gauss_block(1, 3, "X")
        with pytest.raises(CapabilityError):
            gaussian_exact_I(model, amp, 0.1)

    def test_rejects_undamped_pair(self):
        model = hyperbolic_pair()
        amp = parse_amplitude("gauss(X, 1)", 2, 1)
        with pytest.raises(CapabilityError):
            gaussian_exact_I(model, amp, 0.1)


class TestBruteForce:
    def test_radial_matches_gaussian_route(self):
        model = hyperbolic_pair()
        amp = parse_amplitude("gauss(p) * gauss(X, 1/16)", 2, 1)
        for mu in (0.2, 0.1):
            got = brute_force_I(model, amp, mu)
            want = gaussian_exact_I(model, amp, mu)
            assert abs(got - want) < 1e-8 * abs(want)

    def test_radial_and_separable_agree(self):
        model = hyperbolic_pair()
        amp = parse_amplitude("gauss(p) * gauss(X, 1/16)", 2, 1)
        a = brute_force_I(model, amp, 0.5, mode="radial")
        b = brute_force_I(model, amp, 0.5, mode="separable")
        assert abs(a - b) < 1e-10 * abs(a)

    def test_radial_bump_matches_grid(self):
        spec = QuadratureSpec(cutoff=1e-9)
        model = LinearHamiltonianModel(1, 1, ((2,),))
        amp = parse_amplitude("gauss(p) * bump(p, 1, 2) * gauss(X, 1)", 1, 1)
        a = brute_force_I(model, amp, 0.3, spec=spec)
        b = brute_force_I(model, amp, 0.3, spec=spec, mode="grid")
        assert abs(a - b) < 1e-7 * abs(b)

    def test_separable_poly_matches_grid(self):
        spec = QuadratureSpec(cutoff=1e-6)
        model = LinearHamiltonianModel(1, 1, ((2,),))
        amp = parse_amplitude("poly(1 + p1^2*X1) * gauss(p) * gauss(X, 4)",
                              1, 1)
        a = brute_force_I(model, amp, 0.6, spec=spec)
        b = brute_force_I(model, amp, 0.6, spec=spec, mode="grid")
        assert abs(a - b) < 1e-10 * abs(b)
        assert abs(a.imag) > 0.01        # the mixed monomial is not even

    def test_eta_shift_matches_gaussian_route(self):
        model = hyperbolic_pair()
        amp = parse_amplitude("gauss(p) * gauss(X, 1/16)", 2, 1)
        a = brute_force_I(model, amp, 0.1, eta=[0.25])
        b = gaussian_exact_I(model, amp, 0.1, eta=[0.25])
        assert abs(a - b) < 1e-8 * abs(b)

    def test_node_override_guard_names_axis(self):
        model = hyperbolic_pair()
        amp = parse_amplitude("gauss(p) * gauss(X, 1/16)", 2, 1)
        with pytest.raises(ResolutionError, match="axis X1"):
            brute_force_I(model, amp, 0.05, spec=QuadratureSpec(nodes=64))

    def test_grid_point_cap(self):
        model = hyperbolic_pair()
        amp = parse_amplitude("gauss(p) * gauss(X, 1/16)", 2, 1)
        with pytest.raises(ResolutionError, match="tensor grid"):
            brute_force_I(model, amp, 0.05, mode="grid")

    def test_mode_not_admitted(self):
        model = LinearHamiltonianModel(1, 1, ((2,),))
        amp = parse_amplitude("gauss(p) * bump(p, 1, 2) * gauss(X, 1)", 1, 1)
        with pytest.raises(CapabilityError):
            brute_force_I(model, amp, 0.3, mode="separable")

    def test_unknown_mode_rejected(self):
        model = hyperbolic_pair()
        amp = parse_amplitude("gauss(p) * gauss(X, 1/16)", 2, 1)
        with pytest.raises(PreconditionError):
            brute_force_I(model, amp, 0.3, mode="exact")

    def test_dimension_mismatch(self):
        model = hyperbolic_pair()
        amp = parse_amplitude("gauss(p) * gauss(X, 1)", 1, 1)
        with pytest.raises(PreconditionError):
            brute_force_I(model, amp, 0.3)

    def test_kernel_backends_agree(self, monkeypatch):
        spec = QuadratureSpec(cutoff=1e-9)
        model = LinearHamiltonianModel(1, 1, ((2,),))
        amp = parse_amplitude("gauss(p) * bump(p, 1, 2) * gauss(X, 1)", 1, 1)
        fast = brute_force_I(model, amp, 0.3, spec=spec)
        monkeypatch.setattr(_kernels, "_have_numba", False)
        slow = brute_force_I(model, amp, 0.3, spec=spec)
        assert abs(fast - slow) < 1e-12 * abs(fast)


class TestInnerExpansion:
    def test_pairing_derivatives_of_unit_gaussian(self):
        amp = gauss_block(1, 0, "p", c="1/2")
        res = inner_sp_expansion(amp, 2, [0.1])
        assert [d.real for d in res.derivatives] == [1.0, 0.0, 1.0]
        assert all(abs(d.imag) == 0.0 for d in res.derivatives)

    def test_residual_slope_is_2K_plus_1(self):
        amp = gauss_block(1, 0, "p", c="1/2")
        nus = np.geomspace(0.02, 0.2, 8)
        res = inner_sp_expansion(amp, 2, nus)
        errs = [abs(S - 2 * math.pi * nu / math.sqrt(1 + nu * nu))
                for nu, S in zip(res.nus, res.partial_sums)]
        slope = np.polyfit(np.log(nus), np.log(errs), 1)[0]
        assert abs(slope - 5.0) < 0.15

    def test_remainder_bound_dominates_error(self):
        amp = gauss_block(1, 0, "p", c="1/2")
        nus = [0.05, 0.1, 0.2]
        res = inner_sp_expansion(amp, 2, nus)
        for nu, S, B in zip(res.nus, res.partial_sums, res.remainder_bounds):
            exact = 2 * math.pi * nu / math.sqrt(1 + nu * nu)
            assert abs(S - exact) <= B

    def test_two_pair_product(self):
        # product of unit-Gaussian pairs: D_2 doubles, exact value squares
        amp = gauss_block(2, 0, "p", c="1/2")
        res = inner_sp_expansion(amp, 2, [0.05])
        assert res.derivatives[2].real == 2.0
        nu = 0.05
        exact = (2 * math.pi * nu) ** 2 / (1 + nu * nu)
        assert abs(res.partial_sums[0] - exact) < 3e-6

    def test_preconditions(self):
        amp = gauss_block(1, 0, "p", c="1/2")
        with pytest.raises(PreconditionError):
            inner_sp_expansion(amp, 7, [0.1])
        with pytest.raises(PreconditionError):
            inner_sp_expansion(amp, 2, [0.0])
        with_params = gauss_block(1, 1, "p")
        with pytest.raises(PreconditionError):
            inner_sp_expansion(with_params, 2, [0.1])


class TestFitOrder:
    def test_pure_power(self):
        mus = np.geomspace(0.01, 0.2, 6)
        res = fit_order(mus, 3.5 * mus ** 2)
        assert abs(res.alpha - 2.0) < 1e-10
        assert res.beta == 0.0
        assert abs(res.coeff - 3.5) < 1e-9

    def test_power_with_log(self):
        mus = np.geomspace(0.01, 0.2, 6)
        vals = 1.7 * mus ** 3 * np.log(1.0 / mus)
        res = fit_order(mus, vals, with_log=True)
        assert abs(res.alpha - 3.0) < 1e-10
        assert abs(res.beta - 1.0) < 1e-10
        assert res.max_log_misfit < 1e-12

    def test_log_misfit_reported(self):
        mus = np.geomspace(0.01, 0.2, 6)
        rng = np.random.default_rng(7)
        vals = mus ** 2 * np.exp(rng.normal(0, 0.01, mus.size))
        res = fit_order(mus, vals)
        assert 0 < res.max_log_misfit < 0.05

    def test_data_errors(self):
        with pytest.raises(DataError):
            fit_order([0.1, 0.2, 0.3], [1, 2, 3])
        with pytest.raises(DataError):
            fit_order([0.1, 0.2, 0.3, 0.4], [1.0, -1.0, 1.0, 1.0])
        with pytest.raises(DataError):
            fit_order([0.1, 0.2, 0.3, 1.5], [1.0, 1.0, 1.0, 1.0],
                      with_log=True)


class TestQuadratureSpec:
    def test_rule_orders(self):
        assert QuadratureSpec(rule="gl8").order == 8
        with pytest.raises(DataError):
            QuadratureSpec(rule="simpson").order
        with pytest.raises(DataError):
            QuadratureSpec(rule="gl200").order
