"""Momentum-map geometry: defining identity, stabilizers, slices, Hessians."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from equiloc.errors import PreconditionError
from equiloc.models import (
    IsotropyDatum,
    LinearHamiltonianModel,
    SphereModel,
    isotropy,
    momentum_defect,
    momentum_map,
    slice_decomposition,
    transversal_hessian_det,
)


def circle(weights):
    return LinearHamiltonianModel(len(weights), 1, tuple((w,) for w in weights))


def test_momentum_weight_one():
    m = circle([1])
    assert momentum_map(m, np.array([1.0 + 0j]))[0] == -0.5
    assert m.phase(np.array([1.0 + 0j]), [1.0]) == -0.5


def test_momentum_balanced_pair_vanishes():
    m = circle([1, -1])
    J = momentum_map(m, np.array([1.0 + 0j, 1.0 + 0j]))
    assert J[0] == 0.0


def test_momentum_real_and_complex_layouts_agree():
    rng = np.random.default_rng(7)
    m = LinearHamiltonianModel(3, 2, ((1, 0), (2, -1), (0, 3)))
    z = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    real = np.empty(6)
    real[0::2], real[1::2] = z.real, z.imag
    assert np.array_equal(momentum_map(m, z), momentum_map(m, real))


def test_phase_with_shift():
    m = circle([1, -1])
    z = np.array([2.0 + 0j, 1.0 + 0j])
    # J = -(4 - 1)/2 = -3/2; eta = 1/2 gives (J - eta) X = -2 X
    assert m.phase(z, [3.0], eta=[0.5]) == -6.0


def test_fundamental_field_by_hand():
    m = circle([2, -3])
    z = np.array([1.0 + 2.0j, -1.0j])
    xt = m.fundamental_field(z, [0.5])
    # a = (1, -1.5); Xt_j = -i a_j z_j
    assert xt[0] == pytest.approx(-1j * (1.0 + 2.0j))
    assert xt[1] == pytest.approx(1.5j * (-1.0j))


def test_momentum_defect_small_for_true_map():
    m = LinearHamiltonianModel(2, 2, ((1, 0), (-2, 3)))
    rng = np.random.default_rng(3)
    z = rng.standard_normal(2) + 1j * rng.standard_normal(2)
    for h in (1e-2, 1e-3, 1e-5):
        d = momentum_defect(m, z, [0.7, -1.1], h=h)
        # central differences are exact on a quadratic; only the eps/h
        # cancellation floor remains
        assert d <= 0.5 * h**2 + 1e-13 / h


def test_momentum_defect_flags_sign_error():
    class Flipped(LinearHamiltonianModel):
        def momentum_covector(self, v):
            return -super().momentum_covector(v)

    m = Flipped(1, 1, ((1,),))
    d = momentum_defect(m, np.array([1.0 + 1.0j]), [1.0])
    # wrong sign doubles the differential instead of cancelling it
    assert d > 1.0


def test_momentum_defect_sphere_chart():
    m = SphereModel(grid=16)
    assert momentum_defect(m, (0.3, 1.2), [2.0]) <= 1e-10


def test_isotropy_orders():
    assert isotropy(circle([1, -1]), np.array([1.0, 1.0])) == IsotropyDatum(0, 1)
    assert isotropy(circle([2, -2]), np.array([1.0, 1.0])) == IsotropyDatum(0, 2)
    assert isotropy(circle([1, -1]), np.array([0.0, 0.0])) == \
        IsotropyDatum(1, "infinite")
    m2 = LinearHamiltonianModel(2, 2, ((1, 0), (0, 1)))
    assert isotropy(m2, np.array([1.0, 0.0])) == IsotropyDatum(1, "infinite")
    m3 = LinearHamiltonianModel(2, 2, ((2, 0), (0, 3)))
    assert isotropy(m3, np.array([1.0, 1.0])) == IsotropyDatum(0, 6)


def test_isotropy_tolerance_drops_tiny_coordinates():
    m = circle([2, 1])
    near_axis = np.array([1.0, 1e-9])
    assert isotropy(m, near_axis, tol=1e-6) == IsotropyDatum(0, 2)
    assert isotropy(m, near_axis, tol=0.0) == IsotropyDatum(0, 1)


@settings(max_examples=60, derandomize=True)
@given(st.lists(st.integers(min_value=-9, max_value=9), min_size=1, max_size=5)
       .filter(lambda ws: any(ws)))
def test_isotropy_order_is_gcd_for_rank_one(ws):
    m = circle(ws)
    datum = isotropy(m, np.ones(len(ws)))
    assert datum.algebra_dim == 0
    assert datum.finite_order == math.gcd(*ws)


def test_isotropy_datum_validation():
    with pytest.raises(PreconditionError):
        IsotropyDatum(0, "infinite")
    with pytest.raises(PreconditionError):
        IsotropyDatum(1, 4)
    with pytest.raises(PreconditionError):
        IsotropyDatum(0, 0)


def test_slice_trivial_stabilizer_fixes_everything():
    m = circle([1, -1])
    d = slice_decomposition(m, np.array([1.0, 1.0]))
    assert d.stabilizer_subalgebra == ()
    assert d.complement == ((1,),)
    assert d.fixed_indices == (0, 1)
    assert d.moving_indices == ()


def test_slice_at_origin():
    m = circle([1, -1])
    d = slice_decomposition(m, np.array([0.0, 0.0]))
    assert d.stabilizer_subalgebra == ((1,),)
    assert d.complement == ()
    assert d.fixed_indices == ()
    assert d.moving_indices == (0, 1)


def test_slice_mixed_rank_two():
    m = LinearHamiltonianModel(2, 2, ((1, 0), (0, 1)))
    d = slice_decomposition(m, np.array([1.0, 0.0]))
    assert d.stabilizer_subalgebra == ((0, 1),)
    assert d.complement == ((1, 0),)
    assert d.fixed_indices == (0,)
    assert d.moving_indices == (1,)


def test_hessian_det_closed_form():
    m = circle([1, -1])
    c = 1.7
    p = np.array([c / math.sqrt(2), c / math.sqrt(2)], dtype=complex)
    assert transversal_hessian_det(m, p, [0.0]) == pytest.approx(c**2, rel=1e-12)


def _fd_hessian_det(model, p):
    """Differentiate each momentum component along i * (fundamental field)."""
    z = model.as_complex(p)
    r = model.torus_rank
    t = 1e-4
    M = np.empty((r, r))
    for l in range(r):
        a = model.weight_array[:, l].astype(float)
        direction = a * z
        for k in range(r):
            Jp = model.momentum_covector(z + t * direction)[k]
            Jm = model.momentum_covector(z - t * direction)[k]
            M[k, l] = (Jp - Jm) / (2 * t)
    return float(np.linalg.det(M))


def zero_level_points(rng, count):
    """Seeded zero-level samples on a rank-1 and a rank-2 model."""
    m1 = circle([1, -1])
    m2 = LinearHamiltonianModel(4, 2, ((1, 0), (-1, 0), (0, 1), (0, -1)))
    out = []
    for _ in range(count):
        rho = rng.uniform(0.5, 1.5)
        ph = rng.uniform(0, 2 * math.pi, 2)
        out.append((m1, rho * np.exp(1j * ph)))
        rho2 = rng.uniform(0.5, 1.5, 2)
        ph4 = rng.uniform(0, 2 * math.pi, 4)
        z = np.array([rho2[0], rho2[0], rho2[1], rho2[1]]) * np.exp(1j * ph4)
        out.append((m2, z))
    return out


def test_hessian_det_matches_finite_differences():
    rng = np.random.default_rng(11)
    for model, p in zero_level_points(rng, 50):
        det = transversal_hessian_det(model, p, np.zeros(model.torus_rank))
        sign = (-1) ** model.torus_rank
        assert det > 0
        assert _fd_hessian_det(model, p) == pytest.approx(sign * det, rel=1e-5)


def test_hessian_det_scales_like_c_to_2r():
    m = LinearHamiltonianModel(4, 2, ((1, 0), (-1, 0), (0, 1), (0, -1)))
    p = np.array([1.0, 1.0, 0.5, 0.5], dtype=complex)
    d1 = transversal_hessian_det(m, p, [0.0, 0.0])
    d2 = transversal_hessian_det(m, 2.0 * p, [0.0, 0.0])
    assert d2 == pytest.approx(2**4 * d1, rel=1e-12)


def test_hessian_det_preconditions():
    m = circle([1, -1])
    with pytest.raises(PreconditionError):
        transversal_hessian_det(m, np.array([2.0, 1.0], dtype=complex), [0.0])
    with pytest.raises(PreconditionError):
        transversal_hessian_det(m, np.array([1.0, 1.0], dtype=complex), [1.0])
    with pytest.raises(PreconditionError):
        transversal_hessian_det(m, np.zeros(2, dtype=complex), [0.0])


def test_sphere_area_and_moments():
    m = SphereModel(grid=40)
    assert m.surface_integral(lambda z, phi: 1.0 + 0 * z) == \
        pytest.approx(4 * math.pi, rel=1e-13)
    assert abs(m.surface_integral(lambda z, phi: z)) <= 1e-13
    assert m.surface_integral(lambda z, phi: z**2) == \
        pytest.approx(4 * math.pi / 3, rel=1e-13)


def test_sphere_height_momentum():
    m = SphereModel()
    assert momentum_map(m, (0.0, 0.0, 1.0))[0] == 1.0
    assert momentum_map(m, (0.6, 0.8, 0.0))[0] == 0.0


def test_sphere_oscillatory_integral():
    m = SphereModel(grid=60)
    Y = 1.3
    val = m.surface_integral(lambda z, phi: np.exp(1j * Y * z))
    assert val == pytest.approx(4 * math.pi * math.sin(Y) / Y, rel=1e-12)


def test_weight_matrix_validation():
    with pytest.raises(PreconditionError):
        LinearHamiltonianModel(2, 1, ((1,),))
    with pytest.raises(PreconditionError):
        LinearHamiltonianModel(1, 2, ((1,),))
    with pytest.raises(PreconditionError):
        LinearHamiltonianModel(2, 1, ((0,), (0,)))
