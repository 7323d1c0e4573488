"""Leray projection, Stokes powers, and the noise operators.

Grid oracles sample operands at lattice points via literal trigonometric
sums, multiply pointwise, and invert with the FFT, so every convolution
identity is checked against a computation that never touches the package's
shift-and-add accumulation.
"""

import math

import numpy as np
import pytest

from conftest import (
    dft_coefficients,
    direct_point_values,
    field_gap,
    gradient_field,
    lattice,
)
from torus_spde.errors import ContractViolationError
from torus_spde.fields import (
    FieldSpec,
    FourierField,
    derivative,
    inner_l2,
    mode_pair_field,
    multi_indices,
    multiply,
    random_field,
)
from torus_spde.norms import winf_norm
from torus_spde.operators import (
    b_op,
    galerkin_project,
    leray,
    mixed_commutator_rhs,
    nonlinear,
    stokes_pow,
    stretch,
    stretch_adjoint,
    stretch_transport_commutator_rhs,
    transport,
)

IDTOL = 1e-12


def rand(band, decay, seed, div_free=False):
    return random_field(FieldSpec(band, decay, div_free), np.random.default_rng(seed))


def binom(a, b):
    return math.prod(math.comb(x, y) for x, y in zip(a, b))


def sub_indices(alpha):
    return [
        (i, j, k)
        for i in range(alpha[0] + 1)
        for j in range(alpha[1] + 1)
        for k in range(alpha[2] + 1)
    ]


class TestLeray:
    def test_removes_normal_component(self):
        f = mode_pair_field(1, (1, 0, 0), (1.0, 1.0, 0.0))
        p = leray(f)
        assert np.array_equal(p.coeff((1, 0, 0)), np.array([0.0, 1.0, 0.0]))

    def test_solenoidal_mode_unchanged(self):
        f = mode_pair_field(1, (1, 0, 0), (0.0, 1.0, 0.0))
        assert np.array_equal(leray(f).data, f.data)

    def test_annihilates_gradients(self):
        g = gradient_field(rand(2, 0.5, 0))
        assert leray(g).max_abs() <= IDTOL * g.max_abs()

    def test_output_is_solenoidal(self):
        p = leray(rand(3, 0.3, 1))
        num, den = p.solenoidal_residual()
        assert num <= IDTOL * den

    def test_idempotent(self):
        p = leray(rand(3, 0.0, 2))
        assert field_gap(leray(p), p) <= IDTOL

    def test_self_adjoint(self):
        f, g = rand(2, 0.4, 3), rand(2, 0.1, 4)
        a, b = inner_l2(leray(f), g), inner_l2(f, leray(g))
        assert abs(a - b) <= IDTOL * max(abs(a), abs(b))

    @pytest.mark.parametrize("alpha", [(1, 0, 0), (0, 1, 0), (0, 0, 2), (1, 1, 0)])
    def test_commutes_with_derivative(self, alpha):
        g = rand(3, 0.3, 5)
        assert field_gap(derivative(leray(g), alpha), leray(derivative(g, alpha))) <= IDTOL


class TestStokesPow:
    def test_zero_power_is_identity(self):
        f = rand(2, 0.5, 6, div_free=True)
        assert np.array_equal(stokes_pow(f, 0.0).data, f.data)

    def test_half_power_single_mode(self):
        # |k|^2 = 2, so A^(1/2) scales by sqrt(2)
        f = mode_pair_field(2, (1, 1, 0), (1.0, -1.0, 0.0))
        out = stokes_pow(f, 0.5)
        assert np.allclose(out.data, math.sqrt(2.0) * f.data, rtol=1e-15, atol=0.0)

    def test_power_composition(self):
        f = rand(3, 0.6, 7, div_free=True)
        a = stokes_pow(stokes_pow(f, 0.5), 1.5)
        b = stokes_pow(f, 2.0)
        assert field_gap(a, b) <= IDTOL

    def test_requires_solenoidal(self):
        with pytest.raises(ContractViolationError):
            stokes_pow(mode_pair_field(1, (1, 0, 0), (1.0, 0.0, 0.0)), 1.0)


class TestTransport:
    def test_single_pair_convolution(self):
        # (xi . grad f) at p+q carries i (xi_p . q) f_q = (0, 0, i)
        xi = mode_pair_field(1, (0, 1, 0), (1.0, 0.0, 0.0))
        f = mode_pair_field(1, (1, 0, 0), (0.0, 0.0, 1.0))
        out = transport(xi, f)
        assert out.band == 2
        assert np.allclose(out.coeff((1, 1, 0)), [0.0, 0.0, 1j], rtol=0.0, atol=1e-15)

    def test_zero_advector(self):
        assert transport(FourierField.zero(2), rand(2, 0.0, 8)).max_abs() == 0.0

    def test_grid_oracle(self):
        xi, f = rand(2, 0.8, 9, div_free=True), rand(2, 0.2, 10)
        comp = [derivative(f, a) for a in [(1, 0, 0), (0, 1, 0), (0, 0, 1)]]
        pts = lattice(11)  # band-4 output needs >= 9 points per axis
        xv = direct_point_values(xi, pts)
        ref = sum(xv[..., j : j + 1] * direct_point_values(comp[j], pts) for j in range(3))
        oracle = dft_coefficients(ref, 4)
        mine = np.moveaxis(transport(xi, f)._embedded(4), 0, -1)
        assert np.abs(oracle - mine).max() <= IDTOL * np.abs(mine).max()

    def test_cancellation_pairing(self):
        # <(xi . grad) f, f> vanishes for solenoidal xi
        xi, f = rand(2, 1.0, 11, div_free=True), rand(3, 0.3, 12)
        pairing = inner_l2(transport(xi, f), f)
        assert abs(pairing) <= IDTOL * winf_norm(xi, 1) * inner_l2(f, f)

    def test_no_cancellation_for_compressible_advector(self):
        xi = gradient_field(rand(2, 0.5, 13))  # strongly compressible
        f = rand(2, 0.2, 14)
        pairing = inner_l2(transport(xi, f), f)
        assert abs(pairing) > 1e-6 * winf_norm(xi, 1) * inner_l2(f, f)


class TestStretch:
    def test_componentwise_multiply_oracle(self):
        # f supported on component 1 only: stretch output l is f^1 d_l xi^1
        xi = rand(2, 0.6, 15)
        fscalar = rand(2, 0.2, 16).data[0]
        f = FourierField(2, np.stack([fscalar, np.zeros_like(fscalar), np.zeros_like(fscalar)]))
        rep = FourierField(2, np.stack([fscalar, fscalar, fscalar]))
        grad1 = gradient_field(xi)  # gradient of xi's first component
        assert field_gap(stretch(xi, f), multiply(rep, grad1)) <= IDTOL

    def test_zero_inputs(self):
        assert stretch(FourierField.zero(1), rand(1, 0.0, 17)).max_abs() == 0.0
        assert stretch(rand(1, 0.0, 18), FourierField.zero(1)).max_abs() == 0.0

    def test_grid_oracle_and_adjoint(self):
        # sample the Jacobian d_l xi^j at lattice points; stretch is the
        # transpose action f |-> (grad xi)^T-style sum over j, the adjoint
        # the plain matrix action
        xi = rand(2, 0.7, 19, div_free=True)
        f, g = rand(2, 0.3, 20), rand(2, 0.1, 21)
        pts = lattice(11)
        jac = np.stack(
            [
                [direct_point_values(derivative(xi, a), pts)[..., j] for a in
                 [(1, 0, 0), (0, 1, 0), (0, 0, 1)]]
                for j in range(3)
            ]
        )  # jac[j, l] = d_l xi^j
        fv = direct_point_values(f, pts)
        gv = direct_point_values(g, pts)
        s_ref = np.stack([sum(fv[..., j] * jac[j, l] for j in range(3)) for l in range(3)], axis=-1)
        a_ref = np.stack([sum(jac[j, l] * gv[..., l] for l in range(3)) for j in range(3)], axis=-1)
        s = np.moveaxis(stretch(xi, f)._embedded(4), 0, -1)
        a = np.moveaxis(stretch_adjoint(xi, g)._embedded(4), 0, -1)
        assert np.abs(dft_coefficients(s_ref, 4) - s).max() <= IDTOL * np.abs(s).max()
        assert np.abs(dft_coefficients(a_ref, 4) - a).max() <= IDTOL * np.abs(a).max()
        lhs = inner_l2(stretch(xi, f), g)
        rhs = inner_l2(f, stretch_adjoint(xi, g))
        assert abs(lhs - rhs) <= IDTOL * max(abs(lhs), abs(rhs))


class TestTransportStretching:
    def test_b_is_transport_plus_stretch(self):
        xi, f = rand(2, 1.0, 22, div_free=True), rand(3, 0.4, 23, div_free=True)
        assert field_gap(b_op(xi, f), transport(xi, f) + stretch(xi, f)) <= IDTOL

    def test_projected_b_absorbs_leray(self):
        # P B = P B P: pre-projecting the input cannot change the projected
        # output because B maps the gradient complement into gradients
        xi = rand(2, 0.9, 24, div_free=True)
        g = rand(2, 0.2, 25)
        a = leray(b_op(xi, g))
        b = leray(b_op(xi, leray(g)))
        assert field_gap(a, b) <= IDTOL

    def test_projected_b_kills_pure_gradients(self):
        # B maps gradients to gradients, so the projection annihilates them
        xi = rand(2, 0.9, 26, div_free=True)
        grad = gradient_field(rand(2, 0.5, 27))
        bg = b_op(xi, grad)
        assert leray(bg).max_abs() <= IDTOL * bg.max_abs()

    def test_projected_b_square(self):
        # (P B)^2 f = P B^2 f: the inner projection is absorbed
        xi, f = rand(2, 0.8, 28, div_free=True), rand(2, 0.3, 29, div_free=True)
        bf = b_op(xi, f)
        lhs = leray(b_op(xi, leray(bf)))
        rhs = leray(b_op(xi, bf))
        assert field_gap(lhs, rhs) <= IDTOL


class TestNonlinear:
    def test_single_mode_self_advection_vanishes(self):
        # u_k . k = 0 exactly for this integer mode, and the only convolution
        # products sit at 0 and +-2k with coefficient proportional to u_k . k
        k = (1, 2, 0)
        val = np.array([2.0, -1.0, 3.0j])
        assert complex(np.dot(np.asarray(k, dtype=np.complex128), val)) == 0.0
        u = mode_pair_field(2, k, val)
        assert nonlinear(u).max_abs() == 0.0

    def test_energy_cancellation(self):
        u = rand(3, 0.5, 30, div_free=True)
        nrm = math.sqrt(inner_l2(u, u))
        assert abs(inner_l2(nonlinear(u), u)) <= IDTOL * nrm**3

    def test_requires_solenoidal(self):
        with pytest.raises(ContractViolationError):
            nonlinear(mode_pair_field(1, (1, 0, 0), (1.0, 0.0, 0.0)))

    def test_matches_projected_transport(self):
        u = rand(2, 0.4, 31, div_free=True)
        assert field_gap(nonlinear(u), leray(transport(u, u))) <= IDTOL


class TestGalerkin:
    def test_noop_above_band_returns_same_object(self):
        f = rand(3, 0.0, 32)
        assert galerkin_project(f, 3) is f
        assert galerkin_project(f, 7) is f

    def test_projects_to_zero_band(self):
        assert galerkin_project(rand(2, 0.0, 33), 0).max_abs() == 0.0

    def test_kept_modes_are_copied_exactly(self):
        f = rand(4, 0.2, 34)
        p = galerkin_project(f, 2)
        assert p.band == 2
        for k, v in p.coeffs.items():
            assert np.array_equal(v, f.coeff(k))
        assert np.array_equal(galerkin_project(p, 2).data, p.data)

    def test_truncation_error_non_increasing(self):
        f = rand(4, 0.1, 35)
        errs = []
        for n in range(5):
            d = galerkin_project(f, n) - f
            errs.append(math.sqrt(inner_l2(d, d)))
        assert all(a >= b for a, b in zip(errs, errs[1:]))
        assert errs[-1] == 0.0

    def test_negative_band_rejected(self):
        with pytest.raises(ValueError):
            galerkin_project(rand(1, 0.0, 36), -1)


class TestLeibniz:
    @pytest.mark.parametrize("alpha", [(1, 0, 0), (1, 1, 0), (0, 1, 2), (3, 0, 0)])
    def test_derivative_of_b_expands(self, alpha):
        # D^a B(xi, f) = sum_{b <= a} C(a, b) B(D^b xi, D^(a-b) f)
        xi, f = rand(2, 0.9, 37, div_free=True), rand(2, 0.4, 38)
        lhs = derivative(b_op(xi, f), alpha)
        rhs = FourierField.zero(lhs.band)
        for beta in sub_indices(alpha):
            gamma = tuple(a - b for a, b in zip(alpha, beta))
            rhs = rhs + float(binom(alpha, beta)) * b_op(derivative(xi, beta), derivative(f, gamma))
        assert field_gap(lhs, rhs) <= IDTOL


class TestCommutators:
    def test_stretch_transport_commutator(self):
        # [T_xi, L_xi] g against the explicit second-derivative form
        xi, g = rand(2, 0.8, 39, div_free=True), rand(2, 0.3, 40)
        lhs = stretch(xi, transport(xi, g)) - transport(xi, stretch(xi, g))
        rhs = stretch_transport_commutator_rhs(xi, g)
        assert field_gap(lhs, rhs) <= IDTOL

    def test_mixed_transport_commutator(self):
        xi, eta, g = rand(2, 0.8, 41, div_free=True), rand(2, 0.6, 42, div_free=True), rand(2, 0.2, 43)
        lhs = b_op(eta, transport(xi, g)) - transport(xi, b_op(eta, g))
        rhs = mixed_commutator_rhs(eta, xi, g)
        assert field_gap(lhs, rhs) <= IDTOL


class TestContracts:
    def test_error_names_offender(self):
        bad = mode_pair_field(1, (1, 0, 0), (1.0, 0.0, 0.0))
        with pytest.raises(ContractViolationError, match="stokes_pow"):
            stokes_pow(bad, 1.0)
