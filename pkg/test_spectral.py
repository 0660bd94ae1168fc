import numpy as np
import pytest
from numpy.testing import assert_allclose

import specfactors.spectral as spectral
import specfactors.statespace as ss
from specfactors.errors import (
    DimensionMismatch,
    ImproperRealization,
    NotOuter,
)
from specfactors.factors import spectrum_residual
from specfactors.statespace import Realization

from conftest import FAST_TOLERANCES, random_outer_model


class TestValidateOuter:

    def test_example(self, w_minus):
        spectral.validate_outer(w_minus)

    def test_constant(self):
        spectral.validate_outer(Realization.constant(2 * np.eye(2)))

    def test_not_square(self):
        w = Realization(a=[[0.5]], b=[[1.0, 0.0]], c=[[1.0]], d=[[1.0, 0.0]])
        with pytest.raises(NotOuter):
            spectral.validate_outer(w)

    def test_unstable_pole(self):
        w = Realization(a=[[1.2]], b=[[1.0]], c=[[-1.0]], d=[[1.0]])
        with pytest.raises(NotOuter, match="A"):
            spectral.validate_outer(w)

    def test_zero_outside_disc(self):
        w = Realization(a=[[0.5]], b=[[1.0]], c=[[-1.0]], d=[[1.0]])
        with pytest.raises(NotOuter, match="zero matrix"):
            spectral.validate_outer(w)

    def test_singular_feedthrough(self):
        w = Realization(a=[[0.5]], b=[[1.0]], c=[[1.0]], d=[[0.0]])
        with pytest.raises(ImproperRealization):
            spectral.validate_outer(w)

    def test_singular_state_matrix(self):
        w = Realization(a=[[0.0]], b=[[1.0]], c=[[-0.5]], d=[[1.0]])
        with pytest.raises(ImproperRealization):
            spectral.validate_outer(w)

    def test_not_minimal(self):
        w = Realization(a=np.diag([0.5, 0.2]), b=[[1.0], [0.0]], c=[[1.0, 1.0]], d=[[1.0]])
        with pytest.raises(NotOuter, match="minimal"):
            spectral.validate_outer(w)


class TestToBiproper:
    improper = Realization(a=[[0.0]], b=[[1.0]], c=[[-0.5]], d=[[1.0]])

    def test_none_is_identity(self, w_minus):
        frame, a = spectral.to_biproper(w_minus, None)
        assert frame is w_minus
        assert a == 0.0

    def test_if_improper_keeps_proper_model(self, w_minus):
        frame, a = spectral.to_biproper(w_minus, spectral.MOEBIUS_IF_IMPROPER)
        assert frame is w_minus
        assert a == 0.0

    def test_if_improper_shifts_improper_model(self):
        frame, a = spectral.to_biproper(self.improper, spectral.MOEBIUS_IF_IMPROPER)
        assert a == spectral.to_biproper(self.improper, "auto")[1]
        spectral.validate_outer(frame)

    def test_explicit(self, w_minus):
        frame, a = spectral.to_biproper(w_minus, 0.25)
        assert a == 0.25
        assert ss.transfer_equal(ss.moebius(frame, -a), w_minus, FAST_TOLERANCES)

    def test_auto_repairs_singular_state_matrix(self):
        frame, a = spectral.to_biproper(self.improper, "auto")
        assert a != 0.0
        spectral.validate_outer(frame)
        assert ss.transfer_equal(ss.moebius(frame, -a), self.improper, FAST_TOLERANCES)

    def test_factors_in_shifted_frame(self):
        frame, a = spectral.to_biproper(self.improper, "auto")
        cp = spectral.conjugate_phase(frame)
        assert cp.t.n_states == 2
        assert spectrum_residual(cp.extremal.w_bar_plus, frame, FAST_TOLERANCES) <= 1e-8
        # the outer factor maps back to the original model
        w_minus = ss.moebius(cp.extremal.w_minus, -a)
        assert ss.transfer_equal(w_minus, self.improper, FAST_TOLERANCES)


class TestExtremalFactors:

    def test_example_steps(self, w_minus, golden):
        extremal = spectral.extremal_factors(w_minus)
        plus, bar = extremal.plus, extremal.bar_plus
        assert_allclose(plus.gamma, np.diag([1 / 4, 1 / 3]), atol=1e-14)
        for key, value in [
            ("x", plus.x), ("u1", plus.u1), ("g1", plus.g1), ("b_plus", plus.b_plus),
            ("d_plus", plus.d_plus), ("y", bar.y), ("h2", bar.h2), ("u2", bar.u2), ("g2", bar.g2),
        ]:
            assert_allclose(value, np.array(golden[key]), rtol=1e-10, atol=1e-12, err_msg=key)
        assert_allclose(extremal.z, 4 / 3 * np.eye(2), rtol=1e-10)

    def test_example_poles_and_zeros(self, w_minus):
        extremal = spectral.extremal_factors(w_minus)
        plus = ss.poles_zeros(extremal.w_plus)
        assert_allclose(plus.poles, [0.5, 0.5], atol=1e-12)
        assert_allclose(plus.zeros, [3.0, 4.0], atol=1e-10)
        bar = ss.poles_zeros(extremal.w_bar_plus)
        assert_allclose(bar.poles, [2.0, 2.0], atol=1e-12)
        assert_allclose(bar.zeros, [3.0, 4.0], atol=1e-10)

    def test_phase_factors_are_all_pass(self, w_minus):
        extremal = spectral.extremal_factors(w_minus)
        assert spectral.is_all_pass(extremal.t1)
        assert spectral.is_all_pass(extremal.t2)

    def test_same_spectrum(self, w_minus):
        extremal = spectral.extremal_factors(w_minus)
        for w in (extremal.w_plus, extremal.w_bar_plus):
            assert spectrum_residual(w, w_minus, FAST_TOLERANCES) <= 1e-10

    def test_w_bar_plus_is_product(self, w_minus):
        extremal = spectral.extremal_factors(w_minus)
        cascade = ss.series(extremal.w_plus, extremal.t2)
        assert ss.transfer_equal(cascade, extremal.w_bar_plus, FAST_TOLERANCES)

    def test_constant_model(self):
        extremal = spectral.extremal_factors(Realization.constant(2 * np.eye(2)))
        assert extremal.w_bar_plus.n_states == 0
        assert_allclose(extremal.w_bar_plus.d, 2 * np.eye(2))


class TestConjugatePhase:

    def test_example_realization(self, example_cp, golden):
        t = example_cp.t
        assert_allclose(t.a, np.array(golden["a_cal"]), atol=1e-12)
        assert_allclose(t.b, np.array(golden["b_cal"]), atol=1e-12)
        assert_allclose(t.c, np.array(golden["c_cal"]), atol=1e-12)
        assert_allclose(t.d, np.array(golden["d_cal"]), atol=1e-12)
        assert_allclose(example_cp.p0_inv, np.array(golden["p0_inv"]), atol=1e-12)
        assert (example_cp.n_gamma, example_cp.n_a) == (2, 2)

    def test_gramian_identities(self, example_cp):
        report = spectral.check_gramian_identities(example_cp)
        assert report.passed
        assert set(report.residuals) == set(spectral.IDENTITY_CHECK_DICT)
        assert max(report.residuals.values()) <= 1e-12

    def test_all_pass(self, example_cp):
        assert spectral.all_pass_residual(example_cp.t) <= 1e-10

    def test_product_of_phases(self, example_cp):
        extremal = example_cp.extremal
        assert ss.transfer_equal(ss.series(extremal.t1, extremal.t2), example_cp.t, FAST_TOLERANCES)

    def test_constant_model(self):
        cp = spectral.conjugate_phase(Realization.constant(2 * np.eye(2)))
        assert cp.t.n_states == 0
        assert_allclose(cp.t.d, np.eye(2))

    @pytest.mark.parametrize("seed", range(12))
    def test_random_outer(self, seed):
        n = 1 + seed % 4
        rng = np.random.default_rng(seed)
        w_minus = random_outer_model(rng, n)
        cp = spectral.conjugate_phase(w_minus, FAST_TOLERANCES)
        assert ss.mcmillan_degree(cp.t) == 2 * n
        assert spectral.check_gramian_identities(cp, FAST_TOLERANCES).passed
        assert spectral.is_all_pass(cp.t, tol=FAST_TOLERANCES)

        extremal = cp.extremal
        assert np.max(np.linalg.eigvalsh(extremal.x)) < 0
        assert np.min(np.linalg.eigvalsh(extremal.y)) > 0
        for w in (extremal.w_plus, extremal.w_bar_plus):
            assert spectrum_residual(w, w_minus, FAST_TOLERANCES) <= 1e-8

        # the zero matrix of W_+ is similar to Gamma^{-T}
        gamma_plus = spectral.zero_matrix(extremal.w_plus)
        x = extremal.x
        expected = np.linalg.solve(x, np.linalg.inv(cp.gamma).T @ x)
        assert_allclose(gamma_plus, expected, rtol=1e-7, atol=1e-9)

        bar = ss.poles_zeros(extremal.w_bar_plus, include_zeros=False)
        assert_allclose(
            np.sort_complex(bar.poles),
            np.sort_complex(1 / np.linalg.eigvals(w_minus.a)),
            rtol=1e-7,
        )


class TestSpectrum:

    def test_value_at_one(self, w_minus, golden):
        assert_allclose(spectral.spectrum_sample(w_minus, 1.0), np.array(golden["spectrum_at_one"]), atol=1e-14)

    def test_off_circle_uses_reciprocal(self, w_minus):
        z = 1.5 + 0.5j
        expected = ss.evaluate(w_minus, z) @ ss.evaluate(w_minus, 1 / z).T
        assert_allclose(spectral.spectrum_sample(w_minus, z), expected)

    def test_density_matches_closed_form(self, w_minus, golden):
        density = spectral.spectral_density(w_minus)
        assert density.n_states == 4
        numerator = golden["phi_22"]["numerator"]
        denominator = golden["phi_22"]["denominator"]
        for z in ss.circle_points(16)[1:]:
            expected = np.polyval(numerator, z) / np.polyval(denominator, z)
            assert_allclose(ss.evaluate(density, z)[1, 1], expected, atol=1e-12)

    def test_density_is_para_hermitian(self, w_minus):
        assert spectral.is_para_hermitian(spectral.spectral_density(w_minus), FAST_TOLERANCES)
        assert not spectral.is_para_hermitian(w_minus, FAST_TOLERANCES)

    def test_factors_share_density(self, w_minus, w_bar_minus):
        points = ss.circle_points(32)
        for z in points:
            assert_allclose(
                spectral.spectrum_sample(w_bar_minus, z),
                spectral.spectrum_sample(w_minus, z),
                atol=1e-12,
            )


class TestAllPass:

    def test_not_all_pass(self, w_minus):
        assert not spectral.is_all_pass(w_minus)
        assert spectral.all_pass_residual(w_minus) > 0.5

    def test_constant_orthogonal(self):
        rotation = np.array([[0.6, -0.8], [0.8, 0.6]])
        assert spectral.all_pass_residual(Realization.constant(rotation)) <= 1e-15

    def test_pole_on_circle(self):
        r = Realization(a=[[1.0]], b=[[1.0]], c=[[1.0]], d=[[1.0]])
        assert not spectral.is_all_pass(r)

    def test_not_square(self):
        with pytest.raises(DimensionMismatch):
            spectral.all_pass_residual(Realization.constant(np.ones((1, 2))))
