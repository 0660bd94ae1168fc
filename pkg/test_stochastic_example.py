"""
The worked stochastic example: W_- = (I/2, I, diag(1/4, 1/6), I), checked
against the stored golden values.
"""

import numpy as np
import pytest
from numpy.testing import assert_allclose

import specfactors.divisors as divisors
import specfactors.factors as factors
import specfactors.io_utils as io_utils
import specfactors.spectral as spectral
import specfactors.statespace as ss
from specfactors.divisors import SubspacePart, SubspaceSpec

GOLDEN_ATOL = 1e-10


@pytest.fixture(scope="module")
def model_w_minus():
    return io_utils.load_example_model("w_minus").to_realization()


@pytest.fixture(scope="module")
def model_w_bar_minus():
    return io_utils.load_example_model("w_bar_minus").to_realization()


@pytest.fixture(scope="module")
def cp(model_w_minus):
    return spectral.conjugate_phase(model_w_minus)


def test_conjugate_phase_realization(cp, golden):
    for key, value in zip(("a_cal", "b_cal", "c_cal", "d_cal"), cp.t.matrices()):
        assert_allclose(value, np.array(golden[key]), atol=GOLDEN_ATOL, err_msg=key)


def test_conjugate_phase_fractions(cp):
    assert_allclose(cp.t.b[:, 0], [-15 / 14, 0, -3 / 7, 0], atol=GOLDEN_ATOL)
    assert_allclose(cp.t.b[:, 1], [0, -16 / 15, 0, -3 / 10], atol=GOLDEN_ATOL)


def test_gramian_inverse_blocks(cp):
    p0_inv = cp.p0_inv
    assert_allclose(p0_inv[:2, 2:], -np.eye(2), atol=GOLDEN_ATOL)
    assert_allclose(p0_inv[2:, :2], -np.eye(2), atol=GOLDEN_ATOL)
    assert_allclose(p0_inv[2:, 2:], 4 / 3 * np.eye(2), atol=GOLDEN_ATOL)
    # negative definite, as the Stein equation for X requires
    assert_allclose(p0_inv[:2, :2], np.diag([-1 / 15, -1 / 32]), atol=GOLDEN_ATOL)
    report = spectral.check_gramian_identities(cp)
    assert report.residuals["stein_p0_inv"] <= 1e-12


def test_flipped_sign_breaks_identity(cp):
    flipped = cp.p0_inv.copy()
    flipped[:2, :2] *= -1
    a_cal, c_cal = cp.t.a, cp.t.c
    residual = a_cal.T @ flipped @ a_cal - flipped - c_cal.T @ c_cal
    assert np.max(np.abs(residual)) > 0.1


def test_class_two_divisor(cp, golden):
    pi = np.array(golden["projector_class_two"])
    div = divisors.divisor_from_projector(cp, pi)
    assert_allclose(div.p, np.array(golden["p_class_two"]), atol=GOLDEN_ATOL)
    for key, value in zip("ABCD", div.t_ell.matrices()):
        assert_allclose(value, np.array(golden["divisor_class_two"][key]), atol=GOLDEN_ATOL, err_msg=key)


@pytest.mark.parametrize("theta", [0.0, np.pi / 6, np.pi / 4, np.pi / 2])
def test_theta_family(cp, model_w_minus, theta):
    c, s = np.cos(theta), np.sin(theta)
    spec = SubspaceSpec(a=SubspacePart(basis=[[c], [s]]))
    div = divisors.divisor_from_projector(cp, divisors.projector_from_spec(cp, spec))
    expected = np.array([[1 + c * c, c * s], [c * s, 1 + s * s]])
    assert_allclose(div.d_p, expected, atol=GOLDEN_ATOL)

    w, report = factors.minimal_factor(model_w_minus, divisors.certify_divisor(cp, div))
    assert w.n_states == 2
    assert report.spectrum_residual <= 1e-8


def test_printed_w_bar_minus(model_w_minus, model_w_bar_minus):
    report = factors.verify_factor(model_w_bar_minus, model_w_minus)
    assert report.passed
    assert report.degree == 2
    assert report.spectrum_residual <= 1e-8

    t_minus, certified = factors.extract_left_divisor(model_w_minus, model_w_bar_minus)
    assert spectral.is_all_pass(t_minus)
    assert certified.divisor_degree == 2
    assert certified.divisor_degree + certified.complement_degree == 4


def test_spectrum(model_w_minus, golden):
    assert_allclose(
        spectral.spectrum_sample(model_w_minus, 1.0), np.array(golden["spectrum_at_one"]), atol=1e-12
    )
    points = ss.circle_points(16)
    numerator = golden["phi_22"]["numerator"]
    denominator = golden["phi_22"]["denominator"]
    for z in points:
        expected = np.polyval(numerator, z) / np.polyval(denominator, z)
        assert abs(spectral.spectrum_sample(model_w_minus, z)[1, 1] - expected) <= 1e-10


def test_phi_11_recomputed(model_w_minus):
    for z in ss.circle_points(16):
        expected = (0.5 * z ** 2 - 17 / 8 * z + 0.5) / (z ** 2 - 2.5 * z + 1)
        assert abs(spectral.spectrum_sample(model_w_minus, z)[0, 0] - expected) <= 1e-10


def test_enumerated_classes(cp):
    enumeration = divisors.enumerate_divisors(cp)
    classes = {div.class_label for div in enumeration.divisors}
    assert classes == {(0, 0), (0, 2), (1, 0), (1, 2), (2, 0), (2, 2)}
    assert enumeration.continua[0].dimension == 2
