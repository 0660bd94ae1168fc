"""
Minimal spectral factors W = W_- T_ell, their verification, and the
converse: recovering the left divisor T_- = W_-^{-1} W_0 of a given factor.
"""

import logging
from enum import Enum

import numpy as np
import pydantic
from tqdm.auto import tqdm

import specfactors.divisors as divisors
import specfactors.spectral as spectral
import specfactors.statespace as ss
from specfactors.divisors import AllPassDivisor, SubspaceSpec
from specfactors.errors import (
    DegreeViolation,
    DimensionMismatch,
    EvaluationAtPole,
    NotAFactor,
    NotMinimalFactor,
    SingularFeedthrough,
    SpectrumMismatch,
)
from specfactors.matnum import DEFAULT_TOLERANCES, ToleranceConfig
from specfactors.statespace import PoleZeroReport, Realization

logger = logging.getLogger(__name__)

# constancy and orthogonality threshold for essential equality
ESSENTIAL_EQUALITY_THRESHOLD = 1e-7


class Verdict(Enum):
    """
    Outcome of a factor or identity check.
    """
    PASS = "pass"
    FAIL = "fail"

    @classmethod
    def of(cls, passed: bool) -> "Verdict":
        return cls.PASS if passed else cls.FAIL


class FactorReport(pydantic.BaseModel):
    model_config = pydantic.ConfigDict(frozen=True)

    degree: int
    expected_degree: int
    spectrum_residual: float
    allpass_residual: float | None = None
    poles_zeros: PoleZeroReport | None = None
    divisor_degree: int | None = None
    complement_degree: int | None = None
    label: str | None = None
    passed: bool
    reasons: list[str] = []

    @property
    def verdict(self) -> Verdict:
        return Verdict.of(self.passed)

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "verdict": self.verdict.value,
            "degree": self.degree,
            "expected_degree": self.expected_degree,
            "spectrum_residual": self.spectrum_residual,
            "allpass_residual": self.allpass_residual,
            "divisor_degree": self.divisor_degree,
            "complement_degree": self.complement_degree,
            "reasons": list(self.reasons),
            "poles_zeros": self.poles_zeros.to_dict() if self.poles_zeros else None,
        }


def spectrum_residual(
    w: Realization,
    w_reference: Realization,
    tol: ToleranceConfig = DEFAULT_TOLERANCES,
) -> float:
    """
    max_k ||Phi_w(z_k) - Phi_ref(z_k)||_2 / max(1, max_k ||Phi_ref(z_k)||_2)
    over the unit-circle samples; inf if w has a pole on the circle.
    """
    if w.d.shape != w_reference.d.shape:
        return float("inf")
    points = ss.circle_points(tol.circle_samples)
    try:
        values = ss.evaluate_many(w, points, tol)
    except EvaluationAtPole:
        return float("inf")
    reference = ss.evaluate_many(w_reference, points, tol)
    phi = values @ values.conj().transpose(0, 2, 1)
    phi_reference = reference @ reference.conj().transpose(0, 2, 1)
    if phi.size == 0:
        return 0.0
    scale = max(1.0, float(np.max(np.linalg.norm(phi_reference, ord=2, axis=(1, 2)))))
    return float(np.max(np.linalg.norm(phi - phi_reference, ord=2, axis=(1, 2)))) / scale


def constant_right_factor(
    w1: Realization,
    w2: Realization,
    tol: ToleranceConfig = DEFAULT_TOLERANCES,
    threshold: float = ESSENTIAL_EQUALITY_THRESHOLD,
) -> np.ndarray | None:
    """
    The constant orthogonal O with W2(z) = W1(z) O, or None if W1^{-1} W2
    is not constant and orthogonal on the sample set.
    """
    if w1.d.shape != w2.d.shape or w1.n_inputs != w1.n_outputs:
        return None
    points = ss.off_pole_points([w1, w2], ss.sample_points(tol))
    g1 = ss.evaluate_many(w1, points, tol)
    g2 = ss.evaluate_many(w2, points, tol)
    invertible = np.linalg.cond(g1) < 1 / np.sqrt(tol.rank_rel_tol)
    if not np.any(invertible):
        return None
    ratios = np.linalg.solve(g1[invertible], g2[invertible])
    reference = ratios[0]
    scale = max(1.0, float(np.linalg.norm(reference, 2)))
    if float(np.max(np.abs(ratios - reference))) > threshold * scale:
        return None
    if float(np.max(np.abs(reference.imag))) > threshold:
        return None
    factor = reference.real
    if np.linalg.norm(factor.T @ factor - np.eye(factor.shape[0]), 2) > threshold:
        return None
    return factor


def essentially_equal(
    w1: Realization,
    w2: Realization,
    tol: ToleranceConfig = DEFAULT_TOLERANCES,
    threshold: float = ESSENTIAL_EQUALITY_THRESHOLD,
) -> bool:
    """
    Equality up to a constant orthogonal right factor.
    """
    return constant_right_factor(w1, w2, tol, threshold) is not None


def _poles_zeros(w: Realization, tol: ToleranceConfig) -> PoleZeroReport:
    try:
        return ss.poles_zeros(w, tol)
    except SingularFeedthrough:
        return ss.poles_zeros(w, tol, include_zeros=False)


def verify_factor(
    w: Realization,
    w_minus: Realization,
    tol: ToleranceConfig = DEFAULT_TOLERANCES,
    label: str | None = None,
) -> FactorReport:
    """
    Check w against the spectrum and degree of w_minus. A failing
    candidate gives a failing report, not an exception.
    """
    expected = ss.mcmillan_degree(w_minus, tol)
    if w.d.shape != w_minus.d.shape:
        return FactorReport(
            degree=ss.mcmillan_degree(w, tol),
            expected_degree=expected,
            spectrum_residual=float("inf"),
            label=label,
            passed=False,
            reasons=[f"shape {w.d.shape} differs from {w_minus.d.shape}"],
        )

    pole_zero = _poles_zeros(w, tol)
    residual = spectrum_residual(w, w_minus, tol)
    reasons = []
    if pole_zero.degree != expected:
        reasons.append(f"degree {pole_zero.degree} != {expected}")
    if not residual <= tol.residual_tol:
        reasons.append(f"spectrum residual {residual:.3e} exceeds {tol.residual_tol:.1e}")
    return FactorReport(
        degree=pole_zero.degree,
        expected_degree=expected,
        spectrum_residual=residual,
        poles_zeros=pole_zero,
        label=label,
        passed=not reasons,
        reasons=reasons,
    )


def minimal_factor(
    w_minus: Realization,
    div: AllPassDivisor,
    tol: ToleranceConfig = DEFAULT_TOLERANCES,
) -> tuple[Realization, FactorReport]:
    w = ss.minimal(ss.series(w_minus, div.t_ell), tol)
    report = verify_factor(w, w_minus, tol, label=div.label)
    if report.degree != report.expected_degree:
        raise DegreeViolation(f"factor has degree {report.degree}, expected {report.expected_degree}")
    if not report.passed:
        raise SpectrumMismatch("; ".join(report.reasons))
    return w, report.model_copy(update={"divisor_degree": div.degree})


def extract_left_divisor(
    w_minus: Realization,
    w0: Realization,
    tol: ToleranceConfig = DEFAULT_TOLERANCES,
) -> tuple[Realization, FactorReport]:
    """
    T_- = W_-^{-1} W_0. W_0 is a minimal factor iff T_- is all-pass and
    deg T_- + deg(W_0^{-1} Wbar_+) = 2n.
    """
    if w0.d.shape != w_minus.d.shape:
        raise DimensionMismatch(f"candidate shape {w0.d.shape} differs from {w_minus.d.shape}")
    t_minus = ss.minimal(ss.series(ss.inverse(w_minus, tol), w0), tol)
    try:
        residual = spectral.all_pass_residual(t_minus, tol)
    except EvaluationAtPole:
        residual = float("inf")
    if not residual <= spectral.ALL_PASS_THRESHOLD:
        raise NotAFactor(f"W_-^(-1) W_0 is not all-pass (residual {residual:.3e})")

    extremal = spectral.extremal_factors(w_minus, tol)
    t_plus = ss.minimal(ss.series(ss.inverse(w0, tol), extremal.w_bar_plus), tol)
    total = 2 * w_minus.n_states
    if t_minus.n_states + t_plus.n_states != total:
        raise NotMinimalFactor(
            f"degrees {t_minus.n_states} + {t_plus.n_states} do not add up to {total}"
        )
    report = verify_factor(w0, w_minus, tol)
    return t_minus, report.model_copy(update={
        "allpass_residual": residual,
        "divisor_degree": t_minus.n_states,
        "complement_degree": t_plus.n_states,
    })


def factor_family(
    w_minus: Realization,
    specs: list[SubspaceSpec],
    tol: ToleranceConfig = DEFAULT_TOLERANCES,
    moebius_parameter: float | str | None = spectral.MOEBIUS_IF_IMPROPER,
    show_progress: bool = False,
) -> list[tuple[Realization, FactorReport]]:
    """
    One minimal factor per subspace spec (theta grids expanded).

    When a Moebius parameter is in use (given, "auto", or picked because
    w_minus is improper) the pipeline runs on moebius(w_minus, a) and the
    factors are mapped back with moebius(., -a). None never transforms.
    """
    frame, a = spectral.to_biproper(w_minus, moebius_parameter, tol)
    cp = spectral.conjugate_phase(frame, tol)
    expanded = [item for spec in specs for item in divisors.expand_theta_grid(cp, spec, tol)]

    family = []
    for spec in tqdm(expanded, desc="factors", disable=not show_progress):
        pi = divisors.projector_from_spec(cp, spec, tol)
        div = divisors.divisor_from_projector(cp, pi, tol, label=spec.label)
        div = divisors.certify_divisor(cp, div, tol)
        w, report = minimal_factor(frame, div, tol)
        label = spec.label or f"class {div.class_label}"
        if a != 0.0:
            w = ss.moebius(w, -a, tol)
            report = verify_factor(w, w_minus, tol)
            if not report.passed:
                raise SpectrumMismatch("; ".join(report.reasons))
        family.append((w, report.model_copy(update={
            "label": label,
            "divisor_degree": div.degree,
            "complement_degree": div.right_complement.n_states,
        })))
    logger.debug("factor_family: %d factors", len(family))
    return family
