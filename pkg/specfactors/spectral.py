"""
Extremal spectral factors and the conjugate phase function.

Input is a minimal realization of the outer (minimum-phase) factor W_-.
Two all-pass steps flip, in turn, the zeros and the poles of W_- across the
unit circle:

    W_+     = W_- T_1     zeros outside, poles inside
    Wbar_+  = W_+ T_2     zeros and poles outside

and T = T_1 T_2 is the conjugate phase function. Its realization comes with
the structural Gramian P0 and the closed-form inverse [[X, -I], [-I, Z]].
"""

import logging
from typing import Callable

import numpy as np
import pydantic
import scipy.linalg

import specfactors.statespace as ss
from specfactors.errors import (
    DimensionMismatch,
    EvaluationAtPole,
    GramianIdentityViolation,
    ImproperRealization,
    NoParameterFound,
    NotOuter,
    NotPositiveDefiniteY,
    ParameterHitsSpectrum,
    SingularFeedthrough,
)
from specfactors.matnum import DEFAULT_TOLERANCES, ToleranceConfig, solve_stein, sym_sqrt, symmetrize
from specfactors.statespace import Realization

logger = logging.getLogger(__name__)

# spectra of A and of the zero matrix must stay this far inside the unit disc
OUTER_MARGIN = 1e-8

# threshold on max ||G G^H - I|| over the unit circle
ALL_PASS_THRESHOLD = 1e-7

# to_biproper mode: shift only inputs that validate_outer rejects as improper
MOEBIUS_IF_IMPROPER = "if_improper"


class PlusStage(pydantic.BaseModel):
    """
    W_+ = W_- T_1 with T_1 = (Gamma, G1, H1, U1) and W_+ = (A, B_+, C, D_+).
    """
    model_config = pydantic.ConfigDict(arbitrary_types_allowed=True, frozen=True)

    w_minus: Realization
    w_plus: Realization
    t1: Realization
    gamma: np.ndarray
    x: np.ndarray
    h1: np.ndarray
    u1: np.ndarray
    g1: np.ndarray
    b_plus: np.ndarray
    d_plus: np.ndarray


class BarPlusStage(pydantic.BaseModel):
    """
    Wbar_+ = W_+ T_2 with T_2 = (A^{-T}, G2, H2, U2), Wbar_+ in reduced n-state form.
    """
    model_config = pydantic.ConfigDict(arbitrary_types_allowed=True, frozen=True)

    w_plus: Realization
    w_bar_plus: Realization
    t2: Realization
    a_inv_t: np.ndarray
    y: np.ndarray
    h2: np.ndarray
    u2: np.ndarray
    g2: np.ndarray


class ExtremalSet(pydantic.BaseModel):
    model_config = pydantic.ConfigDict(arbitrary_types_allowed=True, frozen=True)

    plus: PlusStage
    bar_plus: BarPlusStage
    z: np.ndarray

    @property
    def w_minus(self) -> Realization:
        return self.plus.w_minus

    @property
    def w_plus(self) -> Realization:
        return self.plus.w_plus

    @property
    def w_bar_plus(self) -> Realization:
        return self.bar_plus.w_bar_plus

    @property
    def t1(self) -> Realization:
        return self.plus.t1

    @property
    def t2(self) -> Realization:
        return self.bar_plus.t2

    @property
    def x(self) -> np.ndarray:
        return self.plus.x

    @property
    def y(self) -> np.ndarray:
        return self.bar_plus.y


class GramianReport(pydantic.BaseModel):
    """
    Relative residuals ||lhs - rhs||_F / max(1, ||lhs||_F, ||rhs||_F) of the
    identities in IDENTITY_CHECK_DICT.
    """
    residuals: dict[str, float]
    passed: bool
    reasons: list[str] = []


class ConjugatePhase(pydantic.BaseModel):
    """
    Minimal realization of T with state matrix diag(Gamma, A^{-T}).
    """
    model_config = pydantic.ConfigDict(arbitrary_types_allowed=True, frozen=True)

    t: Realization
    p0: np.ndarray
    p0_inv: np.ndarray
    n_gamma: int
    n_a: int
    gamma: np.ndarray
    a_inv_t: np.ndarray
    extremal: ExtremalSet

    @property
    def n_states(self) -> int:
        return self.n_gamma + self.n_a


def _inv(matrix: np.ndarray) -> np.ndarray:
    if matrix.size == 0:
        return np.zeros(matrix.shape)
    return np.linalg.inv(matrix)


def _invertible(matrix: np.ndarray, tol: ToleranceConfig) -> bool:
    return matrix.size == 0 or np.linalg.cond(matrix) < 1 / tol.rank_rel_tol


def _spectral_radius(matrix: np.ndarray) -> float:
    if matrix.size == 0:
        return 0.0
    return float(np.max(np.abs(scipy.linalg.eigvals(matrix))))


def _relative_residual(lhs: np.ndarray, rhs: np.ndarray) -> float:
    lhs_norm = np.linalg.norm(lhs)
    rhs_norm = np.linalg.norm(rhs)
    return float(np.linalg.norm(lhs - rhs) / max(1.0, lhs_norm, rhs_norm))


def zero_matrix(r: Realization, tol: ToleranceConfig = DEFAULT_TOLERANCES) -> np.ndarray:
    """
    Gamma = A - B D^{-1} C.
    """
    return ss.inverse(r, tol).a


def validate_outer(w: Realization, tol: ToleranceConfig = DEFAULT_TOLERANCES) -> None:
    """
    Check that w is a minimal realization of an outer factor with A and
    Gamma invertible.
    """
    if w.n_inputs != w.n_outputs:
        raise NotOuter(f"not outer: W must be square, got {w.n_outputs}x{w.n_inputs}")
    try:
        gamma = zero_matrix(w, tol)
    except SingularFeedthrough as e:
        raise ImproperRealization(f"singular feedthrough D, try a Moebius shift: {e}")
    if w.n_states == 0:
        return

    radius = _spectral_radius(w.a)
    if radius >= 1 - OUTER_MARGIN:
        raise NotOuter(f"not outer: spectral radius of A is {radius:.6g}")
    radius = _spectral_radius(gamma)
    if radius >= 1 - OUTER_MARGIN:
        raise NotOuter(f"not outer: spectral radius of the zero matrix is {radius:.6g}")

    for name, matrix in (("A", w.a), ("zero matrix", gamma)):
        if not _invertible(matrix, tol):
            raise ImproperRealization(f"{name} is singular, try a Moebius shift")

    degree = ss.mcmillan_degree(w, tol)
    if degree != w.n_states:
        raise NotOuter(f"not outer: realization is not minimal ({w.n_states} states, degree {degree})")


def to_biproper(
    w: Realization,
    a: float | str | None = "auto",
    tol: ToleranceConfig = DEFAULT_TOLERANCES,
) -> tuple[Realization, float]:
    """
    Moebius-transform w so its state matrix and feedthrough are invertible.

    Returns the transformed realization and the parameter; map results back
    with moebius(., -a). a=None is the identity, a="auto" picks a parameter
    and a="if_improper" picks one only when w fails validate_outer with
    ImproperRealization.
    """
    if a is None:
        return w, 0.0
    if a == MOEBIUS_IF_IMPROPER:
        try:
            validate_outer(w, tol)
            return w, 0.0
        except ImproperRealization:
            a = "auto"
    if a != "auto":
        return ss.moebius(w, float(a), tol), float(a)

    poles = scipy.linalg.eigvals(w.a) if w.n_states else []
    try:
        zeros = list(ss.poles_zeros(w, tol).zeros)
    except SingularFeedthrough:
        zeros = []
    excluded: list[float] = []
    for _ in range(len(ss.MOEBIUS_GRID) + 1):
        candidate = ss.choose_moebius_parameter(poles, zeros + excluded, poles, tol)
        try:
            transformed = ss.moebius(w, candidate, tol)
            gamma = zero_matrix(transformed, tol)
        except (ParameterHitsSpectrum, SingularFeedthrough):
            excluded.append(candidate)
            continue
        if _invertible(transformed.a, tol) and _invertible(gamma, tol):
            logger.info("to_biproper: using Moebius parameter a=%.6g", candidate)
            return transformed, candidate
        excluded.append(candidate)
    raise NoParameterFound("no Moebius parameter makes the realization biproper")


def outer_to_plus(w_minus: Realization, tol: ToleranceConfig = DEFAULT_TOLERANCES) -> PlusStage:
    """
    Flip the zeros of W_- out of the disc: X solves
    Gamma^T X Gamma - X = H1^T H1 with H1 = D^{-1} C and must be negative definite.
    """
    validate_outer(w_minus, tol)
    a, b, c, d = w_minus.matrices()
    n, m = w_minus.n_states, w_minus.n_inputs

    gamma = zero_matrix(w_minus, tol)
    h1 = np.linalg.solve(d, c) if n else np.zeros((m, 0))
    x = solve_stein(gamma, h1.T @ h1, tol)
    if n and np.max(np.linalg.eigvalsh(x)) >= -tol.rank_rel_tol * np.linalg.norm(x, 2):
        raise NotOuter("not outer: Stein solution X is not negative definite")

    x_inv = _inv(x)
    u1 = sym_sqrt(np.eye(m) + h1 @ x_inv @ h1.T, tol)
    g1 = gamma @ x_inv @ h1.T @ np.linalg.inv(u1)
    b_plus = b @ u1 + g1
    d_plus = d @ u1
    return PlusStage(
        w_minus=w_minus,
        w_plus=Realization(a=a, b=b_plus, c=c, d=d_plus),
        t1=Realization(a=gamma, b=g1, c=h1, d=u1),
        gamma=gamma,
        x=x,
        h1=h1,
        u1=u1,
        g1=g1,
        b_plus=b_plus,
        d_plus=d_plus,
    )


def plus_to_bar_plus(w_plus: Realization, tol: ToleranceConfig = DEFAULT_TOLERANCES) -> BarPlusStage:
    """
    Flip the poles of W_+ out of the disc: Y = A Y A^T + B_+ B_+^T, H2 = B_+^T A^{-T}.
    """
    a, b_plus, c, d_plus = w_plus.matrices()
    n, m = w_plus.n_states, w_plus.n_inputs
    if not _invertible(a, tol):
        raise ImproperRealization("state matrix A is singular, try a Moebius shift")

    a_inv_t = _inv(a).T
    h2 = b_plus.T @ a_inv_t
    y = solve_stein(a.T, -b_plus @ b_plus.T, tol)
    if n and np.min(np.linalg.eigvalsh(y)) <= tol.rank_rel_tol * np.linalg.norm(y, 2):
        raise NotPositiveDefiniteY("Stein solution Y is not positive definite")

    y_inv = _inv(y)
    u2 = sym_sqrt(np.eye(m) + h2 @ y_inv @ h2.T, tol)
    g2 = a_inv_t @ y_inv @ h2.T @ np.linalg.inv(u2)
    # W_+ T_2 restricted to its invariant subspace im[Y; I]
    w_bar_plus = Realization(a=a_inv_t, b=g2, c=c @ y + d_plus @ h2, d=d_plus @ u2)
    return BarPlusStage(
        w_plus=w_plus,
        w_bar_plus=w_bar_plus,
        t2=Realization(a=a_inv_t, b=g2, c=h2, d=u2),
        a_inv_t=a_inv_t,
        y=y,
        h2=h2,
        u2=u2,
        g2=g2,
    )


def extremal_factors(w_minus: Realization, tol: ToleranceConfig = DEFAULT_TOLERANCES) -> ExtremalSet:
    plus = outer_to_plus(w_minus, tol)
    bar_plus = plus_to_bar_plus(plus.w_plus, tol)
    z = symmetrize(bar_plus.y + _inv(plus.x))

    a, b = w_minus.a, w_minus.b
    residual = _relative_residual(z, b @ b.T + a @ z @ a.T)
    if residual > tol.residual_tol:
        raise GramianIdentityViolation(f"Z = BB^T + AZA^T fails (residual {residual:.3e})")
    return ExtremalSet(plus=plus, bar_plus=bar_plus, z=z)


def _identity(size: int) -> np.ndarray:
    return np.eye(size)


IDENTITY_CHECK_DICT: dict[str, Callable[[ConjugatePhase], tuple[np.ndarray, np.ndarray]]] = {
    "stein_p0": lambda cp: (
        cp.t.a @ cp.p0 @ cp.t.a.T - cp.p0,
        cp.t.b @ cp.t.b.T,
    ),
    "cross": lambda cp: (
        cp.t.a @ cp.p0 @ cp.t.c.T,
        cp.t.b @ cp.t.d.T,
    ),
    "feedthrough": lambda cp: (
        _identity(cp.t.n_outputs) + cp.t.c @ cp.p0 @ cp.t.c.T,
        cp.t.d @ cp.t.d.T,
    ),
    "stein_p0_inv": lambda cp: (
        cp.t.a.T @ cp.p0_inv @ cp.t.a - cp.p0_inv,
        cp.t.c.T @ cp.t.c,
    ),
    "p0_inverse": lambda cp: (
        cp.p0 @ cp.p0_inv,
        _identity(cp.n_states),
    ),
    "reachability_z": lambda cp: (
        cp.extremal.z,
        cp.extremal.w_minus.b @ cp.extremal.w_minus.b.T
        + cp.extremal.w_minus.a @ cp.extremal.z @ cp.extremal.w_minus.a.T,
    ),
}


def check_gramian_identities(
    cp: ConjugatePhase,
    tol: ToleranceConfig = DEFAULT_TOLERANCES,
) -> GramianReport:
    residuals = {}
    reasons = []
    for name, check in IDENTITY_CHECK_DICT.items():
        lhs, rhs = check(cp)
        residuals[name] = _relative_residual(lhs, rhs)
        if residuals[name] > tol.residual_tol:
            reasons.append(f"{name} residual {residuals[name]:.3e} exceeds {tol.residual_tol:.1e}")
    return GramianReport(residuals=residuals, passed=not reasons, reasons=reasons)


def conjugate_phase(w_minus: Realization, tol: ToleranceConfig = DEFAULT_TOLERANCES) -> ConjugatePhase:
    """
    Assemble T = T_1 T_2 in the basis where its state matrix is
    diag(Gamma, A^{-T}), together with P0 and its closed-form inverse.
    """
    extremal = extremal_factors(w_minus, tol)
    plus, bar = extremal.plus, extremal.bar_plus
    n, m = w_minus.n_states, w_minus.n_inputs

    x_inv = _inv(plus.x)
    y_inv = _inv(bar.y)
    t = Realization(
        a=scipy.linalg.block_diag(plus.gamma, bar.a_inv_t) if n else np.zeros((0, 0)),
        b=np.vstack([plus.g1 @ bar.u2 + x_inv @ bar.g2, bar.g2]),
        c=np.hstack([plus.h1, w_minus.b.T @ bar.a_inv_t]),
        d=plus.u1 @ bar.u2,
    )
    p0 = symmetrize(np.block([
        [x_inv + x_inv @ y_inv @ x_inv, x_inv @ y_inv],
        [y_inv @ x_inv, y_inv],
    ]))
    p0_inv = symmetrize(np.block([
        [plus.x, -np.eye(n)],
        [-np.eye(n), extremal.z],
    ]))
    cp = ConjugatePhase(
        t=t,
        p0=p0,
        p0_inv=p0_inv,
        n_gamma=n,
        n_a=n,
        gamma=plus.gamma,
        a_inv_t=bar.a_inv_t,
        extremal=extremal,
    )

    report = check_gramian_identities(cp, tol)
    if not report.passed:
        raise GramianIdentityViolation("; ".join(report.reasons))
    degree = ss.mcmillan_degree(t, tol)
    if degree != 2 * n:
        raise GramianIdentityViolation(f"conjugate phase has degree {degree}, expected {2 * n}")
    logger.debug("conjugate_phase: n=%d, residuals %s", n, report.residuals)
    return cp


def spectrum_sample(w: Realization, z: complex, tol: ToleranceConfig = DEFAULT_TOLERANCES) -> np.ndarray:
    """
    Phi(z) = W(z) W(1/z)^T; on the unit circle this is W(z) W(z)^H.
    """
    z = complex(z)
    value = ss.evaluate(w, z, tol)
    if abs(abs(z) - 1.0) <= 1e-12:
        return value @ value.conj().T
    return value @ ss.evaluate(w, 1 / z, tol).T


def spectral_density(w: Realization, tol: ToleranceConfig = DEFAULT_TOLERANCES) -> Realization:
    """
    Realization of Phi(z) = W(z) W*(z), with twice the McMillan degree of W.
    """
    return ss.series(w, ss.adjoint(w, tol))


def is_para_hermitian(r: Realization, tol: ToleranceConfig = DEFAULT_TOLERANCES) -> bool:
    if r.n_inputs != r.n_outputs:
        return False
    points = ss.off_pole_points([r], ss.OFF_CIRCLE_RADIUS * ss.circle_points(tol.circle_samples))
    # both z and 1/z must stay off the poles
    points = 1 / ss.off_pole_points([r], 1 / points)
    values = ss.evaluate_many(r, points, tol)
    mirrored = ss.evaluate_many(r, 1 / points, tol).transpose(0, 2, 1)
    scale = max(1.0, float(np.max(np.abs(values), initial=0.0)))
    return float(np.max(np.abs(values - mirrored), initial=0.0)) <= tol.residual_tol * scale


def all_pass_residual(r: Realization, tol: ToleranceConfig = DEFAULT_TOLERANCES) -> float:
    """
    max over the unit-circle samples of ||G G^H - I||_2.
    """
    if r.n_inputs != r.n_outputs:
        raise DimensionMismatch(f"all-pass test needs a square system, got {r.d.shape}")
    values = ss.evaluate_many(r, ss.circle_points(tol.circle_samples), tol)
    gram = values @ values.conj().transpose(0, 2, 1) - np.eye(r.n_outputs)
    if gram.size == 0:
        return 0.0
    return float(np.max(np.linalg.norm(gram, ord=2, axis=(1, 2))))


def is_all_pass(
    r: Realization,
    threshold: float = ALL_PASS_THRESHOLD,
    tol: ToleranceConfig = DEFAULT_TOLERANCES,
) -> bool:
    try:
        return all_pass_residual(r, tol) <= threshold
    except EvaluationAtPole:
        return False
