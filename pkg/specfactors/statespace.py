"""
Rational matrices carried as state-space realizations G(z) = C(zI - A)^{-1}B + D.
"""

import logging

import numpy as np
import pydantic
import scipy.linalg

from specfactors.errors import (
    DimensionMismatch,
    EvaluationAtPole,
    NoParameterFound,
    ParameterHitsSpectrum,
    SingularFeedthrough,
    SingularStateMatrix,
)
from specfactors.matnum import DEFAULT_TOLERANCES, ToleranceConfig

logger = logging.getLogger(__name__)

# second radius of the evaluation sample set, off the unit circle
OFF_CIRCLE_RADIUS = 1.37

MOEBIUS_GRID = [sign * k / 10 for k in range(1, 10) for sign in (1, -1)]


def _as_real_array(value, name: str) -> np.ndarray:
    array = np.array(value, dtype=float)
    if array.ndim == 1 and array.size == 0:
        array = array.reshape(0, 0)
    if array.ndim != 2:
        raise ValueError(f"{name} must be a 2-D array, got shape {array.shape}")
    if not np.all(np.isfinite(array)):
        raise ValueError(f"{name} has non-finite entries")
    return array


class Realization(pydantic.BaseModel):
    """
    State-space quadruple (A, B, C, D). n = 0 is a constant matrix D.
    """
    model_config = pydantic.ConfigDict(arbitrary_types_allowed=True, frozen=True)

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray

    @pydantic.model_validator(mode="before")
    @classmethod
    def _coerce_matrices(cls, data: dict) -> dict:
        if not isinstance(data, dict):
            return data
        matrices = {key: _as_real_array(data[key], key.upper()) for key in ("a", "b", "c", "d")}
        n_out, n_in = matrices["d"].shape
        # empty state blocks carry no shape information of their own
        if matrices["a"].size == 0:
            matrices["a"] = np.zeros((0, 0))
            matrices["b"] = np.zeros((0, n_in))
            matrices["c"] = np.zeros((n_out, 0))
        for matrix in matrices.values():
            matrix.flags.writeable = False
        return matrices

    @pydantic.model_validator(mode="after")
    def _check_dimensions(self) -> "Realization":
        n = self.a.shape[0]
        if self.a.shape != (n, n):
            raise DimensionMismatch(f"A must be square, got {self.a.shape}")
        if self.b.shape[0] != n or self.c.shape[1] != n:
            raise DimensionMismatch(
                f"B {self.b.shape} and C {self.c.shape} do not match A {self.a.shape}"
            )
        if self.d.shape != (self.c.shape[0], self.b.shape[1]):
            raise DimensionMismatch(
                f"D must be {self.c.shape[0]}x{self.b.shape[1]}, got {self.d.shape}"
            )
        return self

    @classmethod
    def constant(cls, d) -> "Realization":
        return cls(a=[], b=[], c=[], d=d)

    @classmethod
    def identity(cls, size: int) -> "Realization":
        return cls.constant(np.eye(size))

    @property
    def n_states(self) -> int:
        return self.a.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.d.shape[1]

    @property
    def n_outputs(self) -> int:
        return self.d.shape[0]

    def matrices(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        return self.a, self.b, self.c, self.d


class PoleZeroReport(pydantic.BaseModel):
    """
    Poles and zeros of the minimal realization of a transfer matrix.
    Repeated values carry multiplicity.
    """
    model_config = pydantic.ConfigDict(arbitrary_types_allowed=True, frozen=True)

    poles: np.ndarray
    zeros: np.ndarray | None = None
    degree: int

    def to_dict(self) -> dict:
        def _pairs(values):
            if values is None:
                return None
            return [[float(v.real), float(v.imag)] for v in values]
        return {"degree": self.degree, "poles": _pairs(self.poles), "zeros": _pairs(self.zeros)}


def _norm2(matrix: np.ndarray) -> float:
    if matrix.size == 0:
        return 0.0
    return float(np.linalg.norm(matrix, 2))


def _check_pole_distance(
    r: Realization,
    points: np.ndarray,
    tol: ToleranceConfig,
) -> None:
    if r.n_states == 0:
        return
    eigenvalues = scipy.linalg.eigvals(r.a)
    distance = np.min(np.abs(points[:, None] - eigenvalues[None, :]), axis=1)
    limit = tol.rank_rel_tol * (1 + np.abs(points)) * max(1.0, _norm2(r.a))
    if np.any(distance <= limit):
        bad = points[np.argmax(distance <= limit)]
        raise EvaluationAtPole(f"z = {bad:.6g} is a pole of the realization")


def evaluate(r: Realization, z: complex, tol: ToleranceConfig = DEFAULT_TOLERANCES) -> np.ndarray:
    """
    C(zI - A)^{-1}B + D at a single point.
    """
    return evaluate_many(r, np.array([z], dtype=complex), tol)[0]


def evaluate_many(
    r: Realization,
    points: np.ndarray,
    tol: ToleranceConfig = DEFAULT_TOLERANCES,
) -> np.ndarray:
    """
    Evaluate at a batch of points; returns an array of shape (N, p, m).
    """
    points = np.asarray(points, dtype=complex).reshape(-1)
    values = np.broadcast_to(r.d.astype(complex), (points.size,) + r.d.shape).copy()
    if r.n_states == 0 or points.size == 0:
        return values
    _check_pole_distance(r, points, tol)
    n = r.n_states
    resolvent = points[:, None, None] * np.eye(n) - r.a
    rhs = np.broadcast_to(r.b.astype(complex), (points.size, n, r.n_inputs))
    return values + r.c @ np.linalg.solve(resolvent, rhs)


def circle_points(count: int) -> np.ndarray:
    return np.exp(2j * np.pi * np.arange(count) / count)


def sample_points(tol: ToleranceConfig = DEFAULT_TOLERANCES) -> np.ndarray:
    """
    Deterministic sample set for transfer-function comparisons: roots of
    unity on the unit circle and on a circle of radius OFF_CIRCLE_RADIUS.
    """
    roots = circle_points(tol.circle_samples)
    return np.concatenate([roots, OFF_CIRCLE_RADIUS * roots])


def off_pole_points(realizations: list[Realization], points: np.ndarray) -> np.ndarray:
    keep = np.ones(points.size, dtype=bool)
    for r in realizations:
        if r.n_states == 0:
            continue
        eigenvalues = scipy.linalg.eigvals(r.a)
        distance = np.min(np.abs(points[:, None] - eigenvalues[None, :]), axis=1)
        keep &= distance > 1e-6 * (1 + np.abs(points))
    return points[keep]


def transfer_equal(
    r1: Realization,
    r2: Realization,
    tol: ToleranceConfig = DEFAULT_TOLERANCES,
    points: np.ndarray | None = None,
) -> bool:
    """
    Whether two realizations have the same transfer matrix, decided on the
    sample set (points close to a pole of either are skipped).
    """
    if r1.d.shape != r2.d.shape:
        return False
    if points is None:
        points = sample_points(tol)
    points = off_pole_points([r1, r2], np.asarray(points, dtype=complex))
    g1 = evaluate_many(r1, points, tol)
    g2 = evaluate_many(r2, points, tol)
    scale = max(1.0, float(np.max(np.abs(g1), initial=0.0)))
    return float(np.max(np.abs(g1 - g2), initial=0.0)) <= tol.residual_tol * scale


def series(r1: Realization, r2: Realization) -> Realization:
    """
    Cascade with transfer matrix R1(z) R2(z); state ordered [x1, x2] so the
    state matrix is block upper triangular.
    """
    if r1.n_inputs != r2.n_outputs:
        raise DimensionMismatch(
            f"cannot cascade: R1 takes {r1.n_inputs} inputs, R2 gives {r2.n_outputs} outputs"
        )
    n1, n2 = r1.n_states, r2.n_states
    a = np.zeros((n1 + n2, n1 + n2))
    a[:n1, :n1] = r1.a
    a[:n1, n1:] = r1.b @ r2.c
    a[n1:, n1:] = r2.a
    b = np.vstack([r1.b @ r2.d, r2.b])
    c = np.hstack([r1.c, r1.d @ r2.c])
    return Realization(a=a, b=b, c=c, d=r1.d @ r2.d)


def _checked_inverse(matrix: np.ndarray, tol: ToleranceConfig, error: type, name: str) -> np.ndarray:
    if matrix.shape[0] != matrix.shape[1]:
        raise error(f"{name} must be square, got {matrix.shape}")
    if matrix.size == 0:
        return np.zeros((0, 0))
    if np.linalg.cond(matrix) >= 1 / tol.rank_rel_tol:
        raise error(f"{name} is singular")
    return np.linalg.inv(matrix)


def inverse(r: Realization, tol: ToleranceConfig = DEFAULT_TOLERANCES) -> Realization:
    """
    Realization of G(z)^{-1}; its state matrix is the zero matrix A - B D^{-1} C.
    """
    d_inv = _checked_inverse(r.d, tol, SingularFeedthrough, "feedthrough D")
    return Realization(
        a=r.a - r.b @ d_inv @ r.c,
        b=r.b @ d_inv,
        c=-d_inv @ r.c,
        d=d_inv,
    )


def adjoint(r: Realization, tol: ToleranceConfig = DEFAULT_TOLERANCES) -> Realization:
    """
    Para-conjugate G*(z) = G(1/z)^T, realized with state matrix A^{-T}.
    """
    f = _checked_inverse(r.a, tol, SingularStateMatrix, "state matrix A").T
    return Realization(
        a=f,
        b=f @ r.c.T,
        c=-r.b.T @ f,
        d=r.d.T - r.b.T @ f @ r.c.T,
    )


def moebius(r: Realization, a: float, tol: ToleranceConfig = DEFAULT_TOLERANCES) -> Realization:
    """
    Realization of lambda -> G(z(lambda)) with z(lambda) = (lambda + a)/(1 + a*lambda).

    Poles move from p to (p - a)/(1 - a*p); the McMillan degree is preserved.
    The inverse change of variable is moebius(., -a).
    """
    if not abs(a) < 1:
        raise ValueError(f"Moebius parameter must satisfy |a| < 1, got {a}")
    n = r.n_states
    if n == 0:
        return r
    shift = np.eye(n) - a * r.a
    if np.linalg.cond(shift) >= 1 / tol.rank_rel_tol:
        raise ParameterHitsSpectrum(f"1/a = {1 / a:.6g} is an eigenvalue of A")
    shift_inv = np.linalg.inv(shift)
    gain = np.sqrt(1 - a * a)
    return Realization(
        a=(r.a - a * np.eye(n)) @ shift_inv,
        b=gain * shift_inv @ r.b,
        c=gain * r.c @ shift_inv,
        d=r.d + a * r.c @ shift_inv @ r.b,
    )


def choose_moebius_parameter(
    poles,
    zeros,
    state_eigenvalues=(),
    tol: ToleranceConfig = DEFAULT_TOLERANCES,
    max_draws: int = 1000,
    seed: int = 0,
) -> float:
    """
    Pick a real a, |a| <= 0.9, with 1/a away from every pole/zero (and from
    the supplied state-matrix eigenvalues) and a itself away from every
    pole/zero. Scans a fixed grid first, then random draws.
    """
    points = [complex(p) for p in list(poles) + list(zeros)]
    eigenvalues = [complex(v) for v in state_eigenvalues]

    def _acceptable(a: float) -> bool:
        for p in points:
            margin = 10 * tol.rank_rel_tol * (1 + abs(p))
            if abs(1 / a - p) < margin or abs(a - p) < margin:
                return False
        for v in eigenvalues:
            if abs(1 / a - v) < 10 * tol.rank_rel_tol * (1 + abs(v)):
                return False
        return True

    for a in MOEBIUS_GRID:
        if _acceptable(a):
            return a
    rng = np.random.default_rng(seed)
    for _ in range(max_draws):
        a = float(rng.uniform(-0.9, 0.9))
        if a != 0.0 and _acceptable(a):
            return a
    raise NoParameterFound(f"no Moebius parameter found after {max_draws} draws")


def _staircase(a: np.ndarray, b: np.ndarray, threshold: float) -> tuple[np.ndarray, int]:
    """
    Orthogonal controllability staircase. Returns T and the dimension of the
    controllable subspace, which is spanned by the leading columns of T.
    """
    n = a.shape[0]
    transform = np.eye(n)
    a_work = a.copy()
    block = b.copy()
    offset = 0
    while offset < n and block.size > 0:
        u, singular_values, _ = np.linalg.svd(block)
        rank = int(np.sum(singular_values > threshold))
        if rank == 0:
            break
        step = np.eye(n)
        step[offset:, offset:] = u
        a_work = step.T @ a_work @ step
        transform = transform @ step
        block = a_work[offset + rank:, offset:offset + rank]
        offset += rank
    return transform, offset


def minimal(r: Realization, tol: ToleranceConfig = DEFAULT_TOLERANCES) -> Realization:
    """
    Minimal realization by controllability then observability staircase
    compression. Rank decisions are relative to the largest of ||A||, ||B||,
    ||C||. An already minimal realization is returned unchanged.
    """
    if r.n_states == 0:
        return r
    scale = max(_norm2(r.a), _norm2(r.b), _norm2(r.c))
    if scale == 0.0:
        return Realization.constant(r.d)
    threshold = tol.rank_rel_tol * scale
    a, b, c = r.a, r.b, r.c

    transform, reachable = _staircase(a, b, threshold)
    if reachable < a.shape[0]:
        kept = transform[:, :reachable]
        a, b, c = kept.T @ a @ kept, kept.T @ b, c @ kept

    transform, observable = _staircase(a.T, c.T, threshold)
    if observable < a.shape[0]:
        kept = transform[:, :observable]
        a, b, c = kept.T @ a @ kept, kept.T @ b, c @ kept

    if a.shape[0] < r.n_states:
        logger.debug("minimal: removed %d of %d states", r.n_states - a.shape[0], r.n_states)
    return Realization(a=a, b=b, c=c, d=r.d)


def mcmillan_degree(r: Realization, tol: ToleranceConfig = DEFAULT_TOLERANCES) -> int:
    return minimal(r, tol).n_states


def poles_zeros(
    r: Realization,
    tol: ToleranceConfig = DEFAULT_TOLERANCES,
    include_zeros: bool = True,
) -> PoleZeroReport:
    """
    Poles (eigenvalues of the minimal A) and, for square invertible D,
    zeros (eigenvalues of the minimal zero matrix).
    """
    reduced = minimal(r, tol)
    poles = np.sort_complex(scipy.linalg.eigvals(reduced.a)) if reduced.n_states else np.zeros(0, complex)
    zeros = None
    if include_zeros:
        gamma = inverse(reduced, tol).a
        zeros = np.sort_complex(scipy.linalg.eigvals(gamma)) if gamma.size else np.zeros(0, complex)
    return PoleZeroReport(poles=poles, zeros=zeros, degree=reduced.n_states)
