"""
Left all-pass divisors of the conjugate phase function T, parametrized by
the A-invariant subspaces of T's state matrix diag(Gamma, A^{-T}).

An invariant subspace has the form im[V_g 0; 0 V_a]. With Pi its
orthogonal projector,

    P   = [Pi P0^{-1} Pi]^+
    D_P = (I + C P C^T)^{1/2}
    B_P = A P C^T D_P^{-1}

and the divisor is (A, B_P, C, D_P) reduced to a minimal realization.
"""

import itertools
import logging
from typing import Literal

import numpy as np
import pydantic
import scipy.linalg
from tqdm.auto import tqdm

import specfactors.spectral as spectral
import specfactors.statespace as ss
from specfactors.errors import (
    AmbiguousEigenspace,
    CompressionNotPD,
    DegreeAdditivityViolation,
    DivisorNotAllPass,
    InvalidSubspace,
    NotInvariant,
    NotPositiveDefinite,
    RankDeficientBasis,
)
from specfactors.matnum import (
    DEFAULT_TOLERANCES,
    ToleranceConfig,
    eigen_blocks,
    eigenspace_basis,
    invariant_basis,
    is_invariant,
    normalize_column_signs,
    orth_projector,
    pseudo_inverse,
    sym_sqrt,
)
from specfactors.spectral import ConjugatePhase
from specfactors.statespace import Realization

logger = logging.getLogger(__name__)


class SubspacePart(pydantic.BaseModel):
    """
    One block of a subspace description: either eigenvalue indices into
    eigen_blocks of the block matrix ("all" for the whole block) or an
    explicit basis. Neither means the zero subspace.
    """
    model_config = pydantic.ConfigDict(arbitrary_types_allowed=True, frozen=True)

    select: list[int] | Literal["all"] | None = None
    basis: np.ndarray | None = None

    @pydantic.field_validator("basis", mode="before")
    @classmethod
    def _coerce_basis(cls, value):
        if value is None:
            return None
        basis = np.array(value, dtype=float)
        if basis.ndim == 1:
            basis = basis.reshape(-1, 1)
        if basis.ndim != 2 or not np.all(np.isfinite(basis)):
            raise ValueError("basis must be a finite 2-D array")
        return basis

    @pydantic.model_validator(mode="after")
    def _one_of(self) -> "SubspacePart":
        if self.select is not None and self.basis is not None:
            raise ValueError("give either select or basis, not both")
        return self


class SubspaceSpec(pydantic.BaseModel):
    """
    A-invariant subspace im[V_g 0; 0 V_a] of the conjugate phase state space.
    """
    model_config = pydantic.ConfigDict(frozen=True)

    gamma: SubspacePart = SubspacePart()
    a: SubspacePart = SubspacePart()
    theta_grid: int | None = pydantic.Field(default=None, ge=1)
    label: str | None = None


class AllPassDivisor(pydantic.BaseModel):
    model_config = pydantic.ConfigDict(arbitrary_types_allowed=True, frozen=True)

    t_ell: Realization
    projector: np.ndarray
    p: np.ndarray
    b_p: np.ndarray
    d_p: np.ndarray
    basis: np.ndarray
    degree: int
    class_label: tuple[int, int]
    label: str | None = None
    right_complement: Realization | None = None
    allpass_residual: float | None = None


class ContinuumFamily(pydantic.BaseModel):
    """
    A repeated eigenvalue whose eigenspace holds infinitely many invariant
    subspaces; sample it with sample_continuum or an explicit basis.
    """
    block: Literal["gamma", "a"]
    block_index: int
    eigenvalue: float
    dimension: int


class DivisorEnumeration(pydantic.BaseModel):
    divisors: list[AllPassDivisor]
    continua: list[ContinuumFamily]


def _block_matrix(cp: ConjugatePhase, block: str) -> np.ndarray:
    return cp.gamma if block == "gamma" else cp.a_inv_t


def _part_basis(
    matrix: np.ndarray,
    part: SubspacePart,
    block: str,
    tol: ToleranceConfig,
    allow_full_eigenspace: bool,
) -> np.ndarray:
    size = matrix.shape[0]
    if part.basis is not None:
        basis = part.basis
        if basis.shape[0] != size:
            raise InvalidSubspace(f"{block} basis has {basis.shape[0]} rows, block has size {size}")
        if basis.shape[1] == 0:
            return np.zeros((size, 0))
        try:
            invariant = is_invariant(matrix, basis, config=tol)
        except RankDeficientBasis as e:
            raise InvalidSubspace(f"{block} basis: {e}")
        if not invariant:
            raise NotInvariant(f"{block} basis does not span an invariant subspace")
        return basis
    if part.select is None:
        return np.zeros((size, 0))
    if part.select == "all":
        return np.eye(size)
    try:
        return invariant_basis(matrix, part.select, tol, allow_full_eigenspace=allow_full_eigenspace)
    except IndexError as e:
        raise InvalidSubspace(f"{block} selection: {e}")


def stacked_basis(
    cp: ConjugatePhase,
    spec: SubspaceSpec,
    tol: ToleranceConfig = DEFAULT_TOLERANCES,
    allow_full_eigenspace: bool = False,
) -> np.ndarray:
    """
    V = diag(V_g, V_a) for the subspace described by spec.
    """
    v_gamma = _part_basis(cp.gamma, spec.gamma, "gamma", tol, allow_full_eigenspace)
    v_a = _part_basis(cp.a_inv_t, spec.a, "a", tol, allow_full_eigenspace)
    n_g, k_g = v_gamma.shape
    n_a, k_a = v_a.shape
    basis = np.zeros((n_g + n_a, k_g + k_a))
    basis[:n_g, :k_g] = v_gamma
    basis[n_g:, k_g:] = v_a
    return basis


def projector_from_spec(
    cp: ConjugatePhase,
    spec: SubspaceSpec,
    tol: ToleranceConfig = DEFAULT_TOLERANCES,
    allow_full_eigenspace: bool = False,
) -> np.ndarray:
    basis = stacked_basis(cp, spec, tol, allow_full_eigenspace)
    if basis.shape[1] == 0:
        return np.zeros((cp.n_states, cp.n_states))
    try:
        return orth_projector(basis, tol)
    except RankDeficientBasis as e:
        raise InvalidSubspace(str(e))


def _projector_range(pi: np.ndarray) -> np.ndarray:
    rank = int(round(np.trace(pi)))
    if rank == 0:
        return np.zeros((pi.shape[0], 0))
    q, _, _ = scipy.linalg.qr(pi, pivoting=True)
    return normalize_column_signs(q[:, :rank])


def class_label(pi: np.ndarray, n_gamma: int) -> tuple[int, int]:
    """
    (dim V_g, dim V_a) of the subspace im(Pi).
    """
    rank_gamma = int(round(np.trace(pi[:n_gamma, :n_gamma])))
    rank_a = int(round(np.trace(pi[n_gamma:, n_gamma:])))
    return rank_gamma, rank_a


def divisor_from_projector(
    cp: ConjugatePhase,
    pi: np.ndarray,
    tol: ToleranceConfig = DEFAULT_TOLERANCES,
    label: str | None = None,
) -> AllPassDivisor:
    """
    Build the left all-pass divisor for the orthogonal projector pi.

    The realization is restricted to an orthonormal basis of im(pi) before
    the minimal reduction; this is exact because im(pi) is invariant and
    contains the range of P.
    """
    size = cp.n_states
    pi = np.asarray(pi, dtype=float)
    if pi.shape != (size, size):
        raise InvalidSubspace(f"projector must be {size}x{size}, got {pi.shape}")
    scale = max(1.0, np.linalg.norm(pi, 2)) if size else 1.0
    if size and (
        np.linalg.norm(pi - pi.T, 2) > tol.residual_tol * scale
        or np.linalg.norm(pi @ pi - pi, 2) > tol.residual_tol * scale
    ):
        raise InvalidSubspace("projector is not symmetric idempotent")

    a_cal, _, c_cal, _ = cp.t.matrices()
    basis = _projector_range(pi)
    if not is_invariant(a_cal, basis, config=tol):
        raise NotInvariant("im(Pi) is not invariant under the conjugate phase state matrix")

    p = pseudo_inverse(pi @ cp.p0_inv @ pi, tol)
    try:
        d_p = sym_sqrt(np.eye(cp.t.n_outputs) + c_cal @ p @ c_cal.T, tol)
    except NotPositiveDefinite as e:
        raise CompressionNotPD(f"I + C P C^T is not positive definite: {e}")
    b_p = a_cal @ p @ c_cal.T @ np.linalg.inv(d_p)

    restricted = Realization(
        a=basis.T @ a_cal @ basis,
        b=basis.T @ b_p,
        c=c_cal @ basis,
        d=d_p,
    )
    t_ell = ss.minimal(restricted, tol)
    return AllPassDivisor(
        t_ell=t_ell,
        projector=pi,
        p=p,
        b_p=b_p,
        d_p=d_p,
        basis=basis,
        degree=t_ell.n_states,
        class_label=class_label(pi, cp.n_gamma),
        label=label,
    )


def right_complement(
    cp: ConjugatePhase,
    div: AllPassDivisor,
    tol: ToleranceConfig = DEFAULT_TOLERANCES,
) -> Realization:
    """
    T_r = T_ell^{-1} T, with the degree additivity check deg T_ell + deg T_r = deg T.
    """
    t_r = ss.minimal(ss.series(ss.inverse(div.t_ell, tol), cp.t), tol)
    if div.degree + t_r.n_states != cp.t.n_states:
        raise DegreeAdditivityViolation(
            f"divisor degree {div.degree} + complement degree {t_r.n_states} != {cp.t.n_states}"
        )
    return t_r


def certify_divisor(
    cp: ConjugatePhase,
    div: AllPassDivisor,
    tol: ToleranceConfig = DEFAULT_TOLERANCES,
) -> AllPassDivisor:
    residual = spectral.all_pass_residual(div.t_ell, tol)
    if residual > spectral.ALL_PASS_THRESHOLD:
        raise DivisorNotAllPass(f"divisor all-pass residual {residual:.3e}")
    return div.model_copy(update={
        "right_complement": right_complement(cp, div, tol),
        "allpass_residual": residual,
    })


def _selection_groups(matrix: np.ndarray, tol: ToleranceConfig) -> list[list[int]]:
    """
    Eigenvalue-block indices grouped so that conjugate pairs stay together.
    """
    blocks = eigen_blocks(matrix, tol)
    groups = []
    for idx, block in enumerate(blocks):
        if block.is_real:
            groups.append([idx])
        elif block.value.imag > 0:
            partner = min(
                (j for j, other in enumerate(blocks) if other.value.imag < 0),
                key=lambda j: abs(blocks[j].value - block.value.conjugate()),
            )
            groups.append(sorted([idx, partner]))
    return groups


def _continua(matrix: np.ndarray, block: str, tol: ToleranceConfig) -> list[ContinuumFamily]:
    families = []
    for idx, eigen in enumerate(eigen_blocks(matrix, tol)):
        if eigen.multiplicity < 2 or not eigen.is_real:
            continue
        dimension = eigenspace_basis(matrix, eigen.value.real, tol).shape[1]
        if dimension >= 2:
            families.append(ContinuumFamily(
                block=block, block_index=idx, eigenvalue=eigen.value.real, dimension=dimension,
            ))
    return families


def _subsets(groups: list[list[int]]):
    for size in range(len(groups) + 1):
        for combo in itertools.combinations(groups, size):
            yield [idx for group in combo for idx in group]


def enumerate_divisors(
    cp: ConjugatePhase,
    tol: ToleranceConfig = DEFAULT_TOLERANCES,
    certify: bool = True,
    show_progress: bool = False,
) -> DivisorEnumeration:
    """
    One divisor per subset of distinct eigenvalue blocks of Gamma and of
    A^{-T}. A repeated eigenvalue enters only as its whole eigenspace; its
    proper subspaces are reported as continua.
    """
    gamma_subsets = list(_subsets(_selection_groups(cp.gamma, tol)))
    a_subsets = list(_subsets(_selection_groups(cp.a_inv_t, tol)))
    continua = _continua(cp.gamma, "gamma", tol) + _continua(cp.a_inv_t, "a", tol)

    divisors = []
    pairs = list(itertools.product(gamma_subsets, a_subsets))
    for gamma_select, a_select in tqdm(pairs, desc="divisors", disable=not show_progress):
        spec = SubspaceSpec(
            gamma=SubspacePart(select=gamma_select),
            a=SubspacePart(select=a_select),
        )
        pi = projector_from_spec(cp, spec, tol, allow_full_eigenspace=True)
        div = divisor_from_projector(cp, pi, tol, label=f"gamma={gamma_select} a={a_select}")
        if certify:
            div = certify_divisor(cp, div, tol)
        divisors.append(div)
    logger.debug("enumerate_divisors: %d divisors, %d continua", len(divisors), len(continua))
    return DivisorEnumeration(divisors=divisors, continua=continua)


def sample_continuum(
    cp: ConjugatePhase,
    family: ContinuumFamily,
    count: int,
    tol: ToleranceConfig = DEFAULT_TOLERANCES,
) -> list[np.ndarray]:
    """
    Lines at angles k*pi/count, k = 0..count-1, inside a 2-dimensional eigenspace.
    """
    eigenspace = eigenspace_basis(_block_matrix(cp, family.block), family.eigenvalue, tol)
    if eigenspace.shape[1] != 2:
        raise InvalidSubspace(
            f"angle sampling needs a 2-dimensional eigenspace, got {eigenspace.shape[1]}"
        )
    angles = np.pi * np.arange(count) / count
    return [eigenspace @ np.array([[np.cos(theta)], [np.sin(theta)]]) for theta in angles]


def _expand_part(
    cp: ConjugatePhase,
    part: SubspacePart,
    block: str,
    count: int,
    tol: ToleranceConfig,
) -> list[tuple[SubspacePart, float | None]]:
    if not isinstance(part.select, list):
        return [(part, None)]
    matrix = _block_matrix(cp, block)
    families = {family.block_index: family for family in _continua(matrix, block, tol)}
    sampled = [idx for idx in part.select if idx in families]
    if not sampled:
        return [(part, None)]
    if len(sampled) > 1:
        raise AmbiguousEigenspace(f"{block} selection samples more than one eigenspace")
    rest = [idx for idx in part.select if idx != sampled[0]]
    rest_basis = invariant_basis(matrix, rest, tol)
    lines = sample_continuum(cp, families[sampled[0]], count, tol)
    angles = np.pi * np.arange(count) / count
    return [
        (SubspacePart(basis=np.hstack([rest_basis, line])), float(theta))
        for line, theta in zip(lines, angles)
    ]


def expand_theta_grid(
    cp: ConjugatePhase,
    spec: SubspaceSpec,
    tol: ToleranceConfig = DEFAULT_TOLERANCES,
) -> list[SubspaceSpec]:
    """
    Replace a selected repeated eigenvalue by spec.theta_grid sampled lines
    of its eigenspace. Specs without theta_grid are returned as they are.
    """
    if spec.theta_grid is None:
        return [spec]
    gamma_parts = _expand_part(cp, spec.gamma, "gamma", spec.theta_grid, tol)
    a_parts = _expand_part(cp, spec.a, "a", spec.theta_grid, tol)
    expanded = []
    for (gamma_part, gamma_theta), (a_part, a_theta) in itertools.product(gamma_parts, a_parts):
        suffix = [
            f"{block}_theta={theta:.6g}"
            for block, theta in (("gamma", gamma_theta), ("a", a_theta))
            if theta is not None
        ]
        label = " ".join(filter(None, [spec.label, *suffix])) or None
        expanded.append(SubspaceSpec(gamma=gamma_part, a=a_part, label=label))
    return expanded
