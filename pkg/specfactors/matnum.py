"""
Dense matrix kernels: Stein solver, symmetric square root, pseudo-inverse,
projectors and invariant-subspace bases.

All rank decisions are relative to the largest singular value of the matrix
being tested; the magnitudes met in practice span several decades, so an
absolute threshold would be wrong at one end or the other.
"""

import itertools
import logging
from typing import NamedTuple

import numpy as np
import pydantic
import scipy.linalg

from specfactors.errors import (
    AmbiguousEigenspace,
    ComplexPairSplit,
    DimensionMismatch,
    NotPositiveDefinite,
    RankDeficientBasis,
    SingularSteinOperator,
)

logger = logging.getLogger(__name__)


class ToleranceConfig(pydantic.BaseModel):
    """
    Numerical tolerances shared by the whole pipeline.
    """
    model_config = pydantic.ConfigDict(frozen=True)

    rank_rel_tol: float = pydantic.Field(default=1e-9, gt=0)
    residual_tol: float = pydantic.Field(default=1e-8, gt=0)
    circle_samples: int = pydantic.Field(default=512, ge=8)


DEFAULT_TOLERANCES = ToleranceConfig()


class EigenBlock(NamedTuple):
    """
    A distinct eigenvalue of a real matrix and its algebraic multiplicity.

    radius is the largest distance from value to a computed eigenvalue of
    the cluster; it is nonzero only for perturbed defective eigenvalues.
    """
    value: complex
    multiplicity: int
    radius: float = 0.0

    @property
    def is_real(self) -> bool:
        return self.value.imag == 0.0


def as_matrix(data, name: str = "matrix") -> np.ndarray:
    """
    Coerce to a 2-D float array and reject NaN/Inf.
    """
    matrix = np.asarray(data, dtype=float)
    if matrix.ndim != 2:
        raise DimensionMismatch(f"{name} must be 2-D, got shape {matrix.shape}")
    if not np.all(np.isfinite(matrix)):
        raise ValueError(f"{name} has non-finite entries")
    return matrix


def _require_square(matrix: np.ndarray, name: str) -> int:
    if matrix.shape[0] != matrix.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got shape {matrix.shape}")
    return matrix.shape[0]


def _norm2(matrix: np.ndarray) -> float:
    if matrix.size == 0:
        return 0.0
    return float(np.linalg.norm(matrix, 2))


def symmetrize(matrix: np.ndarray) -> np.ndarray:
    return (matrix + matrix.T) / 2


def is_symmetric(matrix: np.ndarray, tol: ToleranceConfig = DEFAULT_TOLERANCES) -> bool:
    if matrix.shape[0] != matrix.shape[1]:
        return False
    return _norm2(matrix - matrix.T) <= tol.residual_tol * max(1.0, _norm2(matrix))


def numerical_rank(matrix: np.ndarray, rel_tol: float) -> int:
    """
    Rank with singular values cut at rel_tol times the largest one.
    """
    if matrix.size == 0:
        return 0
    singular_values = np.linalg.svd(matrix, compute_uv=False)
    if singular_values[0] == 0.0:
        return 0
    return int(np.sum(singular_values > rel_tol * singular_values[0]))


def normalize_column_signs(basis: np.ndarray) -> np.ndarray:
    """
    Flip columns so that the largest-magnitude entry of each is positive.
    """
    basis = basis.copy()
    for j in range(basis.shape[1]):
        pivot = np.argmax(np.abs(basis[:, j]))
        if basis[pivot, j] < 0:
            basis[:, j] = -basis[:, j]
    return basis


def orthonormal_basis(
    basis: np.ndarray,
    tol: ToleranceConfig = DEFAULT_TOLERANCES,
) -> np.ndarray:
    """
    Orthonormal basis of the column space of a full column rank matrix.
    """
    basis = as_matrix(basis, "basis")
    n, k = basis.shape
    if k == 0:
        return np.zeros((n, 0))
    if numerical_rank(basis, tol.rank_rel_tol) < k:
        raise RankDeficientBasis(f"basis of {k} columns is rank deficient")
    u, _, _ = np.linalg.svd(basis, full_matrices=False)
    return u[:, :k]


def solve_stein(
    m: np.ndarray,
    q: np.ndarray,
    tol: ToleranceConfig = DEFAULT_TOLERANCES,
) -> np.ndarray:
    """
    Solve the Stein equation M^T X M - X = Q for symmetric X.

    The equation is linearized on stacked columns of X, which is exact and
    cheap at the sizes handled here.
    """
    m = as_matrix(m, "M")
    q = as_matrix(q, "Q")
    n = _require_square(m, "M")
    if q.shape != (n, n):
        raise DimensionMismatch(f"Q must be {n}x{n}, got {q.shape}")
    if not is_symmetric(q, tol):
        raise ValueError("Q must be symmetric")
    if n == 0:
        return np.zeros((0, 0))

    operator = np.kron(m.T, m.T) - np.eye(n * n)
    if numerical_rank(operator, tol.rank_rel_tol) < n * n:
        raise SingularSteinOperator(
            "Stein operator is singular: M has eigenvalues with product 1"
        )
    x = scipy.linalg.solve(operator, q.reshape(-1, order="F"))
    x = symmetrize(x.reshape((n, n), order="F"))

    residual = np.linalg.norm(m.T @ x @ m - x - q)
    if residual > tol.residual_tol * (np.linalg.norm(q) + np.linalg.norm(x)):
        raise SingularSteinOperator(f"Stein solve is ill-conditioned (residual {residual:.3e})")
    return x


def sym_sqrt(s: np.ndarray, tol: ToleranceConfig = DEFAULT_TOLERANCES) -> np.ndarray:
    """
    Principal square root of a symmetric positive definite matrix.
    """
    s = as_matrix(s, "S")
    n = _require_square(s, "S")
    if n == 0:
        return np.zeros((0, 0))
    if not is_symmetric(s, tol):
        raise NotPositiveDefinite("matrix is not symmetric")
    eigenvalues, vectors = np.linalg.eigh(symmetrize(s))
    scale = np.max(np.abs(eigenvalues))
    if scale == 0.0 or eigenvalues[0] <= tol.rank_rel_tol * scale:
        raise NotPositiveDefinite(f"smallest eigenvalue {eigenvalues[0]:.3e} is not positive")
    return symmetrize((vectors * np.sqrt(eigenvalues)) @ vectors.T)


def pseudo_inverse(s: np.ndarray, tol: ToleranceConfig = DEFAULT_TOLERANCES) -> np.ndarray:
    """
    Moore-Penrose pseudo-inverse with relative rank truncation.

    Symmetric input goes through a symmetric eigendecomposition, so the
    result is exactly symmetric.
    """
    s = as_matrix(s, "S")
    if s.size == 0:
        return np.zeros(s.T.shape)
    if not is_symmetric(s, tol):
        return np.linalg.pinv(s, rcond=tol.rank_rel_tol)

    eigenvalues, vectors = np.linalg.eigh(symmetrize(s))
    scale = np.max(np.abs(eigenvalues))
    keep = np.abs(eigenvalues) > tol.rank_rel_tol * scale
    kept = vectors[:, keep]
    return symmetrize((kept / eigenvalues[keep]) @ kept.T)


def orth_projector(v: np.ndarray, tol: ToleranceConfig = DEFAULT_TOLERANCES) -> np.ndarray:
    """
    Orthogonal projector onto im(V).
    """
    q = orthonormal_basis(v, tol)
    return symmetrize(q @ q.T)


def _cluster_tolerance(m: np.ndarray, tol: ToleranceConfig) -> float:
    return tol.rank_rel_tol * max(1.0, _norm2(m))


def _defective_tolerance(m: np.ndarray, tol: ToleranceConfig) -> float:
    # a k-fold Jordan block splits into a ring of radius ~ eps^(1/k)
    return np.sqrt(tol.rank_rel_tol) * max(1.0, _norm2(m))


def _block_tolerance(block: EigenBlock, cluster_tol: float) -> float:
    return 2 * block.radius + cluster_tol


def _merge_clusters(
    values: np.ndarray,
    vectors: np.ndarray,
    clusters: list[list[int]],
    reach: float,
    rel_tol: float,
) -> list[list[int]]:
    """
    Merge clusters closer than reach whose eigenvectors are numerically
    dependent, i.e. the computed eigenvalues came from one defective block.
    """
    merged = True
    while merged:
        merged = False
        for i, j in itertools.combinations(range(len(clusters)), 2):
            gap = min(abs(values[p] - values[q]) for p in clusters[i] for q in clusters[j])
            if gap > reach:
                continue
            union = clusters[i] + clusters[j]
            if numerical_rank(vectors[:, union], np.sqrt(rel_tol)) < len(union):
                clusters[i] = union
                del clusters[j]
                merged = True
                break
    return clusters


def eigen_blocks(m: np.ndarray, tol: ToleranceConfig = DEFAULT_TOLERANCES) -> list[EigenBlock]:
    """
    Distinct eigenvalues of M with multiplicities, sorted by (real, imag).

    Computed eigenvalues within rank_rel_tol of each other are one block.
    Eigenvalues further apart (up to sqrt(rank_rel_tol)) are one block only
    when their eigenvectors are dependent, which is how a defective
    eigenvalue looks after rounding. A complex conjugate pair shows up as
    two adjacent entries.
    """
    m = as_matrix(m, "M")
    _require_square(m, "M")
    if m.shape[0] == 0:
        return []
    cluster_tol = _cluster_tolerance(m, tol)
    values, vectors = scipy.linalg.eig(m)
    vectors = vectors / np.linalg.norm(vectors, axis=0)

    clusters: list[list[int]] = []
    for idx in sorted(range(len(values)), key=lambda k: (values[k].real, values[k].imag)):
        for cluster in clusters:
            if abs(values[idx] - np.mean(values[cluster])) <= cluster_tol:
                cluster.append(idx)
                break
        else:
            clusters.append([idx])
    clusters = _merge_clusters(values, vectors, clusters, _defective_tolerance(m, tol), tol.rank_rel_tol)

    blocks = []
    for cluster in clusters:
        center = complex(np.mean(values[cluster]))
        if abs(center.imag) <= cluster_tol:
            center = complex(center.real, 0.0)
        radius = float(np.max(np.abs(values[cluster] - center)))
        blocks.append(EigenBlock(value=center, multiplicity=len(cluster), radius=radius))
    return sorted(blocks, key=lambda block: (block.value.real, block.value.imag))


def invariant_basis(
    m: np.ndarray,
    selection: list[int],
    tol: ToleranceConfig = DEFAULT_TOLERANCES,
    allow_full_eigenspace: bool = False,
) -> np.ndarray:
    """
    Real basis of the M-invariant subspace spanned by the selected
    eigenvalue blocks (indices into eigen_blocks(M)).

    A repeated eigenvalue is rejected unless allow_full_eigenspace is set,
    in which case its whole generalized eigenspace is taken.
    """
    m = as_matrix(m, "M")
    n = _require_square(m, "M")
    blocks = eigen_blocks(m, tol)
    selected = sorted(set(selection))
    for idx in selected:
        if not 0 <= idx < len(blocks):
            raise IndexError(f"eigenvalue index {idx} out of range (have {len(blocks)})")
    if not selected:
        return np.zeros((n, 0))

    chosen = [blocks[idx] for idx in selected]
    cluster_tol = _cluster_tolerance(m, tol)
    for block in chosen:
        if block.multiplicity > 1 and not allow_full_eigenspace:
            raise AmbiguousEigenspace(
                f"eigenvalue {block.value:.6g} has multiplicity {block.multiplicity}"
            )
        if not block.is_real and not any(
            abs(other.value - block.value.conjugate()) <= _block_tolerance(block, cluster_tol)
            for other in chosen
        ):
            raise ComplexPairSplit(f"eigenvalue {block.value:.6g} selected without its conjugate")

    # each Schur eigenvalue belongs to the nearest block
    def _is_selected(real, imag=0.0):
        value = complex(real, imag)
        nearest = min(range(len(blocks)), key=lambda k: abs(value - blocks[k].value))
        return nearest in selected

    _, schur_vectors, sdim = scipy.linalg.schur(m, output="real", sort=_is_selected)
    expected = sum(block.multiplicity for block in chosen)
    if sdim != expected:
        raise AmbiguousEigenspace(
            f"ordered Schur form isolated {sdim} eigenvalues, expected {expected}"
        )
    return normalize_column_signs(schur_vectors[:, :sdim])


def eigenspace_basis(
    m: np.ndarray,
    eigenvalue: float,
    tol: ToleranceConfig = DEFAULT_TOLERANCES,
) -> np.ndarray:
    """
    Orthonormal basis of ker(M - eigenvalue*I) for a real eigenvalue.
    """
    m = as_matrix(m, "M")
    n = _require_square(m, "M")
    kernel = scipy.linalg.null_space(m - eigenvalue * np.eye(n), rcond=np.sqrt(tol.rank_rel_tol))
    return normalize_column_signs(kernel)


def is_invariant(
    m: np.ndarray,
    v: np.ndarray,
    tol: float | None = None,
    config: ToleranceConfig = DEFAULT_TOLERANCES,
) -> bool:
    """
    Whether im(V) is M-invariant: ||MQ - Q(Q^T M Q)|| <= tol * max(1, ||M||)
    with Q an orthonormal basis of im(V).
    """
    if tol is None:
        tol = config.residual_tol
    m = as_matrix(m, "M")
    q = orthonormal_basis(v, config)
    if q.shape[0] != m.shape[0]:
        raise DimensionMismatch(f"basis has {q.shape[0]} rows, M is {m.shape[0]}x{m.shape[0]}")
    if q.shape[1] == 0:
        return True
    residual = _norm2(m @ q - q @ (q.T @ m @ q))
    return residual <= tol * max(1.0, _norm2(m))
