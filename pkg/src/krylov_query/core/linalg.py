"""Dense complex linear algebra kernels shared by every other module."""
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
from numpy.typing import ArrayLike, NDArray

from ..config import setting
from ..errors import ConvergenceFailure, DimensionMismatch, EmptySpan, NotHermitian
from ..utils.log import get_logger

logger = get_logger(__name__)

_MACHEP = np.finfo(np.float64).eps


def operator_scale(matrix: NDArray) -> float:
    """Max absolute row sum of a matrix, or 1.0 for the zero matrix."""
    if matrix.size == 0:
        return 1.0
    scale = float(np.abs(matrix).sum(axis=1).max())
    return scale if scale > 0.0 else 1.0


@dataclass(frozen=True, eq=False)
class HermitianOperator:
    """Validated dense Hermitian matrix (the H of the toolkit)."""

    matrix: NDArray[np.complex128]

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def scale(self) -> float:
        """Operator norm proxy used by every relative tolerance."""
        return operator_scale(self.matrix)

    def matvec(self, vector: NDArray) -> NDArray[np.complex128]:
        return self.matrix @ vector


@dataclass(frozen=True, eq=False)
class StateVector:
    """Unit-norm complex state; normalization happens on ingest."""

    amplitudes: NDArray[np.complex128]

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]


@dataclass(frozen=True, eq=False)
class TridiagonalReal:
    """Real symmetric tridiagonal (Jacobi) matrix with a strictly positive off-diagonal.

    Attributes:
        diag: The m diagonal entries a_n
        offdiag: The m-1 off-diagonal entries b_n
    """

    diag: NDArray[np.float64]
    offdiag: NDArray[np.float64]

    def __post_init__(self):
        diag = np.asarray(self.diag, dtype=np.float64).reshape(-1)
        offdiag = np.asarray(self.offdiag, dtype=np.float64).reshape(-1)
        if diag.size < 1:
            raise DimensionMismatch("tridiagonal matrix needs at least one diagonal entry")
        if offdiag.size != diag.size - 1:
            raise DimensionMismatch(
                f"expected {diag.size - 1} off-diagonal entries, got {offdiag.size}"
            )
        if np.any(offdiag <= 0.0):
            raise ValueError("off-diagonal entries of a Jacobi matrix must be strictly positive")
        object.__setattr__(self, "diag", diag)
        object.__setattr__(self, "offdiag", offdiag)

    @property
    def size(self) -> int:
        return self.diag.size

    def to_dense(self) -> NDArray[np.float64]:
        return np.diag(self.diag) + np.diag(self.offdiag, 1) + np.diag(self.offdiag, -1)


OperatorLike = Union[HermitianOperator, ArrayLike]
StateLike = Union[StateVector, ArrayLike]


def assert_hermitian(matrix: ArrayLike, rtol: Optional[float] = None) -> HermitianOperator:
    """Validate a square complex matrix as Hermitian.

    Args:
        matrix: Square matrix
        rtol: Tolerance relative to max|entry| (default linalg.hermitian_rtol)

    Returns:
        HermitianOperator holding the exactly symmetrized matrix

    Raises:
        DimensionMismatch: If the matrix is not square
        NotHermitian: If max|M - M^H| exceeds rtol * max|entry|
    """
    M = np.array(matrix, dtype=np.complex128)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] < 1:
        raise DimensionMismatch(f"expected a nonempty square matrix, got shape {M.shape}")

    tol = setting("linalg.hermitian_rtol", rtol) * float(np.abs(M).max())
    deviation = float(np.abs(M - M.conj().T).max())
    if deviation > tol:
        raise NotHermitian(deviation, tol)

    M = 0.5 * (M + M.conj().T)
    M.setflags(write=False)
    return HermitianOperator(M)


def as_operator(H: OperatorLike) -> HermitianOperator:
    """Accept an already validated operator or validate a raw matrix."""
    if isinstance(H, HermitianOperator):
        return H
    return assert_hermitian(H)


def as_state(psi: StateLike) -> StateVector:
    """Normalize amplitudes into a StateVector.

    Raises:
        EmptySpan: If the vector is numerically zero
    """
    if isinstance(psi, StateVector):
        return psi
    v = np.array(psi, dtype=np.complex128).reshape(-1)
    norm = float(np.linalg.norm(v))
    if v.size == 0 or norm == 0.0 or not math.isfinite(norm):
        raise EmptySpan("state vector has zero (or non-finite) norm")
    v = v / norm
    v.setflags(write=False)
    return StateVector(v)


def check_dims(H: HermitianOperator, psi: StateVector) -> None:
    if H.dim != psi.dim:
        raise DimensionMismatch(f"operator has dim {H.dim} but state has dim {psi.dim}")


def _implicit_ql(
    d: NDArray[np.float64], e: NDArray[np.float64], z: NDArray[np.float64], max_iterations: int
) -> None:
    """Implicit-shift QL iteration on a symmetric tridiagonal matrix, in place.

    On exit ``d`` holds the (unsorted) eigenvalues and the columns of ``z`` have
    been rotated by the accumulated Givens rotations: with ``z`` the identity the
    columns are eigenvectors, with ``z`` the first unit row they are the first
    eigenvector components.
    """
    n = d.size
    iterations = 0
    for lo in range(n):
        while True:
            m = lo
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(e[m]) <= _MACHEP * dd:
                    break
                m += 1
            if m == lo:
                break
            iterations += 1
            if iterations > max_iterations:
                raise ConvergenceFailure(
                    max_iterations, f"implicit QL did not converge in {max_iterations} sweeps"
                )

            g = (d[lo + 1] - d[lo]) / (2.0 * e[lo])
            r = math.hypot(g, 1.0)
            g = d[m] - d[lo] + e[lo] / (g + math.copysign(r, g))
            s = c = 1.0
            p = 0.0
            underflow = False
            for i in range(m - 1, lo - 1, -1):
                f = s * e[i]
                b = c * e[i]
                r = math.hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    underflow = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b

                col = z[:, i + 1].copy()
                z[:, i + 1] = s * z[:, i] + c * col
                z[:, i] = c * z[:, i] - s * col
            if underflow:
                continue
            d[lo] -= p
            e[lo] = g
            e[m] = 0.0


def _tridiagonal_eigensystem(J: TridiagonalReal, z: NDArray[np.float64]):
    n = J.size
    d = J.diag.copy()
    e = np.zeros(n)
    e[: n - 1] = J.offdiag
    if n > 1:
        sweeps = int(setting("linalg.ql_sweeps_per_dim")) * n
        _implicit_ql(d, e, z, sweeps)

    order = np.argsort(d, kind="stable")
    d = d[order]
    z = z[:, order]
    # Sign convention: first components >= 0.
    signs = np.where(z[0] < 0.0, -1.0, 1.0)
    return d, z * signs


def eig_tridiagonal(J: TridiagonalReal) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Eigenvalues and first eigenvector components of a Jacobi matrix.

    This is the Golub-Welsch extraction of the atoms and weights of a discrete measure.

    Args:
        J: Jacobi matrix

    Returns:
        Tuple of (eigenvalues ascending, first components >= 0)

    Raises:
        ConvergenceFailure: If QL needs more than ql_sweeps_per_dim * m sweeps
    """
    z = np.zeros((1, J.size))
    z[0, 0] = 1.0
    eigenvalues, first = _tridiagonal_eigensystem(J, z)
    return eigenvalues, first[0]


def eigh_tridiagonal_vectors(J: TridiagonalReal) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Full eigendecomposition of a Jacobi matrix with the same QL kernel.

    Returns:
        Tuple of (eigenvalues ascending, eigenvectors as columns, first row >= 0)
    """
    return _tridiagonal_eigensystem(J, np.eye(J.size))


def eig_hermitian_dense(H: OperatorLike) -> tuple[NDArray[np.float64], NDArray[np.complex128]]:
    """Full Hermitian eigendecomposition (oracle path for tests and comparisons).

    Raises:
        ConvergenceFailure: If LAPACK fails to converge
    """
    H = as_operator(H)
    try:
        eigenvalues, eigenvectors = np.linalg.eigh(H.matrix)
    except np.linalg.LinAlgError as e:
        raise ConvergenceFailure(0, f"dense Hermitian eigensolver failed: {e}") from e
    return eigenvalues, eigenvectors


def orthonormalize(
    vectors: Sequence[ArrayLike], rank_tol: Optional[float] = None
) -> tuple[NDArray[np.complex128], int]:
    """Two-pass Gram-Schmidt with rank detection.

    Args:
        vectors: Nonempty list of equal-length vectors
        rank_tol: Vectors whose residual norm after projection falls below
            rank_tol * (largest input norm) are dropped (default linalg.rank_tol)

    Returns:
        Tuple of (basis as columns of a dim x rank matrix, rank)

    Raises:
        EmptySpan: If no vector survives
    """
    if len(vectors) == 0:
        raise EmptySpan("orthonormalize needs at least one vector")
    stacked = np.array([np.asarray(v, dtype=np.complex128).reshape(-1) for v in vectors])
    scale = float(np.linalg.norm(stacked, axis=1).max())
    threshold = setting("linalg.rank_tol", rank_tol) * scale

    basis: list[NDArray[np.complex128]] = []
    for v in stacked:
        w = v.copy()
        if basis:
            Q = np.column_stack(basis)
            for _ in range(2):
                w -= Q @ (Q.conj().T @ w)
        norm = float(np.linalg.norm(w))
        if norm <= threshold or norm == 0.0:
            continue
        basis.append(w / norm)

    if not basis:
        raise EmptySpan("all input vectors are numerically zero")
    logger.debug("orthonormalize kept %d of %d vectors", len(basis), len(stacked))
    return np.column_stack(basis), len(basis)
