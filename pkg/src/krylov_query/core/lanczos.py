"""Lanczos tridiagonalization with full reorthogonalization."""
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.typing import ArrayLike, NDArray

from ..config import setting
from ..errors import DimensionMismatch
from ..utils.log import get_logger
from .linalg import (
    HermitianOperator,
    OperatorLike,
    StateLike,
    TridiagonalReal,
    as_operator,
    as_state,
    check_dims,
)

logger = get_logger(__name__)


@dataclass(frozen=True, eq=False)
class KrylovDecomposition:
    """Krylov basis, Lanczos coefficients and Jacobi matrix of (H, psi0).

    Basis vectors are indexed from 0: ``basis[:, 0]`` is the normalized
    initial state (the e_1 of the compressed picture).

    Attributes:
        basis: dim x m matrix whose columns are the Krylov vectors |K_n>
        a: m diagonal Lanczos coefficients
        b: m-1 off-diagonal Lanczos coefficients, all > 0
        jacobi: Tridiagonal matrix built from (a, b)
        source_dim: Ambient dimension
    """

    basis: NDArray[np.complex128]
    a: NDArray[np.float64]
    b: NDArray[np.float64]
    jacobi: TridiagonalReal
    source_dim: int

    @property
    def m(self) -> int:
        """Krylov dimension."""
        return self.a.size


def lanczos_decompose(
    H: OperatorLike, psi0: StateLike, breakdown_tol: Optional[float] = None
) -> KrylovDecomposition:
    """Run Lanczos from psi0 until the Krylov space closes.

    Every new vector is reorthogonalized twice against all previous ones.

    Args:
        H: Hermitian operator
        psi0: Initial state (normalized on ingest)
        breakdown_tol: Absolute threshold on b_n; default
            lanczos.breakdown_rtol * ||H||

    Returns:
        KrylovDecomposition with m equal to the Krylov dimension

    Raises:
        DimensionMismatch: If H and psi0 dims differ
    """
    H = as_operator(H)
    psi = as_state(psi0)
    check_dims(H, psi)

    if breakdown_tol is None:
        breakdown_tol = setting("lanczos.breakdown_rtol") * H.scale

    dim = H.dim
    Q = np.zeros((dim, dim), dtype=np.complex128)
    Q[:, 0] = psi.amplitudes
    a: list[float] = []
    b: list[float] = []

    for n in range(dim):
        w = H.matvec(Q[:, n])
        alpha = float(np.vdot(Q[:, n], w).real)
        a.append(alpha)
        w = w - alpha * Q[:, n]
        if n > 0:
            w = w - b[n - 1] * Q[:, n - 1]
        basis = Q[:, : n + 1]
        for _ in range(2):
            w = w - basis @ (basis.conj().T @ w)

        if n + 1 == dim:
            break
        beta = float(np.linalg.norm(w))
        if beta < breakdown_tol:
            logger.debug("Lanczos terminated at m=%d (b=%.3e < %.3e)", n + 1, beta, breakdown_tol)
            break
        b.append(beta)
        Q[:, n + 1] = w / beta

    m = len(a)
    a_arr = np.array(a)
    b_arr = np.array(b)
    basis = Q[:, :m].copy()
    basis.setflags(write=False)
    return KrylovDecomposition(
        basis=basis,
        a=a_arr,
        b=b_arr,
        jacobi=TridiagonalReal(a_arr, b_arr),
        source_dim=dim,
    )


def krylov_dimension(H: OperatorLike, psi0: StateLike) -> int:
    """Number of Lanczos steps before natural termination."""
    return lanczos_decompose(H, psi0).m


def apply_isometry(K: KrylovDecomposition, v: ArrayLike) -> NDArray[np.complex128]:
    """Map a vector of the compressed space back into the ambient space (V v)."""
    v = np.asarray(v, dtype=np.complex128).reshape(-1)
    if v.size != K.m:
        raise DimensionMismatch(f"expected {K.m} Krylov amplitudes, got {v.size}")
    return K.basis @ v


def compress_observable(K: KrylovDecomposition, A: OperatorLike) -> NDArray[np.complex128]:
    """Krylov compression V^H A V of an ambient observable."""
    A = as_operator(A)
    if A.dim != K.source_dim:
        raise DimensionMismatch(f"observable has dim {A.dim}, Krylov space lives in {K.source_dim}")
    compressed = K.basis.conj().T @ A.matrix @ K.basis
    return 0.5 * (compressed + compressed.conj().T)


def recurrence_residual(H: HermitianOperator, K: KrylovDecomposition) -> float:
    """Largest residual of H|K_n> = b_{n+1}|K_{n+1}> + a_n|K_n> + b_n|K_{n-1}>.

    The last column is checked without the b_{m} term, which vanishes when the
    Krylov space closes.
    """
    V = K.basis
    HV = H.matrix @ V
    rhs = V * K.a
    if K.m > 1:
        rhs[:, :-1] += V[:, 1:] * K.b
        rhs[:, 1:] += V[:, :-1] * K.b
    return float(np.linalg.norm(HV - rhs, axis=0).max())


def qubit_counts(K: KrylovDecomposition) -> tuple[int, int]:
    """Register sizes needed for the ambient space and for the Krylov space."""

    def qubits(n: int) -> int:
        return max(1, math.ceil(math.log2(n))) if n > 1 else 0

    return qubits(K.source_dim), qubits(K.m)
