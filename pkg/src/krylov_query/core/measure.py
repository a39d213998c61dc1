"""Spectral measure of (H, psi0) and its transforms."""
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
from numpy.typing import ArrayLike, NDArray

from ..config import setting
from ..errors import DimensionMismatch, OverflowGuard, PoleProximity, ZeroDenominator
from ..utils.log import get_logger
from .lanczos import KrylovDecomposition
from .linalg import (
    OperatorLike,
    StateLike,
    as_operator,
    as_state,
    check_dims,
    eig_hermitian_dense,
    eig_tridiagonal,
)

logger = get_logger(__name__)

Scalar = Union[float, complex]


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Probability measure with finitely many atoms.

    Attributes:
        atoms: Strictly ascending support points
        weights: Nonnegative weights summing to one
    """

    atoms: NDArray[np.float64]
    weights: NDArray[np.float64]

    def __post_init__(self):
        atoms = np.asarray(self.atoms, dtype=np.float64).reshape(-1)
        weights = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        if atoms.size == 0 or atoms.size != weights.size:
            raise DimensionMismatch(
                f"measure needs matching nonempty atoms/weights, got {atoms.size}/{weights.size}"
            )
        if np.any(np.diff(atoms) <= 0.0):
            raise ValueError("atoms must be strictly ascending")
        if np.any(weights < 0.0) or abs(weights.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be nonnegative and sum to 1")
        atoms.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", weights)

    @property
    def support_size(self) -> int:
        return self.atoms.size

    @property
    def spectral_radius(self) -> float:
        """max|atom|, or 1.0 when every atom is zero."""
        radius = float(np.abs(self.atoms).max())
        return radius if radius > 0.0 else 1.0

    def integrate(self, values: ArrayLike) -> Scalar:
        """Sum of w_i * values_i."""
        return np.dot(self.weights, np.asarray(values))


@dataclass(frozen=True)
class MeasureDistance:
    """Discrepancy between two discrete measures."""

    max_atom_shift: float
    total_variation: float


def _merged(atoms: NDArray, weights: NDArray, merge_tol: float) -> DiscreteMeasure:
    """Merge atoms closer than merge_tol (weights summed) and renormalize."""
    order = np.argsort(atoms, kind="stable")
    atoms = atoms[order]
    weights = weights[order]

    merged_atoms: list[float] = []
    merged_weights: list[float] = []
    start = 0
    for i in range(1, atoms.size + 1):
        if i < atoms.size and atoms[i] - atoms[i - 1] <= merge_tol:
            continue
        cluster_w = weights[start:i]
        total = float(cluster_w.sum())
        if total > 0.0:
            center = float(np.dot(cluster_w, atoms[start:i]) / total)
        else:
            center = float(atoms[start:i].mean())
        merged_atoms.append(center)
        merged_weights.append(total)
        start = i

    if len(merged_atoms) < atoms.size:
        logger.debug("merged %d atoms into %d", atoms.size, len(merged_atoms))
    w = np.array(merged_weights)
    return DiscreteMeasure(np.array(merged_atoms), w / w.sum())


def measure_from_decomposition(
    K: KrylovDecomposition, merge_rtol: Optional[float] = None
) -> DiscreteMeasure:
    """Gauss measure of the Jacobi matrix: atoms are its eigenvalues,
    weights the squared first components of its unit eigenvectors.

    Raises:
        ConvergenceFailure: Propagated from the tridiagonal eigensolver
    """
    eigenvalues, first = eig_tridiagonal(K.jacobi)
    radius = float(np.abs(eigenvalues).max()) or 1.0
    merge_tol = setting("measure.atom_merge_rtol", merge_rtol) * radius
    return _merged(eigenvalues, first**2, merge_tol)


def measure_from_dense(
    H: OperatorLike, psi0: StateLike, merge_rtol: Optional[float] = None
) -> DiscreteMeasure:
    """Spectral measure from a dense eigendecomposition (oracle path).

    Eigenvalues within the merge tolerance are grouped and eigenvalues with
    (numerically) zero overlap are dropped.
    """
    H = as_operator(H)
    psi = as_state(psi0)
    check_dims(H, psi)
    eigenvalues, eigenvectors = eig_hermitian_dense(H)
    weights = np.abs(eigenvectors.conj().T @ psi.amplitudes) ** 2
    merge_tol = setting("measure.atom_merge_rtol", merge_rtol) * H.scale
    merged = _merged(eigenvalues, weights, merge_tol)
    keep = merged.weights > 1e-14
    w = merged.weights[keep]
    return DiscreteMeasure(merged.atoms[keep], w / w.sum())


def moment(mu: DiscreteMeasure, k: int) -> float:
    """k-th moment M_k = sum_i w_i * lambda_i**k."""
    if k < 0:
        raise ValueError("moment order must be nonnegative")
    return float(np.dot(mu.weights, mu.atoms**k))


def survival_amplitude(mu: DiscreteMeasure, t: Union[float, ArrayLike]):
    """Fourier transform of the measure, S(t) = sum_i w_i exp(-i lambda_i t).

    Accepts a scalar time or an array of times.
    """
    t_arr = np.asarray(t, dtype=np.float64)
    phases = np.exp(-1j * np.multiply.outer(t_arr, mu.atoms))
    values = phases @ mu.weights
    return complex(values) if t_arr.ndim == 0 else values


def survival_series(mu: DiscreteMeasure, t: float, order: int) -> complex:
    """Moment expansion of S(t) truncated after the (-it)^order term."""
    total = 0j
    for k in range(order + 1):
        total += (-1j * t) ** k * moment(mu, k) / math.factorial(k)
    return total


def moment_from_survival(mu: DiscreteMeasure, k: int, step: Optional[float] = None) -> float:
    """Recover M_k from central finite differences of S at t = 0.

    Uses S^(k)(0) = (-i)^k M_k for S(t) = sum_i w_i exp(-i lambda_i t).
    """
    h = setting("measure.finite_difference_step", step)
    offsets = np.array([(k / 2.0 - j) * h for j in range(k + 1)])
    coeffs = np.array([(-1) ** j * math.comb(k, j) for j in range(k + 1)], dtype=np.float64)
    derivative = np.dot(coeffs, survival_amplitude(mu, offsets)) / h**k
    return float((derivative / (-1j) ** k).real)


def partition_function(
    mu: DiscreteMeasure, beta: float, max_exponent: Optional[float] = None
) -> float:
    """Laplace transform Z(beta) = sum_i w_i exp(-beta lambda_i).

    Raises:
        OverflowGuard: If |beta| * max|lambda| exceeds measure.overflow_exponent
    """
    limit = setting("measure.overflow_exponent", max_exponent)
    exponent = abs(beta) * float(np.abs(mu.atoms).max())
    if exponent > limit:
        raise OverflowGuard(f"|beta| * max|lambda| = {exponent:.3e} exceeds {limit}")
    return float(np.dot(mu.weights, np.exp(-beta * mu.atoms)))


def greens_function_sum(
    mu: DiscreteMeasure, z: complex, pole_rtol: Optional[float] = None
) -> complex:
    """Stieltjes transform G(z) = sum_i w_i / (z - lambda_i).

    Raises:
        PoleProximity: If z lies within pole_rtol * spectral radius of an atom
    """
    distances = np.abs(z - mu.atoms)
    nearest = int(np.argmin(distances))
    pole_tol = setting("measure.pole_rtol", pole_rtol) * mu.spectral_radius
    if distances[nearest] < pole_tol:
        raise PoleProximity(nearest, float(distances[nearest]))
    return complex(np.sum(mu.weights / (z - mu.atoms)))


def greens_function_cfrac(
    a: ArrayLike,
    b: ArrayLike,
    z: complex,
    depth: Optional[int] = None,
    min_denominator: Optional[float] = None,
) -> complex:
    """Continued-fraction form of G(z) from the Lanczos coefficients.

    G(z) = 1 / (z - a_0 - b_1^2 / (z - a_1 - b_2^2 / (...))), evaluated bottom-up.

    Args:
        a: Diagonal coefficients a_0..a_{m-1}
        b: Off-diagonal coefficients b_1..b_{m-1}
        z: Evaluation point off the spectrum
        depth: Number of levels (default m)

    Raises:
        ZeroDenominator: If a partial denominator falls below cfrac_min_denominator
    """
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    depth = a.size if depth is None else depth
    if not 1 <= depth <= a.size:
        raise ValueError(f"depth must be in [1, {a.size}], got {depth}")
    if b.size < depth - 1:
        raise DimensionMismatch(f"need {depth - 1} off-diagonal coefficients, got {b.size}")
    floor = setting("measure.cfrac_min_denominator", min_denominator)

    tail = z - a[depth - 1]
    for n in range(depth - 2, -1, -1):
        if abs(tail) < floor:
            raise ZeroDenominator(f"continued fraction denominator vanished at level {n + 1}")
        tail = z - a[n] - b[n] ** 2 / tail
    if abs(tail) < floor:
        raise ZeroDenominator("continued fraction denominator vanished at level 0")
    return complex(1.0 / tail)


def mixture(
    measures: Sequence[DiscreteMeasure],
    mix_weights: Optional[ArrayLike] = None,
    merge_rtol: Optional[float] = None,
) -> DiscreteMeasure:
    """Convex combination of measures (uniform by default), atoms merged."""
    if not measures:
        raise ValueError("mixture needs at least one measure")
    if mix_weights is None:
        p = np.full(len(measures), 1.0 / len(measures))
    else:
        p = np.asarray(mix_weights, dtype=np.float64)
        if p.size != len(measures) or np.any(p < 0.0) or p.sum() <= 0.0:
            raise ValueError("mixture weights must be nonnegative, one per measure")
        p = p / p.sum()
    atoms = np.concatenate([mu.atoms for mu in measures])
    weights = np.concatenate([pj * mu.weights for pj, mu in zip(p, measures)])
    radius = float(np.abs(atoms).max()) or 1.0
    return _merged(atoms, weights, setting("measure.atom_merge_rtol", merge_rtol) * radius)


def measure_distance(
    mu: DiscreteMeasure, nu: DiscreteMeasure, match_tol: Optional[float] = None
) -> MeasureDistance:
    """Hausdorff distance between supports and total variation of the weights.

    Atoms of the two measures closer than ``match_tol`` (default: merge tolerance)
    count as the same point for the total variation.
    """
    gaps = np.abs(np.subtract.outer(mu.atoms, nu.atoms))
    shift = float(max(gaps.min(axis=1).max(), gaps.min(axis=0).max()))

    radius = max(mu.spectral_radius, nu.spectral_radius)
    tol = match_tol if match_tol is not None else setting("measure.atom_merge_rtol") * radius
    points = np.concatenate([mu.atoms, nu.atoms])
    signed = np.concatenate([mu.weights, -nu.weights])
    order = np.argsort(points, kind="stable")
    points, signed = points[order], signed[order]

    variation = 0.0
    start = 0
    for i in range(1, points.size + 1):
        if i < points.size and points[i] - points[i - 1] <= tol:
            continue
        variation += abs(float(signed[start:i].sum()))
        start = i
    return MeasureDistance(max_atom_shift=shift, total_variation=0.5 * variation)
