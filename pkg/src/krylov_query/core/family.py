"""Joint Krylov space of a family of initial states."""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Literal, Optional, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from ..config import setting
from ..errors import DimensionMismatch
from ..utils.log import get_logger
from .duality import degree_functional, solve_duality
from .favard import TargetFunction, evaluate_truncation, expand, recurrence_from_measure
from .lanczos import KrylovDecomposition, lanczos_decompose
from .linalg import (
    HermitianOperator,
    OperatorLike,
    StateVector,
    as_operator,
    as_state,
    check_dims,
    orthonormalize,
)
from .measure import DiscreteMeasure, measure_from_decomposition, mixture

logger = get_logger(__name__)

Criterion = Literal["max_state", "averaged"]
CRITERIA: tuple[str, ...] = ("max_state", "averaged")


@dataclass(frozen=True, eq=False)
class StateFamily:
    """r >= 1 normalized states of one ambient dimension."""

    states: tuple[StateVector, ...]

    def __post_init__(self):
        if not self.states:
            raise ValueError("a state family needs at least one state")
        dims = {s.dim for s in self.states}
        if len(dims) != 1:
            raise DimensionMismatch(f"family states have different dimensions {sorted(dims)}")

    @classmethod
    def from_amplitudes(cls, vectors: Sequence[ArrayLike]) -> "StateFamily":
        return cls(tuple(as_state(v) for v in vectors))

    @property
    def r(self) -> int:
        return len(self.states)

    @property
    def dim(self) -> int:
        return self.states[0].dim


@dataclass(frozen=True, eq=False)
class FamilyDecomposition:
    """Orthonormal basis of the joint Krylov space and the compression of H on it.

    The compressed matrix is banded, not tridiagonal, once r > 1.

    Attributes:
        basis: dim x m_fam orthonormal columns
        compressed: m_fam x m_fam Hermitian matrix V^H H V
        per_state_dims: Krylov dimension m_j of every member
        decompositions: Per-member Lanczos decompositions
    """

    basis: NDArray[np.complex128]
    compressed: NDArray[np.complex128]
    per_state_dims: tuple[int, ...]
    decompositions: tuple[KrylovDecomposition, ...]

    @property
    def m_fam(self) -> int:
        return self.basis.shape[1]

    def member_measures(self) -> list[DiscreteMeasure]:
        return [measure_from_decomposition(K) for K in self.decompositions]


def _decompose_members(H: HermitianOperator, fam: StateFamily) -> list[KrylovDecomposition]:
    if fam.r == 1:
        return [lanczos_decompose(H, fam.states[0])]
    workers = min(fam.r, int(setting("runner.max_workers")))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda psi: lanczos_decompose(H, psi), fam.states))


def family_decompose(
    H: OperatorLike, fam: StateFamily, rank_tol: Optional[float] = None
) -> FamilyDecomposition:
    """Per-state Lanczos followed by orthonormalization of the union of the bases.

    A single-state family returns the Lanczos basis itself, and its Jacobi
    matrix as the compression.

    Raises:
        DimensionMismatch: If the family and H differ in dimension
    """
    H = as_operator(H)
    check_dims(H, fam.states[0])
    decompositions = _decompose_members(H, fam)
    dims = tuple(K.m for K in decompositions)

    if fam.r == 1:
        K = decompositions[0]
        compressed = K.jacobi.to_dense().astype(np.complex128)
        return FamilyDecomposition(K.basis, compressed, dims, tuple(decompositions))

    union = np.hstack([K.basis for K in decompositions])
    basis, m_fam = orthonormalize(union.T, setting("linalg.rank_tol", rank_tol))
    compressed = basis.conj().T @ H.matrix @ basis
    compressed = 0.5 * (compressed + compressed.conj().T)
    logger.debug("joint Krylov space: m_fam=%d from member dims %s", m_fam, dims)
    return FamilyDecomposition(basis, compressed, dims, tuple(decompositions))


def span_residual(fd: FamilyDecomposition) -> float:
    """Largest distance of a member Krylov vector from the joint basis span."""
    V = fd.basis
    worst = 0.0
    for K in fd.decompositions:
        residual = K.basis - V @ (V.conj().T @ K.basis)
        worst = max(worst, float(np.linalg.norm(residual, axis=0).max()))
    return worst


def _l2_error(mu: DiscreteMeasure, values: NDArray) -> float:
    return float(np.sqrt(np.dot(mu.weights, np.abs(values) ** 2)))


def _max_state_degree(
    f: TargetFunction,
    members: list[DiscreteMeasure],
    joint: DiscreteMeasure,
    epsilon: float,
    zero_rtol: Optional[float],
) -> int:
    # One polynomial for all members: the L2(joint) projection of f, checked
    # against each member's own measure.
    a, b = recurrence_from_measure(joint)
    exp = expand(f, joint, a, b)
    member_values = [f.evaluate(mu.atoms) for mu in members]
    if epsilon > 0.0:
        targets = [epsilon] * len(members)
    else:
        rtol = setting("duality.coeff_zero_rtol", zero_rtol)
        targets = [rtol * _l2_error(mu, v) for mu, v in zip(members, member_values)]
    for d in range(exp.size):
        errors = [
            _l2_error(mu, v - evaluate_truncation(exp, mu.atoms, d))
            for mu, v in zip(members, member_values)
        ]
        if all(err <= target for err, target in zip(errors, targets)):
            return d
    return exp.size - 1


def family_query_complexity(
    H: OperatorLike,
    fam: StateFamily,
    f: TargetFunction,
    epsilon: float,
    criterion: Criterion = "max_state",
    zero_rtol: Optional[float] = None,
    decomposition: Optional[FamilyDecomposition] = None,
) -> int:
    """Query complexity of f(H) over a family of input states.

    ``max_state`` returns the smallest degree d whose shared polynomial meets
    epsilon in every member's L2(mu_j) norm. ``averaged`` returns n_mu of the
    uniform mixture of the member measures. A single-state family goes
    through the single-state procedure unchanged.

    Raises:
        SingularAtom: If f is the inverse and an occupied atom is too close to 0
    """
    if criterion not in CRITERIA:
        raise ValueError(f"unknown family criterion {criterion!r}")
    if epsilon < 0.0:
        raise ValueError("epsilon must be nonnegative")
    H = as_operator(H)
    check_dims(H, fam.states[0])
    if fam.r == 1:
        return solve_duality(H, fam.states[0], f, epsilon, worst_case=False).report.n_mu

    fd = decomposition if decomposition is not None else family_decompose(H, fam)
    members = fd.member_measures()
    joint = mixture(members)
    if criterion == "averaged":
        a, b = recurrence_from_measure(joint)
        return degree_functional(expand(f, joint, a, b), epsilon, zero_rtol)
    return _max_state_degree(f, members, joint, epsilon, zero_rtol)
