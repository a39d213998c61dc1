"""Time evolution on the Krylov chain versus the ambient space."""
from dataclasses import dataclass
from typing import Literal, Optional, Sequence, Union

import numpy as np
from numpy.typing import ArrayLike, NDArray

from ..config import setting
from ..errors import DimensionMismatch
from ..utils.log import get_logger
from .lanczos import KrylovDecomposition, lanczos_decompose
from .linalg import (
    OperatorLike,
    StateLike,
    TridiagonalReal,
    as_operator,
    as_state,
    assert_hermitian,
    check_dims,
    eig_hermitian_dense,
    eigh_tridiagonal_vectors,
)
from .measure import MeasureDistance, measure_distance, measure_from_decomposition

logger = get_logger(__name__)


@dataclass(frozen=True, eq=False)
class ChainState:
    """Amplitudes psi_n(t) on the Krylov chain at one time."""

    amplitudes: NDArray[np.complex128]
    time: float

    def __post_init__(self):
        norm_sq = float(np.sum(np.abs(self.amplitudes) ** 2))
        if abs(norm_sq - 1.0) > setting("dynamics.norm_tol"):
            raise ValueError(f"chain state norm^2 = {norm_sq!r} is not 1")


@dataclass(frozen=True)
class DisorderSpec:
    """Uniform on-site (a) and hopping (b) disorder of given strengths."""

    strength_a: float = 0.0
    strength_b: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.strength_a < 0.0 or self.strength_b < 0.0:
            raise ValueError("disorder strengths must be nonnegative")


@dataclass(frozen=True, eq=False)
class DisorderResult:
    """Mean-position curves of the clean and the disordered chain."""

    t_grid: NDArray[np.float64]
    clean: NDArray[np.float64]
    disordered: NDArray[np.float64]
    a: NDArray[np.float64]
    b: NDArray[np.float64]

    def window_average(self, lo: float, hi: float) -> tuple[float, float]:
        """Time averages of (clean, disordered) C(t) over lo <= t <= hi."""
        mask = (self.t_grid >= lo) & (self.t_grid <= hi)
        if not np.any(mask):
            raise ValueError(f"no grid times inside [{lo}, {hi}]")
        return float(self.clean[mask].mean()), float(self.disordered[mask].mean())

    def localization_gap(self, lo: float, hi: float) -> float:
        """Clean minus disordered time-averaged C(t); positive when disorder slows spreading."""
        clean, disordered = self.window_average(lo, hi)
        return clean - disordered


@dataclass(frozen=True)
class PerturbationReport:
    """Effect of a coherent perturbation on the Lanczos data and the measure."""

    target: str
    strength: float
    seed: int
    krylov_dimension: tuple[int, int]
    max_delta_a: float
    max_delta_b: float
    distance: MeasureDistance

    def to_dict(self) -> dict:
        return {
            "target": self.target,
            "strength": self.strength,
            "seed": self.seed,
            "krylov_dimension": list(self.krylov_dimension),
            "max_delta_a": self.max_delta_a,
            "max_delta_b": self.max_delta_b,
            "max_atom_shift": self.distance.max_atom_shift,
            "total_variation": self.distance.total_variation,
        }


class ChainPropagator:
    """Cached eigensystem of a Jacobi matrix for repeated propagation.

    e^{-iJt} = Q diag(e^{-i lambda t}) Q^T with Q from the tridiagonal QL kernel.
    """

    def __init__(self, jacobi: TridiagonalReal):
        self.jacobi = jacobi
        self.eigenvalues, self.eigenvectors = eigh_tridiagonal_vectors(jacobi)

    @property
    def size(self) -> int:
        return self.jacobi.size

    def unitary(self, t: float) -> NDArray[np.complex128]:
        Q = self.eigenvectors
        return (Q * np.exp(-1j * self.eigenvalues * t)) @ Q.T

    def state(self, t: float) -> ChainState:
        """e^{-iJt} e_1 as a ChainState."""
        Q = self.eigenvectors
        amplitudes = Q @ (np.exp(-1j * self.eigenvalues * t) * Q[0])
        return ChainState(amplitudes, float(t))


def _jacobi_of(chain: Union[KrylovDecomposition, TridiagonalReal]) -> TridiagonalReal:
    return chain.jacobi if isinstance(chain, KrylovDecomposition) else chain


def evolve_full(H: OperatorLike, psi0: StateLike, t: float) -> NDArray[np.complex128]:
    """e^{-iHt} psi0 through a dense eigendecomposition."""
    H = as_operator(H)
    psi = as_state(psi0)
    check_dims(H, psi)
    eigenvalues, U = eig_hermitian_dense(H)
    return U @ (np.exp(-1j * eigenvalues * t) * (U.conj().T @ psi.amplitudes))


def evolve_chain(K: Union[KrylovDecomposition, TridiagonalReal], t: float) -> ChainState:
    """e^{-iJt} e_1: the ambient evolution e^{-iHt} psi0 written in the Krylov basis."""
    return ChainPropagator(_jacobi_of(K)).state(t)


def mean_position(state: ChainState) -> float:
    """C = sum_n n |psi_n|^2."""
    sites = np.arange(state.amplitudes.size)
    return float(np.dot(sites, np.abs(state.amplitudes) ** 2))


def position_curve(
    chain: Union[KrylovDecomposition, TridiagonalReal, ChainPropagator], t_grid: ArrayLike
) -> NDArray[np.float64]:
    """C(t) over a time grid."""
    propagator = chain if isinstance(chain, ChainPropagator) else ChainPropagator(_jacobi_of(chain))
    return np.array([mean_position(propagator.state(t)) for t in np.asarray(t_grid, dtype=float)])


def correlator(
    K: Union[KrylovDecomposition, TridiagonalReal],
    observables: Sequence[ArrayLike],
    times: Sequence[float],
) -> complex:
    """<e_1| prod_s e^{iJt_s} A_s e^{-iJt_s} |e_1> for compressed observables A_s.

    Raises:
        DimensionMismatch: If the lists differ in length or a matrix is not m x m
    """
    if len(observables) != len(times):
        raise DimensionMismatch(f"{len(observables)} observables but {len(times)} times")
    propagator = ChainPropagator(_jacobi_of(K))
    m = propagator.size
    ket = np.zeros(m, dtype=np.complex128)
    ket[0] = 1.0
    for A, t in zip(reversed(observables), reversed(times)):
        A = np.asarray(A, dtype=np.complex128)
        if A.shape != (m, m):
            raise DimensionMismatch(f"compressed observable must be {m}x{m}, got {A.shape}")
        U = propagator.unitary(t)
        ket = U.conj().T @ (A @ (U @ ket))
    return complex(ket[0])


def correlator_dense(
    H: OperatorLike,
    psi0: StateLike,
    observables: Sequence[ArrayLike],
    times: Sequence[float],
) -> complex:
    """<psi0| A_1(t_1) ... A_r(t_r) |psi0> with Heisenberg operators in the ambient space."""
    if len(observables) != len(times):
        raise DimensionMismatch(f"{len(observables)} observables but {len(times)} times")
    H = as_operator(H)
    psi = as_state(psi0)
    check_dims(H, psi)
    eigenvalues, V = eig_hermitian_dense(H)
    ket = psi.amplitudes.astype(np.complex128)
    for A, t in zip(reversed(observables), reversed(times)):
        A = np.asarray(A, dtype=np.complex128)
        if A.shape != (H.dim, H.dim):
            raise DimensionMismatch(f"observable must be {H.dim}x{H.dim}, got {A.shape}")
        U = (V * np.exp(-1j * eigenvalues * t)) @ V.conj().T
        ket = U.conj().T @ (A @ (U @ ket))
    return complex(np.vdot(psi.amplitudes, ket))


def perturb_coefficients(
    a: ArrayLike, b: ArrayLike, spec: DisorderSpec, clamp: Optional[float] = None
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Add seeded uniform disorder to Lanczos coefficients.

    Off-diagonal shifts are clamped to |delta b_n| <= clamp * b_n so every b_n stays positive.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    clamp = setting("dynamics.disorder_clamp", clamp)
    rng = np.random.default_rng(spec.seed)
    delta_a = rng.uniform(-spec.strength_a, spec.strength_a, a.size)
    delta_b = rng.uniform(-spec.strength_b, spec.strength_b, b.size)
    delta_b = np.clip(delta_b, -clamp * b, clamp * b)
    return a + delta_a, b + delta_b


def disorder_experiment(
    a: ArrayLike, b: ArrayLike, spec: DisorderSpec, t_grid: ArrayLike
) -> DisorderResult:
    """Evolve the clean and the disordered chain from e_1 and record C(t).

    With zero strengths both curves are identical.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    t_grid = np.asarray(t_grid, dtype=np.float64)
    noisy_a, noisy_b = perturb_coefficients(a, b, spec)
    clean = position_curve(TridiagonalReal(a, b), t_grid)
    disordered = position_curve(TridiagonalReal(noisy_a, noisy_b), t_grid)
    return DisorderResult(t_grid=t_grid, clean=clean, disordered=disordered, a=noisy_a, b=noisy_b)


def perturbation_experiment(
    H: OperatorLike,
    psi0: StateLike,
    target: Literal["state", "operator"],
    strength: float,
    seed: int,
) -> PerturbationReport:
    """Coherent perturbation of the input state or the operator.

    ``state`` adds a seeded complex Gaussian vector of norm ``strength`` to psi0;
    ``operator`` adds a seeded random Hermitian matrix scaled to spectral norm
    ``strength``. Observational only: nothing is asserted about the outcome.
    """
    H = as_operator(H)
    psi = as_state(psi0)
    check_dims(H, psi)
    if strength < 0.0:
        raise ValueError("perturbation strength must be nonnegative")
    rng = np.random.default_rng(seed)

    if target == "state":
        noise = rng.standard_normal(H.dim) + 1j * rng.standard_normal(H.dim)
        perturbed_H = H
        perturbed_psi = psi.amplitudes + strength * noise / np.linalg.norm(noise)
    elif target == "operator":
        X = rng.standard_normal((H.dim, H.dim)) + 1j * rng.standard_normal((H.dim, H.dim))
        dH = 0.5 * (X + X.conj().T)
        dH *= strength / max(float(np.abs(np.linalg.eigvalsh(dH)).max()), 1e-300)
        perturbed_H = assert_hermitian(H.matrix + dH)
        perturbed_psi = psi.amplitudes
    else:
        raise ValueError(f"unknown perturbation target {target!r}")

    clean = lanczos_decompose(H, psi)
    noisy = lanczos_decompose(perturbed_H, perturbed_psi)
    common = min(clean.m, noisy.m)
    delta_a = float(np.abs(clean.a[:common] - noisy.a[:common]).max())
    delta_b = (
        float(np.abs(clean.b[: common - 1] - noisy.b[: common - 1]).max()) if common > 1 else 0.0
    )
    distance = measure_distance(
        measure_from_decomposition(clean), measure_from_decomposition(noisy)
    )
    logger.debug("perturbation %s(%g): m %d -> %d", target, strength, clean.m, noisy.m)
    return PerturbationReport(
        target=target,
        strength=float(strength),
        seed=int(seed),
        krylov_dimension=(clean.m, noisy.m),
        max_delta_a=delta_a,
        max_delta_b=delta_b,
        distance=distance,
    )
