"""Favard orthonormal polynomials, expansion coefficients and truncation tails."""
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Optional, Union

import numpy as np
from numpy.typing import ArrayLike, NDArray

from ..config import setting
from ..errors import DimensionMismatch, IndexOutOfRange, SingularAtom
from ..utils.log import get_logger
from .lanczos import lanczos_decompose
from .linalg import TridiagonalReal, eigh_tridiagonal_vectors
from .measure import DiscreteMeasure

logger = get_logger(__name__)

_RANDOM_QUANTUM = 1.0e8
_KEY_OFFSET = 1 << 62


class FunctionKind(str, Enum):
    """Target functions f(H) the toolkit knows how to expand."""

    INVERSE = "inverse"
    TIME_EVOLUTION = "time_evolution"
    GAUSSIAN_FILTER = "gaussian_filter"
    STEP_FILTER = "step_filter"
    MONOMIAL = "monomial"
    TABULATED = "tabulated"
    RANDOM_TABULATED = "random_tabulated"


@dataclass(frozen=True)
class TargetFunction:
    """A target function f: R -> C.

    Tabulated functions only have values at specific points: either explicit
    ``nodes``, or (without nodes) the atoms of whatever measure they are
    evaluated on, in ascending order. Random tabulated functions draw seeded
    complex normal values at those atoms.
    """

    kind: FunctionKind
    params: dict[str, Any] = field(default_factory=dict)

    @classmethod
    def inverse(cls) -> "TargetFunction":
        return cls(FunctionKind.INVERSE)

    @classmethod
    def time_evolution(cls, t: float) -> "TargetFunction":
        return cls(FunctionKind.TIME_EVOLUTION, {"t": float(t)})

    @classmethod
    def gaussian_filter(cls, center: float, width: float) -> "TargetFunction":
        if width <= 0.0:
            raise ValueError("gaussian filter width must be positive")
        return cls(FunctionKind.GAUSSIAN_FILTER, {"center": float(center), "width": float(width)})

    @classmethod
    def step_filter(cls, threshold: float) -> "TargetFunction":
        return cls(FunctionKind.STEP_FILTER, {"threshold": float(threshold)})

    @classmethod
    def monomial(cls, k: int) -> "TargetFunction":
        if k < 0:
            raise ValueError("monomial degree must be nonnegative")
        return cls(FunctionKind.MONOMIAL, {"k": int(k)})

    @classmethod
    def tabulated(cls, values: ArrayLike, nodes: Optional[ArrayLike] = None) -> "TargetFunction":
        params: dict[str, Any] = {"values": tuple(complex(v) for v in np.ravel(values))}
        if nodes is not None:
            nodes = tuple(float(x) for x in np.ravel(nodes))
            if len(nodes) != len(params["values"]):
                raise DimensionMismatch("tabulated nodes and values differ in length")
            params["nodes"] = nodes
        return cls(FunctionKind.TABULATED, params)

    @classmethod
    def random_tabulated(cls, seed: int) -> "TargetFunction":
        return cls(FunctionKind.RANDOM_TABULATED, {"seed": int(seed)})

    @property
    def has_interval_extension(self) -> bool:
        """Whether f is defined on a whole interval (not just at tabulated points)."""
        return self.kind not in (FunctionKind.TABULATED, FunctionKind.RANDOM_TABULATED)

    def evaluate(self, lam: Union[float, ArrayLike]) -> NDArray[np.complex128]:
        """Evaluate f at real points.

        Raises:
            DimensionMismatch: If a tabulated function is evaluated at points it has no value for
        """
        x = np.asarray(lam, dtype=np.float64)
        p = self.params
        match self.kind:
            case FunctionKind.INVERSE:
                with np.errstate(divide="ignore"):
                    return (1.0 / x).astype(np.complex128)
            case FunctionKind.TIME_EVOLUTION:
                return np.exp(-1j * p["t"] * x)
            case FunctionKind.GAUSSIAN_FILTER:
                z = (x - p["center"]) / p["width"]
                return np.exp(-0.5 * z * z).astype(np.complex128)
            case FunctionKind.STEP_FILTER:
                return (x >= p["threshold"]).astype(np.complex128)
            case FunctionKind.MONOMIAL:
                return (x ** p["k"]).astype(np.complex128)
            case FunctionKind.TABULATED:
                return self._lookup(x)
            case FunctionKind.RANDOM_TABULATED:
                return self._random_values(x)
        raise ValueError(f"unknown function kind {self.kind}")

    def _random_values(self, x: NDArray[np.float64]) -> NDArray[np.complex128]:
        # One generator per point, keyed on lambda quantized to 1e-8, so the same
        # atom gets the same value whichever measure it belongs to.
        flat = x.reshape(-1)
        keys = np.round(flat * _RANDOM_QUANTUM).astype(np.int64)
        values = np.empty(flat.size, dtype=np.complex128)
        for i, key in enumerate(keys):
            rng = np.random.default_rng([self.params["seed"], int(key) + _KEY_OFFSET])
            re, im = rng.standard_normal(2)
            values[i] = complex(re, im)
        return values.reshape(x.shape)

    def _lookup(self, x: NDArray[np.float64]) -> NDArray[np.complex128]:
        values = np.array(self.params["values"], dtype=np.complex128)
        nodes = self.params.get("nodes")
        if nodes is None:
            if x.shape != values.shape:
                raise DimensionMismatch(
                    f"tabulated function has {values.size} values, evaluated at {x.size} atoms"
                )
            return values
        nodes = np.array(nodes)
        flat = x.reshape(-1)
        gaps = np.abs(np.subtract.outer(flat, nodes))
        nearest = gaps.argmin(axis=1)
        scale = max(float(np.abs(nodes).max()), 1.0)
        if np.any(gaps[np.arange(flat.size), nearest] > 1e-9 * scale):
            raise DimensionMismatch("tabulated function evaluated away from its nodes")
        return values[nearest].reshape(x.shape)

    def describe(self) -> dict:
        """JSON-friendly description."""
        params = {}
        for key, value in self.params.items():
            if key == "values":
                params[key] = [[v.real, v.imag] for v in value]
            elif key == "nodes":
                params[key] = list(value)
            else:
                params[key] = value
        return {"kind": self.kind.value, **params}


@dataclass(frozen=True, eq=False)
class FavardExpansion:
    """Coefficients c_n = sum_i w_i f(lambda_i) P_n(lambda_i) of a target function.

    Attributes:
        measure: Measure the expansion is orthogonal for
        a: Recurrence diagonal coefficients
        b: Recurrence off-diagonal coefficients
        coeffs: Complex coefficients c_0..c_{m-1}
        f_norm_sq: Squared L2(mu) norm of f
        function: The expanded function, when known
    """

    measure: DiscreteMeasure
    a: NDArray[np.float64]
    b: NDArray[np.float64]
    coeffs: NDArray[np.complex128]
    f_norm_sq: float
    function: Optional[TargetFunction] = None

    @property
    def size(self) -> int:
        return self.coeffs.size

    def tail_errors(self) -> NDArray[np.float64]:
        """sqrt(sum_{n>d} |c_n|^2) for every d = 0..size-1."""
        power = np.abs(self.coeffs) ** 2
        # Reverse cumulative sums, shifted so entry d excludes c_d itself.
        tails = np.concatenate([np.cumsum(power[::-1])[::-1][1:], [0.0]])
        return np.sqrt(tails)


def eval_orthonormal_polys(
    a: ArrayLike, b: ArrayLike, lam: Union[float, ArrayLike], up_to: int
) -> NDArray[np.float64]:
    """Values (P_0(lam), ..., P_up_to(lam)) from the three-term recurrence.

    lam * P_n = b_{n+1} P_{n+1} + a_n P_n + b_n P_{n-1}, with P_0 = 1, P_{-1} = 0
    and b stored 0-based (b[0] = b_1).

    Args:
        a: Diagonal coefficients (length m)
        b: Off-diagonal coefficients (length m-1)
        lam: Scalar or array of evaluation points
        up_to: Highest degree, at most m-1

    Returns:
        Array of shape lam.shape + (up_to + 1,)

    Raises:
        IndexOutOfRange: If up_to is negative or exceeds m-1
    """
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    if not 0 <= up_to <= a.size - 1:
        raise IndexOutOfRange(f"degree {up_to} outside [0, {a.size - 1}]")
    x = np.asarray(lam, dtype=np.float64)
    values = np.empty(x.shape + (up_to + 1,))
    values[..., 0] = 1.0
    prev = np.zeros_like(x)
    cur = np.ones_like(x)
    for n in range(up_to):
        nxt = (x - a[n]) * cur
        if n > 0:
            nxt -= b[n - 1] * prev
        nxt /= b[n]
        prev, cur = cur, nxt
        values[..., n + 1] = cur
    return values


def recurrence_from_measure(mu: DiscreteMeasure) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Recurrence coefficients of an arbitrary discrete measure.

    Runs Lanczos on diag(atoms) from the start vector sqrt(weights), whose
    spectral measure is exactly ``mu``.
    """
    decomposition = lanczos_decompose(np.diag(mu.atoms), np.sqrt(mu.weights))
    return decomposition.a, decomposition.b


def guard_singular_atoms(
    f: TargetFunction, mu: DiscreteMeasure, guard_rtol: Optional[float] = None
) -> None:
    """Raise SingularAtom when f is 1/x and an atom sits within the guard of 0."""
    if f.kind is not FunctionKind.INVERSE:
        return
    guard = setting("favard.inverse_guard_rtol", guard_rtol) * mu.spectral_radius
    nearest = int(np.argmin(np.abs(mu.atoms)))
    if abs(mu.atoms[nearest]) < guard:
        raise SingularAtom(float(mu.atoms[nearest]), guard)


def _project(
    a: NDArray[np.float64], b: NDArray[np.float64], mu: DiscreteMeasure, values: NDArray
) -> NDArray[np.complex128]:
    """c = f(J) e_1 through the eigenvectors of J.

    Column i of the eigenvector matrix is sqrt(w_i) (P_0(x_i), ..., P_{m-1}(x_i)),
    so no polynomial is ever evaluated by recurrence.
    """
    if a.size != mu.support_size:
        polys = eval_orthonormal_polys(a, b, mu.atoms, a.size - 1)
        return polys.T @ (mu.weights * values)
    _, vectors = eigh_tridiagonal_vectors(TridiagonalReal(a, b))
    return vectors @ (np.sqrt(mu.weights) * values)


def expand(
    f: TargetFunction,
    mu: DiscreteMeasure,
    a: ArrayLike,
    b: ArrayLike,
    inverse_guard_rtol: Optional[float] = None,
) -> FavardExpansion:
    """Expand f in the orthonormal polynomials of mu by exact quadrature.

    When atoms were merged the measure has fewer atoms than recurrence
    coefficients; only as many coefficients as atoms are kept.

    Raises:
        SingularAtom: If f is the inverse and an atom sits within the guard of 0
    """
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    guard_singular_atoms(f, mu, inverse_guard_rtol)

    values = f.evaluate(mu.atoms)
    if not np.all(np.isfinite(values)):
        raise SingularAtom(float(mu.atoms[~np.isfinite(values)][0]), 0.0)
    if a.size > mu.support_size:
        # Merged atoms: the measure's own recurrence has as many terms as atoms.
        a, b = recurrence_from_measure(mu)
    size = min(a.size, mu.support_size)
    coeffs = _project(a[:size], b[: size - 1], mu, values)
    f_norm_sq = float(np.dot(mu.weights, np.abs(values) ** 2))
    logger.debug("expanded %s into %d coefficients", f.kind.value, size)
    return FavardExpansion(
        measure=mu,
        a=a[:size],
        b=b[: size - 1],
        coeffs=coeffs,
        f_norm_sq=f_norm_sq,
        function=f,
    )


def truncate(exp: FavardExpansion, d: int) -> tuple[NDArray[np.complex128], float]:
    """Degree-d truncation p_d and its L2(mu) error sqrt(sum_{n>d} |c_n|^2).

    Raises:
        IndexOutOfRange: If d is outside [0, m-1]
    """
    if not 0 <= d <= exp.size - 1:
        raise IndexOutOfRange(f"degree {d} outside [0, {exp.size - 1}]")
    return exp.coeffs[: d + 1].copy(), float(exp.tail_errors()[d])


def evaluate_truncation(
    exp: FavardExpansion, lam: Union[float, ArrayLike], d: Optional[int] = None
) -> NDArray[np.complex128]:
    """Values of p_d = sum_{n<=d} c_n P_n at the given points (d defaults to m-1)."""
    d = exp.size - 1 if d is None else d
    coeffs, _ = truncate(exp, d)
    return eval_orthonormal_polys(exp.a, exp.b, lam, d) @ coeffs
