"""State-aware query complexity: the degree functional, its operational
certificate, the brute-force least-squares oracle and the worst-case comparator."""
from dataclasses import dataclass, field
from typing import Literal, Optional

import numpy as np
from numpy.polynomial import chebyshev as cheb
from numpy.typing import NDArray

from ..config import setting
from ..errors import (
    CertificateFailure,
    DegreeCapExceeded,
    IllConditioned,
    IndexOutOfRange,
    SingularOnInterval,
)
from ..utils.log import get_logger
from .favard import (
    FavardExpansion,
    FunctionKind,
    TargetFunction,
    expand,
    guard_singular_atoms,
)
from .lanczos import KrylovDecomposition, lanczos_decompose, qubit_counts
from .linalg import (
    HermitianOperator,
    OperatorLike,
    StateLike,
    as_operator,
    as_state,
    check_dims,
    eig_hermitian_dense,
)
from .measure import DiscreteMeasure, measure_from_decomposition

logger = get_logger(__name__)

STATE_AWARE_NORM = "L2(mu)"
WORST_CASE_NORM = "sup"


@dataclass
class QueryReport:
    """Outcome of one state-aware query analysis.

    ``n_mu`` is measured in the L2(mu) norm of the output state, the
    worst-case degree in the sup norm over the spectral interval; both are
    reported, neither is claimed to bound the other.
    """

    n_mu: int
    epsilon: float
    tail_curve: list[tuple[int, float]]
    matvec_count: int
    achieved_error: float
    predicted_error: float
    krylov_dimension: int
    source_dim: int
    f_norm: float = 0.0
    epsilon_floor: float = 0.0
    worst_case_degree: Optional[int] = None
    worst_case_interval: Optional[tuple[float, float]] = None
    kappa_eff: Optional[float] = None
    kappa_global: Optional[float] = None
    qubits_ambient: int = 0
    qubits_krylov: int = 0
    notes: list[str] = field(default_factory=list)

    @property
    def certified(self) -> bool:
        """Counter equals the degree and the achieved error meets epsilon.

        Epsilon below the accuracy floor is certified against the floor.
        """
        slack = 1e-9 * (1.0 + self.f_norm)
        target = max(self.epsilon, self.epsilon_floor)
        return self.matvec_count == self.n_mu and self.achieved_error <= target + slack

    def to_dict(self) -> dict:
        """Convert to dictionary.

        Returns:
            Dictionary representation
        """
        return {
            "n_mu": self.n_mu,
            "epsilon": self.epsilon,
            "epsilon_floor": self.epsilon_floor,
            "state_aware_norm": STATE_AWARE_NORM,
            "tail_curve": [[d, err] for d, err in self.tail_curve],
            "matvec_count": self.matvec_count,
            "achieved_error": self.achieved_error,
            "predicted_error": self.predicted_error,
            "krylov_dimension": self.krylov_dimension,
            "source_dim": self.source_dim,
            "f_norm": self.f_norm,
            "worst_case_degree": self.worst_case_degree,
            "worst_case_norm": WORST_CASE_NORM,
            "worst_case_interval": (
                list(self.worst_case_interval) if self.worst_case_interval else None
            ),
            "kappa_eff": self.kappa_eff,
            "kappa_global": self.kappa_global,
            "qubits_ambient": self.qubits_ambient,
            "qubits_krylov": self.qubits_krylov,
            "certified": self.certified,
            "notes": list(self.notes),
        }


@dataclass(frozen=True, eq=False)
class DualityOutcome:
    """Every intermediate object of one state-aware query run."""

    decomposition: KrylovDecomposition
    measure: DiscreteMeasure
    expansion: FavardExpansion
    state: NDArray[np.complex128]
    report: QueryReport


class QueryCountingOperator:
    """Wraps H and counts matrix-vector products (the oracle queries)."""

    def __init__(self, operator: HermitianOperator):
        self.operator = operator
        self.queries = 0

    def __call__(self, vector: NDArray) -> NDArray[np.complex128]:
        self.queries += 1
        return self.operator.matvec(vector)


def _exact_degree(exp: FavardExpansion, zero_rtol: Optional[float]) -> int:
    tol = setting("duality.coeff_zero_rtol", zero_rtol) * np.sqrt(exp.f_norm_sq)
    nonzero = np.flatnonzero(np.abs(exp.coeffs) > tol)
    return int(nonzero[-1]) if nonzero.size else 0


def accuracy_floor(exp: FavardExpansion, zero_rtol: Optional[float] = None) -> float:
    """Smallest epsilon the expansion can resolve: the tail after the exact degree.

    Coefficients past the exact degree are roundoff, so a tolerance below this
    value is answered with the exact degree and certified against the floor.
    """
    return float(exp.tail_errors()[_exact_degree(exp, zero_rtol)])


def degree_functional(
    exp: FavardExpansion, epsilon: float, zero_rtol: Optional[float] = None
) -> int:
    """Smallest d with sqrt(sum_{n>d} |c_n|^2) <= epsilon.

    For epsilon = 0 the exact interpolation degree is returned: the largest n
    with |c_n| above coeff_zero_rtol * ||f||. For epsilon > 0 the result never
    exceeds that degree; see accuracy_floor.
    """
    if epsilon < 0.0:
        raise ValueError("epsilon must be nonnegative")
    exact_degree = _exact_degree(exp, zero_rtol)
    if epsilon == 0.0:
        return exact_degree
    tails = exp.tail_errors()
    return min(int(np.argmax(tails <= epsilon)), exact_degree)


def least_squares_oracle(
    f: TargetFunction,
    mu: DiscreteMeasure,
    d: int,
    basis: Literal["chebyshev", "monomial"] = "chebyshev",
    max_condition: Optional[float] = None,
) -> float:
    """Minimum of ||f - q||_{L2(mu)} over all polynomials q of degree <= d.

    Solved independently of the Lanczos coefficients: the default basis is
    Chebyshev polynomials on the support hull, solved by weighted least squares;
    the monomial basis goes through the normal equations and is only usable at
    small d.

    Raises:
        IndexOutOfRange: If d is outside [0, support_size - 1]
        IllConditioned: If the monomial Gram matrix condition exceeds oracle_max_condition
    """
    if not 0 <= d <= mu.support_size - 1:
        raise IndexOutOfRange(f"degree {d} outside [0, {mu.support_size - 1}]")
    guard_singular_atoms(f, mu, None)
    values = f.evaluate(mu.atoms)
    sqrt_w = np.sqrt(mu.weights)
    rhs = sqrt_w * values

    if basis == "chebyshev":
        lo, hi = float(mu.atoms[0]), float(mu.atoms[-1])
        x = np.zeros_like(mu.atoms) if hi == lo else (2.0 * mu.atoms - lo - hi) / (hi - lo)
        design = sqrt_w[:, None] * cheb.chebvander(x, d)
        coef, *_ = np.linalg.lstsq(design, rhs, rcond=None)
    elif basis == "monomial":
        design = sqrt_w[:, None] * np.vander(mu.atoms, d + 1, increasing=True)
        gram = design.T @ design
        condition = float(np.linalg.cond(gram))
        limit = setting("duality.oracle_max_condition", max_condition)
        if not condition <= limit:
            raise IllConditioned(condition, limit)
        coef = np.linalg.solve(gram, design.T @ rhs)
    else:
        raise ValueError(f"unknown basis {basis!r}")

    return float(np.linalg.norm(rhs - design @ coef))


def oracle_degree(
    f: TargetFunction, mu: DiscreteMeasure, epsilon: float, zero_rtol: Optional[float] = None
) -> int:
    """Smallest degree whose least-squares optimum reaches epsilon.

    For epsilon = 0 "reaches" means below coeff_zero_rtol * ||f||.
    """
    values = f.evaluate(mu.atoms)
    norm = float(np.sqrt(np.dot(mu.weights, np.abs(values) ** 2)))
    target = epsilon if epsilon > 0.0 else setting("duality.coeff_zero_rtol", zero_rtol) * norm
    for d in range(mu.support_size):
        if least_squares_oracle(f, mu, d) <= target:
            return d
    return mu.support_size - 1


def apply_polynomial_counted(
    H: OperatorLike, psi0: StateLike, exp: FavardExpansion, d: int
) -> tuple[NDArray[np.complex128], int]:
    """Apply p_d(H) to psi0 with exactly d queries to H.

    The vectors P_n(H) psi0 are generated by the three-term recurrence, one
    matrix-vector product per degree; additions and scalings are free. Each new
    vector is reorthogonalized twice against the earlier ones before it is
    divided by b_n, which keeps the generated vectors on the Krylov basis.

    Returns:
        Tuple of (sum_{n<=d} c_n P_n(H) psi0, number of matrix-vector products)

    Raises:
        IndexOutOfRange: If d is outside [0, m-1]
    """
    H = as_operator(H)
    psi = as_state(psi0)
    check_dims(H, psi)
    if not 0 <= d <= exp.size - 1:
        raise IndexOutOfRange(f"degree {d} outside [0, {exp.size - 1}]")

    oracle = QueryCountingOperator(H)
    vectors = np.zeros((psi.dim, d + 1), dtype=np.complex128)
    vectors[:, 0] = psi.amplitudes
    for n in range(d):
        cur = vectors[:, n]
        nxt = oracle(cur) - exp.a[n] * cur
        if n > 0:
            nxt -= exp.b[n - 1] * vectors[:, n - 1]
        done = vectors[:, : n + 1]
        for _ in range(2):
            nxt -= done @ (done.conj().T @ nxt)
        vectors[:, n + 1] = nxt / exp.b[n]
    return vectors @ exp.coeffs[: d + 1], oracle.queries


def _chebyshev_interpolant(f: TargetFunction, lo: float, hi: float, degree: int):
    real = cheb.Chebyshev.interpolate(lambda x: f.evaluate(x).real, degree, domain=[lo, hi])
    imag = cheb.Chebyshev.interpolate(lambda x: f.evaluate(x).imag, degree, domain=[lo, hi])
    return lambda x: real(x) + 1j * imag(x)


def worst_case_degree(
    f: TargetFunction,
    spectrum_interval: tuple[float, float],
    epsilon: float,
    grid_points: Optional[int] = None,
    max_degree: Optional[int] = None,
    floor_rtol: Optional[float] = None,
) -> int:
    """State-oblivious degree: smallest d whose Chebyshev interpolant on the
    interval has sup-error <= epsilon on a dense grid.

    Interpolation stands in for the minimax polynomial; it is within the usual
    Lebesgue-constant factor of the best degree. Epsilon is floored at
    floor_rtol * sup|f| so that epsilon = 0 asks for machine accuracy.

    Raises:
        SingularOnInterval: If f is not finite (or not defined) on the interval
        DegreeCapExceeded: If no degree up to max_degree suffices
    """
    lo, hi = float(spectrum_interval[0]), float(spectrum_interval[1])
    if not lo < hi:
        raise ValueError(f"interval must satisfy lo < hi, got ({lo}, {hi})")
    if not f.has_interval_extension:
        raise SingularOnInterval(f"{f.kind.value} function is only defined at tabulated points")
    if f.kind is FunctionKind.INVERSE and lo <= 0.0 <= hi:
        raise SingularOnInterval(f"1/x is singular on [{lo}, {hi}]")

    grid = np.linspace(lo, hi, int(setting("duality.worst_case.grid_points", grid_points)))
    exact = f.evaluate(grid)
    if not np.all(np.isfinite(exact)):
        raise SingularOnInterval(f"{f.kind.value} is not finite on [{lo}, {hi}]")
    floor = setting("duality.worst_case.floor_rtol", floor_rtol) * np.abs(exact).max()
    target = max(epsilon, floor)

    cap = int(setting("duality.worst_case.max_degree", max_degree))
    for degree in range(cap + 1):
        approx = _chebyshev_interpolant(f, lo, hi, degree)(grid)
        if np.abs(approx - exact).max() <= target:
            logger.debug("worst-case degree %d on [%g, %g]", degree, lo, hi)
            return degree
    raise DegreeCapExceeded(cap)


def _spectrum_interval(H: HermitianOperator) -> tuple[float, float]:
    eigenvalues, _ = eig_hermitian_dense(H)
    return float(eigenvalues[0]), float(eigenvalues[-1])


def _worst_case_or_none(
    f: TargetFunction, interval: tuple[float, float], epsilon: float, scale: float, notes: list
) -> Optional[int]:
    lo, hi = interval
    if hi - lo <= 1e-12 * scale:
        # Degenerate spectrum: f(H) is a multiple of the identity.
        return 0
    try:
        return worst_case_degree(f, interval, epsilon)
    except (SingularOnInterval, DegreeCapExceeded) as e:
        notes.append(f"worst-case degree unavailable: {e}")
        logger.info("worst-case degree unavailable: %s", e)
        return None


def solve_duality(
    H: OperatorLike,
    psi0: StateLike,
    f: TargetFunction,
    epsilon: float,
    breakdown_tol: Optional[float] = None,
    worst_case: bool = True,
) -> DualityOutcome:
    """State-aware Krylov query procedure, end to end.

    Lanczos -> spectral measure -> Favard expansion -> degree functional ->
    query-counted application of p_d(H).

    Raises:
        CertificateFailure: If the counted application used a query count other
            than n_mu or missed max(epsilon, accuracy floor)
    """
    if epsilon < 0.0:
        raise ValueError("epsilon must be nonnegative")
    H = as_operator(H)
    psi = as_state(psi0)
    check_dims(H, psi)

    K = lanczos_decompose(H, psi, breakdown_tol)
    mu = measure_from_decomposition(K)
    exp = expand(f, mu, K.a, K.b)
    n_mu = degree_functional(exp, epsilon)
    state, matvecs = apply_polynomial_counted(H, psi, exp, n_mu)

    # f(H) psi0 = sum_n c_n |K_n> on the Krylov space.
    target = K.basis[:, : exp.size] @ exp.coeffs
    achieved = float(np.linalg.norm(state - target))
    tails = exp.tail_errors()

    notes: list[str] = []
    floor = accuracy_floor(exp)
    if 0.0 < epsilon < floor:
        logger.info("epsilon %.3e is below the accuracy floor %.3e", epsilon, floor)
        notes.append(f"epsilon below the accuracy floor {floor:.3e}; certified against the floor")
    worst = None
    interval = None
    if worst_case:
        interval = _spectrum_interval(H)
        worst = _worst_case_or_none(f, interval, epsilon, H.scale, notes)
        if worst is not None and n_mu > worst:
            logger.info("n_mu=%d exceeds worst-case degree %d (norms differ)", n_mu, worst)
            notes.append("n_mu exceeds the sup-norm worst-case degree")

    qubits_ambient, qubits_krylov = qubit_counts(K)
    report = QueryReport(
        n_mu=n_mu,
        epsilon=float(epsilon),
        tail_curve=[(d, float(err)) for d, err in enumerate(tails)],
        matvec_count=matvecs,
        achieved_error=achieved,
        predicted_error=float(tails[n_mu]),
        krylov_dimension=K.m,
        source_dim=K.source_dim,
        f_norm=float(np.sqrt(exp.f_norm_sq)),
        epsilon_floor=floor,
        worst_case_degree=worst,
        worst_case_interval=interval,
        qubits_ambient=qubits_ambient,
        qubits_krylov=qubits_krylov,
        notes=notes,
    )
    if not report.certified:
        raise CertificateFailure(report)
    return DualityOutcome(decomposition=K, measure=mu, expansion=exp, state=state, report=report)


def run_duality_scenario(
    H: OperatorLike, psi0: StateLike, f: TargetFunction, epsilon: float
) -> QueryReport:
    """Run the state-aware query procedure and return its report."""
    return solve_duality(H, psi0, f, epsilon).report


def hhl_analysis(A: OperatorLike, b: StateLike, epsilon: float) -> QueryReport:
    """State-aware linear-systems analysis with f(x) = 1/x.

    Fills kappa_eff (occupied atoms) and kappa_global (full spectrum) and
    compares n_mu with the worst-case degree on the full spectral interval.

    Raises:
        SingularAtom: If an occupied atom is too close to 0
        SingularOnInterval: If the full spectral interval contains 0
    """
    A = as_operator(A)
    outcome = solve_duality(A, b, TargetFunction.inverse(), epsilon, worst_case=False)
    report = outcome.report

    eigenvalues, _ = eig_hermitian_dense(A)
    magnitudes = np.abs(eigenvalues)
    smallest = float(magnitudes.min())
    report.kappa_global = float(magnitudes.max() / smallest) if smallest > 0.0 else float("inf")
    atoms = np.abs(outcome.measure.atoms)
    report.kappa_eff = float(atoms.max() / atoms.min())

    interval = (float(eigenvalues[0]), float(eigenvalues[-1]))
    if interval[0] <= 0.0 <= interval[1]:
        raise SingularOnInterval(f"spectrum of A spans 0: [{interval[0]}, {interval[1]}]")
    report.worst_case_interval = interval
    report.worst_case_degree = _worst_case_or_none(
        TargetFunction.inverse(), interval, epsilon, A.scale, report.notes
    )
    return report
