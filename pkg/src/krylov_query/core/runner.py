"""Concurrent scenario runner and report writer."""
import asyncio
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np
from jinja2 import Template

from .. import __version__
from ..config import setting
from ..errors import CertificateFailure, ConfigParse, IoFailure, KrylovQueryError
from ..utils.log import get_logger
from ..utils.serialization import write_csv, write_json, write_text
from .duality import hhl_analysis, least_squares_oracle, solve_duality
from .dynamics import (
    ChainPropagator,
    correlator,
    correlator_dense,
    disorder_experiment,
    evolve_full,
    mean_position,
    perturbation_experiment,
)
from .family import CRITERIA, family_decompose, family_query_complexity, span_residual
from .lanczos import (
    KrylovDecomposition,
    apply_isometry,
    compress_observable,
    lanczos_decompose,
    recurrence_residual,
)
from .measure import DiscreteMeasure, measure_from_decomposition, survival_amplitude
from .scenario import SCHEMA_VERSION, ScenarioConfig, load_scenarios

logger = get_logger(__name__)

FORMATS = ("json", "csv", "both")
TEMPLATE_DIR = Path(__file__).resolve().parent.parent / "templates"

Curve = tuple[tuple[str, ...], list[tuple]]


@dataclass
class ScenarioResult:
    """Everything one scenario produced.

    ``record`` is the JSON report body; ``curves`` hold the plot-ready series
    (also embedded in the record). Wall time is kept out of the record so that
    reports are byte-reproducible.
    """

    name: str
    mode: str
    record: dict
    curves: dict[str, Curve] = field(default_factory=dict)
    headline: dict[str, Any] = field(default_factory=dict)
    wall_time_ms: float = 0.0

    @property
    def ok(self) -> bool:
        return self.record.get("error") is None


def _spectral_sections(H, K: KrylovDecomposition, mu: DiscreteMeasure) -> dict:
    return {
        "lanczos": {
            "a": K.a,
            "b": K.b,
            "krylov_dimension": K.m,
            "recurrence_residual": recurrence_residual(H, K),
        },
        "measure": {"atoms": mu.atoms, "weights": mu.weights},
    }


def _tail_curve(report) -> Curve:
    return ("degree", "error"), [(d, err) for d, err in report.tail_curve]


def _run_duality(sc: ScenarioConfig) -> tuple[dict, dict[str, Curve], dict]:
    H = sc.operator.build()
    psi = sc.state.build(H)
    outcome = solve_duality(H, psi, sc.function, sc.epsilon)
    report = outcome.report
    body = {
        "function": sc.function.describe(),
        "report": report.to_dict(),
        "oracle_error_at_n_mu": least_squares_oracle(sc.function, outcome.measure, report.n_mu),
        **_spectral_sections(H, outcome.decomposition, outcome.measure),
    }
    headline = {
        "m": report.krylov_dimension,
        "n_mu": report.n_mu,
        "worst": report.worst_case_degree,
    }
    return body, {"tail_curve": _tail_curve(report)}, headline


def _run_hhl(sc: ScenarioConfig) -> tuple[dict, dict[str, Curve], dict]:
    H = sc.operator.build()
    psi = sc.state.build(H)
    report = hhl_analysis(H, psi, sc.epsilon)
    K = lanczos_decompose(H, psi)
    body = {
        "function": sc.function.describe(),
        "report": report.to_dict(),
        **_spectral_sections(H, K, measure_from_decomposition(K)),
    }
    headline = {
        "m": report.krylov_dimension,
        "n_mu": report.n_mu,
        "worst": report.worst_case_degree,
    }
    return body, {"tail_curve": _tail_curve(report)}, headline


def _run_dynamics(sc: ScenarioConfig) -> tuple[dict, dict[str, Curve], dict]:
    H = sc.operator.build()
    psi = sc.state.build(H)
    K = lanczos_decompose(H, psi)
    mu = measure_from_decomposition(K)
    propagator = ChainPropagator(K.jacobi)
    times = sc.times()

    positions = []
    compression_error = 0.0
    norm_drift = 0.0
    for t in times:
        chain = propagator.state(t)
        positions.append((float(t), mean_position(chain)))
        full = evolve_full(H, psi, t)
        compression_error = max(
            compression_error, float(np.linalg.norm(full - apply_isometry(K, chain.amplitudes)))
        )
        norm_drift = max(norm_drift, abs(float(np.linalg.norm(chain.amplitudes)) - 1.0))
    survival = survival_amplitude(mu, times)

    body: dict[str, Any] = {
        "compression_error": compression_error,
        "norm_drift": norm_drift,
        **_spectral_sections(H, K, mu),
    }
    if sc.correlator is not None:
        observables = [spec.build() for spec in sc.correlator.observables]
        compressed_obs = [compress_observable(K, A) for A in observables]
        compressed = correlator(K, compressed_obs, sc.correlator.times)
        ambient = correlator_dense(H, psi, [A.matrix for A in observables], sc.correlator.times)
        body["correlator"] = {
            "times": list(sc.correlator.times),
            "compressed": compressed,
            "ambient": ambient,
            "gap": abs(compressed - ambient),
        }
    if sc.perturbation is not None:
        p = sc.perturbation
        body["perturbation"] = perturbation_experiment(
            H, psi, p.target, p.strength, p.seed
        ).to_dict()

    curves = {
        "mean_position": (("t", "C"), positions),
        "survival": (
            ("t", "re", "im"),
            [(float(t), float(s.real), float(s.imag)) for t, s in zip(times, survival)],
        ),
    }
    return body, curves, {"m": K.m}


def _run_family(sc: ScenarioConfig) -> tuple[dict, dict[str, Curve], dict]:
    H = sc.operator.build()
    fam = sc.build_family(H)
    fd = family_decompose(H, fam)
    complexity = {
        criterion: family_query_complexity(
            H, fam, sc.function, sc.epsilon, criterion, decomposition=fd
        )
        for criterion in CRITERIA
    }
    body = {
        "function": sc.function.describe(),
        "epsilon": sc.epsilon,
        "m_fam": fd.m_fam,
        "per_state_dims": list(fd.per_state_dims),
        "span_residual": span_residual(fd),
        "compressed_eigenvalues": np.linalg.eigvalsh(fd.compressed),
        "criterion": sc.criterion,
        "query_complexity": complexity[sc.criterion],
        "query_complexity_by_criterion": complexity,
    }
    return body, {}, {"m": fd.m_fam, "n_mu": complexity[sc.criterion]}


def _run_disorder(sc: ScenarioConfig) -> tuple[dict, dict[str, Curve], dict]:
    H = sc.operator.build()
    psi = sc.state.build(H)
    K = lanczos_decompose(H, psi)
    result = disorder_experiment(K.a, K.b, sc.disorder, sc.times())
    body: dict[str, Any] = {
        "disorder": {
            "strength_a": sc.disorder.strength_a,
            "strength_b": sc.disorder.strength_b,
            "seed": sc.disorder.seed,
        },
        "disordered_lanczos": {"a": result.a, "b": result.b},
        **_spectral_sections(H, K, measure_from_decomposition(K)),
    }
    if sc.window is not None:
        clean, disordered = result.window_average(*sc.window)
        body["window"] = {
            "bounds": list(sc.window),
            "clean_average": clean,
            "disordered_average": disordered,
            "localization_gap": clean - disordered,
        }
    rows = [
        (float(t), float(c), float(d))
        for t, c, d in zip(result.t_grid, result.clean, result.disordered)
    ]
    return body, {"mean_position": (("t", "clean", "disordered"), rows)}, {"m": K.m}


_MODES = {
    "duality": _run_duality,
    "hhl": _run_hhl,
    "dynamics": _run_dynamics,
    "family": _run_family,
    "disorder": _run_disorder,
}


def execute_scenario(sc: ScenarioConfig) -> ScenarioResult:
    """Run one scenario; failures become an error record instead of propagating."""
    record: dict[str, Any] = {
        "schema_version": SCHEMA_VERSION,
        "toolkit_version": __version__,
        "name": sc.name,
        "mode": sc.mode,
        "config_hash": sc.config_hash,
        "error": None,
    }
    curves: dict[str, Curve] = {}
    headline: dict[str, Any] = {}
    start = time.perf_counter()
    logger.info("scenario %s (%s) started", sc.name, sc.mode)
    try:
        body, curves, headline = _MODES[sc.mode](sc)
        record.update(body)
        record["curves"] = {
            name: [dict(zip(header, row)) for row in rows]
            for name, (header, rows) in curves.items()
        }
    except CertificateFailure as e:
        logger.error("scenario %s failed: %s", sc.name, e)
        record["report"] = e.report.to_dict()
        record["error"] = {"type": type(e).__name__, "message": str(e)}
    except KrylovQueryError as e:
        logger.error("scenario %s failed: %s", sc.name, e)
        record["error"] = {"type": type(e).__name__, "message": str(e)}
    except Exception as e:
        logger.exception("scenario %s crashed", sc.name)
        record["error"] = {"type": type(e).__name__, "message": str(e)}
    wall_time_ms = 1000.0 * (time.perf_counter() - start)
    logger.info("scenario %s finished in %.1f ms", sc.name, wall_time_ms)
    return ScenarioResult(sc.name, sc.mode, record, curves, headline, wall_time_ms)


async def run_scenarios(
    scenarios: tuple[ScenarioConfig, ...], max_workers: Optional[int] = None
) -> list[ScenarioResult]:
    """Run scenarios concurrently in worker threads; results follow input order."""
    semaphore = asyncio.Semaphore(int(setting("runner.max_workers", max_workers)))

    async def one(sc: ScenarioConfig) -> ScenarioResult:
        async with semaphore:
            return await asyncio.to_thread(execute_scenario, sc)

    return await asyncio.gather(*(one(sc) for sc in scenarios))


def render_summary(results: list[ScenarioResult], source: Path) -> str:
    template = Template((TEMPLATE_DIR / "summary.md.j2").read_text(encoding="utf-8"))
    return template.render(results=results, source=source, version=__version__)


def write_outputs(
    results: list[ScenarioResult], out_dir: Path, fmt: str, source: Path
) -> list[Path]:
    """Write reports (and CSV curves for csv/both) in scenario order.

    Raises:
        IoFailure: If a file cannot be written
    """
    if fmt not in FORMATS:
        raise ValueError(f"unknown format {fmt!r}")
    out_dir = Path(out_dir)
    written = []
    for result in results:
        written.append(write_json(out_dir / f"{result.name}.report.json", result.record))
        if fmt in ("csv", "both"):
            for curve, (header, rows) in result.curves.items():
                written.append(write_csv(out_dir / f"{result.name}.{curve}.csv", header, rows))
    written.append(write_text(out_dir / "summary.md", render_summary(results, source)))
    return written


def run(
    config_path: Path,
    out_dir: Path = Path("reports"),
    fmt: Optional[str] = None,
    seed_override: Optional[int] = None,
) -> int:
    """Run every scenario of a file and write the reports.

    Returns:
        0 if every scenario succeeded, 1 if any failed or a report could not be
        written, 2 if the file could not be read or parsed
    """
    fmt = fmt or setting("runner.format")
    try:
        scenario_file = load_scenarios(Path(config_path), seed_override)
    except (ConfigParse, IoFailure) as e:
        logger.error("cannot load %s: %s", config_path, e)
        print(f"✗ {config_path}: {e}", file=sys.stderr)
        return 2

    results = asyncio.run(run_scenarios(scenario_file.scenarios))
    try:
        written = write_outputs(results, Path(out_dir), fmt, Path(config_path))
    except IoFailure as e:
        logger.error("%s", e)
        print(f"✗ {e}", file=sys.stderr)
        return 1

    failed = [r.name for r in results if not r.ok]
    print(f"✓ Wrote {len(written)} files to {out_dir}")
    if failed:
        print(f"✗ {len(failed)} scenario(s) failed: {', '.join(failed)}", file=sys.stderr)
        return 1
    return 0


def validate(config_path: Path) -> int:
    """Parse and statically check a scenario file without computing anything."""
    try:
        scenario_file = load_scenarios(Path(config_path), check_dims=True)
    except (ConfigParse, IoFailure) as e:
        print(f"✗ {config_path}: {e}", file=sys.stderr)
        return 2
    print(f"✓ {config_path}: {len(scenario_file.scenarios)} scenario(s) valid")
    return 0
