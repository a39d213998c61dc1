"""Scenario files: strict parsing, validation and operator/state generators."""
import copy
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Annotated, Any, Literal, Optional, Union

import numpy as np
import yaml
from pydantic import (
    BaseModel,
    BeforeValidator,
    ConfigDict,
    Field,
    ValidationError,
    ValidationInfo,
    field_validator,
)

from ..errors import ConfigParse, DimensionMismatch, EmptySpan, IoFailure
from ..utils.log import get_logger
from ..utils.serialization import content_hash
from .dynamics import DisorderSpec
from .family import CRITERIA, StateFamily
from .favard import TargetFunction
from .linalg import HermitianOperator, StateVector, as_state, assert_hermitian, eig_hermitian_dense

logger = get_logger(__name__)

SCHEMA_VERSION = 1
MODES = ("duality", "hhl", "dynamics", "family", "disorder")
OPERATOR_KINDS = ("dense", "diagonal", "tight_binding", "random_hermitian", "logspace_diagonal")
STATE_KINDS = ("basis_index", "amplitudes", "uniform", "random", "spectral_window")


def _number(value: Any) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValueError("expected a number")
    if not np.isfinite(value):
        raise ValueError("must be finite")
    return float(value)


def _integer(value: Any) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValueError("expected an integer")
    return value


def _complex(value: Any) -> complex:
    """A real number or an [re, im] pair."""
    if isinstance(value, list):
        if len(value) != 2:
            raise ValueError("complex scalars are [re, im] pairs")
        return complex(_number(value[0]), _number(value[1]))
    return complex(_number(value))


Number = Annotated[float, BeforeValidator(_number)]
NonNegative = Annotated[float, BeforeValidator(_number), Field(ge=0.0)]
Positive = Annotated[float, BeforeValidator(_number), Field(gt=0.0)]
Index = Annotated[int, BeforeValidator(_integer), Field(ge=0)]
Count = Annotated[int, BeforeValidator(_integer), Field(ge=1)]
Complex = Annotated[complex, BeforeValidator(_complex)]


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class _Spec(_Model):
    def params(self) -> dict:
        return self.model_dump(exclude={"kind"}, exclude_none=True)


class DenseOperator(_Spec):
    kind: Literal["dense"]
    entries: list[list[Complex]] = Field(min_length=1)


class DiagonalOperator(_Spec):
    kind: Literal["diagonal"]
    values: list[Number] = Field(min_length=1)


class TightBindingOperator(_Spec):
    kind: Literal["tight_binding"]
    m: Count
    a: list[Number]
    b: list[Number]


class RandomHermitianOperator(_Spec):
    kind: Literal["random_hermitian"]
    dim: Count
    seed: Index


class LogspaceDiagonalOperator(_Spec):
    kind: Literal["logspace_diagonal"]
    dim: Count
    min: Positive
    max: Positive


OperatorModel = Annotated[
    Union[
        DenseOperator,
        DiagonalOperator,
        TightBindingOperator,
        RandomHermitianOperator,
        LogspaceDiagonalOperator,
    ],
    Field(discriminator="kind"),
]


class BasisIndexState(_Spec):
    kind: Literal["basis_index"]
    index: Index


class AmplitudesState(_Spec):
    kind: Literal["amplitudes"]
    values: list[Complex]


class UniformState(_Spec):
    kind: Literal["uniform"]
    indices: Optional[Annotated[list[Index], Field(min_length=1)]] = None


class RandomState(_Spec):
    kind: Literal["random"]
    seed: Index


class SpectralWindowState(_Spec):
    kind: Literal["spectral_window"]
    lo: Number
    hi: Number

    @field_validator("hi")
    @classmethod
    def _ordered(cls, hi: float, info: ValidationInfo) -> float:
        if "lo" in info.data and hi < info.data["lo"]:
            raise ValueError("window needs lo <= hi")
        return hi


StateModel = Annotated[
    Union[BasisIndexState, AmplitudesState, UniformState, RandomState, SpectralWindowState],
    Field(discriminator="kind"),
]


class InverseFunction(_Model):
    kind: Literal["inverse"]

    def build(self) -> TargetFunction:
        return TargetFunction.inverse()


class TimeEvolutionFunction(_Model):
    kind: Literal["time_evolution"]
    t: Number

    def build(self) -> TargetFunction:
        return TargetFunction.time_evolution(self.t)


class GaussianFilterFunction(_Model):
    kind: Literal["gaussian_filter"]
    center: Number
    width: Positive

    def build(self) -> TargetFunction:
        return TargetFunction.gaussian_filter(self.center, self.width)


class StepFilterFunction(_Model):
    kind: Literal["step_filter"]
    threshold: Number

    def build(self) -> TargetFunction:
        return TargetFunction.step_filter(self.threshold)


class MonomialFunction(_Model):
    kind: Literal["monomial"]
    k: Index

    def build(self) -> TargetFunction:
        return TargetFunction.monomial(self.k)


class TabulatedFunction(_Model):
    kind: Literal["tabulated"]
    values: list[Complex]
    nodes: Optional[list[Number]] = None

    @field_validator("nodes")
    @classmethod
    def _one_node_per_value(cls, nodes, info: ValidationInfo):
        if nodes is not None and "values" in info.data and len(nodes) != len(info.data["values"]):
            raise ValueError("nodes and values differ in length")
        return nodes

    def build(self) -> TargetFunction:
        return TargetFunction.tabulated(self.values, self.nodes)


class RandomTabulatedFunction(_Model):
    kind: Literal["random_tabulated"]
    seed: Index

    def build(self) -> TargetFunction:
        return TargetFunction.random_tabulated(self.seed)


FunctionModel = Annotated[
    Union[
        InverseFunction,
        TimeEvolutionFunction,
        GaussianFilterFunction,
        StepFilterFunction,
        MonomialFunction,
        TabulatedFunction,
        RandomTabulatedFunction,
    ],
    Field(discriminator="kind"),
]


class TimeGrid(_Model):
    start: Number
    stop: Number
    num: Count


class DisorderModel(_Model):
    strength_a: NonNegative = 0.0
    strength_b: NonNegative = 0.0
    seed: Index = 0


class CorrelatorModel(_Model):
    observables: list[OperatorModel] = Field(min_length=1)
    times: list[Number]

    @field_validator("times")
    @classmethod
    def _one_time_per_observable(cls, times, info: ValidationInfo):
        if "observables" in info.data and len(times) != len(info.data["observables"]):
            raise ValueError("one time per observable")
        return times


class PerturbationModel(_Model):
    target: Literal["state", "operator"]
    strength: NonNegative
    seed: Index = 0


class _ScenarioModel(_Model):
    name: str
    operator: OperatorModel
    epsilon: NonNegative = 0.0

    @field_validator("name")
    @classmethod
    def _file_name_safe(cls, name: str) -> str:
        if not name or any(c in name for c in "/\\") or name.startswith("."):
            raise ValueError("name must be a nonempty file-name-safe string")
        return name


class DualityScenario(_ScenarioModel):
    mode: Literal["duality"]
    state: StateModel
    function: FunctionModel


class HhlScenario(_ScenarioModel):
    mode: Literal["hhl"]
    state: StateModel
    function: Optional[FunctionModel] = None


class DynamicsScenario(_ScenarioModel):
    mode: Literal["dynamics"]
    state: StateModel
    t_grid: TimeGrid
    correlator: Optional[CorrelatorModel] = None
    perturbation: Optional[PerturbationModel] = None


class FamilyScenario(_ScenarioModel):
    mode: Literal["family"]
    family: list[StateModel] = Field(min_length=1)
    function: FunctionModel
    criterion: str = "max_state"

    @field_validator("criterion")
    @classmethod
    def _known_criterion(cls, criterion: str) -> str:
        if criterion not in CRITERIA:
            raise ValueError(f"unknown value {criterion!r}, expected one of {list(CRITERIA)}")
        return criterion


class DisorderScenario(_ScenarioModel):
    mode: Literal["disorder"]
    state: StateModel
    t_grid: TimeGrid
    disorder: DisorderModel
    window: Optional[tuple[Number, Number]] = None

    @field_validator("window")
    @classmethod
    def _ordered(cls, window):
        if window is not None and window[0] > window[1]:
            raise ValueError("expected [lo, hi] with lo <= hi")
        return window


ScenarioModel = Annotated[
    Union[DualityScenario, HhlScenario, DynamicsScenario, FamilyScenario, DisorderScenario],
    Field(discriminator="mode"),
]


class ScenarioDocument(_Model):
    """Top level of a scenario file."""

    schema_version: Annotated[int, BeforeValidator(_integer)]
    scenarios: list[ScenarioModel] = Field(min_length=1)

    @field_validator("schema_version")
    @classmethod
    def _supported(cls, version: int) -> int:
        if version != SCHEMA_VERSION:
            raise ValueError(f"unsupported schema version {version}")
        return version


def _field_path(data: Any, loc: tuple) -> str:
    """Dotted path of a pydantic error location, with union tags dropped.

    A tagged union puts the tag value right after the object it selected;
    it is recognized by matching the object's own ``kind`` or ``mode``.
    """
    path = ""
    node = data
    fresh = True
    for part in loc:
        if isinstance(part, int):
            path += f"[{part}]"
            node = node[part] if isinstance(node, list) and 0 <= part < len(node) else None
            fresh = True
            continue
        if fresh and isinstance(node, dict) and part in (node.get("kind"), node.get("mode")):
            fresh = False
            continue
        path = f"{path}.{part}" if path else str(part)
        node = node.get(part) if isinstance(node, dict) else None
        fresh = True
    return path


def _config_error(data: Any, error: ValidationError) -> ConfigParse:
    errors = error.errors()
    # Stray fields are reported only when nothing else is wrong.
    first = next((e for e in errors if e["type"] != "extra_forbidden"), errors[0])
    path = _field_path(data, first["loc"])
    if first["type"] in ("union_tag_invalid", "union_tag_not_found"):
        tag = str(first.get("ctx", {}).get("discriminator", "kind")).strip("'")
        path = f"{path}.{tag}" if path else tag
    message = "missing required field" if first["type"] == "missing" else first["msg"]
    return ConfigParse(path, message)


@dataclass(frozen=True)
class OperatorSpec:
    """Inline matrix or built-in generator for H."""

    kind: str
    params: dict

    @property
    def dim(self) -> int:
        p = self.params
        match self.kind:
            case "dense":
                return len(p["entries"])
            case "diagonal":
                return len(p["values"])
            case "tight_binding":
                return p["m"]
            case _:
                return p["dim"]

    def check(self, path: str) -> None:
        """Static shape checks."""
        p = self.params
        if self.kind == "dense":
            for i, row in enumerate(p["entries"]):
                if len(row) != self.dim:
                    raise DimensionMismatch(
                        f"{path}.entries[{i}] has {len(row)} entries, expected {self.dim}"
                    )
        elif self.kind == "tight_binding":
            if len(p["a"]) != p["m"] or len(p["b"]) != p["m"] - 1:
                raise DimensionMismatch(
                    f"{path}: tight_binding with m={p['m']} needs "
                    f"{p['m']} a and {p['m'] - 1} b values"
                )

    def build(self) -> HermitianOperator:
        p = self.params
        self.check("operator")
        match self.kind:
            case "dense":
                return assert_hermitian(np.array(p["entries"], dtype=np.complex128))
            case "diagonal":
                return assert_hermitian(np.diag(p["values"]))
            case "tight_binding":
                return assert_hermitian(
                    np.diag(p["a"]) + np.diag(p["b"], 1) + np.diag(p["b"], -1)
                )
            case "random_hermitian":
                rng = np.random.default_rng(p["seed"])
                dim = p["dim"]
                X = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
                return assert_hermitian(0.5 * (X + X.conj().T))
            case "logspace_diagonal":
                values = np.logspace(np.log10(p["min"]), np.log10(p["max"]), p["dim"])
                return assert_hermitian(np.diag(values))
        raise ValueError(f"unknown operator kind {self.kind}")


@dataclass(frozen=True)
class StateSpec:
    """Inline amplitudes or built-in generator for an initial state."""

    kind: str
    params: dict

    @property
    def dim(self) -> Optional[int]:
        """Dimension fixed by inline amplitudes, if any."""
        if self.kind == "amplitudes":
            return len(self.params["values"])
        return None

    def check(self, dim: int, path: str) -> None:
        p = self.params
        if self.kind == "amplitudes" and len(p["values"]) != dim:
            raise DimensionMismatch(f"{path}: {len(p['values'])} amplitudes for dimension {dim}")
        if self.kind == "basis_index" and p["index"] >= dim:
            raise DimensionMismatch(f"{path}.index {p['index']} outside dimension {dim}")
        if self.kind == "uniform" and p.get("indices") and max(p["indices"]) >= dim:
            raise DimensionMismatch(f"{path}.indices reach {max(p['indices'])}, dimension is {dim}")

    def build(self, H: HermitianOperator) -> StateVector:
        p = self.params
        self.check(H.dim, "state")
        match self.kind:
            case "basis_index":
                psi = np.zeros(H.dim, dtype=np.complex128)
                psi[p["index"]] = 1.0
            case "amplitudes":
                psi = np.array(p["values"], dtype=np.complex128)
            case "uniform":
                psi = np.zeros(H.dim, dtype=np.complex128)
                psi[p["indices"] if p.get("indices") else slice(None)] = 1.0
            case "random":
                rng = np.random.default_rng(p["seed"])
                psi = rng.standard_normal(H.dim) + 1j * rng.standard_normal(H.dim)
            case "spectral_window":
                eigenvalues, U = eig_hermitian_dense(H)
                inside = (eigenvalues >= p["lo"]) & (eigenvalues <= p["hi"])
                if not np.any(inside):
                    raise EmptySpan(f"no eigenvalue inside [{p['lo']}, {p['hi']}]")
                psi = U[:, inside].sum(axis=1)
            case _:
                raise ValueError(f"unknown state kind {self.kind}")
        return as_state(psi)


@dataclass(frozen=True)
class CorrelatorSpec:
    observables: tuple[OperatorSpec, ...]
    times: tuple[float, ...]


@dataclass(frozen=True)
class PerturbationSpec:
    target: str
    strength: float
    seed: int


@dataclass(frozen=True, eq=False)
class ScenarioConfig:
    """One fully parsed scenario."""

    name: str
    mode: str
    operator: OperatorSpec
    state: Optional[StateSpec]
    function: Optional[TargetFunction]
    epsilon: float
    t_grid: Optional[tuple[float, float, int]] = None
    family: tuple[StateSpec, ...] = ()
    criterion: str = "max_state"
    disorder: Optional[DisorderSpec] = None
    window: Optional[tuple[float, float]] = None
    correlator: Optional[CorrelatorSpec] = None
    perturbation: Optional[PerturbationSpec] = None
    config_hash: str = ""
    raw: dict = field(default_factory=dict)

    def times(self) -> np.ndarray:
        start, stop, num = self.t_grid
        return np.linspace(start, stop, num)

    def build_family(self, H: HermitianOperator) -> StateFamily:
        return StateFamily(tuple(spec.build(H) for spec in self.family))

    def check_dims(self) -> None:
        """Raise DimensionMismatch for inconsistent dimensions known without computing."""
        self.operator.check("operator")
        dim = self.operator.dim
        if self.state is not None:
            self.state.check(dim, "state")
        for i, spec in enumerate(self.family):
            spec.check(dim, f"family[{i}]")
        if self.correlator is not None:
            for i, spec in enumerate(self.correlator.observables):
                spec.check(f"correlator.observables[{i}]")
                if spec.dim != dim:
                    raise DimensionMismatch(
                        f"correlator.observables[{i}] has dimension {spec.dim}, operator has {dim}"
                    )


@dataclass(frozen=True, eq=False)
class ScenarioFile:
    path: Path
    schema_version: int
    scenarios: tuple[ScenarioConfig, ...]


def _operator_spec(model: Any) -> OperatorSpec:
    return OperatorSpec(model.kind, model.params())


def _state_spec(model: Any) -> StateSpec:
    return StateSpec(model.kind, model.params())


def _to_config(model: Any, raw: dict, path: str) -> ScenarioConfig:
    """Turn a validated scenario model into the runtime configuration."""
    fields: dict[str, Any] = {}
    state = getattr(model, "state", None)
    function = getattr(model, "function", None)
    match model:
        case HhlScenario():
            if function is not None and function.kind != "inverse":
                raise ConfigParse(f"{path}.function.kind", "hhl mode only takes the inverse")
            function = InverseFunction(kind="inverse")
        case DynamicsScenario():
            fields["t_grid"] = (model.t_grid.start, model.t_grid.stop, model.t_grid.num)
            if model.correlator is not None:
                fields["correlator"] = CorrelatorSpec(
                    tuple(_operator_spec(obs) for obs in model.correlator.observables),
                    tuple(model.correlator.times),
                )
            if model.perturbation is not None:
                p = model.perturbation
                fields["perturbation"] = PerturbationSpec(p.target, p.strength, p.seed)
        case FamilyScenario():
            fields["family"] = tuple(_state_spec(member) for member in model.family)
            fields["criterion"] = model.criterion
        case DisorderScenario():
            fields["t_grid"] = (model.t_grid.start, model.t_grid.stop, model.t_grid.num)
            d = model.disorder
            fields["disorder"] = DisorderSpec(d.strength_a, d.strength_b, d.seed)
            fields["window"] = model.window
    return ScenarioConfig(
        name=model.name,
        mode=model.mode,
        operator=_operator_spec(model.operator),
        state=_state_spec(state) if state is not None else None,
        function=function.build() if function is not None else None,
        epsilon=model.epsilon,
        config_hash=content_hash(raw),
        raw=raw,
        **fields,
    )


def override_seeds(data: Any, seed: int) -> Any:
    """Copy of the document with every ``seed`` field set to ``seed``."""
    if isinstance(data, dict):
        return {k: seed if k == "seed" else override_seeds(v, seed) for k, v in data.items()}
    if isinstance(data, list):
        return [override_seeds(v, seed) for v in data]
    return data


def parse_scenarios(
    data: Any,
    path: Path = Path("<memory>"),
    seed_override: Optional[int] = None,
    check_dims: bool = False,
) -> ScenarioFile:
    """Parse a loaded scenario document.

    Raises:
        ConfigParse: On any schema violation (and, with check_dims, on a static
            dimension mismatch), carrying the offending field path
    """
    data = copy.deepcopy(data)
    if seed_override is not None:
        data = override_seeds(data, seed_override)
    try:
        document = ScenarioDocument.model_validate(data)
    except ValidationError as e:
        raise _config_error(data, e) from e

    scenarios = tuple(
        _to_config(model, data["scenarios"][i], f"scenarios[{i}]")
        for i, model in enumerate(document.scenarios)
    )
    names = [s.name for s in scenarios]
    for i, name in enumerate(names):
        if name in names[:i]:
            raise ConfigParse(f"scenarios[{i}].name", f"duplicate scenario name {name!r}")

    if check_dims:
        for i, scenario in enumerate(scenarios):
            try:
                scenario.check_dims()
            except DimensionMismatch as e:
                raise ConfigParse(f"scenarios[{i}]", str(e)) from e
    return ScenarioFile(path=path, schema_version=document.schema_version, scenarios=scenarios)


def read_document(path: Path) -> Any:
    """Load a JSON or YAML scenario file.

    Raises:
        IoFailure: If the file cannot be read
        ConfigParse: If the text is not valid JSON/YAML (with line and column)
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise IoFailure(f"cannot read {path}: {e}") from e

    if path.suffix in (".yaml", ".yml"):
        try:
            return yaml.safe_load(text)
        except yaml.YAMLError as e:
            mark = getattr(e, "problem_mark", None)
            where = f"line {mark.line + 1}, column {mark.column + 1}" if mark else "document"
            raise ConfigParse(where, str(getattr(e, "problem", e))) from e
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigParse(f"line {e.lineno}, column {e.colno}", e.msg) from e


def load_scenarios(
    path: Path, seed_override: Optional[int] = None, check_dims: bool = False
) -> ScenarioFile:
    """Read and parse a scenario file."""
    scenario_file = parse_scenarios(read_document(path), Path(path), seed_override, check_dims)
    logger.debug("loaded %d scenarios from %s", len(scenario_file.scenarios), path)
    return scenario_file
