import math
from dataclasses import asdict, dataclass, field, fields
from typing import Any, Optional

from analysis.errors import ConfigError

COMMANDS = ("cz", "weaknorm", "scatter", "sweep")
OPERATORS = ("M", "H", "Hsharp", "T", "Tr", "Mbeta")


def _index(value: Any) -> float:
    """Schatten indices come as numbers or the string "inf"."""
    if isinstance(value, str) and value.lower() in ("inf", "infinity", "operator"):
        return math.inf
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"Not a Schatten index: {value!r}")


def _build(cls, payload: Optional[dict], name: str):
    """Instantiates a config dataclass from a JSON object, rejecting unknown keys."""
    if payload is None:
        return cls()
    if not isinstance(payload, dict):
        raise ConfigError(f"Section '{name}' must be a JSON object.")
    known = {f.name for f in fields(cls)}
    unknown = set(payload) - known
    if unknown:
        raise ConfigError(f"Unknown keys in '{name}': {sorted(unknown)}")
    try:
        return cls(**payload)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"Invalid section '{name}': {e}")


@dataclass
class GeneratorSpec:
    # "measure", "random_model", "example_e1", "near_singular" or "remark"
    kind: str = "measure"
    atoms: int = 20
    rows: int = 2
    cols: int = 2
    support: float = 10.0
    dimension: int = 8
    channels: int = 3
    grid_n: int = 256
    coupling: float = 1.0


@dataclass
class GridSpec:
    half_width: float = 50.0
    count: int = 10_000

    def __post_init__(self):
        if self.half_width <= 0 or self.count < 2:
            raise ConfigError("Grid needs a positive half width and at least two nodes.")


@dataclass
class LadderSpec:
    lam: float = 0.5
    eps_max: float = 0.1
    eps_min: float = 0.01
    count: int = 10

    def epsilons(self) -> list[float]:
        if not 0 < self.eps_min < self.eps_max or self.count < 2:
            raise ConfigError("Ladder needs 0 < eps_min < eps_max and at least two rungs.")
        ratio = (self.eps_min / self.eps_max) ** (1.0 / (self.count - 1))
        return [self.eps_max * ratio ** k for k in range(self.count)]


@dataclass
class ExperimentConfig:
    """
    One run, as described by a JSON document. The seed and every tolerance
    are copied verbatim into the emitted summaries.
    """
    command: str
    seed: int = 0
    fixture: Optional[str] = None
    generator: GeneratorSpec = field(default_factory=GeneratorSpec)
    grid: GridSpec = field(default_factory=GridSpec)
    ladder: LadderSpec = field(default_factory=LadderSpec)
    c_x: float = math.pi ** 2
    p: float = math.inf
    q: Optional[int] = None
    levels: list[float] = field(default_factory=lambda: [1.0])
    operators: list[str] = field(default_factory=lambda: list(OPERATORS))
    beta: float = 0.5
    r_min: float = 0.1
    probe_depth: int = 6
    z_values: list[list[float]] = field(default_factory=lambda: [[0.0, 1.0]])
    times: list[float] = field(default_factory=list)
    ensemble: int = 1
    corollary_samples: int = 1000
    refine: list[int] = field(default_factory=list)
    threads: int = 1
    output_dir: str = "results"
    tolerances: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"Unknown command {self.command!r}; expected one of {COMMANDS}.")
        unknown = [op for op in self.operators if op not in OPERATORS]
        if unknown:
            raise ConfigError(f"Unknown maximal functions {unknown}; expected a subset of {OPERATORS}.")
        if any(s <= 0 for s in self.levels):
            raise ConfigError("Decomposition levels must be positive.")
        if not 0 < self.beta < 1:
            raise ConfigError(f"beta must lie in (0, 1), got {self.beta}.")
        if not self.r_min > 0:
            raise ConfigError(f"r_min must be positive, got {self.r_min}.")
        if self.corollary_samples < 1:
            raise ConfigError("corollary_samples must be at least 1.")
        if any(n < 2 for n in self.refine) or list(self.refine) != sorted(set(self.refine)):
            raise ConfigError("refine must list increasing grid sizes of at least 2.")
        if self.ensemble < 1 or self.threads < 1:
            raise ConfigError("ensemble and threads must be at least 1.")

    @classmethod
    def from_dict(cls, payload: dict, defaults: Optional[dict] = None) -> "ExperimentConfig":
        if not isinstance(payload, dict):
            raise ConfigError("Experiment config must be a JSON object.")
        data = dict(payload)
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"Unknown config keys: {sorted(unknown)}")
        if "command" not in data:
            raise ConfigError("Experiment config needs a 'command'.")
        data["generator"] = _build(GeneratorSpec, data.get("generator"), "generator")
        data["grid"] = _build(GridSpec, data.get("grid"), "grid")
        data["ladder"] = _build(LadderSpec, data.get("ladder"), "ladder")
        if "p" in data:
            data["p"] = _index(data["p"])
        data["tolerances"] = {**(defaults or {}), **data.get("tolerances", {})}
        try:
            return cls(**data)
        except TypeError as e:
            raise ConfigError(f"Invalid experiment config: {e}")

    def to_dict(self) -> dict:
        payload = asdict(self)
        payload["p"] = "inf" if math.isinf(self.p) else self.p
        return payload

    def z_points(self) -> list[complex]:
        try:
            return [complex(re, im) for re, im in self.z_values]
        except (TypeError, ValueError):
            raise ConfigError("z_values must be a list of [re, im] pairs.")


# --- Summaries ---

@dataclass
class OperatorAudit:
    operator: str
    quasinorm: float
    claimed_bound: float
    c_x: float
    minimal_feasible_c_x: Optional[float]
    passed: bool
    offset_applied: bool = False
    # ||mu||(R), or ||g||_{L^{1,inf}} for M_beta
    reference: float = 0.0


@dataclass
class LevelReport:
    s: float
    intervals: list[dict]
    checks: dict[str, bool]
    margins: dict[str, float]
    passed: bool


@dataclass
class RunOutcome:
    """What a handler hands back to the dispatcher."""
    command: str
    passed: bool
    summary: dict[str, Any]
    files: list[str] = field(default_factory=list)
    status: str = "ok"

    @property
    def exit_code(self) -> int:
        return 0 if self.passed else 1
