"""Experiment configuration: one YAML file drives every command.

The file has five sections (model, graph, run, fluid, diagnostics) plus an
output directory and worker count.  Any scalar field can be overridden on
the command line with ``--set section.key=value``; values are parsed as
YAML, so lists work too.  Parsing is strict: unknown keys are rejected with
the offending name, and every precondition of the downstream modules is
checked here so commands fail before any run starts.

Defaults reproduce the headline experiment: the two-state contact rule on
a shuffled cycle (d = 2), N in {100, 1000, 4000}, horizon 10, one tenth of
the nodes initially infected.  Horizon and rate are package defaults, not
published values.
"""

from __future__ import annotations

import hashlib
import math
import os
from dataclasses import asdict, dataclass, field

import yaml

from .errors import ConfigError, InvalidModelError
from .model import ModelSpec, make_model, update_from_pairs

OUTPUT_ROOT_ENV = "SHUFFLESIM_OUT"


@dataclass
class ModelSection:
    K: int = 2
    rule: str | None = "sis"
    update: list | None = None
    gamma: list = field(default_factory=lambda: [[0.0, 1.0], [0.0, 0.0]])


@dataclass
class GraphSection:
    N: list = field(default_factory=lambda: [100, 1000, 4000])
    d: int = 2
    graph_seed: int = 1


@dataclass
class RunSection:
    T: float = 10.0
    seeds: int = 50
    base_seed: int = 42
    seed_list: list | None = None
    y0: list = field(default_factory=lambda: [0.1, 0.9])
    shuffle_on: str = "every_event"
    snapshot_stride: object = "auto"
    simulator: str = "optimized"


@dataclass
class FluidSection:
    step: float | None = None  # defaults to T/1000
    d: float | None = None     # defaults to the graph degree


@dataclass
class DiagnosticsSection:
    epsilons: list = field(default_factory=lambda: [0.1])
    trials: int = 20000
    confidence: float = 0.99
    gap_seeds: int = 100
    poisson_cases: list = field(
        default_factory=lambda: [[100, 2.0], [1000, 1.5], [1000000, 1.5]])
    poisson_trials: int = 100000
    aux_alpha: list = field(default_factory=lambda: [0.5, 0.5])
    aux_N: list = field(default_factory=lambda: [200, 400, 800])
    aux_epsilon: float = 0.05
    aux_pair: list = field(default_factory=lambda: [1, 2])
    martingale_N: list = field(default_factory=lambda: [100, 400, 1600])
    martingale_seeds: int = 200


@dataclass
class ExperimentConfig:
    model: ModelSection = field(default_factory=ModelSection)
    graph: GraphSection = field(default_factory=GraphSection)
    run: RunSection = field(default_factory=RunSection)
    fluid: FluidSection = field(default_factory=FluidSection)
    diagnostics: DiagnosticsSection = field(default_factory=DiagnosticsSection)
    output: str = "out"
    workers: int = 0  # 0 means use all available cores

    # -- derived accessors ------------------------------------------------

    def n_list(self) -> list[int]:
        n = self.graph.N
        return [int(v) for v in (n if isinstance(n, list) else [n])]

    def seed_indices(self) -> list[int]:
        if self.run.seed_list is not None:
            return [int(s) for s in self.run.seed_list]
        return list(range(int(self.run.seeds)))

    def fluid_step(self) -> float:
        return float(self.fluid.step) if self.fluid.step else self.run.T * 1e-3

    def fluid_degree(self) -> float:
        return float(self.fluid.d) if self.fluid.d else float(self.graph.d)

    def snapshot_stride_for(self, N: int) -> int:
        stride = self.run.snapshot_stride
        if stride == "auto":
            return 1 if N <= 1000 else math.ceil(N / 1000)
        return int(stride)

    def worker_count(self) -> int:
        return self.workers if self.workers > 0 else (os.cpu_count() or 1)

    def output_dir(self) -> str:
        if os.path.isabs(self.output):
            return self.output
        return os.path.join(os.environ.get(OUTPUT_ROOT_ENV, "."), self.output)

    def build_model(self) -> ModelSpec:
        m = self.model
        try:
            if m.rule is not None:
                return make_model(m.K, m.gamma, rule=m.rule)
            return make_model(m.K, m.gamma,
                              update=update_from_pairs(m.K, m.update or []))
        except InvalidModelError as exc:
            raise ConfigError(f"model: {exc}") from exc

    def to_dict(self) -> dict:
        return asdict(self)


# ---------------------------------------------------------------------------
# parsing and validation
# ---------------------------------------------------------------------------

_SECTIONS = {
    "model": ModelSection,
    "graph": GraphSection,
    "run": RunSection,
    "fluid": FluidSection,
    "diagnostics": DiagnosticsSection,
}


def config_from_dict(data: dict) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    cfg = ExperimentConfig()
    for key, value in data.items():
        if key in _SECTIONS:
            section_cls = _SECTIONS[key]
            section = getattr(cfg, key)
            if not isinstance(value, dict):
                raise ConfigError(f"section {key!r} must be a mapping")
            for k, v in value.items():
                if k not in section_cls.__dataclass_fields__:
                    raise ConfigError(f"unknown field {key}.{k}")
                setattr(section, k, v)
        elif key == "output":
            cfg.output = str(value)
        elif key == "workers":
            cfg.workers = int(value)
        else:
            raise ConfigError(f"unknown top-level field {key!r}")
    validate_config(cfg)
    return cfg


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = yaml.safe_load(fh) or {}
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML: {exc}") from exc
    return config_from_dict(data)


def save_config(cfg: ExperimentConfig, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(canonical_yaml(cfg))


def canonical_yaml(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=True,
                          default_flow_style=False)


def config_hash(cfg: ExperimentConfig) -> str:
    return hashlib.sha256(canonical_yaml(cfg).encode("utf-8")).hexdigest()


def apply_overrides(data: dict, overrides: list[str]) -> dict:
    """Apply 'section.key=value' strings onto a raw config mapping."""
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        dotted, _, raw = item.partition("=")
        try:
            value = yaml.safe_load(raw)
        except yaml.YAMLError as exc:
            raise ConfigError(f"override value {raw!r} is not valid YAML: {exc}")
        parts = dotted.strip().split(".")
        if len(parts) == 1:
            data[parts[0]] = value
        elif len(parts) == 2:
            data.setdefault(parts[0], {})
            if not isinstance(data[parts[0]], dict):
                raise ConfigError(f"cannot set {dotted}: {parts[0]} is not a section")
            data[parts[0]][parts[1]] = value
        else:
            raise ConfigError(f"override key {dotted!r} nests too deep")
    return data


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ConfigError(message)


def _increasing(values) -> bool:
    return all(b > a for a, b in zip(values, values[1:]))


def validate_config(cfg: ExperimentConfig) -> None:
    m, g, r, f, dg = cfg.model, cfg.graph, cfg.run, cfg.fluid, cfg.diagnostics
    _require(isinstance(m.K, int) and m.K >= 1, "model.K must be a positive integer")
    if m.rule is not None:
        _require(m.update is None,
                 "model: give either rule or update, not both")
    else:
        _require(m.update is not None, "model: needs rule or update table")
    cfg.build_model()  # raises ConfigError with details if invalid

    n_list = cfg.n_list()
    _require(len(n_list) >= 1, "graph.N must list at least one size")
    _require(all(isinstance(n, int) and n >= 2 and n % 2 == 0 for n in n_list),
             "graph.N entries must be even integers >= 2")
    _require(_increasing(n_list), "graph.N must be strictly increasing")
    _require(isinstance(g.d, int) and 1 <= g.d <= min(n_list) // 2,
             f"graph.d must satisfy 1 <= d <= min(N)/2 = {min(n_list) // 2}")
    _require(0 <= int(g.graph_seed) < 2**64, "graph.graph_seed must be a 64-bit integer")

    _require(r.T > 0, "run.T must be positive")
    _require(len(cfg.seed_indices()) >= 1, "run needs at least one seed")
    _require(all(s >= 0 for s in cfg.seed_indices()), "run seed indices must be >= 0")
    _require(0 <= int(r.base_seed) < 2**64, "run.base_seed must be a 64-bit integer")
    _require(len(r.y0) == m.K, f"run.y0 must have K={m.K} entries")
    _require(min(r.y0) >= 0 and abs(sum(r.y0) - 1.0) <= 1e-9,
             "run.y0 must be a probability vector")
    _require(r.shuffle_on in ("every_event", "state_change"),
             "run.shuffle_on must be every_event or state_change")
    if r.snapshot_stride != "auto":
        _require(isinstance(r.snapshot_stride, int) and r.snapshot_stride >= 1,
                 "run.snapshot_stride must be 'auto' or an integer >= 1")
    _require(r.simulator in ("optimized", "naive"),
             "run.simulator must be optimized or naive")

    if f.step is not None:
        _require(f.step > 0, "fluid.step must be positive")
    if f.d is not None:
        _require(f.d > 0, "fluid.d must be positive")

    _require(len(dg.epsilons) >= 1 and min(dg.epsilons) > 0,
             "diagnostics.epsilons must be positive")
    _require(dg.trials >= 1, "diagnostics.trials must be >= 1")
    _require(0 < dg.confidence < 1, "diagnostics.confidence must be in (0, 1)")
    _require(dg.gap_seeds >= 1, "diagnostics.gap_seeds must be >= 1")
    for case in dg.poisson_cases:
        _require(len(case) == 2, "diagnostics.poisson_cases entries are [N, alpha]")
        n, alpha = case
        _require(int(n) >= 1, "diagnostics.poisson_cases: N must be >= 1")
        _require(float(alpha) > 1.0,
                 f"diagnostics.poisson_cases: alpha must exceed 1, got {alpha}")
    _require(dg.poisson_trials >= 1, "diagnostics.poisson_trials must be >= 1")
    _require(len(dg.aux_alpha) == m.K and min(dg.aux_alpha) >= 0
             and abs(sum(dg.aux_alpha) - 1.0) <= 1e-9,
             "diagnostics.aux_alpha must be a probability vector of length K")
    _require(_increasing(dg.aux_N) and all(n % 2 == 0 for n in dg.aux_N),
             "diagnostics.aux_N must be strictly increasing even integers")
    _require(len(dg.aux_pair) == 2
             and all(1 <= p <= m.K for p in dg.aux_pair)
             and dg.aux_pair[0] != dg.aux_pair[1],
             "diagnostics.aux_pair must be two distinct 1-based states")
    _require(dg.aux_epsilon > 0, "diagnostics.aux_epsilon must be positive")
    _require(_increasing(dg.martingale_N)
             and all(n % 2 == 0 for n in dg.martingale_N),
             "diagnostics.martingale_N must be strictly increasing even integers")
    _require(dg.martingale_seeds >= 2, "diagnostics.martingale_seeds must be >= 2")
    _require(cfg.workers >= 0, "workers must be >= 0")
