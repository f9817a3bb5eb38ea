"""Flat JSON experiment configuration with strict validation."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields

from .analysis import DEFAULT_BOOTSTRAP, LIFETIME_LEVEL
from .decoder import DEFAULT_K
from .energy import BathSpec, DisorderSpec, InteractionSpec
from .kmc import DynamicsConfig
from .lattice import LatticeSpec

EXPERIMENTS = ("generate_lattice", "static_threshold", "dynamics", "walk", "bound", "decode")


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


@dataclass
class ExperimentConfig:
    experiment: str
    # lattice
    L: int = 16
    kind: str = "square"
    p_mix: float = 0.5
    lattice_seed: int = 0
    # bath
    bath: str = "ohmic"
    T: float = 1.0
    kappa1: float = 1.0
    gamma0: float = 1.0
    # onsite energies
    disorder: str = "none"
    sigma: float = 0.0
    P: float = 0.0
    J: float = 0.0
    # interaction
    A: float = 0.0
    alpha: float = 0.0
    N_max: int | None = None
    # static thresholds
    sizes: list = field(default_factory=list)
    f_grid: list = field(default_factory=lambda: [0.09, 0.10, 0.11, 0.12])
    n_instances: int = 100
    n_errors: int = 200
    sector: str = "Z"
    operator: str = "avg"
    # dynamics
    n_traj: int = 100
    t_min: float = 1e-2
    t_end: float = 100.0
    per_decade: int = 64
    lifetime_level: float = LIFETIME_LEVEL
    dynamic_instances: int | None = None
    # walks
    h: float = 1.0
    samples: int = 1
    t_max: float = 10.0
    n_times: int = 64
    spread_mode: str = "rms"
    # bound
    p_x_grid: list = field(default_factory=lambda: [0.02, 0.04, 0.0674, 0.08, 0.1, 0.110028, 0.13, 0.1640])
    # decode
    code_file: str | None = None
    error_file: str | None = None
    # shared
    k: int = DEFAULT_K
    bootstrap: int = DEFAULT_BOOTSTRAP
    master_seed: int = 0
    workers: int = 1
    output: str = "out"

    def __post_init__(self):
        self.validate()

    def validate(self):
        def need(cond, name, msg):
            if not cond:
                raise ConfigError(f"{name}: {msg} (got {getattr(self, name)!r})")

        need(self.experiment in EXPERIMENTS, "experiment", f"must be one of {EXPERIMENTS}")
        need(isinstance(self.L, int) and self.L >= 2, "L", "must be an integer >= 2")
        need(self.kind in ("square", "random"), "kind", "must be 'square' or 'random'")
        need(0.0 <= self.p_mix <= 1.0, "p_mix", "must lie in [0, 1]")
        if self.kind == "random":
            need(self.L % 2 == 0 and self.L >= 4, "L", "random lattices need an even L >= 4")
        need(self.bath in ("ohmic", "constant_rate"), "bath", "must be 'ohmic' or 'constant_rate'")
        need(self.T > 0, "T", "must be positive")
        need(self.kappa1 > 0, "kappa1", "must be positive")
        need(self.gamma0 > 0, "gamma0", "must be positive")
        need(self.disorder in ("none", "ising", "gaussian"), "disorder", "must be 'none', 'ising' or 'gaussian'")
        need(self.sigma >= 0, "sigma", "must be >= 0")
        need(-1.0 <= self.P <= 1.0, "P", "must lie in [-1, 1]")
        need(self.A >= 0, "A", "must be >= 0")
        need(0.0 <= self.alpha < 2.0, "alpha", "must lie in [0, 2)")
        need(self.N_max is None or (isinstance(self.N_max, int) and self.N_max >= 0), "N_max", "must be null or an integer >= 0")
        need(all(isinstance(s, int) and s >= 2 for s in self.sizes), "sizes", "must be integers >= 2")
        need(all(0.0 <= f < 0.5 for f in self.f_grid), "f_grid", "entries must lie in [0, 0.5)")
        need(list(self.f_grid) == sorted(self.f_grid), "f_grid", "must be increasing")
        need(self.n_instances >= 1, "n_instances", "must be >= 1")
        need(self.n_errors >= 1, "n_errors", "must be >= 1")
        need(self.sector in ("Z", "X"), "sector", "must be 'Z' or 'X'")
        need(self.operator in ("avg", "pooled", "Z1", "Z2"), "operator", "must be avg, pooled, Z1 or Z2")
        need(self.n_traj >= 1, "n_traj", "must be >= 1")
        need(0 < self.t_min < self.t_end, "t_min", "must satisfy 0 < t_min < t_end")
        need(self.per_decade >= 1, "per_decade", "must be >= 1")
        need(0.0 < self.lifetime_level < 1.0, "lifetime_level", "must lie in (0, 1)")
        need(self.dynamic_instances is None or self.dynamic_instances >= 1, "dynamic_instances", "must be null or >= 1")
        need(self.h > 0, "h", "must be positive")
        need(self.samples >= 1, "samples", "must be >= 1")
        need(self.t_max > 0, "t_max", "must be positive")
        need(self.n_times >= 3, "n_times", "must be >= 3")
        need(self.spread_mode in ("rms", "std"), "spread_mode", "must be 'rms' or 'std'")
        need(all(0.0 < p < 0.5 for p in self.p_x_grid), "p_x_grid", "entries must lie in (0, 0.5)")
        need(self.k >= 1, "k", "must be >= 1")
        need(self.bootstrap >= 1, "bootstrap", "must be >= 1")
        need(isinstance(self.master_seed, int) and 0 <= self.master_seed < 2 ** 64, "master_seed", "must be a 64-bit unsigned integer")
        need(self.workers >= 1, "workers", "must be >= 1")
        if self.experiment == "decode":
            need(self.code_file is not None, "code_file", "required for decode")
            need(self.error_file is not None, "error_file", "required for decode")

    # sub-specs -------------------------------------------------------------
    def lattice_spec(self, L=None):
        return LatticeSpec(L or self.L, self.kind, self.p_mix, self.lattice_seed)

    def bath_spec(self):
        return BathSpec(self.bath, self.T, self.kappa1, self.gamma0)

    def disorder_spec(self):
        return DisorderSpec(self.disorder, self.sigma, self.P, 0)

    def interaction_spec(self):
        return InteractionSpec(self.A, self.alpha, self.N_max)

    def dynamics_config(self, L=None):
        return DynamicsConfig(self.lattice_spec(L), self.bath_spec(), self.disorder_spec(),
                              self.interaction_spec(), self.J, self.k, self.dynamic_instances)

    def size_list(self):
        return list(self.sizes) if self.sizes else [self.L]

    # serialization ---------------------------------------------------------
    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)


_INT_FIELDS = {f.name for f in fields(ExperimentConfig) if f.type in ("int", "int | None")}


def parse_config(text, default_experiment=None, **overrides):
    """Parse a JSON document into a validated :class:`ExperimentConfig`.

    Unknown keys are rejected.  ``overrides`` (e.g. from command-line flags)
    replace document values when not None; ``default_experiment`` fills a
    missing ``experiment`` key.
    """
    try:
        doc = json.loads(text) if text.strip() else {}
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    doc.update({k: v for k, v in overrides.items() if v is not None})
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = sorted(set(doc) - known)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    if "experiment" not in doc and default_experiment is not None:
        doc["experiment"] = default_experiment
    if "experiment" not in doc:
        raise ConfigError("experiment: missing")
    for name in _INT_FIELDS & set(doc):
        v = doc[name]
        if isinstance(v, float) and v.is_integer():
            doc[name] = int(v)
    try:
        return ExperimentConfig(**doc)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
