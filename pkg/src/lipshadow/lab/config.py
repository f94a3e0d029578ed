"""Experiment configuration stored as a flat TOML document."""
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Optional, Union

import tomli
import tomli_w

from ..errors import ContractError
from ..phase_space import SYSTEMS

KINDS = ("lipschitz", "mane", "gain", "replay", "limit")

# kind-dependent defaults for fields left unset
KIND_DEFAULTS = {
    "lipschitz": {"window": [300], "trials": 10},
    "mane": {"n": 30},
    "gain": {"window": [50, 100, 200], "trials": 20},
    "replay": {"n": 20, "trials": 5},
    "limit": {},
}


@dataclass
class ExperimentConfig:
    kind: str
    system: str
    seed: int
    params: dict = field(default_factory=dict)
    point: Optional[list] = None
    window: Optional[list] = None
    d_grid: list = field(default_factory=lambda: [1e-2, 1e-3, 1e-4, 1e-5, 1e-6])
    trials: Optional[int] = None
    noise: str = "uniform"
    n: Optional[int] = None
    L: float = 2.0
    d: Union[float, str] = "auto"
    n_grid: list = field(default_factory=lambda: [10, 20, 40])
    pattern: str = "periodic"
    period: int = 3
    amplitude: float = 0.9
    expect: str = "stable"
    out: str = "out"
    # verdict thresholds
    l_max: float = 2.0
    l_ratio_max: float = 1.5
    divergence_factor: float = 10.0
    divergence_rate: float = 0.3
    gain_max: float = 2.0
    gain_variation: float = 0.2
    growth_slope: float = 0.8
    defect_min: float = 1e-3
    limit_change: float = 1e-6
    residual_tol: float = 1e-8

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ContractError(f"unknown experiment kind {self.kind!r}; choose from {KINDS}")
        if self.system not in SYSTEMS:
            raise ContractError(f"unknown system {self.system!r}")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int):
            raise ContractError("seed must be an integer")
        if self.expect not in ("stable", "unstable"):
            raise ContractError("expect must be 'stable' or 'unstable'")
        if isinstance(self.d, str) and self.d != "auto":
            raise ContractError("d must be a number or 'auto'")
        for key, value in KIND_DEFAULTS[self.kind].items():
            if getattr(self, key) is None:
                setattr(self, key, list(value) if isinstance(value, list) else value)

    def to_dict(self):
        return {k: v for k, v in asdict(self).items() if v is not None}


def from_mapping(data):
    names = {f.name for f in fields(ExperimentConfig)}
    unknown = set(data) - names
    if unknown:
        raise ContractError(f"unknown config keys {sorted(unknown)}")
    if "seed" not in data:
        raise ContractError("seed is mandatory")
    return ExperimentConfig(**data)


def load_config(path):
    with open(path, "rb") as fh:
        return from_mapping(tomli.load(fh))


def dumps_config(config):
    return tomli_w.dumps(config.to_dict())


def dump_config(config, path):
    with open(path, "w") as fh:
        fh.write(dumps_config(config))


def merge(config, **overrides):
    """Copy of ``config`` with every non-None override applied."""
    return replace(config, **{k: v for k, v in overrides.items() if v is not None})
