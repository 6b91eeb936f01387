"""Pipeline configuration and presets."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .errors import ConfigError, ParameterError
from .features import Normalization
from .reservoir import DOPNET_SINGLE, SOLI_MULTI, SOLI_SINGLE, ReservoirSpec

__all__ = ["PipelineConfig", "PRESETS", "load_config", "READOUTS", "ARCHITECTURES", "PROTOCOLS"]

ARCHITECTURES = ("single", "multi")
READOUTS = ("rr_l", "rr_n", "svm", "rf")
PROTOCOLS = ("holdout_50_50", "kfold_10", "leave_one_subject_out", "leave_one_session_out")


@dataclass(frozen=True)
class PipelineConfig:
    architecture: str = "multi"
    reservoir: ReservoirSpec = SOLI_MULTI
    readout: str = "rr_n"
    ridge_lambda: float = 0.1
    svm_c: float = 10.0
    svm_gamma: float | str = "scale"
    svm_tolerance: float = 1e-3
    forest_trees: int = 300
    forest_min_samples_leaf: int = 1
    normalization: str = Normalization.PER_SAMPLE_MAX.value
    power: bool = False
    protocol: str = "holdout_50_50"
    folds: int = 10
    seed: int = 0
    reseed_per_fold: bool = False
    dataset: str | None = None
    output: str | None = None
    threads: int | None = None

    def __post_init__(self):
        if self.architecture not in ARCHITECTURES:
            raise ParameterError(f"architecture must be one of {ARCHITECTURES}, got {self.architecture!r}")
        if self.readout not in READOUTS:
            raise ParameterError(f"readout must be one of {READOUTS}, got {self.readout!r}")
        if self.protocol not in PROTOCOLS:
            raise ParameterError(f"protocol must be one of {PROTOCOLS}, got {self.protocol!r}")
        Normalization(self.normalization)
        if not self.ridge_lambda > 0:
            raise ParameterError("ridge_lambda must be > 0")
        if self.threads is not None and int(self.threads) < 1:
            raise ParameterError("threads must be >= 1")

    @property
    def name(self) -> str:
        arch = "SR" if self.architecture == "single" else "MR"
        return f"{arch}-{self.readout.upper()}"

    def with_(self, **changes) -> "PipelineConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["reservoir"] = self.reservoir.to_dict()
        return d

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict, base: "PipelineConfig | None" = None) -> "PipelineConfig":
        base = base or cls()
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known - {"preset"}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "preset" in d:
            base = PRESETS[d["preset"]] if d["preset"] in PRESETS else _bad_preset(d["preset"])
        changes = {k: v for k, v in d.items() if k in known}
        if "reservoir" in changes:
            res = changes["reservoir"]
            if isinstance(res, dict):
                merged = {**base.reservoir.to_dict(), **res}
                changes["reservoir"] = ReservoirSpec.from_dict(merged)
        try:
            return replace(base, **changes)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None


def _bad_preset(name):
    raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")


PRESETS = {
    "soli_sr": PipelineConfig(architecture="single", reservoir=SOLI_SINGLE, readout="rr_l"),
    "soli_mr": PipelineConfig(architecture="multi", reservoir=SOLI_MULTI, readout="rr_n"),
    "dopnet_sr": PipelineConfig(architecture="single", reservoir=DOPNET_SINGLE, readout="svm"),
}


def load_config(path) -> PipelineConfig:
    """Parse a JSON config file; errors carry the offending line number."""
    path = Path(path)
    try:
        text = path.read_text()
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}: {exc.msg}") from None
    if not isinstance(d, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return PipelineConfig.from_dict(d)
