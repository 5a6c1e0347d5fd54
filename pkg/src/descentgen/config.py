"""Run configuration (YAML) shared by the command-line stages."""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import yaml

from .errors import SpecInvalidError
from .latent import MODEL_KINDS, FlowConfig, GmmConfig
from .physics import ESF_MODES, AircraftConfig

DEFAULT_SWEEP = (0.5, 0.6, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95)


@dataclass(frozen=True)
class SynthSettings:
    n_trajectories: int = 1500
    noise_ias: float = 0.5
    noise_rocd: float = 0.25
    complete_frac: float = 0.6
    max_truncation: float = 0.6
    bimodal: bool = True
    top_fl: float | None = None


@dataclass(frozen=True)
class RunConfig:
    aircraft: str = "configs/B738.yaml"
    dataset: str = "out/blips.csv"
    out: str = "out"
    seed: int = 0
    explained_variance: float = 0.8
    model: str = "gmm"
    count: int = 10000
    coverage_frac: float = 0.25
    esf_mode: str | None = None  # None keeps the aircraft file's setting
    min_rocd_fpm: float = 500.0
    const_run: int = 10
    const_tol_fpm: float = 25.0
    train_frac: float = 0.8
    folds: int = 5
    sweep_variances: tuple = DEFAULT_SWEEP
    sweep_count: int = 1000
    synth: SynthSettings = field(default_factory=SynthSettings)
    gmm: GmmConfig = field(default_factory=GmmConfig)
    nf: FlowConfig = field(default_factory=FlowConfig)
    base_dir: str = "."  # directory relative paths are resolved against

    def __post_init__(self):
        if not 0.0 < self.explained_variance <= 1.0:
            raise SpecInvalidError("explained_variance must lie in (0, 1]")
        if self.count < 1 or self.sweep_count < 1:
            raise SpecInvalidError("generation counts must be at least 1")
        if self.model not in MODEL_KINDS:
            raise SpecInvalidError(f"model must be one of {MODEL_KINDS}")
        if self.esf_mode is not None and self.esf_mode not in ESF_MODES:
            raise SpecInvalidError(f"esf_mode must be one of {ESF_MODES}")
        if not 0.0 < self.coverage_frac <= 1.0 or not 0.0 < self.train_frac < 1.0:
            raise SpecInvalidError("coverage_frac and train_frac must be fractions")
        if any(not 0.0 < v <= 1.0 for v in self.sweep_variances):
            raise SpecInvalidError("sweep variances must lie in (0, 1]")

    def path(self, name: str) -> Path:
        p = Path(getattr(self, name))
        return p if p.is_absolute() else Path(self.base_dir) / p

    def aircraft_config(self) -> AircraftConfig:
        try:
            raw = yaml.safe_load(self.path("aircraft").read_text())
        except OSError as exc:
            raise SpecInvalidError(f"cannot read aircraft config: {exc}") from None
        if self.esf_mode is not None:
            raw["esf_mode"] = self.esf_mode
        try:
            return AircraftConfig.from_dict(raw)
        except (KeyError, TypeError, ValueError) as exc:
            raise SpecInvalidError(f"invalid aircraft config: {exc}") from None

    def with_overrides(self, **kw) -> "RunConfig":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})


_NESTED = {"synth": SynthSettings, "gmm": GmmConfig, "nf": FlowConfig}


def run_config_from_dict(d: dict, base_dir=".") -> RunConfig:
    d = dict(d or {})
    known = {f.name for f in fields(RunConfig)}
    unknown = set(d) - known
    if unknown:
        raise SpecInvalidError(f"unknown config keys: {sorted(unknown)}")
    try:
        for key, cls in _NESTED.items():
            if key in d:
                d[key] = cls(**(d[key] or {}))
        if "sweep_variances" in d:
            d["sweep_variances"] = tuple(float(v) for v in d["sweep_variances"])
    except TypeError as exc:
        raise SpecInvalidError(f"invalid config section: {exc}") from None
    d.setdefault("base_dir", str(base_dir))
    return RunConfig(**d)


def load_run_config(path) -> RunConfig:
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise SpecInvalidError(f"cannot read run config {path}: {exc}") from None
    if raw is not None and not isinstance(raw, dict):
        raise SpecInvalidError("run config must be a mapping")
    return run_config_from_dict(raw, base_dir=path.parent)
