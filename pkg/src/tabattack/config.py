"""Experiment configuration: one YAML document per run.

Seeds are never written per component. Every stochastic step draws from a
named substream of ``master_seed`` (see :func:`ExperimentConfig.seed`).
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from ._seeding import derive_seed
from .attack import AttackConfig
from .errors import ConfigError
from .models import ForestConfig, MlpConfig
from .vaegen import VaeParams

SUBSTREAMS = ("data", "model", "shap", "attack", "vae")
DEFAULT_K_VALUES = (0, 10, 50, 100, 200, 400, 500)


@dataclass
class DataSection:
    source: str = "synth"  # "synth" or "csv"
    path: str | None = None
    label_column: str = "label"
    positive_label: str | None = None
    n_samples: int = 5000
    n_features: int = 500
    overlap: float = 0.5
    separation: float = 8.0
    informative_fraction: float = 0.2
    train_ratio: float = 0.67


@dataclass
class ModelSection:
    kind: str = "forest"  # "forest" or "mlp"
    n_estimators: int = 100
    max_depth: int | None = None
    max_features: str = "sqrt"
    hidden_widths: tuple[int, ...] = (32,)
    learning_rate: float = 1e-3
    epochs: int = 30
    batch_size: int = 32
    optimizer: str = "adam"


@dataclass
class AttackSection:
    method: str = "main"  # "main" or "brute"
    k_features: int = 100
    p: float = 2.0
    n_interp: int = 10
    interp_position: int | None = None
    endpoint_mode: str = "FPFN"
    shap_mode: str = "global"
    n_permutations: int = 10
    n_probe: int = 10
    n_background: int = 16
    threshold: float = 0.5


@dataclass
class SweepSection:
    k_values: tuple[int, ...] = DEFAULT_K_VALUES
    methods: tuple[str, ...] = ("main", "brute")
    n_rows: int | None = 1000


@dataclass
class VaeSection:
    latent_dim: int = 500
    widths: tuple[int, ...] = (2100, 1600, 1200, 800, 512)
    desk_scale: bool = True
    epochs: int = 200
    learning_rate: float = 0.005
    batch_size: int = 64
    reconstruction: str = "sum"
    n_generate: int = 100
    n_interp: int = 100
    position: int | None = None


@dataclass
class DetectSection:
    threshold: float = 0.5
    mode: str = "2d"
    images: bool = True


@dataclass
class ExperimentConfig:
    master_seed: int = 42
    out_dir: str = "run"
    record_timing: bool = True
    threads: int = 1
    data: DataSection = field(default_factory=DataSection)
    model: ModelSection = field(default_factory=ModelSection)
    attack: AttackSection = field(default_factory=AttackSection)
    sweep: SweepSection = field(default_factory=SweepSection)
    vae: VaeSection = field(default_factory=VaeSection)
    detect: DetectSection = field(default_factory=DetectSection)

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        checks = [
            (self.data.source in ("synth", "csv"), f"data.source must be synth or csv, got {self.data.source!r}"),
            (self.data.source != "csv" or bool(self.data.path), "data.path is required when data.source is csv"),
            (0 < self.data.train_ratio < 1, "data.train_ratio must lie in (0, 1)"),
            (self.model.kind in ("forest", "mlp"), f"model.kind must be forest or mlp, got {self.model.kind!r}"),
            (self.attack.method in ("main", "brute"), f"attack.method must be main or brute, got {self.attack.method!r}"),
            (all(m in ("main", "brute") for m in self.sweep.methods), "sweep.methods may only hold main, brute"),
            (list(self.sweep.k_values) == sorted(self.sweep.k_values), "sweep.k_values must be ascending"),
            (self.detect.mode in ("1d", "2d"), "detect.mode must be 1d or 2d"),
            (self.vae.n_generate >= 0, "vae.n_generate must be >= 0"),
            (self.threads >= 1, "threads must be >= 1"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)
        # the component configs carry their own range checks
        try:
            self.attack_config()
            self.forest_config() if self.model.kind == "forest" else self.mlp_config()
            self.vae_params(max(1, self.data.n_features))
        except ValueError as e:
            raise ConfigError(str(e)) from None

    def seed(self, name: str) -> int:
        if name not in SUBSTREAMS:
            raise KeyError(name)
        return derive_seed(self.master_seed, name)

    def forest_config(self) -> ForestConfig:
        m = self.model
        return ForestConfig(m.n_estimators, m.max_depth, max_features=m.max_features, seed=self.seed("model"))

    def mlp_config(self) -> MlpConfig:
        m = self.model
        return MlpConfig(m.hidden_widths, m.learning_rate, m.epochs, m.batch_size, self.seed("model"), m.optimizer)

    def attack_config(self, k: int | None = None) -> AttackConfig:
        a = self.attack
        return AttackConfig(
            k_features=a.k_features if k is None else k,
            p=a.p,
            n_interp=a.n_interp,
            interp_position=a.interp_position,
            endpoint_mode=a.endpoint_mode,
            shap_mode=a.shap_mode,
            n_permutations=a.n_permutations,
            n_probe=a.n_probe,
            n_background=a.n_background,
            seed=self.seed("shap"),
            threshold=a.threshold,
            workers=self.threads,
        )

    def vae_params(self, input_dim: int) -> VaeParams:
        v = self.vae
        return VaeParams(
            input_dim=input_dim,
            latent_dim=v.latent_dim,
            widths=v.widths,
            epochs=v.epochs,
            learning_rate=v.learning_rate,
            batch_size=v.batch_size,
            seed=self.seed("vae"),
            desk_scale=v.desk_scale,
            reconstruction=v.reconstruction,
        )

    def to_dict(self) -> dict:
        return _plain(dataclasses.asdict(self))

    @classmethod
    def from_dict(cls, raw: dict | None) -> "ExperimentConfig":
        return _build(cls, raw or {}, "")

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    @classmethod
    def from_yaml(cls, text: str) -> "ExperimentConfig":
        try:
            raw = yaml.safe_load(text)
        except yaml.YAMLError as e:
            raise ConfigError(f"config is not valid YAML: {e}") from None
        if raw is not None and not isinstance(raw, dict):
            raise ConfigError("config must be a mapping at top level")
        return cls.from_dict(raw)

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        path.write_text(self.to_yaml())
        return path

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        return cls.from_yaml(path.read_text())


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


def _build(cls, raw: dict, prefix: str):
    if not isinstance(raw, dict):
        raise ConfigError(f"{prefix or 'config'} must be a mapping")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(raw) - set(fields))
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(prefix + k for k in unknown)}")
    kwargs = {}
    for name, value in raw.items():
        default = _default(fields[name])
        if dataclasses.is_dataclass(default):
            kwargs[name] = _build(type(default), value or {}, f"{prefix}{name}.")
        elif isinstance(default, tuple):
            if not isinstance(value, (list, tuple)):
                raise ConfigError(f"{prefix}{name} must be a list")
            kwargs[name] = tuple(value)
        else:
            kwargs[name] = value
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{prefix or 'config'}: {e}") from None


def _default(f: dataclasses.Field):
    if f.default is not dataclasses.MISSING:
        return f.default
    if f.default_factory is not dataclasses.MISSING:
        return f.default_factory()
    return None
