"""Strict JSON run configuration.

Every section maps onto a frozen dataclass. Unknown sections or keys are rejected, every
field has a default, and :meth:`RunConfig.to_dict` echoes the fully defaulted tree so it
can be written into run metadata.
"""
import json
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Any, Dict, Mapping, Tuple, Type, TypeVar, Union

from .assimilation import RadiusConfig
from .denoiser import ModelConfig, TrainConfig
from .engines.utils import PathLike
from .exceptions import ConfigError, UnknownConfigKey
from .metrics import DECILES
from .profile import PowerLawParams
from .synthetic import SynthConfig

T = TypeVar("T")

# schedule parameters live in their own section, not under "train"
_SCHEDULE_KEYS = ("T", "beta_start", "beta_end")


@dataclass(frozen=True)
class DataConfig:
    scenes: int = 1
    patch: int = 32
    stride: int = 32
    factor: int = 4
    da_stations: int = 6
    holdout_stations: int = 4

    def validate(self) -> None:
        if self.scenes < 1:
            raise ValueError(f"scenes must be >= 1, got {self.scenes}")
        if self.factor < 2 or self.patch % self.factor:
            raise ValueError(f"patch {self.patch} must be divisible by factor {self.factor} >= 2")
        if self.stride < 1:
            raise ValueError(f"stride must be >= 1, got {self.stride}")
        if self.da_stations < 0 or self.holdout_stations < 0:
            raise ValueError("station counts must be nonnegative")


@dataclass(frozen=True)
class ScheduleConfig:
    T: int = 200
    beta_start: float = 1e-4
    beta_end: float = 0.02

    def validate(self) -> None:
        if self.T < 2:
            raise ValueError(f"T must be >= 2, got {self.T}")
        if not 0 < self.beta_start <= self.beta_end < 1:
            raise ValueError(f"need 0 < beta_start <= beta_end < 1, got {self.beta_start}, {self.beta_end}")


@dataclass(frozen=True)
class ProfileConfig:
    hub_height_m: float = 80.0
    alpha: float = 1.0 / 7.0

    def validate(self) -> None:
        if not self.hub_height_m > 0:
            raise ValueError(f"hub_height_m must be positive, got {self.hub_height_m}")

    @property
    def params(self) -> PowerLawParams:
        return PowerLawParams(self.alpha)


@dataclass(frozen=True)
class EvalConfig:
    probs: Tuple[float, ...] = tuple(DECILES)
    data_range: Union[str, float] = "truth"

    def validate(self) -> None:
        if any(not 0.0 <= p <= 1.0 for p in self.probs):
            raise ValueError(f"probs must lie in [0, 1], got {list(self.probs)}")
        if isinstance(self.data_range, str):
            if self.data_range != "truth":
                raise ValueError(f'data_range must be "truth" or a positive number, got {self.data_range!r}')
        elif not self.data_range > 0:
            raise ValueError(f"data_range must be positive, got {self.data_range}")

    def resolve_range(self) -> Union[float, None]:
        """Numeric range, or None to take it from the truth field."""
        return None if self.data_range == "truth" else float(self.data_range)


@dataclass(frozen=True)
class SeedConfig:
    sample: int = 0
    stations: int = 0

    def validate(self) -> None:
        if self.sample < 0 or self.stations < 0:
            raise ValueError("seeds must be nonnegative")


@dataclass(frozen=True)
class RunConfig:
    synth: SynthConfig = field(default_factory=SynthConfig)
    data: DataConfig = field(default_factory=DataConfig)
    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    assimilation: RadiusConfig = field(default_factory=RadiusConfig)
    profile: ProfileConfig = field(default_factory=ProfileConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    seeds: SeedConfig = field(default_factory=SeedConfig)

    def validate(self) -> None:
        for section in fields(self):
            try:
                getattr(self, section.name).validate()
            except ValueError as e:
                raise ConfigError(f"[{section.name}] {e}") from e
        try:
            self.synth.validate(self.data.factor)
        except ValueError as e:
            raise ConfigError(f"[synth] {e}") from e
        if self.data.patch > self.synth.size:
            raise ConfigError(f"[data] patch {self.data.patch} exceeds scene size {self.synth.size}")

    def train_config(self) -> TrainConfig:
        """The train section with the schedule section folded in."""
        return replace(
            self.train, T=self.schedule.T, beta_start=self.schedule.beta_start, beta_end=self.schedule.beta_end
        )

    def to_dict(self) -> Dict[str, Any]:
        tree = asdict(self)
        for key in _SCHEDULE_KEYS:
            tree["train"].pop(key)
        tree["eval"]["probs"] = list(self.eval.probs)
        return tree

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any]) -> "RunConfig":
        if not isinstance(raw, Mapping):
            raise ConfigError("top level must be a JSON object")
        sections: Dict[str, Any] = {}
        for section in fields(cls):
            values = raw.get(section.name, {})
            excluded = _SCHEDULE_KEYS if section.name == "train" else ()
            sections[section.name] = _build_section(section.name, section.default_factory, values, excluded)  # type: ignore[arg-type]
        for key in raw:
            if key not in sections:
                raise UnknownConfigKey("<root>", key)
        config = cls(**sections)
        config.validate()
        return config

    @classmethod
    def from_json(cls, path: PathLike) -> "RunConfig":
        """Loads a config file, or the config recorded in a run's metadata file."""
        try:
            with open(path, encoding="utf-8") as f:
                raw = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path} is not valid JSON: {e}") from e
        if isinstance(raw, Mapping) and "command" in raw and "config" in raw:
            raw = raw["config"]
        return cls.from_dict(raw)


def _build_section(name: str, section_type: Type[T], values: Any, excluded: Tuple[str, ...] = ()) -> T:
    if not isinstance(values, Mapping):
        raise ConfigError(f'section "{name}" must be a JSON object')
    known = {f.name: f for f in fields(section_type) if f.name not in excluded}  # type: ignore[arg-type]
    for key in values:
        if key not in known:
            raise UnknownConfigKey(name, key)
    kwargs = {}
    for key, value in values.items():
        default = getattr(section_type(), key)
        kwargs[key] = _coerce(name, key, value, default)
    return section_type(**kwargs)


def _coerce(section: str, key: str, value: Any, default: Any) -> Any:
    where = f"{section}.{key}"
    if isinstance(default, tuple):
        if not isinstance(value, list) or not all(_is_number(v) for v in value):
            raise ConfigError(f"{where} must be a list of numbers")
        return tuple(float(v) for v in value)
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{where} must be true or false")
        return value
    if isinstance(default, int) and not isinstance(default, bool):
        if not isinstance(value, int) or isinstance(value, bool):
            raise ConfigError(f"{where} must be an integer")
        return value
    if isinstance(default, float):
        if not _is_number(value):
            raise ConfigError(f"{where} must be a number")
        return float(value)
    if default is None:
        # optional integers (fixed_radius)
        if value is not None and (not isinstance(value, int) or isinstance(value, bool)):
            raise ConfigError(f"{where} must be an integer or null")
        return value
    if isinstance(default, str) and key != "data_range":
        if not isinstance(value, str):
            raise ConfigError(f"{where} must be a string")
        return value
    # data_range: "truth" or a number
    if isinstance(value, str) or _is_number(value):
        return value if isinstance(value, str) else float(value)
    raise ConfigError(f'{where} must be "truth" or a number')


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)
