"""Experiment configuration: defaults, validation, TOML loading."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from cfpos.channel import PathLossParams, RadioParams, dbm_to_mw
from cfpos.errors import ConfigError
from cfpos.music import MusicConfig

METHODS = ("hybrid_gpr", "rss_gpr", "aoa_gpr", "wknn_rss", "wknn_hybrid", "lr_rss", "lr_hybrid")


@dataclass(frozen=True)
class ExperimentConfig:
    # geometry
    area_side_m: float = 200.0
    n_aps: int = 25
    n_antennas: int = 25
    spacing_wavelengths: float = 0.5
    ap_height_m: float = 10.0
    ue_height_m: float = 1.5
    n_rps: int = 225
    # radio
    carrier_hz: float = 2e9
    tx_power_mw: float = 100.0
    noise_power_dbm: float = -96.0
    n_samples: int = 200
    angular_spread_deg: float = 10.0
    # large-scale fading
    p0_db: float = -28.8
    d0_m: float = 1.0
    gamma: float = 3.53
    sigma_sf_db: float = 8.0
    d_corr_m: float = 13.0
    # experiment
    n_testpoints: int = 100
    n_setups: int = 10
    methods: tuple[str, ...] = METHODS
    seed: int = 0
    out_dir: str = "results"
    workers: int = 1
    # estimator settings
    standardize_features: bool = True
    aoa_noise_std_deg: float = 2.0
    music_grid_step_deg: float = 0.1
    wknn_k: int = 4
    gpr_restarts: int = 5

    def __post_init__(self):
        object.__setattr__(self, "methods", tuple(self.methods))
        for name in ("n_aps", "n_antennas", "n_rps", "n_samples", "n_testpoints", "n_setups",
                     "workers", "wknn_k", "gpr_restarts"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be a positive count, got {getattr(self, name)}")
        if self.n_antennas < 2:
            raise ConfigError("n_antennas must be >= 2")
        side = math.isqrt(self.n_rps)
        if side * side != self.n_rps:
            raise ConfigError(f"n_rps must be a perfect square, got {self.n_rps} "
                              f"(nearest: {side * side} or {(side + 1) ** 2})")
        if self.wknn_k > self.n_rps:
            raise ConfigError("wknn_k cannot exceed n_rps")
        if not self.methods:
            raise ConfigError("methods must not be empty")
        unknown = [m for m in self.methods if m not in METHODS]
        if unknown:
            raise ConfigError(f"unknown method(s) {unknown}; known: {list(METHODS)}")
        if len(set(self.methods)) != len(self.methods):
            raise ConfigError("methods must not repeat")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")
        for name in ("area_side_m", "spacing_wavelengths", "ap_height_m", "carrier_hz",
                     "tx_power_mw", "d0_m", "gamma", "d_corr_m"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        for name in ("ue_height_m", "sigma_sf_db", "angular_spread_deg", "aoa_noise_std_deg"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative")
        # the remaining checks live in the parameter objects
        self.pathloss()
        self.radio()
        self.music()

    def pathloss(self) -> PathLossParams:
        return PathLossParams(self.p0_db, self.d0_m, self.gamma, self.sigma_sf_db, self.d_corr_m)

    def radio(self) -> RadioParams:
        return RadioParams(self.tx_power_mw, float(dbm_to_mw(self.noise_power_dbm)), 1,
                           self.n_samples, self.angular_spread_deg, self.carrier_hz)

    def music(self) -> MusicConfig:
        try:
            return MusicConfig(self.music_grid_step_deg)
        except ConfigError as exc:
            raise ConfigError(f"music_grid_step_deg: {exc}") from None

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["methods"] = list(self.methods)
        return d

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        known = {f.name: f for f in dataclasses.fields(cls)}
        unknown = sorted(set(doc) - set(known))
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
        kwargs = {}
        for key, value in doc.items():
            kwargs[key] = _coerce(key, known[key], value)
        return cls(**kwargs)

    def replace(self, **changes) -> "ExperimentConfig":
        doc = self.to_dict()
        doc.update(changes)
        return ExperimentConfig.from_dict(doc)


_DEFAULTS = ExperimentConfig.__dataclass_fields__


def _coerce(key, fld, value):
    default = fld.default if fld.default is not dataclasses.MISSING else None
    if key == "methods":
        if isinstance(value, str):
            value = [v.strip() for v in value.split(",") if v.strip()]
        if not isinstance(value, (list, tuple)) or not all(isinstance(v, str) for v in value):
            raise ConfigError("methods must be a list of method names")
        return tuple(value)
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{key} must be a boolean, got {value!r}")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            if isinstance(value, float) and value.is_integer():
                return int(value)
            raise ConfigError(f"{key} must be an integer, got {value!r}")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key} must be a number, got {value!r}")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{key} must be a string, got {value!r}")
        return value
    return value


def load_config(path) -> ExperimentConfig:
    """Read an :class:`ExperimentConfig` from a TOML file (flat keys)."""
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: invalid TOML: {exc}") from None
    nested = [k for k, v in doc.items() if isinstance(v, dict)]
    if nested:
        raise ConfigError(f"{path}: tables are not supported, found [{', '.join(nested)}]")
    return ExperimentConfig.from_dict(doc)


def dump_toml(cfg: ExperimentConfig) -> str:
    lines = []
    for key, value in cfg.to_dict().items():
        if isinstance(value, bool):
            text = "true" if value else "false"
        elif isinstance(value, str):
            text = f'"{value}"'
        elif isinstance(value, list):
            text = "[" + ", ".join(f'"{v}"' for v in value) + "]"
        else:
            text = repr(value)
        lines.append(f"{key} = {text}")
    return "\n".join(lines) + "\n"


def coerce_value(key: str, text: str):
    """Parse a command-line value for config field ``key``."""
    if key not in _DEFAULTS:
        raise ConfigError(f"unknown config key {key!r}")
    default = _DEFAULTS[key].default
    try:
        if isinstance(default, bool):
            return text.lower() in ("1", "true", "yes", "on")
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
    except ValueError:
        raise ConfigError(f"cannot parse {text!r} for {key}") from None
    return text


SWEEP_ALIASES = {"N": "n_antennas", "K": "n_rps", "L": "n_aps"}


def sweep_field(name: str) -> str:
    key = SWEEP_ALIASES.get(name, name)
    if key not in _DEFAULTS or key in ("methods", "out_dir"):
        raise ConfigError(f"cannot sweep over {name!r}")
    return key


def write_default(path) -> None:
    Path(path).write_text(dump_toml(ExperimentConfig()))


__all__ = ["ExperimentConfig", "METHODS", "load_config", "dump_toml", "coerce_value",
           "sweep_field", "field"]
