"""
Command configuration: settings.SCENEPICK defaults, then an optional TOML or
JSON file, then command-line flags. File keys mirror flag destinations.
"""

import json
import logging
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Dict, FrozenSet, Mapping, Optional, Tuple

from django.conf import settings

from engine.errors import ScenePickError
from engine.reward import RewardConfig
from engine.sampling import SamplingConfig, SamplingStrategy
from engine.segmentation import SegmentationPolicy
from providers.client import ProviderConfig

logger = logging.getLogger(__name__)

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR")
OUTPUT_FORMATS = ("json", "table")


class ConfigError(ScenePickError, ValueError):
    """Bad config file or value; reported as a usage error."""


def _strategy(value) -> str:
    return SamplingStrategy.parse(value).value


def _choice(choices: Tuple[str, ...], upper: bool = False) -> Callable[[Any], str]:
    def convert(value) -> str:
        value = str(value).upper() if upper else str(value)
        if value not in choices:
            raise ValueError(f"expected one of {', '.join(choices)}")
        return value
    return convert


def _setting(key: str) -> Callable[[], Any]:
    return lambda: settings.SCENEPICK[key]


def _provider_setting(key: str) -> Callable[[], Any]:
    return lambda: settings.SCENEPICK["PROVIDER"][key]


# key -> (converter, default)
CONFIG_KEYS: Dict[str, Tuple[Callable[[Any], Any], Callable[[], Any]]] = {
    "lambda": (float, _setting("SEGMENT_LAMBDA")),
    "min_scene_len": (int, _setting("MIN_SCENE_LEN")),
    "bins": (int, _setting("HISTOGRAM_BINS")),
    "fusion_lambda": (float, _setting("FUSION_LAMBDA")),
    "tolerance": (int, _setting("MERGE_TOLERANCE")),
    "alpha": (float, _setting("ALPHA_PRED")),
    "rmin": (float, _setting("R_MIN")),
    "focused_max_k": (int, _setting("FOCUSED_MAX_K")),
    "strategy": (_strategy, lambda: SamplingStrategy.AUTO.value),
    "tau": (float, _setting("REWARD_TAU")),
    "probability_floor": (float, _setting("PROBABILITY_FLOOR")),
    "jobs": (int, lambda: 1),
    "endpoint": (str, _provider_setting("ENDPOINT")),
    "credential_env": (str, _provider_setting("CREDENTIAL_ENV")),
    "timeout": (float, _provider_setting("TIMEOUT")),
    "max_retries": (int, _provider_setting("MAX_RETRIES")),
    "max_concurrent_requests": (int, _provider_setting("MAX_CONCURRENT_REQUESTS")),
    "log_level": (_choice(LOG_LEVELS, upper=True), lambda: None),
    "format": (_choice(OUTPUT_FORMATS), lambda: "json"),
}


def read_config_file(path) -> Dict[str, Any]:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"Cannot read config file {path}: {exc}") from exc
    try:
        if path.suffix.lower() == ".toml":
            values = tomllib.loads(raw.decode("utf-8"))
        else:
            values = json.loads(raw)
    except (tomllib.TOMLDecodeError, ValueError) as exc:
        raise ConfigError(f"Config file {path} is not valid: {exc}") from exc
    if not isinstance(values, dict):
        raise ConfigError(f"Config file {path} must hold a table of keys")
    return values


def _convert(key: str, value: Any, origin: str) -> Any:
    if value is None:
        return None
    converter, _ = CONFIG_KEYS[key]
    try:
        return converter(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{origin}: invalid value for {key!r}: {value!r} ({exc})") from exc


@dataclass(frozen=True)
class GlobalConfig:
    values: Mapping[str, Any]
    # keys set by a config file or a flag rather than taken from settings
    explicit: FrozenSet[str] = frozenset()

    @classmethod
    def load(cls, path: Optional[str] = None, flags: Optional[Mapping[str, Any]] = None) -> "GlobalConfig":
        values = {key: _convert(key, default(), "settings") for key, (_, default) in CONFIG_KEYS.items()}
        explicit = set()

        if path:
            from_file = read_config_file(path)
            unknown = sorted(set(from_file) - set(CONFIG_KEYS))
            if unknown:
                raise ConfigError(f"Unknown config keys in {path}: {', '.join(unknown)}")
            values.update({key: _convert(key, value, str(path)) for key, value in from_file.items()})
            explicit.update(from_file)
            logger.debug(f"Loaded {len(from_file)} config keys from {path}")

        for key, value in (flags or {}).items():
            if key in CONFIG_KEYS and value is not None:
                values[key] = _convert(key, value, "flag")
                explicit.add(key)
        return cls(values, frozenset(explicit))

    def __getitem__(self, key: str) -> Any:
        return self.values[key]

    def policy(self) -> SegmentationPolicy:
        return SegmentationPolicy(threshold_lambda=self["lambda"], min_scene_len=self["min_scene_len"])

    def sampling(self) -> SamplingConfig:
        return SamplingConfig(
            tolerance=self["tolerance"],
            alpha_pred=self["alpha"],
            r_min=self["rmin"],
            focused_max_k=self["focused_max_k"],
        )

    def reward(self) -> RewardConfig:
        return RewardConfig(temperature=self["tau"], probability_floor=self["probability_floor"])

    def provider(self, **overrides) -> ProviderConfig:
        return ProviderConfig.from_settings(
            endpoint=self["endpoint"],
            credential_env=self["credential_env"],
            timeout=self["timeout"],
            max_retries=self["max_retries"],
            max_concurrent_requests=self["max_concurrent_requests"],
            **overrides,
        )
