"""Run configuration: one TOML file with `[physics]`, `[env]`, `[seed]` and
`[ppo]` sections, each optional and defaulting to the package defaults.

Example:
    .. code-block:: toml

        [env]
        epsilon_theta = 45.0

        [ppo]
        num_envs = 64
        iterations = 20
"""

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Union

import toml

from .deserialize import load
from .dynamics import PhysicalParams
from .env import EnvConfig
from .errors import ConfigError, DeserializeError
from .hdss import SeedConfig
from .policy import PpoConfig
from .serialize import dump

__all__ = [
    "AsterConfig",
    "read_config",
    "loads_config",
    "dumps_config",
    "write_config",
    "fingerprint",
]


@dataclass(frozen=True)
class AsterConfig:
    physics: PhysicalParams = field(default_factory=PhysicalParams)
    env: EnvConfig = field(default_factory=EnvConfig)
    seed: SeedConfig = field(default_factory=SeedConfig)
    ppo: PpoConfig = field(default_factory=PpoConfig)


def loads_config(text: str, source: str = "<string>") -> AsterConfig:
    """Parse TOML text into an `AsterConfig`.

    Raises:
        ConfigError: TOML syntax error (with line) or schema error (with
            the key path of the offending value).
    """
    try:
        parsed = toml.loads(text)
    except toml.TomlDecodeError as error:
        raise ConfigError(
            f"{source}:{error.lineno}:{error.colno}: {error.msg}"
        ) from error
    try:
        return load(parsed, AsterConfig)
    except DeserializeError as error:
        where = ".".join(str(part) for part in error.path)
        raise ConfigError(f"{source} at {where}: {error.reason}") from error


def read_config(path: Union[str, Path]) -> AsterConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as error:
        raise ConfigError(f"{path}: {error.strerror}") from error
    return loads_config(text, str(path))


def dumps_config(config: AsterConfig) -> str:
    return toml.dumps(dump(config))


def write_config(config: AsterConfig, path: Union[str, Path]) -> None:
    """Write the resolved config; `read_config` loads it back unchanged."""
    Path(path).write_text(dumps_config(config), encoding="utf-8")


def fingerprint(obj: Any) -> str:
    """SHA-256 hex digest of the canonical JSON of `dump(obj)`."""
    canonical = json.dumps(
        dump(obj), sort_keys=True, separators=(",", ":"), allow_nan=False
    )
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
