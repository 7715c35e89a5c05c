"""Goal: train and evaluate attitude-aware waypoint traversal for a quadrotor
carrying a cable-suspended payload.

1. Simulate the hybrid taut/slack cable dynamics (`aster.dynamics`).
2. Seed training episodes from states back-propagated from waypoints
   (`aster.hdss`).
3. Train a PPO policy in the waypoint traversal environment (`aster.env`,
   `aster.policy`, `aster.training`) and evaluate it on tracks
   (`aster.tracks`, `aster.evaluation`).

The top-level module contains `aster`'s public API and is directly
importable from `aster`. Names imported from the submodules are stable as
long as they are listed in that submodule's `__all__`.
"""

from .config import AsterConfig, fingerprint, read_config, write_config
from .deserialize import load
from .dynamics import Phase, PhaseEvent, PhysicalParams, SystemState
from .env import AsterEnv, EnvConfig, ResetMode, VecEnv
from .errors import (
    AsterError,
    CheckpointError,
    ConfigError,
    ConstraintError,
    DeserializeError,
    IntegrationError,
    PhaseSwitch,
    RotationAmbiguityError,
    SeedingError,
    SerdeError,
    SerializeError,
    TrackFileError,
    UndefinedAttitudeError,
    UpdateError,
    WaypointError,
)
from .hdss import SeedConfig, generate_seed
from .overrides import Override
from .policy import ActorCritic, PpoConfig
from .seeding import SeedManager
from .serialize import dump
from .tracks import Track, Waypoint, WaypointKind, Workspace
from .typedefs import OptionalProperty, is_missing

__all__ = [
    "AsterConfig",
    "fingerprint",
    "read_config",
    "write_config",
    "load",
    "dump",
    "Override",
    "OptionalProperty",
    "is_missing",
    "Phase",
    "PhaseEvent",
    "PhysicalParams",
    "SystemState",
    "AsterEnv",
    "EnvConfig",
    "ResetMode",
    "VecEnv",
    "SeedConfig",
    "generate_seed",
    "ActorCritic",
    "PpoConfig",
    "SeedManager",
    "Track",
    "Waypoint",
    "WaypointKind",
    "Workspace",
    "AsterError",
    "CheckpointError",
    "ConfigError",
    "ConstraintError",
    "DeserializeError",
    "IntegrationError",
    "PhaseSwitch",
    "RotationAmbiguityError",
    "SeedingError",
    "SerdeError",
    "SerializeError",
    "TrackFileError",
    "UndefinedAttitudeError",
    "UpdateError",
    "WaypointError",
]
