"""Exceptions raised by aster."""

import json
from typing import Any, List, NamedTuple, Optional, Type

from .typedefs import MISSING


class DepthContainer(NamedTuple):
    """One level of the key path walked by the loader."""

    constructor: Type
    key: Any
    value: Any


class AsterError(Exception):
    """Base error for `aster`."""


class SerdeError(AsterError):
    """Base error for `aster.load` and `aster.dump`."""


class SerializeError(SerdeError):
    """Serialization error associated with `aster.dump`."""


class DeserializeError(SerdeError):
    """Deserialization error associated with `aster.load`.

    The message ends with a JSON rendering of the key path that led to the
    failing value, so a typo deep in a config or track file points at the
    offending key.

    Parameters:
        type_expected: the type the loader expected a value to be.
        value_received: the actual object received.
        depth: key path down to the failing value.
        key: key of the failing value, or MISSING.
        message_prefix: message to prepend to the generated error message.
        message_postfix: message to postpend to the generated error message.
        message_override: if provided, replaces generated error message.
    """

    # pylint: disable=too-many-arguments

    def __init__(
        self,
        type_expected: Type,
        value_received: Any,
        depth: List[DepthContainer],
        key: Any,
        message_prefix: str = "",
        message_postfix: str = "",
        message_override: str = "",
    ):
        depth_messages = []
        for depth_item in depth:
            value = {
                "key": repr(depth_item.key),
                "type": getattr(
                    depth_item.constructor,
                    "__name__",
                    repr(depth_item.constructor),
                ),
            }
            if depth_item.key is MISSING:
                del value["key"]
            depth_messages.append(value)

        if message_override:
            message = message_override
        elif value_received is MISSING and key is not MISSING:
            message = f"missing required key {repr(key)}"
            depth_messages.pop()
        else:
            message = (
                message_prefix
                + f"expected {repr(type_expected)} "
                + f"but received {repr(type(value_received))} "
                + message_postfix
            )
        if depth_messages:
            depth_messages[-1]["error"] = message.strip()
        self.path = [
            item.key for item in depth if item.key is not MISSING
        ]
        self.reason = message.strip()
        super().__init__(f"{message}\n{json.dumps(depth_messages, indent=2)}")


class ConfigError(AsterError):
    """A config file could not be parsed or failed validation."""


class IntegrationError(AsterError):
    """The simulated state became non-finite."""


class ConstraintError(AsterError):
    """A cable direction is not a unit vector."""


class PhaseSwitch(AsterError):
    """Backward recursion signal: cable tension vanished in the taut step.

    Not a failure. `hdss.generate_seed` catches it and continues the step in
    the slack phase.
    """

    def __init__(self, tension_accel: float):
        self.tension_accel = tension_accel
        super().__init__(
            f"cable tension vanished (|a_l - g| = {tension_accel:.3g} m/s^2)"
        )


class UndefinedAttitudeError(AsterError):
    """Attitude requested in free fall where the thrust axis is undefined."""


class RotationAmbiguityError(AsterError):
    """Consecutive attitudes differ by an angle too close to pi."""


class SeedingError(AsterError):
    """No chain passed the validity gate within `max_resamples` attempts."""


class WaypointError(AsterError):
    """A waypoint lies outside the workspace or has an invalid rotation."""


class TrackFileError(AsterError):
    """Malformed track file.

    Parameters:
        path: file the track was read from.
        reason: human-readable diagnosis.
        line: 1-based line of a syntax error, if known.
        column: 1-based column of a syntax error, if known.
        field: key path of a schema error, if known.
    """

    # pylint: disable=too-many-arguments

    def __init__(
        self,
        path: str,
        reason: str,
        line: Optional[int] = None,
        column: Optional[int] = None,
        field: Optional[List[Any]] = None,
    ):
        self.line = line
        self.column = column
        self.field = field
        where = path
        if line is not None:
            where += f":{line}:{column}"
        if field:
            where += " at " + ".".join(str(part) for part in field)
        super().__init__(f"{where}: {reason}")


class CheckpointError(AsterError):
    """Checkpoint is malformed or does not match the running config."""


class UpdateError(AsterError):
    """A PPO update produced a non-finite loss and was aborted."""
