"""Type definitions shared by the codecs and the simulation modules."""

import enum
from typing import Any, Tuple, TypeVar, Union

import numpy as np
import numpy.typing as npt

T = TypeVar("T")  # pylint: disable=invalid-name

Vector = npt.NDArray[np.float64]
Matrix = npt.NDArray[np.float64]
Range = Tuple[float, float]


class Missing(enum.Enum):
    """Marks a key absent from a config or track file.

    A file can omit a key (MISSING) or spell it out as `null` (`None`);
    only the first case falls back to a derived value.
    """

    token = 0

    def __repr__(self) -> str:
        return "<Missing property>"

    def __bool__(self) -> bool:
        return False


OptionalProperty = Union[Missing, T]
OptionalProperty.__doc__ = """Type alias for a value that may be MISSING."""

MISSING = Missing.token


def is_missing(value: Any) -> bool:
    """Check whether `value` is `MISSING`."""
    return value is MISSING


class NoResult(enum.Enum):
    """Returned by a deserialization check that does not apply."""

    token = 0

    def __bool__(self) -> bool:
        return False


PossibleResult = Union[NoResult, T]

NO_RESULT = NoResult.token
