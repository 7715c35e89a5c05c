"""Field overrides applied when loading dataclasses.

Validators raise `ValueError` with a readable message; the loader turns
that into a `DeserializeError` carrying the key path.
"""

from dataclasses import dataclass, field
from typing import Any, Callable, NoReturn, Sequence, Union

import numpy as np

METADATA_KEY = "aster"


def _noreturn(value: Any) -> None:
    """Accept anything."""


@dataclass(frozen=True)
class Override:
    """Load-time override for one dataclass field.

    Passed into `dataclasses.field` via `metadata={"aster": Override(...)}`.

    Parameters:
        validate: returns `False` or raises on invalid values.
    """

    validate: Union[
        Callable[[Any], NoReturn],
        Callable[[Any], bool],
        Callable[[Any], None],
    ] = field(default=_noreturn)


DEFAULT_OVERRIDE = Override()


def get_override(value: Any) -> Override:
    """Perform validation for an override value."""
    if value is None:
        return DEFAULT_OVERRIDE
    if isinstance(value, Override):
        return value
    raise TypeError(
        f"dataclasses field error for metadata key '{METADATA_KEY}': value "
        f"{repr(value)} is not the correct type. Expected {repr(Override)}"
    )


def positive(value: float) -> None:
    if not value > 0:
        raise ValueError(f"{value!r} must be strictly positive")


def non_negative(value: float) -> None:
    if not value >= 0:
        raise ValueError(f"{value!r} must be non-negative")


def unit_interval(value: float) -> None:
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{value!r} must lie in [0, 1]")


def ordered_range(value: Sequence[float]) -> None:
    if len(value) != 2 or not value[0] <= value[1]:
        raise ValueError(f"{list(value)!r} is not an ordered (low, high) pair")


def vector_of(size: int) -> Override:
    """Override for a tuple field holding exactly `size` finite floats."""

    def _validate(value: Sequence[float]) -> None:
        if len(value) != size:
            raise ValueError(f"expected {size} entries, got {len(value)}")
        if not all(np.isfinite(value)):
            raise ValueError(f"entries must be finite, got {list(value)}")

    return Override(validate=_validate)


def positive_vector_of(size: int) -> Override:
    """Like `vector_of`, additionally requiring every entry to be > 0."""
    base = vector_of(size)

    def _validate(value: Sequence[float]) -> None:
        base.validate(value)
        if not all(x > 0 for x in value):
            raise ValueError(f"entries must be positive, got {list(value)}")

    return Override(validate=_validate)


def validated(function: Callable[[Any], Any]) -> dict:
    """Metadata for `dataclasses.field` attaching a validator."""
    return {METADATA_KEY: Override(validate=function)}


def with_override(override: Override) -> dict:
    """Metadata for `dataclasses.field` attaching a full override."""
    return {METADATA_KEY: override}
