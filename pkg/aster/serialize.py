"""Dump strongly-typed containers into loosely-typed objects."""

from dataclasses import fields, is_dataclass
from enum import Enum
from typing import Any, Mapping, Sequence

import numpy as np

from .errors import SerializeError
from .typedefs import MISSING


def dump(obj: Any) -> Any:
    """Serialize an object into a lesser-typed form.

    Parameters:
        obj: the object that you would like to serialize.

    Returns:
        A serialized form of `obj`, built only from dicts, lists, str, bool,
        int, float and None, so it can be handed to `toml.dump` or
        `json.dumps` directly.

    Raises:
        aster.SerializeError: raised for any unhandled error, including a
            bare `MISSING`

    Notes:
        Serialize from an instance of `a` -> an instance of `b`:
            | `dataclass` -> `Dict`
            | `Enum` -> enum value
            | `numpy.ndarray` -> nested `List`
            | `numpy` scalar -> `int` / `float` / `bool`
            | `str` -> `str`
            | `Sequence` -> `List`
            | `Mapping` -> `Dict`
            | `MISSING` fields, items and values are dropped
            | `Anything else` -> `itself`
    """
    # pylint: disable=too-many-return-statements
    try:
        if obj is MISSING:
            raise ValueError("MISSING has no serialized form")
        if is_dataclass(obj) and not isinstance(obj, type):
            return {
                dc_field.name: dump(getattr(obj, dc_field.name))
                for dc_field in fields(obj)
                if getattr(obj, dc_field.name) is not MISSING
            }
        if isinstance(obj, Enum):
            return obj.value
        if isinstance(obj, np.ndarray):
            return obj.tolist()
        if isinstance(obj, np.generic):
            return obj.item()
        if isinstance(obj, str):
            return obj
        if isinstance(obj, Sequence):
            return [dump(value) for value in obj if value is not MISSING]
        if isinstance(obj, Mapping):
            return {
                dump(key): dump(value)
                for key, value in obj.items()
                if value is not MISSING
            }
        return obj
    except Exception as error:
        raise SerializeError(f"Error serializing {repr(obj)}") from error
