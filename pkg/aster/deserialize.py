"""Load parsed TOML/JSON objects into the package's typed dataclasses."""

import inspect
import itertools
from dataclasses import dataclass, field, fields, is_dataclass
from enum import Enum
from typing import (
    Any,
    Callable,
    Generic,
    Iterable,
    List,
    Literal,
    Mapping,
    Sequence,
    Tuple,
    Type,
    TypeVar,
    Union,
    get_args,
    get_origin,
    get_type_hints,
)

from .errors import DepthContainer, DeserializeError
from .overrides import METADATA_KEY, DEFAULT_OVERRIDE, Override, get_override
from .typedefs import MISSING, NO_RESULT, Missing, PossibleResult

T = TypeVar("T")  # pylint: disable=invalid-name


def _is_no_result(obj: Any) -> bool:
    return obj is NO_RESULT


def load(obj: Any, constructor: Type[T]) -> T:
    """Deserialize an object into its constructor.

    Parameters:
        obj: the parsed object, typically the output of `toml.load` or
            `json.loads`.
        constructor: the type into which we want to load `obj`.

    Returns:
        A recursively-filled, validated instance of `constructor`.

    Raises:
        aster.DeserializeError: on any type mismatch, unknown key, missing
            required key or failed field validation.

    Example:
        .. code-block:: python

            import toml
            import aster
            from aster.env import EnvConfig

            cfg = aster.load(toml.loads("sigma_p = 2.5"), EnvConfig)
            assert cfg.sigma_p == 2.5 and cfg.L == 0.75
    """
    if _is_union(constructor) or constructor in _ANY:
        raise TypeError(f"Cannot begin deserialization with '{constructor}'")
    return Deserialize(obj=obj, constructor=constructor, depth=[]).run()


@dataclass
class Deserialize(Generic[T]):  # pylint: disable=too-many-instance-attributes
    """Deserialize an object into a more-strongly-typed form.

    Attributes:
        depth: keeps track of recursive position for error messages.
    """

    obj: Any
    constructor: Type[T]
    depth: List[DepthContainer]
    key: Any = field(default=MISSING)
    field_override: Override = field(default=DEFAULT_OVERRIDE)
    new_depth: List[DepthContainer] = field(init=False)
    constructor_args: Tuple[Type, ...] = field(init=False)
    constructor_origin: Type = field(init=False)
    check_functions: Iterable[Callable[[], PossibleResult[T]]] = field(
        init=False
    )

    def __post_init__(self) -> None:
        self.new_depth = self.depth + [
            DepthContainer(self.constructor, self.key, self.obj)
        ]
        self.constructor_args = get_args(self.constructor)
        origin = get_origin(self.constructor)
        self.constructor_origin = origin if origin else self.constructor
        self.check_functions = (
            self._check_any,
            self._check_literal,
            self._check_enum,
            self._check_float,
            self._check_primitive,
            self._check_none,
            self._check_undefined,
            self._check_dataclass,
            self._check_tuple,
            self._check_sequence,
            self._check_mapping,
            self._check_union,
        )

    def _error(self, error: Exception) -> DeserializeError:
        if isinstance(error, DeserializeError):
            return error
        return DeserializeError(
            self.constructor,
            self.obj,
            self.new_depth,
            self.key,
            message_override=str(error),
        )

    def run(self) -> T:
        """Run each check in order, then validate the result."""
        try:
            result: T = next(  # type: ignore
                itertools.dropwhile(
                    _is_no_result,
                    (function() for function in self.check_functions),
                )
            )
        except StopIteration:
            # pylint: disable=raise-missing-from
            raise DeserializeError(
                self.constructor,
                self.obj,
                self.new_depth,
                self.key,
                message_prefix="Unsupported type. ",
            )
        except Exception as error:
            raise self._error(error) from error
        try:
            validation_result = self.field_override.validate(result)
        except Exception as error:
            raise self._error(error) from error
        if validation_result is False:
            raise DeserializeError(
                self.constructor,
                self.obj,
                self.new_depth,
                self.key,
                message_override=(
                    f"{repr(self.field_override.validate)} returned False"
                ),
            )
        return result

    def _check_dataclass(self) -> PossibleResult[T]:
        """Load a mapping into a dataclass, rejecting unknown keys."""
        if not is_dataclass(self.constructor):
            return NO_RESULT
        if not isinstance(self.obj, Mapping):
            raise DeserializeError(Mapping, self.obj, self.new_depth, self.key)
        hints = get_type_hints(self.constructor)
        init_fields = {f.name: f for f in fields(self.constructor) if f.init}
        unknown = sorted(set(self.obj) - set(init_fields))
        if unknown:
            raise DeserializeError(
                self.constructor,
                self.obj,
                self.new_depth,
                self.key,
                message_override=f"unknown keys {unknown}",
            )
        parameters = inspect.signature(self.constructor).parameters
        return self.constructor(
            **{
                name: Deserialize(
                    obj=self.obj.get(name, MISSING),
                    constructor=hints[name],
                    depth=self.new_depth,
                    key=name,
                    field_override=get_override(
                        init_fields[name].metadata.get(METADATA_KEY)
                    ),
                ).run()
                for name in init_fields
                if not (
                    name not in self.obj
                    and parameters[name].default != inspect.Signature.empty
                )
            }
        )  # type: ignore

    def _check_tuple(self) -> PossibleResult[T]:
        if not (
            isinstance(self.constructor_origin, type)
            and issubclass(self.constructor_origin, tuple)
        ):
            return NO_RESULT
        if not isinstance(self.obj, Sequence) or isinstance(self.obj, str):
            raise DeserializeError(tuple, self.obj, self.new_depth, self.key)
        if not self.constructor_args:
            return tuple(self.obj)  # type: ignore
        if len(self.constructor_args) == 2 and self.constructor_args[1] == ...:
            return tuple(
                Deserialize(
                    obj=value,
                    constructor=self.constructor_args[0],
                    depth=self.new_depth,
                    key=i,
                ).run()
                for i, value in enumerate(self.obj)
            )  # type: ignore
        if len(self.constructor_args) != len(self.obj):
            raise DeserializeError(
                tuple,
                self.obj,
                self.new_depth,
                self.key,
                message_prefix=(
                    f"Tuple of length {len(self.constructor_args)} "
                    f"expected, got {len(self.obj)}. "
                ),
            )
        return tuple(
            Deserialize(
                obj=self.obj[i],
                constructor=arg,
                depth=self.new_depth,
                key=i,
            ).run()
            for i, arg in enumerate(self.constructor_args)
        )  # type: ignore

    def _check_sequence(self) -> PossibleResult[T]:
        """Load a list; strings are never split into characters."""
        if not (
            isinstance(self.constructor_origin, type)
            and issubclass(self.constructor_origin, Sequence)
        ):
            return NO_RESULT
        if not isinstance(self.obj, Sequence) or isinstance(self.obj, str):
            raise DeserializeError(
                Sequence, self.obj, self.new_depth, self.key
            )
        arg = self.constructor_args[0] if self.constructor_args else Any
        origin = (
            list
            if self.constructor_origin is Sequence
            else self.constructor_origin
        )
        return origin(
            Deserialize(
                obj=value, constructor=arg, depth=self.new_depth, key=i
            ).run()
            for i, value in enumerate(self.obj)
        )  # type: ignore

    def _check_mapping(self) -> PossibleResult[T]:
        if not (
            isinstance(self.constructor_origin, type)
            and issubclass(self.constructor_origin, Mapping)
        ):
            return NO_RESULT
        if not isinstance(self.obj, Mapping):
            raise DeserializeError(Mapping, self.obj, self.new_depth, self.key)
        tpkey, tpvalue = self.constructor_args or (Any, Any)
        return dict(
            (
                Deserialize(
                    obj=key, constructor=tpkey, depth=self.new_depth, key=key
                ).run(),
                Deserialize(
                    obj=value,
                    constructor=tpvalue,
                    depth=self.new_depth,
                    key=key,
                ).run(),
            )
            for key, value in self.obj.items()
        )  # type: ignore

    def _check_none(self) -> PossibleResult[T]:
        if self.constructor == type(None):
            if self.obj is not None:
                raise DeserializeError(
                    type(None), self.obj, self.new_depth, self.key
                )
            return self.obj  # type: ignore
        return NO_RESULT

    def _check_undefined(self) -> PossibleResult[T]:
        if self.constructor == Missing:
            if self.obj is not MISSING:
                raise DeserializeError(
                    Missing, self.obj, self.new_depth, self.key
                )
            return self.obj  # type: ignore
        return NO_RESULT

    def _check_float(self) -> PossibleResult[T]:
        """Floats accept ints (`l = 1` in TOML) but never bools."""
        if self.constructor is float:
            if isinstance(self.obj, bool) or not isinstance(
                self.obj, (int, float)
            ):
                raise DeserializeError(
                    float, self.obj, self.new_depth, self.key
                )
            return float(self.obj)  # type: ignore
        return NO_RESULT

    def _check_primitive(self) -> PossibleResult[T]:
        if self.constructor in _PRIMITIVES:
            # pylint: disable=unidiomatic-typecheck
            if type(self.obj) is not self.constructor:
                raise DeserializeError(
                    self.constructor, self.obj, self.new_depth, self.key
                )
            return self.obj
        return NO_RESULT

    def _check_literal(self) -> PossibleResult[T]:
        """Literal values must match in value and type."""
        if self.constructor_origin == Literal:
            for arg in self.constructor_args:
                # pylint: disable=unidiomatic-typecheck
                if self.obj == arg and type(self.obj) == type(arg):
                    return self.obj
            raise DeserializeError(
                self.constructor,
                self.obj,
                self.new_depth,
                self.key,
                message_postfix=f"with value {repr(self.obj)}",
            )
        return NO_RESULT

    def _check_enum(self) -> PossibleResult[T]:
        """Enums load from their value."""
        if isinstance(self.constructor, type) and issubclass(
            self.constructor, Enum
        ):
            return self.constructor(self.obj)  # type: ignore
        return NO_RESULT

    def _check_any(self) -> PossibleResult[T]:
        if self.constructor in _ANY:
            return self.obj  # type: ignore
        return NO_RESULT

    def _check_union(self) -> PossibleResult[T]:
        if not _is_union(self.constructor):
            return NO_RESULT
        args = get_args(self.constructor)
        if type(None) in args and self.obj is None:
            return None  # type: ignore
        if Missing in args and self.obj is MISSING:
            return MISSING  # type: ignore
        for argument in args:
            try:
                return Deserialize(
                    obj=self.obj, constructor=argument, depth=self.new_depth
                ).run()
            except DeserializeError:
                pass
        raise DeserializeError(
            self.constructor, self.obj, self.new_depth, self.key
        )


def _is_union(typeval: Type) -> bool:
    return get_origin(typeval) is Union


_PRIMITIVES = {str, int, bool}

_ANY = {Any, object}
