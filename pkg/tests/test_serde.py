"""Test loading and dumping typed records."""

import enum
from dataclasses import dataclass, field
from typing import Dict, List, Literal, Optional, Tuple, Union

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from aster import (
    DeserializeError,
    OptionalProperty,
    SerializeError,
    dump,
    is_missing,
    load,
)
from aster.overrides import positive, validated
from aster.typedefs import MISSING

# pylint: disable=missing-class-docstring,missing-function-docstring


class Mode(enum.Enum):
    HOVER = "hover"
    TRACK = "track"


@dataclass
class Leg:
    name: str
    speed: float = 1.0


@dataclass
class Marker:
    ids: List[int]


@dataclass
class Mission:
    # pylint: disable=too-many-instance-attributes
    count: int
    label: str
    gain: float
    first: Leg
    legs: List[Leg]
    note: OptionalProperty[Optional[str]]
    mixed: List[Union[Marker, str]]
    anything: List
    markers: Dict[int, Marker]
    totals: Dict[str, int]
    pair: Tuple[int, str]
    sizes: Tuple[int, ...]
    mode: Mode
    frame: Literal["world", "body"]
    default: str = "default_value"
    default_with_value: str = "default_value"


@dataclass(frozen=True)
class Gains:
    kp: float = field(default=1.0, metadata=validated(positive))


@dataclass(frozen=True)
class Controller:
    name: str
    gains: Gains = field(default_factory=Gains)


FLOATS = st.floats(allow_nan=False, allow_infinity=False)
LEG = st.fixed_dictionaries({"name": st.text()}, optional={"speed": FLOATS})
MARKER = st.fixed_dictionaries({"ids": st.lists(st.integers())})
MISSION = st.fixed_dictionaries(
    {
        "count": st.integers(),
        "label": st.text(),
        "gain": st.one_of(
            FLOATS, st.integers(min_value=-(10**6), max_value=10**6)
        ),
        "first": LEG,
        "legs": st.lists(LEG),
        "mixed": st.lists(st.one_of(MARKER, st.text())),
        "anything": st.lists(st.text()),
        "markers": st.dictionaries(st.integers(), MARKER),
        "totals": st.dictionaries(st.text(), st.integers()),
        "pair": st.tuples(st.integers(), st.text()),
        "sizes": st.lists(st.integers()),
        "mode": st.sampled_from(["hover", "track"]),
        "frame": st.sampled_from(["world", "body"]),
        "default_with_value": st.text(),
    },
    optional={"note": st.one_of(st.text(), st.none())},
)


def as_leg(data: dict) -> Leg:
    return Leg(**data)


@given(MISSION)
def test_load_mission(data: dict):
    mission = load(data, Mission)
    assert mission.default == "default_value"
    assert mission.default_with_value == data["default_with_value"]
    assert mission.count == data["count"]
    assert mission.gain == data["gain"]
    assert isinstance(mission.gain, float)
    assert mission.first == as_leg(data["first"])
    assert mission.legs == [as_leg(leg) for leg in data["legs"]]
    assert mission.mixed == [
        Marker(**value) if isinstance(value, dict) else value
        for value in data["mixed"]
    ]
    assert mission.anything == data["anything"]
    assert mission.markers == {
        key: Marker(**value) for key, value in data["markers"].items()
    }
    assert mission.totals == data["totals"]
    assert mission.pair == data["pair"]
    assert mission.sizes == tuple(data["sizes"])
    assert mission.mode is Mode(data["mode"])
    assert mission.frame == data["frame"]
    if "note" in data:
        assert mission.note == data["note"]
    else:
        assert is_missing(mission.note)


def test_wrong_literal_is_rejected():
    with pytest.raises(DeserializeError):
        load("inertial", Literal["world", "body"])


def test_bool_is_not_a_float():
    with pytest.raises(DeserializeError):
        load({"name": "pd", "gains": {"kp": True}}, Controller)


def test_dump_numpy_and_enums():
    assert dump({"v": np.arange(3.0), "m": Mode.HOVER, "s": np.int64(4)}) == {
        "v": [0.0, 1.0, 2.0],
        "m": "hover",
        "s": 4,
    }


def test_validator_error_carries_key_path():
    with pytest.raises(DeserializeError) as info:
        load({"name": "pd", "gains": {"kp": -2.0}}, Controller)
    assert info.value.path == ["gains", "kp"]
    assert "strictly positive" in info.value.reason


def test_missing_key_is_reported():
    with pytest.raises(DeserializeError) as info:
        load({"gains": {}}, Controller)
    assert "missing required key 'name'" in str(info.value)


def test_unknown_key_is_rejected():
    with pytest.raises(DeserializeError) as info:
        load({"name": "pd", "gains": {"kd": 1.0}}, Controller)
    assert info.value.path == ["gains"]
    assert "unknown keys ['kd']" in info.value.reason


def test_defaults_are_dumped():
    assert dump(load({"name": "pd"}, Controller)) == {
        "name": "pd",
        "gains": {"kp": 1.0},
    }


def test_missing_values_are_dropped():
    mission = load(
        {
            "count": 1,
            "label": "a",
            "gain": 0.5,
            "first": {"name": "climb"},
            "legs": [],
            "mixed": [],
            "anything": [],
            "markers": {},
            "totals": {},
            "pair": [1, "b"],
            "sizes": [],
            "mode": "hover",
            "frame": "world",
        },
        Mission,
    )
    assert "note" not in dump(mission)
    assert dump([MISSING, 1]) == [1]
    assert dump({"a": MISSING, "b": 2}) == {"b": 2}
    with pytest.raises(SerializeError):
        dump(MISSING)
