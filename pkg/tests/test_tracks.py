"""Test waypoints, track generators and the track file format."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aster.env import EnvConfig
from aster.errors import TrackFileError, WaypointError
from aster.rotations import is_rotation
from aster.tracks import (
    TrackName,
    WaypointKind,
    Workspace,
    dumps_track,
    load_track,
    loads_track,
    make_waypoint,
    named_track,
    parse_track_spec,
    random_track,
    resample_waypoint,
    save_track,
)

# pylint: disable=missing-function-docstring,redefined-outer-name

CFG = EnvConfig()
SEEDS = st.integers(min_value=0, max_value=2**32 - 1)
MINIMAL = """{
  "name": "single",
  "waypoints": [{"p": [0.0, 0.0, 3.0], "kind": "upright", "yaw": 0.0}]
}
"""


def test_upright_yaw_zero_is_identity():
    waypoint = make_waypoint((0.0, 0.0, 3.0), WaypointKind.UPRIGHT, 0.0)
    assert np.array_equal(waypoint.R_TW, np.eye(3))


def test_inverted_axes():
    waypoint = make_waypoint(
        (0.0, 0.0, 3.0), WaypointKind.INVERTED, math.pi / 2
    )
    assert np.allclose(waypoint.x_T, [0.0, 1.0, 0.0])
    assert np.allclose(waypoint.R_TW[:, 2], [0.0, 0.0, -1.0], atol=1e-12)
    assert math.isclose(np.linalg.det(waypoint.R_TW), 1.0)


def test_waypoint_outside_workspace():
    with pytest.raises(WaypointError):
        make_waypoint((0.0, 0.0, 9.0), WaypointKind.UPRIGHT, 0.0)


def test_empty_workspace():
    with pytest.raises(ValueError):
        Workspace(low=(0.0, 0.0, 0.0), high=(1.0, 1.0, 0.0))


@settings(max_examples=20)
@given(SEEDS)
def test_random_track(seed):
    track = random_track(10, np.random.default_rng(seed), CFG)
    again = random_track(10, np.random.default_rng(seed), CFG)
    assert len(track) == 10
    assert dumps_track(track) == dumps_track(again)
    for waypoint in track.waypoints:
        assert CFG.workspace.contains(waypoint.position)
        assert is_rotation(waypoint.R_TW, 1e-12)
        if waypoint.kind is WaypointKind.INVERTED:
            assert math.isclose(
                -waypoint.R_TW[2, 2], 1.0, abs_tol=1e-9
            )


def test_resample_offsets_stay_in_box():
    rng = np.random.default_rng(0)
    current = make_waypoint((0.0, 0.0, 2.0), WaypointKind.UPRIGHT, 0.0)
    low = np.array(CFG.resample_low)
    high = np.array(CFG.resample_high)
    for _ in range(200):
        offset = resample_waypoint(current, rng, CFG).position - [0, 0, 2]
        assert np.all(offset >= low - 1e-12)
        assert np.all(offset <= high + 1e-12)


def test_resample_clamps_at_ceiling():
    rng = np.random.default_rng(1)
    top = make_waypoint((0.0, 0.0, 7.9), WaypointKind.UPRIGHT, 0.0)
    ceiling = CFG.workspace.high[2] - CFG.waypoint_margin
    for _ in range(50):
        assert resample_waypoint(top, rng, CFG).position[2] <= ceiling


def test_inverted_fraction():
    rng = np.random.default_rng(2)
    kinds = [
        waypoint.kind
        for _ in range(1000)
        for waypoint in random_track(10, rng, CFG).waypoints
    ]
    fraction = kinds.count(WaypointKind.INVERTED) / len(kinds)
    assert abs(fraction - CFG.inverted_fraction) < 0.02


def test_named_tracks():
    ribbon = named_track(TrackName.RIBBON)
    assert len(ribbon) == 3
    assert ribbon.inverted_count == 1
    croissant = named_track("Croissant")
    assert len(croissant) == 11
    kinds = [wp.kind for wp in croissant.waypoints]
    assert any(
        first is second is WaypointKind.INVERTED
        for first, second in zip(kinds, kinds[1:])
    )
    multi = named_track(TrackName.MULTI_HEADING)
    assert len(multi) == 9
    yaws = [
        wp.yaw for wp in multi.waypoints if wp.kind is WaypointKind.INVERTED
    ]
    assert len(set(yaws)) == len(yaws) > 1


@settings(max_examples=20)
@given(SEEDS)
def test_track_file_round_trip(seed):
    track = random_track(5, np.random.default_rng(seed), CFG)
    loaded = loads_track(dumps_track(track))
    assert loaded.waypoints == track.waypoints
    assert loaded.name == track.name
    assert np.array_equal(loaded.start, track.start)


def test_save_and_load(tmp_path):
    track = named_track(TrackName.CROISSANT)
    path = tmp_path / "croissant.json"
    save_track(track, path)
    assert load_track(path) == track


def test_minimal_file_loads():
    track = loads_track(MINIMAL)
    assert np.array_equal(track.waypoints[0].R_TW, np.eye(3))


def test_syntax_error_has_line():
    with pytest.raises(TrackFileError) as info:
        loads_track('{\n  "name": "x",\n  "waypoints": [,]\n}', "bad.json")
    assert info.value.line == 3
    assert str(info.value).startswith("bad.json:3:")


def test_schema_error_has_field():
    text = MINIMAL.replace('"upright"', '"sideways"')
    with pytest.raises(TrackFileError) as info:
        loads_track(text, "bad.json")
    assert info.value.field == ["waypoints", 0, "kind"]


def test_quaternion_must_match_rotation():
    text = MINIMAL.replace('"yaw": 0.0', '"yaw": 0.0, "q": [0, 1, 0, 0]')
    with pytest.raises(TrackFileError) as info:
        loads_track(text)
    assert info.value.field == ["waypoints", 0, "q"]


def test_non_unit_quaternion():
    text = MINIMAL.replace('"yaw": 0.0', '"yaw": 0.0, "q": [2, 0, 0, 0]')
    with pytest.raises(TrackFileError, match="does not describe a rotation"):
        loads_track(text)


def test_missing_file(tmp_path):
    with pytest.raises(TrackFileError):
        load_track(tmp_path / "absent.json")


def test_parse_track_spec(tmp_path):
    assert parse_track_spec("name:Ribbon", CFG).name == "Ribbon"
    assert len(parse_track_spec("random:4:9", CFG)) == 4
    path = tmp_path / "ribbon.json"
    save_track(named_track(TrackName.RIBBON), path)
    assert len(parse_track_spec(str(path), CFG)) == 3
    with pytest.raises(TrackFileError):
        parse_track_spec("name:Pretzel", CFG)
    with pytest.raises(TrackFileError):
        parse_track_spec("random:four:9", CFG)
