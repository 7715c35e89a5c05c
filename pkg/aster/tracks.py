"""SE(3) waypoints, tracks and the track file format.

A waypoint is a position plus a target frame T. Upright waypoints have
``R_TW = Rz(yaw)``; inverted waypoints point their z-axis straight down,
``R_TW = Rz(yaw) Rx(pi)``, so their x-axis still points at heading `yaw`.
A waypoint counts as traversed when the quadrotor crosses its plane moving
along +x_T.

Named tracks (all coordinates in metres, yaw in radians):

Ribbon
    start (-5, 0, 3). Upright (-3, 0, 3) yaw 0; inverted (0, 0, 4.5)
    yaw 0; upright (3, 0, 3) yaw 0.

Croissant
    start (-2, -4, 3). Eleven waypoints on a half circle of radius 4 about
    the z-axis, from angle -pi/2 to pi/2 in steps of pi/10, at height
    ``3 + 1.5 sin(pi k / 10)``; yaw is the counter-clockwise tangent.
    Waypoints 4, 5 and 6 are inverted.

MultiHeading
    start (-7.5, 0, 3). Nine waypoints at x = -6 + 1.5 k, y = +-1
    alternating, z = 3 on even k and 4.5 on odd k. Even k are upright with
    yaw 0; odd k are inverted with yaws 0.5, 1.5, 2.5 and -2.0.

Track files are JSON::

    {
      "name": "ribbon",
      "metadata": {"start": [-5, 0, 3]},
      "waypoints": [
        {"p": [x, y, z], "q": [w, x, y, z], "kind": "upright", "yaw": 0}
      ]
    }

Floats are written with 17 significant digits. The rotation is rebuilt
from `kind` and `yaw` on load; `q` is optional and, when present, must
be a unit quaternion matching that rotation.
"""

import enum
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import (
    TYPE_CHECKING,
    Any,
    Dict,
    List,
    Optional,
    Tuple,
    Union,
)

import numpy as np

from .deserialize import load
from .errors import DeserializeError, TrackFileError, WaypointError
from .overrides import vector_of, with_override
from .rotations import (
    from_quaternion,
    is_rotation,
    rot_x,
    rot_z,
    to_quaternion,
)
from .serialize import dump
from .typedefs import MISSING, Matrix, OptionalProperty, Vector

if TYPE_CHECKING:
    from .env import EnvConfig

logger = logging.getLogger(__name__)

START_BACKOFF = 2.0
QUATERNION_TOLERANCE = 1e-9


class WaypointKind(enum.Enum):
    UPRIGHT = "upright"
    INVERTED = "inverted"


class TrackName(enum.Enum):
    RIBBON = "Ribbon"
    CROISSANT = "Croissant"
    MULTI_HEADING = "MultiHeading"


@dataclass(frozen=True)
class Workspace:
    """Axis-aligned box the quadrotor and payload must stay inside."""

    low: Tuple[float, float, float] = field(
        default=(-8.0, -8.0, 0.1), metadata=with_override(vector_of(3))
    )
    high: Tuple[float, float, float] = field(
        default=(8.0, 8.0, 8.0), metadata=with_override(vector_of(3))
    )

    def __post_init__(self) -> None:
        if not all(lo < hi for lo, hi in zip(self.low, self.high)):
            raise ValueError(f"empty workspace {self.low} .. {self.high}")

    @property
    def center(self) -> Vector:
        return 0.5 * (np.array(self.low) + np.array(self.high))

    def contains(self, point: Vector, margin: float = 0.0) -> bool:
        point = np.asarray(point)
        return bool(
            np.all(point >= np.array(self.low) + margin)
            and np.all(point <= np.array(self.high) - margin)
        )

    def clamp(self, point: Vector, margin: float = 0.0) -> Vector:
        return np.clip(
            point, np.array(self.low) + margin, np.array(self.high) - margin
        )

    def sample(
        self, rng: np.random.Generator, margin: float = 0.0
    ) -> Vector:
        return rng.uniform(
            np.array(self.low) + margin, np.array(self.high) - margin
        )


@dataclass(frozen=True, eq=False)
class Waypoint:
    position: Vector
    R_TW: Matrix
    kind: WaypointKind
    yaw: float

    @property
    def x_T(self) -> Vector:  # pylint: disable=invalid-name
        return self.R_TW[:, 0]

    def __eq__(self, other: Any) -> bool:
        if not isinstance(other, Waypoint):
            return NotImplemented
        return (
            self.kind is other.kind
            and self.yaw == other.yaw
            and np.array_equal(self.position, other.position)
            and np.array_equal(self.R_TW, other.R_TW)
        )

    def __hash__(self) -> int:
        return hash((self.kind, self.yaw, tuple(self.position)))


@dataclass(frozen=True)
class Track:
    waypoints: Tuple[Waypoint, ...]
    name: str = "track"
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.waypoints:
            raise WaypointError(f"track {self.name!r} has no waypoints")

    def __len__(self) -> int:
        return len(self.waypoints)

    @property
    def start(self) -> Vector:
        """Initial quadrotor position for an episode on this track."""
        if "start" in self.metadata:
            return np.array(self.metadata["start"], dtype=float)
        first = self.waypoints[0]
        return first.position - START_BACKOFF * first.x_T

    @property
    def inverted_count(self) -> int:
        return sum(wp.kind is WaypointKind.INVERTED for wp in self.waypoints)


def target_rotation(kind: WaypointKind, yaw: float) -> Matrix:
    if kind is WaypointKind.UPRIGHT:
        return rot_z(yaw)
    return rot_z(yaw) @ rot_x(math.pi)


def make_waypoint(
    position: Union[Vector, Tuple[float, float, float]],
    kind: WaypointKind,
    yaw: float,
    workspace: Workspace = Workspace(),
) -> Waypoint:
    """Build a waypoint; positions outside the workspace are rejected."""
    point = np.array(position, dtype=float)
    if point.shape != (3,) or not workspace.contains(point):
        raise WaypointError(f"waypoint {point.tolist()} outside workspace")
    return Waypoint(
        position=point,
        R_TW=target_rotation(kind, float(yaw)),
        kind=kind,
        yaw=float(yaw),
    )


def resample_waypoint(
    current: Waypoint, rng: np.random.Generator, cfg: "EnvConfig"
) -> Waypoint:
    """Next waypoint inside a box relative to the current one.

    Draw order per call: three offsets, the kind, then the yaw. Upright
    waypoints face the direction of travel; inverted yaw is uniform.
    """
    offset = rng.uniform(cfg.resample_low, cfg.resample_high)
    inverted = rng.random() < cfg.inverted_fraction
    yaw_draw = rng.uniform(0.0, 2.0 * math.pi)
    position = cfg.workspace.clamp(
        current.position + offset, cfg.waypoint_margin
    )
    if inverted:
        return make_waypoint(
            position, WaypointKind.INVERTED, yaw_draw, cfg.workspace
        )
    heading = math.atan2(offset[1], offset[0])
    return make_waypoint(
        position, WaypointKind.UPRIGHT, heading, cfg.workspace
    )


def random_track(
    n: int, rng: np.random.Generator, cfg: "EnvConfig", name: str = "random"
) -> Track:
    """Chain `n` resampled waypoints from the workspace centre."""
    if n < 1:
        raise ValueError(f"track needs at least one waypoint, got {n}")
    start = cfg.workspace.center
    anchor = Waypoint(
        position=start, R_TW=np.eye(3), kind=WaypointKind.UPRIGHT, yaw=0.0
    )
    waypoints = []
    for _ in range(n):
        anchor = resample_waypoint(anchor, rng, cfg)
        waypoints.append(anchor)
    return Track(
        waypoints=tuple(waypoints),
        name=name,
        metadata={"start": start.tolist()},
    )


def _ribbon(workspace: Workspace) -> Track:
    spec = [
        ((-3.0, 0.0, 3.0), WaypointKind.UPRIGHT, 0.0),
        ((0.0, 0.0, 4.5), WaypointKind.INVERTED, 0.0),
        ((3.0, 0.0, 3.0), WaypointKind.UPRIGHT, 0.0),
    ]
    return Track(
        waypoints=tuple(make_waypoint(*item, workspace) for item in spec),
        name=TrackName.RIBBON.value,
        metadata={"start": [-5.0, 0.0, 3.0]},
    )


def _croissant(workspace: Workspace) -> Track:
    waypoints = []
    for k in range(11):
        angle = -math.pi / 2 + k * math.pi / 10
        position = (
            4.0 * math.cos(angle),
            4.0 * math.sin(angle),
            3.0 + 1.5 * math.sin(math.pi * k / 10),
        )
        kind = (
            WaypointKind.INVERTED if k in (4, 5, 6) else WaypointKind.UPRIGHT
        )
        waypoints.append(
            make_waypoint(position, kind, angle + math.pi / 2, workspace)
        )
    return Track(
        waypoints=tuple(waypoints),
        name=TrackName.CROISSANT.value,
        metadata={"start": [-2.0, -4.0, 3.0]},
    )


def _multi_heading(workspace: Workspace) -> Track:
    inverted_yaws = iter((0.5, 1.5, 2.5, -2.0))
    waypoints = []
    for k in range(9):
        side = 1.0 if k % 2 else -1.0
        position = (-6.0 + 1.5 * k, side, 3.0 + 1.5 * (k % 2))
        if k % 2:
            waypoints.append(
                make_waypoint(
                    position,
                    WaypointKind.INVERTED,
                    next(inverted_yaws),
                    workspace,
                )
            )
        else:
            waypoints.append(
                make_waypoint(position, WaypointKind.UPRIGHT, 0.0, workspace)
            )
    return Track(
        waypoints=tuple(waypoints),
        name=TrackName.MULTI_HEADING.value,
        metadata={"start": [-7.5, 0.0, 3.0]},
    )


_NAMED = {
    TrackName.RIBBON: _ribbon,
    TrackName.CROISSANT: _croissant,
    TrackName.MULTI_HEADING: _multi_heading,
}


def named_track(
    name: Union[TrackName, str], cfg: Optional["EnvConfig"] = None
) -> Track:
    workspace = cfg.workspace if cfg is not None else Workspace()
    return _NAMED[TrackName(name)](workspace)


@dataclass
class WaypointRecord:
    p: Tuple[float, float, float] = field(metadata=with_override(vector_of(3)))
    kind: WaypointKind
    yaw: float
    q: OptionalProperty[Tuple[float, float, float, float]] = MISSING


@dataclass
class TrackRecord:
    name: str
    waypoints: List[WaypointRecord]
    metadata: Dict[str, Any] = field(default_factory=dict)


def _encode(obj: Any) -> str:
    """JSON text with every float at 17 significant digits."""
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, float):
        if not math.isfinite(obj):
            raise ValueError(f"cannot write non-finite value {obj!r}")
        text = format(obj, ".17g")
        return text if any(c in text for c in ".e") else text + ".0"
    if isinstance(obj, (int, str)):
        return json.dumps(obj)
    if isinstance(obj, dict):
        items = ", ".join(
            f"{json.dumps(str(key))}: {_encode(value)}"
            for key, value in obj.items()
        )
        return "{" + items + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(_encode(value) for value in obj) + "]"
    raise TypeError(f"cannot encode {type(obj)!r}")


def dumps_track(track: Track) -> str:
    records = [
        dump(
            WaypointRecord(
                p=tuple(float(x) for x in wp.position),  # type: ignore
                kind=wp.kind,
                yaw=wp.yaw,
                q=tuple(  # type: ignore
                    float(x) for x in to_quaternion(wp.R_TW)
                ),
            )
        )
        for wp in track.waypoints
    ]
    lines = [
        "{",
        f'  "name": {_encode(track.name)},',
        f'  "metadata": {_encode(dump(track.metadata))},',
        '  "waypoints": [',
        ",\n".join("    " + _encode(record) for record in records),
        "  ]",
        "}",
    ]
    return "\n".join(lines) + "\n"


def save_track(track: Track, path: Union[str, Path]) -> None:
    Path(path).write_text(dumps_track(track), encoding="utf-8")


def _waypoint_from_record(
    record: WaypointRecord, index: int, source: str
) -> Waypoint:
    try:
        waypoint = make_waypoint(record.p, record.kind, record.yaw)
    except WaypointError as error:
        raise TrackFileError(
            source, str(error), field=["waypoints", index, "p"]
        ) from error
    if record.q is not MISSING:
        quat = np.array(record.q, dtype=float)
        norm = float(np.linalg.norm(quat))
        if abs(norm - 1.0) > QUATERNION_TOLERANCE:
            raise TrackFileError(
                source,
                f"quaternion norm {norm!r} does not describe a rotation",
                field=["waypoints", index, "q"],
            )
        rot = from_quaternion(quat)
        if not is_rotation(rot) or not np.allclose(
            rot, waypoint.R_TW, atol=QUATERNION_TOLERANCE
        ):
            raise TrackFileError(
                source,
                "quaternion disagrees with kind/yaw rotation",
                field=["waypoints", index, "q"],
            )
    return waypoint


def loads_track(text: str, source: str = "<string>") -> Track:
    """Parse track file text.

    Raises:
        TrackFileError: invalid JSON (with line and column), a schema error
            (with the key path) or an invalid waypoint.
    """
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as error:
        raise TrackFileError(
            source, error.msg, line=error.lineno, column=error.colno
        ) from error
    try:
        record = load(raw, TrackRecord)
    except DeserializeError as error:
        raise TrackFileError(
            source, error.reason, field=error.path
        ) from error
    if not record.waypoints:
        raise TrackFileError(source, "no waypoints", field=["waypoints"])
    waypoints = tuple(
        _waypoint_from_record(wp, index, source)
        for index, wp in enumerate(record.waypoints)
    )
    return Track(
        waypoints=waypoints, name=record.name, metadata=record.metadata
    )


def load_track(path: Union[str, Path]) -> Track:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as error:
        raise TrackFileError(str(path), str(error.strerror)) from error
    return loads_track(text, str(path))


def parse_track_spec(spec: str, cfg: "EnvConfig") -> Track:
    """Resolve ``name:<Name>``, ``random:<n>:<seed>`` or a file path.

    Raises:
        TrackFileError: unknown name, malformed spec or bad track file.
    """
    try:
        if spec.startswith("name:"):
            return named_track(spec.split(":", 1)[1], cfg)
        if spec.startswith("random:"):
            _, count, seed = spec.split(":")
            return random_track(
                int(count),
                np.random.default_rng(int(seed)),
                cfg,
                name=f"random-{count}-{seed}",
            )
    except ValueError as error:
        raise TrackFileError(spec, f"bad track spec: {error}") from error
    return load_track(spec)
