"""Track evaluation, parameter sweeps and trajectory CSV files.

A track counts as a success when every waypoint is traversed before the
per-track timeout (`EnvConfig.track_timeout`). Episodes on different
tracks are independent and may run on worker threads; reports are always
ordered by track id.
"""

import csv
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Dict, List, Optional, Protocol, Sequence, Union

import numpy as np
import torch

from .dynamics import PhysicalParams
from .env import (
    AsterEnv,
    EnvConfig,
    ResetMode,
    RewardBreakdown,
    num_workers,
)
from .hdss import SeedConfig
from .policy import ActorCritic
from .rotations import E3, thrust_frame, to_quaternion, vee
from .seeding import SeedManager
from .tracks import Track, random_track
from .typedefs import Vector

logger = logging.getLogger(__name__)

TRAJECTORY_COLUMNS = (
    ["t"]
    + [f"x_q_{axis}" for axis in "xyz"]
    + [f"v_q_{axis}" for axis in "xyz"]
    + ["q_w", "q_x", "q_y", "q_z"]
    + [f"omega_{axis}" for axis in "xyz"]
    + [f"x_l_{axis}" for axis in "xyz"]
    + [f"v_l_{axis}" for axis in "xyz"]
    + ["phase", "a_T", "a_wx", "a_wy", "a_wz"]
    + ["r_target", "r_safe", "r_crash", "r_smooth"]
)
EVENTS_COLUMN = "events"
TRAVERSAL_EVENT = "traversal"

REPORT_COLUMNS = (
    "track_id",
    "track",
    "waypoints",
    "success",
    "completion_time",
    "traversals",
    "avg_velocity",
    "max_velocity",
)
SWEEP_COLUMNS = (
    "param",
    "variation",
    "success_rate",
    "avg_completion_time",
    "avg_velocity",
    "max_velocity",
)
SWEEP_PARAMS = ("m_l", "l")
DEFAULT_VARIATIONS = (-0.4, -0.2, 0.0, 0.2, 0.4)

__all__ = [
    "Policy",
    "HoverPolicy",
    "RandomPolicy",
    "OraclePolicy",
    "CheckpointPolicy",
    "TrajectoryRow",
    "TrackRecord",
    "EvalReport",
    "SweepRow",
    "evaluation_tracks",
    "run_episode",
    "evaluate",
    "sweep",
    "write_eval_report",
    "write_trajectory_csv",
    "read_trajectory_csv",
    "write_sweep_csv",
    "read_sweep_csv",
]


class Policy(Protocol):
    def __call__(self, obs: Vector, env: AsterEnv) -> Vector:
        ...


PolicyFactory = Callable[[int], Policy]


class HoverPolicy:
    """Hover thrust and zero body rates."""

    def __call__(self, obs: Vector, env: AsterEnv) -> Vector:
        a_thrust = 2.0 * env.params.hover_thrust / env.params.T_max - 1.0
        return np.array([a_thrust, 0.0, 0.0, 0.0])


class RandomPolicy:
    def __init__(self, rng: np.random.Generator):
        self.rng = rng

    def __call__(self, obs: Vector, env: AsterEnv) -> Vector:
        return self.rng.uniform(-1.0, 1.0, size=4)


class OraclePolicy:
    """Scripted geometric controller flying through upright waypoints.

    Aims `lead` metres past the current waypoint along its x_T axis with a
    capped approach speed, heading along the waypoint yaw. It never flips,
    so inverted waypoints are not traversed.
    """

    # pylint: disable=too-many-arguments

    def __init__(
        self,
        speed: float = 1.5,
        kp: float = 4.0,
        kd: float = 3.0,
        k_att: float = 6.0,
        lead: float = 1.0,
    ):
        self.speed = speed
        self.kp = kp
        self.kd = kd
        self.k_att = k_att
        self.lead = lead

    def __call__(self, obs: Vector, env: AsterEnv) -> Vector:
        state, params = env.state, env.params
        waypoint = env.cursor.current
        to_aim = waypoint.position + self.lead * waypoint.x_T - state.x_q
        distance = float(np.linalg.norm(to_aim))
        scale = min(1.0, distance)
        direction = to_aim / distance if distance > 1e-9 else np.zeros(3)
        accel = self.kp * scale * direction + self.kd * (
            self.speed * scale * direction - state.v_q
        )
        thrust = params.total_mass / params.m_q * (accel - params.g_vec)
        z_des = thrust / np.linalg.norm(thrust)
        if z_des[2] < 0.2:
            z_des = E3
        R_des = thrust_frame(z_des, waypoint.yaw)
        error = 0.5 * vee(R_des.T @ state.R - state.R.T @ R_des)
        omega_cmd = -self.k_att * error
        T_cmd = float(np.clip(thrust @ state.R @ E3, 0.0, params.T_max))
        return np.clip(
            np.concatenate(
                (
                    [2.0 * T_cmd / params.T_max - 1.0],
                    omega_cmd / np.array(params.omega_max),
                )
            ),
            -1.0,
            1.0,
        )


class CheckpointPolicy:
    """Deterministic (mean) action of a trained actor."""

    def __init__(self, model: ActorCritic):
        self.model = model

    def __call__(self, obs: Vector, env: AsterEnv) -> Vector:
        with torch.no_grad():
            mean, _ = self.model(torch.as_tensor(obs, dtype=self.model.dtype))
        return mean.double().numpy()


@dataclass(frozen=True)
class TrajectoryRow:
    values: List[float]
    phase: str
    events: List[str]

    def as_csv(self) -> List[str]:
        numbers = [repr(float(v)) for v in self.values]
        head, tail = numbers[:20], numbers[20:]
        return head + [self.phase] + tail + [";".join(self.events)]


@dataclass(frozen=True)
class TrackRecord:
    # pylint: disable=too-many-instance-attributes
    track_id: int
    track: str
    waypoints: int
    success: bool
    completion_time: float
    traversals: int
    avg_velocity: float
    max_velocity: float
    trajectory: List[TrajectoryRow] = field(
        default_factory=list, compare=False, repr=False
    )


@dataclass(frozen=True)
class EvalReport:
    success_rate: float
    avg_completion_time: float
    avg_velocity: float
    max_velocity: float
    records: List[TrackRecord]

    @classmethod
    def from_records(cls, records: Sequence[TrackRecord]) -> "EvalReport":
        ordered = sorted(records, key=lambda record: record.track_id)
        times = [r.completion_time for r in ordered if r.success]
        speeds = [r.avg_velocity for r in ordered]
        return cls(
            success_rate=(
                sum(r.success for r in ordered) / len(ordered)
                if ordered
                else 0.0
            ),
            avg_completion_time=float(np.mean(times)) if times else math.nan,
            avg_velocity=float(np.mean(speeds)) if speeds else 0.0,
            max_velocity=max((r.max_velocity for r in ordered), default=0.0),
            records=ordered,
        )

    def summary(self) -> str:
        return (
            f"tracks: {len(self.records)}\n"
            f"success rate: {self.success_rate:.3f}\n"
            f"average completion time: {self.avg_completion_time:.3f} s\n"
            f"average velocity: {self.avg_velocity:.3f} m/s\n"
            f"max velocity: {self.max_velocity:.3f} m/s\n"
        )


@dataclass(frozen=True)
class SweepRow:
    param: str
    variation: float
    success_rate: float
    avg_completion_time: float
    avg_velocity: float
    max_velocity: float


def evaluation_config(cfg: EnvConfig) -> EnvConfig:
    """Nominal parameters and a step cap matching the track timeout."""
    return replace(
        cfg,
        domain_randomization=False,
        max_episode_steps=int(math.ceil(cfg.track_timeout / cfg.dt)),
    )


def evaluation_tracks(
    count: int, waypoints: int, cfg: EnvConfig, seeds: SeedManager
) -> List[Track]:
    return [
        random_track(
            waypoints, seeds.generator("tracks", i), cfg, name=f"random-{i}"
        )
        for i in range(count)
    ]


def _trajectory_row(
    env: AsterEnv, action: Vector, reward: RewardBreakdown, info: Dict
) -> TrajectoryRow:
    state = env.state
    events = [event.value for event in info["events"]]
    if reward.traversed:
        events.append(TRAVERSAL_EVENT)
    values = np.concatenate(
        (
            [state.t],
            state.x_q,
            state.v_q,
            to_quaternion(state.R),
            state.omega,
            state.x_l,
            state.v_l,
            action,
            [reward.r_target, reward.r_safe, reward.r_crash, reward.r_smooth],
        )
    )
    return TrajectoryRow(
        values=values.tolist(), phase=state.phase.value, events=events
    )


def run_episode(
    track_id: int,
    track: Track,
    policy: Policy,
    cfg: EnvConfig,
    params: PhysicalParams,
    rng: np.random.Generator,
    keep_trajectory: bool = False,
) -> TrackRecord:
    """Fly one track from hover at its start position."""
    env = AsterEnv(
        evaluation_config(cfg),
        params,
        SeedConfig(),
        rng,
        ResetMode.HOVER,
        track,
    )
    obs = env.reset()
    speeds: List[float] = []
    rows: List[TrajectoryRow] = []
    done = False
    info: Dict = {"reason": "", "traversals": 0}
    while not done:
        action = np.clip(policy(obs, env), -1.0, 1.0)
        obs, reward, done, info = env.step(action)
        speeds.append(float(np.linalg.norm(env.state.v_q)))
        if keep_trajectory:
            rows.append(_trajectory_row(env, action, reward, info))
    success = info["reason"] == "track_complete"
    record = TrackRecord(
        track_id=track_id,
        track=track.name,
        waypoints=len(track),
        success=success,
        completion_time=env.state.t if success else math.nan,
        traversals=info["traversals"],
        avg_velocity=float(np.mean(speeds)),
        max_velocity=float(np.max(speeds)),
        trajectory=rows,
    )
    logger.debug(
        "track %d (%s): %s after %.2f s",
        track_id,
        track.name,
        info["reason"],
        env.state.t,
    )
    return record


def evaluate(
    policy_factory: PolicyFactory,
    tracks: Sequence[Track],
    cfg: EnvConfig,
    params: PhysicalParams,
    seeds: SeedManager,
    keep_trajectory: bool = False,
    workers: Optional[int] = None,
) -> EvalReport:
    """Run every track once; `policy_factory(track_id)` builds its policy."""

    def _run(track_id: int) -> TrackRecord:
        return run_episode(
            track_id,
            tracks[track_id],
            policy_factory(track_id),
            cfg,
            params,
            seeds.generator("eval", track_id),
            keep_trajectory,
        )

    workers = min(workers or num_workers(), max(len(tracks), 1))
    if workers <= 1:
        records = [_run(i) for i in range(len(tracks))]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_run, range(len(tracks))))
    report = EvalReport.from_records(records)
    logger.info(
        "evaluated %d tracks: success rate %.3f",
        len(tracks),
        report.success_rate,
    )
    return report


def sweep(
    policy_factory: PolicyFactory,
    tracks: Sequence[Track],
    cfg: EnvConfig,
    params: PhysicalParams,
    seeds: SeedManager,
    param: str,
    variations: Sequence[float] = DEFAULT_VARIATIONS,
    workers: Optional[int] = None,
) -> List[SweepRow]:
    """Evaluate with one parameter scaled by (1 + variation) per row."""
    if param not in SWEEP_PARAMS:
        raise ValueError(f"sweep parameter must be one of {SWEEP_PARAMS}")
    rows = []
    for variation in variations:
        scaled = replace(
            params, **{param: getattr(params, param) * (1.0 + variation)}
        )
        report = evaluate(
            policy_factory, tracks, cfg, scaled, seeds, workers=workers
        )
        rows.append(
            SweepRow(
                param=param,
                variation=float(variation),
                success_rate=report.success_rate,
                avg_completion_time=report.avg_completion_time,
                avg_velocity=report.avg_velocity,
                max_velocity=report.max_velocity,
            )
        )
    return rows


def write_eval_report(report: EvalReport, out_dir: Union[str, Path]) -> None:
    """Write eval_report.csv, eval_summary.txt and kept trajectories."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with (out / "eval_report.csv").open(
        "w", newline="", encoding="utf-8"
    ) as stream:
        writer = csv.writer(stream)
        writer.writerow(REPORT_COLUMNS)
        for record in report.records:
            writer.writerow(
                [
                    record.track_id,
                    record.track,
                    record.waypoints,
                    int(record.success),
                    repr(record.completion_time),
                    record.traversals,
                    repr(record.avg_velocity),
                    repr(record.max_velocity),
                ]
            )
            if record.trajectory:
                write_trajectory_csv(
                    record.trajectory,
                    out / f"trajectory_{record.track_id:04d}.csv",
                )
    (out / "eval_summary.txt").write_text(report.summary(), encoding="utf-8")


def write_trajectory_csv(
    rows: Sequence[TrajectoryRow], path: Union[str, Path]
) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as stream:
        writer = csv.writer(stream)
        writer.writerow(TRAJECTORY_COLUMNS + [EVENTS_COLUMN])
        for row in rows:
            writer.writerow(row.as_csv())


def read_trajectory_csv(path: Union[str, Path]) -> List[Dict[str, str]]:
    with Path(path).open(newline="", encoding="utf-8") as stream:
        return list(csv.DictReader(stream))


def trajectory_speeds(rows: Sequence[Dict[str, str]]) -> List[float]:
    """Quadrotor speeds recomputed from trajectory CSV rows."""
    return [
        math.sqrt(sum(float(row[f"v_q_{axis}"]) ** 2 for axis in "xyz"))
        for row in rows
    ]


def write_sweep_csv(rows: Sequence[SweepRow], path: Union[str, Path]) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as stream:
        writer = csv.writer(stream)
        writer.writerow(SWEEP_COLUMNS)
        for row in rows:
            writer.writerow(
                [
                    row.param,
                    repr(row.variation),
                    repr(row.success_rate),
                    repr(row.avg_completion_time),
                    repr(row.avg_velocity),
                    repr(row.max_velocity),
                ]
            )


def read_sweep_csv(path: Union[str, Path]) -> List[SweepRow]:
    with Path(path).open(newline="", encoding="utf-8") as stream:
        return [
            SweepRow(
                param=row["param"],
                **{name: float(row[name]) for name in SWEEP_COLUMNS[1:]},
            )
            for row in csv.DictReader(stream)
        ]
