"""Attitude-aware waypoint traversal environment.

An episode flies the cable-suspended system through a sequence of SE(3)
waypoints. Observations are 37 scaled scalars, actions are normalised
4-vectors mapped to collective thrust and body-rate setpoints, and the
reward is the sum of a gated traversal term, a payload-above-rotors
penalty, a workspace crash penalty and an action smoothness penalty.
"""

import enum
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .dynamics import (
    PhaseEvent,
    PhysicalParams,
    SystemState,
    hover_state,
    hybrid_step,
)
from .errors import ConfigError, IntegrationError, SeedingError
from .hdss import SeedConfig, generate_seed
from .overrides import (
    non_negative,
    positive,
    positive_vector_of,
    unit_interval,
    validated,
    vector_of,
    with_override,
)
from .rotations import geodesic_angle
from .seeding import SeedManager
from .tracks import (
    Track,
    Waypoint,
    WaypointKind,
    Workspace,
    make_waypoint,
    resample_waypoint,
)
from .typedefs import Vector

logger = logging.getLogger(__name__)

OBSERVATION_SIZE = 37
ACTION_SIZE = 4

__all__ = [
    "EnvConfig",
    "Observation",
    "ActionCommand",
    "RewardBreakdown",
    "TraversalCheck",
    "ResetMode",
    "TrackCursor",
    "AsterEnv",
    "VecEnv",
    "build_observation",
    "map_action",
    "check_traversal",
    "attitude_error",
    "compute_reward",
    "choose_reset_mode",
    "reset",
    "randomize_params",
    "resample_waypoint",
    "num_workers",
]


@dataclass(frozen=True)
class EnvConfig:
    """Reward constants, observation scaling and episode settings.

    `epsilon_theta` is in degrees.
    """

    # pylint: disable=too-many-instance-attributes,invalid-name
    lambda1: float = field(default=10.0, metadata=validated(non_negative))
    lambda2: float = field(default=10.0, metadata=validated(non_negative))
    lambda3: float = field(default=1e-4, metadata=validated(non_negative))
    sigma_p: float = field(default=3.0, metadata=validated(positive))
    sigma_theta: float = field(default=2.0, metadata=validated(positive))
    C: float = field(default=5.0, metadata=validated(non_negative))
    L: float = field(default=0.75, metadata=validated(positive))
    epsilon_theta: float = field(default=25.0, metadata=validated(positive))
    r_exceed: float = field(default=3.0, metadata=validated(positive))
    r_bound: float = field(default=10.0, metadata=validated(positive))
    k_q: Tuple[float, float, float] = field(
        default=(4.0, 4.0, 3.0), metadata=with_override(positive_vector_of(3))
    )
    k_v: Tuple[float, float, float] = field(
        default=(5.0, 5.0, 5.0), metadata=with_override(positive_vector_of(3))
    )
    k_l: Tuple[float, float, float] = field(
        default=(0.5, 0.5, 0.5), metadata=with_override(positive_vector_of(3))
    )
    workspace: Workspace = Workspace()
    dt: float = field(default=0.01, metadata=validated(positive))
    hdss_fraction: float = field(
        default=0.9, metadata=validated(unit_interval)
    )
    dr_fraction: float = field(default=0.2, metadata=validated(unit_interval))
    domain_randomization: bool = True
    max_episode_steps: int = field(default=1500, metadata=validated(positive))
    hover_margin: float = field(default=0.5, metadata=validated(non_negative))
    resample_low: Tuple[float, float, float] = field(
        default=(-2.0, -2.0, 0.5), metadata=with_override(vector_of(3))
    )
    resample_high: Tuple[float, float, float] = field(
        default=(2.0, 2.0, 3.0), metadata=with_override(vector_of(3))
    )
    inverted_fraction: float = field(
        default=0.5, metadata=validated(unit_interval)
    )
    waypoint_margin: float = field(
        default=0.5, metadata=validated(non_negative)
    )
    track_timeout: float = field(default=30.0, metadata=validated(positive))

    @property
    def epsilon_theta_rad(self) -> float:
        return math.radians(self.epsilon_theta)


class ResetMode(enum.Enum):
    AUTO = "auto"
    HDSS = "hdss"
    HOVER = "hover"


@dataclass(frozen=True, eq=False)
class Observation:
    dx1: Vector
    dx2: Vector
    v_q: Vector
    R_BT: Vector
    x_l_B: Vector
    v_l: Vector
    R_TW: Vector
    a_prev: Vector

    def as_array(self) -> Vector:
        return np.concatenate(
            [
                self.dx1,
                self.dx2,
                self.v_q,
                self.R_BT,
                self.x_l_B,
                self.v_l,
                self.R_TW,
                self.a_prev,
            ]
        )


@dataclass(frozen=True, eq=False)
class ActionCommand:
    a_norm: Vector
    T_cmd: float
    omega_cmd: Vector


@dataclass(frozen=True)
class TraversalCheck:
    traversed: bool
    pos_err: float
    att_err: float


@dataclass(frozen=True)
class RewardBreakdown:
    r_target: float
    r_safe: float
    r_crash: float
    r_smooth: float
    traversed: bool
    pos_err: float
    att_err: float

    @property
    def total(self) -> float:
        return self.r_target + self.r_safe + self.r_crash + self.r_smooth


def num_workers() -> int:
    """Thread cap from ``ASTER_NUM_WORKERS`` (default: CPU count).

    Raises:
        ConfigError: the variable is set but is not an integer.
    """
    value = os.environ.get("ASTER_NUM_WORKERS")
    if value is None:
        return os.cpu_count() or 1
    try:
        return max(1, int(value))
    except ValueError as error:
        raise ConfigError(
            f"ASTER_NUM_WORKERS must be an integer, got {value!r}"
        ) from error


def build_observation(
    state: SystemState,
    targets: Tuple[Waypoint, Waypoint],
    a_prev: Vector,
    cfg: EnvConfig,
) -> Observation:
    """Scaled observation for the next two targets."""
    first, second = targets
    k_q = np.array(cfg.k_q)
    k_v = np.array(cfg.k_v)
    return Observation(
        dx1=(first.position - state.x_q) / k_q,
        dx2=(second.position - state.x_q) / k_q,
        v_q=state.v_q / k_v,
        R_BT=(first.R_TW.T @ state.R).ravel(),
        x_l_B=state.R.T @ (state.x_l - state.x_q) / np.array(cfg.k_l),
        v_l=state.v_l / k_v,
        R_TW=first.R_TW.ravel(),
        a_prev=np.asarray(a_prev, dtype=float),
    )


def map_action(a_norm: Vector, params: PhysicalParams) -> ActionCommand:
    """Affine map from [-1, 1]^4 to thrust and body rates, saturating."""
    clipped = np.clip(np.asarray(a_norm, dtype=float), -1.0, 1.0)
    return ActionCommand(
        a_norm=clipped,
        T_cmd=float((clipped[0] + 1.0) / 2.0 * params.T_max),
        omega_cmd=clipped[1:] * np.array(params.omega_max),
    )


def attitude_error(rot: np.ndarray, target: np.ndarray) -> float:
    """Geodesic angle between the body attitude and the target frame."""
    return geodesic_angle(target.T @ rot)


def _plane_side(state: SystemState, waypoint: Waypoint) -> float:
    return float(np.dot(state.x_q - waypoint.position, waypoint.x_T))


def check_traversal(
    prev_state: SystemState,
    state: SystemState,
    waypoint: Waypoint,
    cfg: EnvConfig,
) -> TraversalCheck:
    """Gate a plane crossing along +x_T on proximity and attitude.

    Proximity and attitude are read at the step that lands on or past the
    plane.
    """
    pos_err = float(np.linalg.norm(waypoint.position - state.x_q))
    att_err = attitude_error(state.R, waypoint.R_TW)
    crossed = (
        _plane_side(prev_state, waypoint) < 0.0
        and _plane_side(state, waypoint) >= 0.0
    )
    traversed = (
        crossed and pos_err < cfg.L and att_err < cfg.epsilon_theta_rad
    )
    return TraversalCheck(
        traversed=traversed, pos_err=pos_err, att_err=att_err
    )


def compute_reward(
    prev_state: SystemState,
    state: SystemState,
    a_prev: Vector,
    a_now: Vector,
    traversal: TraversalCheck,
    cfg: EnvConfig,
) -> RewardBreakdown:
    del prev_state  # crossing information arrives through `traversal`
    r_target = 0.0
    if traversal.traversed:
        r_target = (
            cfg.lambda1 * math.exp(-cfg.sigma_p * traversal.pos_err)
            + cfg.lambda2 * math.exp(-cfg.sigma_theta * traversal.att_err)
            + cfg.C
        )
    payload_body = state.R.T @ (state.x_l - state.x_q)
    r_safe = -cfg.r_exceed if payload_body[2] > 0.0 else 0.0
    inside = cfg.workspace.contains(state.x_q) and cfg.workspace.contains(
        state.x_l
    )
    r_crash = 0.0 if inside else -cfg.r_bound
    r_smooth = -cfg.lambda3 * float(
        np.linalg.norm(np.asarray(a_prev) - np.asarray(a_now))
    )
    return RewardBreakdown(
        r_target=r_target,
        r_safe=r_safe,
        r_crash=r_crash,
        r_smooth=r_smooth,
        traversed=traversal.traversed,
        pos_err=traversal.pos_err,
        att_err=traversal.att_err,
    )


def choose_reset_mode(
    mode: ResetMode, cfg: EnvConfig, rng: np.random.Generator
) -> ResetMode:
    """Resolve AUTO into HDSS with probability `hdss_fraction`."""
    if mode is not ResetMode.AUTO:
        return mode
    if rng.random() < cfg.hdss_fraction:
        return ResetMode.HDSS
    return ResetMode.HOVER


def reset(
    mode: ResetMode,
    waypoint: Waypoint,
    cfg: EnvConfig,
    rng: np.random.Generator,
    params: PhysicalParams = PhysicalParams(),
    seed_cfg: SeedConfig = SeedConfig(),
) -> SystemState:
    """Initial state: seeded from the waypoint or hovering in the workspace.

    A failed seeding falls back to a hover reset.
    """
    if choose_reset_mode(mode, cfg, rng) is ResetMode.HDSS:
        try:
            return generate_seed(
                waypoint, seed_cfg, params, rng, cfg.workspace
            ).state
        except SeedingError as error:
            logger.warning("falling back to hover reset: %s", error)
    return hover_state(cfg.workspace.sample(rng, cfg.hover_margin), params)


def randomize_params(
    params: PhysicalParams, rng: np.random.Generator, cfg: EnvConfig
) -> PhysicalParams:
    """Scale payload mass and cable length independently by U[1-f, 1+f]."""
    low, high = 1.0 - cfg.dr_fraction, 1.0 + cfg.dr_fraction
    return replace(
        params,
        m_l=params.m_l * rng.uniform(low, high),
        l=params.l * rng.uniform(low, high),
    )


def random_waypoint(rng: np.random.Generator, cfg: EnvConfig) -> Waypoint:
    """Waypoint uniform in the workspace with the configured kind mix."""
    position = cfg.workspace.sample(rng, cfg.waypoint_margin)
    inverted = rng.random() < cfg.inverted_fraction
    yaw = rng.uniform(0.0, 2.0 * math.pi)
    kind = WaypointKind.INVERTED if inverted else WaypointKind.UPRIGHT
    return make_waypoint(position, kind, yaw, cfg.workspace)


class TrackCursor:
    """Position along a track.

    Fixed cursors walk a given track and finish after its last waypoint.
    Dynamic cursors append a resampled waypoint on every advance, so two
    targets always exist.
    """

    def __init__(
        self,
        waypoints: Sequence[Waypoint],
        cfg: EnvConfig,
        rng: Optional[np.random.Generator] = None,
        dynamic: bool = False,
    ):
        if dynamic and rng is None:
            raise ValueError("dynamic track cursors need a generator")
        self.waypoints: List[Waypoint] = list(waypoints)
        self.cfg = cfg
        self.rng = rng
        self.dynamic = dynamic
        self.index = 0
        if dynamic:
            self._extend()

    def _extend(self) -> None:
        while len(self.waypoints) < self.index + 2:
            self.waypoints.append(
                resample_waypoint(
                    self.waypoints[-1], self.rng, self.cfg  # type: ignore
                )
            )

    @property
    def finished(self) -> bool:
        return self.index >= len(self.waypoints)

    @property
    def current(self) -> Waypoint:
        return self.waypoints[min(self.index, len(self.waypoints) - 1)]

    def targets(self) -> Tuple[Waypoint, Waypoint]:
        """Current and look-ahead waypoint; the last one is duplicated."""
        last = len(self.waypoints) - 1
        return (
            self.waypoints[min(self.index, last)],
            self.waypoints[min(self.index + 1, last)],
        )

    def advance(self) -> None:
        self.index += 1
        if self.dynamic:
            self._extend()


@dataclass
class EpisodeStats:
    steps: int = 0
    episode_return: float = 0.0
    traversals: int = 0
    events: List[PhaseEvent] = field(default_factory=list)


class AsterEnv:
    """One environment instance.

    Without a `track` the episode uses a dynamic cursor starting at a
    random waypoint and the configured reset mode. With a `track` the
    episode starts hovering at the track start and ends when the track is
    complete.
    """

    # pylint: disable=too-many-instance-attributes

    def __init__(
        self,
        cfg: EnvConfig,
        params: PhysicalParams,
        seed_cfg: SeedConfig,
        rng: np.random.Generator,
        reset_mode: ResetMode = ResetMode.AUTO,
        track: Optional[Track] = None,
    ):
        self.cfg = cfg
        self.nominal_params = params
        self.params = params
        self.seed_cfg = seed_cfg
        self.rng = rng
        self.reset_mode = reset_mode
        self.track = track
        self.state: SystemState = hover_state(cfg.workspace.center, params)
        self.cursor = TrackCursor(
            [random_waypoint(rng, cfg)] if track is None else track.waypoints,
            cfg,
        )
        self.a_prev = np.zeros(ACTION_SIZE)
        self.stats = EpisodeStats()

    def observe(self) -> Vector:
        return build_observation(
            self.state, self.cursor.targets(), self.a_prev, self.cfg
        ).as_array()

    def reset(self) -> Vector:
        if self.cfg.domain_randomization:
            self.params = randomize_params(
                self.nominal_params, self.rng, self.cfg
            )
        else:
            self.params = self.nominal_params
        if self.track is None:
            waypoint = random_waypoint(self.rng, self.cfg)
            self.cursor = TrackCursor(
                [waypoint], self.cfg, self.rng, dynamic=True
            )
            self.state = reset(
                self.reset_mode,
                waypoint,
                self.cfg,
                self.rng,
                self.params,
                self.seed_cfg,
            )
        else:
            self.cursor = TrackCursor(self.track.waypoints, self.cfg)
            self.state = hover_state(self.track.start, self.params)
        self.a_prev = np.zeros(ACTION_SIZE)
        self.stats = EpisodeStats()
        return self.observe()

    def step(
        self, a_norm: Vector
    ) -> Tuple[Vector, RewardBreakdown, bool, Dict[str, Any]]:
        """Advance one control step.

        Returns the next observation, the reward breakdown, the done flag
        and an info dict with `traversals`, `reason`, `events`, `t`.
        """
        command = map_action(a_norm, self.params)
        prev_state = self.state
        waypoint = self.cursor.current
        reason = ""
        try:
            self.state, events = hybrid_step(
                prev_state, command, self.params, self.cfg.dt
            )
            self.stats.events.extend(events.transitions)
            traversal = check_traversal(
                prev_state, self.state, waypoint, self.cfg
            )
            reward = compute_reward(
                prev_state,
                self.state,
                self.a_prev,
                command.a_norm,
                traversal,
                self.cfg,
            )
        except IntegrationError as error:
            logger.warning("episode terminated: %s", error)
            events = None
            self.state = prev_state
            reward = RewardBreakdown(
                r_target=0.0,
                r_safe=0.0,
                r_crash=-self.cfg.r_bound,
                r_smooth=-self.cfg.lambda3
                * float(np.linalg.norm(self.a_prev - command.a_norm)),
                traversed=False,
                pos_err=float(
                    np.linalg.norm(waypoint.position - prev_state.x_q)
                ),
                att_err=attitude_error(prev_state.R, waypoint.R_TW),
            )
            reason = "integration"

        if reward.traversed:
            self.stats.traversals += 1
            self.cursor.advance()
            if self.cursor.finished:
                reason = reason or "track_complete"
        if reward.r_crash != 0.0:
            reason = reason or "workspace"
        self.stats.steps += 1
        self.stats.episode_return += reward.total
        if not reason and self.stats.steps >= self.cfg.max_episode_steps:
            reason = "timeout"
        self.a_prev = command.a_norm
        info: Dict[str, Any] = {
            "traversals": self.stats.traversals,
            "reason": reason,
            "events": events.transitions if events is not None else (),
            "t": self.state.t,
            "command": command,
        }
        if reason:
            info["episode_return"] = self.stats.episode_return
            info["episode_length"] = self.stats.steps
        return self.observe(), reward, bool(reason), info


class VecEnv:
    """A batch of independent environments stepped in lockstep.

    Every instance owns a generator spawned from the master seed, so
    results do not depend on the number of worker threads. Finished
    episodes are reset automatically; the returned observation is then
    the first observation of the new episode.

    With more than one worker the batch owns a thread pool; release it
    with `close` or by using the batch as a context manager.
    """

    def __init__(
        self,
        n: int,
        cfg: EnvConfig,
        params: PhysicalParams,
        seed_cfg: SeedConfig,
        seeds: SeedManager,
        reset_mode: ResetMode = ResetMode.AUTO,
        workers: Optional[int] = None,
    ):
        self.envs = [
            AsterEnv(cfg, params, seed_cfg, rng, reset_mode)
            for rng in seeds.spawn_generators(n, "envs")
        ]
        self.workers = min(workers or num_workers(), n)
        self._pool: Optional[ThreadPoolExecutor] = (
            ThreadPoolExecutor(max_workers=self.workers)
            if self.workers > 1
            else None
        )

    def __len__(self) -> int:
        return len(self.envs)

    def __enter__(self) -> "VecEnv":
        return self

    def __exit__(self, *exc_info: Any) -> None:
        self.close()

    def close(self) -> None:
        """Shut the worker pool down; later steps run sequentially."""
        if self._pool is not None:
            self._pool.shutdown(wait=True)
            self._pool = None

    def _map(self, function, items) -> list:
        if self._pool is None:
            return [function(*item) for item in items]
        return list(self._pool.map(lambda item: function(*item), items))

    def reset(self) -> np.ndarray:
        return np.stack(self._map(AsterEnv.reset, [(e,) for e in self.envs]))

    def _step_one(
        self, env: AsterEnv, action: Vector
    ) -> Tuple[Vector, float, bool, Dict[str, Any]]:
        obs, reward, done, info = env.step(action)
        info["reward"] = reward
        if done:
            obs = env.reset()
        return obs, reward.total, done, info

    def step(
        self, actions: np.ndarray
    ) -> Tuple[np.ndarray, np.ndarray, np.ndarray, List[Dict[str, Any]]]:
        results = self._map(self._step_one, list(zip(self.envs, actions)))
        obs, rewards, dones, infos = zip(*results)
        return (
            np.stack(obs),
            np.array(rewards, dtype=float),
            np.array(dones, dtype=bool),
            list(infos),
        )
