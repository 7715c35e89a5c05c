"""Hybrid-dynamics-informed state seeding.

A goal configuration at a waypoint is sampled and back-propagated `K`
steps through the taut and slack phases using fixed affine recursions on
stacked flat outputs:

* payload chain ``xi_l = [x_l, v_l, a_l, j_l]`` (snap is the input);
* quadrotor chain ``xi_q = [x_q, v_q, a_q]`` (jerk is the slack input).

Taut step::

    xi_l' = A(dt) xi_l + B(dt) s_l
    x_q'  = x_q - v_q dt + a_q dt^2 / 2
    v_q'  = v_q - a_q dt
    a_q'  = a_l' + l s_l / |a_l' - g|

Slack step::

    x_l' = x_l - v_l dt + a_l dt^2 / 2 - j_l dt^3 / 6
    v_l' = v_l - a_l dt + j_l dt^2 / 2
    a_l' = g,  j_l' = 0
    xi_q' = D(dt) xi_q + E(dt) j_q

``A(dt)`` is the 4-chain Taylor propagator evaluated at ``-dt`` and
``B(dt) = [-dt^4/24, dt^3/6, -dt^2/2, dt]``. The quadrotor position is not
re-projected onto the cable sphere while back-propagating; the resulting
drift is measured and gated.

The seed at step 0 gets its attitudes from the quadrotor acceleration and
the waypoint heading, and its body rates from the log map between the
first two attitudes.
"""

import enum
import logging
import math
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .dynamics import (
    Phase,
    PhysicalParams,
    SystemState,
    hybrid_step,
    project_taut,
)
from .errors import (
    PhaseSwitch,
    RotationAmbiguityError,
    SeedingError,
    UndefinedAttitudeError,
    WaypointError,
)
from .overrides import ordered_range, positive, validated
from .rotations import is_rotation, relative_rotvec, thrust_frame
from .tracks import Waypoint, Workspace
from .typedefs import Matrix, Range, Vector

logger = logging.getLogger(__name__)

EPSILON_TENSION = 0.2
ATTITUDE_EPSILON = 1e-6
START_MARGIN = 0.1


class BackwardSwitch(enum.Enum):
    STAY = "stay"
    TO_SLACK = "to_slack"
    TO_TAUT = "to_taut"


@dataclass(frozen=True, eq=False)
class FlatChain:
    """Flat outputs at one step of the backward recursion."""

    xi_l: Vector
    xi_q: Vector
    phase: Phase
    step_index: int

    @property
    def x_l(self) -> Vector:
        return self.xi_l[0:3]

    @property
    def v_l(self) -> Vector:
        return self.xi_l[3:6]

    @property
    def a_l(self) -> Vector:
        return self.xi_l[6:9]

    @property
    def j_l(self) -> Vector:
        return self.xi_l[9:12]

    @property
    def x_q(self) -> Vector:
        return self.xi_q[0:3]

    @property
    def v_q(self) -> Vector:
        return self.xi_q[3:6]

    @property
    def a_q(self) -> Vector:
        return self.xi_q[6:9]

    def cable_drift(self, params: PhysicalParams) -> float:
        return abs(float(np.linalg.norm(self.x_q - self.x_l)) - params.l)


@dataclass(frozen=True)
class SeedConfig:
    """Sampling ranges and gate thresholds for seeding.

    Each range bounds every component of the sampled vector.
    """

    K: int = field(default=60, metadata=validated(positive))
    dt: float = field(default=0.01, metadata=validated(positive))
    snap_range: Range = field(
        default=(-1.0, 1.0), metadata=validated(ordered_range)
    )
    jerk_range: Range = field(
        default=(-5.0, 5.0), metadata=validated(ordered_range)
    )
    goal_velocity_range: Range = field(
        default=(-3.0, 3.0), metadata=validated(ordered_range)
    )
    goal_accel_range: Range = field(
        default=(-3.0, 3.0), metadata=validated(ordered_range)
    )
    goal_jerk_range: Range = field(
        default=(-2.0, 2.0), metadata=validated(ordered_range)
    )
    payload_tilt_range: Range = field(
        default=(0.0, math.pi / 2), metadata=validated(ordered_range)
    )
    drift_tolerance: float = field(default=0.05, metadata=validated(positive))
    max_resamples: int = 20
    epsilon_tension: float = field(
        default=EPSILON_TENSION, metadata=validated(positive)
    )
    omega_factor: float = field(default=1.5, metadata=validated(positive))

    def __post_init__(self) -> None:
        if self.K < 1:
            raise ValueError(f"K must be >= 1, got {self.K}")
        if self.max_resamples < 0:
            raise ValueError("max_resamples must be non-negative")
        low, high = self.payload_tilt_range
        if low < 0.0 or high > math.pi:
            raise ValueError("payload_tilt_range must lie within [0, pi]")

    @classmethod
    def aggressive(cls, **overrides) -> "SeedConfig":
        """The wide sampling ranges: fast, jerky goals and large snaps."""
        values = dict(
            snap_range=(-100.0, 100.0),
            jerk_range=(-50.0, 50.0),
            goal_velocity_range=(-3.0, 3.0),
            goal_accel_range=(-5.0, 5.0),
            goal_jerk_range=(-20.0, 20.0),
        )
        values.update(overrides)
        return cls(**values)

    @classmethod
    def degenerate(cls, **overrides) -> "SeedConfig":
        """Every range collapsed to zero: the seed is hover at the waypoint."""
        zero = (0.0, 0.0)
        values = dict(
            snap_range=zero,
            jerk_range=zero,
            goal_velocity_range=zero,
            goal_accel_range=zero,
            goal_jerk_range=zero,
            payload_tilt_range=zero,
        )
        values.update(overrides)
        return cls(**values)


@dataclass(frozen=True, eq=False)
class SeededEpisodeState:
    """Step-0 state of an accepted chain plus diagnostics.

    `chain` and `attitudes` run from step 0 to the goal at step K.
    """

    state: SystemState
    max_drift: float
    phase_switches: int
    resamples: int
    chain: Tuple[FlatChain, ...] = ()
    attitudes: Tuple[Matrix, ...] = ()


def taylor_propagator(dt: float, order: int) -> Matrix:
    """Scalar Taylor propagator: entry (i, k) is dt^(k-i) / (k-i)!."""
    result = np.zeros((order, order))
    for i in range(order):
        for k in range(i, order):
            result[i, k] = dt ** (k - i) / math.factorial(k - i)
    return result


def _blocks(scalar: Matrix) -> Matrix:
    return np.kron(scalar, np.eye(3))


def taut_payload_matrices(dt: float) -> Tuple[Matrix, Matrix]:
    """Block matrices (A, B) of the taut payload recursion."""
    a_scalar = taylor_propagator(-dt, 4)
    b_scalar = np.array([[-(dt**4) / 24], [dt**3 / 6], [-(dt**2) / 2], [dt]])
    return _blocks(a_scalar), _blocks(b_scalar)


def taut_quadrotor_matrix(dt: float) -> Matrix:
    """D of the taut quadrotor recursion; its acceleration row is zero."""
    d_scalar = taylor_propagator(-dt, 3)
    d_scalar[2, :] = 0.0
    return _blocks(d_scalar)


def slack_payload_matrices(
    dt: float, params: PhysicalParams
) -> Tuple[Matrix, Vector]:
    """Block A (acceleration and jerk rows zero) and constant C."""
    a_scalar = taylor_propagator(-dt, 4)
    a_scalar[2:, :] = 0.0
    offset = np.zeros(12)
    offset[6:9] = params.g_vec
    return _blocks(a_scalar), offset


def slack_quadrotor_matrices(dt: float) -> Tuple[Matrix, Matrix]:
    """Block D (full 3-chain propagator at -dt) and E."""
    e_scalar = np.array([[-(dt**3) / 6], [dt**2 / 2], [-dt]])
    return _blocks(taylor_propagator(-dt, 3)), _blocks(e_scalar)


def _uniform(
    rng: np.random.Generator, bounds: Range, size: int = 3
) -> Vector:
    return rng.uniform(bounds[0], bounds[1], size=size)


def goal_velocity_bounds(
    x_l: Vector,
    a_l: Vector,
    j_l: Vector,
    cfg: SeedConfig,
    params: PhysicalParams,
    workspace: Workspace,
) -> Tuple[Vector, Vector]:
    """Per-axis goal payload velocity bounds that keep the start inside.

    The payload is extrapolated back over ``K dt`` with the goal
    acceleration and jerk held fixed; the bounds keep that start at least
    ``l + START_MARGIN`` inside the workspace. An axis with no feasible
    velocity in `cfg.goal_velocity_range` keeps the full range.
    """
    horizon = cfg.K * cfg.dt
    start = x_l + 0.5 * a_l * horizon**2 - j_l * horizon**3 / 6.0
    margin = params.l + START_MARGIN
    low = np.array(workspace.low) + margin
    high = np.array(workspace.high) - margin
    v_low = np.maximum(cfg.goal_velocity_range[0], (start - high) / horizon)
    v_high = np.minimum(cfg.goal_velocity_range[1], (start - low) / horizon)
    empty = v_low > v_high
    v_low[empty] = cfg.goal_velocity_range[0]
    v_high[empty] = cfg.goal_velocity_range[1]
    return v_low, v_high


def _cap_direction(
    rng: np.random.Generator, tilt: Range, rot: Matrix
) -> Vector:
    """Unit vector uniform on the cap around -z of `rot` with polar `tilt`."""
    cos_theta = rng.uniform(math.cos(tilt[1]), math.cos(tilt[0]))
    azimuth = rng.uniform(0.0, 2.0 * math.pi)
    sin_theta = math.sqrt(max(0.0, 1.0 - cos_theta**2))
    local = np.array(
        [
            sin_theta * math.cos(azimuth),
            sin_theta * math.sin(azimuth),
            -cos_theta,
        ]
    )
    direction = rot @ local
    return direction / np.linalg.norm(direction)


def _tensioned_accel(
    rng: np.random.Generator,
    rho: Vector,
    cfg: SeedConfig,
    params: PhysicalParams,
) -> Tuple[Vector, float]:
    """Payload acceleration whose tension pulls along -rho."""
    candidate = _uniform(rng, cfg.goal_accel_range)
    alpha = float(np.linalg.norm(candidate - params.g_vec))
    return params.g_vec - alpha * rho, alpha


def sample_goal_chain(
    waypoint: Waypoint,
    cfg: SeedConfig,
    params: PhysicalParams,
    rng: np.random.Generator,
    workspace: Optional[Workspace] = None,
) -> FlatChain:
    """Goal flat outputs with the quadrotor at the waypoint.

    Draw order: cable polar cosine and azimuth, payload acceleration,
    jerk, velocity. With a `workspace`, each velocity component is drawn
    from the part of its range given by `goal_velocity_bounds`.
    """
    # pylint: disable=too-many-locals
    if not is_rotation(waypoint.R_TW):
        raise WaypointError("waypoint target rotation is not orthonormal")
    rho = _cap_direction(rng, cfg.payload_tilt_range, waypoint.R_TW)
    a_l, alpha = _tensioned_accel(rng, rho, cfg, params)
    j_l = _uniform(rng, cfg.goal_jerk_range)

    x_q = np.array(waypoint.position, dtype=float)
    x_l = x_q + params.l * rho
    if workspace is None:
        v_l = _uniform(rng, cfg.goal_velocity_range)
    else:
        v_l = rng.uniform(
            *goal_velocity_bounds(x_l, a_l, j_l, cfg, params, workspace)
        )
    phase = Phase.TAUT if alpha >= cfg.epsilon_tension else Phase.SLACK
    if phase is Phase.SLACK:
        v_q, a_q = v_l.copy(), a_l.copy()
    else:
        # x_q = x_l + l n with n = (a_l - g) / |a_l - g| = -rho
        normal = -rho
        projector = np.eye(3) - np.outer(normal, normal)
        normal_dot = projector @ j_l / alpha
        normal_ddot = (
            -2.0 * np.dot(normal, j_l) * normal_dot
            - np.dot(normal_dot, j_l) * normal
        ) / alpha
        v_q = v_l + params.l * normal_dot
        a_q = a_l + params.l * normal_ddot
    return FlatChain(
        xi_l=np.concatenate([x_l, v_l, a_l, j_l]),
        xi_q=np.concatenate([x_q, v_q, a_q]),
        phase=phase,
        step_index=cfg.K,
    )


def backstep_taut(
    chain: FlatChain,
    s_l: Vector,
    cfg: SeedConfig,
    params: PhysicalParams,
) -> FlatChain:
    """One taut step back in time.

    Raises:
        PhaseSwitch: the back-propagated payload acceleration leaves no
            cable tension; no chain is produced.
    """
    a_mat, b_mat = taut_payload_matrices(cfg.dt)
    xi_l = a_mat @ chain.xi_l + b_mat @ s_l
    tension_accel = float(np.linalg.norm(xi_l[6:9] - params.g_vec))
    if tension_accel < cfg.epsilon_tension:
        raise PhaseSwitch(tension_accel)
    xi_q = taut_quadrotor_matrix(cfg.dt) @ chain.xi_q
    xi_q[6:9] = xi_l[6:9] + params.l * s_l / tension_accel
    return FlatChain(
        xi_l=xi_l,
        xi_q=xi_q,
        phase=Phase.TAUT,
        step_index=chain.step_index - 1,
    )


def backstep_slack(
    chain: FlatChain,
    j_q: Vector,
    cfg: SeedConfig,
    params: PhysicalParams,
) -> FlatChain:
    """One slack step back in time: payload ballistic, quadrotor by jerk."""
    a_mat, offset = slack_payload_matrices(cfg.dt, params)
    d_mat, e_mat = slack_quadrotor_matrices(cfg.dt)
    return FlatChain(
        xi_l=a_mat @ chain.xi_l + offset,
        xi_q=d_mat @ chain.xi_q + e_mat @ j_q,
        phase=Phase.SLACK,
        step_index=chain.step_index - 1,
    )


def forward_taut_payload(
    xi_l_prev: Vector, s_l: Vector, dt: float
) -> Vector:
    """Algebraic inverse of the taut payload recursion."""
    _, b_mat = taut_payload_matrices(dt)
    return _blocks(taylor_propagator(dt, 4)) @ (xi_l_prev - b_mat @ s_l)


def forward_slack_quadrotor(
    xi_q_prev: Vector, j_q: Vector, dt: float
) -> Vector:
    """Algebraic inverse of the slack quadrotor recursion."""
    _, e_mat = slack_quadrotor_matrices(dt)
    return _blocks(taylor_propagator(dt, 3)) @ (xi_q_prev - e_mat @ j_q)


def detect_backward_phase_switch(
    chain: FlatChain,
    params: PhysicalParams,
    epsilon: float = EPSILON_TENSION,
) -> BackwardSwitch:
    if chain.phase is Phase.TAUT:
        if np.linalg.norm(chain.a_l - params.g_vec) < epsilon:
            return BackwardSwitch.TO_SLACK
        return BackwardSwitch.STAY
    if np.linalg.norm(chain.x_q - chain.x_l) >= params.l:
        return BackwardSwitch.TO_TAUT
    return BackwardSwitch.STAY


def derive_attitude(
    a_q: Vector,
    yaw: float,
    params: PhysicalParams,
    epsilon: float = ATTITUDE_EPSILON,
) -> Matrix:
    """Attitude whose thrust axis produces `a_q`, at heading `yaw`.

    Raises:
        UndefinedAttitudeError: `a_q` is free fall, so the thrust axis is
            undefined.
    """
    thrust = np.asarray(a_q, dtype=float) - params.g_vec
    norm = float(np.linalg.norm(thrust))
    if norm <= epsilon:
        raise UndefinedAttitudeError(
            f"free fall (|a_q - g| = {norm:.3g}) leaves the attitude undefined"
        )
    return thrust_frame(thrust / norm, yaw)


def derive_body_rates(R_prev: Matrix, R_next: Matrix, dt: float) -> Vector:
    """Body rates taking `R_prev` to `R_next` in `dt`.

    Raises:
        RotationAmbiguityError: the attitudes are (nearly) pi apart.
    """
    # pylint: disable=invalid-name
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt!r}")
    return relative_rotvec(R_prev, R_next) / dt


def _retension(
    chain: FlatChain,
    rng: np.random.Generator,
    cfg: SeedConfig,
    params: PhysicalParams,
) -> FlatChain:
    """Re-enter the taut phase with a tension-consistent payload."""
    rel = chain.x_l - chain.x_q
    rho = rel / np.linalg.norm(rel)
    a_l, _ = _tensioned_accel(rng, rho, cfg, params)
    xi_l = chain.xi_l.copy()
    xi_l[6:9] = a_l
    xi_l[9:12] = 0.0
    return replace(chain, xi_l=xi_l, phase=Phase.TAUT)


def backpropagate(
    goal: FlatChain,
    cfg: SeedConfig,
    params: PhysicalParams,
    rng: np.random.Generator,
) -> Tuple[List[FlatChain], int]:
    """Run the recursion from the goal to step 0.

    Returns the chain ordered from step 0 to the goal and the number of
    phase switches.
    """
    chain = goal
    history = [chain]
    switches = 0
    for _ in range(goal.step_index):
        if chain.phase is Phase.TAUT:
            s_l = _uniform(rng, cfg.snap_range)
            try:
                chain = backstep_taut(chain, s_l, cfg, params)
            except PhaseSwitch as signal:
                logger.debug(
                    "backward taut->slack at step %d: %s",
                    chain.step_index,
                    signal,
                )
                switches += 1
                chain = backstep_slack(
                    replace(chain, phase=Phase.SLACK),
                    _uniform(rng, cfg.jerk_range),
                    cfg,
                    params,
                )
        else:
            chain = backstep_slack(
                chain, _uniform(rng, cfg.jerk_range), cfg, params
            )
        if (
            chain.phase is Phase.SLACK
            and detect_backward_phase_switch(
                chain, params, cfg.epsilon_tension
            )
            is BackwardSwitch.TO_TAUT
        ):
            logger.debug("backward slack->taut at step %d", chain.step_index)
            switches += 1
            chain = _retension(chain, rng, cfg, params)
        history.append(chain)
    history.reverse()
    return history, switches


def chain_attitudes(
    chain: Sequence[FlatChain],
    yaw: float,
    params: PhysicalParams,
    goal_attitude: Optional[Matrix] = None,
) -> List[Matrix]:
    """Attitudes from the goal backwards, reusing the later attitude when
    the thrust axis is undefined."""
    attitudes: List[Matrix] = [np.eye(3)] * len(chain)
    later = goal_attitude
    for index in range(len(chain) - 1, -1, -1):
        try:
            later = derive_attitude(chain[index].a_q, yaw, params)
        except UndefinedAttitudeError:
            if later is None:
                raise
        attitudes[index] = later  # type: ignore
    return attitudes


def _seed_state(
    first: FlatChain, R_0: Matrix, omega_0: Vector, params: PhysicalParams
) -> SystemState:
    # pylint: disable=invalid-name
    state = SystemState(
        x_q=first.x_q.copy(),
        v_q=first.v_q.copy(),
        R=R_0,
        omega=omega_0,
        x_l=first.x_l.copy(),
        v_l=first.v_l.copy(),
        phase=first.phase,
        t=0.0,
    )
    if first.phase is Phase.TAUT:
        return project_taut(state, params)
    return state


class Rejection(enum.Enum):
    """Validity gate checks, in the order they are applied."""

    CABLE_DRIFT = "cable drift"
    ATTITUDE_FLIP = "attitude flip"
    BODY_RATES = "body rates"
    WORKSPACE = "outside workspace"


@dataclass(frozen=True)
class Rejected:
    kind: Rejection
    detail: str

    def __str__(self) -> str:
        return f"{self.kind.value}: {self.detail}"


def _attempt(
    waypoint: Waypoint,
    cfg: SeedConfig,
    params: PhysicalParams,
    rng: np.random.Generator,
    workspace: Workspace,
) -> Union[SeededEpisodeState, Rejected]:
    # pylint: disable=too-many-locals
    goal = sample_goal_chain(waypoint, cfg, params, rng, workspace)
    history, switches = backpropagate(goal, cfg, params, rng)
    drifts = [c.cable_drift(params) for c in history if c.phase is Phase.TAUT]
    max_drift = max(drifts, default=0.0)
    if max_drift > cfg.drift_tolerance * params.l:
        return Rejected(Rejection.CABLE_DRIFT, f"{max_drift:.4f} m")
    try:
        attitudes = chain_attitudes(
            history, waypoint.yaw, params, goal_attitude=waypoint.R_TW
        )
        omega_0 = derive_body_rates(attitudes[0], attitudes[1], cfg.dt)
    except RotationAmbiguityError as error:
        return Rejected(Rejection.ATTITUDE_FLIP, str(error))
    limit = cfg.omega_factor * np.array(params.omega_max)
    if np.any(np.abs(omega_0) > limit):
        return Rejected(
            Rejection.BODY_RATES, f"{np.round(omega_0, 2).tolist()} rad/s"
        )
    state = _seed_state(history[0], attitudes[0], omega_0, params)
    for name, point in (("quadrotor", state.x_q), ("payload", state.x_l)):
        if not workspace.contains(point):
            return Rejected(
                Rejection.WORKSPACE,
                f"{name} starts at {np.round(point, 2).tolist()}",
            )
    return SeededEpisodeState(
        state=state,
        max_drift=max_drift,
        phase_switches=switches,
        resamples=0,
        chain=tuple(history),
        attitudes=tuple(attitudes),
    )


def _generate(
    waypoint: Waypoint,
    cfg: SeedConfig,
    params: PhysicalParams,
    rng: np.random.Generator,
    workspace: Workspace,
    rejected: List[Rejected],
) -> SeededEpisodeState:
    for attempt in range(cfg.max_resamples + 1):
        outcome = _attempt(waypoint, cfg, params, rng, workspace)
        if isinstance(outcome, SeededEpisodeState):
            if attempt:
                logger.debug("seed accepted after %d resamples", attempt)
            return replace(outcome, resamples=attempt)
        rejected.append(outcome)
    raise SeedingError(
        f"no valid seed after {cfg.max_resamples} resamples; "
        f"last rejection: {rejected[-1]}"
    )


def generate_seed(
    waypoint: Waypoint,
    cfg: SeedConfig,
    params: PhysicalParams,
    rng: np.random.Generator,
    workspace: Workspace = Workspace(),
) -> SeededEpisodeState:
    """Sample, back-propagate and gate chains until one is valid.

    Raises:
        SeedingError: `max_resamples` resamples all failed the gate.
    """
    return _generate(waypoint, cfg, params, rng, workspace, [])


@dataclass(frozen=True)
class FeedForward:
    T_cmd: float
    omega_cmd: Vector


def replay_commands(
    seed: SeededEpisodeState, cfg: SeedConfig, params: PhysicalParams
) -> List[FeedForward]:
    """Feed-forward commands that retrace the chain from step 0.

    Thrust is the thrust-axis component of the force that produces the
    chained quadrotor acceleration with the cable tension removed; body
    rates come from consecutive attitudes. Both are clipped to the limits.
    """
    commands = []
    omega_max = np.array(params.omega_max)
    for index in range(len(seed.chain) - 1):
        link = seed.chain[index]
        force = params.m_q * (link.a_q - params.g_vec)
        if link.phase is Phase.TAUT:
            rel = link.x_l - link.x_q
            rho = rel / np.linalg.norm(rel)
            tension = params.m_l * np.linalg.norm(link.a_l - params.g_vec)
            force = force - tension * rho
        rot = seed.attitudes[index]
        thrust = float(np.dot(force, rot[:, 2])) / params.m_q
        omega = derive_body_rates(rot, seed.attitudes[index + 1], cfg.dt)
        commands.append(
            FeedForward(
                T_cmd=float(np.clip(thrust, 0.0, params.T_max)),
                omega_cmd=np.clip(omega, -omega_max, omega_max),
            )
        )
    return commands


def forward_verify(
    seed: SeededEpisodeState, cfg: SeedConfig, params: PhysicalParams
) -> float:
    """Forward-simulate a seed under its replayed commands.

    Returns the largest payload position gap to the chain, in metres.
    """
    state = seed.state
    worst = 0.0
    for index, command in enumerate(replay_commands(seed, cfg, params)):
        state, _ = hybrid_step(state, command, params, cfg.dt)
        gap = np.linalg.norm(state.x_l - seed.chain[index + 1].x_l)
        worst = max(worst, float(gap))
    return worst


CHAIN_COLUMNS = (
    ["t"]
    + [
        f"{name}_{axis}"
        for name in ("x_l", "v_l", "a_l", "j_l")
        for axis in "xyz"
    ]
    + [f"{name}_{axis}" for name in ("x_q", "v_q", "a_q") for axis in "xyz"]
    + ["phase"]
)


def chain_rows(seed: SeededEpisodeState, dt: float) -> List[list]:
    """CSV rows for a seed's chain, one per step from 0 to K."""
    return [
        [link.step_index * dt]
        + [float(x) for x in link.xi_l]
        + [float(x) for x in link.xi_q]
        + [link.phase.value]
        for link in seed.chain
    ]
@dataclass(frozen=True, eq=False)
class SeedDiagnostics:
    """Gate statistics over a batch of `generate_seed` calls.

    `pass_rate` counts gate attempts, so a seed accepted after two
    resamples contributes one pass and two rejections. `rejections`
    counts the failed attempts by the first gate check they failed.
    """

    requested: int
    seeds: Tuple[SeededEpisodeState, ...]
    failures: int
    attempts: int
    forward_gaps: Tuple[float, ...] = ()
    rejections: Dict[Rejection, int] = field(default_factory=dict)

    @property
    def pass_rate(self) -> float:
        return len(self.seeds) / self.attempts if self.attempts else 0.0

    @property
    def drifts(self) -> np.ndarray:
        return np.array([seed.max_drift for seed in self.seeds])

    def drift_percentiles(
        self, percentiles: Sequence[float] = (50.0, 95.0, 100.0)
    ) -> List[float]:
        if not self.seeds:
            return [math.nan for _ in percentiles]
        return [float(x) for x in np.percentile(self.drifts, percentiles)]

    def switch_histogram(self) -> dict:
        counts: dict = {}
        for seed in self.seeds:
            switches = seed.phase_switches
            counts[switches] = counts.get(switches, 0) + 1
        return dict(sorted(counts.items()))

    def rejection_rates(self) -> Dict[Rejection, float]:
        """Fraction of all attempts rejected by each gate check."""
        if not self.attempts:
            return {}
        return {
            kind: count / self.attempts
            for kind, count in self.rejections.items()
        }

    @property
    def dominant_rejection(self) -> Optional[Rejection]:
        if not self.rejections:
            return None
        return max(self.rejections, key=self.rejections.__getitem__)


def seed_diagnostics(
    waypoint: Waypoint,
    count: int,
    cfg: SeedConfig,
    params: PhysicalParams,
    rng: np.random.Generator,
    workspace: Workspace = Workspace(),
    forward: bool = False,
) -> SeedDiagnostics:
    """Generate `count` seeds at one waypoint and collect gate statistics."""
    seeds = []
    rejected: List[Rejected] = []
    failures = 0
    for _ in range(count):
        try:
            seeds.append(
                _generate(waypoint, cfg, params, rng, workspace, rejected)
            )
        except SeedingError:
            failures += 1
    gaps = (
        tuple(forward_verify(seed, cfg, params) for seed in seeds)
        if forward
        else ()
    )
    tally = Counter(r.kind for r in rejected)
    rejections = {kind: tally[kind] for kind in Rejection if tally[kind]}
    return SeedDiagnostics(
        requested=count,
        seeds=tuple(seeds),
        failures=failures,
        attempts=len(seeds) + len(rejected),
        forward_gaps=gaps,
        rejections=rejections,
    )
