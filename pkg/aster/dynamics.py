"""Hybrid taut/slack dynamics of a quadrotor carrying a cable-slung payload.

World frame is Z-up with gravity ``g_vec = [0, 0, -g_mag]``. The cable
direction ``rho`` points from the quadrotor to the payload.

While the cable is taut the payload position, velocity and the cable
direction are integrated; the quadrotor position follows from
``x_q = x_l - l * rho``. While slack, both bodies are integrated
independently and the payload is in free fall. Transitions are located
inside a step with Brent's method:

* taut -> slack when the cable tension becomes negative;
* slack -> taut when the bodies reach cable length while separating, where
  an inelastic impulse along the cable removes the radial relative velocity.

Thrust ``T_cmd`` is mass-normalised collective acceleration; the world
thrust force is ``m_q * T_cmd * R e3``.
"""

import enum
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional, Protocol, Tuple

import numpy as np
from scipy.optimize import brentq

from .errors import ConstraintError, IntegrationError
from .overrides import positive, positive_vector_of, validated, with_override
from .rotations import E3, hat, orthonormalize
from .typedefs import Matrix, Vector

logger = logging.getLogger(__name__)

TENSION_EPSILON = 1e-9
RHO_TOLERANCE = 1e-6
SEPARATION_EPSILON = 1e-12

VectorField = Callable[[Vector, float, Vector, "PhysicalParams"], Vector]


class Phase(enum.Enum):
    TAUT = "taut"
    SLACK = "slack"


class PhaseEvent(enum.Enum):
    TAUT_TO_SLACK = "taut_to_slack"
    SLACK_TO_TAUT = "slack_to_taut"
    CABLE_SNAP = "cable_snap"


@dataclass(frozen=True)
class PhysicalParams:
    """Masses, cable length, inertia and actuator limits.

    `inertia` holds the diagonal of the quadrotor inertia matrix.
    """

    m_q: float = field(default=0.315, metadata=validated(positive))
    m_l: float = field(default=0.035, metadata=validated(positive))
    l: float = field(default=0.4, metadata=validated(positive))
    inertia: Tuple[float, float, float] = field(
        default=(1.4e-3, 1.4e-3, 2.2e-3),
        metadata=with_override(positive_vector_of(3)),
    )
    g_mag: float = field(default=9.81, metadata=validated(positive))
    T_max: float = field(default=3.5 * 9.81, metadata=validated(positive))
    omega_max: Tuple[float, float, float] = field(
        default=(10.0, 10.0, 3.0),
        metadata=with_override(positive_vector_of(3)),
    )
    k_omega: float = field(default=20.0, metadata=validated(positive))

    @property
    def total_mass(self) -> float:
        return self.m_q + self.m_l

    @property
    def g_vec(self) -> Vector:
        return np.array([0.0, 0.0, -self.g_mag])

    @property
    def I_q(self) -> Matrix:  # pylint: disable=invalid-name
        return np.diag(self.inertia)

    @property
    def hover_thrust(self) -> float:
        """Collective acceleration that holds the taut system at rest."""
        return self.total_mass * self.g_mag / self.m_q


@dataclass(eq=False)
class SystemState:
    x_q: Vector
    v_q: Vector
    R: Matrix
    omega: Vector
    x_l: Vector
    v_l: Vector
    phase: Phase = Phase.TAUT
    t: float = 0.0

    def copy(self) -> "SystemState":
        return SystemState(
            x_q=self.x_q.copy(),
            v_q=self.v_q.copy(),
            R=self.R.copy(),
            omega=self.omega.copy(),
            x_l=self.x_l.copy(),
            v_l=self.v_l.copy(),
            phase=self.phase,
            t=self.t,
        )

    def is_finite(self) -> bool:
        return all(
            np.all(np.isfinite(value))
            for value in (
                self.x_q,
                self.v_q,
                self.R,
                self.omega,
                self.x_l,
                self.v_l,
            )
        ) and math.isfinite(self.t)


@dataclass(frozen=True, eq=False)
class CableCoords:
    rho: Vector
    rho_dot: Vector


@dataclass(frozen=True)
class StepEvents:
    """Phase transitions applied during one `hybrid_step`.

    `times` holds the offset of each transition from the start of the step.
    """

    transitions: Tuple[PhaseEvent, ...] = ()
    times: Tuple[float, ...] = ()


class PhysicalCommand(Protocol):
    """Anything carrying a collective thrust and a body-rate setpoint."""

    T_cmd: float
    omega_cmd: Vector


@dataclass(frozen=True, eq=False)
class TautRates:
    x_l_dot: Vector
    v_l_dot: Vector
    rho_dot: Vector
    rho_ddot: Vector
    R_dot: Matrix
    omega_dot: Vector


@dataclass(frozen=True, eq=False)
class SlackRates:
    x_q_dot: Vector
    v_q_dot: Vector
    x_l_dot: Vector
    v_l_dot: Vector
    R_dot: Matrix
    omega_dot: Vector


def hover_state(
    position: Vector, params: PhysicalParams, t: float = 0.0
) -> SystemState:
    """Upright quadrotor at rest with the payload hanging straight below."""
    x_q = np.asarray(position, dtype=float).copy()
    return SystemState(
        x_q=x_q,
        v_q=np.zeros(3),
        R=np.eye(3),
        omega=np.zeros(3),
        x_l=x_q - params.l * E3,
        v_l=np.zeros(3),
        phase=Phase.TAUT,
        t=t,
    )


def thrust_force(rot: Matrix, T_cmd: float, params: PhysicalParams) -> Vector:
    return rot @ np.array([0.0, 0.0, params.m_q * T_cmd])


def cable_coords(state: SystemState, params: PhysicalParams) -> CableCoords:
    """Cable direction and its rate, derived from positions and velocities.

    `rho` is normalised; `rho_dot` is projected onto the tangent plane.
    """
    rel = state.x_l - state.x_q
    rho = rel / np.linalg.norm(rel)
    rho_dot = (state.v_l - state.v_q) / params.l
    rho_dot = rho_dot - np.dot(rho, rho_dot) * rho
    return CableCoords(rho=rho, rho_dot=rho_dot)


def cable_tension(
    state: SystemState,
    cable: CableCoords,
    thrust_world: Vector,
    params: PhysicalParams,
) -> float:
    """Cable tension in N; negative means the cable cannot stay taut."""
    del state  # tension depends on the cable and the thrust only
    return float(
        -params.m_l
        * (
            np.dot(cable.rho, thrust_world)
            - params.m_q * params.l * np.dot(cable.rho_dot, cable.rho_dot)
        )
        / params.total_mass
    )


def rate_moment(
    omega_cmd: Vector, omega: Vector, params: PhysicalParams
) -> Vector:
    """Body-rate tracking loop with gyroscopic feed-forward."""
    inertia = params.I_q
    return inertia @ (params.k_omega * (omega_cmd - omega)) + np.cross(
        omega, inertia @ omega
    )


def _omega_dot(
    omega: Vector, moment: Vector, params: PhysicalParams
) -> Vector:
    inertia = params.I_q
    return np.linalg.solve(inertia, moment - np.cross(omega, inertia @ omega))


def _taut_rates(
    v_l: Vector,
    rho: Vector,
    rho_dot: Vector,
    rot: Matrix,
    omega: Vector,
    T_cmd: float,
    moment: Vector,
    params: PhysicalParams,
) -> Tuple[Vector, ...]:
    force = thrust_force(rot, T_cmd, params)
    axial = np.dot(rho, force) - params.m_q * params.l * np.dot(
        rho_dot, rho_dot
    )
    v_l_dot = params.g_vec + axial * rho / params.total_mass
    rho_ddot = -np.dot(rho_dot, rho_dot) * rho + np.cross(
        rho, np.cross(rho, force)
    ) / (params.m_q * params.l)
    return (
        v_l,
        v_l_dot,
        rho_dot,
        rho_ddot,
        rot @ hat(omega),
        _omega_dot(omega, moment, params),
    )


def taut_derivatives(
    state: SystemState,
    cable: CableCoords,
    T_cmd: float,
    M: Vector,  # pylint: disable=invalid-name
    params: PhysicalParams,
) -> TautRates:
    """Time derivatives of the taut-phase coordinates.

    Raises:
        ConstraintError: `cable.rho` is not a unit vector.
    """
    norm = float(np.linalg.norm(cable.rho))
    if abs(norm - 1.0) > RHO_TOLERANCE:
        raise ConstraintError(f"cable direction has norm {norm!r}")
    return TautRates(
        *_taut_rates(
            state.v_l,
            cable.rho,
            cable.rho_dot,
            state.R,
            state.omega,
            T_cmd,
            M,
            params,
        )
    )


def slack_derivatives(
    state: SystemState,
    T_cmd: float,
    M: Vector,  # pylint: disable=invalid-name
    params: PhysicalParams,
) -> SlackRates:
    """Quadrotor under thrust and gravity; payload in free fall."""
    return SlackRates(
        x_q_dot=state.v_q,
        v_q_dot=params.g_vec + T_cmd * (state.R @ E3),
        x_l_dot=state.v_l,
        v_l_dot=params.g_vec.copy(),
        R_dot=state.R @ hat(state.omega),
        omega_dot=_omega_dot(state.omega, M, params),
    )


# Flat 24-element layouts used by the integrator.
#   taut:  [x_l, v_l, rho, rho_dot, R (row-major), omega]
#   slack: [x_q, v_q, x_l, v_l, R (row-major), omega]


def _taut_field(
    y: Vector, T_cmd: float, omega_cmd: Vector, params: PhysicalParams
) -> Vector:
    rot = y[12:21].reshape(3, 3)
    omega = y[21:24]
    rates = _taut_rates(
        y[3:6],
        y[6:9],
        y[9:12],
        rot,
        omega,
        T_cmd,
        rate_moment(omega_cmd, omega, params),
        params,
    )
    return np.concatenate(
        [rates[0], rates[1], rates[2], rates[3], rates[4].ravel(), rates[5]]
    )


def _slack_field(
    y: Vector, T_cmd: float, omega_cmd: Vector, params: PhysicalParams
) -> Vector:
    rot = y[12:21].reshape(3, 3)
    omega = y[21:24]
    moment = rate_moment(omega_cmd, omega, params)
    return np.concatenate(
        [
            y[3:6],
            params.g_vec + T_cmd * (rot @ E3),
            y[9:12],
            params.g_vec,
            (rot @ hat(omega)).ravel(),
            _omega_dot(omega, moment, params),
        ]
    )


def _pack(state: SystemState, params: PhysicalParams) -> Vector:
    if state.phase is Phase.TAUT:
        cable = cable_coords(state, params)
        head = [state.x_l, state.v_l, cable.rho, cable.rho_dot]
    else:
        head = [state.x_q, state.v_q, state.x_l, state.v_l]
    return np.concatenate(head + [state.R.ravel(), state.omega])


def _unpack(
    y: Vector, phase: Phase, t: float, params: PhysicalParams
) -> SystemState:
    rot = orthonormalize(y[12:21].reshape(3, 3))
    omega = y[21:24].copy()
    if phase is Phase.TAUT:
        x_l, v_l = y[0:3].copy(), y[3:6].copy()
        rho = y[6:9] / np.linalg.norm(y[6:9])
        rho_dot = y[9:12] - np.dot(rho, y[9:12]) * rho
        return SystemState(
            x_q=x_l - params.l * rho,
            v_q=v_l - params.l * rho_dot,
            R=rot,
            omega=omega,
            x_l=x_l,
            v_l=v_l,
            phase=phase,
            t=t,
        )
    return SystemState(
        x_q=y[0:3].copy(),
        v_q=y[3:6].copy(),
        R=rot,
        omega=omega,
        x_l=y[6:9].copy(),
        v_l=y[9:12].copy(),
        phase=phase,
        t=t,
    )


def _rk4(
    vector_field: VectorField,
    y: Vector,
    dt: float,
    T_cmd: float,
    omega_cmd: Vector,
    params: PhysicalParams,
) -> Vector:
    k1 = vector_field(y, T_cmd, omega_cmd, params)
    k2 = vector_field(y + 0.5 * dt * k1, T_cmd, omega_cmd, params)
    k3 = vector_field(y + 0.5 * dt * k2, T_cmd, omega_cmd, params)
    k4 = vector_field(y + dt * k3, T_cmd, omega_cmd, params)
    result = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(result)):
        raise IntegrationError(f"non-finite state after RK4 step of {dt}")
    return result


def _command_tension(
    state: SystemState, T_cmd: float, params: PhysicalParams
) -> float:
    return cable_tension(
        state,
        cable_coords(state, params),
        thrust_force(state.R, T_cmd, params),
        params,
    )


def _separating_speed(state: SystemState) -> float:
    rel = state.x_l - state.x_q
    rho = rel / np.linalg.norm(rel)
    return float(np.dot(state.v_l - state.v_q, rho))


def _gap(state: SystemState, params: PhysicalParams) -> float:
    return float(np.linalg.norm(state.x_l - state.x_q) - params.l)


def project_taut(state: SystemState, params: PhysicalParams) -> SystemState:
    """Move the quadrotor onto the cable sphere around the payload."""
    cable = cable_coords(state, params)
    return replace(
        state,
        x_q=state.x_l - params.l * cable.rho,
        v_q=state.v_l - params.l * cable.rho_dot,
        phase=Phase.TAUT,
    )


def slack_to_taut_impulse(
    state: SystemState, params: PhysicalParams
) -> SystemState:
    """Inelastic, momentum-conserving impulse along the cable.

    The radial relative velocity is removed, the quadrotor is placed at
    exactly cable length from the payload and the phase becomes taut.
    A non-separating state is returned unchanged.
    """
    rel = state.x_l - state.x_q
    rho = rel / np.linalg.norm(rel)
    radial = float(np.dot(state.v_l - state.v_q, rho))
    if radial <= 0.0:
        logger.warning(
            "slack->taut impulse requested with non-separating radial "
            "velocity %.3g m/s; state left unchanged",
            radial,
        )
        return state
    total = params.total_mass
    return replace(
        state,
        x_q=state.x_l - params.l * rho,
        v_q=state.v_q + (params.m_l / total) * radial * rho,
        v_l=state.v_l - (params.m_q / total) * radial * rho,
        phase=Phase.TAUT,
    )


def mechanical_energy(state: SystemState, params: PhysicalParams) -> float:
    """Translational kinetic plus gravitational energy of both bodies."""
    kinetic = 0.5 * params.m_q * np.dot(state.v_q, state.v_q)
    kinetic += 0.5 * params.m_l * np.dot(state.v_l, state.v_l)
    potential = params.g_mag * (
        params.m_q * state.x_q[2] + params.m_l * state.x_l[2]
    )
    return float(kinetic + potential)


def total_momentum(state: SystemState, params: PhysicalParams) -> Vector:
    return params.m_q * state.v_q + params.m_l * state.v_l


@dataclass
class _StepRecord:
    transitions: List[PhaseEvent] = field(default_factory=list)
    times: List[float] = field(default_factory=list)

    def add(self, event: PhaseEvent, offset: float) -> None:
        logger.debug("phase event %s at +%.6f s", event.value, offset)
        self.transitions.append(event)
        self.times.append(offset)

    def freeze(self) -> StepEvents:
        return StepEvents(tuple(self.transitions), tuple(self.times))


MAX_TRANSITIONS_PER_STEP = 2


def _locate(function: Callable[[float], float], upper: float) -> float:
    """Root of `function` on [0, upper], given a sign change."""
    return float(brentq(function, 0.0, upper, xtol=1e-14))


def _tighten(
    state: SystemState,
    T_cmd: float,
    params: PhysicalParams,
    record: _StepRecord,
    offset: float,
) -> SystemState:
    """Apply the slack->taut impulse with tension hysteresis."""
    impacted = slack_to_taut_impulse(state, params)
    if impacted.phase is not Phase.TAUT:
        return impacted
    if _command_tension(impacted, T_cmd, params) < -TENSION_EPSILON:
        record.add(PhaseEvent.CABLE_SNAP, offset)
        return replace(impacted, phase=Phase.SLACK)
    record.add(PhaseEvent.SLACK_TO_TAUT, offset)
    return impacted


def hybrid_step(
    state: SystemState,
    command: PhysicalCommand,
    params: PhysicalParams,
    dt: float,
) -> Tuple[SystemState, StepEvents]:
    """Advance the hybrid system by `dt` with one RK4 step per phase segment.

    Raises:
        IntegrationError: a state component became non-finite.
        ValueError: `dt` is not positive.
    """
    # pylint: disable=too-many-locals
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt!r}")
    T_cmd = float(command.T_cmd)  # pylint: disable=invalid-name
    omega_cmd = np.asarray(command.omega_cmd, dtype=float)
    record = _StepRecord()
    current = state
    elapsed = 0.0
    while True:
        remaining = dt - elapsed
        can_switch = len(record.transitions) < MAX_TRANSITIONS_PER_STEP
        y0 = _pack(current, params)
        t0 = state.t + elapsed

        if current.phase is Phase.TAUT:
            if can_switch and _command_tension(current, T_cmd, params) < 0.0:
                record.add(PhaseEvent.TAUT_TO_SLACK, elapsed)
                current = replace(current, phase=Phase.SLACK)
                continue

            def taut_at(offset: float) -> SystemState:
                y = _rk4(_taut_field, y0, offset, T_cmd, omega_cmd, params)
                return _unpack(y, Phase.TAUT, t0 + offset, params)

            candidate = taut_at(remaining)
            if (
                can_switch
                and _command_tension(candidate, T_cmd, params) < 0.0
            ):
                crossing = _locate(
                    lambda s: _command_tension(taut_at(s), T_cmd, params)
                    if s > 0
                    else _command_tension(current, T_cmd, params),
                    remaining,
                )
                if crossing > 0.0:
                    current = taut_at(crossing)
                elapsed += crossing
                record.add(PhaseEvent.TAUT_TO_SLACK, elapsed)
                current = replace(current, phase=Phase.SLACK)
                continue
            current = candidate
            break

        if can_switch and _gap(current, params) >= 0.0:
            if _separating_speed(current) > SEPARATION_EPSILON:
                previous = len(record.transitions)
                current = _tighten(current, T_cmd, params, record, elapsed)
                if len(record.transitions) > previous:
                    continue

        def slack_at(offset: float) -> SystemState:
            y = _rk4(_slack_field, y0, offset, T_cmd, omega_cmd, params)
            return _unpack(y, Phase.SLACK, t0 + offset, params)

        candidate = slack_at(remaining)
        if (
            can_switch
            and _gap(current, params) < 0.0
            and _gap(candidate, params) >= 0.0
        ):
            crossing = _locate(
                lambda s: _gap(slack_at(s), params)
                if s > 0
                else _gap(current, params),
                remaining,
            )
            contact = slack_at(crossing) if crossing > 0.0 else current
            if _separating_speed(contact) > 0.0:
                elapsed += crossing
                current = _tighten(contact, T_cmd, params, record, elapsed)
                if remaining - crossing > 0.0:
                    continue
                break
        current = candidate
        break

    current = replace(current, t=state.t + dt)
    if not current.is_finite():
        raise IntegrationError(f"non-finite state at t={current.t:.4f}")
    return current, record.freeze()


def step_until(
    state: SystemState,
    command: PhysicalCommand,
    params: PhysicalParams,
    dt: float,
    steps: int,
    stop: Optional[Callable[[SystemState, StepEvents], bool]] = None,
) -> Tuple[SystemState, List[StepEvents]]:
    """Repeat `hybrid_step` with a constant command."""
    events = []
    for _ in range(steps):
        state, step_events = hybrid_step(state, command, params, dt)
        events.append(step_events)
        if stop is not None and stop(state, step_events):
            break
    return state, events
