"""Test the backward seeding recursion and its validity gate."""

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from aster.dynamics import Phase, PhysicalParams
from aster.errors import (
    PhaseSwitch,
    RotationAmbiguityError,
    SeedingError,
    UndefinedAttitudeError,
)
from aster.hdss import (
    START_MARGIN,
    BackwardSwitch,
    FlatChain,
    Rejection,
    SeedConfig,
    backpropagate,
    backstep_slack,
    backstep_taut,
    chain_rows,
    derive_attitude,
    derive_body_rates,
    detect_backward_phase_switch,
    forward_slack_quadrotor,
    forward_taut_payload,
    forward_verify,
    generate_seed,
    goal_velocity_bounds,
    sample_goal_chain,
    seed_diagnostics,
    taylor_propagator,
    taut_payload_matrices,
)
from aster.rotations import is_rotation, rot_x, rot_z
from aster.tracks import WaypointKind, Workspace, make_waypoint

# pylint: disable=missing-function-docstring,redefined-outer-name

PARAMS = PhysicalParams()
CFG = SeedConfig()
COMPONENT = st.floats(min_value=-10.0, max_value=10.0, allow_nan=False)
VECTORS = st.tuples(COMPONENT, COMPONENT, COMPONENT).map(np.array)
STATES = st.lists(COMPONENT, min_size=12, max_size=12).map(np.array)


def scalar_chain(x, v, a, j, phase=Phase.TAUT) -> FlatChain:
    return FlatChain(
        xi_l=np.repeat([x, v, a, j], 3).astype(float),
        xi_q=np.zeros(9),
        phase=phase,
        step_index=CFG.K,
    )


@pytest.fixture
def upright():
    return make_waypoint((0.0, 0.0, 4.0), WaypointKind.UPRIGHT, 0.3)


@pytest.mark.parametrize("dt", [0.01, 0.003, 0.1])
def test_taylor_propagator_inverse(dt):
    product = taylor_propagator(dt, 4) @ taylor_propagator(-dt, 4)
    assert np.allclose(product, np.eye(4), rtol=0.0, atol=1e-15)


def test_taut_backstep_scalar_example():
    chain = scalar_chain(1.0, 2.0, 3.0, 4.0)
    previous = backstep_taut(chain, np.full(3, 5.0), CFG, PARAMS)
    expected = 1.0 - 0.02 + 1.5e-4 - 4.0 * 1e-6 / 6.0 - 5.0 * 1e-8 / 24.0
    assert np.allclose(previous.x_l, expected, rtol=1e-14)
    assert previous.step_index == CFG.K - 1


def test_taut_backstep_hover_is_fixed():
    hover = scalar_chain(0.0, 0.0, 0.0, 0.0)
    previous = backstep_taut(hover, np.zeros(3), CFG, PARAMS)
    assert np.array_equal(previous.xi_l, hover.xi_l)
    assert np.array_equal(previous.xi_q, hover.xi_q)


@given(STATES, VECTORS)
def test_taut_backstep_inverts(xi_l, s_l):
    _, b_mat = taut_payload_matrices(CFG.dt)
    a_prev = taylor_propagator(-CFG.dt, 4)
    xi_prev = np.kron(a_prev, np.eye(3)) @ xi_l + b_mat @ s_l
    recovered = forward_taut_payload(xi_prev, s_l, CFG.dt)
    assert np.allclose(recovered, xi_l, rtol=1e-12, atol=1e-12)


def test_taut_backstep_signals_vanishing_tension():
    free_fall = scalar_chain(0.0, 0.0, 0.0, 0.0)
    xi_l = free_fall.xi_l.copy()
    xi_l[6:9] = PARAMS.g_vec
    chain = FlatChain(xi_l, np.zeros(9), Phase.TAUT, CFG.K)
    with pytest.raises(PhaseSwitch):
        backstep_taut(chain, np.zeros(3), CFG, PARAMS)


@given(STATES, st.lists(COMPONENT, min_size=9, max_size=9), VECTORS)
def test_slack_backstep(xi_l, xi_q, j_q):
    chain = FlatChain(xi_l, np.array(xi_q), Phase.SLACK, CFG.K)
    previous = backstep_slack(chain, j_q, CFG, PARAMS)
    assert np.array_equal(previous.a_l, PARAMS.g_vec)
    assert np.array_equal(previous.j_l, np.zeros(3))
    assert np.allclose(
        forward_slack_quadrotor(previous.xi_q, j_q, CFG.dt),
        chain.xi_q,
        rtol=1e-12,
        atol=1e-12,
    )


def test_slack_backstep_traces_free_fall():
    chain = scalar_chain(0.0, 0.0, 0.0, 0.0, Phase.SLACK)
    for _ in range(3):
        chain = backstep_slack(chain, np.zeros(3), CFG, PARAMS)
    assert chain.x_l[2] < 0.0
    assert chain.v_l[2] > 0.0


def test_detect_backward_phase_switch():
    chain = scalar_chain(0.0, 0.0, 0.0, 0.0)
    assert (
        detect_backward_phase_switch(chain, PARAMS) is BackwardSwitch.STAY
    )
    xi_l = chain.xi_l.copy()
    xi_l[6:9] = PARAMS.g_vec
    free_fall = FlatChain(xi_l, chain.xi_q, Phase.TAUT, CFG.K)
    assert (
        detect_backward_phase_switch(free_fall, PARAMS)
        is BackwardSwitch.TO_SLACK
    )
    xi_q = np.zeros(9)
    xi_q[2] = 1.01 * PARAMS.l
    stretched = FlatChain(chain.xi_l, xi_q, Phase.SLACK, CFG.K)
    assert (
        detect_backward_phase_switch(stretched, PARAMS)
        is BackwardSwitch.TO_TAUT
    )


def test_derive_attitude_examples():
    assert np.allclose(derive_attitude(np.zeros(3), 0.0, PARAMS), np.eye(3))
    inverted = derive_attitude(2.0 * PARAMS.g_vec, 0.0, PARAMS)
    assert np.allclose(inverted, rot_x(math.pi))
    with pytest.raises(UndefinedAttitudeError):
        derive_attitude(PARAMS.g_vec, 0.0, PARAMS)


@given(VECTORS, st.floats(min_value=-math.pi, max_value=math.pi))
def test_derive_attitude_aligns_thrust(a_q, yaw):
    thrust = a_q - PARAMS.g_vec
    if np.linalg.norm(thrust) < 1e-6:
        return
    heading = np.array([math.cos(yaw), math.sin(yaw), 0.0])
    direction = thrust / np.linalg.norm(thrust)
    if np.linalg.norm(np.cross(direction, heading)) < 1e-3:
        return
    rot = derive_attitude(a_q, yaw, PARAMS)
    assert is_rotation(rot, 1e-12)
    assert np.allclose(rot[:, 2], direction, atol=1e-12)
    assert abs(np.dot(rot[:, 1], heading)) < 1e-9


def test_derive_body_rates():
    assert np.allclose(derive_body_rates(np.eye(3), np.eye(3), 0.01), 0.0)
    rates = derive_body_rates(np.eye(3), rot_z(0.01), 0.01)
    assert np.allclose(rates, [0.0, 0.0, 1.0])
    with pytest.raises(RotationAmbiguityError):
        derive_body_rates(np.eye(3), rot_x(math.pi), 0.01)


def test_degenerate_seed_is_hover_at_waypoint(upright):
    seed = generate_seed(
        upright, SeedConfig.degenerate(), PARAMS, np.random.default_rng(3)
    )
    state = seed.state
    assert state.phase is Phase.TAUT
    assert np.allclose(state.x_q, upright.position, atol=1e-12)
    assert np.allclose(
        state.x_l, upright.position - [0.0, 0.0, PARAMS.l], atol=1e-12
    )
    assert np.allclose(state.v_q, 0.0)
    assert np.allclose(state.v_l, 0.0)
    assert np.allclose(state.omega, 0.0)
    assert np.allclose(state.R, upright.R_TW)
    assert seed.max_drift < 1e-12
    assert seed.phase_switches == 0
    assert seed.resamples == 0
    assert len(seed.chain) == CFG.K + 1


def test_seeding_is_deterministic(upright):
    first = generate_seed(upright, CFG, PARAMS, np.random.default_rng(7))
    second = generate_seed(upright, CFG, PARAMS, np.random.default_rng(7))
    assert chain_rows(first, CFG.dt) == chain_rows(second, CFG.dt)


def test_seed_gate(upright):
    diagnostics = seed_diagnostics(
        upright, 20, CFG, PARAMS, np.random.default_rng(11), forward=True
    )
    assert diagnostics.attempts >= len(diagnostics.seeds)
    assert len(diagnostics.seeds) + diagnostics.failures == 20
    for seed in diagnostics.seeds:
        assert seed.state.is_finite()
        assert seed.max_drift <= CFG.drift_tolerance * PARAMS.l
        limit = CFG.omega_factor * np.array(PARAMS.omega_max)
        assert np.all(np.abs(seed.state.omega) <= limit)
    assert all(math.isfinite(gap) for gap in diagnostics.forward_gaps)
    assert sum(diagnostics.switch_histogram().values()) == len(
        diagnostics.seeds
    )


@pytest.mark.slow
def test_seed_pass_rate(upright):
    diagnostics = seed_diagnostics(
        upright, 1000, CFG, PARAMS, np.random.default_rng(2024)
    )
    assert diagnostics.pass_rate >= 0.95
    assert diagnostics.drift_percentiles()[-1] <= 0.05 * PARAMS.l


def test_forward_verify_is_finite(upright):
    seed = generate_seed(upright, CFG, PARAMS, np.random.default_rng(5))
    assert math.isfinite(forward_verify(seed, CFG, PARAMS))


def test_exhausted_resamples(upright):
    cramped = Workspace(low=(-1.0, -1.0, 3.9), high=(1.0, 1.0, 4.1))
    with pytest.raises(SeedingError):
        generate_seed(
            upright,
            SeedConfig(max_resamples=2),
            PARAMS,
            np.random.default_rng(0),
            cramped,
        )


@pytest.mark.parametrize(
    "kwargs",
    [{"K": 0}, {"max_resamples": -1}, {"payload_tilt_range": (0.0, 4.0)}],
)
def test_seed_config_validation(kwargs):
    with pytest.raises(ValueError):
        SeedConfig(**kwargs)


def test_degenerate_goal_chain_is_hover(upright):
    chain = sample_goal_chain(
        upright, SeedConfig.degenerate(), PARAMS, np.random.default_rng(0)
    )
    assert chain.phase is Phase.TAUT
    assert np.allclose(chain.x_l - chain.x_q, [0.0, 0.0, -PARAMS.l])
    assert np.allclose(chain.v_q, 0.0)
    assert np.allclose(chain.a_q, 0.0)


def test_goal_payload_lies_on_the_cable_sphere(upright):
    rng = np.random.default_rng(8)
    offsets = np.array(
        [
            sample_goal_chain(upright, CFG, PARAMS, rng).x_l
            - upright.position
            for _ in range(2000)
        ]
    )
    assert np.allclose(
        np.linalg.norm(offsets, axis=1), PARAMS.l, rtol=1e-12
    )
    assert np.all(offsets[:, 2] <= 1e-12)
    assert np.all(np.abs(offsets[:, :2].mean(axis=0)) < 0.05 * PARAMS.l)


@pytest.fixture
def inverted():
    return make_waypoint((0.0, 0.0, 4.0), WaypointKind.INVERTED, 0.3)


@pytest.mark.slow
def test_taut_backstep_inverts_ten_thousand_states():
    rng = np.random.default_rng(10_000)
    _, b_mat = taut_payload_matrices(CFG.dt)
    a_mat = np.kron(taylor_propagator(-CFG.dt, 4), np.eye(3))
    for xi_l, s_l in zip(
        rng.uniform(-10.0, 10.0, size=(10_000, 12)),
        rng.uniform(-100.0, 100.0, size=(10_000, 3)),
    ):
        xi_prev = a_mat @ xi_l + b_mat @ s_l
        recovered = forward_taut_payload(xi_prev, s_l, CFG.dt)
        assert np.allclose(recovered, xi_l, rtol=1e-12, atol=1e-12)


@pytest.mark.slow
def test_slack_backstep_inverts_ten_thousand_states():
    rng = np.random.default_rng(10_001)
    for xi_l, xi_q, j_q in zip(
        rng.uniform(-10.0, 10.0, size=(10_000, 12)),
        rng.uniform(-10.0, 10.0, size=(10_000, 9)),
        rng.uniform(-50.0, 50.0, size=(10_000, 3)),
    ):
        chain = FlatChain(xi_l, xi_q, Phase.SLACK, CFG.K)
        previous = backstep_slack(chain, j_q, CFG, PARAMS)
        assert np.array_equal(previous.a_l, PARAMS.g_vec)
        assert np.allclose(
            forward_slack_quadrotor(previous.xi_q, j_q, CFG.dt),
            xi_q,
            rtol=1e-12,
            atol=1e-12,
        )


def max_taut_drift(xi_l, xi_q, cfg: SeedConfig) -> float:
    goal = FlatChain(xi_l.copy(), xi_q.copy(), Phase.TAUT, cfg.K)
    history, switches = backpropagate(
        goal, cfg, PARAMS, np.random.default_rng(0)
    )
    assert switches == 0
    assert len(history) == cfg.K + 1
    return max(link.cable_drift(PARAMS) for link in history)


@pytest.mark.parametrize("seed", range(5))
def test_cable_drift_shrinks_with_the_step(seed):
    # jerk along the cable keeps its direction fixed, so all drift comes
    # from the quadrotor's discrete integration
    rng = np.random.default_rng(seed)
    normal = np.array([*rng.uniform(-0.5, 0.5, size=2), 1.0])
    normal /= np.linalg.norm(normal)
    a_l = PARAMS.g_vec + rng.uniform(5.0, 15.0) * normal
    j_l = rng.choice([-1.0, 1.0]) * rng.uniform(1.0, 3.0) * normal
    v_l = rng.uniform(-3.0, 3.0, size=3)
    x_q = np.array([0.0, 0.0, 4.0])
    xi_l = np.concatenate([x_q - PARAMS.l * normal, v_l, a_l, j_l])
    xi_q = np.concatenate([x_q, v_l, a_l])

    coarse = SeedConfig(K=60, dt=0.01, snap_range=(0.0, 0.0))
    fine = SeedConfig(K=120, dt=0.005, snap_range=(0.0, 0.0))
    coarse_drift = max_taut_drift(xi_l, xi_q, coarse)
    fine_drift = max_taut_drift(xi_l, xi_q, fine)
    assert 0.0 < coarse_drift < coarse.drift_tolerance * PARAMS.l
    assert fine_drift <= 0.6 * coarse_drift


def test_seed_rejections_are_counted(upright):
    diagnostics = seed_diagnostics(
        upright,
        10,
        SeedConfig.aggressive(max_resamples=1),
        PARAMS,
        np.random.default_rng(3),
    )
    rejected = sum(diagnostics.rejections.values())
    assert diagnostics.attempts == len(diagnostics.seeds) + rejected
    assert set(diagnostics.rejection_rates()) == set(diagnostics.rejections)
    assert math.isclose(
        sum(diagnostics.rejection_rates().values()),
        1.0 - diagnostics.pass_rate,
    )


def test_aggressive_ranges_fail_on_cable_drift(upright):
    diagnostics = seed_diagnostics(
        upright,
        100,
        SeedConfig.aggressive(max_resamples=0),
        PARAMS,
        np.random.default_rng(2024),
    )
    assert diagnostics.attempts == 100
    assert diagnostics.pass_rate < 0.2
    assert diagnostics.dominant_rejection is Rejection.CABLE_DRIFT
    assert diagnostics.rejection_rates()[Rejection.CABLE_DRIFT] > 0.5


def test_degenerate_ranges_are_never_rejected(upright):
    diagnostics = seed_diagnostics(
        upright,
        5,
        SeedConfig.degenerate(),
        PARAMS,
        np.random.default_rng(0),
    )
    assert diagnostics.pass_rate == 1.0
    assert diagnostics.rejections == {}
    assert diagnostics.dominant_rejection is None


def test_goal_velocity_keeps_the_start_inside(inverted):
    workspace = Workspace()
    rng = np.random.default_rng(21)
    horizon = CFG.K * CFG.dt
    for _ in range(500):
        goal = sample_goal_chain(inverted, CFG, PARAMS, rng, workspace)
        start = (
            goal.x_l
            - goal.v_l * horizon
            + 0.5 * goal.a_l * horizon**2
            - goal.j_l * horizon**3 / 6.0
        )
        assert workspace.contains(start, margin=PARAMS.l)
        assert np.all(np.abs(goal.v_l) <= 3.0)


def test_goal_velocity_bounds_fall_back_to_the_full_range():
    cramped = Workspace(low=(-1.0, -1.0, 3.9), high=(1.0, 1.0, 4.1))
    low, high = goal_velocity_bounds(
        np.array([0.0, 0.0, 4.0]),
        np.zeros(3),
        np.zeros(3),
        CFG,
        PARAMS,
        cramped,
    )
    reach = (1.0 - PARAMS.l - START_MARGIN) / (CFG.K * CFG.dt)
    assert np.allclose(low, [-reach, -reach, -3.0])
    assert np.allclose(high, [reach, reach, 3.0])


def test_inverted_seeds_start_inside_the_workspace(inverted):
    diagnostics = seed_diagnostics(
        inverted, 50, CFG, PARAMS, np.random.default_rng(2024)
    )
    assert diagnostics.failures == 0
    assert Rejection.WORKSPACE not in diagnostics.rejections


@pytest.mark.slow
def test_seed_pass_rate_inverted(inverted):
    diagnostics = seed_diagnostics(
        inverted, 1000, CFG, PARAMS, np.random.default_rng(2024)
    )
    assert diagnostics.pass_rate >= 0.95
    assert diagnostics.drift_percentiles()[-1] <= 0.05 * PARAMS.l
