import math

import numpy as np
import pytest

from airpid import simenv
from airpid.simenv import (ControllerFault, DroneEnv, DroneState, SimConfig, compute_leg_reward,
                           effective_speed_of, observe, position_error, sample_target, step)
from oracles import lag_step_by_hand

CFG = SimConfig()


def state_at(pos, target, **kw):
    return DroneState(position=np.asarray(pos, float), velocity=np.zeros(3),
                      target=np.asarray(target, float), start_of_leg=np.asarray(pos, float), **kw)


@pytest.mark.parametrize("target,current,expected", [
    ((1, 2, 3), (1, 2, 3), 0.0),
    ((5, 5, 1.5), (0, 0, 0), 7.228416),
    ((0, 1, 1), (0, 0, 0), 1.414214),
])
def test_position_error(target, current, expected):
    assert position_error(target, current) == pytest.approx(expected, abs=1e-6)


def test_position_error_exact_root():
    assert position_error((5, 5, 1.5), (0, 0, 0)) == math.sqrt(52.25)


def test_observe_backward_difference():
    s = state_at((0, 0, 0), (1.9, 0, 0), prev_pe=2.0, fresh_leg=False)
    e = observe(s, CFG)
    assert e.dpe == pytest.approx(-2.5, rel=1e-12)


def test_observe_constant_error_has_zero_derivative():
    s = state_at((0, 0, 0), (2, 0, 0), prev_pe=2.0, fresh_leg=False)
    assert observe(s, CFG).dpe == 0.0


def test_observe_fresh_leg():
    s = state_at((0, 0, 0), (3, 0, 4))
    e = observe(s, CFG)
    assert e.dpe == 0.0
    assert e.ipe == pytest.approx(5.0 * CFG.dt)


def test_step_equilibrium():
    s = state_at((1, 1, 1), (3, 3, 2))
    new, out = step(s, np.zeros(3), CFG, np.random.default_rng(0))
    np.testing.assert_array_equal(new.position, s.position)
    assert out.reward == -CFG.step_penalty


def test_step_lag_example():
    s = state_at((0, 0, 0), (5, 0, 0))
    new, _ = step(s, np.array([1.0, 0, 0]), CFG, np.random.default_rng(0))
    assert new.velocity[0] == pytest.approx(0.04 / 0.3, rel=1e-12)
    assert new.position[0] == pytest.approx(0.04 * 0.04 / 0.3, rel=1e-12)
    p, v = lag_step_by_hand(np.zeros(3), np.zeros(3), np.array([1.0, 0, 0]), 0.04, 0.3)
    np.testing.assert_allclose(new.position, p, rtol=1e-14)
    np.testing.assert_allclose(new.velocity, v, rtol=1e-14)


def test_step_completes_leg_on_fiftieth_hold_step():
    target = np.array([4.0, 0.0, 1.0])
    s = state_at(target, target, hold_counter=49, episode_timestep=149, fresh_leg=False, prev_pe=0.0)
    s.start_of_leg = np.array([0.0, 0.0, 1.0])
    new, out = step(s, np.zeros(3), CFG, np.random.default_rng(3))
    assert out.leg_completed
    assert out.info["effective_speed"] == pytest.approx(1.0)
    assert out.reward == pytest.approx(math.exp(10.0), rel=1e-12)
    assert new.hold_counter == 0 and new.fresh_leg
    assert position_error(new.target, target) >= CFG.min_leg_distance


def test_hold_counter_resets_when_leaving_tolerance():
    s = state_at((0, 0, 0), (0.5, 0, 0), hold_counter=30, fresh_leg=False)
    new, out = step(s, np.zeros(3), CFG, np.random.default_rng(0))
    assert new.hold_counter == 0 and not out.leg_completed


def test_non_finite_command_faults():
    s = state_at((0, 0, 0), (1, 0, 0))
    with pytest.raises(ControllerFault):
        step(s, np.array([np.nan, 0, 0]), CFG, np.random.default_rng(0))


def test_excessive_command_aborts():
    s = state_at((0, 0, 0), (1, 0, 0))
    new, out = step(s, np.array([2.0, 0, 0]), CFG, np.random.default_rng(0))
    assert out.aborted and out.episode_done
    assert out.reward == -CFG.abort_penalty
    np.testing.assert_array_equal(new.position, s.position)


def test_episode_truncates_at_cap():
    env = DroneEnv(SimConfig(episode_cap=5, hold_steps=2))
    env.reset()
    done = [env.step(np.zeros(3)).episode_done for _ in range(5)]
    assert done == [False] * 4 + [True]
    assert env.episodes == 1


def test_sample_target_degenerate_box():
    rng = np.random.default_rng(0)
    np.testing.assert_array_equal(sample_target(rng, (1, 2, 3), (1, 2, 3)), [1, 2, 3])


def test_sample_target_golden_sequence():
    rng = np.random.default_rng(12345)
    got = [sample_target(rng, CFG.lo, CFG.hi).tolist() for _ in range(3)]
    assert got == [
        [-3.271967730393964, -2.1988999234829656, 2.4934136433318352],
        [2.115056049011695, -1.3066853927770925, 1.3320348196659613],
        [1.1797050430462779, -3.7591897727554398, 2.1818901100365533],
    ]


def test_sample_target_stays_in_box():
    rng = np.random.default_rng(1)
    pts = np.array([sample_target(rng, CFG.lo, CFG.hi) for _ in range(10_000)])
    assert np.all(pts >= CFG.lo) and np.all(pts <= CFG.hi)


def test_env_targets_do_not_depend_on_controller():
    a, b = DroneEnv(CFG), DroneEnv(CFG)
    a.reset()
    b.reset()
    np.testing.assert_array_equal(a.state.target, b.state.target)
    assert a.state.target.tolist() == [1.6435402478574517, -2.7625594348335563, 0.6024338098404867]


def test_leg_reward_examples():
    assert effective_speed_of(4.0, 150, CFG) == pytest.approx(1.0, rel=1e-12)
    assert compute_leg_reward(4.0, 150, CFG) == pytest.approx(22026.465794806718, rel=1e-9)
    assert compute_leg_reward(0.0, 150, CFG) == 1.0
    # 0.92 m/s: distance chosen so that the leg takes 100 steps past the hold
    assert compute_leg_reward(0.92 * 0.04 * 100, 150, CFG) == pytest.approx(9897.129058743909, rel=1e-9)


def test_leg_reward_cap():
    assert compute_leg_reward(100.0, 51, CFG) == pytest.approx(math.exp(30.0))


def test_leg_too_short_rejected():
    with pytest.raises(ValueError):
        effective_speed_of(1.0, 50, CFG)


@pytest.mark.parametrize("kw", [
    {"dt": 0.0}, {"tau_v": -1.0}, {"hold_steps": 0}, {"settle_tolerance": 0.0},
    {"workspace_lo": (0, 0, 0), "workspace_hi": (-1, 1, 1)}, {"episode_cap": 50},
])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        SimConfig(**kw)


def test_module_exports_kernel_backed_step():
    assert callable(simenv.lag_step)
