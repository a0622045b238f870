# -*- coding: utf-8 -*-
"""双时间尺度环境测试"""

import math
from dataclasses import replace

import numpy as np
import pytest

from src.core import acoustics, mission
from src.core.envsim import CovertMissionEnv, LowLevelAction, Phase
from src.core.errors import ContractViolation
from src.utils.helpers import read_csv
from tests.conftest import zero_velocity_world


def seek_actions(env: CovertMissionEnv, power: float = 0.5):
    """朝各自子目标全速前进"""
    actions = {}
    for i in env.active_ids:
        a = env.auvs[i]
        offset = a.sub_target - a.position
        norm = np.linalg.norm(offset)
        v = offset / norm * env.config.v_max if norm > 0 else np.zeros(3)
        actions[i] = np.array([power, *v])
    return actions


def run_slot(env: CovertMissionEnv, selection, power: float = 0.5):
    env.begin_slot(selection)
    infos = []
    done = False
    while not done:
        _, _, done, info = env.low_step(seek_actions(env, power))
        infos.append(info)
    return env.end_slot(), infos


def test_reset_is_deterministic(small_world):
    a = CovertMissionEnv(small_world)
    b = CovertMissionEnv(small_world)
    assert np.array_equal(a.reset(seed=7), b.reset(seed=7))
    assert a.task == b.task
    assert not np.array_equal(a.reset(seed=7), a.reset(seed=8))


def test_same_seed_same_trajectory(desk_world):
    traces = []
    for _ in range(2):
        env = CovertMissionEnv(desk_world)
        env.record_trace = True
        env.reset(seed=21)
        run_slot(env, [1, 0, 1])
        traces.append([rec.to_row() for rec in env.trace])
    assert traces[0] == traces[1]


def test_spaces_contain_observations(desk_world):
    env = CovertMissionEnv(desk_world)
    state = env.reset(seed=1)
    assert env.high_observation_space.contains(state)
    assert env.high_action_space.contains(np.array([1, 0, 1], dtype=np.int8))
    obs = env.begin_slot([1, 1, 1])
    for o in obs.values():
        assert o.shape == (15,)
        assert env.low_observation_space.contains(o)
    obs, _, _, _ = env.low_step(seek_actions(env))
    for o in obs.values():
        assert env.low_observation_space.contains(o)


def test_observation_dimension_without_bearing(small_world):
    env = CovertMissionEnv(small_world)
    env.reset()
    obs = env.begin_slot([1, 1])
    assert env.obs_dim == 12
    assert all(o.shape == (12,) for o in obs.values())
    assert env.state_dim == 8


class TestContracts:
    def test_begin_before_reset(self, small_world):
        with pytest.raises(ContractViolation):
            CovertMissionEnv(small_world).begin_slot([1, 1])

    def test_all_zero_selection(self, small_world):
        env = CovertMissionEnv(small_world)
        env.reset()
        with pytest.raises(ContractViolation):
            env.begin_slot([0, 0])

    def test_wrong_selection_shape(self, small_world):
        env = CovertMissionEnv(small_world)
        env.reset()
        with pytest.raises(ContractViolation):
            env.begin_slot([1, 0, 1])

    def test_double_begin(self, small_world):
        env = CovertMissionEnv(small_world)
        env.reset()
        env.begin_slot([1, 0])
        with pytest.raises(ContractViolation):
            env.begin_slot([1, 0])

    def test_low_step_without_slot(self, small_world):
        env = CovertMissionEnv(small_world)
        env.reset()
        with pytest.raises(ContractViolation):
            env.low_step({0: np.array([1.0, 0, 0, 0])})

    def test_actions_must_match_selection(self, small_world):
        env = CovertMissionEnv(small_world)
        env.reset()
        env.begin_slot([1, 0])
        with pytest.raises(ContractViolation):
            env.low_step({0: np.zeros(4), 1: np.zeros(4)})
        with pytest.raises(ContractViolation):
            env.low_step({})

    def test_end_slot_before_done(self, small_world):
        env = CovertMissionEnv(small_world)
        env.reset()
        env.begin_slot([1, 1])
        env.low_step(seek_actions(env))
        with pytest.raises(ContractViolation):
            env.end_slot()

    def test_begin_after_episode_end(self, small_world):
        env = CovertMissionEnv(small_world)
        env.reset()
        for _ in range(small_world.high_horizon):
            run_slot(env, [1, 1])
        assert env.episode_done
        with pytest.raises(ContractViolation):
            env.begin_slot([1, 1])


def test_action_clamping(small_world):
    env = CovertMissionEnv(small_world)
    env.reset()
    env.begin_slot([1, 0])
    _, _, _, info = env.low_step({0: LowLevelAction(power=100.0, velocity=(30.0, 40.0, 0.0))})
    assert info['powers'][0] == small_world.p_max
    assert np.linalg.norm(env.auvs[0].velocity) == pytest.approx(small_world.v_max)
    assert info['powers'][1] == 0.0


def test_unselected_auvs_do_not_move(small_world):
    env = CovertMissionEnv(small_world)
    env.reset(seed=4)
    before = env.auvs[1].position.copy()
    energy = env.auvs[1].energy
    env.begin_slot([1, 0])
    for _ in range(3):
        env.low_step(seek_actions(env))
    assert np.array_equal(env.auvs[1].position, before)
    assert env.auvs[1].energy == energy


def test_positions_stay_in_world_box(desk_world):
    env = CovertMissionEnv(desk_world)
    env.reset(seed=2)
    env.begin_slot([1, 1, 1])
    for _ in range(5):
        actions = {i: np.array([1.0, 5.0, 5.0, 5.0]) for i in env.active_ids}
        _, _, done, info = env.low_step(actions)
        pos = info['positions']
        assert np.all(pos[:, :2] >= 0) and np.all(pos[:, :2] <= desk_world.extent)
        assert np.all(pos[:, 2] <= 0) and np.all(pos[:, 2] >= -desk_world.depth)
        if done:
            break


def test_energy_ledger_closes(desk_world):
    env = CovertMissionEnv(desk_world)
    env.reset(seed=9)
    for _ in range(desk_world.high_horizon):
        run_slot(env, [1, 1, 1])
    for entry in env.energy_ledger():
        spent = entry['mobility'] + entry['exploration'] + entry['upload']
        assert entry['initial'] - spent == pytest.approx(entry['current'], abs=1e-9)


def test_trace_recomputes_eavesdropper_snr(desk_world, tmp_path):
    env = CovertMissionEnv(desk_world)
    env.record_trace = True
    env.reset(seed=13)
    _, infos = run_slot(env, [1, 1, 0], power=1.0)
    eav = np.array(desk_world.eavesdropper_position)
    by_slice = {}
    for rec in env.trace:
        by_slice.setdefault(rec.slice, []).append(rec)
    assert len(by_slice) == len(infos)
    for recs in by_slice.values():
        powers = [r.power for r in recs]
        dists = [max(float(np.linalg.norm(np.array(r.position) - eav)), 1.0) for r in recs]
        gamma = acoustics.eavesdropper_snr([1] * len(recs), powers, dists, desk_world.acoustics)
        assert recs[0].gamma_e == pytest.approx(gamma, rel=1e-9, abs=1e-300)
        kl = acoustics.kl_divergence(gamma)
        assert recs[0].covert == acoustics.covertness_satisfied(kl, desk_world.covertness)

    path = tmp_path / "trace.csv"
    assert env.export_trace(path)
    rows = read_csv(path)
    assert len(rows) == len(env.trace)
    assert rows[0]['phase'] in {p.value for p in Phase}


def test_arrival_latches_once(small_world):
    world = zero_velocity_world(small_world)
    env = CovertMissionEnv(world)
    env.reset(seed=5)
    env.begin_slot([1, 0])
    a = env.auvs[0]
    a.position = a.sub_target.copy()
    energy = a.energy
    _, rewards, _, info = env.low_step({0: np.array([0.5, 0.0, 0.0, 0.0])})
    assert info['arrived'][0]
    assert a.phase is Phase.SCANNING
    assert a.arrival_slice == 1
    assert rewards[0] >= world.reward_low.w_b
    exploration = mission.exploration_energy(a.radius, world.energy)
    assert a.consumed['exploration'] == pytest.approx(exploration)
    assert energy - a.energy > exploration

    _, rewards, _, _ = env.low_step({0: np.array([0.5, 0.0, 0.0, 0.0])})
    assert rewards[0] < world.reward_low.w_b
    assert a.consumed['exploration'] == pytest.approx(exploration)


def test_completed_slot_reports_finite_delay():
    from src.data.models import WorldConfig
    world = zero_velocity_world(WorldConfig(n_auvs=1, high_horizon=1, low_horizon=200, seed=0))
    world = replace(world, acoustics=replace(world.acoustics, noise_scale=1.2e-11))
    env = CovertMissionEnv(world)
    env.reset(seed=0)
    env.begin_slot([1])
    env.auvs[0].position = env.auvs[0].sub_target.copy()
    done = False
    while not done:
        _, _, done, _ = env.low_step({0: np.array([world.p_max, 0.0, 0.0, 0.0])})
    _, reward, info = env.end_slot()
    assert info.completed
    assert info.completion_ratio == 1.0
    assert math.isfinite(info.task_delay)
    assert info.efficiency == pytest.approx(info.coverage / info.task_delay)
    assert info.episode_done


def test_incomplete_auv_saturates_delay(small_world):
    env = CovertMissionEnv(small_world)
    env.reset(seed=1)
    env.begin_slot([1, 1])
    dispatch = max(env.auvs[i].dispatch for i in (0, 1))
    done = False
    while not done:
        _, _, done, _ = env.low_step({i: np.zeros(4) for i in env.active_ids})
    _, _, info = env.end_slot()
    assert not info.completed
    horizon = small_world.low_horizon * small_world.dt
    assert info.task_delay == pytest.approx(dispatch + horizon)


def test_episode_runs_high_horizon_slots(small_world):
    env = CovertMissionEnv(small_world)
    env.reset()
    infos = []
    while not env.episode_done:
        (_, _, info), slices = run_slot(env, [1, 1])
        assert len(slices) <= small_world.low_horizon
        infos.append(info)
    assert [i.slot for i in infos] == list(range(small_world.high_horizon))
    assert infos[-1].episode_done and not infos[0].episode_done
    for info in infos:
        assert 0.0 <= info.coverage <= 1.0
        assert 0.0 <= info.covert_fraction <= 1.0


def test_global_observation_zero_fills_unselected(small_world):
    env = CovertMissionEnv(small_world)
    env.reset()
    obs = env.begin_slot([0, 1])
    g = env.global_observation(obs)
    assert g.shape == (2 * env.obs_dim,)
    assert np.all(g[:env.obs_dim] == 0)
    assert np.array_equal(g[env.obs_dim:], obs[1])


def test_low_reward_formula(small_world):
    env = CovertMissionEnv(small_world)
    w = small_world.reward_low
    r = env.low_reward(True, 10.0, 7.0, True, -100.0)
    assert r == pytest.approx(w.w_c + 3.0 * w.w_p + w.w_b - 100.0 * w.w_e)
    assert env.low_reward(False, 5.0, 5.0, False, 10.0) == 0.0


def test_energy_violation_flag(small_world):
    world = replace(small_world, energy_range=(1.0, 1.0))
    env = CovertMissionEnv(world)
    env.reset(seed=2)
    assert env.energy_violations() == []
    env.begin_slot([1, 0])
    _, _, done, info = env.low_step(seek_actions(env))
    assert info['energy_violation'] == [True, False]
    assert env.auvs[0].energy < 0
    while not done:
        _, _, done, info = env.low_step(seek_actions(env))
        assert info['energy_violation'][0]
    _, _, slot = env.end_slot()
    assert slot.energy_violations == (0,)


def test_radiating_while_moving_costs_energy(small_world):
    world = zero_velocity_world(small_world)
    env = CovertMissionEnv(world)
    env.reset(seed=6)
    env.begin_slot([1, 0])
    a = env.auvs[0]
    a.sub_target = a.position + np.array([100.0, 0.0, 0.0])
    _, _, _, info = env.low_step({0: np.array([1.5, 0.0, 0.0, 0.0])})
    assert a.phase is Phase.MOVING
    assert info['powers'][0] == 1.5
    expected = mission.transmit_energy(1.5, world.dt, world.energy)
    assert a.consumed['upload'] == pytest.approx(expected)
    assert expected == pytest.approx(1.5 / world.energy.Upsilon * world.dt)
