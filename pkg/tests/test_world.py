import json
import math
import random
from dataclasses import replace

import pytest

from semo import asset_text
from semo.registry import attract_registry, validate
from semo.scenarios import demo_scenario, synth_demo
from semo.script import parse_script
from semo.world import (ARM_IDLE, ARM_POINTING, ARM_WAVING, AgentState,
                        ArmCommand, Dataset, Limits, MotorCommands, Scenario,
                        Simulator, WorldState, dist, integrate_agent,
                        motor_command, wrap_angle)
from tests.conftest import d_of

LIM = Limits()


def make_world(agent_pos=(1.0, 1.0), yaw=0.0, visitor=(3.0, 1.0)):
    return WorldState(
        time=0.0,
        agent=AgentState(position=agent_pos, body_yaw=yaw),
        visitor=visitor,
        visitor_velocity=(0.0, 0.0),
        stand=(4.6, 0.4),
        front_of_stand=(3.6, 1.2),
    )


def test_turn_toward_target_ahead_is_zero():
    world = make_world(yaw=0.0, visitor=(3.0, 1.0))
    cmd = motor_command("turn_toward", world.visitor, world, LIM)
    assert cmd.wheels_rotation == pytest.approx(0.0)


def test_go_toward_at_safety_distance_is_zero():
    world = make_world(visitor=(1.0 + LIM.d_safe, 1.0))
    cmd = motor_command("go_toward", world.visitor, world, LIM)
    assert math.hypot(*cmd.wheels_translation) < 1e-12
    inside = make_world(visitor=(1.0 + LIM.d_safe / 2, 1.0))
    assert motor_command("go_toward", inside.visitor, inside, LIM).wheels_translation == (0.0, 0.0)


def test_turn_toward_clamps_at_omega_max():
    world = make_world(yaw=0.0, visitor=(1.0, 3.0))  # bearing error pi/2
    lim = Limits(k_omega=1.5, omega_max=1.0)
    cmd = motor_command("turn_toward", world.visitor, world, lim)
    assert cmd.wheels_rotation == pytest.approx(1.0)


def test_unknown_primitive_rejected():
    with pytest.raises(ValueError, match="unknown motor primitive"):
        motor_command("teleport", None, make_world(), LIM)


def test_targeting_primitive_requires_target():
    with pytest.raises(ValueError, match="requires a target"):
        motor_command("go_toward", None, make_world(), LIM)


def test_step_all_none_static_visitor_only_advances_time():
    scenario = Scenario(visitor_waypoints=[(0.0, (2.0, 2.0))],
                        stop_at_stand=False)
    sim = Simulator(scenario, hz=50.0)
    before = sim.world
    after = sim.step(MotorCommands())
    assert after.time == pytest.approx(before.time + 0.02)
    assert after.agent == replace(before.agent, body_yaw_rate=0.0,
                                  linear_velocity=(0.0, 0.0))
    assert after.visitor == before.visitor


def test_constant_yaw_rate_integrates_exactly():
    agent = AgentState(position=(1.0, 1.0))
    for _ in range(50):
        agent = integrate_agent(agent, MotorCommands(wheels_rotation=1.0),
                                0.02, LIM)
    assert abs(agent.body_yaw - 1.0) < 1e-9


def test_demo_visitor_diverges_near_two_meters():
    scenario = demo_scenario()
    sim = Simulator(scenario, hz=50.0)
    headings = []
    while not sim.exhausted and sim.tick < 20000:
        w = sim.step(MotorCommands())
        headings.append((dist(w.visitor, w.stand), w.visitor_velocity, w.visitor))
    divergence = scenario.visitor_waypoints[1][1]
    d_at_divergence = dist(divergence, scenario.stand)
    assert 1.8 <= d_at_divergence <= 2.4
    # after diverging, the visitor's velocity points at the stand
    late = [h for h in headings if h[0] < 1.5]
    for d, (vx, vy), pos in late[:20]:
        to_stand = math.atan2(scenario.stand[1] - pos[1], scenario.stand[0] - pos[0])
        heading = math.atan2(vy, vx)
        assert abs(wrap_angle(heading - to_stand)) < 0.6


def test_clamps_hold_under_random_commands():
    rng = random.Random(1)
    scenario = demo_scenario()
    sim = Simulator(scenario, hz=50.0)
    for _ in range(300):
        cmd = MotorCommands(
            wheels_rotation=rng.uniform(-5, 5),
            wheels_translation=(rng.uniform(-3, 3), rng.uniform(-3, 3)),
            head=rng.uniform(-6, 6),
            arm=ArmCommand("wave"),
        )
        w = sim.step(cmd)
        a = w.agent
        assert math.hypot(*a.linear_velocity) <= scenario.limits.v_max + 1e-12
        assert abs(a.body_yaw_rate) <= scenario.limits.omega_max + 1e-12
        assert abs(a.head_yaw) <= scenario.limits.head_limit + 1e-12
        assert 0.0 <= a.position[0] <= scenario.corridor[0]
        assert 0.0 <= a.position[1] <= scenario.corridor[1]


def test_go_toward_respects_safety_distance():
    lim = Limits()
    scenario = Scenario(agent_start=(1.0, 1.5),
                        visitor_waypoints=[(0.0, (2.0, 1.5))],
                        stop_at_stand=False)
    sim = Simulator(scenario, hz=50.0)
    for _ in range(400):
        w = sim.world
        cmd = motor_command("go_toward", w.visitor, w, lim)
        sim.step(cmd)
        rng = dist(sim.world.agent.position, sim.world.visitor)
        assert rng >= lim.d_safe - lim.v_max * sim.dt - 1e-12


def test_all_stop_rest_is_exact():
    scenario = demo_scenario()
    sim = Simulator(scenario, hz=50.0)
    p0 = sim.world.agent.position
    yaw0 = sim.world.agent.body_yaw
    cmd = MotorCommands(wheels_rotation=0.0, wheels_translation=(0.0, 0.0),
                        head=0.0, arm=ArmCommand("freeze"))
    for _ in range(200):
        sim.step(cmd)
    assert sim.world.agent.position == p0
    assert sim.world.agent.body_yaw == yaw0


def test_arm_modes_follow_commands():
    agent = AgentState()
    pointed = integrate_agent(agent, MotorCommands(arm=ArmCommand("point", 0.7)),
                              0.02, LIM)
    assert pointed.arm_mode == ARM_POINTING and pointed.arm_dir == 0.7
    waving = integrate_agent(pointed, MotorCommands(arm=ArmCommand("wave")), 0.02, LIM)
    assert waving.arm_mode == ARM_WAVING
    waving2 = integrate_agent(waving, MotorCommands(arm=ArmCommand("wave")), 0.02, LIM)
    assert waving2.arm_dir == pytest.approx(LIM.wave_rate * 0.02)
    dropped = integrate_agent(waving2, MotorCommands(), 0.02, LIM)
    assert dropped.arm_mode == ARM_IDLE


def test_synth_demo_deterministic(attract):
    checked = validate(parse_script(asset_text("demo1.pf")), attract)
    a = synth_demo(checked, demo_scenario(), seed=5)
    b = synth_demo(checked, demo_scenario(), seed=5)
    assert json.dumps(a.records) == json.dumps(b.records)
    c = synth_demo(checked, demo_scenario(), seed=6)
    assert json.dumps(a.records) != json.dumps(c.records)


def test_synth_demo_all_stop_script_stays_put(attract):
    checked = validate(
        parse_script("go_stop\nturn_stop\narm_freeze"), attract)
    scenario = demo_scenario()
    ds = synth_demo(checked, scenario, seed=2, noise=0.0)
    first, last = ds.records[0]["agent"], ds.records[-1]["agent"]
    assert (first["x"], first["y"], first["body_yaw"]) == \
        (last["x"], last["y"], last["body_yaw"])
    assert len(ds) > 100


def test_synth_demo_labels_follow_branch_structure(attract):
    checked = validate(parse_script(asset_text("demo1.pf")), attract)
    ds = synth_demo(checked, demo_scenario(), seed=8)
    a_set = {"turn_toward:visitor", "look_at:visitor",
             "go_toward:front_of_stand", "waving"}
    b_set = {"turn_toward:stand", "look_at:stand", "point_toward:stand"}
    far = [r for r in ds.records[1:] if d_of(r) > 5.15]
    near = [r for r in ds.records[1:] if d_of(r) < 2.65]
    assert far and near
    for rec in far[2:]:
        assert set(rec["labels"]) == a_set
    for rec in near[2:]:
        assert set(rec["labels"]) == b_set
    gap = [r for r in ds.records[1:] if 2.8 < d_of(r) < 5.0]
    for rec in gap[2:]:
        assert rec["labels"] == []


def test_synth_demo_stops_when_visitor_reaches_stand(attract):
    checked = validate(parse_script("waving"), attract)
    scenario = demo_scenario()
    ds = synth_demo(checked, scenario, seed=3)
    assert d_of(ds.records[-1]) <= scenario.stop_radius + 1e-9
    assert d_of(ds.records[-2]) > scenario.stop_radius


def test_dataset_roundtrip(tmp_path, attract):
    checked = validate(parse_script("waving"), attract)
    ds = synth_demo(checked, demo_scenario(), seed=1)
    path = tmp_path / "d.jsonl"
    ds.dump(path)
    loaded = Dataset.load(path)
    assert loaded.records == ds.records
    assert loaded.dt == pytest.approx(0.02)


def test_scenario_json_roundtrip(tmp_path):
    scenario = demo_scenario(seed=9)
    path = tmp_path / "s.json"
    path.write_text(json.dumps(scenario.to_dict()))
    loaded = Scenario.from_dict(json.loads(path.read_text()))
    assert loaded == scenario


def test_waypoint_times_must_increase():
    with pytest.raises(ValueError, match="strictly increase"):
        Scenario(visitor_waypoints=[(0.0, (1, 1)), (0.0, (2, 2))])
