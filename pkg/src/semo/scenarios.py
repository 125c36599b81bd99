"""Built-in corridor scenarios and demonstration synthesis.

The stock scene is a corridor with a stand at its far end and a greeting
spot in front of the stand. The visitor enters at the opposite corner,
walks down the corridor, and diverges toward the stand when roughly two
meters from it; recording stops when the visitor reaches the stand. The
``passby`` and ``return`` variants exercise visitors that do not behave
like the demonstration.

:func:`synth_demo` replaces motion capture: it runs a hand-written script
closed loop and records the world states, while injecting a small seeded
dither into the executed commands so the data carries the persistent
micro-corrections a human demonstrator would produce. Ground-truth
activation labels are kept alongside each sample for oracle tests.
"""
from __future__ import annotations

import numpy as np

from .engine import Memory, compile_script, run, tick
from .registry import CheckedScript
from .world import (Dataset, MotorCommands, Scenario, Simulator,
                    world_to_record)

DEMO_CORRIDOR = (6.5, 3.0)
DEMO_STAND = (6.0, 0.4)
DEMO_FRONT_OF_STAND = (4.4, 0.3)    # greeting spot, facing the entrance
DEMO_AGENT_START = (6.0, 0.8)


def demo_scenario(seed: int = 7) -> Scenario:
    """Demonstration scene: visitor walks in, then diverges to the stand."""
    return Scenario(
        corridor=DEMO_CORRIDOR,
        stand=DEMO_STAND,
        front_of_stand=DEMO_FRONT_OF_STAND,
        agent_start=DEMO_AGENT_START,
        agent_start_yaw=np.pi,
        visitor_waypoints=[
            (0.0, (0.3, 2.8)),
            (10.9, (5.7, 2.55)),  # straight walk, ~2 m from the stand at the end
            (15.9, (6.0, 0.4)),   # diverge to the stand
        ],
        seed=seed,
        noise_scale=0.05,
        stop_at_stand=True,
        stop_radius=0.35,
    )


def passby_scenario(seed: int = 7) -> Scenario:
    """Visitor crosses the corridor without ever visiting the stand."""
    return Scenario(
        corridor=DEMO_CORRIDOR,
        stand=DEMO_STAND,
        front_of_stand=DEMO_FRONT_OF_STAND,
        agent_start=DEMO_AGENT_START,
        agent_start_yaw=np.pi,
        visitor_waypoints=[
            (0.0, (0.3, 2.8)),
            (13.0, (6.3, 2.3)),
        ],
        seed=seed,
        noise_scale=0.05,
        stop_at_stand=True,
        stop_radius=0.35,
    )


def return_scenario(seed: int = 7) -> Scenario:
    """Visitor approaches, walks away, and finally comes back to the stand."""
    return Scenario(
        corridor=DEMO_CORRIDOR,
        stand=DEMO_STAND,
        front_of_stand=DEMO_FRONT_OF_STAND,
        agent_start=DEMO_AGENT_START,
        agent_start_yaw=np.pi,
        visitor_waypoints=[
            (0.0, (0.3, 2.8)),
            (9.0, (4.8, 1.4)),
            (16.0, (1.2, 2.6)),
            (26.0, (6.0, 0.4)),
        ],
        seed=seed,
        noise_scale=0.05,
        stop_at_stand=True,
        stop_radius=0.35,
    )


def paper_corridor_scenario(seed: int = 0) -> Scenario:
    """The plain 5 x 3 m corridor with the default walk-in visitor."""
    return Scenario(seed=seed)


BUILTIN_SCENARIOS = {
    "demo": demo_scenario,
    "passby": passby_scenario,
    "return": return_scenario,
    "corridor": paper_corridor_scenario,
}


def command_dither(seed: int, scale: float = 0.01):
    """Seeded per-tick perturbation of executed commands.

    Stateless in the tick index so that identical runs replay exactly.
    Perturbs every motion channel, mirroring a human body that is never
    perfectly still; the arm channel is left alone because arm modes are
    discrete.
    """
    if scale == 0.0:
        return None

    def perturb(tick_index: int, cmd: MotorCommands) -> MotorCommands:
        g = np.random.Generator(np.random.Philox(key=(seed << 8) + 0xD1, counter=tick_index))
        n = g.normal(0.0, scale, size=4)
        vx, vy = cmd.wheels_translation or (0.0, 0.0)
        return MotorCommands(
            wheels_rotation=(cmd.wheels_rotation or 0.0) + n[0],
            wheels_translation=(vx + n[1], vy + n[2]),
            head=(cmd.head or 0.0) + n[3],
            arm=cmd.arm,
        )

    return perturb


def synth_demo(checked: CheckedScript, scenario: Scenario, seed: int,
               hz: float = 50.0, max_ticks: int = 20000,
               noise: float = 0.01) -> Dataset:
    """Record a synthetic demonstration of ``checked`` in ``scenario``.

    The returned dataset holds one record per sample; each record after the
    first carries the ground-truth motor couplings that produced it. The
    scenario's own seed is overridden by ``seed`` so one scenario can yield
    many distinct demonstrations.
    """
    import dataclasses

    scenario = dataclasses.replace(scenario, seed=seed)
    sim = Simulator(scenario, hz=hz)
    tree = compile_script(checked, scenario.limits)
    memory = Memory()
    dither = command_dither(seed, noise)

    records = [world_to_record(sim.world, labels=[])]
    motor_ids = {l.leaf_id: l for l in tree.motor_leaves()}
    for _ in range(max_ticks):
        if sim.exhausted:
            break
        result = tick(tree, sim.world, memory)
        memory = result.memory
        cmd = result.commands
        if dither is not None:
            cmd = dither(sim.tick, cmd)
        labels = sorted({motor_ids[i].association
                         for i in result.activations.active if i in motor_ids})
        sim.step(cmd)
        records.append(world_to_record(sim.world, labels=labels))
    return Dataset(records)


def run_script(checked: CheckedScript, scenario: Scenario, seed: int,
               ticks: int, hz: float = 50.0):
    """Closed-loop run of a checked script; returns the engine trace."""
    import dataclasses

    scenario = dataclasses.replace(scenario, seed=seed)
    sim = Simulator(scenario, hz=hz)
    tree = compile_script(checked, scenario.limits)
    return run(tree, sim, ticks)
