"""2D kinematic world: corridor scene, agent motion model, dataset files.

The world holds one agent (the demonstrator or the robot), one visitor
walking a waypoint script, and two fixed points (the stand and a spot in
front of it). Motor primitives are velocity-level behaviors; integration is
explicit first-order at a fixed time step. Everything is deterministic
given the scenario and its seed.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

ARM_IDLE = "idle"
ARM_POINTING = "pointing"
ARM_WAVING = "waving"


def wrap_angle(a: float) -> float:
    """Wrap to (-pi, pi]."""
    a = math.fmod(a, 2.0 * math.pi)
    if a > math.pi:
        a -= 2.0 * math.pi
    elif a <= -math.pi:
        a += 2.0 * math.pi
    return a


def bearing(src: tuple[float, float], dst: tuple[float, float]) -> float:
    return math.atan2(dst[1] - src[1], dst[0] - src[0])


def dist(a: tuple[float, float], b: tuple[float, float]) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def clamp(x: float, lo: float, hi: float) -> float:
    return lo if x < lo else hi if x > hi else x


@dataclass(frozen=True)
class Limits:
    """Agent actuation limits and controller gains."""

    v_max: float = 0.5            # m/s
    omega_max: float = 1.0        # rad/s
    d_safe: float = 0.6           # m, go_toward keeps this distance
    k_omega: float = 1.5          # body turn gain
    k_v: float = 0.8              # translation gain
    k_head: float = 3.0           # head tracking gain
    head_limit: float = 1.0       # rad, |head_yaw| bound
    head_rate_max: float = 1.5    # rad/s
    wave_rate: float = 6.0        # rad/s, waving phase advance


@dataclass(frozen=True)
class AgentState:
    position: tuple[float, float] = (0.0, 0.0)
    body_yaw: float = 0.0
    body_yaw_rate: float = 0.0
    linear_velocity: tuple[float, float] = (0.0, 0.0)
    head_yaw: float = 0.0  # relative to body
    arm_mode: str = ARM_IDLE
    arm_dir: float = 0.0   # pointing direction (world frame) or waving phase


@dataclass(frozen=True)
class WorldState:
    time: float
    agent: AgentState
    visitor: tuple[float, float]
    visitor_velocity: tuple[float, float]
    stand: tuple[float, float]
    front_of_stand: tuple[float, float]

    def point(self, name: str) -> tuple[float, float]:
        if name == "visitor":
            return self.visitor
        if name == "stand":
            return self.stand
        if name == "front_of_stand":
            return self.front_of_stand
        raise KeyError(f"unknown scene point {name!r}")


@dataclass(frozen=True)
class ArmCommand:
    mode: str                    # "point", "wave", or "freeze"
    direction: float = 0.0       # world-frame bearing, for "point"


@dataclass(frozen=True)
class MotorCommands:
    """Per-resource commands; a None channel was not won this tick."""

    wheels_rotation: float | None = None         # rad/s
    wheels_translation: tuple[float, float] | None = None  # m/s, world frame
    head: float | None = None                    # rad/s, relative
    arm: ArmCommand | None = None


@dataclass
class Scenario:
    """Scene geometry, visitor path, and run bookkeeping.

    ``visitor_waypoints`` is a list of (time, (x, y)) with strictly
    increasing times; the visitor tracks the piecewise-linear schedule with
    seeded heading jitter. When ``stop_at_stand`` is set, runs and
    recordings end once the visitor comes within ``stop_radius`` of the
    stand.
    """

    corridor: tuple[float, float] = (5.0, 3.0)  # length (x), width (y)
    stand: tuple[float, float] = (4.6, 0.4)
    front_of_stand: tuple[float, float] = (3.6, 1.2)
    agent_start: tuple[float, float] = (4.2, 0.8)
    agent_start_yaw: float = math.pi
    # walk straight down the corridor, diverge to the stand around 2 m out
    visitor_waypoints: list[tuple[float, tuple[float, float]]] = field(
        default_factory=lambda: [(0.0, (0.3, 1.6)), (6.5, (3.1, 1.4)),
                                 (11.0, (4.6, 0.4))])
    seed: int = 0
    noise_scale: float = 0.05     # rad, visitor heading jitter
    stop_at_stand: bool = True
    stop_radius: float = 0.35
    limits: Limits = field(default_factory=Limits)

    def __post_init__(self):
        times = [t for t, _ in self.visitor_waypoints]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("visitor waypoint times must strictly increase")

    def initial_world(self) -> WorldState:
        return WorldState(
            time=0.0,
            agent=AgentState(position=self.agent_start, body_yaw=self.agent_start_yaw),
            visitor=self.visitor_waypoints[0][1],
            visitor_velocity=(0.0, 0.0),
            stand=self.stand,
            front_of_stand=self.front_of_stand,
        )

    def to_dict(self) -> dict:
        return {
            "corridor": list(self.corridor),
            "stand": list(self.stand),
            "front_of_stand": list(self.front_of_stand),
            "agent_start": list(self.agent_start),
            "agent_start_yaw": self.agent_start_yaw,
            "visitor_waypoints": [[t, list(p)] for t, p in self.visitor_waypoints],
            "seed": self.seed,
            "noise_scale": self.noise_scale,
            "stop_at_stand": self.stop_at_stand,
            "stop_radius": self.stop_radius,
            "limits": vars(self.limits).copy(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Scenario":
        limits = Limits(**data["limits"]) if "limits" in data else Limits()
        return cls(
            corridor=tuple(data.get("corridor", (5.0, 3.0))),
            stand=tuple(data["stand"]),
            front_of_stand=tuple(data["front_of_stand"]),
            agent_start=tuple(data["agent_start"]),
            agent_start_yaw=data.get("agent_start_yaw", 0.0),
            visitor_waypoints=[(t, tuple(p)) for t, p in data["visitor_waypoints"]],
            seed=data.get("seed", 0),
            noise_scale=data.get("noise_scale", 0.05),
            stop_at_stand=data.get("stop_at_stand", True),
            stop_radius=data.get("stop_radius", 0.35),
            limits=limits,
        )


TARGETING_PRIMITIVES = {"turn_toward", "go_toward", "look_at", "point_toward"}


def motor_command(primitive: str, target: tuple[float, float] | None,
                  world: WorldState, limits: Limits | None = None) -> MotorCommands:
    """Command produced by one motor primitive for the current world.

    Targeting primitives require a resolved target position.
    """
    lim = limits or Limits()
    agent = world.agent
    if primitive in TARGETING_PRIMITIVES and target is None:
        raise ValueError(f"primitive {primitive!r} requires a target")

    if primitive == "turn_toward":
        err = wrap_angle(bearing(agent.position, target) - agent.body_yaw)
        rate = clamp(lim.k_omega * err, -lim.omega_max, lim.omega_max)
        return MotorCommands(wheels_rotation=rate)
    if primitive == "turn_stop":
        return MotorCommands(wheels_rotation=0.0)
    if primitive == "go_toward":
        rng = dist(agent.position, target)
        speed = clamp(lim.k_v * (rng - lim.d_safe), 0.0, lim.v_max)
        if rng < 1e-12 or speed == 0.0:
            return MotorCommands(wheels_translation=(0.0, 0.0))
        ux = (target[0] - agent.position[0]) / rng
        uy = (target[1] - agent.position[1]) / rng
        return MotorCommands(wheels_translation=(speed * ux, speed * uy))
    if primitive == "go_stop":
        return MotorCommands(wheels_translation=(0.0, 0.0))
    if primitive == "look_at":
        desired = clamp(wrap_angle(bearing(agent.position, target) - agent.body_yaw),
                        -lim.head_limit, lim.head_limit)
        rate = clamp(lim.k_head * wrap_angle(desired - agent.head_yaw),
                     -lim.head_rate_max, lim.head_rate_max)
        return MotorCommands(head=rate)
    if primitive == "head_search":
        # slow time-driven sweep between the head limits
        rate = 0.4 * lim.head_rate_max
        return MotorCommands(head=rate if math.sin(0.8 * world.time) >= 0.0 else -rate)
    if primitive == "point_toward":
        return MotorCommands(arm=ArmCommand("point", bearing(agent.position, target)))
    if primitive == "waving":
        return MotorCommands(arm=ArmCommand("wave"))
    if primitive in ("arm_freeze", "grasp"):
        return MotorCommands(arm=ArmCommand("freeze"))
    raise ValueError(f"unknown motor primitive {primitive!r}")


def merge_commands(parts: list[MotorCommands]) -> MotorCommands:
    merged = MotorCommands()
    for p in parts:
        merged = replace(
            merged,
            wheels_rotation=p.wheels_rotation if p.wheels_rotation is not None else merged.wheels_rotation,
            wheels_translation=p.wheels_translation if p.wheels_translation is not None else merged.wheels_translation,
            head=p.head if p.head is not None else merged.head,
            arm=p.arm if p.arm is not None else merged.arm,
        )
    return merged


def integrate_agent(agent: AgentState, cmd: MotorCommands, dt: float,
                    lim: Limits) -> AgentState:
    """Advance the agent one step; unset channels hold still (stop semantics)."""
    yaw_rate = clamp(cmd.wheels_rotation or 0.0, -lim.omega_max, lim.omega_max)
    vx, vy = cmd.wheels_translation or (0.0, 0.0)
    speed = math.hypot(vx, vy)
    if speed > lim.v_max:
        vx *= lim.v_max / speed
        vy *= lim.v_max / speed
    head_rate = clamp(cmd.head or 0.0, -lim.head_rate_max, lim.head_rate_max)

    yaw = wrap_angle(agent.body_yaw + yaw_rate * dt)
    pos = (agent.position[0] + vx * dt, agent.position[1] + vy * dt)
    head = clamp(agent.head_yaw + head_rate * dt, -lim.head_limit, lim.head_limit)

    mode, arm_dir = agent.arm_mode, agent.arm_dir
    if cmd.arm is None or cmd.arm.mode == "freeze":
        mode, arm_dir = ARM_IDLE, 0.0
    elif cmd.arm.mode == "point":
        mode, arm_dir = ARM_POINTING, cmd.arm.direction
    elif cmd.arm.mode == "wave":
        if mode == ARM_WAVING:
            arm_dir = wrap_angle(arm_dir + lim.wave_rate * dt)
        else:
            mode, arm_dir = ARM_WAVING, 0.0
    else:
        raise ValueError(f"unknown arm command {cmd.arm.mode!r}")

    return AgentState(
        position=pos, body_yaw=yaw, body_yaw_rate=yaw_rate,
        linear_velocity=(vx, vy), head_yaw=head, arm_mode=mode, arm_dir=arm_dir,
    )


def visitor_jitter(seed: int, tick: int, scale: float) -> float:
    """Per-tick heading jitter, stateless so replays are exact."""
    if scale == 0.0:
        return 0.0
    g = np.random.Generator(np.random.Philox(key=seed, counter=tick))
    return float(g.normal(0.0, scale))


class Simulator:
    """Steps one world under motor commands plus the scenario's visitor.

    Single-writer: one owner calls :meth:`step`. ``exhausted`` flips once
    the scenario's stop trigger fires.
    """

    def __init__(self, scenario: Scenario, hz: float = 50.0):
        if hz <= 0:
            raise ValueError("hz must be positive")
        self.scenario = scenario
        self.hz = hz
        self.dt = 1.0 / hz
        self.world = scenario.initial_world()
        self.tick = 0
        self.exhausted = self._stop_triggered(self.world)

    def _stop_triggered(self, world: WorldState) -> bool:
        return (self.scenario.stop_at_stand
                and dist(world.visitor, world.stand) <= self.scenario.stop_radius)

    def _visitor_step(self, world: WorldState) -> tuple[tuple[float, float], tuple[float, float]]:
        sc = self.scenario
        t_next = world.time + self.dt
        wps = sc.visitor_waypoints
        # current leg: first waypoint still ahead of t_next
        ahead = [(t, p) for t, p in wps if t > world.time]
        if not ahead:
            return world.visitor, (0.0, 0.0)
        t_goal, p_goal = ahead[0]
        remaining = max(t_goal - world.time, self.dt)
        vx = (p_goal[0] - world.visitor[0]) / remaining
        vy = (p_goal[1] - world.visitor[1]) / remaining
        eps = visitor_jitter(sc.seed, self.tick, sc.noise_scale)
        c, s = math.cos(eps), math.sin(eps)
        vx, vy = c * vx - s * vy, s * vx + c * vy
        pos = (world.visitor[0] + vx * self.dt, world.visitor[1] + vy * self.dt)
        lx, ly = sc.corridor
        pos = (clamp(pos[0], 0.0, lx), clamp(pos[1], 0.0, ly))
        return pos, (vx, vy)

    def step(self, cmd: MotorCommands) -> WorldState:
        sc = self.scenario
        agent = integrate_agent(self.world.agent, cmd, self.dt, sc.limits)
        lx, ly = sc.corridor
        agent = replace(agent, position=(clamp(agent.position[0], 0.0, lx),
                                         clamp(agent.position[1], 0.0, ly)))
        visitor, v_vel = self._visitor_step(self.world)
        self.tick += 1
        self.world = WorldState(
            time=self.tick * self.dt,
            agent=agent,
            visitor=visitor,
            visitor_velocity=v_vel,
            stand=self.world.stand,
            front_of_stand=self.world.front_of_stand,
        )
        if self._stop_triggered(self.world):
            self.exhausted = True
        return self.world


# ---------------------------------------------------------------------------
# dataset records


def world_to_record(world: WorldState, labels: list[str] | None = None) -> dict:
    rec = {
        "t": world.time,
        "agent": {
            "x": world.agent.position[0],
            "y": world.agent.position[1],
            "body_yaw": world.agent.body_yaw,
            "head_yaw": world.agent.head_yaw,
            "arm_mode": world.agent.arm_mode,
            "arm_dir": world.agent.arm_dir,
        },
        "visitor": {"x": world.visitor[0], "y": world.visitor[1]},
        "stand": {"x": world.stand[0], "y": world.stand[1]},
        "front_of_stand": {"x": world.front_of_stand[0], "y": world.front_of_stand[1]},
    }
    if labels is not None:
        rec["labels"] = labels
    return rec


def record_to_world(rec: dict) -> WorldState:
    a = rec["agent"]
    return WorldState(
        time=rec["t"],
        agent=AgentState(
            position=(a["x"], a["y"]),
            body_yaw=a["body_yaw"],
            head_yaw=a["head_yaw"],
            arm_mode=a["arm_mode"],
            arm_dir=a["arm_dir"],
        ),
        visitor=(rec["visitor"]["x"], rec["visitor"]["y"]),
        visitor_velocity=(0.0, 0.0),
        stand=(rec["stand"]["x"], rec["stand"]["y"]),
        front_of_stand=(rec["front_of_stand"]["x"], rec["front_of_stand"]["y"]),
    )


@dataclass
class Dataset:
    """Uniformly sampled world states, optionally with activation labels."""

    records: list[dict]

    def __len__(self) -> int:
        return len(self.records)

    @property
    def dt(self) -> float:
        if len(self.records) < 2:
            raise ValueError("dataset needs at least 2 samples")
        return self.records[1]["t"] - self.records[0]["t"]

    def worlds(self) -> list[WorldState]:
        return [record_to_world(r) for r in self.records]

    def labels(self) -> list[list[str]]:
        return [r.get("labels", []) for r in self.records]

    def dump(self, path: str | Path) -> None:
        with open(path, "w") as f:
            for rec in self.records:
                f.write(json.dumps(rec) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "Dataset":
        records = []
        with open(path) as f:
            for line in f:
                line = line.strip()
                if line:
                    records.append(json.loads(line))
        return cls(records)


def load_scenario_file(path: str | Path) -> Scenario:
    return Scenario.from_dict(json.loads(Path(path).read_text()))
