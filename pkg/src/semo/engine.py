"""Reactive execution of checked scripts at a fixed frequency.

Each tick: sensor primitives refresh the target memory, every activation
rule is re-evaluated against that memory, resources are arbitrated by
priority, and the winners' motor commands are emitted. Branches carry no
state; a rule turning false simply stops its leaf from commanding, which
zeroes that actuator channel on the next integration step.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

from .registry import CheckedScript, ResolvedStatement, association_id
from .script import DistanceTest, NamedEval, format_eval
from .world import (Limits, MotorCommands, Simulator, WorldState, dist,
                    merge_commands, motor_command, world_to_record)

log = logging.getLogger(__name__)

DEFAULT_HZ = 50.0
CLOSE_THRESHOLD = 1.0  # m, the built-in "close" evaluation


@dataclass(frozen=True)
class Leaf:
    """One executable statement with its ancestor gate chain."""

    leaf_id: str
    head: str
    target: str | None
    kind: str                    # "sensor" or "motor"
    resource: str | None
    evaluation: object | None
    priority: int
    ancestors: tuple[tuple[str, object | None], ...]  # (node name, gate)
    index: int                   # declaration order, used for tie-breaks

    @property
    def association(self) -> str:
        return association_id(self.head, self.target)


@dataclass
class BehaviorTree:
    leaves: list[Leaf]
    node_names: list[str]
    # sensor primitive name -> (target, world point), from the registry
    sensors: dict[str, tuple[str, str]] = field(default_factory=dict)
    limits: Limits = field(default_factory=Limits)
    distance_pair: tuple[str, str] = ("visitor", "stand")

    def sensor_leaves(self) -> list[Leaf]:
        return [l for l in self.leaves if l.kind == "sensor"]

    def motor_leaves(self) -> list[Leaf]:
        return [l for l in self.leaves if l.kind == "motor"]


@dataclass(frozen=True)
class TargetRecord:
    pose: tuple[float, float]
    tick: int
    visible: bool = True


@dataclass(frozen=True)
class Memory:
    """Persistent target store consulted by rules and motor primitives."""

    targets: dict[str, TargetRecord] = field(default_factory=dict)
    tick_count: int = 0

    def pose(self, name: str) -> tuple[float, float] | None:
        rec = self.targets.get(name)
        return rec.pose if rec is not None and rec.visible else None


@dataclass(frozen=True)
class ActivationSet:
    active: frozenset[str]                       # leaf ids
    per_resource_winner: dict[str, str | None]
    active_nodes: frozenset[str]                 # nodes whose gate chain is true

    def sorted_active(self) -> list[str]:
        return sorted(self.active)


def compile_script(checked: CheckedScript, limits: Limits | None = None) -> BehaviorTree:
    """Expand node references into leaves with ancestor gate chains.

    Leaf identifiers are content-based (path, coupling, and a signature of
    priority and rule when couplings repeat), so reordering statements
    never renames a leaf.
    """
    raw: list[dict] = []

    def emit(rs: ResolvedStatement, path: tuple[str, ...],
             gates: tuple[tuple[str, object | None], ...]) -> None:
        stmt = rs.statement
        if rs.kind == "node":
            chain = gates + ((stmt.head, stmt.evaluation),)
            for inner in checked.nodes[stmt.head]:
                emit(inner, path + (stmt.head,), chain)
            return
        raw.append(dict(stmt=stmt, kind=rs.kind, resource=rs.resource,
                        path=path, gates=gates))

    for rs in checked.top:
        emit(rs, (), ())

    def base_of(entry) -> str:
        return "/".join(entry["path"] + (association_id(entry["stmt"].head,
                                                        entry["stmt"].target),))

    def signature(entry) -> str:
        stmt = entry["stmt"]
        sig = f"p{stmt.priority}"
        if stmt.evaluation is not None:
            sig += "+" + format_eval(stmt.evaluation).replace(" ", "")
        return sig

    by_base: dict[str, list[dict]] = {}
    for entry in raw:
        by_base.setdefault(base_of(entry), []).append(entry)
    leaves: list[Leaf] = []
    for entry in raw:
        base = base_of(entry)
        peers = by_base[base]
        leaf_id = base
        if len(peers) > 1:
            leaf_id = f"{base}~{signature(entry)}"
            twins = [p for p in peers if signature(p) == signature(entry)]
            if len(twins) > 1:  # fully identical statements are interchangeable
                leaf_id += f"#{twins.index(entry) + 1}"
        stmt = entry["stmt"]
        leaves.append(Leaf(
            leaf_id=leaf_id,
            head=stmt.head,
            target=stmt.target,
            kind=entry["kind"],
            resource=entry["resource"],
            evaluation=stmt.evaluation,
            priority=stmt.priority,
            ancestors=entry["gates"],
            index=len(leaves),
        ))
    return BehaviorTree(
        leaves=leaves,
        node_names=list(checked.script.nodes.keys()),
        sensors=dict(checked.registry.sensors),
        limits=limits or Limits(),
    )


def _interaction_distance(memory: Memory, tree: BehaviorTree) -> float | None:
    a = memory.pose(tree.distance_pair[0])
    b = memory.pose(tree.distance_pair[1])
    if a is None or b is None:
        return None
    return dist(a, b)


def _eval_rule(ev: object | None, leaf_target: str | None, memory: Memory,
               world: WorldState, tree: BehaviorTree) -> bool:
    """Evaluate one rule; unknown target data yields False, never an error."""
    if ev is None:
        return True
    if isinstance(ev, DistanceTest):
        d = _interaction_distance(memory, tree)
        return d is not None and ev.contains(d)
    if isinstance(ev, NamedEval):
        if ev.name == "seen":
            return leaf_target is not None and memory.pose(leaf_target) is not None
        if ev.name == "close":
            if leaf_target is None:
                return False
            pose = memory.pose(leaf_target)
            return pose is not None and dist(world.agent.position, pose) < CLOSE_THRESHOLD
        raise KeyError(f"no semantics for evaluation {ev.name!r}")
    raise TypeError(f"unknown evaluation type {type(ev).__name__}")


def _gates_true(leaf: Leaf, memory: Memory, world: WorldState, tree: BehaviorTree) -> bool:
    return all(_eval_rule(gate, None, memory, world, tree)
               for _name, gate in leaf.ancestors)


def _eligible(leaf: Leaf, memory: Memory, world: WorldState, tree: BehaviorTree) -> bool:
    if not _gates_true(leaf, memory, world, tree):
        return False
    if not _eval_rule(leaf.evaluation, leaf.target, memory, world, tree):
        return False
    # a targeting motor leaf cannot act on a target it has never seen
    if leaf.kind == "motor" and leaf.target is not None and memory.pose(leaf.target) is None:
        return False
    return True


def arbitrate(eligible: list[Leaf]) -> tuple[dict[str, str], list[str]]:
    """Pick one winner per resource: highest priority, earliest declaration.

    Returns the winner map and a warning per equal-priority conflict.
    """
    winners: dict[str, Leaf] = {}
    warnings: list[str] = []
    for leaf in eligible:
        if leaf.resource is None:
            continue
        cur = winners.get(leaf.resource)
        if cur is None:
            winners[leaf.resource] = leaf
            continue
        if leaf.priority > cur.priority:
            winners[leaf.resource] = leaf
        elif leaf.priority == cur.priority:
            kept, lost = (cur, leaf) if cur.index < leaf.index else (leaf, cur)
            winners[leaf.resource] = kept
            warnings.append(
                f"priority tie on {leaf.resource}: {kept.leaf_id} kept over {lost.leaf_id}")
    return ({res: leaf.leaf_id for res, leaf in winners.items()}, warnings)


@dataclass(frozen=True)
class TickResult:
    activations: ActivationSet
    commands: MotorCommands
    memory: Memory
    warnings: tuple[str, ...] = ()


def tick(tree: BehaviorTree, world: WorldState, memory: Memory) -> TickResult:
    """Run one engine cycle against ``world`` and return the new memory."""
    targets = dict(memory.targets)
    ran_sensors: list[str] = []
    for leaf in tree.sensor_leaves():
        if not _eligible(leaf, memory, world, tree):
            continue
        wiring = tree.sensors.get(leaf.head)
        if wiring is None:
            continue
        tgt, point = wiring
        targets[tgt] = TargetRecord(pose=world.point(point), tick=memory.tick_count)
        ran_sensors.append(leaf.leaf_id)
    new_memory = Memory(targets=targets, tick_count=memory.tick_count + 1)

    eligible = [l for l in tree.motor_leaves() if _eligible(l, new_memory, world, tree)]
    winner_ids, warnings = arbitrate(eligible)
    for w in warnings:
        log.warning(w)
    by_id = {l.leaf_id: l for l in eligible}

    parts = []
    for leaf_id in winner_ids.values():
        leaf = by_id[leaf_id]
        pose = new_memory.pose(leaf.target) if leaf.target is not None else None
        parts.append(motor_command(leaf.head, pose, world, tree.limits))
    commands = merge_commands(parts)

    active_nodes: set[str] = set()
    for leaf in tree.leaves:
        prefix: list[str] = []
        for name, gate in leaf.ancestors:
            if not _eval_rule(gate, None, new_memory, world, tree):
                break
            prefix.append(name)
        active_nodes.update(prefix)

    activations = ActivationSet(
        active=frozenset(ran_sensors) | frozenset(winner_ids.values()),
        per_resource_winner=dict(winner_ids),
        active_nodes=frozenset(active_nodes),
    )
    return TickResult(activations, commands, new_memory, tuple(warnings))


@dataclass
class Trace:
    """Per-tick record of a closed-loop run."""

    rows: list[dict] = field(default_factory=list)
    truncated: bool = False

    def dump(self, path: str | Path) -> None:
        with open(path, "w") as f:
            for row in self.rows:
                f.write(json.dumps(row) + "\n")
            if self.truncated:
                f.write(json.dumps({"truncated": True}) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "Trace":
        rows, truncated = [], False
        with open(path) as f:
            for line in f:
                line = line.strip()
                if not line:
                    continue
                rec = json.loads(line)
                if rec.get("truncated"):
                    truncated = True
                else:
                    rows.append(rec)
        return cls(rows, truncated)


def _commands_record(cmd: MotorCommands) -> dict:
    arm = None
    if cmd.arm is not None:
        arm = {"mode": cmd.arm.mode, "direction": cmd.arm.direction}
    return {
        "wheels_rotation": cmd.wheels_rotation,
        "wheels_translation": list(cmd.wheels_translation) if cmd.wheels_translation else None,
        "head": cmd.head,
        "arm": arm,
    }


def run(tree: BehaviorTree, sim: Simulator, ticks: int,
        memory: Memory | None = None,
        command_noise=None) -> Trace:
    """Run the engine against the simulator for up to ``ticks`` cycles.

    The trace records, per tick, the world the engine saw together with the
    activations and commands it produced. If the scenario's stop trigger
    fires the trace is truncated and flagged. ``command_noise(tick, cmd)``
    may perturb commands before integration (used to synthesize human-like
    demonstrations).
    """
    memory = memory or Memory()
    trace = Trace()
    for k in range(ticks):
        if sim.exhausted:
            trace.truncated = True
            break
        result = tick(tree, sim.world, memory)
        memory = result.memory
        cmd = result.commands
        if command_noise is not None:
            cmd = command_noise(sim.tick, cmd)
        trace.rows.append({
            "tick": k,
            **world_to_record(sim.world),
            "active": result.activations.sorted_active(),
            "active_nodes": sorted(result.activations.active_nodes),
            "commands": _commands_record(result.commands),
        })
        sim.step(cmd)
    return trace
