"""Primitive registries and script validation.

A registry declares the primitives a platform offers: motor primitives tied
to a resource (at most one primitive may drive a resource per tick), sensor
primitives that refresh a target from the scene, the target names, and the
named evaluations hand-written scripts may use. Validation resolves every
statement of a parsed script against a registry and tags it with its
resource, producing a :class:`CheckedScript` the engine can compile.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .script import DistanceTest, NamedEval, Script, Statement


class ValidationError(Exception):
    """Raised when a script references unknown names or misuses targets."""


@dataclass(frozen=True)
class Primitive:
    """Registry entry for one primitive.

    ``resource`` is ``None`` for sensor primitives. ``targeting`` marks
    primitives that must be given a target.
    """

    name: str
    resource: str | None
    targeting: bool = False


@dataclass
class Registry:
    """Platform description: primitives, sensors, targets, evaluations."""

    primitives: dict[str, Primitive] = field(default_factory=dict)
    # sensor primitive name -> (target it refreshes, world point it reads)
    sensors: dict[str, tuple[str, str]] = field(default_factory=dict)
    targets: set[str] = field(default_factory=set)
    named_evaluations: set[str] = field(default_factory=set)

    def motor_primitives(self) -> list[Primitive]:
        return [p for p in self.primitives.values() if p.resource is not None]

    def resources(self) -> list[str]:
        seen: list[str] = []
        for p in self.motor_primitives():
            if p.resource not in seen:
                seen.append(p.resource)
        return seen

    def sensor_for_target(self, target: str) -> str | None:
        for name, (tgt, _point) in self.sensors.items():
            if tgt == target:
                return name
        return None

    def association_universe(self) -> list[tuple[str, str | None]]:
        """All (primitive, target) couplings a learner may activate.

        Targeting motor primitives pair with every target; non-targeting
        motor primitives stand alone. Sensor primitives are not couplings.
        """
        out: list[tuple[str, str | None]] = []
        ordered_targets = sorted(self.targets)
        for p in self.motor_primitives():
            if p.targeting:
                out.extend((p.name, t) for t in ordered_targets)
            else:
                out.append((p.name, None))
        return out


def association_id(primitive: str, target: str | None) -> str:
    return f"{primitive}:{target}" if target else primitive


@dataclass(frozen=True)
class ResolvedStatement:
    """A statement plus what its head resolved to."""

    statement: Statement
    kind: str  # "sensor", "motor", or "node"
    resource: str | None


@dataclass
class CheckedScript:
    """Validated script ready for compilation."""

    script: Script
    registry: Registry
    top: list[ResolvedStatement] = field(default_factory=list)
    nodes: dict[str, list[ResolvedStatement]] = field(default_factory=dict)


def _resolve(stmt: Statement, registry: Registry, script: Script) -> ResolvedStatement:
    head = stmt.head
    if head in script.nodes:
        if stmt.target is not None:
            raise ValidationError(
                f"line {stmt.line}: node {head!r} cannot take a target")
        _check_eval(stmt, registry)
        return ResolvedStatement(stmt, "node", None)
    prim = registry.primitives.get(head)
    if prim is None:
        raise ValidationError(f"line {stmt.line}: unknown primitive {head!r}")
    if prim.targeting and stmt.target is None:
        raise ValidationError(
            f"line {stmt.line}: primitive {head!r} requires a target (missing target)")
    if not prim.targeting and stmt.target is not None:
        raise ValidationError(
            f"line {stmt.line}: primitive {head!r} does not take a target")
    if stmt.target is not None and stmt.target not in registry.targets:
        raise ValidationError(f"line {stmt.line}: unknown target {stmt.target!r}")
    _check_eval(stmt, registry)
    kind = "sensor" if prim.resource is None else "motor"
    return ResolvedStatement(stmt, kind, prim.resource)


def _check_eval(stmt: Statement, registry: Registry) -> None:
    ev = stmt.evaluation
    if isinstance(ev, NamedEval) and ev.name not in registry.named_evaluations:
        raise ValidationError(f"line {stmt.line}: unknown evaluation {ev.name!r}")


def _check_node_dag(script: Script) -> None:
    """Node references must not cycle back into their own definition."""
    state: dict[str, int] = {}  # 0 visiting, 1 done

    def visit(name: str, chain: list[str]) -> None:
        if state.get(name) == 1:
            return
        if state.get(name) == 0:
            cycle = " -> ".join(chain + [name])
            raise ValidationError(f"recursive node inclusion: {cycle}")
        state[name] = 0
        for stmt in script.nodes[name]:
            if stmt.head in script.nodes:
                visit(stmt.head, chain + [name])
        state[name] = 1

    for name in script.nodes:
        visit(name, [])


def validate(script: Script, registry: Registry) -> CheckedScript:
    """Resolve every identifier of ``script`` against ``registry``.

    Returns a :class:`CheckedScript`; raises :class:`ValidationError`
    describing the first problem found.
    """
    _check_node_dag(script)
    checked = CheckedScript(script=script, registry=registry)
    for name, body in script.nodes.items():
        checked.nodes[name] = [_resolve(s, registry, script) for s in body]
    checked.top = [_resolve(s, registry, script) for s in script.statements]
    return checked


def attract_registry() -> Registry:
    """Mobile-humanoid registry for the visitor-attraction scenario.

    Four targeting motor primitives, four non-targeting ones, three targets:
    16 possible couplings. The base is holonomic, so body rotation and
    translation are separate resources.
    """
    prims = [
        Primitive("visitor_detection", None),
        Primitive("stand_detection", None),
        Primitive("front_of_stand_detection", None),
        Primitive("turn_toward", "wheels_rotation", targeting=True),
        Primitive("turn_stop", "wheels_rotation"),
        Primitive("go_toward", "wheels_translation", targeting=True),
        Primitive("go_stop", "wheels_translation"),
        Primitive("look_at", "head", targeting=True),
        Primitive("point_toward", "arm", targeting=True),
        Primitive("waving", "arm"),
        Primitive("arm_freeze", "arm"),
    ]
    return Registry(
        primitives={p.name: p for p in prims},
        sensors={
            "visitor_detection": ("visitor", "visitor"),
            "stand_detection": ("stand", "stand"),
            "front_of_stand_detection": ("front_of_stand", "front_of_stand"),
        },
        targets={"visitor", "stand", "front_of_stand"},
        named_evaluations={"seen", "close"},
    )


def grasping_registry() -> Registry:
    """Small tabletop registry used by the grasping example script."""
    prims = [
        Primitive("ball_detection", None),
        Primitive("head_search", "head"),
        Primitive("look_at", "head", targeting=True),
        Primitive("grasp", "arm", targeting=True),
    ]
    return Registry(
        primitives={p.name: p for p in prims},
        # the ball rides the scene's moving point in simulation
        sensors={"ball_detection": ("ball", "visitor")},
        targets={"ball"},
        named_evaluations={"seen", "close"},
    )


BUILTIN_REGISTRIES = {
    "attract": attract_registry,
    "grasping": grasping_registry,
}


def load_registry(spec: str | Path) -> Registry:
    """Load a registry by builtin name or from a JSON file."""
    if isinstance(spec, str) and spec in BUILTIN_REGISTRIES:
        return BUILTIN_REGISTRIES[spec]()
    data = json.loads(Path(spec).read_text())
    prims = {
        name: Primitive(name, entry.get("resource"), entry.get("targeting", False))
        for name, entry in data["primitives"].items()
    }
    sensors = {
        name: (entry["target"], entry.get("source", entry["target"]))
        for name, entry in data.get("sensors", {}).items()
    }
    for name in sensors:
        prims.setdefault(name, Primitive(name, None))
    return Registry(
        primitives=prims,
        sensors=sensors,
        targets=set(data.get("targets", [])),
        named_evaluations=set(data.get("evaluations", [])),
    )
