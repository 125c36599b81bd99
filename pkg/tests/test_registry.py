import json
import random

import pytest

from semo.registry import (Primitive, Registry, ValidationError,
                           association_id, load_registry, validate)
from semo.script import Script, Statement, parse_script
from tests.conftest import LISTING_GRASP


def test_validate_grasping_listing(grasping):
    checked = validate(parse_script(LISTING_GRASP), grasping)
    resources = {rs.resource for rs in checked.top if rs.resource is not None}
    assert resources == {"head", "arm"}
    kinds = [rs.kind for rs in checked.top]
    assert kinds == ["sensor", "motor", "motor", "motor"]


def test_missing_target_rejected(attract):
    with pytest.raises(ValidationError, match="missing target"):
        validate(parse_script("go_toward"), attract)


def test_association_universe_is_sixteen(attract):
    universe = attract.association_universe()
    assert len(universe) == 16
    targeting = [p for p in attract.motor_primitives() if p.targeting]
    lone = [p for p in attract.motor_primitives() if not p.targeting]
    assert len(universe) == len(targeting) * len(attract.targets) + len(lone)


def test_association_count_formula_random():
    rng = random.Random(4)
    for _ in range(50):
        n_targeting = rng.randrange(0, 5)
        n_lone = rng.randrange(0, 5)
        n_targets = rng.randrange(0, 4)
        prims = {}
        for i in range(n_targeting):
            prims[f"t{i}"] = Primitive(f"t{i}", "res", targeting=True)
        for i in range(n_lone):
            prims[f"l{i}"] = Primitive(f"l{i}", "res")
        reg = Registry(primitives=prims,
                       targets={f"x{i}" for i in range(n_targets)})
        assert len(reg.association_universe()) == n_targeting * n_targets + n_lone


@pytest.mark.parametrize("src,fragment", [
    ("fly_toward targeting visitor", "unknown primitive"),
    ("go_toward targeting moon", "unknown target"),
    ("waving whenever sparkling", "unknown evaluation"),
    ("waving targeting visitor", "does not take a target"),
])
def test_validation_errors(attract, src, fragment):
    with pytest.raises(ValidationError, match=fragment):
        validate(parse_script(src), attract)


def test_node_reference_with_target_rejected(attract):
    src = "node A:\n    waving\nA targeting visitor"
    with pytest.raises(ValidationError, match="cannot take a target"):
        validate(parse_script(src), attract)


def test_recursive_node_inclusion_rejected(attract):
    src = ("node A:\n    B\nnode B:\n    A\nA")
    with pytest.raises(ValidationError, match="recursive node inclusion"):
        validate(parse_script(src), attract)


def test_node_dag_allowed(attract):
    src = ("node Inner:\n    waving\n"
           "node Outer:\n    Inner\n    look_at targeting stand\n"
           "Outer whenever d < 2.0\nInner whenever d > 5.0")
    checked = validate(parse_script(src), attract)
    assert checked.nodes["Outer"][0].kind == "node"


def test_validation_order_independent(attract):
    src = ("visitor_detection\nturn_toward targeting visitor\n"
           "waving whenever seen\ngo_stop")
    ast = parse_script(src)
    base = validate(ast, attract)
    resolution = {id(rs.statement): (rs.kind, rs.resource) for rs in base.top}
    for shift in range(1, len(ast.statements)):
        rotated = Script(statements=ast.statements[shift:] + ast.statements[:shift],
                         nodes=ast.nodes)
        checked = validate(rotated, attract)
        assert {id(rs.statement) for rs in checked.top} == set(resolution)
        for rs in checked.top:
            assert resolution[id(rs.statement)] == (rs.kind, rs.resource)


def test_association_id():
    assert association_id("look_at", "ball") == "look_at:ball"
    assert association_id("waving", None) == "waving"


def test_load_registry_from_json(tmp_path):
    data = {
        "primitives": {
            "nudge": {"resource": "base", "targeting": True},
            "halt": {"resource": "base"},
        },
        "sensors": {"spot": {"target": "mark", "source": "stand"}},
        "targets": ["mark"],
        "evaluations": ["seen"],
    }
    path = tmp_path / "reg.json"
    path.write_text(json.dumps(data))
    reg = load_registry(path)
    assert reg.primitives["nudge"].targeting
    assert reg.primitives["spot"].resource is None
    assert reg.sensors["spot"] == ("mark", "stand")
    assert len(reg.association_universe()) == 2


def test_load_builtin_registry():
    assert len(load_registry("attract").association_universe()) == 16
