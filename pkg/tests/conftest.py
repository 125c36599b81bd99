import math

import pytest

from semo import asset_text
from semo.registry import attract_registry, grasping_registry, validate
from semo.script import parse_script

LISTING_GRASP = asset_text("grasping.pf")


@pytest.fixture
def attract():
    return attract_registry()


@pytest.fixture
def grasping():
    return grasping_registry()


@pytest.fixture
def grasp_checked(grasping):
    return validate(parse_script(LISTING_GRASP), grasping)


def d_of(record: dict) -> float:
    return math.hypot(record["visitor"]["x"] - record["stand"]["x"],
                      record["visitor"]["y"] - record["stand"]["y"])
