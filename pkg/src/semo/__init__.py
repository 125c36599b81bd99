"""Reactive sensor-motor behavior scripts and a learner that writes them.

The package bundles a small scripting language for coupling sensor and
motor primitives, an engine that executes such scripts at a fixed
frequency, a 2D kinematic corridor simulator, and a pipeline that turns a
recorded demonstration into a runnable script.
"""
from importlib import resources

from .script import (DistanceTest, NamedEval, Script, ScriptError, Statement,
                     format_script, parse_script)
from .registry import (CheckedScript, Registry, ValidationError,
                       attract_registry, grasping_registry, load_registry,
                       validate)
from .world import Dataset, Limits, Scenario, Simulator, WorldState
from .engine import BehaviorTree, Memory, Trace, compile_script, run, tick
from .learn import LearnConfig, LearnResult, imitation_loss, learn
from .scenarios import BUILTIN_SCENARIOS, demo_scenario, synth_demo

__version__ = "0.1.0"


def asset_text(name: str) -> str:
    """Read a bundled script or scenario asset."""
    return resources.files("semo.assets").joinpath(name).read_text()
