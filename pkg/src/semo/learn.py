"""Learn a reactive script from one recorded demonstration.

The pipeline has three phases. First, per actuation resource, a hidden
Markov chain over {idle} plus the resource's couplings is decoded with
Viterbi; emissions compare the observed state change against the change
each coupling would have produced (a one-step forward simulation of its
motor primitive). Second, each sufficiently supported coupling gets an
activation rule: the interval of the visitor-stand distance observed while
it was active. Third, couplings whose intervals agree within a tolerance
are grouped into named branches and the result is rendered as a script.

Transitions are uniform, so segment structure comes entirely from the
emissions; the idle state has a constant log-likelihood floor.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .registry import CheckedScript, Registry, ValidationError, association_id, validate
from .script import DistanceTest, Script, Statement
from .world import (AgentState, Dataset, Limits, WorldState, bearing, dist,
                    integrate_agent, motor_command, wrap_angle,
                    ARM_POINTING, ARM_WAVING)

DEFAULT_SIGMA = {
    "turn_toward": 0.08,
    "look_at": 0.06,
    "go_toward": 0.3,
    "point_toward": 0.5,
    "waving": 0.5,
}


@dataclass
class LearnConfig:
    """Tunable parameters of the learner."""

    delta: float = 0.3            # m, interval tolerance when grouping
    margin: float = 0.05          # m, widening applied to fitted intervals
    min_support: int = 25         # ticks, couplings active less are dropped
    lambda_idle: float = -0.5     # idle emission log-likelihood
    snap: float = 0.1             # m, endpoints this close to the data edge
                                  # become unbounded
    sigma: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_SIGMA))
    sigma_default: float = 1.0
    round_decimals: int = 2       # threshold precision in emitted scripts
    limits: Limits = field(default_factory=Limits)
    hz: float | None = None       # informational; the time step comes from data

    def sigma_for(self, primitive: str) -> float:
        return self.sigma.get(primitive, self.sigma_default)

    @classmethod
    def from_dict(cls, data: dict) -> "LearnConfig":
        cfg = cls()
        for key in ("delta", "margin", "min_support", "lambda_idle", "snap",
                    "sigma_default", "round_decimals", "hz"):
            if key in data:
                setattr(cfg, key, data[key])
        if "sigma" in data:
            cfg.sigma.update(data["sigma"])
        if "limits" in data:
            cfg.limits = Limits(**data["limits"])
        return cfg


@dataclass(frozen=True)
class InverseModel:
    """Observation model for one coupling: what would the state change
    look like if this coupling were driving its resource."""

    association: str
    primitive: str
    target: str | None
    resource: str
    sigma: float


class UnsupportedAssociation(ValueError):
    """Raised when an activation sequence has too little support to fit."""


# ---------------------------------------------------------------------------
# features

def observed_feature(primitive: str, prev: WorldState, nxt: AgentState,
                     target: tuple[float, float] | None, dt: float,
                     limits: Limits) -> float:
    """Motion feature of the transition prev -> nxt, specific to a primitive.

    Body and head features are rates from finite differences; translation
    uses the velocity component along the bearing to the target; arm
    features read the arm mode.
    """
    agent = prev.agent
    if primitive == "turn_toward":
        return wrap_angle(nxt.body_yaw - agent.body_yaw) / dt
    if primitive == "go_toward":
        before = dist(agent.position, target)
        after = dist(nxt.position, target)
        return (before - after) / dt
    if primitive == "look_at":
        return wrap_angle(nxt.head_yaw - agent.head_yaw) / dt
    if primitive == "point_toward":
        if nxt.arm_mode != ARM_POINTING:
            return math.pi
        return abs(wrap_angle(nxt.arm_dir - bearing(agent.position, target)))
    if primitive == "waving":
        if nxt.arm_mode != ARM_WAVING:
            return 0.0
        if agent.arm_mode != ARM_WAVING:
            return limits.wave_rate
        return wrap_angle(nxt.arm_dir - agent.arm_dir) / dt
    raise KeyError(f"no feature defined for primitive {primitive!r}")


def predicted_agent(primitive: str, prev: WorldState,
                    target: tuple[float, float] | None, dt: float,
                    limits: Limits) -> AgentState:
    """One-step forward simulation of a primitive from the previous state."""
    cmd = motor_command(primitive, target, prev, limits)
    return integrate_agent(prev.agent, cmd, dt, limits)


def emission_loglik(model: InverseModel, prev: WorldState, cur: WorldState,
                    dt: float, limits: Limits, scale: float = 1.0) -> float:
    """Gaussian emission log-likelihood, up to a shared additive constant.

    ``scale`` is the feature's normalization factor (its standard deviation
    over the dataset); residuals are measured in those units.
    """
    target = cur.point(model.target) if model.target else None
    target_prev = prev.point(model.target) if model.target else None
    obs = observed_feature(model.primitive, prev, cur.agent, target_prev, dt, limits)
    pred_agent = predicted_agent(model.primitive, prev, target_prev, dt, limits)
    pred = observed_feature(model.primitive, prev, pred_agent, target_prev, dt, limits)
    r = (pred - obs) / scale
    return -(r * r) / (2.0 * model.sigma ** 2)


def build_models(registry: Registry, config: LearnConfig) -> list[InverseModel]:
    """Inverse models for every coupling that has a defined feature.

    Stop-style primitives predict the same stillness the idle state covers,
    so they carry no model; idle absorbs them.
    """
    models = []
    by_name = registry.primitives
    for primitive, target in registry.association_universe():
        if primitive not in DEFAULT_SIGMA:
            continue
        models.append(InverseModel(
            association=association_id(primitive, target),
            primitive=primitive,
            target=target,
            resource=by_name[primitive].resource,
            sigma=config.sigma_for(primitive),
        ))
    return models


# ---------------------------------------------------------------------------
# decoding

def viterbi(loglik: np.ndarray) -> np.ndarray:
    """Most likely state path under uniform transition probabilities.

    ``loglik`` is (T, S) per-step emission log-likelihoods. The transition
    log-probability is log(1/S) from every state to every state, so each
    step's best predecessor is the global argmax of the previous scores.
    Ties resolve toward the smallest state index at every step, which makes
    the returned path the lexicographically smallest among all maximizers.
    """
    loglik = np.asarray(loglik, dtype=float)
    if loglik.ndim != 2 or loglik.shape[0] == 0:
        raise ValueError("emission matrix must be (T, S) with T >= 1")
    T, S = loglik.shape
    trans = math.log(1.0 / S)
    delta = loglik[0].copy()
    back = np.zeros(T, dtype=int)  # best predecessor, shared by all states
    for t in range(1, T):
        prev = int(np.argmax(delta))
        back[t] = prev
        delta = delta[prev] + trans + loglik[t]
    path = np.zeros(T, dtype=int)
    path[T - 1] = int(np.argmax(delta))
    for t in range(T - 2, -1, -1):
        path[t] = back[t + 1]
    return path


def _feature_series(model: InverseModel, worlds: list[WorldState], dt: float,
                    limits: Limits) -> tuple[np.ndarray, np.ndarray]:
    obs = np.empty(len(worlds) - 1)
    pred = np.empty(len(worlds) - 1)
    for t in range(len(worlds) - 1):
        prev, cur = worlds[t], worlds[t + 1]
        target_prev = prev.point(model.target) if model.target else None
        obs[t] = observed_feature(model.primitive, prev, cur.agent,
                                  target_prev, dt, limits)
        agent = predicted_agent(model.primitive, prev, target_prev, dt, limits)
        pred[t] = observed_feature(model.primitive, prev, agent,
                                   target_prev, dt, limits)
    return obs, pred


def decode_resource(worlds: list[WorldState], models: list[InverseModel],
                    lambda_idle: float, dt: float, limits: Limits) -> np.ndarray:
    """Decode one resource's activation path over the dataset transitions.

    Returns (T-1,) of state indices: 0 is idle, j >= 1 is ``models[j-1]``.
    Features are normalized to unit variance before residuals enter the
    emissions; the normalization pools every model of the same primitive
    (observed and predicted values together), since the feature is one
    function applied per target and the hypotheses must share a scale.
    """
    if len(worlds) < 2:
        raise ValueError("dataset must contain at least 2 samples")
    if not models:
        raise ValueError("need at least one model to decode")
    n = len(worlds) - 1
    series = [_feature_series(m, worlds, dt, limits) for m in models]
    scales: dict[str, float] = {}
    for primitive in {m.primitive for m in models}:
        pool = np.concatenate([np.concatenate(s) for m, s in zip(models, series)
                               if m.primitive == primitive])
        scale = float(np.std(pool))
        scales[primitive] = scale if scale > 1e-9 else 1.0
    loglik = np.full((n, 1 + len(models)), lambda_idle)
    for j, (model, (obs, pred)) in enumerate(zip(models, series)):
        r = (pred - obs) / scales[model.primitive]
        loglik[:, 1 + j] = -(r * r) / (2.0 * model.sigma ** 2)
    return viterbi(loglik)


@dataclass
class Activations:
    """Decoded coupling activations over the dataset transitions."""

    models: list[InverseModel]
    by_resource: dict[str, np.ndarray]        # resource -> state path
    w: dict[str, np.ndarray]                  # association -> bool activation
    d: np.ndarray                             # visitor-stand distance per transition
    times: np.ndarray                         # time of the transition's end sample
    d_min: float = 0.0                        # distance extremes over all samples
    d_max: float = 0.0

    def support(self, association: str) -> int:
        return int(self.w[association].sum())


def detect_activations(dataset: Dataset, registry: Registry,
                       config: LearnConfig) -> Activations:
    """Per-resource Viterbi decode of every modeled coupling."""
    worlds = dataset.worlds()
    if len(worlds) < 2:
        raise ValueError("dataset must contain at least 2 samples")
    dt = dataset.dt
    models = build_models(registry, config)
    by_resource: dict[str, np.ndarray] = {}
    w: dict[str, np.ndarray] = {}
    for resource in registry.resources():
        group = [m for m in models if m.resource == resource]
        if not group:
            continue
        path = decode_resource(worlds, group, config.lambda_idle, dt, config.limits)
        by_resource[resource] = path
        for j, model in enumerate(group):
            w[model.association] = path == (j + 1)
    d_all = np.array([dist(wd.visitor, wd.stand) for wd in worlds])
    times = np.array([wd.time for wd in worlds[1:]])
    return Activations(models=models, by_resource=by_resource, w=w, d=d_all[1:],
                       times=times, d_min=float(d_all.min()), d_max=float(d_all.max()))


# ---------------------------------------------------------------------------
# interval fitting and factorization

def fit_evaluation(w: np.ndarray, d: np.ndarray, config: LearnConfig,
                   d_min: float | None = None,
                   d_max: float | None = None) -> DistanceTest:
    """Distance interval covering the activation, widened by the margin.

    Endpoints within ``config.snap`` of the dataset's distance extremes
    become unbounded, so activations hugging an edge of the observed range
    render as one-sided rules.
    """
    active = d[np.asarray(w, dtype=bool)]
    if active.size < config.min_support:
        raise UnsupportedAssociation(
            f"{active.size} active ticks < min support {config.min_support}")
    d_min = float(np.min(d)) if d_min is None else d_min
    d_max = float(np.max(d)) if d_max is None else d_max
    lo, hi = float(np.min(active)), float(np.max(active))
    pad = max(config.margin, 1e-9)  # a degenerate band still needs an interior
    lower = None if lo - d_min <= config.snap else lo - pad
    upper = None if d_max - hi <= config.snap else hi + pad
    return DistanceTest(lower, upper)


@dataclass(frozen=True)
class FlatLeaf:
    association: str
    primitive: str
    target: str | None
    resource: str
    interval: DistanceTest


@dataclass
class FlatTree:
    leaves: list[FlatLeaf]


def drop_short_runs(w: np.ndarray, min_run: int) -> np.ndarray:
    """Zero out active runs shorter than ``min_run`` ticks (decoder noise)."""
    w = np.asarray(w, dtype=bool).copy()
    n = len(w)
    t = 0
    while t < n:
        if not w[t]:
            t += 1
            continue
        end = t
        while end < n and w[end]:
            end += 1
        if end - t < min_run:
            w[t:end] = False
        t = end
    return w


def close_short_gaps(w: np.ndarray, min_gap: int) -> np.ndarray:
    """Fill inactive gaps shorter than ``min_gap`` that lie inside a band.

    Leading and trailing inactivity is never filled; only holes bounded by
    activity on both sides count as decoder dropouts.
    """
    w = np.asarray(w, dtype=bool).copy()
    n = len(w)
    t = 0
    while t < n:
        if w[t]:
            t += 1
            continue
        end = t
        while end < n and not w[end]:
            end += 1
        if 0 < t and end < n and end - t < min_gap:
            w[t:end] = True
        t = end
    return w


def clean_activation(w: np.ndarray, min_support: int) -> np.ndarray:
    """Morphological cleanup of one decoded activation sequence.

    Momentary dropouts inside a band are bridged, then isolated blips
    shorter than the support threshold are removed, so neither kind of
    decoder noise can distort the fitted interval.
    """
    return drop_short_runs(close_short_gaps(w, min_support), min_support)


def build_flat_tree(activations: Activations, config: LearnConfig) -> FlatTree:
    """One leaf per coupling with enough support, across all resources.

    Activation runs shorter than the support threshold are treated as
    decoder noise and removed before the interval is fitted, so momentary
    confusions during fast transients cannot stretch a rule's bounds.
    """
    leaves = []
    for model in activations.models:
        w = clean_activation(activations.w[model.association], config.min_support)
        if int(w.sum()) < config.min_support:
            continue
        interval = fit_evaluation(w, activations.d, config,
                                  activations.d_min, activations.d_max)
        leaves.append(FlatLeaf(model.association, model.primitive,
                               model.target, model.resource, interval))
    return FlatTree(leaves)


@dataclass
class Group:
    name: str
    interval: DistanceTest
    members: list[FlatLeaf]


@dataclass
class HierarchicalTree:
    groups: list[Group]
    ungrouped: list[FlatLeaf]


def _endpoints_match(a: DistanceTest, b: DistanceTest, delta: float) -> bool:
    for x, y in ((a.lower, b.lower), (a.upper, b.upper)):
        if (x is None) != (y is None):
            return False
        if x is not None and abs(x - y) > delta:
            return False
    return True


def _mean_endpoint(values: list[float | None]) -> float | None:
    if values[0] is None:
        return None
    return float(np.mean(values))


def factorize(flat: FlatTree, delta: float) -> HierarchicalTree:
    """Group leaves whose intervals agree endpoint-wise within ``delta``.

    Single-link: any chain of pairwise matches joins one group. Groups are
    named A, B, ... by descending lower endpoint, so the far branch comes
    first. Leaves with no finite endpoint are always-on and stay ungrouped;
    singleton components stay ungrouped as well.
    """
    candidates = [l for l in flat.leaves if not l.interval.unbounded]
    parent = list(range(len(candidates)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(len(candidates)):
        for j in range(i + 1, len(candidates)):
            if _endpoints_match(candidates[i].interval, candidates[j].interval, delta):
                parent[find(i)] = find(j)

    components: dict[int, list[FlatLeaf]] = {}
    for i, leaf in enumerate(candidates):
        components.setdefault(find(i), []).append(leaf)

    groups: list[Group] = []
    ungrouped = [l for l in flat.leaves if l.interval.unbounded]
    for members in components.values():
        if len(members) == 1:
            ungrouped.append(members[0])
            continue
        interval = DistanceTest(
            _mean_endpoint([m.interval.lower for m in members]),
            _mean_endpoint([m.interval.upper for m in members]),
        )
        groups.append(Group("", interval, members))

    def sort_key(g: Group):
        lo = g.interval.lower if g.interval.lower is not None else -math.inf
        hi = g.interval.upper if g.interval.upper is not None else math.inf
        return (-lo, -hi)

    groups.sort(key=sort_key)
    for k, group in enumerate(groups):
        group.name = _group_name(k)
    order = {l.association: i for i, l in enumerate(flat.leaves)}
    ungrouped.sort(key=lambda l: order[l.association])
    return HierarchicalTree(groups=groups, ungrouped=ungrouped)


def _group_name(k: int) -> str:
    name = ""
    k += 1
    while k:
        k, rem = divmod(k - 1, 26)
        name = chr(ord("A") + rem) + name
    return name


def resolve_overlaps(tree: HierarchicalTree) -> HierarchicalTree:
    """Split overlapping group intervals at the midpoint of the overlap."""
    groups = sorted(tree.groups,
                    key=lambda g: g.interval.lower if g.interval.lower is not None else -math.inf)
    for a, b in zip(groups, groups[1:]):
        hi_a = a.interval.upper if a.interval.upper is not None else math.inf
        lo_b = b.interval.lower if b.interval.lower is not None else -math.inf
        if lo_b < hi_a < math.inf and lo_b > -math.inf:
            mid = (hi_a + lo_b) / 2.0
            a.interval = DistanceTest(a.interval.lower, mid)
            b.interval = DistanceTest(mid, b.interval.upper)
    return tree


# ---------------------------------------------------------------------------
# script emission

def _rounded(interval: DistanceTest, decimals: int) -> DistanceTest:
    lo = None if interval.lower is None else round(interval.lower, decimals)
    hi = None if interval.upper is None else round(interval.upper, decimals)
    if lo is not None and hi is not None and not lo < hi:
        return interval  # rounding would collapse the interval
    return DistanceTest(lo, hi)


def emit_script(tree: HierarchicalTree, registry: Registry,
                config: LearnConfig | None = None) -> Script:
    """Render the hierarchy as a script.

    Each group becomes a node whose reference statement carries the group
    interval; ungrouped leaves become guarded top-level statements. Sensor
    statements for every referenced target are prepended, including the
    distance feature's own targets whenever a distance rule is emitted.
    """
    config = config or LearnConfig()
    script = Script()

    def leaf_statement(leaf: FlatLeaf, guarded: bool) -> Statement:
        ev = None
        if guarded and not leaf.interval.unbounded:
            ev = _rounded(leaf.interval, config.round_decimals)
        return Statement(leaf.primitive, target=leaf.target, evaluation=ev, priority=1)

    referenced: list[str] = []

    def note_target(name: str | None):
        if name and name not in referenced:
            referenced.append(name)

    any_distance_rule = any(not g.interval.unbounded for g in tree.groups) or any(
        not l.interval.unbounded for l in tree.ungrouped)
    for group in tree.groups:
        script.nodes[group.name] = [leaf_statement(m, guarded=False) for m in group.members]
        for m in group.members:
            note_target(m.target)
    for leaf in tree.ungrouped:
        note_target(leaf.target)
    if any_distance_rule:
        note_target("visitor")
        note_target("stand")

    for target in sorted(referenced):
        sensor = registry.sensor_for_target(target)
        if sensor is None:
            raise ValidationError(f"no sensor primitive provides target {target!r}")
        script.statements.append(Statement(sensor))

    for group in tree.groups:
        ev = None if group.interval.unbounded else _rounded(group.interval,
                                                            config.round_decimals)
        script.statements.append(Statement(group.name, evaluation=ev))
    for leaf in tree.ungrouped:
        script.statements.append(leaf_statement(leaf, guarded=True))
    return script


@dataclass
class LearnResult:
    script: Script
    checked: CheckedScript
    flat: FlatTree
    tree: HierarchicalTree
    activations: Activations
    config: LearnConfig

    def thresholds(self) -> dict[str, DistanceTest]:
        return {g.name: g.interval for g in self.tree.groups}


def learn(dataset: Dataset, registry: Registry,
          config: LearnConfig | None = None) -> LearnResult:
    """Full pipeline: decode, fit rules, factorize, emit, validate."""
    config = config or LearnConfig()
    activations = detect_activations(dataset, registry, config)
    flat = build_flat_tree(activations, config)
    tree = resolve_overlaps(factorize(flat, config.delta))
    script = emit_script(tree, registry, config)
    checked = validate(script, registry)
    return LearnResult(script, checked, flat, tree, activations, config)


# ---------------------------------------------------------------------------
# diagnostics

def imitation_loss(dataset: Dataset, checked: CheckedScript,
                   limits: Limits | None = None) -> float:
    """Mean squared one-step prediction error of a script on a demonstration.

    For each transition the engine is seeded with the demonstrated state,
    ticked once, and integrated one step; the error is measured on the
    agent's position and wrapped yaw angles.
    """
    from .engine import Memory, TargetRecord, compile_script, tick

    worlds = dataset.worlds()
    if len(worlds) < 2:
        raise ValueError("dataset must contain at least 2 samples")
    dt = dataset.dt
    limits = limits or Limits()
    tree = compile_script(checked, limits)

    total = 0.0
    for t in range(len(worlds) - 1):
        prev, cur = worlds[t], worlds[t + 1]
        targets = {
            tgt: TargetRecord(pose=prev.point(point), tick=t)
            for _name, (tgt, point) in tree.sensors.items()
        }
        memory = Memory(targets=targets, tick_count=t)
        result = tick(tree, prev, memory)
        agent = integrate_agent(prev.agent, result.commands, dt, limits)
        err = (
            (agent.position[0] - cur.agent.position[0]) ** 2
            + (agent.position[1] - cur.agent.position[1]) ** 2
            + wrap_angle(agent.body_yaw - cur.agent.body_yaw) ** 2
            + wrap_angle(agent.head_yaw - cur.agent.head_yaw) ** 2
        )
        total += err
    return total / (len(worlds) - 1)


def permute_thresholds(script: Script) -> Script:
    """Ablation: rotate the distance rules among the guarded statements."""
    out = Script(statements=[replace(s) for s in script.statements],
                 nodes={k: [replace(s) for s in v] for k, v in script.nodes.items()})
    slots = [s for s in out.all_statements()
             if isinstance(s.evaluation, DistanceTest)]
    if len(slots) < 2:
        return out
    evals = [s.evaluation for s in slots]
    rotated = evals[1:] + evals[:1]
    for stmt, ev in zip(slots, rotated):
        stmt.evaluation = ev
    return out


def label_agreement(activations: Activations, dataset: Dataset,
                    registry: Registry, exclude_window: int = 5) -> float:
    """Per-transition agreement between decoded and recorded activations.

    Transitions within ``exclude_window`` ticks of a recorded switch are
    skipped; agreement is averaged over resources.
    """
    labels = dataset.labels()[1:]  # label t belongs to transition t-1 -> t
    n = len(labels)
    prim_resource = {p.name: p.resource for p in registry.motor_primitives()}
    modeled = {m.association for m in activations.models}

    def truth_for(resource: str, lab: list[str]) -> str:
        for a in lab:
            prim = a.split(":", 1)[0]
            if prim_resource.get(prim) == resource and a in modeled:
                return a
        return "idle"

    switches = set()
    for res in activations.by_resource:
        prev = None
        for t in range(n):
            cur = truth_for(res, labels[t])
            if prev is not None and cur != prev:
                switches.update(range(max(0, t - exclude_window),
                                      min(n, t + exclude_window + 1)))
            prev = cur

    total = 0
    good = 0
    for res, path in activations.by_resource.items():
        group = [m for m in activations.models if m.resource == res]
        for t in range(n):
            if t in switches:
                continue
            decoded = "idle" if path[t] == 0 else group[path[t] - 1].association
            total += 1
            if decoded == truth_for(res, labels[t]):
                good += 1
    return good / total if total else 1.0
