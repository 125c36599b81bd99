"""Long-running session host for live stepping, recording, and playback.

One session owns one simulated world. Clients speak a message protocol over
a WebSocket (``/ws``): every message is a JSON object with a ``type``
field. Inbound messages are queued and applied at tick boundaries, so
inputs never interleave mid-tick; outbound ``tick`` messages are broadcast
at the stream rate, decoupled from the engine rate, and slow consumers
drop frames rather than stall the loop. Datasets and scripts move through
plain request/response file endpoints.

Modes: ``idle``, ``demo-recording``, ``script-running``, ``replay``; only
transitions to and from ``idle`` are legal. See docs/protocol.md for the
full message schema.
"""
from __future__ import annotations

import asyncio
import itertools
import json
import math
import tempfile
from dataclasses import dataclass, replace
from pathlib import Path

from fastapi import FastAPI, HTTPException, Request, WebSocket, WebSocketDisconnect
from fastapi.responses import PlainTextResponse

from .engine import Memory, compile_script, tick as engine_tick
from .registry import Registry, ValidationError, attract_registry, validate
from .scenarios import BUILTIN_SCENARIOS
from .script import ScriptError, parse_script
from .world import (ArmCommand, Dataset, MotorCommands, Scenario, Simulator,
                    dist, load_scenario_file, world_to_record)

PROTOCOL_VERSION = 1

IDLE = "idle"
RECORDING = "demo-recording"
RUNNING = "script-running"
REPLAY = "replay"

_LEGAL = {
    (IDLE, RECORDING), (RECORDING, IDLE),
    (IDLE, RUNNING), (RUNNING, IDLE),
    (IDLE, REPLAY), (REPLAY, IDLE),
}


class SessionError(Exception):
    pass


@dataclass(frozen=True)
class ControlInput:
    """Normalized teleoperation request; components clamp to [-1, 1]."""

    drive: tuple[float, float] = (0.0, 0.0)   # body frame, x forward
    turn: float = 0.0
    head: float = 0.0
    arm_request: str = "none"  # none | wave | point_at_stand | point_at_visitor | freeze

    def __post_init__(self):
        clamp = lambda v: max(-1.0, min(1.0, float(v)))
        object.__setattr__(self, "drive", (clamp(self.drive[0]), clamp(self.drive[1])))
        object.__setattr__(self, "turn", clamp(self.turn))
        object.__setattr__(self, "head", clamp(self.head))
        if self.arm_request not in ("none", "wave", "point_at_stand",
                                    "point_at_visitor", "freeze"):
            raise SessionError(f"unknown arm request {self.arm_request!r}")

    @classmethod
    def from_message(cls, msg: dict) -> "ControlInput":
        drive = msg.get("drive", (0.0, 0.0))
        return cls(drive=(drive[0], drive[1]), turn=msg.get("turn", 0.0),
                   head=msg.get("head", 0.0), arm_request=msg.get("arm", "none"))


class Session:
    """State machine plus tick loop body; synchronous and fully deterministic.

    The async host calls :meth:`handle` for each queued client message and
    :meth:`advance` once per tick; both return messages to send out.
    """

    def __init__(self, session_id: str, scenario: Scenario, registry: Registry,
                 files_dir: Path, hz: float = 50.0, stream_hz: float = 20.0):
        if hz <= 0:
            raise SessionError("hz must be positive")
        if stream_hz <= 0 or stream_hz > hz:
            stream_hz = hz
        self.id = session_id
        self.registry = registry
        self.files_dir = files_dir
        self.scenario = scenario
        self.hz = hz
        self.stream_every = max(1, round(hz / stream_hz))
        self.sim = Simulator(scenario, hz=hz)
        self.mode = IDLE
        self.memory = Memory()
        self.tree = None
        self.checked = None
        self.script_name: str | None = None
        self.input = ControlInput()
        self.recording: list[dict] = []
        self.replay_rows: list[dict] = []
        self.replay_pos = 0
        self.last_tick_msg: dict | None = None
        self._rec_counter = itertools.count(1)

    # -- mode machine ------------------------------------------------------

    def _transition(self, new_mode: str) -> None:
        if new_mode == self.mode:
            return
        if (self.mode, new_mode) not in _LEGAL:
            raise SessionError(f"illegal mode transition {self.mode} -> {new_mode}")
        self.mode = new_mode

    # -- message handling --------------------------------------------------

    def handle(self, msg: dict) -> list[dict]:
        kind = msg.get("type")
        try:
            if kind == "start":
                return self._on_start(msg)
            if kind == "input":
                return self._on_input(msg)
            if kind == "record_start":
                return self._on_record_start()
            if kind == "record_stop":
                return self._finish_recording()
            if kind == "load_script":
                return self._on_load_script(msg)
            if kind == "run":
                return self._on_run()
            if kind == "stop":
                return self._on_stop()
            if kind == "replay":
                return self._on_replay(msg)
            raise SessionError(f"unknown message type {kind!r}")
        except (SessionError, ScriptError, ValidationError, FileNotFoundError) as exc:
            return [{"type": "error", "request": kind, "message": str(exc)}]

    def _on_start(self, msg: dict) -> list[dict]:
        if self.mode != IDLE:
            raise SessionError(f"cannot start while {self.mode}")
        hz = float(msg.get("hz", self.hz))
        if hz <= 0:
            raise SessionError("hz must be positive")
        scenario = self.scenario
        if "scenario" in msg:
            scenario = resolve_scenario(msg["scenario"])
        if "seed" in msg:
            scenario = replace(scenario, seed=int(msg["seed"]))
        self.scenario = scenario
        self.hz = hz
        self.sim = Simulator(scenario, hz=hz)
        self.memory = Memory()
        self.input = ControlInput()
        self.recording = []
        if self.checked is not None:  # limits may differ under the new scenario
            self.tree = compile_script(self.checked, scenario.limits)
        return [self.status_message("started")]

    def _on_input(self, msg: dict) -> list[dict]:
        if self.mode != RECORDING:
            raise SessionError("input is only accepted while demo-recording")
        self.input = ControlInput.from_message(msg)
        return [{"type": "ack", "request": "input", "tick": self.sim.tick}]

    def _on_record_start(self) -> list[dict]:
        self._transition(RECORDING)
        self.input = ControlInput()
        self.recording = [world_to_record(self.sim.world, labels=[])]
        return [self.status_message("recording")]

    def _finish_recording(self) -> list[dict]:
        if self.mode != RECORDING:
            raise SessionError("not recording")
        if len(self.recording) < 2:
            self._transition(IDLE)
            return [{"type": "error", "request": "record_stop",
                     "message": "recording too short (need at least 2 samples)"}]
        name = f"demo-{self.id}-{next(self._rec_counter)}.jsonl"
        Dataset(self.recording).dump(self.files_dir / name)
        samples = len(self.recording)
        self.recording = []
        self._transition(IDLE)
        return [{"type": "record_stopped", "name": name, "samples": samples}]

    def _on_load_script(self, msg: dict) -> list[dict]:
        if self.mode != IDLE:
            raise SessionError(f"cannot load a script while {self.mode}")
        if "name" in msg:
            text = (self.files_dir / msg["name"]).read_text()
            self.script_name = msg["name"]
        else:
            text = msg.get("text", "")
            self.script_name = None
        self.checked = validate(parse_script(text), self.registry)
        self.tree = compile_script(self.checked, self.scenario.limits)
        return [{"type": "script_loaded",
                 "leaves": len(self.tree.leaves),
                 "nodes": self.tree.node_names}]

    def _on_run(self) -> list[dict]:
        if self.tree is None:
            raise SessionError("no script loaded")
        self._transition(RUNNING)
        self.memory = Memory()
        return [self.status_message("running")]

    def _on_stop(self) -> list[dict]:
        if self.mode == RECORDING:
            return self._finish_recording()
        self._transition(IDLE)
        return [self.status_message("stopped")]

    def _on_replay(self, msg: dict) -> list[dict]:
        dataset = Dataset.load(self.files_dir / msg["name"])
        self._transition(REPLAY)
        self.replay_rows = dataset.records
        self.replay_pos = 0
        return [self.status_message("replaying")]

    # -- ticking -----------------------------------------------------------

    def advance(self) -> list[dict]:
        """Advance one engine tick; returns broadcast messages, if due."""
        if self.mode == IDLE:
            return []
        if self.mode == REPLAY:
            return self._advance_replay()

        activations = None
        if self.mode == RECORDING:
            cmd = self._input_commands()
        else:
            result = engine_tick(self.tree, self.sim.world, self.memory)
            self.memory = result.memory
            cmd = result.commands
            activations = result.activations
        self.sim.step(cmd)
        out = []
        if self.mode == RECORDING:
            self.recording.append(world_to_record(self.sim.world, labels=[]))
        if self.sim.tick % self.stream_every == 0:
            out.append(self._tick_message(activations))
        if self.mode == RECORDING and self.sim.exhausted:
            out.extend(self._finish_recording())
        return out

    def _advance_replay(self) -> list[dict]:
        if self.replay_pos >= len(self.replay_rows):
            self._transition(IDLE)
            return [self.status_message("replay_done")]
        row = self.replay_rows[self.replay_pos]
        self.replay_pos += 1
        if (self.replay_pos - 1) % self.stream_every != 0:
            return []
        msg = {
            "type": "tick",
            "tick": self.replay_pos - 1,
            "time": row["t"],
            "mode": self.mode,
            "world": {k: row[k] for k in
                      ("agent", "visitor", "stand", "front_of_stand")},
            "d": _distance_of(row),
            "activations": {"leaves": row.get("labels", []), "nodes": []},
        }
        self.last_tick_msg = msg
        return [msg]

    def _input_commands(self) -> MotorCommands:
        lim = self.scenario.limits
        agent = self.sim.world.agent
        dx, dy = self.input.drive
        c, s = math.cos(agent.body_yaw), math.sin(agent.body_yaw)
        vx = (c * dx - s * dy) * lim.v_max
        vy = (s * dx + c * dy) * lim.v_max
        speed = math.hypot(vx, vy)
        if speed > lim.v_max:
            vx *= lim.v_max / speed
            vy *= lim.v_max / speed
        arm = None
        if self.input.arm_request == "wave":
            arm = ArmCommand("wave")
        elif self.input.arm_request == "freeze":
            arm = ArmCommand("freeze")
        elif self.input.arm_request == "point_at_stand":
            arm = ArmCommand("point", _bearing(agent.position, self.sim.world.stand))
        elif self.input.arm_request == "point_at_visitor":
            arm = ArmCommand("point", _bearing(agent.position, self.sim.world.visitor))
        return MotorCommands(
            wheels_rotation=self.input.turn * lim.omega_max,
            wheels_translation=(vx, vy),
            head=self.input.head * lim.head_rate_max,
            arm=arm,
        )

    def _tick_message(self, activations) -> dict:
        act = {"leaves": [], "nodes": []}
        if activations is not None:
            act = {"leaves": activations.sorted_active(),
                   "nodes": sorted(activations.active_nodes)}
        msg = {
            "type": "tick",
            "tick": self.sim.tick,
            "time": self.sim.world.time,
            "mode": self.mode,
            "world": world_to_record(self.sim.world),
            "d": dist(self.sim.world.visitor, self.sim.world.stand),
            "activations": act,
        }
        msg["world"].pop("t", None)
        self.last_tick_msg = msg
        return msg

    def status_message(self, note: str) -> dict:
        return {"type": "status", "mode": self.mode, "note": note,
                "tick": self.sim.tick, "session": self.id}


def _bearing(a, b) -> float:
    return math.atan2(b[1] - a[1], b[0] - a[0])


def _distance_of(row: dict) -> float:
    return math.hypot(row["visitor"]["x"] - row["stand"]["x"],
                      row["visitor"]["y"] - row["stand"]["y"])


def resolve_scenario(spec) -> Scenario:
    if isinstance(spec, dict):
        return Scenario.from_dict(spec)
    if spec in BUILTIN_SCENARIOS:
        return BUILTIN_SCENARIOS[spec]()
    return load_scenario_file(spec)


def create_app(default_scenario: str = "demo", registry: Registry | None = None,
               files_dir: str | Path | None = None, realtime: bool = True) -> FastAPI:
    """Build the service application.

    ``realtime=False`` removes the wall-clock pacing between ticks, which
    keeps the protocol identical while letting tests run simulated seconds
    in milliseconds.
    """
    registry = registry or attract_registry()
    files = Path(files_dir) if files_dir else Path(tempfile.mkdtemp(prefix="semo-files-"))
    files.mkdir(parents=True, exist_ok=True)
    app = FastAPI(title="semo session service")
    app.state.files_dir = files
    app.state.sessions: dict[str, Session] = {}
    counter = itertools.count(1)

    @app.get("/health")
    def health():
        return {"ok": True, "protocol": PROTOCOL_VERSION}

    @app.put("/files/{name}", response_class=PlainTextResponse)
    async def put_file(name: str, request: Request):
        (files / _safe(name)).write_bytes(await request.body())
        return "ok"

    @app.get("/files/{name}", response_class=PlainTextResponse)
    def get_file(name: str):
        path = files / _safe(name)
        if not path.exists():
            raise HTTPException(404, f"no such file {name!r}")
        return path.read_text()

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket):
        await ws.accept()
        params = ws.query_params
        turbo = params.get("turbo", "0") in ("1", "true") or not realtime
        scenario = resolve_scenario(params.get("scenario", default_scenario))
        hz = float(params.get("hz", 50.0))
        stream_hz = float(params.get("stream_hz", 20.0))
        session = Session(f"s{next(counter)}", scenario, registry, files,
                          hz=hz, stream_hz=stream_hz)
        app.state.sessions[session.id] = session
        outbox: asyncio.Queue = asyncio.Queue(maxsize=256)

        def send_all(msgs):
            for m in msgs:
                if outbox.full():  # drop the oldest frame, never stall
                    try:
                        outbox.get_nowait()
                    except asyncio.QueueEmpty:
                        pass
                outbox.put_nowait(m)

        send_all([{"type": "hello", "version": PROTOCOL_VERSION,
                   "session": session.id, "mode": session.mode,
                   "hz": session.hz}])
        inbox: asyncio.Queue = asyncio.Queue()
        alive = True

        async def reader():
            nonlocal alive
            try:
                while True:
                    text = await ws.receive_text()
                    try:
                        inbox.put_nowait(json.loads(text))
                    except json.JSONDecodeError as exc:
                        send_all([{"type": "error", "message": f"bad json: {exc}"}])
            except WebSocketDisconnect:
                alive = False

        async def writer():
            while alive:
                msg = await outbox.get()
                await ws.send_text(json.dumps(msg))

        async def ticker():
            dt = 1.0 / session.hz
            while alive:
                while not inbox.empty():
                    send_all(session.handle(inbox.get_nowait()))
                send_all(session.advance())
                await asyncio.sleep(0 if (turbo and session.mode != IDLE) else
                                    (0.002 if turbo else dt))

        tasks = [asyncio.create_task(reader()), asyncio.create_task(writer()),
                 asyncio.create_task(ticker())]
        try:
            await asyncio.gather(*tasks)
        except (WebSocketDisconnect, RuntimeError):
            pass
        finally:
            alive = False
            for t in tasks:
                t.cancel()
            app.state.sessions.pop(session.id, None)

    return app


def _safe(name: str) -> str:
    if "/" in name or "\\" in name or name.startswith("."):
        raise HTTPException(400, "invalid file name")
    return name
