"""Live human teleoperation service.

Sessions apply at most one queued action per 50 ms simulation tick.  A
Pick&Place idle tick records NO_OP; an ObjectNav idle tick records nothing
(its action set has no NO_OP).  Submissions are validated against the task
success rule; accepted demonstrations are persisted in the standard JSONL
format (source="human") and the episode is marked completed in an
append-only assignment ledger so restarts never double-serve.

The wire protocol ("telev1") is transport-agnostic JSON handled by
``ProtocolHandler``; ``create_app`` wraps it in a FastAPI WebSocket endpoint
for the browser client.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, replace

from . import demos as demos_mod
from . import tasks, world
from .demos import Demonstration, DemoStep
from .tasks import (
    ACTION_IDS,
    ACTION_NAMES,
    NO_OP,
    OBJECTNAV,
    PICKPLACE,
    STOP,
    Episode,
    Sim,
)
from .world import Scene

PROTOCOL_VERSION = "telev1"
TICK_MS = 50
TELEOP_STEP_LIMIT = 1_000_000  # human teleop has no practical step cap


class TeleopError(Exception):
    pass


class NoEpisodesError(TeleopError):
    pass


class SessionProtocolError(TeleopError):
    pass


def instruction_text(episode: Episode, scene: Scene) -> str:
    task = episode.task
    if task.variant == OBJECTNAV:
        return f"Find and go to the {task.goal_category}"
    if task.instruction:
        return " ".join(task.instruction).capitalize()
    obj = scene.object_by_id(task.object_id)
    recep = scene.object_by_id(task.receptacle_id)
    return f"Place the {obj.category} on the {recep.category}"


def action_legend(variant: str) -> list[dict]:
    actions = tasks.OBJECTNAV_ACTIONS if variant == OBJECTNAV else tasks.PICKPLACE_ACTIONS
    return [{"id": a, "name": ACTION_NAMES[a]} for a in actions]


class Session:
    """One user driving one episode; at most one action per tick."""

    def __init__(self, session_id: str, user: str, scene: Scene, episode: Episode):
        self.id = session_id
        self.user = user
        self.scene = scene
        self.episode = episode  # original episode (persisted demos reference it)
        lifted = replace(episode, step_limit=TELEOP_STEP_LIMIT)
        self.sim = Sim(scene, lifted)
        self.state, self.obs = self.sim.reset()
        self.queued: int | None = None  # depth 1, newest wins
        self.steps: list[DemoStep] = []
        self.path_length = 0.0
        self.tick_count = 0
        self.submitted = False

    @property
    def variant(self) -> str:
        return self.episode.task.variant

    def enqueue(self, action: int) -> None:
        if self.submitted:
            raise SessionProtocolError("action after submission")
        if action not in self.episode.task.actions():
            raise SessionProtocolError(
                f"action {ACTION_NAMES.get(action, action)} illegal for {self.variant}")
        self.queued = action

    def tick(self) -> dict:
        """Advance simulated time by one 50 ms tick and return a frame."""
        if self.submitted:
            raise SessionProtocolError("tick after submission")
        self.tick_count += 1
        action = self.queued
        self.queued = None
        if action is None and self.variant == PICKPLACE and not self.state.done:
            action = NO_OP
        if action is not None and not self.state.done:
            before = self.state.pose
            self.state, self.obs, _ = self.sim.step(action)
            after = self.state.pose
            self.path_length += math.hypot(after.x - before.x, after.y - before.y)
            self.steps.append(DemoStep(action=action, pose=after,
                                       held=self.state.held_object,
                                       tick_ms=self.tick_count * TICK_MS))
        return self.frame()

    def frame(self) -> dict:
        pose = self.state.pose
        return {
            "type": "frame",
            "tick": self.tick_count,
            "pose": {"x": pose.x, "y": pose.y, "heading": pose.heading,
                     "pitch": pose.pitch},
            "rays": {"labels": list(self.obs.rays.labels),
                     "depths": [float(d) for d in self.obs.rays.depths]},
            "sge": self.obs.sge,
            "held": self.state.held_object,
            "step_count": self.state.step_count,
            "done": self.state.done,
            "succeeded": self.state.succeeded,
        }

    def validate(self) -> tuple[bool, str]:
        """Success check without mutating the episode (used by submit)."""
        if self.state.done:
            return bool(self.state.succeeded), \
                "" if self.state.succeeded else self.sim._failure_reason()
        probe = self.state.copy()
        probe.done = True
        ok = tasks.evaluate_success(self.scene, probe, self.sim.episode)
        return ok, "" if ok else self.sim._failure_reason()

    def submit(self) -> tuple[bool, str]:
        """Validate; on accept, append the terminal STOP and freeze."""
        if self.submitted:
            raise SessionProtocolError("duplicate submission")
        ok, reason = self.validate()
        if not ok:
            return False, reason
        if not self.state.done:
            self.state, self.obs, _ = self.sim.step(STOP)
            self.tick_count += 1
            self.steps.append(DemoStep(action=STOP, pose=self.state.pose,
                                       held=self.state.held_object,
                                       tick_ms=self.tick_count * TICK_MS))
        self.submitted = True
        return True, ""

    def demonstration(self) -> Demonstration:
        return Demonstration(
            episode_id=self.episode.id,
            source="human",
            steps=list(self.steps),
            success=bool(self.state.succeeded),
            path_length=self.path_length,
            user=self.user,
        )


class TeleopService:
    """Episode assignment, session registry, and demonstration persistence."""

    def __init__(self, datasets: dict[str, list[tuple[Scene, Episode]]],
                 out_path, ledger_path=None):
        self.datasets = datasets
        self.out_path = out_path
        self.ledger_path = ledger_path or (str(out_path) + ".ledger")
        self.sessions: dict[str, Session] = {}
        self._session_seq = 0
        self._completed: set[tuple[str, str]] = set()  # (dataset, episode_id)
        self._active: set[tuple[str, str]] = set()
        self._load_ledger()

    def _load_ledger(self) -> None:
        if not os.path.exists(self.ledger_path):
            return
        with open(self.ledger_path) as f:
            for line in f:
                line = line.strip()
                if not line:
                    continue
                entry = json.loads(line)
                if entry.get("event") == "completed":
                    self._completed.add((entry["dataset"], entry["episode_id"]))

    def _append_ledger(self, entry: dict) -> None:
        with open(self.ledger_path, "a") as f:
            f.write(json.dumps(entry) + "\n")

    def start_session(self, user: str, variant: str, dataset_tag: str) -> Session:
        if dataset_tag not in self.datasets:
            raise TeleopError(f"unknown dataset {dataset_tag!r}")
        for scene, episode in self.datasets[dataset_tag]:
            key = (dataset_tag, episode.id)
            if key in self._completed or key in self._active:
                continue
            if variant and episode.task.variant != variant:
                continue
            self._session_seq += 1
            session = Session(f"s{self._session_seq}", user, scene, episode)
            session.dataset_tag = dataset_tag
            self.sessions[session.id] = session
            self._active.add(key)
            self._append_ledger({"event": "assigned", "dataset": dataset_tag,
                                 "episode_id": episode.id, "session": session.id,
                                 "user": user})
            return session
        raise NoEpisodesError(f"dataset {dataset_tag!r} has no unserved episodes")

    def session(self, session_id: str) -> Session:
        if session_id not in self.sessions:
            raise TeleopError(f"unknown session {session_id!r}")
        return self.sessions[session_id]

    def submit(self, session_id: str) -> tuple[bool, str]:
        session = self.session(session_id)
        accepted, reason = session.submit()
        if accepted:
            demos_mod.append_demo(session.demonstration(), self.out_path)
            key = (session.dataset_tag, session.episode.id)
            self._active.discard(key)
            self._completed.add(key)
            self._append_ledger({"event": "completed",
                                 "dataset": session.dataset_tag,
                                 "episode_id": session.episode.id,
                                 "session": session.id, "user": session.user})
        return accepted, reason

    def episode_payload(self, session: Session) -> dict:
        return {
            "type": "episode",
            "session": session.id,
            "scene": world.scene_to_dict(session.scene),
            "episode": tasks.episode_to_dict(session.episode),
            "instruction": instruction_text(session.episode, session.scene),
            "legend": action_legend(session.variant),
        }


class ProtocolHandler:
    """One duplex connection speaking "telev1" JSON messages.

    Client messages carry strictly increasing sequence numbers; out-of-order
    or malformed input yields an error frame and leaves state unchanged.
    """

    def __init__(self, service: TeleopService):
        self.service = service
        self.session: Session | None = None
        self.last_client_seq = 0
        self._server_seq = 0

    def _out(self, payload: dict) -> dict:
        self._server_seq += 1
        payload["v"] = PROTOCOL_VERSION
        payload["seq"] = self._server_seq
        if self.session is not None:
            payload.setdefault("session", self.session.id)
        return payload

    def _error(self, reason: str) -> dict:
        return self._out({"type": "error", "reason": reason})

    def handle(self, raw) -> list[dict]:
        if isinstance(raw, (str, bytes)):
            try:
                msg = json.loads(raw)
            except json.JSONDecodeError:
                return [self._error("malformed_json")]
        else:
            msg = raw
        if not isinstance(msg, dict):
            return [self._error("malformed_message")]
        if msg.get("v") != PROTOCOL_VERSION:
            return [self._error("bad_version")]
        seq = msg.get("seq")
        if not isinstance(seq, int) or seq <= self.last_client_seq:
            return [self._error("out_of_order")]
        self.last_client_seq = seq

        mtype = msg.get("type")
        try:
            if mtype == "start":
                session = self.service.start_session(
                    msg.get("user", "anonymous"), msg.get("task", ""),
                    msg.get("dataset", ""))
                self.session = session
                return [self._out(self.service.episode_payload(session))]
            if self.session is None:
                return [self._error("no_session")]
            if mtype == "action":
                name = msg.get("name")
                if name not in ACTION_IDS:
                    return [self._error(f"unknown_action:{name}")]
                self.session.enqueue(ACTION_IDS[name])
                return []
            if mtype == "submit":
                accepted, reason = self.service.submit(self.session.id)
                return [self._out({"type": "submit_result",
                                   "accepted": accepted, "reason": reason})]
            if mtype == "ping":
                return [self._out(self.session.frame())]
            return [self._error(f"unknown_type:{mtype}")]
        except (TeleopError, tasks.ProtocolError) as e:
            return [self._error(str(e))]

    def tick(self) -> dict | None:
        """Advance the session one tick; returns the frame to push (None if
        no session is active or it has been submitted)."""
        if self.session is None or self.session.submitted:
            return None
        return self._out(self.session.tick())


def create_app(service: TeleopService):
    """FastAPI application exposing the protocol over /ws (20 fps ticks)."""
    import asyncio

    from fastapi import FastAPI, WebSocket, WebSocketDisconnect

    app = FastAPI()

    @app.websocket("/ws")
    async def ws(websocket: WebSocket):
        await websocket.accept()
        handler = ProtocolHandler(service)

        async def ticker():
            while True:
                await asyncio.sleep(TICK_MS / 1000.0)
                frame = handler.tick()
                if frame is not None:
                    await websocket.send_text(json.dumps(frame))

        task = asyncio.get_event_loop().create_task(ticker())
        try:
            while True:
                raw = await websocket.receive_text()
                for msg in handler.handle(raw):
                    await websocket.send_text(json.dumps(msg))
        except WebSocketDisconnect:
            pass
        finally:
            task.cancel()

    return app
