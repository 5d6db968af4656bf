"""The interaction loop. One Session owns one mutable scene and drives
the query-plan-execute-recover cycle against a planning backend.

Per user turn the session gathers the perception summary and the
reachability bit, queries the backend once, then either executes the
returned steps or parks in awaiting_guidance with a failure explanation.
Guidance turns re-enter the same cycle; after the recovery budget is
spent the session locks as exhausted. Every observable development is
appended to a sequence-numbered event log that listeners (the HTTP
service, tests) can tail.
"""

from __future__ import annotations

import hashlib
import time
from typing import Callable

from .backends import Backend, BackendError
from .domain import FailureKind, FailureReport, Plan
from .feasibility import FeasibilityChecker, RoadmapParams
from .perception import Perception
from .protocol import (
    ParseError,
    SessionRecord,
    Turn,
    execution_failure,
    parse_reply,
    render_failure,
    render_reply,
    serialize,
)
from .world import World

# Arm effector height above the base when path-checking a move.
EFFECTOR_HEIGHT = 1.0
# Grasp targets sit this far above the object to clear the surface.
GRASP_LIFT = 0.35

DEFAULT_MAX_RECOVERY_ROUNDS = 2
DEFAULT_TIME_OUT = 120.0

STATES = (
    "awaiting_user",
    "planning",
    "executing",
    "awaiting_guidance",
    "done",
    "exhausted",
    "timed_out",
)

_ACCEPTING = ("awaiting_user", "awaiting_guidance", "done")


class SessionStateError(RuntimeError):
    pass


_checker_cache: dict[bytes, FeasibilityChecker] = {}


def checker_for(
    world: World, params: RoadmapParams = RoadmapParams(), kernel: str | None = None
) -> FeasibilityChecker:
    """Roadmap checker for the world's current obstacle set, cached by
    geometry so repeated sessions in one scene share the build."""
    lo, hi = world.solid_box_arrays()
    digest = hashlib.sha1()
    digest.update(repr(world.bounds).encode())
    digest.update(lo.tobytes() + hi.tobytes())
    digest.update(repr(params).encode() + repr(kernel).encode())
    key = digest.digest()
    if key not in _checker_cache:
        if len(_checker_cache) > 16:
            _checker_cache.clear()
        _checker_cache[key] = FeasibilityChecker(
            world.bounds.lo, world.bounds.hi, lo, hi, params, kernel
        )
    return _checker_cache[key]


class Session:
    def __init__(
        self,
        world: World,
        backend: Backend,
        *,
        parse_mode: str = "lenient",
        max_recovery_rounds: int = DEFAULT_MAX_RECOVERY_ROUNDS,
        time_out: float = DEFAULT_TIME_OUT,
        roadmap_params: RoadmapParams = RoadmapParams(),
        kernel: str | None = None,
        aliases: dict[str, str] | None = None,
        clock: Callable[[], float] = time.perf_counter,
        listener: Callable[[dict], None] | None = None,
    ):
        self.world = world
        self.backend = backend
        self.perception = Perception(world)
        self.vocab = world.vocabulary()
        self.parse_mode = parse_mode
        self.max_recovery_rounds = max_recovery_rounds
        self.time_out = time_out
        self.roadmap_params = roadmap_params
        self.kernel = kernel
        self.aliases = aliases
        self.clock = clock
        self.listener = listener

        self.state = "awaiting_user"
        self.history: list[Turn] = []
        self.requested: list[str] = []
        self.rounds_used = 0
        self.events: list[dict] = []
        self.timings: list[dict] = []
        self.last_record: SessionRecord | None = None

        self._emit("session_started", world=world.name)
        self._emit("world", snapshot=world.snapshot())

    # -- events -------------------------------------------------------------

    def _emit(self, etype: str, **data) -> dict:
        event = {"seq": len(self.events), "type": etype, "data": data}
        self.events.append(event)
        if self.listener is not None:
            self.listener(event)
        return event

    def _set_state(self, state: str) -> None:
        assert state in STATES
        self.state = state
        self._emit("state", state=state)

    # -- feasibility --------------------------------------------------------

    def _pick_target(self, current_mentions: list[str]):
        order = list(current_mentions)
        for name in self.requested:
            if name not in order:
                order.append(name)
        base = self.world.robot.pose
        for name in order:
            matches = [
                o
                for o in self.world.find_objects(name)
                if o.name not in self.perception.hidden
            ]
            visible = [o for o in matches if self.world.is_visible(o)]
            if not visible:
                continue
            nearest = min(
                visible,
                key=lambda o: (o.pose.x - base.x) ** 2 + (o.pose.y - base.y) ** 2,
            )
            return name, nearest
        return None, None

    def _feasibility(self, current_mentions: list[str]) -> tuple[int, dict]:
        name, obj = self._pick_target(current_mentions)
        if obj is None:
            # no known target position: nothing is provably reachable,
            # and the vision line already explains why
            return 0, {"target": None}
        checker = checker_for(self.world, self.roadmap_params, self.kernel)
        start = (self.world.robot.pose.x, self.world.robot.pose.y, EFFECTOR_HEIGHT)
        goal = (obj.pose.x, obj.pose.y, obj.pose.z + GRASP_LIFT)
        score = checker.query(start, goal)
        return score, {"target": obj.name, "queried": name, "goal": list(goal)}

    # -- backend ------------------------------------------------------------

    def _call_backend(self, record: SessionRecord) -> str | None:
        for attempt in (0, 1):
            try:
                return self.backend.reply(record)
            except BackendError as exc:
                if attempt == 1:
                    self._emit("backend_error", error=str(exc))
                    return None
        return None

    # -- the loop -----------------------------------------------------------

    def handle_user(self, text: str) -> None:
        """Run one full round for a user turn (command or guidance)."""
        if self.state not in _ACCEPTING:
            raise SessionStateError(f"session is {self.state}")
        if not text or not text.strip():
            raise ValueError("user text must be non-empty")
        if self.state == "done":
            self.rounds_used = 0
        started = self.clock()
        self._set_state("planning")
        self._emit("user_input", text=text)

        t0 = self.clock()
        mentions = self.perception.extract_objects(text)
        for name in mentions:
            if name not in self.requested:
                self.requested.append(name)
        vision = self.perception.observe(self.requested)
        vision_s = self.clock() - t0
        self._emit("vision_feedback", query=list(self.requested), text=vision)

        t0 = self.clock()
        feasibility, feas_info = self._feasibility(mentions)
        feasibility_s = self.clock() - t0
        self._emit("feasibility_feedback", score=feasibility, **feas_info)

        record = SessionRecord(tuple(self.history), text, vision, feasibility)
        self.last_record = record
        t0 = self.clock()
        reply = self._call_backend(record)
        planner_s = self.clock() - t0
        self.rounds_used += 1

        if reply is None:
            result: Plan | FailureReport = FailureReport(
                FailureKind.EXECUTION, "planner backend unavailable"
            )
            reply_text = render_failure(result)
        else:
            self._emit("backend_reply", text=reply, round=self.rounds_used - 1)
            try:
                result = parse_reply(
                    reply, mode=self.parse_mode, vocab=self.vocab, aliases=self.aliases
                )
                reply_text = reply
            except ParseError as exc:
                result = FailureReport(
                    FailureKind.EXECUTION, f"planner reply was unreadable: {exc}"
                )
                reply_text = render_failure(result)

        self.history.append(Turn("user", text))
        self.history.append(Turn("robot", reply_text))

        if isinstance(result, Plan):
            self._emit("plan", text=render_reply(result), round=self.rounds_used - 1)
            self._execute(result, started)
        else:
            self._register_failure(result)

        self.timings.append(
            {
                "vision": vision_s,
                "feasibility": feasibility_s,
                "planner": planner_s,
                "total": self.clock() - started,
            }
        )

    def _register_failure(self, report: FailureReport) -> None:
        self._emit(
            "failure",
            kind=report.kind.value,
            explanation=report.explanation,
            subject=report.subject,
            round=self.rounds_used - 1,
        )
        if self.rounds_used - 1 >= self.max_recovery_rounds:
            self._set_state("exhausted")
        else:
            self._set_state("awaiting_guidance")

    def _execute(self, plan: Plan, started: float) -> None:
        self._set_state("executing")
        for i, step in enumerate(plan.steps):
            if self.clock() - started > self.time_out:
                self._emit("timeout", after=str(step))
                self._set_state("timed_out")
                return
            event = self.world.apply(step)
            self._emit(
                "step",
                step=str(step),
                outcome=event.outcome,
                detail=event.detail,
            )
            if not event.ok:
                remaining = Plan(plan.steps[i:])
                report = execution_failure(step, event.detail, remaining)
                self.history.append(Turn("robot", render_failure(report)))
                self._register_failure(report)
                return
            self._emit("world", snapshot=self.world.snapshot())
        if self.clock() - started > self.time_out:
            self._set_state("timed_out")
            return
        self._set_state("done")

    # -- introspection ------------------------------------------------------

    def last_prompt(self) -> str | None:
        return serialize(self.last_record) if self.last_record else None

    def status(self) -> dict:
        return {
            "state": self.state,
            "rounds_used": self.rounds_used,
            "max_recovery_rounds": self.max_recovery_rounds,
            "history": [
                {"speaker": t.speaker, "text": t.text} for t in self.history
            ],
            "requested": list(self.requested),
            "timings": list(self.timings),
            "world": self.world.snapshot(),
        }
