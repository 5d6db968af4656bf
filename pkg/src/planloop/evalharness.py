"""Scenario evaluation: scripted conversations, scored.

A suite is a TOML file of scenarios. Each scenario stages a scene
(stowed objects, blinded perception, injected faults), feeds the
session a scripted sequence of user turns and checks per-turn
expectations plus an optional end-state goal. Four rates come out:

  task_planning_rate       turns that wanted a plan and got the right one
  failure_explanation_rate turns that wanted a failure of a given kind
  failure_recovery_rate    scenarios with staged failures that still
                           finished the task
  execution_rate           scenarios whose world-state goal held at the end

A rate with an empty denominator reports 1.0. Reports are plain text
and deterministic, so a known-good run can be committed and compared
byte for byte; timing lives in a separate section that the comparable
report omits.

The same machinery scores flat instruction files (one command, family,
object and destination per line) by expanding each line into a
one-turn scenario whose expected plan is the family's canonical step
sequence.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from .backends import (
    Backend,
    RecordingBackend,
    RuleBackend,
    TaskParse,
    family_plan,
)
from .domain import FailureKind, FailureReport, Plan, SkillVerb
from .orchestrator import Session
from .protocol import ParseError, parse_reply, render_reply
from .world import FaultSpec, World, bundled_world_path, load_world

DATA_DIR = Path(__file__).parent / "data"
SUITE_DIR = DATA_DIR / "suites"
INSTRUCTIONS_PATH = DATA_DIR / "fixtures" / "instructions.txt"

_VERBS = {v.canonical: v for v in SkillVerb}


class SuiteError(ValueError):
    """Suite or fixture file does not follow the schema."""


@dataclass(frozen=True)
class TurnSpec:
    say: str
    expect: str | None = None
    expect_failure: str | None = None
    expect_plan: str | None = None
    expect_state: str | None = None
    unhide: str | None = None


@dataclass(frozen=True)
class Scenario:
    name: str
    script: tuple[TurnSpec, ...]
    world: str = "apartment"
    tags: tuple[str, ...] = ()
    setup: dict = field(default_factory=dict)
    faults: tuple[dict, ...] = ()
    goal: dict | None = None
    recovery_expected: bool = True
    max_recovery_rounds: int = 2


@dataclass
class ScenarioResult:
    scenario: Scenario
    passed: bool
    notes: list[str]
    plan_hits: int
    plan_total: int
    failure_hits: int
    failure_total: int
    recovered: bool | None
    goal_met: bool | None
    timings: list[dict]


@dataclass
class SuiteResult:
    name: str
    results: list[ScenarioResult]

    def metrics(self) -> dict:
        def rate(hits: int, total: int) -> float:
            return hits / total if total else 1.0

        plan_hits = sum(r.plan_hits for r in self.results)
        plan_total = sum(r.plan_total for r in self.results)
        fail_hits = sum(r.failure_hits for r in self.results)
        fail_total = sum(r.failure_total for r in self.results)
        rec = [r.recovered for r in self.results if r.recovered is not None]
        goals = [r.goal_met for r in self.results if r.goal_met is not None]
        timings = [t for r in self.results for t in r.timings]

        def mean(key: str) -> float:
            return sum(t[key] for t in timings) / len(timings) if timings else 0.0

        return {
            "scenarios": len(self.results),
            "passed": sum(r.passed for r in self.results),
            "failed": sum(not r.passed for r in self.results),
            "task_planning_rate": (rate(plan_hits, plan_total), plan_hits, plan_total),
            "failure_explanation_rate": (rate(fail_hits, fail_total), fail_hits, fail_total),
            "failure_recovery_rate": (rate(sum(rec), len(rec)), sum(rec), len(rec)),
            "execution_rate": (rate(sum(goals), len(goals)), sum(goals), len(goals)),
            "timing": {
                "vision": mean("vision"),
                "feasibility": mean("feasibility"),
                "planner": mean("planner"),
                "total": mean("total"),
            },
        }

    def report(self, include_timing: bool = False) -> str:
        m = self.metrics()
        lines = [
            f"suite: {self.name}",
            f"scenarios: {m['scenarios']}",
            f"passed: {m['passed']}",
            f"failed: {m['failed']}",
        ]
        for key in (
            "task_planning_rate",
            "failure_explanation_rate",
            "failure_recovery_rate",
            "execution_rate",
        ):
            value, hits, total = m[key]
            lines.append(f"{key}: {value:.3f} ({hits}/{total})")
        if include_timing:
            t = m["timing"]
            lines.append("")
            lines.append("Vision query | Feasibility query | Planner query")
            lines.append(
                f"{t['vision']:.6f} s | {t['feasibility']:.6f} s | {t['planner']:.6f} s"
            )
            lines.append(f"mean round total: {t['total']:.6f} s")
        lines.append("")
        for r in self.results:
            lines.append(f"{r.scenario.name} {'pass' if r.passed else 'FAIL'}")
            for note in r.notes:
                lines.append(f"  {note}")
        return "\n".join(lines) + "\n"


# -- loading ----------------------------------------------------------------


def _turn_from(tbl: dict, where: str) -> TurnSpec:
    if "say" not in tbl:
        raise SuiteError(f"{where}: turn needs a 'say' text")
    expect = tbl.get("expect")
    if expect not in (None, "plan", "failure"):
        raise SuiteError(f"{where}: expect must be 'plan' or 'failure'")
    if expect == "failure":
        kind = tbl.get("expect_failure")
        kinds = {k.value for k in FailureKind}
        if kind not in kinds:
            raise SuiteError(f"{where}: expect_failure must be one of {sorted(kinds)}")
    return TurnSpec(
        say=str(tbl["say"]),
        expect=expect,
        expect_failure=tbl.get("expect_failure"),
        expect_plan=tbl.get("expect_plan"),
        expect_state=tbl.get("expect_state"),
        unhide=tbl.get("unhide"),
    )


def load_suite(path: str | Path) -> tuple[str, list[Scenario]]:
    path = Path(path)
    with open(path, "rb") as fh:
        data = tomllib.load(fh)
    name = str(data.get("suite", path.stem))
    scenarios: list[Scenario] = []
    for i, tbl in enumerate(data.get("scenarios", [])):
        where = f"scenarios[{i}]"
        if "name" not in tbl:
            raise SuiteError(f"{where}: scenario needs a name")
        script = tuple(
            _turn_from(t, f"{where}.script[{j}]")
            for j, t in enumerate(tbl.get("script", []))
        )
        if not script:
            raise SuiteError(f"{where}: scenario needs at least one turn")
        scenarios.append(
            Scenario(
                name=str(tbl["name"]),
                script=script,
                world=str(tbl.get("world", "apartment")),
                tags=tuple(tbl.get("tags", ())),
                setup=dict(tbl.get("setup", {})),
                faults=tuple(tbl.get("faults", ())),
                goal=tbl.get("goal"),
                recovery_expected=bool(tbl.get("recovery_expected", True)),
                max_recovery_rounds=int(tbl.get("max_recovery_rounds", 2)),
            )
        )
    if not scenarios:
        raise SuiteError(f"{path}: no scenarios")
    return name, scenarios


def bundled_suite_path(name: str) -> Path:
    path = SUITE_DIR / f"{name}.toml"
    if not path.exists():
        raise FileNotFoundError(f"no bundled suite named {name!r}")
    return path


def canonical_plan(
    family: str, obj: str | None, dest: str | None, containers: frozenset[str]
) -> Plan:
    task = TaskParse(family, obj, dest)
    return family_plan(task, containers)


def load_instructions(path: str | Path | None = None) -> list[Scenario]:
    """Expand an instruction fixture into one-turn scenarios.

    Line format: ``<instruction> :: <family> :: <object> [:: <dest>]``
    with ``-`` for an absent object. Blank lines and lines starting
    with ``#`` are skipped.
    """
    path = Path(path) if path is not None else INSTRUCTIONS_PATH
    world = load_world(bundled_world_path("apartment"))
    containers = frozenset(
        n for n, loc in world.locations.items() if loc.container
    )
    scenarios: list[Scenario] = []
    with open(path, encoding="utf-8") as fh:
        for ln, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = [p.strip() for p in line.split("::")]
            if len(parts) not in (3, 4):
                raise SuiteError(f"line {ln}: expected 3 or 4 fields, got {len(parts)}")
            text, family, obj = parts[0], parts[1], parts[2]
            dest = parts[3] if len(parts) == 4 else None
            if family not in ("pick", "go", "fetch", "put"):
                raise SuiteError(f"line {ln}: unknown family {family!r}")
            obj = None if obj == "-" else obj
            expected = canonical_plan(family, obj, dest, containers)
            scenarios.append(
                Scenario(
                    name=f"{len(scenarios) + 1:03d} {text}",
                    script=(
                        TurnSpec(
                            say=text,
                            expect="plan",
                            expect_plan=render_reply(expected)[len("PLAN: ") :],
                        ),
                    ),
                    tags=(family,),
                )
            )
    return scenarios


# -- running ----------------------------------------------------------------


def _stage_scenario(scenario: Scenario, world: World) -> None:
    stow = scenario.setup.get("stow")
    if stow is not None:
        obj = world.objects[stow["object"]]
        loc = world.locations[stow["container"]]
        obj.inside = loc.name
        obj.pose = type(obj.pose)(loc.pose.x, loc.pose.y, loc.pose.z, 0.0)
        if stow.get("transparent"):
            loc.transparent = True
    for name in scenario.setup.get("open", []):
        world.locations[name].open = True
    for tbl in scenario.faults:
        world.add_fault(
            FaultSpec(
                _VERBS[tbl["verb"]],
                tbl.get("arg"),
                tbl.get("mode", "fail_once"),
                tbl.get("detail", "actuator fault"),
            )
        )


def _plans_match(reply: str, expected: str) -> bool:
    try:
        got = parse_reply(reply, mode="lenient")
        want = parse_reply(f"PLAN: {expected}", mode="lenient")
    except ParseError:
        return False
    if not isinstance(got, Plan) or not isinstance(want, Plan):
        return False
    return [str(s) for s in got.steps] == [str(s) for s in want.steps]


def _planar(a, b) -> float:
    return math.hypot(a.x - b.x, a.y - b.y)


def _goal_met(goal: dict, world: World) -> tuple[bool, str]:
    radius = float(goal.get("radius", 1.0))
    if "holding" in goal:
        ok = world.robot.holding == goal["holding"]
        return ok, f"holding {world.robot.holding!r}, wanted {goal['holding']!r}"
    if "robot_at" in goal:
        loc = world.locations[goal["robot_at"]]
        d = _planar(world.robot.pose, loc.approach)
        return d <= radius, f"robot {d:.2f} m from {goal['robot_at']}"
    obj = world.objects[goal["object"]]
    if "inside" in goal:
        loc = world.locations[goal["inside"]]
        ok = obj.inside == goal["inside"]
        if ok and goal.get("closed"):
            ok = not loc.open
        return ok, f"{obj.name} inside={obj.inside!r} open={loc.open}"
    if "near" in goal:
        loc = world.locations[goal["near"]]
        d = _planar(obj.pose, loc.pose)
        return d <= radius, f"{obj.name} {d:.2f} m from {goal['near']}"
    raise SuiteError(f"goal {goal!r} has no recognized condition")


def run_scenario(
    scenario: Scenario,
    backend: Backend,
    *,
    world: World | None = None,
) -> ScenarioResult:
    if world is None:
        world = load_world(bundled_world_path(scenario.world))
    else:
        world = world.clone()
    _stage_scenario(scenario, world)
    recorder = RecordingBackend(backend)
    session = Session(
        world,
        recorder,
        max_recovery_rounds=scenario.max_recovery_rounds,
    )
    for name in scenario.setup.get("hide", []):
        session.perception.hide(name)

    notes: list[str] = []
    plan_hits = plan_total = failure_hits = failure_total = 0
    any_failure_expected = False

    for i, turn in enumerate(scenario.script):
        if turn.unhide is not None:
            session.perception.unhide(turn.unhide)
        before_events = len(session.events)
        before_replies = len(recorder.log)
        try:
            session.handle_user(turn.say)
        except Exception as exc:
            notes.append(f"turn {i}: session rejected input: {exc}")
            break
        turn_events = session.events[before_events:]
        replies = [text for _, text in recorder.log[before_replies:]]

        if turn.expect == "plan":
            plan_total += 1
            reply = replies[-1] if replies else ""
            try:
                parsed = parse_reply(reply, mode="lenient") if reply else None
            except ParseError:
                parsed = None
            if not isinstance(parsed, Plan):
                notes.append(f"turn {i}: wanted a plan, got {reply!r}")
            elif turn.expect_plan is not None and not _plans_match(
                reply, turn.expect_plan
            ):
                notes.append(
                    f"turn {i}: plan {render_reply(parsed)!r} "
                    f"!= expected {turn.expect_plan!r}"
                )
            else:
                plan_hits += 1
        elif turn.expect == "failure":
            failure_total += 1
            any_failure_expected = True
            kinds = [
                e["data"]["kind"] for e in turn_events if e["type"] == "failure"
            ]
            if turn.expect_failure in kinds:
                failure_hits += 1
            else:
                notes.append(
                    f"turn {i}: wanted {turn.expect_failure} failure, saw {kinds}"
                )
        if turn.expect_state is not None and session.state != turn.expect_state:
            notes.append(
                f"turn {i}: state {session.state!r}, wanted {turn.expect_state!r}"
            )

    goal_met = None
    if scenario.goal is not None:
        ok, detail = _goal_met(scenario.goal, session.world)
        goal_met = ok
        if not ok:
            notes.append(f"goal: {detail}")

    recovered = None
    if any_failure_expected and scenario.recovery_expected:
        recovered = session.state == "done"

    passed = not notes
    return ScenarioResult(
        scenario=scenario,
        passed=passed,
        notes=notes,
        plan_hits=plan_hits,
        plan_total=plan_total,
        failure_hits=failure_hits,
        failure_total=failure_total,
        recovered=recovered,
        goal_met=goal_met,
        timings=list(session.timings),
    )


def run_suite(
    name: str,
    scenarios: list[Scenario],
    backend_factory,
) -> SuiteResult:
    """Run every scenario against a fresh backend from the factory.

    A factory (not an instance) keeps stateful backends from leaking
    one scenario's context into the next.
    """
    worlds: dict[str, World] = {}
    results = []
    for scenario in scenarios:
        if scenario.world not in worlds:
            worlds[scenario.world] = load_world(bundled_world_path(scenario.world))
        results.append(
            run_scenario(
                scenario, backend_factory(), world=worlds[scenario.world]
            )
        )
    return SuiteResult(name, results)


def rule_backend_factory(world_name: str = "apartment"):
    world = load_world(bundled_world_path(world_name))
    vocab = world.vocabulary()
    containers = frozenset(n for n, loc in world.locations.items() if loc.container)

    def factory() -> RuleBackend:
        return RuleBackend(vocab, containers)

    return factory


# -- calibration ------------------------------------------------------------


class MutationBackend:
    """Corrupts a fixed share of plan replies from an inner backend.

    Exactly floor(n * p) of the first n plan replies get a semantic
    mutation (argument swap, dropped step, reordered steps), spread
    evenly by a quota rule, so a measured planning rate over n runs
    lands on 1 - p rather than merely near it. The seed only picks
    which mutation is applied, never how many.
    """

    def __init__(self, inner: Backend, p: float = 0.2, seed: int = 0):
        if not 0.0 <= p <= 1.0:
            raise ValueError("p must be within [0, 1]")
        self.inner = inner
        self.p = p
        self.rng = random.Random(seed)
        self._plan_calls = 0

    def _mutate(self, plan: Plan) -> Plan:
        steps = list(plan.steps)
        ops = ["swap_arg"]
        if len(steps) >= 2:
            ops += ["drop", "reorder"]
        op = self.rng.choice(ops)
        if op == "drop":
            steps = steps[:-1]
        elif op == "reorder":
            steps[0], steps[-1] = steps[-1], steps[0]
            if [str(s) for s in steps] == [str(s) for s in plan.steps]:
                steps = steps[:-1]
        else:
            step = steps[0]
            arg = step.args[0] if step.args else ""
            pool = [s for s in ("home", "table", "counter") if s != arg]
            replacement = self.rng.choice(pool)
            steps[0] = type(step)(step.verb, (replacement,) + step.args[1:])
        return Plan(tuple(steps))

    def reply(self, record) -> str:
        text = self.inner.reply(record)
        try:
            parsed = parse_reply(text, mode="lenient")
        except ParseError:
            return text
        if not isinstance(parsed, Plan):
            return text
        i = self._plan_calls
        self._plan_calls += 1
        quota_hit = math.floor((i + 1) * self.p) > math.floor(i * self.p)
        if not quota_hit:
            return text
        return render_reply(self._mutate(parsed))


def run_calibration(
    n: int,
    backend_factory,
    scenarios: list[Scenario] | None = None,
) -> SuiteResult:
    """Score n scenario runs, cycling the instruction fixture."""
    if scenarios is None:
        scenarios = load_instructions()
    world = load_world(bundled_world_path("apartment"))
    backend = backend_factory()
    results = []
    for i in range(n):
        scenario = scenarios[i % len(scenarios)]
        results.append(run_scenario(scenario, backend, world=world))
    return SuiteResult(f"calibration-{n}", results)
