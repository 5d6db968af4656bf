"""Planning backends. Each one turns a four-line query into a one-line
reply (plan or failure text).

RuleBackend is a deterministic policy over the query contents: it reads
the perception summary, the reachability bit, and the dialogue history,
and emits canonical replies. It doubles as the labeler for generated
datasets, so its rules define the reference behavior of the whole loop.

RemoteBackend wraps a hosted language model behind a chat-completion
endpoint: shipped preamble as the system message, serialized query as
the user message, first completion text back for lenient parsing.
"""

from __future__ import annotations

import os
import re
import time
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Callable, Protocol

import httpx

try:
    import tomllib
except ImportError:  # 3.10
    import tomli as tomllib

from .domain import ActionStep, FailureKind, FailureReport, Plan, SkillVerb, Vocabulary
from .perception import extract_mentions
from .protocol import (
    ParseError,
    SessionRecord,
    ambiguity_failure,
    candidates_of,
    feasibility_failure,
    parse_reply,
    remaining_plan_of,
    render_reply,
    serialize,
    unclear_task_failure,
    vision_failure,
)


class Backend(Protocol):
    def reply(self, record: SessionRecord) -> str: ...


class BackendError(Exception):
    """The backend could not produce a reply at all."""


class BackendUnavailable(BackendError):
    """The planner endpoint could not be reached."""


class BackendTimeout(BackendError):
    """The planner endpoint did not answer within the timeout."""


# -- task phrasing ----------------------------------------------------------

PUT_WORDS = frozenset({"put", "place", "move", "store", "stow"})
GO_WORDS = frozenset({"go", "navigate", "head", "come", "return", "walk"})
FETCH_WORDS = frozenset({"fetch", "bring", "get", "hand", "give"})
PICK_WORDS = frozenset({"pick", "take", "grab", "grasp", "hold"})


@dataclass(frozen=True)
class TaskParse:
    family: str  # "fetch" | "pick" | "go" | "put"
    obj: str | None = None
    dest: str | None = None


def detect_task(text: str, vocab: Vocabulary) -> TaskParse | None:
    """Classify a command into a task family with its object and
    destination, or None when no family fits."""
    words = frozenset(re.findall(r"[a-z0-9_']+", text.lower()))
    objs = extract_mentions(text, sorted(vocab.objects | frozenset(vocab.categories)))
    locs = extract_mentions(text, sorted(vocab.locations))
    obj = objs[0] if objs else None
    if PUT_WORDS & words and obj and locs:
        return TaskParse("put", obj, locs[-1])
    if locs and (GO_WORDS & words or PUT_WORDS & words):
        return TaskParse("go", None, locs[0])
    if GO_WORDS & words and "back" in words:
        return TaskParse("go", None, "home")
    if FETCH_WORDS & words and obj:
        return TaskParse("fetch", obj)
    if PICK_WORDS & words and obj:
        return TaskParse("pick", obj)
    return None


def family_plan(task: TaskParse, containers: frozenset[str]) -> Plan:
    """Canonical step sequence for a parsed task."""
    S = ActionStep
    if task.family == "go":
        return Plan((S(SkillVerb.GO, (task.dest,)),))
    if task.family == "pick":
        return Plan((S(SkillVerb.PICK, (task.obj,)),))
    if task.family == "fetch":
        return Plan(
            (
                S(SkillVerb.PICK, (task.obj,)),
                S(SkillVerb.GO, ("home",)),
                S(SkillVerb.PLACE, (task.obj,)),
            )
        )
    if task.family == "put":
        if task.dest in containers:
            return Plan(
                (
                    S(SkillVerb.GO, (task.dest,)),
                    S(SkillVerb.OPEN, (task.dest,)),
                    S(SkillVerb.PICK, (task.obj,)),
                    S(SkillVerb.PLACE, (task.obj, task.dest)),
                    S(SkillVerb.CLOSE, (task.dest,)),
                )
            )
        return Plan(
            (
                S(SkillVerb.PICK, (task.obj,)),
                S(SkillVerb.GO, (task.dest,)),
                S(SkillVerb.PLACE, (task.obj, task.dest)),
            )
        )
    raise ValueError(f"unknown task family {task.family!r}")


# -- perception summary parsing ---------------------------------------------


@dataclass(frozen=True)
class VisionClause:
    kind: str  # "found" | "missing" | "multi"
    name: str
    position: tuple[float, float, float] | None = None
    candidates: tuple[str, ...] = ()


_MISSING_RE = re.compile(r"^cannot find (\S+)$")
_FOUND_RE = re.compile(r"^found (\S+) at \(([^)]+)\)$")
_MULTI_RE = re.compile(r"^found \d+ items matching (\S+): (.+)$")


def parse_vision(text: str) -> list[VisionClause]:
    clauses: list[VisionClause] = []
    for chunk in text.split("; ") if text else []:
        m = _MISSING_RE.match(chunk)
        if m:
            clauses.append(VisionClause("missing", m.group(1)))
            continue
        m = _FOUND_RE.match(chunk)
        if m:
            try:
                pos = tuple(float(v) for v in m.group(2).split(","))
            except ValueError:
                pos = None
            clauses.append(VisionClause("found", m.group(1), position=pos))
            continue
        m = _MULTI_RE.match(chunk)
        if m:
            cands = tuple(c.strip() for c in m.group(2).split(","))
            clauses.append(VisionClause("multi", m.group(1), candidates=cands))
    return clauses


# -- the rule policy --------------------------------------------------------


class RuleBackend:
    """Deterministic reference policy.

    Decision order, first match wins:
      1. a requested object is reported missing -> vision failure
      2. a requested name matches several items -> ambiguity failure
      3. the object is seen but unreachable, and no recovery hint is in
         play -> reachability failure
      4. an earlier sensing/reach failure plus a container hint in the
         current turn -> container recovery sequence
      5. an earlier ambiguity plus a named candidate -> original task
         with that candidate
      6. an earlier execution failure -> retry the leftover steps
      7. a fresh parseable command -> its family's step sequence
      8. otherwise -> unclear-task failure
    """

    def __init__(self, vocab: Vocabulary, containers: frozenset[str]):
        self.vocab = vocab
        self.containers = frozenset(containers)

    # helpers ---------------------------------------------------------------

    def _object_names(self) -> list[str]:
        return sorted(self.vocab.objects | frozenset(self.vocab.categories))

    def _requested(self, record: SessionRecord) -> list[str]:
        """Union of object mentions over all user turns, oldest first.
        Mirrors how the loop builds its perception queries."""
        seen: list[str] = []
        texts = [t.text for t in record.history if t.speaker == "user"]
        texts.append(record.user)
        for text in texts:
            for name in extract_mentions(text, self._object_names()):
                if name not in seen:
                    seen.append(name)
        return seen

    def _clause_map(self, record: SessionRecord) -> dict[str, VisionClause]:
        """Clause per queried name. Clauses come back in query order, so
        align positionally when the counts line up."""
        clauses = parse_vision(record.vision)
        queries = self._requested(record)
        out: dict[str, VisionClause] = {}
        if len(clauses) == len(queries):
            out.update(zip(queries, clauses))
        for c in clauses:
            out.setdefault(c.name, c)
        return out

    def _window(self, record: SessionRecord) -> tuple:
        """Turns belonging to the task in progress: everything after the
        most recent robot turn that was a plan. Older tasks in the same
        conversation must not leak into recovery decisions."""
        last_plan = -1
        for i, turn in enumerate(record.history):
            if turn.speaker != "robot":
                continue
            try:
                parsed = parse_reply(turn.text, mode="lenient")
            except ParseError:
                continue
            if isinstance(parsed, Plan):
                last_plan = i
        return record.history[last_plan + 1 :]

    def _history_failures(self, window) -> list[FailureReport]:
        reports = []
        for turn in window:
            if turn.speaker != "robot":
                continue
            try:
                parsed = parse_reply(turn.text, mode="lenient")
            except ParseError:
                continue
            if isinstance(parsed, FailureReport):
                reports.append(parsed)
        return reports

    def _instance_for(self, name: str, clause_map: dict[str, VisionClause]) -> str:
        clause = clause_map.get(name)
        if clause is not None and clause.kind == "found":
            return clause.name
        return name

    # policy ----------------------------------------------------------------

    def decide(self, record: SessionRecord) -> Plan | FailureReport:
        mentions = extract_mentions(record.user, self._object_names())
        clause_map = self._clause_map(record)
        window = self._window(record)
        failures = self._history_failures(window)
        planning_failures = [
            f
            for f in failures
            if f.kind in (FailureKind.VISION, FailureKind.FEASIBILITY)
        ]
        container_hints = extract_mentions(record.user, sorted(self.containers))

        # 1. requested object missing
        for name in mentions:
            clause = clause_map.get(name)
            if clause is not None and clause.kind == "missing":
                return vision_failure(name)

        # 2. requested name ambiguous
        for name in mentions:
            clause = clause_map.get(name)
            if clause is not None and clause.kind == "multi":
                kind = (
                    FailureKind.AMBIGUOUS_TASK
                    if name in self.vocab.categories
                    else FailureKind.AMBIGUOUS_REFERENCE
                )
                return ambiguity_failure(name, list(clause.candidates), kind)

        # 3. seen but unreachable (unless a recovery hint applies)
        found = [c for c in clause_map.values() if c.kind == "found"]
        if (
            found
            and record.feasibility == 0
            and not (planning_failures and container_hints)
        ):
            subject = found[-1].name
            if mentions:
                subject = self._instance_for(mentions[0], clause_map)
            return feasibility_failure(subject)

        # 4. container recovery after a sensing/reach failure
        if planning_failures and container_hints:
            c = container_hints[0]
            subject = planning_failures[-1].subject or ""
            obj = self._instance_for(subject, clause_map)
            S = ActionStep
            return Plan(
                (
                    S(SkillVerb.GO, (c,)),
                    S(SkillVerb.OPEN, (c,)),
                    S(SkillVerb.PICK, (obj,)),
                    S(SkillVerb.GO, ("home",)),
                    S(SkillVerb.PLACE, (obj,)),
                )
            )

        # 5. ambiguity resolved by naming a candidate
        ambiguities = [
            f
            for f in failures
            if f.kind in (FailureKind.AMBIGUOUS_REFERENCE, FailureKind.AMBIGUOUS_TASK)
        ]
        if ambiguities:
            cands = candidates_of(ambiguities[-1])
            chosen = extract_mentions(record.user, cands)
            if chosen:
                first_user = next(
                    (t.text for t in window if t.speaker == "user"), record.user
                )
                task = detect_task(first_user, self.vocab) or TaskParse("fetch")
                task = TaskParse(task.family, chosen[0], task.dest)
                return family_plan(task, self.containers)

        # 6. retry what was left after an execution failure
        if failures and failures[-1].kind is FailureKind.EXECUTION:
            remaining = remaining_plan_of(failures[-1])
            if remaining is not None:
                return remaining

        # 7. fresh command
        task = detect_task(record.user, self.vocab)
        if task is not None:
            if task.obj is not None:
                task = TaskParse(
                    task.family, self._instance_for(task.obj, clause_map), task.dest
                )
            return family_plan(task, self.containers)

        # 8. give up and ask
        return unclear_task_failure()

    def reply(self, record: SessionRecord) -> str:
        return render_reply(self.decide(record))


# -- other backends ---------------------------------------------------------


class CallableBackend:
    """Adapter for a plain function, mainly for tests and scripts."""

    def __init__(self, fn: Callable[[SessionRecord], str]):
        self._fn = fn

    def reply(self, record: SessionRecord) -> str:
        return self._fn(record)


class RecordingBackend:
    """Wraps any backend and logs each (query, reply) pair. Used by the
    dataset generator and the evaluation harness to inspect raw replies
    independently of how the session interprets them."""

    def __init__(self, inner: Backend):
        self.inner = inner
        self.log: list[tuple[SessionRecord, str]] = []

    def reply(self, record: SessionRecord) -> str:
        text = self.inner.reply(record)
        self.log.append((record, text))
        return text


def load_preamble() -> str:
    """The system message shipped with the package. It states the skill
    API and the reply grammar; hosted models are steered by this text,
    so it lives in data where it can be revised without a code change."""
    return (
        resources.files("planloop").joinpath("data/preamble.cfg").read_text("utf-8")
    )


@dataclass(frozen=True)
class RemoteConfig:
    """Connection settings for a hosted planner model."""

    endpoint: str
    model: str = "planner"
    timeout: float = 30.0
    max_output_tokens: int = 256

    @classmethod
    def load(
        cls,
        path: str | Path | None = None,
        endpoint: str | None = None,
    ) -> "RemoteConfig":
        """Resolve settings from, in rising priority: the TOML file at
        ``path``, ``PLANLOOP_REMOTE_*`` environment variables, and the
        explicit ``endpoint`` argument."""
        data: dict = {}
        if path is not None:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        env = os.environ
        endpoint = endpoint or env.get("PLANLOOP_REMOTE_URL") or data.get("endpoint")
        if not endpoint:
            raise ValueError(
                "remote backend needs an endpoint "
                "(argument, PLANLOOP_REMOTE_URL, or config file)"
            )
        return cls(
            endpoint=endpoint,
            model=env.get("PLANLOOP_REMOTE_MODEL") or data.get("model", cls.model),
            timeout=float(
                env.get("PLANLOOP_REMOTE_TIMEOUT") or data.get("timeout", cls.timeout)
            ),
            max_output_tokens=int(
                env.get("PLANLOOP_REMOTE_MAX_TOKENS")
                or data.get("max_output_tokens", cls.max_output_tokens)
            ),
        )


@dataclass(frozen=True)
class BackendReply:
    text: str
    latency: float


class RemoteBackend:
    """Chat-completion client for a hosted planner model.

    Each query becomes one request: the shipped preamble as the system
    message, the serialized four-line frame as the user message,
    temperature pinned to 0 so evaluation runs are repeatable. The
    first completion's text is returned verbatim; the lenient parser
    deals with whatever shape it has.
    """

    def __init__(
        self,
        url: str,
        model: str = RemoteConfig.model,
        timeout: float = RemoteConfig.timeout,
        max_output_tokens: int = RemoteConfig.max_output_tokens,
        client: httpx.Client | None = None,
        preamble: str | None = None,
    ):
        self.url = url
        self.model = model
        self.max_output_tokens = max_output_tokens
        self.preamble = load_preamble() if preamble is None else preamble
        self._client = client or httpx.Client(timeout=timeout)

    @classmethod
    def from_config(cls, config: RemoteConfig) -> "RemoteBackend":
        return cls(
            config.endpoint,
            model=config.model,
            timeout=config.timeout,
            max_output_tokens=config.max_output_tokens,
        )

    def request_body(self, record: SessionRecord) -> dict:
        return {
            "model": self.model,
            "messages": [
                {"role": "system", "content": self.preamble},
                {"role": "user", "content": serialize(record)},
            ],
            "max_tokens": self.max_output_tokens,
            "temperature": 0,
        }

    def complete(self, record: SessionRecord) -> BackendReply:
        started = time.perf_counter()
        try:
            resp = self._client.post(self.url, json=self.request_body(record))
        except httpx.TimeoutException as exc:
            raise BackendTimeout(f"planner endpoint timed out: {exc}") from exc
        except httpx.TransportError as exc:
            raise BackendUnavailable(
                f"planner endpoint unreachable: {exc}"
            ) from exc
        try:
            resp.raise_for_status()
            body = resp.json()
        except httpx.HTTPStatusError as exc:
            raise BackendError(f"planner endpoint failed: {exc}") from exc
        except ValueError as exc:
            raise BackendError("planner endpoint returned invalid JSON") from exc
        try:
            text = body["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise BackendError(
                "planner endpoint response lacks choices[0].message.content"
            ) from exc
        if not isinstance(text, str):
            raise BackendError("planner completion content is not text")
        return BackendReply(text, time.perf_counter() - started)

    def reply(self, record: SessionRecord) -> str:
        return self.complete(record).text
