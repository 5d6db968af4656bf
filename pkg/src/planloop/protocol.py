"""Wire format between the loop and a planning backend.

A query is four tagged lines: dialogue history, the current user turn,
the perception summary, and the binary reachability score. A reply is a
single line: either an action sequence or a taxonomy-tagged failure with
a templated explanation the loop (and the user) can act on.

Parsing runs in two modes. Strict accepts exactly what the renderers
emit and is used for datasets and tests. Lenient tolerates the kind of
noise a language model adds (chatter before the marker, verb aliases,
case drift, article words in arguments) and is used on live replies.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Union

from .domain import (
    ActionStep,
    FailureKind,
    FailureReport,
    Plan,
    PlanValidationError,
    SkillVerb,
    SUBJECT_REQUIRED,
    Vocabulary,
    resolve_alias,
    validate_plan,
)

HISTORY_TAG = "<history>"
USER_TAG = "<user>"
VISION_TAG = "<vision>"
FEASIBILITY_TAG = "<feasibility>"
REPLY_TAG = "<robot>"

EMPTY_HISTORY = "none"
TURN_SEPARATOR = " | "

SPEAKERS = ("user", "robot")


class ParseError(Exception):
    pass


@dataclass(frozen=True)
class Turn:
    speaker: str
    text: str

    def __post_init__(self):
        if self.speaker not in SPEAKERS:
            raise ValueError(f"speaker must be one of {SPEAKERS}, got {self.speaker!r}")


@dataclass(frozen=True)
class SessionRecord:
    """One backend query: everything the planner sees."""

    history: tuple[Turn, ...]
    user: str
    vision: str
    feasibility: int

    def __post_init__(self):
        if not isinstance(self.history, tuple):
            object.__setattr__(self, "history", tuple(self.history))
        if not self.user:
            raise ValueError("user text must be non-empty")
        if self.feasibility not in (0, 1):
            raise ValueError(f"feasibility must be 0 or 1, got {self.feasibility!r}")


PlannerResult = Union[Plan, FailureReport]


# -- escaping ---------------------------------------------------------------

# Order matters: backslash first on escape, last on unescape.
_ESCAPES = [("\\", "\\\\"), ("\n", "\\n"), ("|", "\\|"), ("<", "\\<")]


def escape(text: str) -> str:
    for raw, esc in _ESCAPES:
        text = text.replace(raw, esc)
    return text


def unescape(text: str) -> str:
    out: list[str] = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch == "\\" and i + 1 < len(text):
            nxt = text[i + 1]
            if nxt == "n":
                out.append("\n")
            else:
                out.append(nxt)
            i += 2
        else:
            out.append(ch)
            i += 1
    return "".join(out)


# -- query frame ------------------------------------------------------------


def serialize(record: SessionRecord) -> str:
    """Render the four-line query frame. No trailing newline."""
    if record.history:
        rendered = TURN_SEPARATOR.join(
            f"{t.speaker}: {escape(t.text)}" for t in record.history
        )
    else:
        rendered = EMPTY_HISTORY
    return "\n".join(
        [
            f"{HISTORY_TAG} {rendered}",
            f"{USER_TAG} {escape(record.user)}",
            f"{VISION_TAG} {escape(record.vision)}",
            f"{FEASIBILITY_TAG} {record.feasibility}",
        ]
    )


def _split_turns(raw: str) -> list[str]:
    """Split rendered history on bare pipes. Literal pipes inside a turn
    are always escaped, so any unescaped pipe is a separator."""
    parts: list[str] = []
    buf: list[str] = []
    i, n = 0, len(raw)
    while i < n:
        ch = raw[i]
        if ch == "\\" and i + 1 < n:
            buf.append(raw[i : i + 2])
            i += 2
        elif ch == "|":
            if buf and buf[-1] == " ":
                buf.pop()
            parts.append("".join(buf))
            buf = []
            i += 1
            if i < n and raw[i] == " ":
                i += 1
        else:
            buf.append(ch)
            i += 1
    parts.append("".join(buf))
    return parts


def _strip_tag(line: str, tag: str, lineno: int) -> str:
    if line == tag:
        # A bare tag means the content was empty but the trailing space
        # was trimmed somewhere along the way; reject to keep the frame
        # unambiguous.
        raise ParseError(f"line {lineno}: missing space after {tag}")
    if not line.startswith(tag + " "):
        raise ParseError(f"line {lineno}: expected {tag}")
    return line[len(tag) + 1 :]


def parse_prompt(text: str) -> SessionRecord:
    """Inverse of serialize. Raises ParseError on any frame violation."""
    lines = text.split("\n")
    if len(lines) != 4:
        raise ParseError(f"expected 4 lines, got {len(lines)}")
    hist_raw = _strip_tag(lines[0], HISTORY_TAG, 1)
    user = unescape(_strip_tag(lines[1], USER_TAG, 2))
    vision = unescape(_strip_tag(lines[2], VISION_TAG, 3))
    feas_raw = _strip_tag(lines[3], FEASIBILITY_TAG, 4)
    if feas_raw not in ("0", "1"):
        raise ParseError(f"feasibility must be 0 or 1, got {feas_raw!r}")
    turns: list[Turn] = []
    if hist_raw != EMPTY_HISTORY:
        for chunk in _split_turns(hist_raw):
            speaker, sep, body = chunk.partition(": ")
            if not sep or speaker not in SPEAKERS:
                raise ParseError(f"bad history turn {chunk!r}")
            turns.append(Turn(speaker, unescape(body)))
    try:
        return SessionRecord(tuple(turns), user, vision, int(feas_raw))
    except ValueError as exc:
        raise ParseError(str(exc)) from exc


# -- failure explanation templates ------------------------------------------


def vision_failure(name: str) -> FailureReport:
    return FailureReport(FailureKind.VISION, f"cannot find {name}", subject=name)


def feasibility_failure(name: str) -> FailureReport:
    return FailureReport(FailureKind.FEASIBILITY, f"cannot reach {name}", subject=name)


def ambiguity_failure(name: str, candidates: list[str], kind: FailureKind) -> FailureReport:
    if kind not in (FailureKind.AMBIGUOUS_REFERENCE, FailureKind.AMBIGUOUS_TASK):
        raise ValueError(f"not an ambiguity kind: {kind}")
    listed = ", ".join(candidates)
    return FailureReport(
        kind,
        f"found {len(candidates)} items matching {name}: {listed}; "
        "which one do you mean?",
        subject=name,
    )


def unclear_task_failure() -> FailureReport:
    return FailureReport(
        FailureKind.AMBIGUOUS_TASK,
        "cannot determine the task; please rephrase the request",
    )


def execution_failure(step: ActionStep, detail: str, remaining: Plan) -> FailureReport:
    return FailureReport(
        FailureKind.EXECUTION,
        f"failed to execute {step}: {detail}; remaining steps: {remaining}",
        subject=str(step),
    )


# -- reply rendering --------------------------------------------------------


def render_plan(plan: Plan) -> str:
    return f"PLAN: {plan}"


def render_failure(report: FailureReport) -> str:
    return f"FAILURE({report.kind.value}): {report.explanation}"


def render_reply(result: PlannerResult) -> str:
    if isinstance(result, Plan):
        return render_plan(result)
    return render_failure(result)


# -- reply parsing ----------------------------------------------------------

_SYMBOL = r"[a-z0-9_][a-z0-9_\-]*"
_VERBS = "|".join(v.canonical for v in SkillVerb)
_STRICT_STEP = re.compile(rf"({_VERBS})\(({_SYMBOL})(?:, ({_SYMBOL}))?\)")
_STRICT_PLAN = re.compile(
    rf"^PLAN: {_STRICT_STEP.pattern}(?: ; {_STRICT_STEP.pattern})*$"
)
_KINDS = "|".join(k.value for k in FailureKind)
_STRICT_FAILURE = re.compile(rf"^FAILURE\(({_KINDS})\): (.+)$")

_SUBJECT_PATTERNS = {
    FailureKind.VISION: re.compile(r"cannot find (\S+)"),
    FailureKind.FEASIBILITY: re.compile(r"cannot reach (\S+)"),
    FailureKind.AMBIGUOUS_REFERENCE: re.compile(r"items matching (\S+?):"),
    FailureKind.AMBIGUOUS_TASK: re.compile(r"items matching (\S+?):"),
    FailureKind.EXECUTION: re.compile(r"failed to execute ([a-z_]+\([^)]*\))"),
}

_CANDIDATES_RE = re.compile(r"items matching \S+: (.+?)(?:;|$)")
_REMAINING_RE = re.compile(r"remaining steps: (.+)$")

_ARTICLES = frozenset({"the", "a", "an"})


def _extract_subject(kind: FailureKind, explanation: str) -> str | None:
    m = _SUBJECT_PATTERNS[kind].search(explanation)
    return m.group(1) if m else None


def candidates_of(report: FailureReport) -> list[str]:
    """Candidate list from an ambiguity explanation, empty if absent."""
    m = _CANDIDATES_RE.search(report.explanation)
    if not m:
        return []
    return [c.strip() for c in m.group(1).split(",") if c.strip()]


def remaining_plan_of(report: FailureReport) -> Plan | None:
    """Leftover steps from an execution failure explanation, if parseable."""
    m = _REMAINING_RE.search(report.explanation)
    if not m:
        return None
    try:
        return _parse_steps_lenient(m.group(1))
    except ParseError:
        return None


def normalize_symbol(raw: str) -> str:
    """Canonicalize an argument token: drop articles, join words with
    underscores."""
    words = [w for w in re.split(r"[\s]+", raw.strip().lower()) if w]
    while words and words[0] in _ARTICLES:
        words.pop(0)
    joined = "_".join(words)
    return joined.strip(".,!?:")


_LENIENT_STEP = re.compile(r"([A-Za-z][A-Za-z_ ]*?)\s*\(([^()]*)\)")


def _parse_steps_lenient(
    body: str, aliases: dict[str, str] | None = None
) -> Plan:
    steps: list[ActionStep] = []
    for chunk in body.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        m = _LENIENT_STEP.search(chunk)
        if not m:
            raise ParseError(f"cannot parse step {chunk!r}")
        try:
            verb, implied = resolve_alias(m.group(1), aliases)
        except PlanValidationError as exc:
            raise ParseError(str(exc)) from exc
        args = tuple(
            normalize_symbol(a) for a in m.group(2).split(",") if normalize_symbol(a)
        )
        steps.append(ActionStep(verb, args if args else implied))
    if not steps:
        raise ParseError("no steps found after plan marker")
    return Plan(tuple(steps))


def _finish_failure(kind: FailureKind, explanation: str) -> FailureReport:
    subject = _extract_subject(kind, explanation)
    if kind in SUBJECT_REQUIRED and subject is None:
        raise ParseError(f"{kind.value} failure does not name its subject")
    try:
        return FailureReport(kind, explanation, subject=subject)
    except ValueError as exc:
        raise ParseError(str(exc)) from exc


def _parse_strict(text: str, vocab: Vocabulary | None) -> PlannerResult:
    if _STRICT_PLAN.match(text):
        steps = tuple(
            ActionStep(SkillVerb(m.group(1)), (m.group(2),) + ((m.group(3),) if m.group(3) else ()))
        for m in _STRICT_STEP.finditer(text)
        )
        plan = Plan(steps)
        if vocab is not None:
            try:
                validate_plan(plan, vocab)
            except PlanValidationError as exc:
                raise ParseError(str(exc)) from exc
        return plan
    m = _STRICT_FAILURE.match(text)
    if m:
        return _finish_failure(FailureKind(m.group(1)), m.group(2))
    raise ParseError(f"reply matches neither grammar: {text!r}")


_LENIENT_PLAN_MARK = re.compile(r"plan\s*:", re.IGNORECASE)
_LENIENT_FAIL_MARK = re.compile(r"failure\s*\(\s*([a-z_ ]+?)\s*\)\s*:", re.IGNORECASE)


def _parse_lenient(
    text: str, vocab: Vocabulary | None, aliases: dict[str, str] | None
) -> PlannerResult:
    pm = _LENIENT_PLAN_MARK.search(text)
    fm = _LENIENT_FAIL_MARK.search(text)
    # Earliest marker wins when both appear.
    if pm and (not fm or pm.start() <= fm.start()):
        body = text[pm.end() :].split("\n", 1)[0]
        plan = _parse_steps_lenient(body, aliases)
        if vocab is not None:
            try:
                validate_plan(plan, vocab)
            except PlanValidationError as exc:
                raise ParseError(str(exc)) from exc
        return plan
    if fm:
        kind_token = normalize_symbol(fm.group(1))
        try:
            kind = FailureKind(kind_token)
        except ValueError as exc:
            raise ParseError(f"unknown failure kind {kind_token!r}") from exc
        explanation = text[fm.end() :].split("\n", 1)[0].strip()
        if not explanation:
            raise ParseError("failure reply has no explanation")
        return _finish_failure(kind, explanation)
    raise ParseError("no plan or failure marker found")


def parse_reply(
    text: str,
    mode: str = "strict",
    vocab: Vocabulary | None = None,
    aliases: dict[str, str] | None = None,
) -> PlannerResult:
    """Parse a backend reply into a plan or failure report.

    The optional vocabulary turns on symbol checking for plans. Raises
    ParseError for anything unparseable in the requested mode.
    """
    if not isinstance(text, str):
        raise ParseError("reply must be a string")
    stripped = text.strip()
    if stripped.startswith(REPLY_TAG):
        stripped = stripped[len(REPLY_TAG) :].lstrip()
    if mode == "strict":
        return _parse_strict(stripped, vocab)
    if mode == "lenient":
        return _parse_lenient(stripped, vocab, aliases)
    raise ValueError(f"unknown parse mode {mode!r}")
