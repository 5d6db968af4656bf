"""Core vocabulary shared by every other module: the skill verbs, action
grammar, failure taxonomy, and symbol tables.

All types here are immutable after construction and safe to share across
threads or sessions.
"""

from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass, field

_NAME_RE = re.compile(r"^[a-z0-9_][a-z0-9_\-]*$")

# Directions accepted by turn() in addition to declared locations.
TURN_DIRECTIONS = frozenset({"left", "right"})

# Reserved location present in every world; "go back" resolves to it.
HOME = "home"


class SkillVerb(enum.Enum):
    """The seven one-step skills shared by planner and controller."""

    GO = "go"
    PICK = "pick"
    PLACE = "place"
    OPEN = "open"
    CLOSE = "close"
    SEARCH = "search"
    TURN = "turn"

    @property
    def canonical(self) -> str:
        return self.value


# verb -> (min arity, max arity)
ARITY: dict[SkillVerb, tuple[int, int]] = {
    SkillVerb.GO: (1, 1),
    SkillVerb.PICK: (1, 1),
    SkillVerb.PLACE: (1, 2),
    SkillVerb.OPEN: (1, 1),
    SkillVerb.CLOSE: (1, 1),
    SkillVerb.SEARCH: (1, 1),
    SkillVerb.TURN: (1, 1),
}


class FailureKind(enum.Enum):
    """The five interaction-requiring failure cases."""

    VISION = "vision"
    FEASIBILITY = "feasibility"
    AMBIGUOUS_REFERENCE = "ambiguous_reference"
    AMBIGUOUS_TASK = "ambiguous_task"
    EXECUTION = "execution"


# Kinds whose reports must name the object or action at fault.
SUBJECT_REQUIRED = frozenset(
    {FailureKind.VISION, FailureKind.FEASIBILITY, FailureKind.AMBIGUOUS_REFERENCE}
)


class PlanValidationError(Exception):
    """A plan step failed validation. ``step_index`` locates the first
    offending step; ``reason`` is human-readable."""

    def __init__(self, reason: str, step_index: int | None = None):
        self.reason = reason
        self.step_index = step_index
        at = "" if step_index is None else f" at step {step_index}"
        super().__init__(f"{reason}{at}")


class UnknownVerbError(PlanValidationError):
    pass


class BadArityError(PlanValidationError):
    pass


class UnknownSymbolError(PlanValidationError):
    pass


@dataclass(frozen=True)
class ActionStep:
    """One skill invocation, e.g. ``pick(orange)`` or ``place(coke, drawer)``."""

    verb: SkillVerb
    args: tuple[str, ...] = ()

    def __post_init__(self):
        if not isinstance(self.args, tuple):
            object.__setattr__(self, "args", tuple(self.args))

    def __str__(self) -> str:
        return f"{self.verb.canonical}({', '.join(self.args)})"


@dataclass(frozen=True)
class Plan:
    """Non-empty ordered action sequence."""

    steps: tuple[ActionStep, ...]

    def __post_init__(self):
        if not isinstance(self.steps, tuple):
            object.__setattr__(self, "steps", tuple(self.steps))
        if not self.steps:
            raise ValueError("a plan must contain at least one step")

    def __str__(self) -> str:
        return " ; ".join(str(s) for s in self.steps)

    def __len__(self) -> int:
        return len(self.steps)


@dataclass(frozen=True)
class FailureReport:
    """Taxonomy-tagged failure with a human-readable explanation."""

    kind: FailureKind
    explanation: str
    subject: str | None = None

    def __post_init__(self):
        if not self.explanation:
            raise ValueError("failure explanation must be non-empty")
        if self.kind in SUBJECT_REQUIRED and not self.subject:
            raise ValueError(f"{self.kind.value} failure requires a subject")


def _wrap_angle(yaw: float) -> float:
    """Map an angle to [-pi, pi)."""
    wrapped = math.fmod(yaw + math.pi, 2.0 * math.pi)
    if wrapped < 0:
        wrapped += 2.0 * math.pi
    return wrapped - math.pi


@dataclass(frozen=True)
class Pose:
    """Position in meters plus heading in radians, yaw in [-pi, pi)."""

    x: float
    y: float
    z: float = 0.0
    yaw: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "yaw", _wrap_angle(self.yaw))

    @property
    def xyz(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.z)


@dataclass(frozen=True)
class Box:
    """Axis-aligned box given by min/max corners."""

    lo: tuple[float, float, float]
    hi: tuple[float, float, float]

    def __post_init__(self):
        if any(l > h for l, h in zip(self.lo, self.hi)):
            raise ValueError(f"box min corner exceeds max corner: {self.lo} > {self.hi}")

    def contains(self, p: tuple[float, float, float]) -> bool:
        return all(l <= v <= h for v, l, h in zip(p, self.lo, self.hi))

    @property
    def center(self) -> tuple[float, float, float]:
        return tuple((l + h) / 2.0 for l, h in zip(self.lo, self.hi))


@dataclass(frozen=True)
class Vocabulary:
    """Declared symbols a plan may reference.

    ``objects`` holds concrete instance names plus shared base names (two
    cups both answer to "cup"); ``categories`` maps a semantic group such
    as "drink" to its member objects.
    """

    objects: frozenset[str] = frozenset()
    locations: frozenset[str] = frozenset()
    categories: dict[str, frozenset[str]] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "objects", frozenset(self.objects))
        object.__setattr__(self, "locations", frozenset(self.locations))
        object.__setattr__(
            self, "categories", {k: frozenset(v) for k, v in self.categories.items()}
        )
        for name in (
            list(self.objects) + list(self.locations) + list(self.categories)
        ):
            if not _NAME_RE.match(name):
                raise ValueError(
                    f"vocabulary names must be lowercase tokens without whitespace: {name!r}"
                )
        for cat, members in self.categories.items():
            if cat in self.objects:
                raise ValueError(f"category name collides with an object: {cat}")
            extra = members - self.objects
            if extra:
                raise ValueError(f"category {cat} has undeclared members: {sorted(extra)}")

    def knows(self, name: str) -> bool:
        return name in self.objects or name in self.locations or name in self.categories


# Default alias table; a config file can replace it (see load_aliases).
# Multi-token values name the verb plus an implied argument, so that
# "go back" parses as go(home).
DEFAULT_ALIASES: dict[str, str] = {
    "pick up": "pick",
    "take": "pick",
    "grab": "pick",
    "go to": "go",
    "head to": "go",
    "move to": "go",
    "go back": "go home",
    "put": "place",
    "place in": "place",
    "place on": "place",
    "store": "place",
}


def load_aliases(path) -> dict[str, str]:
    """Read an alias table from a ``key = value`` text file.

    Lines starting with ``#`` and blank lines are ignored. Values may carry
    an implied argument after the verb ("go back = go home").
    """
    table: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'alias = verb'")
            key, _, value = line.partition("=")
            table[key.strip().lower()] = value.strip().lower()
    return table


def resolve_alias(
    token: str, aliases: dict[str, str] | None = None
) -> tuple[SkillVerb, tuple[str, ...]]:
    """Map a surface verb phrase to its skill plus any implied arguments.

    Raises UnknownVerbError for tokens outside the verb and alias set.
    """
    cleaned = " ".join(token.lower().split())
    table = DEFAULT_ALIASES if aliases is None else aliases
    for verb in SkillVerb:
        if cleaned == verb.canonical:
            return verb, ()
    if cleaned in table:
        parts = table[cleaned].split()
        target = parts[0]
        for verb in SkillVerb:
            if target == verb.canonical:
                return verb, tuple(parts[1:])
        raise UnknownVerbError(f"alias {cleaned!r} maps to unknown verb {target!r}")
    raise UnknownVerbError(f"unknown verb {cleaned!r}")


def normalize_verb(token: str, aliases: dict[str, str] | None = None) -> SkillVerb:
    """Lowercase, trim, and alias-resolve a verb token."""
    return resolve_alias(token, aliases)[0]


def _check_symbol(name: str, allowed: frozenset[str], what: str, index: int) -> None:
    if name not in allowed:
        raise UnknownSymbolError(f"unknown {what} {name!r}", step_index=index)


def validate_step(step: ActionStep, vocab: Vocabulary, index: int = 0) -> None:
    lo, hi = ARITY[step.verb]
    if not (lo <= len(step.args) <= hi):
        raise BadArityError(
            f"{step.verb.canonical} takes {lo}"
            + (f"-{hi}" if hi != lo else "")
            + f" argument(s), got {len(step.args)}",
            step_index=index,
        )
    pickable = vocab.objects | frozenset(vocab.categories)
    if step.verb in (SkillVerb.GO, SkillVerb.OPEN, SkillVerb.CLOSE):
        _check_symbol(step.args[0], vocab.locations, "location", index)
    elif step.verb is SkillVerb.PICK:
        _check_symbol(step.args[0], vocab.objects, "object", index)
    elif step.verb is SkillVerb.SEARCH:
        _check_symbol(step.args[0], pickable, "object", index)
    elif step.verb is SkillVerb.TURN:
        _check_symbol(
            step.args[0], vocab.locations | TURN_DIRECTIONS, "direction", index
        )
    elif step.verb is SkillVerb.PLACE:
        _check_symbol(step.args[0], vocab.objects, "object", index)
        if len(step.args) == 2:
            _check_symbol(step.args[1], vocab.locations, "location", index)


def validate_plan(plan: Plan, vocab: Vocabulary) -> None:
    """Check arity and symbol resolution for every step.

    Raises a PlanValidationError subclass naming the first offending step.
    """
    for i, step in enumerate(plan.steps):
        validate_step(step, vocab, i)
