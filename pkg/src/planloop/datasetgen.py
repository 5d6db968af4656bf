"""Deterministic generation of planner training pairs.

Every record is one real planner round: a scripted session runs the
bundled rule policy against a staged scene, and each backend call is
captured as (serialized query, tagged reply). Staging decides the
failure flavor up front: stowing an object in a closed cupboard forces
a sensing miss, marking the cupboard transparent forces a reach miss,
widening the request to a shared base name or a category forces the two
ambiguity flavors, and an injected actuator fault forces a mid-plan
retry. Because the labels come from live sessions they stay consistent
with the recovery policy by construction, and a fixed seed makes the
whole file byte-stable across reruns.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from .backends import RecordingBackend, RuleBackend
from .domain import FailureKind, FailureReport, Plan, Pose, SkillVerb
from .orchestrator import Session
from .protocol import REPLY_TAG, ParseError, parse_prompt, parse_reply, serialize
from .world import FaultSpec, World, bundled_world_path, load_world

DEFAULT_CONFIG = Path(__file__).parent / "data" / "gen_default.toml"

FAILURE_KINDS = (
    "vision",
    "feasibility",
    "ambiguous_reference",
    "ambiguous_task",
    "execution",
)

# Phrasing templates per family; a config picks how many to use.
PHRASINGS = {
    "pick": (
        "pick up the {obj}",
        "please pick up the {obj}",
        "grab the {obj}",
        "take the {obj}",
        "could you pick up the {obj}",
    ),
    "go": (
        "go to the {dest}",
        "please go to the {dest}",
        "head to the {dest}",
        "walk over to the {dest}",
        "navigate to the {dest}",
    ),
    "fetch": (
        "fetch me the {obj}",
        "bring me the {obj}",
        "get me the {obj}",
        "please fetch me the {obj}",
        "can you bring me the {obj}",
        "hand me the {obj}",
    ),
    "put_away": (
        "put the {obj} on the {dest}",
        "place the {obj} on the {dest}",
        "move the {obj} to the {dest}",
        "please put the {obj} on the {dest}",
    ),
    "put_container": (
        "put the {obj} in the {dest}",
        "place the {obj} in the {dest}",
        "store the {obj} in the {dest}",
        "put the {obj} away in the {dest}",
    ),
}


class GenerationError(RuntimeError):
    """A scripted conversation did not produce the staged outcome."""


@dataclass(frozen=True)
class GenConfig:
    world: str = "apartment"
    seed: int = 2024
    multi_step_every: int = 4
    mix: dict = field(
        default_factory=lambda: {
            "vision": 0.15,
            "feasibility": 0.12,
            "ambiguous_reference": 0.08,
            "ambiguous_task": 0.10,
            "execution": 0.10,
        }
    )
    families: dict = field(
        default_factory=lambda: {
            "pick": 5,
            "go": 5,
            "fetch": 6,
            "put_away": 4,
            "put_container": 4,
        }
    )


def load_config(path: str | Path | None = None) -> GenConfig:
    source = Path(path) if path is not None else DEFAULT_CONFIG
    with open(source, "rb") as fh:
        data = tomllib.load(fh)
    mix = {str(k): float(v) for k, v in data.get("mix", {}).items()}
    for key in mix:
        if key not in FAILURE_KINDS:
            raise ValueError(f"unknown mix key {key!r}")
    if sum(mix.values()) > 1.0 + 1e-9:
        raise ValueError("mix proportions exceed 1.0")
    families = {str(k): int(v) for k, v in data.get("families", {}).items()}
    for fam, count in families.items():
        if fam not in PHRASINGS:
            raise ValueError(f"unknown family {fam!r}")
        if not 0 <= count <= len(PHRASINGS[fam]):
            raise ValueError(
                f"family {fam!r} supports at most {len(PHRASINGS[fam])} phrasings"
            )
    return GenConfig(
        world=str(data.get("world", "apartment")),
        seed=int(data.get("seed", 2024)),
        multi_step_every=int(data.get("multi_step_every", 4)),
        mix=mix if "mix" in data else GenConfig().mix,
        families=families if "families" in data else GenConfig().families,
    )


@dataclass
class _Combo:
    family: str
    phrasing: int
    text: str
    obj: str | None
    dest: str | None
    kind: str = "none"


def _plain_surfaces(world: World) -> list[str]:
    return sorted(
        name
        for name, loc in world.locations.items()
        if not loc.container and name != "home"
    )


def _containers(world: World) -> list[str]:
    return sorted(name for name, loc in world.locations.items() if loc.container)


def _build_combos(config: GenConfig, world: World) -> list[_Combo]:
    objects = list(world.objects)
    surfaces = _plain_surfaces(world)
    containers = _containers(world)
    combos: list[_Combo] = []
    for family in ("pick", "go", "fetch", "put_away", "put_container"):
        count = config.families.get(family, 0)
        templates = PHRASINGS[family][:count]
        if family == "go":
            dests = surfaces + containers
            for dest in dests:
                for i, tmpl in enumerate(templates):
                    combos.append(
                        _Combo(family, i, tmpl.format(dest=dest), None, dest)
                    )
            continue
        for j, obj in enumerate(objects):
            for i, tmpl in enumerate(templates):
                if family == "pick" or family == "fetch":
                    dest = None
                elif family == "put_away":
                    dest = surfaces[(j + i) % len(surfaces)]
                else:
                    dest = containers[(j + i) % len(containers)]
                text = tmpl.format(obj=obj.replace("_", " "), dest=dest)
                combos.append(_Combo(family, i, text, obj, dest))
    return combos


def _ambiguous_category(world: World, obj_name: str) -> str | None:
    """The object's category, but only when naming it would really be
    ambiguous (two or more members in the scene)."""
    obj = world.objects.get(obj_name or "")
    if obj is None or obj.category is None:
        return None
    members = [o for o in world.objects.values() if o.category == obj.category]
    return obj.category if len(members) >= 2 else None


def _assign_kinds(
    combos: list[_Combo], config: GenConfig, rng: random.Random, world: World
) -> None:
    thresholds = []
    acc = 0.0
    for kind in FAILURE_KINDS:
        acc += config.mix.get(kind, 0.0)
        thresholds.append((acc, kind))
    vision_seen = 0
    for combo in combos:
        draw = rng.random()
        kind = "none"
        for edge, candidate in thresholds:
            if draw < edge:
                kind = candidate
                break
        if combo.obj is None and kind != "execution":
            kind = "none"
        if kind == "ambiguous_task" and _ambiguous_category(world, combo.obj) is None:
            kind = "none"
        if kind == "ambiguous_reference" and _shared_base(world) is None:
            kind = "none"
        if kind == "vision":
            vision_seen += 1
            if config.multi_step_every and vision_seen % config.multi_step_every == 1:
                kind = "multi_step"
        combo.kind = kind


def _shared_base(world: World) -> str | None:
    counts: dict[str, int] = {}
    for obj in world.objects.values():
        counts[obj.base] = counts.get(obj.base, 0) + 1
    shared = sorted(b for b, n in counts.items() if n >= 2 and b not in world.objects)
    return shared[0] if shared else None


def _rewrite_mention(text: str, obj: str, replacement: str) -> str:
    return text.replace(obj.replace("_", " "), replacement).replace(obj, replacement)


def _stow(world: World, obj: str, container: str, *, transparent: bool) -> None:
    loc = world.locations[container]
    target = world.objects[obj]
    target.inside = container
    target.pose = Pose(loc.pose.x, loc.pose.y, loc.pose.z, 0.0)
    if transparent:
        loc.transparent = True


def _first_step(combo: _Combo) -> tuple[SkillVerb, str]:
    if combo.family == "go":
        return SkillVerb.GO, combo.dest or "home"
    if combo.family == "put_container":
        return SkillVerb.GO, combo.dest or "home"
    return SkillVerb.PICK, combo.obj or ""


def _expected_shapes(kind: str) -> list[object]:
    plan = Plan
    f = FailureKind
    return {
        "none": [plan],
        "vision": [f.VISION, plan],
        "feasibility": [f.FEASIBILITY, plan],
        "ambiguous_reference": [f.AMBIGUOUS_REFERENCE, plan],
        "ambiguous_task": [f.AMBIGUOUS_TASK, plan],
        "execution": [plan, plan],
        "multi_step": [f.VISION, f.FEASIBILITY, plan],
    }[kind]


def _script(combo: _Combo, world: World, rng: random.Random, stow_in: str) -> list[dict]:
    """User turns plus staging hooks for one conversation."""
    turns = [{"say": combo.text}]
    if combo.kind == "none":
        return turns
    if combo.kind == "vision":
        turns.append({"say": f"it is in the {stow_in}"})
    elif combo.kind == "feasibility":
        turns.append({"say": f"it is in the {stow_in}, open it first"})
    elif combo.kind == "multi_step":
        turns.append({"say": "try looking again", "unhide": combo.obj})
        turns.append({"say": f"it is in the {stow_in}, open it first"})
    elif combo.kind == "ambiguous_reference":
        base = _shared_base(world)
        instances = sorted(o.name for o in world.objects.values() if o.base == base)
        chosen = rng.choice(instances)
        turns[0] = {"say": _rewrite_mention(combo.text, combo.obj, base)}
        turns.append({"say": f"the {chosen.replace('_', ' ')} please"})
    elif combo.kind == "ambiguous_task":
        category = _ambiguous_category(world, combo.obj)
        turns[0] = {"say": _rewrite_mention(combo.text, combo.obj, category)}
        turns.append({"say": f"the {combo.obj.replace('_', ' ')} please"})
    elif combo.kind == "execution":
        turns.append({"say": "try again"})
    return turns


def _stage(combo: _Combo, base_world: World, stow_in: str) -> World:
    world = base_world.clone()
    if combo.kind in ("vision", "feasibility", "multi_step"):
        transparent = combo.kind != "vision"
        _stow(world, combo.obj, stow_in, transparent=transparent)
    elif combo.kind == "execution":
        verb, arg = _first_step(combo)
        world.add_fault(FaultSpec(verb, arg, "fail_once", "actuator fault"))
    return world


def _run_combo(
    combo: _Combo, base_world: World, rng: random.Random, stow_in: str
) -> list[dict]:
    world = _stage(combo, base_world, stow_in)
    recorder = RecordingBackend(
        RuleBackend(world.vocabulary(), frozenset(_containers(world)))
    )
    session = Session(world, recorder, parse_mode="strict", max_recovery_rounds=4)
    if combo.kind == "multi_step":
        session.perception.hide(combo.obj)
    script = _script(combo, world, rng, stow_in)
    for turn in script:
        if "unhide" in turn:
            session.perception.unhide(turn["unhide"])
        session.handle_user(turn["say"])

    expected = _expected_shapes(combo.kind)
    if len(recorder.log) < len(expected):
        raise GenerationError(
            f"{combo.text!r} ({combo.kind}): planner answered "
            f"{len(recorder.log)} rounds, wanted {len(expected)}"
        )
    records = []
    for round_index, (shape, (record, reply)) in enumerate(
        zip(expected, recorder.log)
    ):
        parsed = parse_reply(reply, mode="strict")
        ok = (
            isinstance(parsed, Plan)
            if shape is Plan
            else isinstance(parsed, FailureReport) and parsed.kind is shape
        )
        if not ok:
            raise GenerationError(
                f"{combo.text!r} ({combo.kind}) round {round_index}: "
                f"wanted {shape}, planner said {reply!r}"
            )
        records.append(
            {
                "input": serialize(record),
                "output": f"{REPLY_TAG} {reply}",
                "meta": {
                    "task_family": combo.family,
                    "failure_kind": combo.kind,
                    "round": round_index,
                    "object": combo.obj,
                    "dest": combo.dest,
                    "phrasing": combo.phrasing,
                },
            }
        )
    return records


def generate(config: GenConfig | None = None) -> list[dict]:
    """Produce the full record list for a config, deterministically."""
    config = config or load_config()
    world = load_world(bundled_world_path(config.world))
    rng = random.Random(config.seed)
    combos = _build_combos(config, world)
    _assign_kinds(combos, config, rng, world)
    stow_candidates = [
        name
        for name, loc in sorted(world.locations.items())
        if loc.container and not loc.transparent
    ]
    if not stow_candidates:
        raise GenerationError("world has no closed container to stage misses in")
    records: list[dict] = []
    for i, combo in enumerate(combos):
        stow_in = stow_candidates[i % len(stow_candidates)]
        combo_rng = random.Random(config.seed * 1000003 + i)
        for record in _run_combo(combo, world, combo_rng, stow_in):
            record["meta"]["seed"] = config.seed
            record["meta"]["world"] = config.world
            records.append(record)
    return records


def write_jsonl(records: list[dict], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, sort_keys=True) + "\n")


def read_jsonl(path: str | Path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def validate_records(records: list[dict], world: World | None = None) -> list[str]:
    """Schema, grammar and label checks. Returns human-readable
    violation messages; an empty list means the file is clean.

    Label checking re-runs the rule policy on each record's query and
    demands the stored reply byte for byte, so any drift between a
    dataset and the engine that produced it is caught here.
    """
    world = world or load_world(bundled_world_path("apartment"))
    oracle = RuleBackend(world.vocabulary(), frozenset(_containers(world)))
    problems: list[str] = []
    for i, record in enumerate(records):
        where = f"record {i}"
        if set(record) != {"input", "output", "meta"}:
            problems.append(f"{where}: fields {sorted(record)}")
            continue
        meta = record["meta"]
        missing = {"task_family", "failure_kind", "round", "object", "seed"} - set(meta)
        if missing:
            problems.append(f"{where}: meta lacks {sorted(missing)}")
        if not 0 <= int(meta.get("round", 99)) <= 2:
            problems.append(f"{where}: round {meta.get('round')} out of range")
        try:
            frame = parse_prompt(record["input"])
        except ParseError as exc:
            problems.append(f"{where}: bad input frame: {exc}")
            continue
        output = record["output"]
        if not output.startswith(f"{REPLY_TAG} "):
            problems.append(f"{where}: output missing reply tag")
            continue
        reply = output[len(REPLY_TAG) + 1 :]
        try:
            parse_reply(reply, mode="strict", vocab=world.vocabulary())
        except ParseError as exc:
            problems.append(f"{where}: output does not parse: {exc}")
            continue
        if oracle.reply(frame) != reply:
            problems.append(f"{where}: label disagrees with the rule policy")
    return problems


def summarize(records: list[dict]) -> dict:
    by_kind: dict[str, int] = {}
    by_family: dict[str, int] = {}
    for record in records:
        meta = record["meta"]
        by_kind[meta["failure_kind"]] = by_kind.get(meta["failure_kind"], 0) + 1
        by_family[meta["task_family"]] = by_family.get(meta["task_family"], 0) + 1
    return {
        "records": len(records),
        "by_failure_kind": dict(sorted(by_kind.items())),
        "by_task_family": dict(sorted(by_family.items())),
    }
