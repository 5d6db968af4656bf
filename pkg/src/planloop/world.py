"""Simulated apartment-style scene: named locations with box footprints,
movable objects, a mobile base with one gripper.

Execution is kinematic. go() teleports to a location's approach pose;
manipulation requires the target within arm reach (planar) and honors
container open/closed state. A step either fully applies or fully fails;
the scene never ends up half-mutated. Injected faults force failures for
drills and tests.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .domain import ActionStep, Box, Pose, SkillVerb, TURN_DIRECTIONS, Vocabulary

# Arm reach from base, planar.
REACH_RADIUS = 0.8
# How far ahead of the base a one-arg place() drops its object.
DROP_AHEAD = 0.4
# Held objects ride at this height.
CARRY_HEIGHT = 0.8
# Gap between a footprint and its computed approach pose.
APPROACH_OFFSET = 0.5


class SchemaError(Exception):
    """World file violates the schema. ``path`` points at the bad key."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


@dataclass
class Location:
    name: str
    footprint: Box
    pose: Pose
    approach: Pose
    container: bool = False
    solid: bool = True
    open: bool = False
    transparent: bool = False


@dataclass
class WorldObject:
    name: str
    pose: Pose
    base: str
    category: str | None = None
    inside: str | None = None


@dataclass
class RobotState:
    pose: Pose
    holding: str | None = None


@dataclass
class ExecutionEvent:
    step: ActionStep
    outcome: str  # "done" | "failed"
    detail: str = ""

    @property
    def ok(self) -> bool:
        return self.outcome == "done"


@dataclass
class FaultSpec:
    """Forces a matching step to fail. ``arg`` narrows to one argument
    value; mode "fail_once" clears after firing."""

    verb: SkillVerb
    arg: str | None = None
    mode: str = "fail_once"
    detail: str = "actuator fault"

    def matches(self, step: ActionStep) -> bool:
        if step.verb is not self.verb:
            return False
        return self.arg is None or (step.args and step.args[0] == self.arg)


def _planar(a: Pose, b: tuple[float, float]) -> float:
    return math.hypot(a.x - b[0], a.y - b[1])


def _planar_to_box(p: Pose, box: Box) -> float:
    dx = max(box.lo[0] - p.x, 0.0, p.x - box.hi[0])
    dy = max(box.lo[1] - p.y, 0.0, p.y - box.hi[1])
    return math.hypot(dx, dy)


@dataclass
class World:
    name: str
    bounds: Box
    locations: dict[str, Location]
    objects: dict[str, WorldObject]
    robot: RobotState
    faults: list[FaultSpec] = field(default_factory=list)

    # -- queries ------------------------------------------------------------

    def vocabulary(self) -> Vocabulary:
        names = set(self.objects)
        bases = {o.base for o in self.objects.values()}
        categories: dict[str, set[str]] = {}
        for o in self.objects.values():
            if o.category:
                categories.setdefault(o.category, set()).add(o.name)
        return Vocabulary(
            objects=frozenset(names | bases),
            locations=frozenset(self.locations),
            categories={k: frozenset(v) for k, v in categories.items()},
        )

    def solid_box_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """Obstacle boxes for path checks. An open container exposes its
        interior, so its shell drops out of the set."""
        boxes = [
            loc.footprint
            for loc in self.locations.values()
            if loc.solid and not (loc.container and loc.open)
        ]
        lo = np.array([b.lo for b in boxes], dtype=float).reshape(-1, 3)
        hi = np.array([b.hi for b in boxes], dtype=float).reshape(-1, 3)
        return lo, hi

    def open_state(self) -> tuple[tuple[str, bool], ...]:
        return tuple(
            (name, loc.open)
            for name, loc in sorted(self.locations.items())
            if loc.container
        )

    def find_objects(self, name: str) -> list[WorldObject]:
        """Instances answering to a name: exact, shared base, or category."""
        if name in self.objects:
            return [self.objects[name]]
        hits = [o for o in self.objects.values() if o.base == name]
        if hits:
            return sorted(hits, key=lambda o: o.name)
        return sorted(
            (o for o in self.objects.values() if o.category == name),
            key=lambda o: o.name,
        )

    def is_visible(self, obj: WorldObject) -> bool:
        if obj.inside is None:
            return True
        loc = self.locations[obj.inside]
        return loc.open or loc.transparent

    def clone(self) -> "World":
        return copy.deepcopy(self)

    def snapshot(self) -> dict:
        """Plain-data view of the scene for serialization."""
        return {
            "name": self.name,
            "bounds": {"lo": list(self.bounds.lo), "hi": list(self.bounds.hi)},
            "robot": {
                "pose": [
                    self.robot.pose.x,
                    self.robot.pose.y,
                    self.robot.pose.z,
                    self.robot.pose.yaw,
                ],
                "holding": self.robot.holding,
            },
            "locations": [
                {
                    "name": loc.name,
                    "footprint": {"lo": list(loc.footprint.lo), "hi": list(loc.footprint.hi)},
                    "container": loc.container,
                    "open": loc.open,
                    "solid": loc.solid,
                    "approach": [loc.approach.x, loc.approach.y],
                }
                for loc in self.locations.values()
            ],
            "objects": [
                {
                    "name": o.name,
                    "base": o.base,
                    "category": o.category,
                    "pose": [o.pose.x, o.pose.y, o.pose.z],
                    "inside": o.inside,
                    "visible": self.is_visible(o),
                }
                for o in self.objects.values()
            ],
        }

    # -- execution ----------------------------------------------------------

    def add_fault(self, fault: FaultSpec) -> None:
        self.faults.append(fault)

    def _fault_for(self, step: ActionStep) -> FaultSpec | None:
        for f in self.faults:
            if f.matches(step):
                return f
        return None

    def _fail(self, step: ActionStep, detail: str) -> ExecutionEvent:
        return ExecutionEvent(step, "failed", detail)

    def _done(self, step: ActionStep) -> ExecutionEvent:
        return ExecutionEvent(step, "done")

    def _resolve_one(self, name: str) -> tuple[WorldObject | None, str]:
        hits = self.find_objects(name)
        if not hits:
            return None, f"no object named {name}"
        if len(hits) > 1:
            return None, f"{len(hits)} objects answer to {name}"
        return hits[0], ""

    def _carry_held(self) -> None:
        if self.robot.holding:
            held = self.objects[self.robot.holding]
            held.pose = Pose(
                self.robot.pose.x, self.robot.pose.y, CARRY_HEIGHT, self.robot.pose.yaw
            )

    def apply(self, step: ActionStep) -> ExecutionEvent:
        """Execute one step against the scene. On failure nothing moves."""
        fault = self._fault_for(step)
        if fault is not None:
            if fault.mode == "fail_once":
                self.faults.remove(fault)
            return self._fail(step, fault.detail)
        handler = {
            SkillVerb.GO: self._do_go,
            SkillVerb.PICK: self._do_pick,
            SkillVerb.PLACE: self._do_place,
            SkillVerb.OPEN: self._do_open_close,
            SkillVerb.CLOSE: self._do_open_close,
            SkillVerb.SEARCH: self._do_search,
            SkillVerb.TURN: self._do_turn,
        }[step.verb]
        return handler(step)

    def _do_go(self, step: ActionStep) -> ExecutionEvent:
        loc = self.locations.get(step.args[0])
        if loc is None:
            return self._fail(step, f"no location named {step.args[0]}")
        self.robot.pose = loc.approach
        self._carry_held()
        return self._done(step)

    def _do_pick(self, step: ActionStep) -> ExecutionEvent:
        if self.robot.holding:
            return self._fail(step, f"already holding {self.robot.holding}")
        obj, why = self._resolve_one(step.args[0])
        if obj is None:
            return self._fail(step, why)
        if obj.inside is not None:
            loc = self.locations[obj.inside]
            if not loc.open:
                return self._fail(step, f"{obj.name} is inside the closed {loc.name}")
        if _planar(self.robot.pose, (obj.pose.x, obj.pose.y)) > REACH_RADIUS:
            return self._fail(step, f"{obj.name} is out of reach")
        obj.inside = None
        self.robot.holding = obj.name
        self._carry_held()
        return self._done(step)

    def _do_place(self, step: ActionStep) -> ExecutionEvent:
        obj, why = self._resolve_one(step.args[0])
        if obj is None:
            return self._fail(step, why)
        if self.robot.holding != obj.name:
            return self._fail(step, f"not holding {obj.name}")
        if len(step.args) == 1:
            x = self.robot.pose.x + DROP_AHEAD * math.cos(self.robot.pose.yaw)
            y = self.robot.pose.y + DROP_AHEAD * math.sin(self.robot.pose.yaw)
            obj.pose = Pose(x, y, 0.0)
            obj.inside = None
            self.robot.holding = None
            return self._done(step)
        loc = self.locations.get(step.args[1])
        if loc is None:
            return self._fail(step, f"no location named {step.args[1]}")
        if _planar(self.robot.pose, (loc.pose.x, loc.pose.y)) > REACH_RADIUS:
            return self._fail(step, f"{loc.name} is out of reach")
        if loc.container and not loc.open:
            return self._fail(step, f"{loc.name} is closed")
        obj.pose = loc.pose
        obj.inside = loc.name if loc.container else None
        self.robot.holding = None
        return self._done(step)

    def _do_open_close(self, step: ActionStep) -> ExecutionEvent:
        loc = self.locations.get(step.args[0])
        if loc is None:
            return self._fail(step, f"no location named {step.args[0]}")
        if not loc.container:
            return self._fail(step, f"{loc.name} is not a container")
        if _planar_to_box(self.robot.pose, loc.footprint) > REACH_RADIUS:
            return self._fail(step, f"{loc.name} is out of reach")
        loc.open = step.verb is SkillVerb.OPEN
        return self._done(step)

    def _do_search(self, step: ActionStep) -> ExecutionEvent:
        p = self.robot.pose
        self.robot.pose = Pose(p.x, p.y, p.z, p.yaw + math.pi / 2)
        return self._done(step)

    def _do_turn(self, step: ActionStep) -> ExecutionEvent:
        p = self.robot.pose
        target = step.args[0]
        if target in TURN_DIRECTIONS:
            delta = math.pi / 2 if target == "left" else -math.pi / 2
            self.robot.pose = Pose(p.x, p.y, p.z, p.yaw + delta)
            return self._done(step)
        loc = self.locations.get(target)
        if loc is None:
            return self._fail(step, f"no location named {target}")
        c = loc.footprint.center
        yaw = math.atan2(c[1] - p.y, c[0] - p.x)
        self.robot.pose = Pose(p.x, p.y, p.z, yaw)
        return self._done(step)


# -- loading ----------------------------------------------------------------


def _as_floats(raw, path: str, n: int) -> tuple[float, ...]:
    if not isinstance(raw, list) or len(raw) != n:
        raise SchemaError(path, f"expected a list of {n} numbers")
    try:
        return tuple(float(v) for v in raw)
    except (TypeError, ValueError) as exc:
        raise SchemaError(path, "expected numbers") from exc


def _as_box(raw, path: str) -> Box:
    if not isinstance(raw, dict) or set(raw) != {"lo", "hi"}:
        raise SchemaError(path, "expected a table with lo and hi")
    lo = _as_floats(raw["lo"], f"{path}.lo", 3)
    hi = _as_floats(raw["hi"], f"{path}.hi", 3)
    try:
        return Box(lo, hi)
    except ValueError as exc:
        raise SchemaError(path, str(exc)) from exc


def _as_pose(raw, path: str) -> Pose:
    if not isinstance(raw, list) or len(raw) not in (3, 4):
        raise SchemaError(path, "expected [x, y, z] or [x, y, z, yaw]")
    vals = _as_floats(raw, path, len(raw))
    return Pose(*vals)


def _compute_approach(
    footprint: Box, bounds: Box, others: list[Box], path: str
) -> Pose:
    cx, cy, _ = footprint.center
    candidates = [
        (cx, footprint.lo[1] - APPROACH_OFFSET),  # south
        (cx, footprint.hi[1] + APPROACH_OFFSET),  # north
        (footprint.lo[0] - APPROACH_OFFSET, cy),  # west
        (footprint.hi[0] + APPROACH_OFFSET, cy),  # east
    ]
    for x, y in candidates:
        if not bounds.contains((x, y, 0.0)):
            continue
        if any(
            b.lo[0] <= x <= b.hi[0] and b.lo[1] <= y <= b.hi[1] for b in others
        ):
            continue
        return Pose(x, y, 0.0, math.atan2(cy - y, cx - x))
    raise SchemaError(path, "no free approach pose beside the footprint")


def _require(table: dict, key: str, path: str):
    if key not in table:
        raise SchemaError(f"{path}.{key}", "missing")
    return table[key]


def load_world_data(data: dict, origin: str = "world") -> World:
    name = data.get("name", "unnamed")
    bounds = _as_box(_require(data, "bounds", origin), f"{origin}.bounds")

    loc_tables = data.get("locations", [])
    solid_footprints = []
    parsed = []
    for i, tbl in enumerate(loc_tables):
        path = f"{origin}.locations[{i}]"
        lname = _require(tbl, "name", path)
        footprint = _as_box(_require(tbl, "footprint", path), f"{path}.footprint")
        for ax in range(3):
            if footprint.lo[ax] < bounds.lo[ax] or footprint.hi[ax] > bounds.hi[ax]:
                raise SchemaError(f"{path}.footprint", "outside world bounds")
        container = bool(tbl.get("container", False))
        solid = bool(tbl.get("solid", True))
        parsed.append((path, lname, footprint, tbl, container, solid))
        if solid:
            solid_footprints.append(footprint)

    locations: dict[str, Location] = {}
    for path, lname, footprint, tbl, container, solid in parsed:
        if lname in locations:
            raise SchemaError(f"{path}.name", f"duplicate location {lname}")
        if "pose" in tbl:
            pose = _as_pose(tbl["pose"], f"{path}.pose")
        else:
            cx, cy, _ = footprint.center
            z = footprint.center[2] if container else footprint.hi[2]
            pose = Pose(cx, cy, z)
        if "approach" in tbl:
            ax, ay = _as_floats(tbl["approach"], f"{path}.approach", 2)
            cx, cy, _ = footprint.center
            approach = Pose(ax, ay, 0.0, math.atan2(cy - ay, cx - ax))
        else:
            others = [b for b in solid_footprints if b is not footprint]
            approach = _compute_approach(footprint, bounds, others, path)
        locations[lname] = Location(
            name=lname,
            footprint=footprint,
            pose=pose,
            approach=approach,
            container=container,
            solid=solid,
            open=bool(tbl.get("open", False)),
            transparent=bool(tbl.get("transparent", False)),
        )

    objects: dict[str, WorldObject] = {}
    for i, tbl in enumerate(data.get("objects", [])):
        path = f"{origin}.objects[{i}]"
        oname = _require(tbl, "name", path)
        if oname in objects:
            raise SchemaError(f"{path}.name", f"duplicate object {oname}")
        pose = _as_pose(_require(tbl, "pose", path), f"{path}.pose")
        if not bounds.contains(pose.xyz):
            raise SchemaError(f"{path}.pose", "outside world bounds")
        inside = tbl.get("inside")
        if inside is not None and (
            inside not in locations or not locations[inside].container
        ):
            raise SchemaError(f"{path}.inside", f"{inside!r} is not a container")
        objects[oname] = WorldObject(
            name=oname,
            pose=pose,
            base=tbl.get("base", oname),
            category=tbl.get("category"),
            inside=inside,
        )

    robot_tbl = _require(data, "robot", origin)
    rpose = _as_pose(_require(robot_tbl, "pose", f"{origin}.robot"), f"{origin}.robot.pose")
    if not bounds.contains(rpose.xyz):
        raise SchemaError(f"{origin}.robot.pose", "outside world bounds")

    world = World(
        name=name,
        bounds=bounds,
        locations=locations,
        objects=objects,
        robot=RobotState(pose=rpose),
    )
    try:
        world.vocabulary()
    except ValueError as exc:
        raise SchemaError(origin, str(exc)) from exc
    return world


def load_world(path: str | Path) -> World:
    p = Path(path)
    with open(p, "rb") as fh:
        try:
            data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise SchemaError(str(p), f"invalid TOML: {exc}") from exc
    return load_world_data(data, origin=p.name)


def bundled_world_path(name: str) -> Path:
    """Path of a world file shipped with the package."""
    from importlib import resources

    p = resources.files("planloop") / "data" / f"{name}.world"
    return Path(str(p))
