import math

import pytest

from planloop.domain import ActionStep, Pose, SkillVerb
from planloop.world import (
    FaultSpec,
    REACH_RADIUS,
    SchemaError,
    bundled_world_path,
    load_world,
    load_world_data,
)


@pytest.fixture
def world():
    return load_world(bundled_world_path("apartment"))


def step(verb, *args):
    return ActionStep(verb, args)


MINIMAL = {
    "name": "t",
    "bounds": {"lo": [0, 0, 0], "hi": [4, 4, 2]},
    "robot": {"pose": [1.0, 1.0, 0.0]},
}


class TestLoading:
    def test_bundled_apartment(self, world):
        assert set(world.locations) == {
            "home",
            "table",
            "drawer",
            "cupboard",
            "counter",
            "shelf",
        }
        assert len(world.objects) == 10
        assert world.locations["drawer"].container
        assert not world.locations["drawer"].open

    def test_bundled_xl_has_thirty_objects(self):
        w = load_world(bundled_world_path("apartment_xl"))
        assert len(w.objects) == 30

    def test_vocabulary_includes_shared_bases(self, world):
        vocab = world.vocabulary()
        assert "cup" in vocab.objects
        assert "red_cup" in vocab.objects
        assert vocab.categories["drink"] == frozenset({"coke", "7up", "water"})

    def test_computed_approach_sits_south_of_the_table(self, world):
        a = world.locations["table"].approach
        assert (a.x, a.y) == (2.6, 2.9)
        assert math.isclose(a.yaw, math.pi / 2)

    def test_approach_skips_blocked_sides(self):
        data = dict(MINIMAL)
        data["locations"] = [
            {"name": "box", "footprint": {"lo": [1, 1, 0], "hi": [2, 2, 1]}},
            # Blocks the south candidate of "box".
            {"name": "wall", "footprint": {"lo": [0.5, 0.0, 0], "hi": [2.5, 0.9, 1]}},
        ]
        w = load_world_data(data)
        a = w.locations["box"].approach
        assert a.y > 2  # pushed to the north side

    def test_schema_error_names_the_key(self):
        data = dict(MINIMAL)
        data["locations"] = [{"name": "t", "footprint": {"lo": [0, 0, 0]}}]
        with pytest.raises(SchemaError) as exc:
            load_world_data(data)
        assert "locations[0].footprint" in str(exc.value)

    def test_duplicate_object_rejected(self):
        data = dict(MINIMAL)
        data["objects"] = [
            {"name": "cup", "pose": [1, 1, 0]},
            {"name": "cup", "pose": [2, 2, 0]},
        ]
        with pytest.raises(SchemaError):
            load_world_data(data)

    def test_inside_must_reference_a_container(self):
        data = dict(MINIMAL)
        data["locations"] = [
            {"name": "slab", "footprint": {"lo": [1, 1, 0], "hi": [2, 2, 1]}}
        ]
        data["objects"] = [{"name": "cup", "pose": [1.5, 1.5, 1], "inside": "slab"}]
        with pytest.raises(SchemaError) as exc:
            load_world_data(data)
        assert "inside" in str(exc.value)

    def test_out_of_bounds_object_rejected(self):
        data = dict(MINIMAL)
        data["objects"] = [{"name": "cup", "pose": [9, 1, 0]}]
        with pytest.raises(SchemaError):
            load_world_data(data)


class TestQueries:
    def test_find_by_exact_name(self, world):
        assert [o.name for o in world.find_objects("coke")] == ["coke"]

    def test_find_by_shared_base(self, world):
        assert [o.name for o in world.find_objects("cup")] == ["blue_cup", "red_cup"]

    def test_find_by_category(self, world):
        assert [o.name for o in world.find_objects("fruit")] == [
            "apple",
            "banana",
            "orange",
        ]

    def test_visibility_through_container_walls(self, world):
        world.objects["coke"].inside = "cupboard"
        assert not world.is_visible(world.objects["coke"])
        world.locations["cupboard"].transparent = True
        assert world.is_visible(world.objects["coke"])
        world.locations["cupboard"].transparent = False
        world.locations["cupboard"].open = True
        assert world.is_visible(world.objects["coke"])

    def test_solid_boxes_exclude_open_containers(self, world):
        lo, _ = world.solid_box_arrays()
        assert len(lo) == 5  # home is not solid
        world.locations["drawer"].open = True
        lo, _ = world.solid_box_arrays()
        assert len(lo) == 4

    def test_clone_isolates_mutation(self, world):
        twin = world.clone()
        twin.robot.pose = Pose(0.5, 0.5, 0.0)
        twin.objects["coke"].inside = "drawer"
        assert world.robot.pose != twin.robot.pose
        assert world.objects["coke"].inside is None


class TestExecution:
    def test_fetch_sequence(self, world):
        plan = [
            step(SkillVerb.PICK, "orange"),
            step(SkillVerb.GO, "home"),
            step(SkillVerb.PLACE, "orange"),
        ]
        events = [world.apply(s) for s in plan]
        assert all(e.ok for e in events)
        orange = world.objects["orange"]
        assert orange.pose.z == 0.0
        # Dropped just ahead of the home approach pose, inside the mat.
        hf = world.locations["home"].footprint
        assert hf.lo[0] <= orange.pose.x <= hf.hi[0]
        assert hf.lo[1] <= orange.pose.y <= hf.hi[1]
        assert world.robot.holding is None

    def test_pick_out_of_reach_fails_clean(self, world):
        world.apply(step(SkillVerb.GO, "shelf"))
        before = world.clone()
        ev = world.apply(step(SkillVerb.PICK, "orange"))
        assert not ev.ok
        assert "out of reach" in ev.detail
        assert world == before

    def test_pick_inside_closed_container(self, world):
        world.objects["coke"].inside = "cupboard"
        world.objects["coke"].pose = world.locations["cupboard"].pose
        ev = world.apply(step(SkillVerb.PICK, "coke"))
        assert not ev.ok
        assert "closed" in ev.detail

    def test_open_then_pick_from_container(self, world):
        world.objects["coke"].inside = "cupboard"
        world.objects["coke"].pose = world.locations["cupboard"].pose
        for s in (
            step(SkillVerb.GO, "cupboard"),
            step(SkillVerb.OPEN, "cupboard"),
            step(SkillVerb.PICK, "coke"),
        ):
            assert world.apply(s).ok
        assert world.robot.holding == "coke"

    def test_place_into_closed_container_fails(self, world):
        world.apply(step(SkillVerb.PICK, "sponge"))
        world.apply(step(SkillVerb.GO, "drawer"))
        ev = world.apply(step(SkillVerb.PLACE, "sponge", "drawer"))
        assert not ev.ok and "closed" in ev.detail

    def test_stow_in_drawer_sequence(self, world):
        for s in (
            step(SkillVerb.GO, "drawer"),
            step(SkillVerb.OPEN, "drawer"),
            step(SkillVerb.PICK, "sponge"),
            step(SkillVerb.PLACE, "sponge", "drawer"),
            step(SkillVerb.CLOSE, "drawer"),
        ):
            assert world.apply(s).ok, s
        sponge = world.objects["sponge"]
        assert sponge.inside == "drawer"
        assert not world.is_visible(sponge)

    def test_ambiguous_pick_fails(self, world):
        ev = world.apply(step(SkillVerb.PICK, "cup"))
        assert not ev.ok
        assert "2 objects" in ev.detail

    def test_pick_while_holding_fails(self, world):
        assert world.apply(step(SkillVerb.PICK, "coke")).ok
        ev = world.apply(step(SkillVerb.PICK, "orange"))
        assert not ev.ok and "already holding" in ev.detail

    def test_open_requires_a_container(self, world):
        ev = world.apply(step(SkillVerb.OPEN, "table"))
        assert not ev.ok and "not a container" in ev.detail

    def test_held_object_rides_along(self, world):
        world.apply(step(SkillVerb.PICK, "banana"))
        world.apply(step(SkillVerb.GO, "counter"))
        b = world.objects["banana"]
        assert (b.pose.x, b.pose.y) == (
            world.robot.pose.x,
            world.robot.pose.y,
        )

    def test_turn_and_search_only_rotate(self, world):
        before = world.robot.pose
        assert world.apply(step(SkillVerb.TURN, "left")).ok
        assert world.apply(step(SkillVerb.SEARCH, "coke")).ok
        after = world.robot.pose
        assert (before.x, before.y) == (after.x, after.y)
        assert before.yaw != after.yaw

    def test_turn_toward_location_faces_it(self, world):
        world.apply(step(SkillVerb.TURN, "cupboard"))
        c = world.locations["cupboard"].footprint.center
        expect = math.atan2(c[1] - world.robot.pose.y, c[0] - world.robot.pose.x)
        assert math.isclose(world.robot.pose.yaw, expect)


class TestFaults:
    def test_fail_once_clears_after_firing(self, world):
        world.add_fault(FaultSpec(SkillVerb.PICK, "orange", "fail_once", "slip"))
        first = world.apply(step(SkillVerb.PICK, "orange"))
        assert not first.ok and first.detail == "slip"
        assert world.apply(step(SkillVerb.PICK, "orange")).ok

    def test_fail_always_keeps_firing(self, world):
        world.add_fault(FaultSpec(SkillVerb.PICK, "orange", "fail_always"))
        for _ in range(3):
            assert not world.apply(step(SkillVerb.PICK, "orange")).ok

    def test_fault_arg_narrows_the_match(self, world):
        world.add_fault(FaultSpec(SkillVerb.PICK, "orange", "fail_always"))
        assert world.apply(step(SkillVerb.PICK, "coke")).ok

    def test_reach_radius_is_inclusive_enough_for_the_scene(self, world):
        # Every declared object is pickable from its surface's approach.
        for obj in world.objects.values():
            d = math.hypot(
                obj.pose.x - world.robot.pose.x, obj.pose.y - world.robot.pose.y
            )
            if d <= REACH_RADIUS:
                w = world.clone()
                assert w.apply(step(SkillVerb.PICK, obj.name)).ok
