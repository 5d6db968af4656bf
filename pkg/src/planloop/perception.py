"""Text-only camera: answers "where is X" queries about the scene in the
fixed sentence forms the planner protocol expects.

Objects inside a closed opaque container do not show up, and individual
instances can be blinded (hidden) to stage sensing failures.
"""

from __future__ import annotations

import re

from .world import World, WorldObject


def format_position(pose) -> str:
    return f"({pose.x:.2f}, {pose.y:.2f}, {pose.z:.2f})"


def extract_mentions(text: str, names) -> list[str]:
    """Vocabulary names mentioned in free text, in order of first
    occurrence. Underscored names match their spaced spelling; longer
    names shadow shorter ones on overlapping spans."""
    lowered = text.lower()
    spans: list[tuple[int, int, str]] = []
    for name in names:
        pattern = re.escape(name).replace("_", "[_ ]")
        for m in re.finditer(rf"(?<![a-z0-9_]){pattern}(?![a-z0-9_])", lowered):
            spans.append((m.start(), m.end(), name))
    spans.sort(key=lambda s: (s[0], -(s[1] - s[0])))
    chosen: list[str] = []
    covered_to = -1
    for start, end, name in spans:
        if start > covered_to:
            if name not in chosen:
                chosen.append(name)
            covered_to = end - 1
    return chosen


class Perception:
    """Scene query interface over one world."""

    def __init__(self, world: World, hidden: set[str] | None = None):
        self.world = world
        self.hidden = set(hidden or ())

    def hide(self, name: str) -> None:
        self.hidden.add(name)

    def unhide(self, name: str) -> None:
        self.hidden.discard(name)

    def _visible_matches(self, name: str) -> list[WorldObject]:
        return [
            o
            for o in self.world.find_objects(name)
            if o.name not in self.hidden and self.world.is_visible(o)
        ]

    def object_names(self) -> list[str]:
        vocab = self.world.vocabulary()
        return sorted(vocab.objects | frozenset(vocab.categories))

    def extract_objects(self, text: str) -> list[str]:
        return extract_mentions(text, self.object_names())

    def observe(self, names) -> str:
        """One clause per queried name, joined with semicolons.

        A unique match reports the instance name and its position, so a
        base or category query that narrows to one object names it.
        """
        clauses: list[str] = []
        for name in names:
            matches = self._visible_matches(name)
            if not matches:
                clauses.append(f"cannot find {name}")
            elif len(matches) == 1:
                obj = matches[0]
                clauses.append(f"found {obj.name} at {format_position(obj.pose)}")
            else:
                listed = ", ".join(sorted(o.name for o in matches))
                clauses.append(f"found {len(matches)} items matching {name}: {listed}")
        return "; ".join(clauses)

    def observe_text(self, text: str) -> str:
        return self.observe(self.extract_objects(text))
