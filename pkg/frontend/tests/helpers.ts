import type { ServerEvent, WorldSnapshot } from "../src/events.js";

export function snapshot(over: Partial<WorldSnapshot> = {}): WorldSnapshot {
  return {
    name: "test",
    bounds: { lo: [0, 0, 0], hi: [6, 5, 2] },
    robot: { pose: [3, 1, 0, 1.57], holding: null },
    locations: [
      {
        name: "table",
        footprint: { lo: [1, 3, 0], hi: [2.2, 4, 0.8] },
        container: false,
        open: true,
        solid: true,
        approach: [1.6, 2.6],
      },
      {
        name: "cupboard",
        footprint: { lo: [4, 3.5, 0], hi: [5, 4.5, 1.8] },
        container: true,
        open: false,
        solid: true,
        approach: [4.5, 3.1],
      },
    ],
    objects: [
      {
        name: "coke",
        base: "coke",
        category: "drink",
        pose: [1.5, 3.5, 0.85],
        inside: null,
        visible: true,
      },
      {
        name: "banana",
        base: "banana",
        category: "fruit",
        pose: [4.5, 4, 1.0],
        inside: "cupboard",
        visible: false,
      },
    ],
    ...over,
  };
}

type EventOf<T extends ServerEvent["type"]> = Extract<ServerEvent, { type: T }>;

export function ev<T extends ServerEvent["type"]>(
  seq: number,
  type: T,
  data: EventOf<T>["data"],
): EventOf<T> {
  return { seq, type, data } as EventOf<T>;
}
