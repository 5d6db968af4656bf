import { describe, expect, it } from "vitest";

import {
  CATEGORY_COLORS,
  HIDDEN_OBJECT_COLOR,
  WorldView,
} from "../src/worldview.js";
import { snapshot } from "./helpers.js";

interface DrawOp {
  op: string;
  args: unknown[];
  fillStyle: string;
  strokeStyle: string;
  globalAlpha: number;
  dash: number[];
}

// Records each draw call together with the style active at the time,
// which is all the renderer tests need to see.
class StubContext {
  fillStyle = "";
  strokeStyle = "";
  lineWidth = 1;
  font = "";
  globalAlpha = 1;
  ops: DrawOp[] = [];
  private dash: number[] = [];
  private stack: Array<{ fillStyle: string; strokeStyle: string; globalAlpha: number }> = [];

  private record(op: string, ...args: unknown[]): void {
    this.ops.push({
      op,
      args,
      fillStyle: String(this.fillStyle),
      strokeStyle: String(this.strokeStyle),
      globalAlpha: this.globalAlpha,
      dash: [...this.dash],
    });
  }

  clearRect(...args: unknown[]): void { this.record("clearRect", ...args); }
  fillRect(...args: unknown[]): void { this.record("fillRect", ...args); }
  strokeRect(...args: unknown[]): void { this.record("strokeRect", ...args); }
  fillText(...args: unknown[]): void { this.record("fillText", ...args); }
  beginPath(): void { this.record("beginPath"); }
  arc(...args: unknown[]): void { this.record("arc", ...args); }
  fill(): void { this.record("fill"); }
  stroke(): void { this.record("stroke"); }
  moveTo(...args: unknown[]): void { this.record("moveTo", ...args); }
  lineTo(...args: unknown[]): void { this.record("lineTo", ...args); }

  setLineDash(segments: number[]): void {
    this.dash = [...segments];
  }

  save(): void {
    this.stack.push({
      fillStyle: String(this.fillStyle),
      strokeStyle: String(this.strokeStyle),
      globalAlpha: this.globalAlpha,
    });
  }

  restore(): void {
    const saved = this.stack.pop();
    if (saved) {
      this.fillStyle = saved.fillStyle;
      this.strokeStyle = saved.strokeStyle;
      this.globalAlpha = saved.globalAlpha;
    }
  }
}

function makeView(): { view: WorldView; ctx: StubContext } {
  const ctx = new StubContext();
  const canvas = { width: 420, height: 420 } as HTMLCanvasElement;
  const view = new WorldView(canvas, ctx as unknown as CanvasRenderingContext2D);
  return { view, ctx };
}

function arcAt(ctx: StubContext, x: number, y: number): DrawOp | undefined {
  return ctx.ops.find(
    (op) =>
      op.op === "arc" &&
      Math.abs((op.args[0] as number) - x) < 0.5 &&
      Math.abs((op.args[1] as number) - y) < 0.5,
  );
}

describe("WorldView", () => {
  it("greys out objects hidden inside closed containers", () => {
    const { view, ctx } = makeView();
    const world = snapshot();
    view.render(world);
    const [hx, hy] = view.toCanvas(4.5, 4);
    const hidden = arcAt(ctx, hx, hy);
    expect(hidden).toBeDefined();
    expect(hidden?.fillStyle).toBe(HIDDEN_OBJECT_COLOR);
    expect(hidden?.globalAlpha).toBeLessThan(1);
  });

  it("colors visible objects by category", () => {
    const { view, ctx } = makeView();
    view.render(snapshot());
    const [cx, cy] = view.toCanvas(1.5, 3.5);
    const coke = arcAt(ctx, cx, cy);
    expect(coke?.fillStyle).toBe(CATEGORY_COLORS["drink"]);
    expect(coke?.globalAlpha).toBe(1);
  });

  it("draws the robot at its pose with a heading tick", () => {
    const { view, ctx } = makeView();
    view.render(snapshot());
    const [rx, ry] = view.toCanvas(3, 1);
    const robot = ctx.ops.find(
      (op) => op.op === "arc" && (op.args[2] as number) === 8,
    );
    expect(robot).toBeDefined();
    expect(robot?.args[0]).toBeCloseTo(rx, 1);
    expect(robot?.args[1]).toBeCloseTo(ry, 1);
    const tick = ctx.ops.find((op) => op.op === "lineTo");
    expect(tick).toBeDefined();
  });

  it("outlines closed containers with dashes and open zones solid", () => {
    const { view, ctx } = makeView();
    view.render(snapshot());
    const dashed = ctx.ops.filter((op) => op.op === "strokeRect" && op.dash.length > 0);
    expect(dashed).toHaveLength(1);
    const labels = ctx.ops
      .filter((op) => op.op === "fillText")
      .map((op) => String(op.args[0]));
    expect(labels).toContain("cupboard (closed)");
    expect(labels).toContain("table");
  });

  it("flips the y axis so larger world y is higher on screen", () => {
    const { view } = makeView();
    view.render(snapshot());
    const [, lowY] = view.toCanvas(3, 1);
    const [, highY] = view.toCanvas(3, 4);
    expect(highY).toBeLessThan(lowY);
  });

  it("renders a placeholder when there is no snapshot yet", () => {
    const { view, ctx } = makeView();
    view.render(null);
    expect(ctx.ops.some((op) => op.op === "arc")).toBe(false);
    const texts = ctx.ops
      .filter((op) => op.op === "fillText")
      .map((op) => String(op.args[0]));
    expect(texts).toContain("no world yet");
  });
});
