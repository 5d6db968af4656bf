// Top-down 2D view of the world snapshot. Everything lives on the
// floor plane, so x/y plus a heading is the whole picture.

import type { WorldSnapshot } from "./events.js";

const MARGIN = 18;

export const CATEGORY_COLORS: Record<string, string> = {
  fruit: "#e8a33d",
  drink: "#4a90d9",
  dish: "#c96a6a",
  tool: "#5aa070",
  cup: "#9a6fc0",
};

export const DEFAULT_OBJECT_COLOR = "#888888";
export const HIDDEN_OBJECT_COLOR = "#b5b5b5";

const SURFACE_FILL = "#e8e4da";
const CONTAINER_FILL = "#d4dde8";
const ZONE_STROKE = "#9a948a";
const ROBOT_COLOR = "#2b2b2b";

export class WorldView {
  private readonly ctx: CanvasRenderingContext2D;
  private scale = 1;
  private originX = 0;
  private originY = 0;
  private spanY = 0;

  constructor(
    private readonly canvas: HTMLCanvasElement,
    ctx?: CanvasRenderingContext2D,
  ) {
    const context = ctx ?? canvas.getContext("2d");
    if (!context) throw new Error("2D canvas context unavailable");
    this.ctx = context;
  }

  /** World (x, y) to canvas pixels, y axis flipped. */
  toCanvas(x: number, y: number): [number, number] {
    return [
      MARGIN + (x - this.originX) * this.scale,
      MARGIN + (this.spanY - (y - this.originY)) * this.scale,
    ];
  }

  render(snapshot: WorldSnapshot | null): void {
    const ctx = this.ctx;
    ctx.clearRect(0, 0, this.canvas.width, this.canvas.height);
    if (!snapshot) {
      ctx.fillStyle = "#777777";
      ctx.font = "13px sans-serif";
      ctx.fillText("no world yet", MARGIN, MARGIN + 13);
      return;
    }
    this.fit(snapshot);
    this.drawBounds(snapshot);
    for (const loc of snapshot.locations) this.drawLocation(loc);
    for (const obj of snapshot.objects) this.drawObject(obj);
    this.drawRobot(snapshot);
  }

  private fit(snapshot: WorldSnapshot): void {
    const [lox, loy] = snapshot.bounds.lo;
    const [hix, hiy] = snapshot.bounds.hi;
    const spanX = (hix ?? 1) - (lox ?? 0);
    this.spanY = (hiy ?? 1) - (loy ?? 0);
    this.originX = lox ?? 0;
    this.originY = loy ?? 0;
    this.scale = Math.min(
      (this.canvas.width - 2 * MARGIN) / Math.max(spanX, 0.001),
      (this.canvas.height - 2 * MARGIN) / Math.max(this.spanY, 0.001),
    );
  }

  private rect(lo: number[], hi: number[]): [number, number, number, number] {
    const [x0, y0] = this.toCanvas(lo[0] ?? 0, lo[1] ?? 0);
    const [x1, y1] = this.toCanvas(hi[0] ?? 0, hi[1] ?? 0);
    return [x0, y1, x1 - x0, y0 - y1];
  }

  private drawBounds(snapshot: WorldSnapshot): void {
    const ctx = this.ctx;
    const [x, y, w, h] = this.rect(snapshot.bounds.lo, snapshot.bounds.hi);
    ctx.strokeStyle = "#555555";
    ctx.lineWidth = 1.5;
    ctx.setLineDash([]);
    ctx.strokeRect(x, y, w, h);
  }

  private drawLocation(loc: WorldSnapshot["locations"][number]): void {
    const ctx = this.ctx;
    const [x, y, w, h] = this.rect(loc.footprint.lo, loc.footprint.hi);
    if (loc.solid || loc.container) {
      ctx.fillStyle = loc.container ? CONTAINER_FILL : SURFACE_FILL;
      ctx.fillRect(x, y, w, h);
    }
    ctx.strokeStyle = ZONE_STROKE;
    ctx.lineWidth = 1;
    // closed containers get a dashed outline so their state is readable
    ctx.setLineDash(loc.container && !loc.open ? [4, 3] : []);
    ctx.strokeRect(x, y, w, h);
    ctx.setLineDash([]);
    ctx.fillStyle = "#444444";
    ctx.font = "11px sans-serif";
    const label = loc.container ? `${loc.name} (${loc.open ? "open" : "closed"})` : loc.name;
    ctx.fillText(label, x + 3, y + 12);
  }

  private drawObject(obj: WorldSnapshot["objects"][number]): void {
    const ctx = this.ctx;
    const [cx, cy] = this.toCanvas(obj.pose[0] ?? 0, obj.pose[1] ?? 0);
    ctx.save();
    if (!obj.visible) {
      ctx.globalAlpha = 0.45;
      ctx.fillStyle = HIDDEN_OBJECT_COLOR;
    } else {
      ctx.fillStyle = CATEGORY_COLORS[obj.category] ?? DEFAULT_OBJECT_COLOR;
    }
    ctx.beginPath();
    ctx.arc(cx, cy, 6, 0, Math.PI * 2);
    ctx.fill();
    ctx.font = "10px sans-serif";
    ctx.fillText(obj.name, cx + 8, cy + 3);
    ctx.restore();
  }

  private drawRobot(snapshot: WorldSnapshot): void {
    const ctx = this.ctx;
    const [px, py, , yaw] = snapshot.robot.pose;
    const [cx, cy] = this.toCanvas(px ?? 0, py ?? 0);
    ctx.fillStyle = ROBOT_COLOR;
    ctx.beginPath();
    ctx.arc(cx, cy, 8, 0, Math.PI * 2);
    ctx.fill();
    // heading tick; canvas y runs downward, world y upward
    const heading = yaw ?? 0;
    ctx.strokeStyle = ROBOT_COLOR;
    ctx.lineWidth = 2;
    ctx.beginPath();
    ctx.moveTo(cx, cy);
    ctx.lineTo(cx + 14 * Math.cos(heading), cy - 14 * Math.sin(heading));
    ctx.stroke();
    if (snapshot.robot.holding) {
      ctx.font = "10px sans-serif";
      ctx.fillText(`holding ${snapshot.robot.holding}`, cx + 10, cy + 14);
    }
  }
}
