import { jointPosition } from "./geometry";
import type { Label2D } from "./types";

/** World-units <-> canvas-pixels mapping for the annotation canvas. */
export interface View2D {
  scale: number; // pixels per dataset unit
  cx: number; // canvas x of world origin
  cy: number; // canvas y of world origin
}

export function defaultView(canvas: { width: number; height: number }): View2D {
  return { scale: canvas.height / 32, cx: canvas.width / 2, cy: canvas.height / 2 };
}

export function toCanvas(view: View2D, u: number, v: number): [number, number] {
  return [view.cx + u * view.scale, view.cy - v * view.scale];
}

export function toWorld(view: View2D, px: number, py: number): [number, number] {
  return [(px - view.cx) / view.scale, (view.cy - py) / view.scale];
}

/** Click-to-label annotation surface with an optional backdrop image and
 * the reconstructed pose's reprojected joints overlaid. */
export class AnnotationBoard {
  readonly labels = new Map<number, Label2D>();
  private image: HTMLImageElement | null = null;
  private overlayPose: number[] | null = null;
  view: View2D;

  constructor(private canvas: HTMLCanvasElement) {
    this.view = defaultView(canvas);
  }

  setImage(image: HTMLImageElement | null): void {
    this.image = image;
    this.draw();
  }

  setLabel(joint: number, u: number, v: number): void {
    this.labels.set(joint, { joint, u, v });
    this.draw();
  }

  removeLabel(joint: number): void {
    this.labels.delete(joint);
    this.draw();
  }

  clear(): void {
    this.labels.clear();
    this.overlayPose = null;
    this.draw();
  }

  labelList(): Label2D[] {
    return [...this.labels.values()];
  }

  setOverlayPose(pose: number[] | null): void {
    this.overlayPose = pose;
    this.draw();
  }

  clickAt(px: number, py: number, joint: number): void {
    const [u, v] = toWorld(this.view, px, py);
    this.setLabel(joint, u, v);
  }

  draw(): void {
    const ctx = this.canvas.getContext("2d")!;
    ctx.fillStyle = "#10131a";
    ctx.fillRect(0, 0, this.canvas.width, this.canvas.height);
    if (this.image) {
      ctx.globalAlpha = 0.85;
      ctx.drawImage(this.image, 0, 0, this.canvas.width, this.canvas.height);
      ctx.globalAlpha = 1.0;
    }
    if (this.overlayPose) {
      ctx.fillStyle = "#58d68d";
      for (let j = 1; j <= this.overlayPose.length / 3; j++) {
        const p = jointPosition(this.overlayPose, j);
        const [x, y] = toCanvas(this.view, p.x, p.y);
        ctx.beginPath();
        ctx.arc(x, y, 3, 0, Math.PI * 2);
        ctx.fill();
      }
    }
    ctx.fillStyle = "#e74c3c";
    ctx.strokeStyle = "#e74c3c";
    ctx.font = "12px sans-serif";
    for (const label of this.labels.values()) {
      const [x, y] = toCanvas(this.view, label.u, label.v);
      ctx.beginPath();
      ctx.arc(x, y, 5, 0, Math.PI * 2);
      ctx.stroke();
      ctx.fillText(String(label.joint), x + 7, y - 7);
    }
  }
}
