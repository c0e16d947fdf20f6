import { clonePose, setJointPosition } from "./geometry";
import type { Vec3 } from "./types";

export type EditorMode = "drag" | "annotate";

export interface PendingEdit {
  jointId: number;
  position: Vec3;
}

/** Client-side editor state: the rendered pose, the selection, pinned
 * joints, the kappa slider, and edits queued while the server is offline. */
export class EditorState {
  pose: number[];
  selected: number | null = null;
  dragging: number | null = null;
  pinned = new Set<number>();
  kappa: number;
  kappaMax: number;
  mode: EditorMode = "drag";
  connected = true;
  editQueue: PendingEdit[] = [];

  constructor(pose: number[], kappa: number, kappaMax: number) {
    if (pose.length % 3 !== 0) throw new Error("pose length must be 3 per joint");
    this.pose = clonePose(pose);
    this.kappa = kappa;
    this.kappaMax = kappaMax;
  }

  get jointCount(): number {
    return this.pose.length / 3;
  }

  setKappa(value: number): void {
    this.kappa = Math.max(1, Math.min(Math.round(value), this.kappaMax));
  }

  /** A pinned joint cannot be the dragged joint and vice versa. */
  togglePin(jointId: number): void {
    if (this.dragging === jointId) return;
    if (this.pinned.has(jointId)) this.pinned.delete(jointId);
    else this.pinned.add(jointId);
  }

  beginDrag(jointId: number): boolean {
    if (this.pinned.has(jointId)) return false;
    this.dragging = jointId;
    return true;
  }

  endDrag(): void {
    this.dragging = null;
  }

  applyEdit(jointId: number, position: Vec3): void {
    setJointPosition(this.pose, jointId, position);
    if (!this.connected) {
      this.editQueue.push({ jointId, position });
    }
  }

  /** Edits made while offline replay once the connection returns. */
  drainQueue(): PendingEdit[] {
    const queued = this.editQueue;
    this.editQueue = [];
    return queued;
  }

  adoptPose(pose: number[]): void {
    this.pose = clonePose(pose);
  }
}
