import type { JointMeta, Vec3 } from "./types";

/** A pose travels as 69 numbers: x, y, z per joint, joint-id order. */
export function jointPosition(pose: number[], jointId: number): Vec3 {
  const base = (jointId - 1) * 3;
  return { x: pose[base], y: pose[base + 1], z: pose[base + 2] };
}

export function setJointPosition(pose: number[], jointId: number, p: Vec3): void {
  const base = (jointId - 1) * 3;
  pose[base] = p.x;
  pose[base + 1] = p.y;
  pose[base + 2] = p.z;
}

export function clonePose(pose: number[]): number[] {
  return pose.slice();
}

export function distance(a: Vec3, b: Vec3): number {
  const dx = a.x - b.x;
  const dy = a.y - b.y;
  const dz = a.z - b.z;
  return Math.sqrt(dx * dx + dy * dy + dz * dz);
}

export interface BoneDeviation {
  jointId: number;
  length: number;
  expected: number;
  relative: number;
}

/** Bone-length inspector: relative deviation of every rendered bone from
 * the lengths advertised by /meta. */
export function boneDeviations(pose: number[], joints: JointMeta[]): BoneDeviation[] {
  const out: BoneDeviation[] = [];
  for (const j of joints) {
    if (j.parent === 0) continue;
    const length = distance(jointPosition(pose, j.id), jointPosition(pose, j.parent));
    out.push({
      jointId: j.id,
      length,
      expected: j.bone_length,
      relative: Math.abs(length - j.bone_length) / j.bone_length
    });
  }
  return out;
}

export function maxBoneDeviation(pose: number[], joints: JointMeta[]): number {
  return boneDeviations(pose, joints).reduce((m, d) => Math.max(m, d.relative), 0);
}

/** Screen-plane residual of a pose against 2D labels (orthographic x/y). */
export function reprojectionResidual(
  pose: number[],
  labels: { joint: number; u: number; v: number }[]
): number {
  if (labels.length === 0) return 0;
  let sum = 0;
  for (const label of labels) {
    const p = jointPosition(pose, label.joint);
    sum += (p.x - label.u) ** 2 + (p.y - label.v) ** 2;
  }
  return Math.sqrt(sum / labels.length);
}
