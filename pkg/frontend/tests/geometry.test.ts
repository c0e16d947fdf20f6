import { describe, expect, it } from "vitest";
import {
  boneDeviations,
  clonePose,
  jointPosition,
  maxBoneDeviation,
  reprojectionResidual,
  setJointPosition
} from "../src/geometry";
import { FIXTURE_LABELS, FIXTURE_POSE } from "../src/fixture";
import type { JointMeta } from "../src/types";

// standard-skeleton structure as served by /meta
const PARENTS: Record<number, number> = {
  2: 1, 3: 2, 4: 3, 5: 4, 6: 1, 7: 6, 8: 7, 9: 8, 10: 1, 11: 10, 12: 11,
  13: 12, 14: 13, 15: 14, 16: 12, 17: 16, 18: 17, 19: 18, 20: 12, 21: 20,
  22: 21, 23: 22
};
const LENGTHS: Record<number, number> = {
  2: 1.328533, 3: 6.9, 4: 6.45, 5: 2.563201, 6: 1.328533, 7: 6.9, 8: 6.45,
  9: 2.563201, 10: 2.10535, 11: 2.150581, 12: 2.202272, 13: 2.35,
  14: 1.619413, 15: 1.686713, 16: 1.486607, 17: 2.474874, 18: 4.6, 19: 3.9,
  20: 1.486607, 21: 2.474874, 22: 4.6, 23: 3.9
};

function metaJoints(): JointMeta[] {
  const joints: JointMeta[] = [{ id: 1, name: "root", parent: 0, bone_length: 0 }];
  for (let id = 2; id <= 23; id++) {
    joints.push({ id, name: `j${id}`, parent: PARENTS[id], bone_length: LENGTHS[id] });
  }
  return joints;
}

describe("bone-length inspector", () => {
  it("accepts the fixture pose within 1e-3 relative", () => {
    // the fixture is a forward-kinematics pose rounded to 4 decimals
    const deviation = maxBoneDeviation(FIXTURE_POSE, metaJoints());
    expect(deviation).toBeLessThanOrEqual(1e-3);
  });

  it("reports one deviation per bone", () => {
    const devs = boneDeviations(FIXTURE_POSE, metaJoints());
    expect(devs).toHaveLength(22);
    for (const d of devs) expect(d.expected).toBeGreaterThan(0);
  });

  it("flags a stretched bone", () => {
    const pose = clonePose(FIXTURE_POSE);
    const wrist = jointPosition(pose, 19);
    setJointPosition(pose, 19, { x: wrist.x + 2, y: wrist.y, z: wrist.z });
    expect(maxBoneDeviation(pose, metaJoints())).toBeGreaterThan(0.05);
  });
});

describe("pose accessors", () => {
  it("round-trips joint positions", () => {
    const pose = clonePose(FIXTURE_POSE);
    setJointPosition(pose, 7, { x: 1.5, y: -2.5, z: 0.25 });
    expect(jointPosition(pose, 7)).toEqual({ x: 1.5, y: -2.5, z: 0.25 });
    // other joints untouched
    expect(jointPosition(pose, 8)).toEqual(jointPosition(FIXTURE_POSE, 8));
  });
});

describe("reprojection residual", () => {
  it("is zero when labels come from the pose itself", () => {
    expect(reprojectionResidual(FIXTURE_POSE, FIXTURE_LABELS)).toBeLessThan(1e-12);
  });

  it("grows with label displacement", () => {
    const shifted = FIXTURE_LABELS.map((l) => ({ ...l, u: l.u + 1 }));
    const r = reprojectionResidual(FIXTURE_POSE, shifted);
    expect(r).toBeCloseTo(1.0, 6);
  });
});
