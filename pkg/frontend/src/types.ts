export interface JointMeta {
  id: number;
  name: string;
  parent: number;
  bone_length: number;
}

export interface Meta {
  v: number;
  dim: number;
  atoms: number;
  kappa_train: number;
  default_kappa: number;
  kappa_max: number;
  joint_count: number;
  joints: JointMeta[];
  chains: number[][];
}

export type MaskSpec = "identity" | { joints: number[] } | { coords: number[] };

export interface SynthesizeRequest {
  v: number;
  pose?: number[];
  joints?: Record<string, number[]>;
  mask?: MaskSpec;
  kappa?: number;
  tau0?: [number, number, number];
  w?: [number, number, number];
}

export interface SynthesizeResponse {
  v: number;
  pose: number[];
  angles: number[];
  support: number[];
  coefficients: number[];
  tau: [number, number, number];
  coding_residual: number;
  ik_residual: number;
  outer_iterations: number;
  warnings: string[];
  timings_ms: Record<string, number>;
}

export interface Label2D {
  joint: number;
  u: number;
  v: number;
}

export interface Complete2DResponse {
  v: number;
  pose: number[];
  angles: number[];
  support: number[];
  tau: [number, number, number];
  reprojection_residual: number;
  under_determined: boolean;
  warnings: string[];
  timings_ms: Record<string, number>;
}

export interface Vec3 {
  x: number;
  y: number;
  z: number;
}
