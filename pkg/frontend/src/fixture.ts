import type { Label2D } from "./types";

/** Shipped 2D-annotation fixture: an exact orthographic projection (x, y)
 * of a reachable pose on the standard skeleton. Annotating these labels
 * must reconstruct a pose whose reprojection residual sits below the soft
 * tolerance shown in the UI. */
export const FIXTURE_POSE: number[] = [
  0.0, 0.0, 0.0, 1.25, -0.45, 0.0, 4.4677, -6.2997, -1.7427, 6.8022, -11.5683,
  -4.6401, 8.1236, -12.491, -2.6469, -1.25, -0.45, 0.0, 0.2088, -6.5039,
  -2.9718, 1.4293, -12.8334, -3.1958, 1.1892, -12.8974, -0.6446, 0.0, 2.1,
  -0.15, 0.0639, 4.1746, 0.413, 0.1708, 6.2389, 1.1729, 0.667, 8.4032, 1.9423,
  0.6417, 9.8397, 2.6895, -0.1678, 11.2291, 3.1987, 1.299, 6.7809, 1.975,
  3.0707, 7.0411, 3.6833, 4.2174, 2.6436, 4.3951, 4.7384, -1.1279, 5.2406,
  -0.5351, 7.5388, 1.0256, -1.8518, 9.5101, 0.3146, -5.8403, 7.2214, 0.431,
  -9.1416, 5.3077, -0.3748
];

export const FIXTURE_LABELS: Label2D[] = [
  { joint: 1, u: 0.0, v: 0.0 },
  { joint: 3, u: 4.4677, v: -6.2997 },
  { joint: 5, u: 8.1236, v: -12.491 },
  { joint: 7, u: 0.2088, v: -6.5039 },
  { joint: 9, u: 1.1892, v: -12.8974 },
  { joint: 12, u: 0.1708, v: 6.2389 },
  { joint: 15, u: -0.1678, v: 11.2291 },
  { joint: 17, u: 3.0707, v: 7.0411 },
  { joint: 19, u: 4.7384, v: -1.1279 },
  { joint: 21, u: -1.8518, v: 9.5101 },
  { joint: 23, u: -9.1416, v: 5.3077 }
];

/** Soft tolerance for the on-screen reprojection readout, dataset units. */
export const FIXTURE_SOFT_TOLERANCE = 0.5;
