"""Pose data ingestion, preprocessing, train/test splitting, and corruption.

Pose file formats (documented in docs/file_formats.md):
  * binary: 16-byte header (magic ``SPPS``, u32 version, u32 D, u32 m,
    little-endian) followed by m frames of D little-endian float64 values;
  * text: one frame per line, D whitespace-separated decimals;
  * angle frames ("asf-amc" style): text frames of per-joint channel values,
    converted through forward kinematics at ingestion.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import FormatError, InvalidInputError
from .skeleton import Skeleton

POSE_MAGIC = b"SPPS"
POSE_VERSION = 1


# --------------------------------------------------------------------------
# masks
# --------------------------------------------------------------------------

def mask_identity(dim: int = 69) -> np.ndarray:
    return np.ones(dim, dtype=bool)


def mask_from_joints(joint_ids, joint_count: int = 23) -> np.ndarray:
    """Whole-joint mask: all three coordinates of each listed joint."""
    mask = np.zeros(3 * joint_count, dtype=bool)
    for jid in joint_ids:
        if not 1 <= int(jid) <= joint_count:
            raise InvalidInputError(f"joint id {jid} out of range 1..{joint_count}")
        mask[3 * (int(jid) - 1):3 * int(jid)] = True
    return mask


def check_mask(mask, dim: int = 69) -> np.ndarray:
    mask = np.asarray(mask)
    if mask.shape != (dim,):
        raise InvalidInputError(f"mask must have length {dim}, got {mask.shape}")
    if mask.dtype != bool:
        vals = np.unique(mask)
        if not np.all(np.isin(vals, (0, 1))):
            raise InvalidInputError("mask entries must be 0 or 1")
        mask = mask.astype(bool)
    return mask


# --------------------------------------------------------------------------
# pose sets
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class PoseSet:
    """A batch of Euclidean poses with per-frame source tags."""

    poses: np.ndarray                      # (m, D) float64
    subjects: tuple[str, ...] = ()
    frames: tuple[int, ...] = ()
    skipped: int = 0                       # invalid frames dropped at load

    def __post_init__(self):
        poses = np.asarray(self.poses, dtype=float)
        if poses.ndim != 2:
            raise InvalidInputError("poses must be a 2-D array")
        object.__setattr__(self, "poses", poses)
        if not self.subjects:
            object.__setattr__(self, "subjects", ("",) * len(poses))
        if not self.frames:
            object.__setattr__(self, "frames", tuple(range(len(poses))))
        if len(self.subjects) != len(poses) or len(self.frames) != len(poses):
            raise InvalidInputError("source tags must match pose count")

    def __len__(self) -> int:
        return len(self.poses)

    @property
    def dim(self) -> int:
        return self.poses.shape[1]

    def take(self, idx) -> "PoseSet":
        idx = np.asarray(idx, dtype=int)
        return PoseSet(self.poses[idx].copy(),
                       tuple(self.subjects[i] for i in idx),
                       tuple(self.frames[i] for i in idx))


def root_shift(y: np.ndarray) -> np.ndarray:
    """Translate a pose (or batch) so the root joint sits at the origin."""
    y = np.asarray(y, dtype=float)
    if y.size == 0:
        return y.copy()
    pts = y.reshape(*y.shape[:-1], -1, 3)
    return (pts - pts[..., :1, :]).reshape(y.shape)


def preprocess(pose_set: PoseSet) -> PoseSet:
    """Root-shift every pose. Idempotent."""
    return replace(pose_set, poses=root_shift(pose_set.poses))


# --------------------------------------------------------------------------
# raw69 files
# --------------------------------------------------------------------------

def save_poses(path: str | Path, pose_set: PoseSet, fmt: str = "bin"):
    path = Path(path)
    m, dim = pose_set.poses.shape
    if fmt == "bin":
        header = POSE_MAGIC + struct.pack("<III", POSE_VERSION, dim, m)
        data = np.ascontiguousarray(pose_set.poses, dtype="<f8").tobytes()
        path.write_bytes(header + data)
    elif fmt == "txt":
        np.savetxt(path, pose_set.poses, fmt="%.17g")
    else:
        raise InvalidInputError(f"unknown pose file format {fmt!r}")


def _load_raw_binary(path: Path, data: bytes) -> np.ndarray:
    if len(data) < 16:
        raise FormatError("binary pose file shorter than its 16-byte header",
                          path=str(path))
    version, dim, m = struct.unpack("<III", data[4:16])
    if version != POSE_VERSION:
        raise FormatError(f"unsupported pose file version {version}", path=str(path))
    body = np.frombuffer(data, dtype="<f8", offset=16)
    if body.size != dim * m:
        raise FormatError(
            f"payload holds {body.size} values, header promises {dim * m}",
            path=str(path))
    return body.reshape(m, dim).astype(float)


def _load_raw_text(path: Path, expect_dim: int | None) -> tuple[np.ndarray, int]:
    rows = []
    skipped = 0
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            try:
                row = [float(p) for p in parts]
            except ValueError as e:
                raise FormatError(f"bad number: {e}", path=str(path), line=lineno) from e
            if expect_dim is not None and len(row) != expect_dim:
                raise FormatError(
                    f"frame has {len(row)} values, expected {expect_dim}",
                    path=str(path), line=lineno)
            if not np.all(np.isfinite(row)):
                skipped += 1
                continue
            rows.append(row)
    if not rows:
        return np.zeros((0, expect_dim or 0)), skipped
    return np.asarray(rows, dtype=float), skipped


def load_poses(path: str | Path, fmt: str = "raw69", *,
               skeleton: Skeleton | None = None, subject: str = "") -> PoseSet:
    """Load and preprocess poses.

    ``fmt`` is ``raw69`` (binary or text frames of stacked 3D coordinates,
    sniffed by magic) or ``asf-amc`` (per-joint angle channels; requires
    ``skeleton`` and runs each frame through forward kinematics with the
    global position and orientation zeroed).
    """
    path = Path(path)
    if not path.exists():
        raise FormatError("no such file", path=str(path))
    if fmt == "raw69":
        dim = skeleton.pose_dim if skeleton is not None else 69
        head = path.open("rb").read(4)
        if head == POSE_MAGIC:
            data = path.read_bytes()
            poses = _load_raw_binary(path, data)
            skipped = 0
            finite = np.all(np.isfinite(poses), axis=1)
            skipped = int((~finite).sum())
            poses = poses[finite]
            if poses.size and poses.shape[1] != dim:
                raise FormatError(
                    f"pose dimension {poses.shape[1]}, expected {dim}", path=str(path))
        else:
            poses, skipped = _load_raw_text(path, dim)
        if poses.size == 0:
            poses = poses.reshape(0, dim)
        result = PoseSet(poses, (subject,) * len(poses), tuple(range(len(poses))),
                         skipped=skipped)
        return preprocess(result)
    if fmt == "asf-amc":
        if skeleton is None:
            raise InvalidInputError("asf-amc ingestion requires a skeleton")
        angles, skipped, frames = parse_angle_frames(path, skeleton)
        angles[:, :6] = 0.0   # root at origin, zero global orientation
        poses = np.stack([skeleton.forward_kinematics(q) for q in angles]) \
            if len(angles) else np.zeros((0, skeleton.pose_dim))
        return PoseSet(poses, (subject,) * len(poses), tuple(frames), skipped=skipped)
    raise InvalidInputError(f"unknown ingest format {fmt!r}")


# --------------------------------------------------------------------------
# angle-frame ("asf-amc" style) files
# --------------------------------------------------------------------------

def parse_angle_frames(path: str | Path, skeleton: Skeleton):
    """Parse text angle frames keyed by joint name.

    Channels for joint names the skeleton does not declare are dropped (the
    toe/finger trim). Frames missing a declared joint are skipped and
    counted. Angles are converted to radians when the file or skeleton says
    degrees.
    """
    path = Path(path)
    degrees = skeleton.angle_units == "degrees"
    needed = {j.name: j for j in skeleton.joints if j.dofs or j.id == 1}
    frames: list[np.ndarray] = []
    frame_ids: list[int] = []
    skipped = 0
    current: dict[str, list[float]] | None = None
    current_id = 0

    def flush():
        nonlocal skipped
        if current is None:
            return
        q = np.zeros(skeleton.dof_count)
        ok = True
        for name, joint in needed.items():
            vals = current.get(name)
            width = 6 if joint.id == 1 else len(joint.dofs)
            if vals is None or len(vals) != width:
                ok = False
                break
            arr = np.asarray(vals, dtype=float)
            if joint.id == 1:
                q[:3] = arr[:3]
                q[3:6] = np.deg2rad(arr[3:6]) if degrees else arr[3:6]
            else:
                q[skeleton.angle_slice(joint.id)] = np.deg2rad(arr) if degrees else arr
        if ok:
            frames.append(q)
            frame_ids.append(current_id)
        else:
            skipped += 1

    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if line.startswith(":"):
                directive = line[1:].strip().upper()
                if directive == "DEGREES":
                    degrees = True
                elif directive == "RADIANS":
                    degrees = False
                continue
            parts = line.split()
            if len(parts) == 1:
                try:
                    fid = int(parts[0])
                except ValueError as e:
                    raise FormatError(f"expected a frame number, got {parts[0]!r}",
                                      path=str(path), line=lineno) from e
                flush()
                current = {}
                current_id = fid
                continue
            if current is None:
                raise FormatError("channel data before the first frame number",
                                  path=str(path), line=lineno)
            name = parts[0]
            try:
                vals = [float(p) for p in parts[1:]]
            except ValueError as e:
                raise FormatError(f"bad number in channels of {name!r}: {e}",
                                  path=str(path), line=lineno, frame=current_id) from e
            current[name] = vals
    flush()
    angles = np.stack(frames) if frames else np.zeros((0, skeleton.dof_count))
    return angles, skipped, frame_ids


def save_angle_frames(path: str | Path, skeleton: Skeleton, angles: np.ndarray):
    """Write angle frames in the text format parse_angle_frames reads."""
    degrees = skeleton.angle_units == "degrees"
    lines = [":FULLY-SPECIFIED", ":DEGREES" if degrees else ":RADIANS"]
    for i, q in enumerate(np.atleast_2d(angles), start=1):
        lines.append(str(i))
        root_vals = list(q[:3]) + list(np.rad2deg(q[3:6]) if degrees else q[3:6])
        lines.append("root " + " ".join(f"{v:.10g}" for v in root_vals))
        for j in skeleton.joints[1:]:
            if not j.dofs:
                continue
            vals = q[skeleton.angle_slice(j.id)]
            if degrees:
                vals = np.rad2deg(vals)
            lines.append(j.name + " " + " ".join(f"{v:.10g}" for v in vals))
    Path(path).write_text("\n".join(lines) + "\n")


# --------------------------------------------------------------------------
# splitting and corruption
# --------------------------------------------------------------------------

def split(pose_set: PoseSet, fraction: float, seed: int) -> tuple[PoseSet, PoseSet]:
    """Random disjoint, exhaustive split; reproducible under the seed."""
    if not 0.0 < fraction < 1.0:
        raise InvalidInputError("split fraction must lie in (0, 1)")
    m = len(pose_set)
    rng = np.random.default_rng(seed)
    perm = rng.permutation(m)
    k = int(round(fraction * m))
    return pose_set.take(np.sort(perm[:k])), pose_set.take(np.sort(perm[k:]))


@dataclass(frozen=True)
class CorruptionSpec:
    kind: str                               # dense-gaussian | sparse-gaussian | mask-completion
    sigma: float = 1.0
    joint_fraction: float = 0.2
    observed_joints: tuple[int, ...] = ()
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("dense-gaussian", "sparse-gaussian", "mask-completion"):
            raise InvalidInputError(f"unknown corruption kind {self.kind!r}")
        if self.kind == "sparse-gaussian" and not 0.0 < self.joint_fraction <= 1.0:
            raise InvalidInputError("joint_fraction must lie in (0, 1]")
        if self.kind == "mask-completion" and not self.observed_joints:
            raise InvalidInputError("mask-completion requires observed_joints")


def corrupt(pose_set: PoseSet, spec: CorruptionSpec) -> tuple[PoseSet, list[np.ndarray]]:
    """Produce a corrupted copy of the set plus one mask per pose.

    Dense/sparse noise leaves the mask all-ones (every coordinate is still
    presented to the solver); completion zeroes unobserved entries and marks
    only the observed ones.
    """
    rng = np.random.default_rng(spec.seed)
    poses = pose_set.poses.copy()
    m, dim = poses.shape
    joint_count = dim // 3
    masks: list[np.ndarray] = []
    if spec.kind == "dense-gaussian":
        poses += rng.normal(0.0, 1.0, size=poses.shape) * spec.sigma
        masks = [mask_identity(dim) for _ in range(m)]
    elif spec.kind == "sparse-gaussian":
        k = int(round(spec.joint_fraction * joint_count))
        for i in range(m):
            joints = rng.choice(joint_count, size=k, replace=False)
            for j in joints:
                poses[i, 3 * j:3 * j + 3] += rng.normal(0.0, 1.0, size=3) * spec.sigma
        masks = [mask_identity(dim) for _ in range(m)]
    else:
        mask = mask_from_joints(spec.observed_joints, joint_count)
        poses[:, ~mask] = 0.0
        masks = [mask.copy() for _ in range(m)]
    return replace(pose_set, poses=poses), masks
