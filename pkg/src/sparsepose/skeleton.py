"""Skeleton model: forward kinematics, analytic Jacobian, damped-Jacobian IK,
rigid-body rotation of stacked joint coordinates, and bone-length
normalization along the five kinematic chains.

Conventions (fixed for the whole package):
  * right-handed coordinate system, column vectors, y up;
  * a rotation triple ``tau`` applies about x, then y, then z, i.e. the
    composite matrix is ``Rz(tau_z) @ Ry(tau_y) @ Rx(tau_x)``;
  * joint IDs are 1-based; the root is joint 1;
  * the angle vector ``q`` starts with the root's 6 components
    (tx, ty, tz, rx, ry, rz), followed by each joint's angles in joint-ID
    order, each joint using the rotation order declared in the skeleton file.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import DegenerateInputError, FormatError, IKConvergenceError, InvalidInputError

AXIS_INDEX = {"x": 0, "y": 1, "z": 2}

STANDARD_JOINT_COUNT = 23
STANDARD_DOF_COUNT = 46
POSE_DIM = 3 * STANDARD_JOINT_COUNT


def rot_x(t: float) -> np.ndarray:
    c, s = np.cos(t), np.sin(t)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(t: float) -> np.ndarray:
    c, s = np.cos(t), np.sin(t)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(t: float) -> np.ndarray:
    c, s = np.cos(t), np.sin(t)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


_ROT = {"x": rot_x, "y": rot_y, "z": rot_z}


def rotation_matrix(tau) -> np.ndarray:
    """Composite rotation for a 3-vector of angles, applied x then y then z."""
    tau = np.asarray(tau, dtype=float)
    return _euler_xyz(tau[0], tau[1], tau[2])


def _euler_xyz(rx: float, ry: float, rz: float) -> np.ndarray:
    """Rz(rz) @ Ry(ry) @ Rx(rx) in closed form."""
    cx, sx = np.cos(rx), np.sin(rx)
    cy, sy = np.cos(ry), np.sin(ry)
    cz, sz = np.cos(rz), np.sin(rz)
    return np.array([
        [cz * cy, cz * sy * sx - sz * cx, cz * sy * cx + sz * sx],
        [sz * cy, sz * sy * sx + cz * cx, sz * sy * cx - cz * sx],
        [-sy, cy * sx, cy * cx],
    ])


def _drot(axis: str, t: float) -> np.ndarray:
    """Derivative of the single-axis rotation matrix w.r.t. its angle."""
    c, s = np.cos(t), np.sin(t)
    if axis == "x":
        return np.array([[0.0, 0.0, 0.0], [0.0, -s, -c], [0.0, c, -s]])
    if axis == "y":
        return np.array([[-s, 0.0, c], [0.0, 0.0, 0.0], [-c, 0.0, -s]])
    return np.array([[-s, -c, 0.0], [c, -s, 0.0], [0.0, 0.0, 0.0]])


def matrix_to_tau(R: np.ndarray) -> np.ndarray:
    """Extract (tau_x, tau_y, tau_z) with R = Rz @ Ry @ Rx, each in (-pi, pi]."""
    sy = -R[2, 0]
    sy = min(1.0, max(-1.0, sy))
    ty = np.arcsin(sy)
    if abs(sy) < 1.0 - 1e-12:
        tx = np.arctan2(R[2, 1], R[2, 2])
        tz = np.arctan2(R[1, 0], R[0, 0])
    else:
        # gimbal: fold z into x
        tx = np.arctan2(-R[1, 2], R[1, 1])
        tz = 0.0
    return canonical_angles(np.array([tx, ty, tz]))


def canonical_angles(tau) -> np.ndarray:
    """Wrap each component into (-pi, pi]."""
    tau = np.asarray(tau, dtype=float)
    wrapped = np.mod(-tau + np.pi, 2.0 * np.pi)
    return -(wrapped - np.pi)


@dataclass(frozen=True)
class Joint:
    id: int
    name: str
    parent: int                  # 0 for the root
    offset: np.ndarray           # rest offset from parent, in the parent frame
    order: str                   # rotation application order, e.g. "xyz"
    dofs: tuple[str, ...]        # subset of rx/ry/rz axes present, e.g. ("rx", "rz")


class Skeleton:
    """Immutable joint hierarchy with per-joint DOF assignments.

    Safe to share across threads: all derived tables are computed once in
    the constructor and never mutated.
    """

    def __init__(self, joints: list[Joint], chains: list[tuple[int, ...]], name: str = "",
                 angle_units: str = "radians"):
        if not joints or joints[0].parent != 0:
            raise InvalidInputError("first joint must be the root (parent 0)")
        ids = [j.id for j in joints]
        if ids != list(range(1, len(joints) + 1)):
            raise InvalidInputError("joint IDs must be contiguous starting at 1")
        for j in joints[1:]:
            if not (1 <= j.parent < j.id):
                raise InvalidInputError(
                    f"joint {j.id} must have a lower-numbered parent, got {j.parent}")
            if np.linalg.norm(j.offset) <= 0.0:
                raise InvalidInputError(f"joint {j.id} has zero-length rest offset")
            for a in j.dofs:
                if a[1] not in j.order:
                    raise InvalidInputError(f"joint {j.id}: dof {a} not in order {j.order!r}")
        self.name = name
        self.angle_units = angle_units
        self.joints = tuple(joints)
        self.joint_count = len(joints)
        self.chains = tuple(tuple(c) for c in chains)
        self._validate_chains()

        # q layout: root tx ty tz rx ry rz, then each non-root joint's angles
        layout: list[tuple[int, str]] = [(1, c) for c in ("tx", "ty", "tz", "rx", "ry", "rz")]
        for j in joints[1:]:
            layout.extend((j.id, a) for a in j.dofs)
        self.dof_map = tuple(layout)
        self.dof_count = len(layout)
        self._slices = {}
        pos = 6
        for j in joints[1:]:
            self._slices[j.id] = slice(pos, pos + len(j.dofs))
            pos += len(j.dofs)

        self._children: list[list[int]] = [[] for _ in range(self.joint_count + 1)]
        for j in joints[1:]:
            self._children[j.parent].append(j.id)
        # descendants[k] = joint IDs strictly below k
        self._descendants: list[list[int]] = [[] for _ in range(self.joint_count + 1)]
        for k in range(self.joint_count, 0, -1):
            acc: list[int] = []
            for c in self._children[k]:
                acc.append(c)
                acc.extend(self._descendants[c])
            self._descendants[k] = sorted(acc)

        self.bone_lengths = np.zeros(self.joint_count + 1)
        for j in joints[1:]:
            self.bone_lengths[j.id] = float(np.linalg.norm(j.offset))

        # 0-based row ranges of descendants, for vectorized Jacobian fills
        self._desc_idx = [np.array([], dtype=int)] + [
            np.asarray(self._descendants[k], dtype=int) - 1
            for k in range(1, self.joint_count + 1)
        ]
        # joints with plain xyz order take the fused closed-form composite;
        # value = position of each axis angle within the joint's q slice
        self._fused: dict[int, tuple] = {}
        for j in joints[1:]:
            if j.order == "xyz" and j.dofs:
                self._fused[j.id] = tuple(
                    j.dofs.index(key) if key in j.dofs else None
                    for key in ("rx", "ry", "rz"))

        # static per-joint walk info: (joint_id, reversed-composite steps,
        # column indices in q-layout order)
        self._jac_entries = []
        entries = [(1, "xyz", ("rx", "ry", "rz"), 3)]
        entries += [(j.id, j.order, j.dofs, self._slices[j.id].start)
                    for j in joints[1:] if j.dofs]
        for joint_id, order, dofs, col0 in entries:
            steps = []
            for axis in reversed(order):
                key = "r" + axis
                if key in dofs:
                    pos = dofs.index(key)
                    steps.append((AXIS_INDEX[axis], col0 + pos, pos))
            cols = np.array([col0 + i for i in range(len(dofs))], dtype=int)
            self._jac_entries.append((joint_id, tuple(steps), cols))

    def _validate_chains(self):
        seen: set[int] = set()
        for chain in self.chains:
            for prev, cur in zip(chain, chain[1:]):
                if self.joints[cur - 1].parent != prev:
                    raise InvalidInputError(
                        f"chain entry {cur} is not a child of {prev}")
                if cur in seen:
                    raise InvalidInputError(f"joint {cur} appears in two chains")
                seen.add(cur)
        missing = set(range(2, self.joint_count + 1)) - seen
        if self.chains and missing:
            raise InvalidInputError(f"joints absent from every chain: {sorted(missing)}")

    # -- helpers ---------------------------------------------------------

    def joint(self, joint_id: int) -> Joint:
        return self.joints[joint_id - 1]

    def children(self, joint_id: int) -> list[int]:
        return list(self._children[joint_id])

    def descendants(self, joint_id: int) -> list[int]:
        return list(self._descendants[joint_id])

    def angle_slice(self, joint_id: int) -> slice:
        return self._slices[joint_id]

    @property
    def pose_dim(self) -> int:
        return 3 * self.joint_count

    def is_standard(self) -> bool:
        return (self.joint_count == STANDARD_JOINT_COUNT
                and self.dof_count == STANDARD_DOF_COUNT
                and len(self.chains) == 5)

    def require_standard(self):
        if not self.is_standard():
            raise InvalidInputError(
                f"expected the standard {STANDARD_JOINT_COUNT}-joint / "
                f"{STANDARD_DOF_COUNT}-DOF skeleton, got {self.joint_count} joints "
                f"/ {self.dof_count} DOFs")

    def check_q(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        if q.shape != (self.dof_count,):
            raise InvalidInputError(
                f"angle vector must have shape ({self.dof_count},), got {q.shape}")
        if not np.all(np.isfinite(q)):
            raise InvalidInputError("angle vector contains non-finite entries")
        return q

    def check_pose(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if y.shape != (self.pose_dim,):
            raise InvalidInputError(
                f"pose vector must have shape ({self.pose_dim},), got {y.shape}")
        return y

    def _local_rotation(self, joint: Joint, angles: np.ndarray) -> np.ndarray:
        R = np.eye(3)
        by_axis = dict(zip(joint.dofs, angles))
        for axis in joint.order:          # applied first-to-last => left-multiplied
            key = "r" + axis
            if key in by_axis:
                R = _ROT[axis](by_axis[key]) @ R
        return R

    # -- kinematics ------------------------------------------------------

    def _world_transforms(self, q: np.ndarray):
        """Per-joint world rotation and position. Index 0 unused."""
        R = np.zeros((self.joint_count + 1, 3, 3))
        t = np.zeros((self.joint_count + 1, 3))
        t[1] = q[:3]
        R[1] = _euler_xyz(q[3], q[4], q[5])
        for j in self.joints[1:]:
            p = j.parent
            t[j.id] = t[p] + R[p] @ j.offset
            if not j.dofs:
                R[j.id] = R[p]
                continue
            fused = self._fused.get(j.id)
            angles = q[self._slices[j.id]]
            if fused is not None:
                local = _euler_xyz(
                    angles[fused[0]] if fused[0] is not None else 0.0,
                    angles[fused[1]] if fused[1] is not None else 0.0,
                    angles[fused[2]] if fused[2] is not None else 0.0)
            else:
                local = self._local_rotation(j, angles)
            R[j.id] = R[p] @ local
        return R, t

    def forward_kinematics(self, q) -> np.ndarray:
        """Map a joint-angle vector to stacked 3D joint coordinates."""
        q = self.check_q(q)
        _, t = self._world_transforms(q)
        return t[1:].reshape(-1).copy()

    def jacobian(self, q) -> np.ndarray:
        """Analytic Jacobian of forward_kinematics, shape (3*joints, dofs).

        Rotational columns use the instantaneous world axis of the DOF:
        d(position)/d(angle) = axis x (position - joint origin).
        """
        q = self.check_q(q)
        R, t = self._world_transforms(q)
        return self._jacobian_from_transforms(q, R, t)

    _AXIS_ROT = (rot_x, rot_y, rot_z)

    def _jacobian_from_transforms(self, q, R, t) -> np.ndarray:
        J3 = np.zeros((self.joint_count, 3, self.dof_count))
        # root translation: unit direction replicated for every joint
        for c in range(3):
            J3[:, c, c] = 1.0
        pts = t[1:]
        eye = np.eye(3)
        for joint_id, steps, cols in self._jac_entries:
            rows = self._desc_idx[joint_id]
            if rows.size == 0:
                continue
            rel = pts[rows] - t[joint_id]
            R_base = eye if joint_id == 1 else R[self.joints[joint_id - 1].parent]
            # walk the composite right-to-left; suffix = rotations applied
            # after the current axis, whose column gives the world axis
            suffix = eye
            omegas = np.empty((len(steps), 3))
            for axis_idx, q_col, pos in steps:
                omegas[pos] = R_base @ suffix[:, axis_idx]
                suffix = suffix @ self._AXIS_ROT[axis_idx](q[q_col])
            blocks = np.cross(omegas[:, None, :], rel[None, :, :])
            J3[rows[:, None], :, cols[None, :]] = blocks.transpose(1, 0, 2)
        return J3.reshape(self.pose_dim, self.dof_count)

    def ik_solve(self, target, q_init=None, *, damping: float = 1e-4,
                 max_iter: int = 50, tol: float = 1e-6) -> "IKResult":
        """Damped-Jacobian iteration toward a full Euclidean target pose.

        The step is dq = (J^T J + eta*I)^-1 J^T r (the damped pseudo-inverse).
        ``damping`` is the floor for eta; when a step would increase the
        residual, eta is raised and the step recomputed, so the residual
        trace is monotone non-increasing.  Raises IKConvergenceError with the
        best iterate attached when tolerance is not reached.
        """
        target = self.check_pose(target)
        if damping <= 0 or tol <= 0:
            raise InvalidInputError("damping and tol must be positive")
        q = np.zeros(self.dof_count) if q_init is None else self.check_q(q_init).copy()
        eye = np.eye(self.dof_count)
        Rw, tw = self._world_transforms(q)
        y = tw[1:].reshape(-1)
        best_res = float(np.linalg.norm(y - target)) / self.joint_count
        trace = [best_res]
        iterations = 0
        J = self._jacobian_from_transforms(q, Rw, tw)
        JtJ = J.T @ J
        Jtr = J.T @ (target - y)
        eta = max(damping, 1e-3 * float(JtJ.diagonal().max()))
        growth = 2.0
        for _ in range(max_iter):
            if best_res <= tol:
                break
            improved = False
            for _ in range(40):
                dq = np.linalg.solve(JtJ + eta * eye, Jtr)
                q_try = q + dq
                R_try, t_try = self._world_transforms(q_try)
                y_try = t_try[1:].reshape(-1)
                res_try = float(np.linalg.norm(y_try - target)) / self.joint_count
                predicted = float(dq @ (eta * dq + Jtr))
                if res_try < best_res and predicted > 0:
                    # standard gain-ratio damping control
                    actual = (best_res * self.joint_count) ** 2 - (res_try * self.joint_count) ** 2
                    rho = actual / predicted
                    eta = max(damping, eta * max(1.0 / 3.0, 1.0 - (2.0 * rho - 1.0) ** 3))
                    growth = 2.0
                    q, y, best_res = q_try, y_try, res_try
                    Rw, tw = R_try, t_try
                    improved = True
                    break
                eta *= growth
                growth *= 2.0
            iterations += 1
            trace.append(best_res)
            if not improved:
                break
            # stalled at an unreachable-target floor: stop burning iterations
            if len(trace) >= 4 and trace[-4] - trace[-1] < 1e-3 * trace[-4]:
                break
            J = self._jacobian_from_transforms(q, Rw, tw)
            JtJ = J.T @ J
            Jtr = J.T @ (target - y)
        if not np.all(np.isfinite(q)):
            raise IKConvergenceError("IK produced non-finite angles",
                                     best_q=np.zeros(self.dof_count),
                                     residual=float("inf"), iterations=iterations)
        if best_res > tol:
            raise IKConvergenceError(
                f"IK stopped at per-joint residual {best_res:.3e} after "
                f"{iterations} iterations (tol {tol:.1e})",
                best_q=q, residual=best_res, iterations=iterations)
        return IKResult(q=q, residual=best_res, iterations=iterations,
                        residual_trace=tuple(trace))

    # -- Euclidean-space operators ----------------------------------------

    def normalize_pose(self, y) -> np.ndarray:
        """Rescale every bone to its standard length, walking the five chains.

        Keeps each input bone's direction, accumulates the resulting joint
        offsets down every chain, and preserves the root position.
        """
        y = self.check_pose(y)
        pts = y.reshape(self.joint_count, 3)
        out = np.zeros_like(pts)
        delta = np.zeros_like(pts)          # accumulated shift per joint
        out[0] = pts[0]
        for chain in self.chains:
            for prev, cur in zip(chain, chain[1:]):
                bone = pts[cur - 1] - pts[prev - 1]
                norm = float(np.linalg.norm(bone))
                if norm < 1e-12:
                    raise DegenerateInputError(
                        f"joints {prev} and {cur} coincide; bone direction undefined")
                length = self.bone_lengths[cur]
                if abs(norm - length) <= 1e-12 * max(length, 1.0):
                    # bone already standard: propagate the shift bitwise so
                    # normalized inputs are exact fixed points
                    tilde = pts[cur - 1] + delta[prev - 1]
                else:
                    tilde = pts[prev - 1] + delta[prev - 1] + bone / norm * length
                delta[cur - 1] = tilde - pts[cur - 1]
                out[cur - 1] = tilde
        return out.reshape(-1)


@dataclass(frozen=True)
class IKResult:
    q: np.ndarray
    residual: float
    iterations: int
    residual_trace: tuple[float, ...]


def rotate_pose(tau, y) -> np.ndarray:
    """Rotate every 3D point of a stacked pose by Rz(tz) Ry(ty) Rx(tx)."""
    y = np.asarray(y, dtype=float)
    R = rotation_matrix(tau)
    return (y.reshape(-1, 3) @ R.T).reshape(y.shape)


def rotate_pose_inverse(tau, y) -> np.ndarray:
    """Inverse of rotate_pose (apply the transposed composite)."""
    y = np.asarray(y, dtype=float)
    R = rotation_matrix(tau)
    return (y.reshape(-1, 3) @ R).reshape(y.shape)


# -- skeleton definition files ------------------------------------------


def load_skeleton(path: str | Path) -> Skeleton:
    """Read a skeleton definition file (JSON; schema in docs/skeleton_format.md)."""
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise FormatError(f"skeleton file is not valid JSON: {e.msg}",
                          path=str(path), line=e.lineno) from e
    return skeleton_from_dict(data, source=str(path))


def skeleton_from_dict(data: dict, source: str = "<dict>") -> Skeleton:
    if data.get("format") != "sparsepose-skeleton":
        raise FormatError("missing or wrong 'format' marker", path=source)
    root = data.get("root")
    if not root or root.get("id") != 1:
        raise FormatError("root joint must have id 1", path=source)
    joints = [Joint(id=1, name=root.get("name", "root"), parent=0,
                    offset=np.zeros(3), order="xyz", dofs=("rx", "ry", "rz"))]
    for spec in data.get("joints", []):
        try:
            joints.append(Joint(
                id=int(spec["id"]),
                name=str(spec["name"]),
                parent=int(spec["parent"]),
                offset=np.asarray(spec["offset"], dtype=float),
                order=str(spec.get("order", "xyz")),
                dofs=tuple(spec.get("dofs", [])),
            ))
        except (KeyError, TypeError, ValueError) as e:
            raise FormatError(f"bad joint entry {spec!r}: {e}", path=source) from e
    joints.sort(key=lambda j: j.id)
    chains = [tuple(int(i) for i in c) for c in data.get("chains", [])]
    try:
        return Skeleton(joints, chains, name=data.get("name", ""),
                        angle_units=data.get("angle_units", "degrees"))
    except InvalidInputError as e:
        raise FormatError(f"inconsistent skeleton: {e}", path=source) from e


def default_skeleton() -> Skeleton:
    """The packaged standard 23-joint, 46-DOF posing skeleton."""
    text = resources.files("sparsepose").joinpath("assets/skeleton23.json").read_text()
    return skeleton_from_dict(json.loads(text), source="assets/skeleton23.json")


def default_skeleton_path() -> Path:
    return Path(str(resources.files("sparsepose").joinpath("assets/skeleton23.json")))
