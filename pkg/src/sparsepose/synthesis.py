"""Pose synthesis from noisy, incomplete, or 2D-constrained inputs.

Pipeline: alternate masked sparse coding against the pose dictionary with a
rigid-rotation fit (monotone in the joint objective), then realize the coded
pose at standard bone lengths (normalization), solve IK for joint angles,
and place the result back into the input's world frame.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .dataset import check_mask
from .errors import DataError, IKConvergenceError, InvalidInputError
from .skeleton import (
    Skeleton,
    canonical_angles,
    matrix_to_tau,
    rotate_pose,
    rotation_matrix,
)
from .sparse import PoseDictionary, SparseCode, omp

DEFAULT_WEIGHTS = (1.0, 0.1, 1.0)     # y-rotation is the most common, so cheapest


@dataclass
class SynthesisRequest:
    """Input pose (possibly incomplete), observation mask, and solver knobs."""

    y0: np.ndarray
    mask: np.ndarray
    kappa: int = 3
    tau0: np.ndarray = field(default_factory=lambda: np.zeros(3))
    weights: np.ndarray = field(default_factory=lambda: np.asarray(DEFAULT_WEIGHTS))
    max_outer: int = 50
    outer_tol: float = 1e-6
    ik_max_iter: int = 50
    ik_tol: float = 1e-6
    ik_damping: float = 1e-4
    rotation_max_iter: int = 200

    def __post_init__(self):
        self.y0 = np.asarray(self.y0, dtype=float)
        if self.y0.ndim != 1 or self.y0.size % 3:
            raise InvalidInputError("y0 must be a flat stacked-coordinate vector")
        self.mask = check_mask(self.mask, self.y0.size)
        if self.kappa < 1:
            raise InvalidInputError("kappa must be at least 1")
        self.tau0 = np.asarray(self.tau0, dtype=float).reshape(3)
        self.weights = np.asarray(self.weights, dtype=float).reshape(3)
        if np.any(self.weights < 0):
            raise InvalidInputError("rotation prior weights must be non-negative")
        if self.max_outer < 1:
            raise InvalidInputError("max_outer must be at least 1")

    @property
    def under_determined(self) -> bool:
        return int(self.mask.sum()) < 3 * self.kappa


@dataclass
class P1Result:
    code: SparseCode
    tau: np.ndarray
    shift: np.ndarray                 # world-frame root shift removed from y0
    objective_trace: list[float]
    outer_iterations: int
    warnings: list[str]


@dataclass
class SynthesisResult:
    q: np.ndarray                     # world-frame joint angles
    pose: np.ndarray                  # = forward_kinematics(q)
    code: SparseCode
    tau: np.ndarray
    objective_trace: list[float]
    outer_iterations: int
    ik_iterations: int
    ik_residual: float
    warnings: list[str]
    timings_ms: dict


# --------------------------------------------------------------------------
# rotation fitting (P1b)
# --------------------------------------------------------------------------

def _derivative_matrices(tau):
    tx, ty, tz = tau
    cx, sx = np.cos(tx), np.sin(tx)
    cy, sy = np.cos(ty), np.sin(ty)
    cz, sz = np.cos(tz), np.sin(tz)
    Rx = np.array([[1, 0, 0], [0, cx, -sx], [0, sx, cx]])
    Ry = np.array([[cy, 0, sy], [0, 1, 0], [-sy, 0, cy]])
    Rz = np.array([[cz, -sz, 0], [sz, cz, 0], [0, 0, 1]])
    dRx = np.array([[0, 0, 0], [0, -sx, -cx], [0, cx, -sx]])
    dRy = np.array([[-sy, 0, cy], [0, 0, 0], [-cy, 0, -sy]])
    dRz = np.array([[-sz, -cz, 0], [cz, -sz, 0], [0, 0, 0]])
    return [Rz @ Ry @ dRx, Rz @ dRy @ Rx, dRz @ Ry @ Rx]


def _centered_masked_diff(pts, tgt, m3, R, center_axes):
    """Masked difference of the rotated pose vs the target, with the mean
    over observed joints removed on translation-free axes."""
    diff = (pts @ R.T - tgt) * m3
    if center_axes is not None:
        for axis in range(3):
            if center_axes[axis] and m3[:, axis].any():
                diff[m3[:, axis], axis] -= diff[m3[:, axis], axis].mean()
    return diff


def rotation_objective(pose, target, mask, tau, tau0, weights, center_axes=None):
    """Masked alignment error of the rotated pose plus the rotation prior.

    ``center_axes`` marks axes on which the global translation is free; the
    error is then measured after removing the observed-joint mean there.
    """
    pts = np.asarray(pose, dtype=float).reshape(-1, 3)
    tgt = np.asarray(target, dtype=float).reshape(-1, 3)
    m3 = np.asarray(mask, dtype=bool).reshape(-1, 3)
    diff = _centered_masked_diff(pts, tgt, m3, rotation_matrix(tau), center_axes)
    dtau = np.asarray(tau) - np.asarray(tau0)
    return float(np.sum(diff * diff) + np.sum((np.asarray(weights) * dtau) ** 2))


def rotation_gradient(pose, target, mask, tau, tau0, weights, center_axes=None):
    """Analytic gradient of :func:`rotation_objective` in the three angles."""
    pts = np.asarray(pose, dtype=float).reshape(-1, 3)
    tgt = np.asarray(target, dtype=float).reshape(-1, 3)
    m3 = np.asarray(mask, dtype=bool).reshape(-1, 3)
    diff = _centered_masked_diff(pts, tgt, m3, rotation_matrix(tau), center_axes)
    derivs = _derivative_matrices(tau)
    w2 = np.asarray(weights, dtype=float) ** 2
    dtau = np.asarray(tau) - np.asarray(tau0)
    g = np.empty(3)
    for i in range(3):
        # centering is a symmetric projection, so it only needs to hit one side
        g[i] = 2.0 * np.sum(diff * ((pts @ derivs[i].T) * m3)) + 2.0 * w2[i] * dtau[i]
    return g


def fit_rotation(pose, target, mask, tau_init, tau0=None, weights=None, *,
                 max_iter: int = 200, grad_tol: float = 1e-8, center_axes=None):
    """Gradient descent with backtracking line search on the (P1b) objective.

    Returns the stationary point (infinity-norm of the gradient below
    ``grad_tol``) or the best iterate at the cap; never accepts an ascent
    step.
    """
    tau0 = np.zeros(3) if tau0 is None else np.asarray(tau0, dtype=float)
    weights = np.asarray(DEFAULT_WEIGHTS) if weights is None else np.asarray(weights, dtype=float)
    tau = np.asarray(tau_init, dtype=float).reshape(3).copy()
    pts = np.asarray(pose, dtype=float).reshape(-1, 3)
    m3 = np.asarray(mask, dtype=bool).reshape(-1, 3)
    curvature = 4.0 * float(np.sum((pts * m3.any(axis=1, keepdims=True)) ** 2)) \
        + 2.0 * float(np.max(weights) ** 2) + 1e-9
    alpha = 1.0 / curvature
    value = rotation_objective(pose, target, mask, tau, tau0, weights, center_axes)
    g = rotation_gradient(pose, target, mask, tau, tau0, weights, center_axes)
    prev_tau = prev_g = None
    for _ in range(max_iter):
        if np.abs(g).max() < grad_tol:
            break
        # Barzilai-Borwein step estimate, safeguarded by backtracking
        if prev_g is not None:
            s = tau - prev_tau
            yv = g - prev_g
            denom = float(yv @ yv)
            if denom > 0:
                bb = abs(float(s @ yv)) / denom
                if np.isfinite(bb) and bb > 0:
                    alpha = min(max(bb, 1e-3 / curvature), 1e6 / curvature)
        accepted = False
        for _ in range(60):
            tau_try = tau - alpha * g
            val_try = rotation_objective(pose, target, mask, tau_try, tau0,
                                         weights, center_axes)
            if val_try < value:
                prev_tau, prev_g = tau, g
                tau, value = tau_try, val_try
                g = rotation_gradient(pose, target, mask, tau, tau0, weights,
                                      center_axes)
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            break
    return canonical_angles(tau), value


# --------------------------------------------------------------------------
# (P1): alternating sparse coding and rotation fitting
# --------------------------------------------------------------------------

def observation_shift(y0: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Per-axis root shift: the observed root coordinate when present,
    otherwise the centroid of the observed joints on that axis."""
    pts = y0.reshape(-1, 3)
    m3 = mask.reshape(-1, 3)
    shift = np.zeros(3)
    for axis in range(3):
        if m3[0, axis]:
            shift[axis] = pts[0, axis]
        elif m3[:, axis].any():
            shift[axis] = pts[m3[:, axis], axis].mean()
    return shift


def _is_whole_joint(mask: np.ndarray) -> bool:
    m3 = mask.reshape(-1, 3)
    per_joint = m3.sum(axis=1)
    return bool(np.all((per_joint == 0) | (per_joint == 3)))


def _masked_system(dictionary: PoseDictionary, mask: np.ndarray, tau, ybar,
                   center_axes=None):
    """Rows of the rotated dictionary and target for the masked LS problem.

    For whole-joint masks with the frame anchored (root observed), the
    rotation moves to the target instead (blockwise rotation commutes with
    the mask), so the extracted dictionary rows are reused across iterations
    and requests. Translation-free axes center both sides over the observed
    joints, in the target frame where the rotation fit also measures.
    """
    centering = center_axes is not None and any(center_axes)
    if _is_whole_joint(mask) and not centering:
        ws = dictionary.workspace(mask)
        R = rotation_matrix(tau)
        v = (ybar.reshape(-1, 3) @ R).reshape(-1)   # inverse rotation applied
        return ws, ws.A, v[mask]
    atoms = dictionary.atoms
    R = rotation_matrix(tau)
    m3 = mask.reshape(-1, 3)
    rows = []
    for j in np.flatnonzero(m3.any(axis=1)):
        block = R @ atoms[3 * j:3 * j + 3]
        rows.append(block[m3[j]])
    M = np.concatenate(rows, axis=0)
    b = ybar[mask].copy()
    if centering:
        axis_of_row = np.flatnonzero(mask) % 3
        for axis in range(3):
            sel = axis_of_row == axis
            if center_axes[axis] and sel.any():
                M[sel] -= M[sel].mean(axis=0)
                b[sel] -= b[sel].mean()
    return None, M, b


def solve_p1(dictionary: PoseDictionary, request: SynthesisRequest) -> P1Result:
    """Alternate masked OMP (fixed rotation) with rotation fitting (fixed
    code) until the joint objective stops decreasing.

    Both half-steps are guarded so the objective trace is non-increasing.
    """
    mask = request.mask
    if not mask.any():
        raise InvalidInputError("mask excludes every coordinate")
    if dictionary.dim != request.y0.size:
        raise InvalidInputError("dictionary dimension does not match the pose")
    warnings: list[str] = []
    if request.under_determined:
        warnings.append(
            f"under-determined request: {int(mask.sum())} observed entries "
            f"for kappa={request.kappa}")
    shift = observation_shift(request.y0, mask)
    ybar = request.y0.copy()
    ybar.reshape(-1, 3)[...] -= shift
    ybar[~mask] = 0.0
    # axes where the root coordinate is unobserved have no anchored frame:
    # treat the global translation there as free (centered least squares)
    m3 = mask.reshape(-1, 3)
    center_axes = tuple(not bool(m3[0, a]) for a in range(3))

    rows = int(mask.sum())
    eff_kappa = max(1, min(request.kappa, int(rows / 1.5)))
    if eff_kappa < request.kappa:
        warnings.append(f"kappa capped at {eff_kappa} by {rows} observed entries")

    tau = request.tau0.astype(float).copy()
    w = request.weights.astype(float)
    code: SparseCode | None = None
    trace: list[float] = []

    def prior(t):
        return float(np.sum((w * (t - request.tau0)) ** 2))

    def half_cycle(tau_in, code_prev):
        """One OMP half-step then one rotation half-step, both guarded."""
        ws, M, b = _masked_system(dictionary, mask, tau_in, ybar, center_axes)
        new_code = omp(M, b, eff_kappa, workspace=ws)
        if code_prev is not None:
            old_term = b - M[:, code_prev.support] @ code_prev.values \
                if code_prev.support.size else b
            old_res = float(old_term @ old_term)
            if new_code.residual ** 2 > old_res:
                new_code = SparseCode(code_prev.support, code_prev.values,
                                      code_prev.size, np.sqrt(old_res))
        omp_obj = new_code.residual ** 2 + prior(tau_in)
        model = dictionary.atoms[:, new_code.support] @ new_code.values \
            if new_code.support.size else np.zeros(dictionary.dim)
        tau_out, rot_obj = fit_rotation(model, ybar, mask, tau_in, request.tau0,
                                        w, max_iter=request.rotation_max_iter,
                                        center_axes=center_axes)
        if rot_obj > omp_obj:
            tau_out, rot_obj = tau_in, omp_obj
        return new_code, tau_out, omp_obj, rot_obj

    # first cycle: try a grid of y-axis starts, unless the coding at tau0
    # already explains the observations or the prior alone prices every
    # grid candidate above the current objective
    code, tau, omp_obj, rot_obj = half_cycle(tau, None)
    b_norm2 = float(ybar[mask] @ ybar[mask])
    grid_floor = (w[1] * np.pi / 4.0) ** 2
    if (code.residual ** 2 > 1e-6 * max(b_norm2, 1e-30)
            and grid_floor < rot_obj):
        for step in range(1, 8):
            start = canonical_angles(
                request.tau0 + np.array([0.0, step * np.pi / 4.0, 0.0]))
            cand = half_cycle(start, None)
            if cand[3] < rot_obj:
                code, tau, omp_obj, rot_obj = cand
    trace.extend([omp_obj, rot_obj])

    outer = 1
    for outer in range(2, request.max_outer + 1):
        prev_support, prev_tau = code.support, tau
        code, tau, omp_obj, rot_obj = half_cycle(tau, code)
        trace.extend([omp_obj, rot_obj])
        prev, cur = trace[-3], trace[-1]
        if prev - cur <= request.outer_tol * max(prev, 1e-30):
            break
        # a repeated (support, tau) pair is a fixed point of the cycle map
        if (np.array_equal(code.support, prev_support)
                and np.abs(tau - prev_tau).max() < 1e-12):
            break

    return P1Result(code=code, tau=canonical_angles(tau), shift=shift,
                    objective_trace=trace, outer_iterations=outer,
                    warnings=warnings)


# --------------------------------------------------------------------------
# (P0): the full pipeline
# --------------------------------------------------------------------------

def synthesize(dictionary: PoseDictionary, skeleton: Skeleton,
               request: SynthesisRequest) -> SynthesisResult:
    """Solve (P1), normalize bone lengths, run IK, and re-apply the input's
    rotation and root translation."""
    if dictionary.dim != skeleton.pose_dim:
        raise InvalidInputError("dictionary and skeleton dimensions differ")
    t_start = time.perf_counter()
    p1 = solve_p1(dictionary, request)
    t_p1 = time.perf_counter()

    if p1.code.support.size == 0:
        raise DataError("sparse coding selected no atoms; input carries no signal")
    model = dictionary.atoms[:, p1.code.support] @ p1.code.values
    tilde = skeleton.normalize_pose(model)
    t_norm = time.perf_counter()

    warnings = list(p1.warnings)
    try:
        ik = skeleton.ik_solve(tilde, damping=request.ik_damping,
                               max_iter=request.ik_max_iter, tol=request.ik_tol)
        q_model, ik_iters, ik_res = ik.q, ik.iterations, ik.residual
    except IKConvergenceError as e:
        q_model, ik_iters, ik_res = e.best_q, e.iterations, e.residual
        warnings.append(f"IK did not reach tolerance (residual {e.residual:.3e}); "
                        "returning best iterate")
    t_ik = time.perf_counter()

    # world placement: rotate by tau, then translate to the least-squares
    # fit of the observed coordinates (the root translation is a free
    # variable of the model, so the anchor is estimated, not copied)
    R = rotation_matrix(p1.tau)
    y_model = skeleton.forward_kinematics(q_model)
    rotated = rotate_pose(p1.tau, y_model)
    m3 = request.mask.reshape(-1, 3)
    rot_pts = rotated.reshape(-1, 3)
    y0_pts = request.y0.reshape(-1, 3)
    t_world = p1.shift.copy()
    for axis in range(3):
        if m3[:, axis].any():
            t_world[axis] = float(
                (y0_pts[m3[:, axis], axis] - rot_pts[m3[:, axis], axis]).mean())
    q_world = q_model.copy()
    q_world[:3] = R @ q_model[:3] + t_world
    q_world[3:6] = matrix_to_tau(R @ rotation_matrix(q_model[3:6]))
    pose_world = skeleton.forward_kinematics(q_world)
    t_end = time.perf_counter()

    return SynthesisResult(
        q=q_world, pose=pose_world, code=p1.code, tau=p1.tau,
        objective_trace=p1.objective_trace, outer_iterations=p1.outer_iterations,
        ik_iterations=ik_iters, ik_residual=ik_res, warnings=warnings,
        timings_ms={
            "p1": (t_p1 - t_start) * 1e3,
            "normalize": (t_norm - t_p1) * 1e3,
            "ik": (t_ik - t_norm) * 1e3,
            "total": (t_end - t_start) * 1e3,
        })


def denoise_pose(dictionary: PoseDictionary, skeleton: Skeleton, y0, kappa: int = 3,
                 tau0=None, weights=None, **solver_kw) -> SynthesisResult:
    """Synthesize with every joint of the input as a soft constraint."""
    y0 = np.asarray(y0, dtype=float)
    request = SynthesisRequest(
        y0=y0, mask=np.ones(y0.size, dtype=bool), kappa=kappa,
        tau0=np.zeros(3) if tau0 is None else tau0,
        weights=np.asarray(DEFAULT_WEIGHTS) if weights is None else weights,
        **solver_kw)
    return synthesize(dictionary, skeleton, request)


def complete_pose(dictionary: PoseDictionary, skeleton: Skeleton,
                  observed: list[tuple[int, tuple]], kappa: int = 3,
                  tau0=None, weights=None, **solver_kw) -> SynthesisResult:
    """Reconstruct a full pose from per-joint 3D points or 2D screen labels.

    2D labels constrain the x/y coordinates under the orthographic screen
    convention; depth stays free. Requires at least two observed joints.
    """
    if len(observed) < 2:
        raise InvalidInputError("need at least 2 observed joints")
    seen: set[int] = set()
    dim = skeleton.pose_dim
    y0 = np.zeros(dim)
    mask = np.zeros(dim, dtype=bool)
    for joint_id, coords in observed:
        joint_id = int(joint_id)
        if not 1 <= joint_id <= skeleton.joint_count:
            raise InvalidInputError(f"joint id {joint_id} out of range")
        if joint_id in seen:
            raise InvalidInputError(f"joint id {joint_id} observed twice")
        seen.add(joint_id)
        coords = np.asarray(coords, dtype=float).reshape(-1)
        base = 3 * (joint_id - 1)
        if coords.size == 3:
            y0[base:base + 3] = coords
            mask[base:base + 3] = True
        elif coords.size == 2:
            y0[base:base + 2] = coords
            mask[base:base + 2] = True
        else:
            raise InvalidInputError("observations must be 2D or 3D points")
    request = SynthesisRequest(
        y0=y0, mask=mask, kappa=kappa,
        tau0=np.zeros(3) if tau0 is None else tau0,
        weights=np.asarray(DEFAULT_WEIGHTS) if weights is None else weights,
        **solver_kw)
    return synthesize(dictionary, skeleton, request)


def reprojection_residual(result: SynthesisResult,
                          observed: list[tuple[int, tuple]]) -> float:
    """RMS error between the output pose and the observations, 2D labels
    compared in the screen plane only."""
    errs = []
    pts = result.pose.reshape(-1, 3)
    for joint_id, coords in observed:
        coords = np.asarray(coords, dtype=float).reshape(-1)
        p = pts[int(joint_id) - 1]
        errs.append(np.sum((p[:coords.size] - coords) ** 2))
    return float(np.sqrt(np.mean(errs)))
