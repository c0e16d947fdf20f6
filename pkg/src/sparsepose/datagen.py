"""Deterministic synthetic motion generator.

Produces smooth multi-style joint-angle trajectories on the standard
skeleton, used as a stand-in for motion-capture subjects when benchmarking
in environments without access to a mocap corpus. Each style is a base
posture plus two sparse sinusoidal harmonics per degree of freedom, which
yields multi-modal, low-dimensional pose manifolds after forward kinematics.
"""

from __future__ import annotations

import numpy as np

from .skeleton import Skeleton

# per-axis oscillation envelope (radians) by joint name
_ENVELOPE = {
    "lhip": {"rx": 0.50, "ry": 0.18, "rz": 0.15},
    "rhip": {"rx": 0.50, "ry": 0.18, "rz": 0.15},
    "lknee": {"rx": 0.75, "ry": 0.18},
    "rknee": {"rx": 0.75, "ry": 0.18},
    "lankle": {"rx": 0.35, "rz": 0.15},
    "rankle": {"rx": 0.35, "rz": 0.15},
    "lowerback": {"rx": 0.16, "ry": 0.28, "rz": 0.12},
    "upperback": {"rx": 0.16, "ry": 0.24, "rz": 0.10},
    "thorax": {"rx": 0.12, "ry": 0.20, "rz": 0.08},
    "lowerneck": {"rx": 0.22, "ry": 0.25, "rz": 0.12},
    "upperneck": {"rx": 0.22, "rz": 0.12},
    "lclavicle": {"ry": 0.14, "rz": 0.14},
    "rclavicle": {"ry": 0.14, "rz": 0.14},
    "lshoulder": {"rx": 0.60, "ry": 0.30, "rz": 0.35},
    "rshoulder": {"rx": 0.60, "ry": 0.30, "rz": 0.35},
    "lelbow": {"rx": 0.70},
    "relbow": {"rx": 0.70},
}

# constant posture offsets keeping limbs slightly bent (radians)
_REST_BIAS = {
    ("lknee", "rx"): 0.35, ("rknee", "rx"): 0.35,
    ("lelbow", "rx"): 0.45, ("relbow", "rx"): 0.45,
}


def _envelope_vector(skeleton: Skeleton) -> np.ndarray:
    env = np.zeros(skeleton.dof_count)
    for i, (joint_id, dof) in enumerate(skeleton.dof_map):
        if i < 6:
            continue
        name = skeleton.joint(joint_id).name
        env[i] = _ENVELOPE.get(name, {}).get(dof, 0.1)
    return env


def _bias_vector(skeleton: Skeleton) -> np.ndarray:
    bias = np.zeros(skeleton.dof_count)
    for i, (joint_id, dof) in enumerate(skeleton.dof_map):
        if i < 6:
            continue
        name = skeleton.joint(joint_id).name
        bias[i] = _REST_BIAS.get((name, dof), 0.0)
    return bias


def generate_subject(skeleton: Skeleton, *, frames: int = 4322, styles: int = 10,
                     seed: int = 7, fps: float = 30.0, base_scale: float = 1.2,
                     osc_scale: float = 0.4, active_fraction: float = 0.4) -> np.ndarray:
    """Joint-angle trajectories, shape (frames, dof_count).

    Styles are separated (base postures spread wider than the within-style
    oscillation) so the pooled pose distribution is multi-modal rather than
    one elongated Gaussian.
    """
    rng = np.random.default_rng(seed)
    env = _envelope_vector(skeleton)
    bias = _bias_vector(skeleton)
    n_dof = skeleton.dof_count
    counts = [frames // styles] * styles
    for i in range(frames - sum(counts)):
        counts[i] += 1
    blocks = []
    for count in counts:
        base = bias + env * rng.normal(scale=base_scale, size=n_dof)
        active1 = rng.random(n_dof) < active_fraction
        active2 = rng.random(n_dof) < 0.3
        amp1 = env * np.abs(rng.normal(scale=osc_scale, size=n_dof)) * active1
        amp2 = env * np.abs(rng.normal(scale=0.4 * osc_scale, size=n_dof)) * active2
        f1 = rng.uniform(0.5, 1.6)                      # Hz
        phase1 = rng.uniform(0.0, 2.0 * np.pi, size=n_dof)
        phase2 = rng.uniform(0.0, 2.0 * np.pi, size=n_dof)
        t = np.arange(count)[:, None] / fps
        q = (base[None, :]
             + amp1[None, :] * np.sin(2.0 * np.pi * f1 * t + phase1[None, :])
             + amp2[None, :] * np.sin(4.0 * np.pi * f1 * t + phase2[None, :]))
        q += rng.normal(scale=0.012, size=q.shape)      # sensor-like jitter
        # global track: slow wander and turn; zeroed again at ingestion
        q[:, 0] = 2.0 * np.sin(0.3 * t[:, 0] + phase1[0])
        q[:, 1] = 0.15 * np.sin(2.0 * np.pi * f1 * t[:, 0])
        q[:, 2] = 1.5 * t[:, 0] * rng.uniform(0.2, 0.6)
        q[:, 3:6] = 0.15 * np.sin(0.7 * t[:, 0:1] + phase1[3:6][None, :])
        blocks.append(q)
    return np.concatenate(blocks, axis=0)
