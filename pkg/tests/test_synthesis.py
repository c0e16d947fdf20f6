"""Alternating sparse-code/rotation solver and the full synthesis pipeline."""

import numpy as np
import pytest

from sparsepose.dataset import mask_from_joints, mask_identity
from sparsepose.errors import InvalidInputError
from sparsepose.skeleton import default_skeleton, rotate_pose, rotation_matrix
from sparsepose.sparse import PoseDictionary
from sparsepose.synthesis import (
    SynthesisRequest,
    complete_pose,
    denoise_pose,
    fit_rotation,
    observation_shift,
    reprojection_residual,
    rotation_gradient,
    rotation_objective,
    solve_p1,
    synthesize,
)


# --------------------------------------------------------------------------
# fixtures: dictionaries whose atoms are realizable skeleton poses
# --------------------------------------------------------------------------

@pytest.fixture(scope="module")
def skel():
    return default_skeleton()


@pytest.fixture(scope="module")
def fk_poses(skel):
    rng = np.random.default_rng(42)
    poses = []
    for _ in range(24):
        q = rng.normal(scale=0.35, size=46)
        q[:6] = 0.0
        poses.append(skel.forward_kinematics(q))
    return np.asarray(poses)


@pytest.fixture(scope="module")
def pose_dict(fk_poses):
    """Atoms from normalized FK poses, so single-atom codes are realizable."""
    return PoseDictionary.from_poses(fk_poses, kappa_train=3)


@pytest.fixture(scope="module")
def incoherent_dict():
    """Random unit atoms: low mutual coherence, so exact support recovery by
    greedy pursuit is well-posed for the generate-and-recover oracles.
    Root blocks are zeroed like real atoms trained on root-shifted poses."""
    rng = np.random.default_rng(77)
    atoms = rng.normal(size=(69, 40))
    atoms[:3] = 0.0
    return PoseDictionary(atoms / np.linalg.norm(atoms, axis=0))


def single_atom_input(pose_dict, fk_poses, atom):
    """A dictionary-generated pose with standard bone lengths: the original
    FK pose, whose code is one atom scaled by the pose norm."""
    x = np.zeros(pose_dict.n)
    x[atom] = np.linalg.norm(fk_poses[atom])
    return fk_poses[atom].copy(), x


# --------------------------------------------------------------------------
# rotation fitting oracles
# --------------------------------------------------------------------------

def fd_rotation_gradient(pose, target, mask, tau, tau0, weights, h=1e-6):
    g = np.zeros(3)
    for i in range(3):
        e = np.zeros(3)
        e[i] = h
        g[i] = (rotation_objective(pose, target, mask, tau + e, tau0, weights)
                - rotation_objective(pose, target, mask, tau - e, tau0, weights)) / (2 * h)
    return g


def test_rotation_gradient_matches_finite_differences():
    rng = np.random.default_rng(0)
    for _ in range(50):
        pose = rng.normal(size=69)
        target = rng.normal(size=69)
        mask = rng.random(69) < 0.7
        if not mask.any():
            mask[0] = True
        tau = rng.uniform(-1.2, 1.2, size=3)
        tau0 = rng.normal(scale=0.3, size=3)
        weights = np.abs(rng.normal(size=3))
        g = rotation_gradient(pose, target, mask, tau, tau0, weights)
        fd = fd_rotation_gradient(pose, target, mask, tau, tau0, weights)
        denom = np.maximum(np.abs(fd), 1e-6)
        assert np.all(np.abs(g - fd) / denom < 1e-4)


def test_rotation_gradient_with_free_translation_axes():
    rng = np.random.default_rng(30)
    for _ in range(20):
        pose = rng.normal(size=69)
        target = rng.normal(size=69)
        mask = rng.random(69) < 0.6
        mask[:3] = False                      # root unobserved
        if not mask.any():
            mask[3] = True
        center = (True, True, True)
        tau = rng.uniform(-1.0, 1.0, size=3)
        tau0 = np.zeros(3)
        weights = np.abs(rng.normal(size=3))
        g = rotation_gradient(pose, target, mask, tau, tau0, weights, center)
        h = 1e-6
        fd = np.zeros(3)
        for i in range(3):
            e = np.zeros(3)
            e[i] = h
            fd[i] = (rotation_objective(pose, target, mask, tau + e, tau0, weights, center)
                     - rotation_objective(pose, target, mask, tau - e, tau0, weights, center)) / (2 * h)
        denom = np.maximum(np.abs(fd), 1e-6)
        assert np.all(np.abs(g - fd) / denom < 1e-4)


def test_fit_rotation_aligned_input_returns_zero():
    rng = np.random.default_rng(1)
    pose = rng.normal(size=69)
    tau, value = fit_rotation(pose, pose, mask_identity(), np.zeros(3),
                              np.zeros(3), np.zeros(3))
    assert np.allclose(tau, 0.0, atol=1e-9)
    assert value < 1e-18


def test_fit_rotation_single_axis_closed_form():
    # points in the x-z plane rotated about y: closed-form arctan oracle
    rng = np.random.default_rng(2)
    pts = rng.normal(size=(23, 3))
    pts[:, 1] = 0.0
    true_ty = 0.61
    target = rotate_pose((0.0, true_ty, 0.0), pts.reshape(-1))
    # oracle: ty = atan2(sum of cross terms, sum of dots) in the x-z plane
    a = pts[:, [0, 2]]
    b = target.reshape(-1, 3)[:, [0, 2]]
    # rotation about y maps (x, z) with angle ty: x' = c x + s z; z' = -s x + c z
    cross = np.sum(a[:, 1] * b[:, 0] - a[:, 0] * b[:, 1])
    dot = np.sum(a[:, 0] * b[:, 0] + a[:, 1] * b[:, 1])
    oracle_ty = np.arctan2(cross, dot)
    assert abs(oracle_ty - true_ty) < 1e-12

    pins = np.array([1000.0, 0.0, 1000.0])   # pin x/z to the prior
    tau, _ = fit_rotation(pts.reshape(-1), target, mask_identity(),
                          np.zeros(3), np.zeros(3), pins)
    assert abs(tau[1] - oracle_ty) < 1e-6
    assert abs(tau[0]) < 1e-6 and abs(tau[2]) < 1e-6


# --------------------------------------------------------------------------
# solve_p1
# --------------------------------------------------------------------------

def test_p1_noiseless_identity_rotation(incoherent_dict):
    rng = np.random.default_rng(3)
    x_true = np.zeros(incoherent_dict.n)
    picks = rng.choice(incoherent_dict.n, size=3, replace=False)
    x_true[picks] = (20.0, -8.0, 5.0)
    y0 = incoherent_dict.atoms @ x_true
    req = SynthesisRequest(y0=y0, mask=mask_identity(), kappa=3,
                           weights=np.zeros(3))
    res = solve_p1(incoherent_dict, req)
    assert set(res.code.support) == set(picks)
    recon = incoherent_dict.atoms @ res.code.to_dense()
    assert np.mean((recon - y0) ** 2) < 1e-12
    assert np.allclose(res.tau, 0.0, atol=1e-6)


def test_p1_recovers_rotation(incoherent_dict):
    rng = np.random.default_rng(4)
    x_true = np.zeros(incoherent_dict.n)
    picks = rng.choice(incoherent_dict.n, size=3, replace=False)
    x_true[picks] = (18.0, 7.0, -4.0)
    clean = incoherent_dict.atoms @ x_true
    y0 = rotate_pose((0.0, 0.7, 0.0), clean)
    req = SynthesisRequest(y0=y0, mask=mask_identity(), kappa=3,
                           weights=np.array([0.05, 0.05, 0.05]))
    res = solve_p1(incoherent_dict, req)
    assert abs(res.tau[1] - 0.7) < 1e-3
    recon = incoherent_dict.atoms @ res.code.to_dense()
    assert np.mean((recon - clean) ** 2) < 1e-8


def test_p1_prior_dominates_with_large_weights(pose_dict):
    rng = np.random.default_rng(5)
    y0 = pose_dict.atoms[:, 0] * 25.0
    tau0 = np.array([0.0, 1.0, 0.0])
    req = SynthesisRequest(y0=y0, mask=mask_identity(), kappa=2, tau0=tau0,
                           weights=np.array([1e6, 1e6, 1e6]))
    res = solve_p1(pose_dict, req)
    assert np.allclose(res.tau, tau0, atol=1e-6)


def test_p1_objective_trace_monotone(pose_dict):
    rng = np.random.default_rng(6)
    y0 = pose_dict.atoms @ (rng.normal(size=pose_dict.n) *
                            (rng.random(pose_dict.n) < 0.2)) + rng.normal(size=69)
    req = SynthesisRequest(y0=y0, mask=mask_identity(), kappa=4)
    res = solve_p1(pose_dict, req)
    trace = np.asarray(res.objective_trace)
    assert np.all(np.diff(trace) <= 1e-9)


def test_p1_rejects_all_zero_mask(pose_dict):
    with pytest.raises(InvalidInputError):
        req = SynthesisRequest(y0=np.zeros(69), mask=np.zeros(69, dtype=bool))
        solve_p1(pose_dict, req)


def test_p1_kappa_monotone_masked_residual(pose_dict):
    rng = np.random.default_rng(7)
    y0 = rng.normal(size=69) * 5.0
    mask = mask_from_joints(range(1, 13))
    prev = None
    for kappa in range(1, 6):
        req = SynthesisRequest(y0=y0, mask=mask, kappa=kappa, max_outer=1,
                               weights=np.zeros(3))
        res = solve_p1(pose_dict, req)
        if prev is not None:
            assert res.code.residual <= prev + 1e-12
        prev = res.code.residual


def test_observation_shift_uses_root_when_present():
    y0 = np.arange(69, dtype=float)
    assert np.array_equal(observation_shift(y0, mask_identity()), [0.0, 1.0, 2.0])
    mask = mask_from_joints([2, 3])
    shift = observation_shift(y0, mask)
    pts = y0.reshape(23, 3)
    assert np.allclose(shift, pts[1:3].mean(axis=0))


def test_under_determined_flag(pose_dict):
    req = SynthesisRequest(y0=np.zeros(69), mask=mask_from_joints([1]), kappa=3)
    assert req.under_determined
    req2 = SynthesisRequest(y0=np.zeros(69), mask=mask_identity(), kappa=3)
    assert not req2.under_determined


# --------------------------------------------------------------------------
# synthesize end to end
# --------------------------------------------------------------------------

def test_synthesize_generative_recovery(pose_dict, fk_poses, skel):
    # rotated single-atom pose, full mask, no prior: near-exact recovery
    clean, x_true = single_atom_input(pose_dict, fk_poses, atom=5)
    tau_true = np.array([0.12, 0.5, -0.2])
    y0 = rotate_pose(tau_true, clean)
    req = SynthesisRequest(y0=y0, mask=mask_identity(), kappa=1,
                           weights=np.zeros(3))
    res = synthesize(pose_dict, skel, req)
    assert np.mean((res.pose - y0) ** 2) < 1e-6
    assert np.allclose(
        rotation_matrix(res.tau), rotation_matrix(tau_true), atol=1e-3)
    assert np.allclose(res.pose, skel.forward_kinematics(res.q), atol=1e-12)


def test_synthesize_in_sample_reconstruction(pose_dict, fk_poses, skel):
    clean, _ = single_atom_input(pose_dict, fk_poses, atom=2)
    res = denoise_pose(pose_dict, skel, clean, kappa=1, weights=np.zeros(3))
    assert np.mean((res.pose - clean) ** 2) < 1e-6


def test_synthesize_output_bones_standard(pose_dict, fk_poses, skel):
    rng = np.random.default_rng(8)
    clean, _ = single_atom_input(pose_dict, fk_poses, atom=7)
    y0 = clean + rng.normal(size=69)
    res = denoise_pose(pose_dict, skel, y0, kappa=3)
    pts = res.pose.reshape(23, 3)
    for chain in skel.chains:
        for prev, cur in zip(chain, chain[1:]):
            length = np.linalg.norm(pts[cur - 1] - pts[prev - 1])
            assert abs(length - skel.bone_lengths[cur]) < 1e-6


def test_synthesize_support_bounded(pose_dict, skel):
    rng = np.random.default_rng(9)
    y0 = rng.normal(size=69) * 6.0
    for kappa in (1, 2, 5):
        res = denoise_pose(pose_dict, skel, y0, kappa=kappa)
        assert res.code.support.size <= kappa


def test_completion_six_joints(pose_dict, fk_poses, skel):
    clean, _ = single_atom_input(pose_dict, fk_poses, atom=11)
    pts = clean.reshape(23, 3)
    observed = [(j, tuple(pts[j - 1])) for j in (16, 20, 19, 23, 5, 9)]
    res = complete_pose(pose_dict, skel, observed, kappa=2)
    # full pose comes back with standard bones
    out = res.pose.reshape(23, 3)
    for chain in skel.chains:
        for prev, cur in zip(chain, chain[1:]):
            assert abs(np.linalg.norm(out[cur - 1] - out[prev - 1])
                       - skel.bone_lengths[cur]) < 1e-6
    # observed joints are honored within a soft-constraint residual
    err = np.sqrt(np.mean([(out[j - 1] - pts[j - 1]) ** 2 for j in (16, 20, 19, 23, 5, 9)]))
    assert err < 1.0


def test_completion_all_joints_equals_full_mask(pose_dict, fk_poses, skel):
    clean, _ = single_atom_input(pose_dict, fk_poses, atom=3)
    pts = clean.reshape(23, 3)
    observed = [(j + 1, tuple(pts[j])) for j in range(23)]
    a = complete_pose(pose_dict, skel, observed, kappa=2)
    b = denoise_pose(pose_dict, skel, clean, kappa=2)
    assert np.allclose(a.pose, b.pose, atol=1e-9)


def test_completion_validates_input(pose_dict, skel):
    with pytest.raises(InvalidInputError):
        complete_pose(pose_dict, skel, [(1, (0.0, 0.0, 0.0))])
    with pytest.raises(InvalidInputError):
        complete_pose(pose_dict, skel,
                      [(1, (0.0, 0.0, 0.0)), (1, (1.0, 1.0, 1.0))])


def test_completion_2d_project_and_recover(pose_dict, fk_poses, skel):
    clean, _ = single_atom_input(pose_dict, fk_poses, atom=9)
    pts = clean.reshape(23, 3)
    labeled = [1, 3, 5, 7, 9, 12, 15, 17, 19, 21]
    observed = [(j, (pts[j - 1][0], pts[j - 1][1])) for j in labeled]
    res = complete_pose(pose_dict, skel, observed, kappa=2)
    resid = reprojection_residual(res, observed)
    assert resid < 0.5
    depth_err = np.sqrt(np.mean((res.pose.reshape(23, 3)[:, 2] - pts[:, 2]) ** 2))
    assert np.isfinite(depth_err)   # reported, not asserted


def test_drag_edit_regression(pose_dict, fk_poses, skel):
    # drag the left wrist 30% of body height away; output keeps standard
    # bones and moves untouched joints less than the edit magnitude
    clean, _ = single_atom_input(pose_dict, fk_poses, atom=4)
    pts = clean.reshape(23, 3).copy()
    height = pts[:, 1].max() - pts[:, 1].min()
    drag = np.array([0.3 * height, 0.0, 0.0])
    pts[18] += drag                               # joint 19, left wrist
    res = denoise_pose(pose_dict, skel, pts.reshape(-1), kappa=2)
    out = res.pose.reshape(23, 3)
    untouched = [j for j in range(23) if j != 18]
    dev = np.linalg.norm(out[untouched] - clean.reshape(23, 3)[untouched], axis=1)
    assert dev.max() < np.linalg.norm(drag)
    for chain in skel.chains:
        for prev, cur in zip(chain, chain[1:]):
            assert abs(np.linalg.norm(out[cur - 1] - out[prev - 1])
                       - skel.bone_lengths[cur]) < 1e-6
