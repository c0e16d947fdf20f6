"""Pose file formats, preprocessing, splitting, and corruption."""

import numpy as np
import pytest

from sparsepose import datagen
from sparsepose.dataset import (
    CorruptionSpec,
    PoseSet,
    corrupt,
    load_poses,
    mask_from_joints,
    mask_identity,
    preprocess,
    save_angle_frames,
    save_poses,
    split,
)
from sparsepose.errors import FormatError, InvalidInputError
from sparsepose.skeleton import default_skeleton


def make_set(rng, m=10):
    return PoseSet(rng.normal(size=(m, 69)))


# --------------------------------------------------------------------------
# file round trips
# --------------------------------------------------------------------------

def test_load_three_text_frames(tmp_path):
    rng = np.random.default_rng(0)
    ps = make_set(rng, 3)
    path = tmp_path / "poses.txt"
    save_poses(path, ps, fmt="txt")
    loaded = load_poses(path)
    assert len(loaded) == 3
    assert loaded.skipped == 0
    # loading preprocesses: root at origin
    assert np.allclose(loaded.poses[:, :3], 0.0)


def test_binary_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    ps = preprocess(make_set(rng, 7))
    path = tmp_path / "poses.spp"
    save_poses(path, ps, fmt="bin")
    loaded = load_poses(path)
    assert np.allclose(loaded.poses, ps.poses)
    assert path.open("rb").read(4) == b"SPPS"


def test_empty_file_gives_empty_set(tmp_path):
    path = tmp_path / "empty.txt"
    path.write_text("")
    loaded = load_poses(path)
    assert len(loaded) == 0
    assert loaded.skipped == 0


def test_wrong_dimension_is_schema_error(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text(" ".join(["0.0"] * 68) + "\n")
    with pytest.raises(FormatError):
        load_poses(path)


def test_parse_error_carries_line_number(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text(" ".join(["0.0"] * 69) + "\n" + "oops " * 69 + "\n")
    with pytest.raises(FormatError) as exc:
        load_poses(path)
    assert exc.value.line == 2


def test_missing_file(tmp_path):
    with pytest.raises(FormatError):
        load_poses(tmp_path / "nope.txt")


# --------------------------------------------------------------------------
# angle-frame ingestion
# --------------------------------------------------------------------------

def test_angle_frames_round_trip(tmp_path):
    skel = default_skeleton()
    rng = np.random.default_rng(2)
    q = rng.normal(scale=0.3, size=(4, 46))
    path = tmp_path / "subject.amc"
    save_angle_frames(path, skel, q)
    loaded = load_poses(path, fmt="asf-amc", skeleton=skel)
    assert len(loaded) == 4
    # ingestion zeroes the global track before FK
    expect = q.copy()
    expect[:, :6] = 0.0
    for i in range(4):
        assert np.allclose(loaded.poses[i], skel.forward_kinematics(expect[i]), atol=1e-8)
    assert np.allclose(loaded.poses[:, :3], 0.0)


def test_angle_frames_trim_unknown_channels(tmp_path):
    skel = default_skeleton()
    q = np.zeros((1, 46))
    path = tmp_path / "subject.amc"
    save_angle_frames(path, skel, q)
    # splice two channels the skeleton does not declare (toes, fingers)
    lines = path.read_text().splitlines()
    lines.insert(4, "ltoes 12.5")
    lines.insert(5, "lfingers 3.0 4.0")
    path.write_text("\n".join(lines) + "\n")
    loaded = load_poses(path, fmt="asf-amc", skeleton=skel)
    assert len(loaded) == 1
    assert loaded.skipped == 0


def test_angle_frames_incomplete_frame_skipped(tmp_path):
    skel = default_skeleton()
    q = np.zeros((2, 46))
    path = tmp_path / "subject.amc"
    save_angle_frames(path, skel, q)
    lines = [l for l in path.read_text().splitlines() if not l.startswith("lhip")]
    path.write_text("\n".join(lines) + "\n")
    loaded = load_poses(path, fmt="asf-amc", skeleton=skel)
    assert len(loaded) == 0
    assert loaded.skipped == 2


def test_synthetic_subject_frame_count(tmp_path):
    # the bundled stand-in for the walking subject: 4322 frames pre-split,
    # matching the published test-half size of 2161 after a 50% split
    skel = default_skeleton()
    q = datagen.generate_subject(skel, frames=4322, seed=7)
    assert q.shape == (4322, 46)
    path = tmp_path / "s07.amc"
    save_angle_frames(path, skel, q)
    ps = load_poses(path, fmt="asf-amc", skeleton=skel, subject="07")
    assert len(ps) == 4322
    train, test = split(ps, 0.5, seed=11)
    assert len(test) == 2161


# --------------------------------------------------------------------------
# preprocessing and splitting
# --------------------------------------------------------------------------

def test_preprocess_idempotent():
    rng = np.random.default_rng(3)
    ps = make_set(rng)
    once = preprocess(ps)
    twice = preprocess(once)
    assert np.array_equal(once.poses, twice.poses)


def test_split_exact_and_disjoint():
    rng = np.random.default_rng(4)
    ps = make_set(rng, 10)
    a, b = split(ps, 0.5, seed=0)
    assert len(a) == 5 and len(b) == 5
    seen = {tuple(p) for p in a.poses} | {tuple(p) for p in b.poses}
    assert len(seen) == 10


def test_split_deterministic():
    rng = np.random.default_rng(5)
    ps = make_set(rng, 20)
    a1, b1 = split(ps, 0.3, seed=42)
    a2, b2 = split(ps, 0.3, seed=42)
    assert np.array_equal(a1.poses, a2.poses)
    assert np.array_equal(b1.poses, b2.poses)


def test_split_rejects_bad_fraction():
    rng = np.random.default_rng(6)
    with pytest.raises(InvalidInputError):
        split(make_set(rng), 1.0, seed=0)


# --------------------------------------------------------------------------
# corruption
# --------------------------------------------------------------------------

def test_dense_zero_sigma_is_identity():
    rng = np.random.default_rng(7)
    ps = make_set(rng)
    out, masks = corrupt(ps, CorruptionSpec("dense-gaussian", sigma=0.0, seed=1))
    assert np.array_equal(out.poses, ps.poses)
    assert all(m.all() for m in masks)


def test_sparse_exact_joint_count():
    rng = np.random.default_rng(8)
    ps = make_set(rng, 30)
    out, _ = corrupt(ps, CorruptionSpec("sparse-gaussian", joint_fraction=0.2, seed=2))
    diff = (out.poses - ps.poses).reshape(len(ps), 23, 3)
    corrupted_joints = np.any(diff != 0.0, axis=2).sum(axis=1)
    assert np.all(corrupted_joints == 5)   # round(0.2 * 23)


def test_completion_mask_has_18_ones():
    rng = np.random.default_rng(9)
    ps = make_set(rng)
    spec = CorruptionSpec("mask-completion", observed_joints=(16, 20, 19, 23, 5, 9))
    out, masks = corrupt(ps, spec)
    assert masks[0].sum() == 18
    assert np.array_equal(out.poses[:, masks[0]], ps.poses[:, masks[0]])
    assert np.all(out.poses[:, ~masks[0]] == 0.0)


def test_corrupt_is_pure():
    rng = np.random.default_rng(10)
    ps = make_set(rng)
    before = ps.poses.copy()
    corrupt(ps, CorruptionSpec("dense-gaussian", seed=3))
    corrupt(ps, CorruptionSpec("sparse-gaussian", seed=3))
    corrupt(ps, CorruptionSpec("mask-completion", observed_joints=(1, 2)))
    assert np.array_equal(ps.poses, before)


def test_dense_noise_statistics():
    rng = np.random.default_rng(11)
    ps = PoseSet(rng.normal(size=(2000, 69)))
    sigma = 1.0
    out, _ = corrupt(ps, CorruptionSpec("dense-gaussian", sigma=sigma, seed=4))
    noise = (out.poses - ps.poses).ravel()
    n = noise.size
    assert n >= 1e5
    assert abs(noise.mean()) < 3 * sigma / np.sqrt(n)
    assert abs(noise.var() - sigma**2) < 0.05 * sigma**2


def test_mask_helpers():
    m = mask_from_joints([1, 23])
    assert m.sum() == 6 and m[0] and m[68]
    assert mask_identity().all()
    with pytest.raises(InvalidInputError):
        mask_from_joints([24])
