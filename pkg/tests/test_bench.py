"""Benchmark harness: tuning, task runs, reports, determinism."""

import json

import numpy as np
import pytest

from sparsepose.bench import (
    BenchConfig,
    SparseReconstructor,
    measure_latency,
    motion_complete,
    run_bench,
    run_motion_bench,
    tune,
)
from sparsepose.dataset import mask_identity
from sparsepose.errors import ConfigError
from sparsepose.sparse import PoseDictionary


def small_config(**kw):
    defaults = dict(task="dense", max_test_poses=30, tuning_fraction=0.02,
                    kappa_grid=(1, 2), lambda_grid=(0.5, 1.0),
                    models=("sparse", "gaussian"))
    defaults.update(kw)
    return BenchConfig(**defaults)


# --------------------------------------------------------------------------
# tune
# --------------------------------------------------------------------------

def test_tune_single_point_grid(subject_split, skeleton, trained_dictionary):
    model = SparseReconstructor(trained_dictionary, skeleton)
    clean = subject_split[0].poses[0]
    tuning = [(clean, mask_identity(), clean)]
    assert tune(model, [3], tuning) == 3


def test_tune_selects_planted_kappa(skeleton):
    # data generated from an incoherent dictionary with kappa=3 codes:
    # reconstruction error is minimized at the generative sparsity
    rng = np.random.default_rng(0)
    atoms = rng.normal(size=(69, 30))
    atoms[:3] = 0.0
    atoms /= np.linalg.norm(atoms, axis=0)
    d = PoseDictionary(atoms)

    class CodingOnly:
        name = "coding"

        def reconstruct(self, y0, mask, param):
            from sparsepose.sparse import omp
            code = omp(d.atoms, y0, int(param))
            return d.atoms @ code.to_dense()

    tuning = []
    for _ in range(12):
        x = np.zeros(30)
        x[rng.choice(30, size=3, replace=False)] = rng.normal(size=3) * 8
        clean = d.atoms @ x
        noisy = clean + rng.normal(size=69) * 2.0
        tuning.append((noisy, mask_identity(), clean))
    best = tune(CodingOnly(), [1, 2, 3, 4, 5, 6, 8], tuning)
    assert best == 3


def test_tune_tie_breaks_to_smallest():
    class Constant:
        name = "const"

        def reconstruct(self, y0, mask, param):
            return np.zeros_like(y0)

    tuning = [(np.ones(69), mask_identity(), np.ones(69))]
    assert tune(Constant(), [5, 2, 9], tuning) == 2


# --------------------------------------------------------------------------
# run_bench
# --------------------------------------------------------------------------

def test_bench_zero_noise_matches_clean_reconstruction(subject, skeleton,
                                                       trained_dictionary):
    config = small_config(noise_sigma=0.0, max_test_poses=20,
                          kappa_grid=(3,), models=("sparse",))
    report = run_bench(config, pose_set=subject, skeleton=skeleton,
                       dictionary=trained_dictionary)
    assert report.corrupted_input_mse == 0.0
    # on clean input the sparse model reproduces its in-sample coding error
    # plus the IK floor
    assert report.models["sparse"]["avg_mse"] < 0.05


def test_bench_dense_task_orderings(subject, skeleton, trained_dictionary):
    config = small_config(task="dense", max_test_poses=60,
                          models=("sparse", "pca", "gaussian"),
                          kappa_grid=(1, 2, 3))
    report = run_bench(config, pose_set=subject, skeleton=skeleton,
                       dictionary=trained_dictionary)
    sparse = report.models["sparse"]["avg_mse"]
    assert sparse / report.corrupted_input_mse < 0.5
    assert sparse < report.models["pca"]["avg_mse"]
    assert sparse < report.models["gaussian"]["avg_mse"]


def test_bench_completion_ordering(subject, skeleton, trained_dictionary):
    config = small_config(task="completion", max_test_poses=60,
                          models=("sparse", "gaussian"),
                          kappa_grid=(2, 3), lambda_grid=(10.0, 100.0, 1000.0))
    report = run_bench(config, pose_set=subject, skeleton=skeleton,
                       dictionary=trained_dictionary)
    assert report.models["sparse"]["avg_mse"] < report.models["gaussian"]["avg_mse"]
    assert report.corrupted_input_mse is None


def test_bench_report_self_consistent(subject, skeleton, trained_dictionary):
    config = small_config(max_test_poses=15, kappa_grid=(2,), models=("sparse",))
    report = run_bench(config, pose_set=subject, skeleton=skeleton,
                       dictionary=trained_dictionary)
    stats = report.models["sparse"]
    assert abs(np.mean(stats["errors"]) - stats["avg_mse"]) < 1e-12
    assert len(stats["errors"]) == report.n_test


def test_bench_report_files_deterministic(tmp_path, subject, skeleton,
                                          trained_dictionary):
    outs = []
    for name in ("a", "b"):
        config = small_config(max_test_poses=12, kappa_grid=(2,),
                              models=("sparse", "gaussian"),
                              output=str(tmp_path / name))
        run_bench(config, pose_set=subject, skeleton=skeleton,
                  dictionary=trained_dictionary)
        outs.append(((tmp_path / f"{name}.txt").read_bytes(),
                     (tmp_path / f"{name}.jsonl").read_bytes()))
    assert outs[0] == outs[1]


def test_bench_missing_dictionary_is_config_error(subject, skeleton):
    config = small_config(models=("sparse",), dictionary="/nope/missing.spd")
    with pytest.raises(Exception):
        run_bench(config, pose_set=subject, skeleton=skeleton)


def test_bench_config_validation(tmp_path):
    with pytest.raises(ConfigError):
        BenchConfig(task="nonsense")
    with pytest.raises(ConfigError):
        BenchConfig(task="dense", tuning_fraction=0.0)
    bad = tmp_path / "cfg.json"
    bad.write_text(json.dumps({"task": "dense", "bogus_key": 1}))
    with pytest.raises(ConfigError):
        BenchConfig.from_file(bad)


def test_bench_config_round_trip(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({
        "task": "completion", "observed_joints": [16, 20, 19, 23, 5, 9],
        "kappa_grid": [1, 2, 3], "max_test_poses": 10}))
    config = BenchConfig.from_file(path)
    assert config.task == "completion"
    assert config.observed_joints == (16, 20, 19, 23, 5, 9)


# --------------------------------------------------------------------------
# motion completion
# --------------------------------------------------------------------------

def test_motion_fully_observed_near_identity(subject_split, skeleton,
                                             trained_dictionary):
    _, test = subject_split
    frames = test.take(np.arange(8))
    model = SparseReconstructor(trained_dictionary, skeleton)
    masks = [mask_identity() for _ in range(len(frames))]
    completed, errors = motion_complete(frames, model, masks, 3)
    assert len(completed) == 8
    assert np.mean(errors) < 0.05


def test_motion_bench_report(subject, skeleton, trained_dictionary):
    config = small_config(task="motion", motion_frames=12,
                          models=("sparse", "gaussian"),
                          kappa_grid=(2,), lambda_grid=(100.0,))
    report = run_motion_bench(config, pose_set=subject, skeleton=skeleton,
                              dictionary=trained_dictionary)
    assert report.task == "motion"
    assert len(report.models["sparse"]["errors"]) == 12


def test_motion_bench_deterministic(subject, skeleton, trained_dictionary):
    reports = []
    for _ in range(2):
        config = small_config(task="motion", motion_frames=6,
                              models=("sparse",), kappa_grid=(2,))
        r = run_motion_bench(config, pose_set=subject, skeleton=skeleton,
                             dictionary=trained_dictionary)
        reports.append("\n".join(r.jsonl_records()))
    assert reports[0] == reports[1]


# --------------------------------------------------------------------------
# latency harness
# --------------------------------------------------------------------------

def test_latency_harness_small_scale(skeleton):
    stats = measure_latency(skeleton, atoms=2000, kappa=5, repeats=3)
    assert stats["atoms"] == 2000
    assert stats["median_ms"] > 0.0
    assert stats["p95_ms"] >= stats["median_ms"]
