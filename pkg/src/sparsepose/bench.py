"""Benchmark harness: parameter tuning, de-noising and completion runs,
frame-by-frame motion completion, latency measurement, and reports.

Reports are deterministic under fixed seeds: the text table and the JSONL
record stream contain no wall-clock values. Timing measurements go to the
console and to a separate ``.timings.json`` sidecar.
"""

from __future__ import annotations

import json
import platform
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .baselines import (
    GaussianPrior,
    PcaModel,
    gaussian_fit,
    gaussian_reconstruct,
    pca_fit,
    pca_reconstruct,
)
from .dataset import CorruptionSpec, PoseSet, corrupt, load_poses, mask_from_joints, split
from .errors import ConfigError
from .skeleton import Skeleton, default_skeleton, load_skeleton
from .sparse import PoseDictionary
from .synthesis import SynthesisRequest, synthesize

MSE_DEFINITION = ("MSE = squared error averaged over the 69 pose coordinates, "
                  "then averaged over all test poses")

DEFAULT_KAPPA_GRID = list(range(1, 11))
DEFAULT_LAMBDA_GRID = [0.01, 0.03, 0.1, 0.3, 1.0, 3.0, 10.0, 100.0, 1000.0]
DEFAULT_OBSERVED_JOINTS = (16, 20, 19, 23, 5, 9)
DEFAULT_BENCH_WEIGHTS = (20.0, 20.0, 20.0)   # benchmark data is pre-oriented


def pose_mse(a: np.ndarray, b: np.ndarray) -> float:
    d = np.asarray(a) - np.asarray(b)
    return float(np.mean(d * d))


# --------------------------------------------------------------------------
# reconstructor adapters
# --------------------------------------------------------------------------

class SparseReconstructor:
    name = "sparse"

    def __init__(self, dictionary: PoseDictionary, skeleton: Skeleton,
                 weights=DEFAULT_BENCH_WEIGHTS, ik_tol: float = 1e-4,
                 ik_max_iter: int = 30):
        self.dictionary = dictionary
        self.skeleton = skeleton
        self.weights = np.asarray(weights, dtype=float)
        self.ik_tol = ik_tol
        self.ik_max_iter = ik_max_iter

    def reconstruct(self, y0, mask, param):
        req = SynthesisRequest(y0=y0, mask=mask, kappa=int(param),
                               weights=self.weights, ik_tol=self.ik_tol,
                               ik_max_iter=self.ik_max_iter)
        return synthesize(self.dictionary, self.skeleton, req).pose


class PcaReconstructor:
    name = "pca"

    def __init__(self, model: PcaModel):
        self.model = model

    def reconstruct(self, y0, mask, param):
        return pca_reconstruct(self.model, y0, mask)


class GaussianReconstructor:
    name = "gaussian"

    def __init__(self, prior: GaussianPrior):
        self.prior = prior

    def reconstruct(self, y0, mask, param):
        return gaussian_reconstruct(self.prior, y0, mask, lam=float(param))


def tune(model, grid, tuning_set) -> object:
    """Pick the grid value with the lowest average MSE on the tuning set.

    ``tuning_set`` is a list of (corrupted, mask, clean) triples. Ties go to
    the smallest parameter.
    """
    if not tuning_set:
        raise ConfigError("tuning set is empty")
    grid = list(grid)
    if not grid:
        raise ConfigError("parameter grid is empty")
    best_param, best_mse = None, None
    for param in sorted(grid, key=lambda p: (p is None, p)):
        errs = [pose_mse(model.reconstruct(y0, mask, param), clean)
                for y0, mask, clean in tuning_set]
        avg = float(np.mean(errs))
        if best_mse is None or avg < best_mse - 1e-15:
            best_param, best_mse = param, avg
    return best_param


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------

@dataclass
class BenchConfig:
    task: str                                   # dense | sparse | completion | motion | latency
    poses: str | None = None
    pose_format: str = "raw69"
    skeleton: str | None = None
    dictionary: str | None = None
    models: tuple[str, ...] = ("sparse", "pca", "gaussian")
    split_fraction: float = 0.5
    split_seed: int = 11
    corruption_seed: int = 3
    tuning_seed: int = 29
    tuning_fraction: float = 0.05
    noise_sigma: float = 1.0
    joint_fraction: float = 0.2
    observed_joints: tuple[int, ...] = DEFAULT_OBSERVED_JOINTS
    kappa_grid: tuple[int, ...] = tuple(DEFAULT_KAPPA_GRID)
    lambda_grid: tuple[float, ...] = tuple(DEFAULT_LAMBDA_GRID)
    pca_energy: float = 0.9
    weights: tuple[float, float, float] = DEFAULT_BENCH_WEIGHTS
    max_test_poses: int | None = None
    motion_frames: int = 128
    latency_atoms: int = 100_000
    latency_kappa: int = 10
    latency_repeats: int = 15
    latency_seed: int = 13
    output: str | None = None

    def __post_init__(self):
        if self.task not in ("dense", "sparse", "completion", "motion", "latency"):
            raise ConfigError(f"unknown bench task {self.task!r}")
        if not 0.0 < self.tuning_fraction < 1.0:
            raise ConfigError("tuning_fraction must lie in (0, 1)")
        if not self.kappa_grid or not self.lambda_grid:
            raise ConfigError("parameter grids must be non-empty")

    @classmethod
    def from_file(cls, path: str | Path) -> "BenchConfig":
        try:
            raw = json.loads(Path(path).read_text())
        except FileNotFoundError as e:
            raise ConfigError(f"no such config file: {path}") from e
        except json.JSONDecodeError as e:
            raise ConfigError(f"config is not valid JSON: {e}") from e
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        for key in ("models", "observed_joints", "kappa_grid", "lambda_grid", "weights"):
            if key in raw and isinstance(raw[key], list):
                raw[key] = tuple(raw[key])
        return cls(**raw)


@dataclass
class BenchReport:
    task: str
    n_train: int
    n_test: int
    corrupted_input_mse: float | None
    models: dict                       # name -> {avg_mse, p50, p90, param, errors}
    seeds: dict
    environment: dict
    mse_definition: str = MSE_DEFINITION
    notes: list[str] = field(default_factory=list)
    runtime_s: float | None = None     # console/sidecar only, never serialized
    timings: dict = field(default_factory=dict)

    def text_table(self) -> str:
        lines = [f"task: {self.task}",
                 f"poses: train={self.n_train} test={self.n_test}",
                 f"mse definition: {self.mse_definition}"]
        if self.corrupted_input_mse is not None:
            lines.append(f"corrupted input MSE: {self.corrupted_input_mse:.6f}")
        lines.append("")
        lines.append(f"{'model':<10} {'param':>8} {'avg MSE':>12} {'p50':>12} {'p90':>12}")
        for name, stats in self.models.items():
            lines.append(f"{name:<10} {str(stats['param']):>8} "
                         f"{stats['avg_mse']:>12.6f} {stats['p50']:>12.6f} "
                         f"{stats['p90']:>12.6f}")
        for note in self.notes:
            lines.append(f"note: {note}")
        return "\n".join(lines) + "\n"

    def jsonl_records(self) -> list[str]:
        records = [json.dumps({
            "type": "meta", "task": self.task, "n_train": self.n_train,
            "n_test": self.n_test, "corrupted_input_mse": self.corrupted_input_mse,
            "seeds": self.seeds, "environment": self.environment,
            "mse_definition": self.mse_definition, "notes": self.notes,
        }, sort_keys=True)]
        for name, stats in self.models.items():
            records.append(json.dumps({
                "type": "model", "name": name, "param": stats["param"],
                "avg_mse": stats["avg_mse"], "p50": stats["p50"],
                "p90": stats["p90"],
            }, sort_keys=True))
            records.append(json.dumps({
                "type": "pose_errors", "model": name, "errors": stats["errors"],
            }, sort_keys=True))
        return records

    def write(self, stem: str | Path):
        stem = Path(stem)
        stem.with_suffix(".txt").write_text(self.text_table())
        stem.with_suffix(".jsonl").write_text("\n".join(self.jsonl_records()) + "\n")
        if self.timings:
            Path(str(stem) + ".timings.json").write_text(
                json.dumps(self.timings, indent=2, sort_keys=True) + "\n")


def _environment_stamp() -> dict:
    return {
        "python": platform.python_version(),
        "numpy": np.__version__,
        "machine": platform.machine(),
        "package": __version__,
    }


# --------------------------------------------------------------------------
# the harness
# --------------------------------------------------------------------------

def _task_corruption(config: BenchConfig, seed: int) -> CorruptionSpec:
    if config.task in ("dense", "latency"):
        return CorruptionSpec("dense-gaussian", sigma=config.noise_sigma, seed=seed)
    if config.task == "sparse":
        return CorruptionSpec("sparse-gaussian", sigma=config.noise_sigma,
                              joint_fraction=config.joint_fraction, seed=seed)
    return CorruptionSpec("mask-completion",
                          observed_joints=tuple(config.observed_joints), seed=seed)


def _build_models(config: BenchConfig, train: PoseSet, skeleton: Skeleton,
                  dictionary: PoseDictionary | None):
    out = []
    for name in config.models:
        if name == "sparse":
            if dictionary is None:
                if not config.dictionary:
                    raise ConfigError("sparse model requested but no dictionary file")
                dictionary = PoseDictionary.load(config.dictionary)
            out.append((SparseReconstructor(dictionary, skeleton, config.weights),
                        list(config.kappa_grid)))
        elif name == "pca":
            out.append((PcaReconstructor(pca_fit(train, config.pca_energy)), [None]))
        elif name == "gaussian":
            out.append((GaussianReconstructor(gaussian_fit(train)),
                        list(config.lambda_grid)))
        else:
            raise ConfigError(f"unknown model {name!r}")
    return out


def run_bench(config: BenchConfig, *, pose_set: PoseSet | None = None,
              skeleton: Skeleton | None = None,
              dictionary: PoseDictionary | None = None) -> BenchReport:
    """Execute the configured benchmark and return its report.

    ``pose_set``/``skeleton``/``dictionary`` may be passed directly (tests,
    library use); otherwise they are loaded from the configured paths.
    """
    t_start = time.perf_counter()
    if skeleton is None:
        skeleton = default_skeleton() if config.skeleton is None \
            else load_skeleton(config.skeleton)
    if config.task == "latency":
        return _run_latency(config, skeleton)
    if pose_set is None:
        if not config.poses:
            raise ConfigError("no pose file configured")
        pose_set = load_poses(config.poses, config.pose_format, skeleton=skeleton)
    train, test = split(pose_set, config.split_fraction, config.split_seed)
    if config.max_test_poses is not None:
        test = test.take(np.arange(min(config.max_test_poses, len(test))))
    models = _build_models(config, train, skeleton, dictionary)

    # tuning set comes from the training half, corrupted with its own seed
    rng = np.random.default_rng(config.tuning_seed)
    k = max(16, int(round(config.tuning_fraction * len(train))))
    k = min(k, len(train))
    tune_idx = rng.choice(len(train), size=k, replace=False)
    tune_clean = train.take(np.sort(tune_idx))
    tune_corrupted, tune_masks = corrupt(
        tune_clean, _task_corruption(config, config.tuning_seed + 1))
    tuning_set = list(zip(tune_corrupted.poses, tune_masks, tune_clean.poses))

    corrupted, masks = corrupt(test, _task_corruption(config, config.corruption_seed))
    input_mse = pose_mse(corrupted.poses, test.poses) \
        if config.task in ("dense", "sparse") else None

    report_models = {}
    timings = {}
    notes = []
    for model, grid in models:
        t0 = time.perf_counter()
        param = grid[0] if len(grid) == 1 else tune(model, grid, tuning_set)
        errs = []
        for i in range(len(test)):
            rec = model.reconstruct(corrupted.poses[i], masks[i], param)
            errs.append(pose_mse(rec, test.poses[i]))
        errs_arr = np.asarray(errs)
        report_models[model.name] = {
            "param": param,
            "avg_mse": float(errs_arr.mean()),
            "p50": float(np.percentile(errs_arr, 50)),
            "p90": float(np.percentile(errs_arr, 90)),
            "errors": [float(e) for e in errs],
        }
        timings[model.name + "_s"] = time.perf_counter() - t0

    if config.task == "dense":
        n_coords = corrupted.poses.size
        if n_coords >= 1e5:
            expected = config.noise_sigma ** 2
            if input_mse is not None and abs(input_mse - expected) > 0.05 * expected:
                notes.append(
                    f"harness self-check: corrupted-input MSE {input_mse:.4f} "
                    f"deviates more than 5% from sigma^2 {expected:.4f}")

    report = BenchReport(
        task=config.task, n_train=len(train), n_test=len(test),
        corrupted_input_mse=input_mse, models=report_models,
        seeds={"split": config.split_seed, "corruption": config.corruption_seed,
               "tuning": config.tuning_seed},
        environment=_environment_stamp(), notes=notes,
        runtime_s=time.perf_counter() - t_start, timings=timings)
    if config.output:
        report.write(config.output)
    return report


# --------------------------------------------------------------------------
# motion completion
# --------------------------------------------------------------------------

def motion_complete(sequence: PoseSet, model, masks, param) -> tuple[PoseSet, list[float]]:
    """Complete each frame independently (no temporal coupling); returns the
    completed sequence and per-frame MSE against the input frames."""
    completed = []
    errors = []
    for i in range(len(sequence)):
        rec = model.reconstruct(sequence.poses[i] * masks[i], masks[i], param)
        completed.append(rec)
        errors.append(pose_mse(rec, sequence.poses[i]))
    out = PoseSet(np.asarray(completed).reshape(len(sequence), -1),
                  sequence.subjects, sequence.frames)
    return out, errors


def run_motion_bench(config: BenchConfig, *, pose_set: PoseSet | None = None,
                     skeleton: Skeleton | None = None,
                     dictionary: PoseDictionary | None = None) -> BenchReport:
    """Frame-by-frame completion over the first frames of the test half."""
    t_start = time.perf_counter()
    skeleton = skeleton or default_skeleton()
    if pose_set is None:
        if not config.poses:
            raise ConfigError("no pose file configured")
        pose_set = load_poses(config.poses, config.pose_format, skeleton=skeleton)
    train, test = split(pose_set, config.split_fraction, config.split_seed)
    frames = test.take(np.arange(min(config.motion_frames, len(test))))
    mask = mask_from_joints(config.observed_joints, skeleton.joint_count)
    masks = [mask.copy() for _ in range(len(frames))]
    models = _build_models(config, train, skeleton, dictionary)

    rng = np.random.default_rng(config.tuning_seed)
    k = min(len(train), max(16, int(round(config.tuning_fraction * len(train)))))
    tune_idx = np.sort(rng.choice(len(train), size=k, replace=False))
    tune_clean = train.take(tune_idx)
    tuning_set = [(tune_clean.poses[i] * mask, mask.copy(), tune_clean.poses[i])
                  for i in range(len(tune_clean))]

    report_models = {}
    timings = {}
    for model, grid in models:
        t0 = time.perf_counter()
        param = grid[0] if len(grid) == 1 else tune(model, grid, tuning_set)
        _, errors = motion_complete(frames, model, masks, param)
        errs_arr = np.asarray(errors)
        report_models[model.name] = {
            "param": param,
            "avg_mse": float(errs_arr.mean()),
            "p50": float(np.percentile(errs_arr, 50)),
            "p90": float(np.percentile(errs_arr, 90)),
            "errors": [float(e) for e in errors],
        }
        timings[model.name + "_s"] = time.perf_counter() - t0

    report = BenchReport(
        task="motion", n_train=len(train), n_test=len(frames),
        corrupted_input_mse=None, models=report_models,
        seeds={"split": config.split_seed, "tuning": config.tuning_seed},
        environment=_environment_stamp(),
        runtime_s=time.perf_counter() - t_start, timings=timings)
    if config.output:
        report.write(config.output)
    return report


# --------------------------------------------------------------------------
# interactive latency
# --------------------------------------------------------------------------

def latency_dictionary(skeleton: Skeleton, atoms: int, seed: int = 13,
                       kappa: int = 10) -> PoseDictionary:
    """A pose-like dictionary at arbitrary scale: a seeded set of forward-
    kinematics poses, tiled out with small perturbations and normalized.
    Mirrors the texture of a trained dictionary without a training run."""
    rng = np.random.default_rng(seed)
    base_count = min(atoms, 512)
    base = np.empty((base_count, skeleton.pose_dim))
    for i in range(base_count):
        q = rng.normal(scale=0.35, size=skeleton.dof_count)
        q[:6] = 0.0
        base[i] = skeleton.forward_kinematics(q)
    reps = int(np.ceil(atoms / base_count))
    tiled = np.tile(base, (reps, 1))[:atoms]
    tiled += rng.normal(scale=0.05, size=tiled.shape)
    tiled.reshape(atoms, -1, 3)[:, 0, :] = 0.0      # keep atoms root-centered
    A = tiled.T / np.linalg.norm(tiled, axis=1)
    return PoseDictionary(A, kappa_train=kappa)


def measure_latency(skeleton: Skeleton, *, atoms: int = 100_000, kappa: int = 10,
                    repeats: int = 15, seed: int = 13,
                    dictionary: PoseDictionary | None = None) -> dict:
    """Median/p95 wall time of one full synthesize call at dictionary scale.

    The input is a noisy single-atom pose, the free-dragging hot path."""
    if dictionary is None:
        dictionary = latency_dictionary(skeleton, atoms, seed=seed, kappa=kappa)
    rng = np.random.default_rng(seed + 1)
    pick = int(rng.integers(dictionary.n))
    base = dictionary.atoms[:, pick] * 30.0
    mask = np.ones(dictionary.dim, dtype=bool)
    times = []
    result = None
    for _ in range(repeats):
        # jitter per repeat: a drag stream sends similar, not identical, poses
        y0 = base + rng.normal(scale=0.3, size=dictionary.dim)
        t0 = time.perf_counter()
        result = synthesize(dictionary, skeleton, SynthesisRequest(
            y0=y0, mask=mask, kappa=kappa, weights=np.asarray(DEFAULT_BENCH_WEIGHTS),
            ik_tol=1e-4, ik_max_iter=30))
        times.append((time.perf_counter() - t0) * 1e3)
    times_arr = np.asarray(times)
    return {
        "atoms": dictionary.n,
        "kappa": kappa,
        "repeats": repeats,
        "median_ms": float(np.median(times_arr)),
        "p95_ms": float(np.percentile(times_arr, 95)),
        "min_ms": float(times_arr.min()),
        "max_ms": float(times_arr.max()),
        "ik_iterations": result.ik_iterations if result else None,
    }


def _run_latency(config: BenchConfig, skeleton: Skeleton) -> BenchReport:
    stats = measure_latency(skeleton, atoms=config.latency_atoms,
                            kappa=config.latency_kappa,
                            repeats=config.latency_repeats,
                            seed=config.latency_seed)
    report = BenchReport(
        task="latency", n_train=0, n_test=config.latency_repeats,
        corrupted_input_mse=None,
        models={"sparse": {"param": config.latency_kappa, "avg_mse": 0.0,
                           "p50": 0.0, "p90": 0.0, "errors": []}},
        seeds={"latency": config.latency_seed},
        environment=_environment_stamp(),
        notes=[f"latency harness at n={stats['atoms']} atoms; "
               "measurements in the timings sidecar"],
        runtime_s=None, timings=stats)
    if config.output:
        report.write(config.output)
    return report
