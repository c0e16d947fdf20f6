"""Command-line interface.

Batch commands (ingest, datagen, train, bench) run the engine in-process;
``synth`` can also act as a thin client against a running service via
``--url``. All commands are deterministic under fixed seeds.
"""

from __future__ import annotations

import sys

import click
import numpy as np

from . import __version__, datagen
from .bench import BenchConfig, run_bench, run_motion_bench
from .dataset import (
    PoseSet,
    load_poses,
    mask_from_joints,
    mask_identity,
    save_angle_frames,
    save_poses,
)
from .errors import SparsePoseError
from .skeleton import default_skeleton, default_skeleton_path, load_skeleton
from .sparse import PoseDictionary, dict_size_search, ksvd_train, partition_train
from .synthesis import DEFAULT_WEIGHTS, SynthesisRequest, synthesize


def _load_skeleton(path: str | None):
    return load_skeleton(path) if path else default_skeleton()


def _triple(text: str, name: str) -> tuple[float, float, float]:
    parts = text.split(",")
    if len(parts) != 3:
        raise click.BadParameter(f"{name} needs three comma-separated numbers")
    return tuple(float(p) for p in parts)


@click.group()
@click.version_option(__version__)
def main():
    """Sparse-coding pose engine: training, synthesis, benchmarks, service."""


@main.command()
@click.option("--in", "in_path", required=True, type=click.Path(exists=True))
@click.option("--format", "fmt", type=click.Choice(["asf-amc", "raw69"]),
              default="raw69", show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--skeleton", "skeleton_path", type=click.Path(exists=True))
@click.option("--out-format", type=click.Choice(["bin", "txt"]), default="bin",
              show_default=True)
@click.option("--subject", default="", help="source tag recorded with the frames")
def ingest(in_path, fmt, out_path, skeleton_path, out_format, subject):
    """Read pose data, preprocess it, and write canonical raw69 frames."""
    skeleton = _load_skeleton(skeleton_path)
    poses = load_poses(in_path, fmt, skeleton=skeleton, subject=subject)
    save_poses(out_path, poses, fmt=out_format)
    click.echo(f"ingested {len(poses)} frames ({poses.skipped} skipped) -> {out_path}")


@main.command("datagen")
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--frames", default=4322, show_default=True)
@click.option("--styles", default=10, show_default=True)
@click.option("--seed", default=7, show_default=True)
@click.option("--format", "fmt", type=click.Choice(["amc", "raw69"]),
              default="amc", show_default=True)
@click.option("--skeleton", "skeleton_path", type=click.Path(exists=True))
def datagen_cmd(out_path, frames, styles, seed, fmt, skeleton_path):
    """Generate a deterministic synthetic motion subject."""
    skeleton = _load_skeleton(skeleton_path)
    q = datagen.generate_subject(skeleton, frames=frames, styles=styles, seed=seed)
    if fmt == "amc":
        save_angle_frames(out_path, skeleton, q)
    else:
        q = q.copy()
        q[:, :6] = 0.0
        poses = np.stack([skeleton.forward_kinematics(qi) for qi in q])
        save_poses(out_path, PoseSet(poses), fmt="bin")
    click.echo(f"wrote {frames} synthetic frames -> {out_path}")


@main.command()
@click.option("--in", "in_path", required=True, type=click.Path(exists=True))
@click.option("--format", "fmt", type=click.Choice(["asf-amc", "raw69"]),
              default="raw69", show_default=True)
@click.option("--kappa", default=3, show_default=True)
@click.option("--target-error", required=True, type=float,
              help="per-coordinate coding MSE the dictionary size is searched for")
@click.option("--delta", default=2.0, show_default=True)
@click.option("--n0", default=32, show_default=True)
@click.option("--iters", default=30, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--partition", "clusters", default=1, show_default=True,
              help="k-means pre-partition count for large training sets")
@click.option("--skeleton", "skeleton_path", type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
def train(in_path, fmt, kappa, target_error, delta, n0, iters, seed, clusters,
          skeleton_path, out_path):
    """Learn a pose dictionary from preprocessed training poses."""
    skeleton = _load_skeleton(skeleton_path)
    poses = load_poses(in_path, fmt, skeleton=skeleton)
    if clusters > 1:
        dictionary = partition_train(poses, clusters, kappa=kappa, iters=iters,
                                     target_error=target_error, delta=delta,
                                     n0=n0, seed=seed)
    else:
        n, init = dict_size_search(poses, target_error, delta=delta, n0=n0,
                                   kappa=kappa, seed=seed)
        dictionary = ksvd_train(poses, n, kappa=kappa, iters=iters, init=init,
                                seed=seed)
    dictionary.meta.update({
        "train_source": str(in_path), "target_error": target_error,
        "delta": delta, "kappa": kappa, "iters": iters, "seed": seed,
        "clusters": clusters, "tool_version": __version__,
    })
    dictionary.save(out_path)
    click.echo(f"trained dictionary with {dictionary.n} atoms -> {out_path}")


@main.command()
@click.option("--dict", "dict_path", type=click.Path(exists=True))
@click.option("--skeleton", "skeleton_path", type=click.Path(exists=True))
@click.option("--input", "in_path", required=True, type=click.Path(exists=True))
@click.option("--mask", "mask_spec", default="identity", show_default=True,
              help='"identity" or "joints:16,20,19"')
@click.option("--kappa", default=3, show_default=True)
@click.option("--tau0", default="0,0,0", show_default=True)
@click.option("--w", default=",".join(str(v) for v in DEFAULT_WEIGHTS),
              show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--url", default=None,
              help="POST requests to a running service instead of solving locally")
def synth(dict_path, skeleton_path, in_path, mask_spec, kappa, tau0, w,
          out_path, url):
    """Synthesize natural poses for every frame of the input file."""
    skeleton = _load_skeleton(skeleton_path)
    poses = load_poses(in_path, "raw69", skeleton=skeleton)
    if mask_spec == "identity":
        mask = mask_identity(skeleton.pose_dim)
    elif mask_spec.startswith("joints:"):
        ids = [int(t) for t in mask_spec[len("joints:"):].split(",") if t]
        mask = mask_from_joints(ids, skeleton.joint_count)
    else:
        raise click.BadParameter(f"unrecognized mask spec {mask_spec!r}")
    tau0_v = _triple(tau0, "--tau0")
    w_v = _triple(w, "--w")

    out = np.empty_like(poses.poses)
    if url:
        import httpx
        payload_mask = ("identity" if mask.all()
                        else {"coords": [int(b) for b in mask]})
        with httpx.Client(base_url=url, timeout=60.0) as client:
            for i in range(len(poses)):
                r = client.post("/synthesize", json={
                    "pose": [float(x) for x in poses.poses[i]],
                    "mask": payload_mask, "kappa": kappa,
                    "tau0": tau0_v, "w": w_v})
                r.raise_for_status()
                out[i] = np.asarray(r.json()["pose"])
    else:
        if not dict_path:
            raise click.BadParameter("--dict is required for local synthesis")
        dictionary = PoseDictionary.load(dict_path)
        for i in range(len(poses)):
            req = SynthesisRequest(y0=poses.poses[i], mask=mask.copy(),
                                   kappa=kappa, tau0=np.asarray(tau0_v),
                                   weights=np.asarray(w_v))
            out[i] = synthesize(dictionary, skeleton, req).pose
    save_poses(out_path, PoseSet(out), fmt="bin")
    click.echo(f"synthesized {len(poses)} poses -> {out_path}")


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
def bench(config_path):
    """Run the configured de-noising/completion/latency benchmark."""
    config = BenchConfig.from_file(config_path)
    if config.task == "motion":
        report = run_motion_bench(config)
    else:
        report = run_bench(config)
    click.echo(report.text_table(), nl=False)
    if report.runtime_s is not None:
        click.echo(f"(wall time {report.runtime_s:.1f}s; timings in sidecar)",
                   err=True)
    if report.timings and config.task == "latency":
        click.echo(
            f"latency: median {report.timings['median_ms']:.1f} ms, "
            f"p95 {report.timings['p95_ms']:.1f} ms "
            f"at n={report.timings['atoms']}", err=True)


@main.command()
@click.option("--dict", "dict_path", envvar="SPARSEPOSE_DICT",
              type=click.Path(exists=True))
@click.option("--skeleton", "skeleton_path", envvar="SPARSEPOSE_SKELETON",
              type=click.Path(exists=True))
@click.option("--port", default=8571, show_default=True, envvar="SPARSEPOSE_PORT")
@click.option("--host", default="127.0.0.1", show_default=True,
              envvar="SPARSEPOSE_HOST")
@click.option("--workers", default=2, show_default=True,
              envvar="SPARSEPOSE_WORKERS")
@click.option("--default-kappa", default=3, show_default=True,
              envvar="SPARSEPOSE_DEFAULT_KAPPA")
@click.option("--ui-dist", envvar="SPARSEPOSE_UI_DIST",
              type=click.Path(exists=True), help="static UI build to serve at /ui")
def serve(dict_path, skeleton_path, port, host, workers, default_kappa, ui_dist):
    """Start the posing service."""
    import uvicorn

    from .service import ServiceSettings, create_app

    settings = ServiceSettings(
        dictionary_path=dict_path, skeleton_path=skeleton_path,
        default_kappa=default_kappa, workers=workers, ui_dist=ui_dist)
    app = create_app(settings)
    click.echo(f"skeleton: {skeleton_path or default_skeleton_path()}")
    click.echo(f"dictionary: {dict_path or '(none: endpoints return 503)'}")
    uvicorn.run(app, host=host, port=port, log_level="info")


def entry():
    try:
        main(standalone_mode=True)
    except SparsePoseError as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(2)


if __name__ == "__main__":
    entry()
