"""Command-line front end: score | distort | snapshot | bench.

Precedence is config file > flags > defaults: a JSON config named with
--config can pin any flag value for reproducible batch runs. Every command
is deterministic given its inputs and seed, never mutates its inputs, and
embeds a configuration digest in its outputs.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path

import numpy as np

from pcqa import distort as distort_mod
from pcqa.bench import load_groups_json, load_metric_csv, load_mos_csv, run_benchmark, write_report
from pcqa.cloud import load_ply
from pcqa.iqa2d import IwSsimParams, iw_ssim_scales, save_weight_maps, to_luma
from pcqa.metrics import (
    _METRIC_IDS,
    _projection_scores,
    MetricScore,
    psnr_p2pl,
    psnr_p2po,
    psnr_y,
)
from pcqa.project import ProjectionConfig, project_pair, save_png
from pcqa.util import config_digest
from pcqa.view import icosphere_normals

POINT_METRICS = {
    "p2po_m": lambda r, d: psnr_p2po(r, d, "mse"),
    "p2po_h": lambda r, d: psnr_p2po(r, d, "hausdorff"),
    "p2pl_m": lambda r, d: psnr_p2pl(r, d, "mse"),
    "p2pl_h": lambda r, d: psnr_p2pl(r, d, "hausdorff"),
    "psnry": psnr_y,
}
PROJ_METRICS = {"iwssimp": "iwssim", "psnrp": "psnr", "ssimp": "ssim", "msssimp": "msssim"}
ALL_METRICS = tuple(PROJ_METRICS) + tuple(POINT_METRICS)


@dataclasses.dataclass(frozen=True)
class JobConfig:
    """Resolved settings of one CLI invocation; serializable and hashable."""

    command: str
    inputs: tuple[str, ...]
    out: str
    metrics: tuple[str, ...] = ()
    views: int = 0
    scale: float = 0.5
    canvas: str = "auto"
    seed: int | None = None
    jobs: int = 1
    debug_maps: str | None = None

    def digest(self) -> str:
        return config_digest(self)


def _parse_canvas(text: str) -> tuple[int, int] | str:
    if text == "auto":
        return "auto"
    try:
        w, h = text.lower().split("x")
        return int(w), int(h)
    except ValueError:
        raise argparse.ArgumentTypeError(f"canvas must be 'auto' or WxH, got '{text}'")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pcqa", description=__doc__)
    parser.add_argument("--config", help="JSON file whose values override flags")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--views", type=int, default=0, help="icosphere subdivision level")
        p.add_argument("--scale", type=float, default=0.5)
        p.add_argument("--canvas", default="auto", help="'auto' or WxH")
        p.add_argument(
            "--jobs",
            type=int,
            default=int(os.environ.get("PCQA_JOBS", "1")),
            help="worker threads across viewpoints (default: $PCQA_JOBS or 1)",
        )

    p_score = sub.add_parser("score", help="score a distorted cloud against its reference")
    p_score.add_argument("ref")
    p_score.add_argument("dis")
    p_score.add_argument(
        "--metric",
        action="append",
        choices=ALL_METRICS,
        help="metric id, repeatable (default: iwssimp)",
    )
    p_score.add_argument("--out", default="report.json")
    p_score.add_argument("--debug-maps", help="directory for per-scale weight map PNGs")
    add_common(p_score)

    p_dist = sub.add_parser("distort", help="generate distorted copies of a cloud")
    p_dist.add_argument("input")
    p_dist.add_argument("--spec", required=True, help="JSON array of distortion specs")
    p_dist.add_argument("--out", required=True)
    p_dist.add_argument("--seed", type=int, help="override the seed of every gaussian spec")

    p_snap = sub.add_parser("snapshot", help="render snapshot PNGs from all viewpoints")
    p_snap.add_argument("input")
    p_snap.add_argument("--ref", help="reference cloud supplying centroid and canvas")
    p_snap.add_argument("--out", required=True)
    add_common(p_snap)

    p_bench = sub.add_parser("bench", help="evaluate metric CSVs against subjective scores")
    p_bench.add_argument("--scores", nargs="+", required=True)
    p_bench.add_argument("--mos", required=True)
    p_bench.add_argument("--subsets", help="JSON manifest: stimulus -> content/distortion")
    p_bench.add_argument("--out", required=True)

    return parser


def _apply_config_file(args: argparse.Namespace) -> None:
    if not args.config:
        return
    overrides = json.loads(Path(args.config).read_text())
    for key, value in overrides.items():
        setattr(args, key.replace("-", "_"), value)


def _cmd_score(args: argparse.Namespace) -> int:
    metrics = tuple(args.metric or ["iwssimp"])
    job = JobConfig(
        command="score",
        inputs=(args.ref, args.dis),
        out=args.out,
        metrics=metrics,
        views=args.views,
        scale=args.scale,
        canvas=str(args.canvas),
        jobs=args.jobs,
        debug_maps=getattr(args, "debug_maps", None),
    )
    ref = load_ply(args.ref)
    dis = load_ply(args.dis)
    cfg = ProjectionConfig(
        scale=args.scale,
        canvas=_parse_canvas(str(args.canvas)),
        viewpoints=icosphere_normals(args.views),
    )
    params = IwSsimParams()
    digest = job.digest()

    scores: list[MetricScore] = []
    proj_kinds = tuple(PROJ_METRICS[m] for m in metrics if m in PROJ_METRICS)
    if proj_kinds:
        per_view = _projection_scores(ref, dis, cfg, params, proj_kinds, jobs=args.jobs)
        for kind in proj_kinds:
            views = per_view[kind]
            scores.append(
                MetricScore(
                    metric=_METRIC_IDS[kind],
                    value=float(np.mean(views)),
                    per_view=tuple(views),
                    digest=digest,
                )
            )
    for m in metrics:
        if m in POINT_METRICS:
            score = POINT_METRICS[m](ref, dis)
            scores.append(dataclasses.replace(score, digest=digest))

    if job.debug_maps:
        pair = project_pair(ref, dis, cfg)[0]
        maps = iw_ssim_scales(to_luma(pair[0].pixels), to_luma(pair[1].pixels), params)
        save_weight_maps(maps, job.debug_maps, prefix=f"{ref.name}_vs_{dis.name}")

    payload = {
        "config": dataclasses.asdict(job),
        "config_digest": digest,
        "records": [s.to_record(ref.name, dis.name) for s in scores],
    }
    Path(args.out).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return 0


def _cmd_distort(args: argparse.Namespace) -> int:
    specs = distort_mod.parse_spec_file(args.spec)
    if args.seed is not None:
        specs = [
            dataclasses.replace(s, seed=args.seed) if s.kind == "gaussian" else s for s in specs
        ]
    cloud = load_ply(args.input)
    if not specs:
        print("warning: empty distortion spec, nothing to do", file=sys.stderr)
        Path(args.out).mkdir(parents=True, exist_ok=True)
        return 0
    distort_mod.generate_distortions(cloud, specs, args.out)
    return 0


def _cmd_snapshot(args: argparse.Namespace) -> int:
    cloud = load_ply(args.input)
    ref = load_ply(args.ref) if args.ref else cloud
    cfg = ProjectionConfig(
        scale=args.scale,
        canvas=_parse_canvas(str(args.canvas)),
        viewpoints=icosphere_normals(args.views),
    )
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for i, (img_ref, img_dis) in enumerate(project_pair(ref, cloud, cfg)):
        img = img_dis if args.ref else img_ref
        save_png(img, out_dir / f"{cloud.name}_{i}.png")
    return 0


def _cmd_bench(args: argparse.Namespace) -> int:
    metric_scores = load_metric_csv(args.scores)
    mos, _ = load_mos_csv(args.mos)
    groups = load_groups_json(args.subsets) if args.subsets else None
    result = run_benchmark(metric_scores, mos, groups)
    write_report(result, args.out)
    return 0


_HANDLERS = {
    "score": _cmd_score,
    "distort": _cmd_distort,
    "snapshot": _cmd_snapshot,
    "bench": _cmd_bench,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        _apply_config_file(args)
        return _HANDLERS[args.command](args)
    except FileNotFoundError as exc:
        print(f"error: file not found: {exc.filename or exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
