"""Command-line interface.

Subcommands:
    gen-scene        sample a scene from a config file, write scene JSON (+ PLY)
    run-trial        Monte-Carlo a harvest trial, write report (+ attempts CSV)
    compare          check a report against a bundled benchmark trial
    bench-snap-pull  Monte-Carlo the snap-pull detachment bench
    design-fingers   grid-search gripper finger link lengths

`compare` exits 0 iff every compared metric passes.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import presets
from .cloud import write_ply
from .design import FingerLinkBounds, optimize_finger_links
from .geometry import look_at
from .scene import generate_scene, read_scene_config, render_pointcloud, write_scene
from .trials import (
    TrialConfig,
    bench_snap_pull,
    compare_to_reference,
    read_report,
    run_trial,
    write_attempts_csv,
    write_report,
)


def _cmd_gen_scene(args: argparse.Namespace) -> int:
    config = read_scene_config(args.config)
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    scene = generate_scene(config)
    write_scene(scene, args.out)
    print(f"wrote scene with {len(scene.peppers)} peppers, {len(scene.leaves)} leaves "
          f"to {args.out}")
    if args.ply:
        camera = look_at(scene.trellis.origin + 0.8 * scene.trellis.normal,
                         scene.trellis.origin)
        cloud = render_pointcloud(scene, camera, presets.TRIAL_SENSOR, rng=config.seed)
        write_ply(cloud, args.ply)
        print(f"wrote {len(cloud)} points to {args.ply}")
    return 0


def _cmd_run_trial(args: argparse.Namespace) -> int:
    config = TrialConfig.from_file(args.config)
    config = replace(config, pepper_count=args.n, seed=args.seed)
    report = run_trial(config, workers=args.workers)
    write_report(report, args.out_report)
    print(f"{config.cultivar}/{config.scenario} n={report.n}: "
          f"attach {report.attach.rate:.3f}, detach {report.detach.rate:.3f}, "
          f"combined {report.combined.rate:.3f}, "
          f"mean cycle {report.mean_cycle_time:.1f} s")
    print(f"wrote report to {args.out_report}")
    if args.out_attempts:
        write_attempts_csv(report.attempts, args.out_attempts)
        print(f"wrote {len(report.attempts)} attempt rows to {args.out_attempts}")
    return 0


def _cmd_compare(args: argparse.Namespace) -> int:
    report = read_report(args.report)
    reference = presets.REFERENCE_TRIALS[args.trial]
    result = compare_to_reference(report, reference, args.tolerance)
    for check in result.checks:
        ref = check.reference
        ref_txt = f"[{ref[0]:g}, {ref[1]:g}]" if isinstance(ref, tuple) else f"{ref:g}"
        tol_txt = f" tol {check.tolerance:g}" if check.tolerance is not None else ""
        print(f"{'PASS' if check.passed else 'FAIL'}  {check.metric}: "
              f"simulated {check.simulated:.3f} vs reference {ref_txt}{tol_txt}")
    return 0 if result.all_pass else 1


def _cmd_bench_snap_pull(args: argparse.Namespace) -> int:
    bench = bench_snap_pull(args.n, args.seed)
    print(f"snap-pull bench n={bench.n}: removed {bench.removed} "
          f"({bench.removal_rate:.3f}), clean among removed "
          f"{bench.clean}/{bench.removed} ({bench.clean_fraction_among_removed:.3f})")
    return 0


def _read_widths(path: str) -> np.ndarray:
    """One fruit width (meters) per line; '#' starts a comment."""
    widths = []
    for line in Path(path).read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            widths.append(float(line))
    return np.array(widths)


def _cmd_design_fingers(args: argparse.Namespace) -> int:
    widths = _read_widths(args.samples)
    if args.bounds:
        raw = json.loads(Path(args.bounds).read_text())
        bounds = FingerLinkBounds(tuple(raw["proximal"]), tuple(raw["distal"]),
                                  tuple(raw["palm_width"]))
    else:
        bounds = FingerLinkBounds()
    design = optimize_finger_links(widths, bounds, args.resolution)
    doc = {"proximal_length": design.proximal_length,
           "distal_length": design.distal_length,
           "palm_width": design.palm_width,
           "score": design.score,
           "n_samples": int(widths.size)}
    text = json.dumps(doc, indent=2)
    print(text)
    if args.out:
        Path(args.out).write_text(text + "\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="harvestsim",
                                     description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-scene", help="sample a scene from a config file")
    p.add_argument("--config", required=True, help="scene config JSON")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--out", required=True, help="output scene JSON path")
    p.add_argument("--ply", default=None, help="also render a PLY point cloud here")
    p.set_defaults(func=_cmd_gen_scene)

    p = sub.add_parser("run-trial", help="run a Monte-Carlo harvest trial")
    p.add_argument("--config", required=True, help="trial config JSON")
    p.add_argument("--n", type=int, required=True, help="number of peppers")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out-report", required=True, help="output report JSON path")
    p.add_argument("--out-attempts", default=None, help="optional attempts CSV path")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=_cmd_run_trial)

    p = sub.add_parser("compare", help="compare a report against a benchmark")
    p.add_argument("--report", required=True)
    p.add_argument("--trial", required=True, choices=sorted(presets.REFERENCE_TRIALS))
    p.add_argument("--tolerance", type=float, default=0.03)
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("bench-snap-pull", help="run the snap-pull detachment bench")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.set_defaults(func=_cmd_bench_snap_pull)

    p = sub.add_parser("design-fingers", help="optimise gripper finger link lengths")
    p.add_argument("--samples", required=True, help="text file, one width (m) per line")
    p.add_argument("--bounds", default=None, help="bounds JSON (proximal/distal/palm_width)")
    p.add_argument("--resolution", type=int, required=True, help="grid points per axis")
    p.add_argument("--out", default=None, help="optional output JSON path")
    p.set_defaults(func=_cmd_design_fingers)
    return parser


def main(argv: "list[str] | None" = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
