"""Command-line entry point: plan, eval, bench, render and export-suite."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from typing import Optional, Sequence

from .planner import PlanResult, execute, plan, plan_baseline
from .scenes import generate_scene_suite
from .sceneio import SceneFileError, atomic_write, load_plan, load_scene, save_plan, save_scene

EXIT_OK, EXIT_INPUT, EXIT_PLANNER = 0, 1, 2

PLANNERS = ("multimodal", "baseline", "dijkstra-task")

CSV_HEADER = ["scene", "scene_name", "planner", "status", "stability", "delta_r", "success", "episodes", "replans",
              "validated_edges", "value_sweeps", "wall_time_ms"]


def run_planner(scene, name: str) -> PlanResult:
    if name == "multimodal":
        return plan(scene, "mdp")
    if name == "dijkstra-task":
        return plan(scene, "dijkstra")
    if name == "baseline":
        return plan_baseline(scene)
    raise ValueError(f"unknown planner {name!r}")


def _num(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, int):
        return str(v)
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return format(v, ".6g")


def _parse_noise(text: str) -> tuple[float, float]:
    try:
        sx, st = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("noise must be 'sigma_xy,sigma_theta'") from None
    if not (math.isfinite(sx) and math.isfinite(st)) or sx < 0 or st < 0:
        raise argparse.ArgumentTypeError("noise values must be finite and non-negative")
    return sx, st


def cmd_plan(args) -> int:
    scene = load_scene(args.scene)
    if args.seed_override is not None:
        scene = scene.replace(seed=args.seed_override)
    result = run_planner(scene, args.planner)
    save_plan(result, scene, args.out)
    print(json.dumps({"status": result.status.value, "planner": result.planner, "episodes": result.episodes,
                      "final_grasp": result.final_grasp, "message": result.message}, sort_keys=True))
    return EXIT_OK if result.solved else EXIT_PLANNER


def cmd_eval(args) -> int:
    scene = load_scene(args.scene)
    result = load_plan(args.plan, scene)
    if not result.solved:
        print(json.dumps({"error": f"plan status is {result.status.value}"}), file=sys.stderr)
        return EXIT_PLANNER
    report = execute(scene, result, args.noise, args.seed)
    rec = {"delta_r": report.delta_r if math.isfinite(report.delta_r) else None, "stability": report.stability,
           "success": report.success, "replans": report.replans, "reason": report.reason}
    print(json.dumps(rec, sort_keys=True))
    return EXIT_OK


def bench_rows(suite_seed: int, timing: bool = False, planners: Sequence[str] = PLANNERS,
               scenes: Optional[Sequence[int]] = None) -> list[dict]:
    rows = []
    suite = generate_scene_suite(suite_seed)
    for idx, scene in enumerate(suite, start=1):
        if scenes is not None and idx not in scenes:
            continue
        for name in planners:
            row = {"scene": idx, "scene_name": scene.name, "planner": name}
            try:
                result = run_planner(scene, name)
                report = execute(scene, result) if result.solved else None
            except Exception as exc:  # recorded, never aborts the suite
                logging.getLogger(__name__).exception("scene %d planner %s", idx, name)
                row.update(status=f"Error:{type(exc).__name__}", stability=0.0, success=False)
                rows.append(row)
                continue
            row.update(
                status=result.status.value,
                stability=report.stability if report else 0.0,
                delta_r=report.delta_r if report and math.isfinite(report.delta_r) else None,
                success=bool(report and report.success),
                episodes=result.episodes,
                replans=result.metrics.get("replans", 0),
                validated_edges=result.metrics.get("validated_edges", 0),
                value_sweeps=result.metrics.get("value_sweeps", 0),
                wall_time_ms=result.metrics.get("wall_time_ms") if timing else None,
            )
            rows.append(row)
    rows.sort(key=lambda r: (r["scene"], r["planner"]))
    return rows


def rows_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        w.writerow([r.get(k) if k in ("scene_name", "planner", "status") else _num(r.get(k)) for k in CSV_HEADER])
    return buf.getvalue()


def cmd_bench(args) -> int:
    rows = bench_rows(args.suite_seed, args.timing)
    text = rows_to_csv(rows)
    if args.out == "-":
        sys.stdout.write(text)
    else:
        atomic_write(args.out, text)
    return EXIT_OK


def cmd_render(args) -> int:
    from .render import render_plan

    scene = load_scene(args.scene)
    result = load_plan(args.plan, scene)
    if not result.solved:
        print(f"refusing to render: plan status is {result.status.value}", file=sys.stderr)
        return EXIT_PLANNER
    paths = render_plan(scene, result, args.out, args.stride)
    print(json.dumps({"frames": len(paths), "dir": args.out}))
    return EXIT_OK


def cmd_export_suite(args) -> int:
    os.makedirs(args.out, exist_ok=True)
    for idx, scene in enumerate(generate_scene_suite(args.suite_seed), start=1):
        save_scene(scene, os.path.join(args.out, f"scene_{idx:02d}_{scene.name}.json"))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="regrasp-tamp", description="Slide-and-regrasp task and motion planning.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", help="plan a scene and write the plan file")
    p.add_argument("scene")
    p.add_argument("--planner", choices=PLANNERS, default="multimodal")
    p.add_argument("--out", required=True)
    p.add_argument("--seed-override", type=int, default=None)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("eval", help="execute a plan and report stability")
    p.add_argument("scene")
    p.add_argument("plan")
    p.add_argument("--noise", type=_parse_noise, default=(0.0, 0.0), help="sigma_xy,sigma_theta")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="run all planners on the seeded suite")
    p.add_argument("--suite-seed", type=int, default=0)
    p.add_argument("--out", default="-")
    p.add_argument("--timing", action="store_true", help="fill the wall_time_ms column")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("render", help="write SVG frames of a solved plan")
    p.add_argument("scene")
    p.add_argument("plan")
    p.add_argument("--out", required=True)
    p.add_argument("--stride", type=int, default=10)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("export-suite", help="write the benchmark scenes as scene files")
    p.add_argument("--suite-seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_suite)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse usage errors are input errors
        return EXIT_INPUT if exc.code else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except (SceneFileError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
