"""JSON scene and plan files: schema validation, parsing and serialization."""

from __future__ import annotations

import hashlib
import json
import math
import os
import tempfile
from dataclasses import fields
from importlib import resources
from typing import Any

import jsonschema
import numpy as np

from .arm import ArmModel, GripperModel, Trajectory
from .foliation import ManifoldId, ManifoldKind
from .geom import ConvexPolygon, Pose2, Shape2
from .grasping import Grasp, GraspQuality, QualityLabel
from .planner import EpisodeRecord, PlanResult, PlanStatus, Segment
from .scene import DEFAULT_Q_INIT, Obstacle, Params, Scene, Table

SCENE_VERSION = 1
PLAN_VERSION = 1


class SceneFileError(ValueError):
    """Malformed scene or plan document; the message carries field paths."""


def _schema(name: str) -> dict:
    return json.loads(resources.files("regrasp_tamp").joinpath("schemas", name).read_text())


def _finite_float(text: str) -> float:
    v = float(text)
    if not math.isfinite(v):
        raise SceneFileError(f"non-finite number {text!r}")
    return v


def _reject_constant(name: str):
    raise SceneFileError(f"non-finite number {name!r}")


def loads(text: str) -> Any:
    try:
        return json.loads(text, parse_float=_finite_float, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise SceneFileError(f"invalid JSON: {exc}") from None


def dumps(doc: Any) -> str:
    return json.dumps(doc, indent=1, sort_keys=True, allow_nan=False) + "\n"


def _validate(doc: Any, schema_name: str) -> None:
    validator = jsonschema.Draft202012Validator(_schema(schema_name))
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        lines = []
        for e in errors:
            path = "/".join(str(p) for p in e.absolute_path) or "<root>"
            lines.append(f"{path}: {e.message}")
        raise SceneFileError("; ".join(lines))


def _pose(v) -> Pose2:
    return Pose2(*v)


def _parts(raw, where: str) -> tuple[ConvexPolygon, ...]:
    out = []
    for i, verts in enumerate(raw):
        try:
            out.append(ConvexPolygon(tuple(tuple(p) for p in verts)))
        except ValueError as exc:
            raise SceneFileError(f"{where}/{i}: {exc}") from None
    return tuple(out)


def scene_from_dict(doc: dict) -> Scene:
    _validate(doc, "scene.schema.json")
    t = doc["table"]
    table = Table(t["x_min"], t["x_max"], t["height"], t.get("thickness", Table.thickness))
    if not table.x_min < table.x_max:
        raise SceneFileError("table: x_min must be below x_max")
    a = doc["arm"]
    g = a.get("gripper", {})
    palm = g.get("palm_parts")
    gripper = GripperModel(
        g.get("finger_length", GripperModel.finger_length),
        g.get("finger_width", GripperModel.finger_width),
        g.get("max_aperture", GripperModel.max_aperture),
        g.get("grip_force", GripperModel.grip_force),
        None if palm is None else Shape2(_parts(palm, "arm/gripper/palm_parts"), 1.0, "palm"),
    )
    try:
        arm = ArmModel(_pose(a["base"]), tuple(a["link_lengths"]), tuple(a["link_widths"]),
                       tuple(tuple(l) for l in a["joint_limits"]), gripper)
    except ValueError as exc:
        raise SceneFileError(f"arm: {exc}") from None
    obstacles = []
    for i, ob in enumerate(doc["obstacles"]):
        shape = Shape2(_parts(ob["parts"], f"obstacles/{i}/parts"), 1.0, ob.get("name", ""))
        obstacles.append(Obstacle(shape, _pose(ob["pose"])))
    tg = doc["target"]
    target = Shape2(_parts(tg["parts"], "target/parts"), tg["density"], tg.get("name", ""))
    try:
        params = Params().with_overrides(**doc.get("params", {}))
    except (TypeError, ValueError) as exc:
        raise SceneFileError(f"params: {exc}") from None
    return Scene(table, arm, tuple(obstacles), target, _pose(doc["start_placement"]), _pose(doc["goal_placement"]),
                 params, doc.get("seed", 0), tuple(doc.get("q_init", DEFAULT_Q_INIT)), doc.get("name", ""))


def _parts_list(shape: Shape2) -> list:
    return [[list(map(float, v)) for v in p.vertices] for p in shape.parts]


def scene_to_dict(scene: Scene) -> dict:
    g = scene.arm.gripper
    a = scene.arm
    defaults = Params()
    params = {f.name: getattr(scene.params, f.name) for f in fields(Params)
              if getattr(scene.params, f.name) != getattr(defaults, f.name)}
    return {
        "version": SCENE_VERSION,
        "name": scene.name,
        "seed": int(scene.seed),
        "table": {"x_min": scene.table.x_min, "x_max": scene.table.x_max, "height": scene.table.height,
                  "thickness": scene.table.thickness},
        "arm": {
            "base": list(a.base.as_tuple()),
            "link_lengths": list(a.link_lengths),
            "link_widths": list(a.link_widths),
            "joint_limits": [list(l) for l in a.joint_limits],
            "gripper": {"finger_length": g.finger_length, "finger_width": g.finger_width,
                        "max_aperture": g.max_aperture, "grip_force": g.grip_force,
                        "palm_parts": _parts_list(g.palm_shape)},
        },
        "obstacles": [{"name": ob.shape.name, "parts": _parts_list(ob.shape), "pose": list(ob.pose.as_tuple())}
                      for ob in scene.obstacles],
        "target": {"name": scene.target.name, "parts": _parts_list(scene.target), "density": scene.target.density},
        "start_placement": list(scene.start_placement.as_tuple()),
        "goal_placement": list(scene.goal_placement.as_tuple()),
        "q_init": list(scene.q_init),
        "params": params,
    }


def scene_hash(scene: Scene) -> str:
    canon = json.dumps(scene_to_dict(scene), sort_keys=True, separators=(",", ":"), allow_nan=False)
    return hashlib.sha256(canon.encode()).hexdigest()


def load_scene(path: str) -> Scene:
    with open(path, encoding="utf-8") as fh:
        return scene_from_dict(loads(fh.read()))


def atomic_write(path: str, text: str) -> None:
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_scene(scene: Scene, path: str) -> None:
    atomic_write(path, dumps(scene_to_dict(scene)))


def _mid(m: ManifoldId) -> dict:
    return {"kind": m.kind.value, "co_param": int(m.co_param)}


def _opt_int(v):
    return None if v is None else int(v)


def plan_to_dict(result: PlanResult, scene: Scene) -> dict:
    grasps = []
    for gid in sorted(result.grasps):
        g, q = result.grasps[gid]
        grasps.append({"id": g.id, "pose": list(g.object_frame_pose.as_tuple()), "contact_a": list(g.contact_a),
                       "contact_b": list(g.contact_b), "width": g.width, "pinch_normal": list(g.pinch_normal),
                       "torque": q.torque, "label": q.label.value})
    log = []
    for rec in result.log:
        entry = {"episode": rec.episode, "actions": [int(a) for a in rec.actions],
                 "failed_action": _opt_int(rec.failed_action), "failed_manifold": rec.failed_manifold,
                 "rho_updates": {str(k): v for k, v in rec.rho_updates.items()}}
        if math.isfinite(rec.initial_value):
            entry["initial_value"] = rec.initial_value
        log.append(entry)
    metrics = {k: v for k, v in result.metrics.items() if k != "wall_time_ms"}
    return {
        "version": PLAN_VERSION,
        "scene_hash": scene_hash(scene),
        "planner": result.planner,
        "status": result.status.value,
        "message": result.message,
        "episodes": int(result.episodes),
        "final_grasp": _opt_int(result.final_grasp),
        "grasps": grasps,
        "placements": [list(p.as_tuple()) for p in result.placements],
        "segments": [{"kind": s.kind, "manifold": _mid(s.manifold), "grasp": _opt_int(s.grasp),
                      "placement": _opt_int(s.placement), "action": _opt_int(s.action),
                      "waypoints": s.trajectory.waypoints.tolist()} for s in result.segments],
        "log": log,
        "metrics": metrics,
    }


def plan_from_dict(doc: dict, scene: Scene | None = None) -> PlanResult:
    """Parse a plan; with ``scene`` given, reject plans made for another scene."""
    _validate(doc, "plan.schema.json")
    if scene is not None and doc["scene_hash"] != scene_hash(scene):
        raise SceneFileError("scene_hash: plan was made for a different scene")
    grasps = {}
    for g in doc["grasps"]:
        grasp = Grasp(g["id"], _pose(g["pose"]), tuple(g["contact_a"]), tuple(g["contact_b"]), g["width"],
                      tuple(g["pinch_normal"]))
        grasps[g["id"]] = (grasp, GraspQuality(g["torque"], QualityLabel(g["label"])))
    segments = []
    for i, s in enumerate(doc["segments"]):
        mid = ManifoldId(ManifoldKind(s["manifold"]["kind"]), s["manifold"]["co_param"])
        if s.get("grasp") is not None and s["grasp"] not in grasps:
            raise SceneFileError(f"segments/{i}/grasp: unknown grasp id {s['grasp']}")
        segments.append(Segment(s["kind"], mid, Trajectory(np.array(s["waypoints"], dtype=float), mid),
                                s.get("grasp"), s.get("placement"), s.get("action")))
    log = [EpisodeRecord(r["episode"], list(r["actions"]), r.get("initial_value", math.nan), r.get("failed_action"),
                         r.get("failed_manifold"), dict(r.get("rho_updates", {}))) for r in doc.get("log", [])]
    return PlanResult(PlanStatus(doc["status"]), doc["planner"], segments, doc["episodes"], log, grasps,
                      doc.get("final_grasp"), [_pose(p) for p in doc["placements"]], dict(doc.get("metrics", {})),
                      doc.get("message", ""))


def save_plan(result: PlanResult, scene: Scene, path: str) -> None:
    atomic_write(path, dumps(plan_to_dict(result, scene)))


def load_plan(path: str, scene: Scene | None = None) -> PlanResult:
    with open(path, encoding="utf-8") as fh:
        return plan_from_dict(loads(fh.read()), scene)
