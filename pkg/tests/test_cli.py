import json
import os
import subprocess
import sys
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from regrasp_tamp.cli import CSV_HEADER, bench_rows, main, rows_to_csv
from regrasp_tamp.grasping import ComEstimate, lift_rotation
from regrasp_tamp.geom import centroid_and_mass
from regrasp_tamp.planner import plan_baseline
from regrasp_tamp.render import frame_count
from regrasp_tamp.sceneio import (
    SceneFileError,
    load_plan,
    load_scene,
    save_scene,
    scene_from_dict,
    scene_hash,
    scene_to_dict,
)
from regrasp_tamp.scenes import _scene, hammer_scene, post_bar


@pytest.fixture
def files(tmp_path):
    def write(scene, name="scene.json"):
        path = tmp_path / name
        save_scene(scene, str(path))
        return str(path)
    return write, tmp_path


def _doc(scene):
    return json.loads(json.dumps(scene_to_dict(scene)))


def test_export_and_plan(files, capsys):
    _, tmp = files
    assert main(["export-suite", "--out", str(tmp / "suite")]) == 0
    names = sorted(os.listdir(tmp / "suite"))
    assert len(names) == 12
    scene_file = str(tmp / "suite" / names[0])
    out = str(tmp / "plan.json")
    assert main(["plan", scene_file, "--out", out]) == 0
    summary = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert summary["status"] == "Solved"
    assert load_plan(out, load_scene(scene_file)).solved


def test_scene_roundtrip(files):
    write, _ = files
    scene = hammer_scene(seed=3).with_params(n_samples=123)
    back = load_scene(write(scene))
    assert scene_hash(back) == scene_hash(scene)
    assert back.params.n_samples == 123 and back.seed == 3


@pytest.mark.parametrize("mutate, where", [
    (lambda d: d["table"].__setitem__("x_min", "left"), "table/x_min"),
    (lambda d: d.__setitem__("colour", "red"), "colour"),
    (lambda d: d["params"].__setitem__("gama", 0.9), "params"),
    (lambda d: d["target"].__setitem__("density", -1.0), "target/density"),
    (lambda d: d["target"]["parts"][0].reverse(), "target/parts/0"),
])
def test_bad_scene_fields_reported(files, tmp_path, capsys, mutate, where):
    doc = _doc(_scene(post_bar(), 0.5, 0.4))
    mutate(doc)
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    assert main(["plan", str(path), "--out", str(tmp_path / "p.json")]) == 1
    err = capsys.readouterr().err
    assert where.split("/")[0] in err
    with pytest.raises(SceneFileError):
        scene_from_dict(doc)


def test_nan_rejected(files, tmp_path, capsys):
    write, _ = files
    text = open(write(_scene(post_bar(), 0.5, 0.4))).read()
    doc = json.loads(text)
    text = text.replace(json.dumps(doc["goal_placement"][0]), "NaN", 1)
    path = tmp_path / "nan.json"
    path.write_text(text)
    assert main(["plan", str(path), "--out", str(tmp_path / "p.json")]) == 1
    assert "NaN" in capsys.readouterr().err
    assert not (tmp_path / "p.json").exists()


def test_missing_file_is_input_error(tmp_path):
    assert main(["plan", str(tmp_path / "nope.json"), "--out", str(tmp_path / "p.json")]) == 1


def test_unsolvable_scene_exit_code(files):
    write, tmp = files
    scene = _scene(post_bar(), 0.5, 0.4)
    far = write(scene.replace(goal_placement=scene.resting_pose(1.5)))
    out = str(tmp / "p.json")
    assert main(["plan", far, "--out", out]) == 2
    # the failed plan is still written and cannot be evaluated or rendered
    assert main(["eval", far, out]) == 2
    assert main(["render", far, out, "--out", str(tmp / "frames")]) == 2


def test_eval_reports_exact_rotation(files, capsys):
    write, tmp = files
    scene = hammer_scene()
    path = write(scene)
    out = str(tmp / "base.json")
    assert main(["plan", path, "--planner", "baseline", "--out", out]) == 0
    capsys.readouterr()
    assert main(["eval", path, out]) == 0
    rec = json.loads(capsys.readouterr().out)
    base = plan_baseline(scene)
    g = base.grasps[base.final_grasp][0]
    com, mass = centroid_and_mass(scene.target)
    p = scene.params
    dr = lift_rotation(g, ComEstimate(com, mass), scene.arm.gripper, p.torsional_mu, p.patch_radius, 0.0)
    assert rec["delta_r"] == dr
    assert set(rec) == {"delta_r", "stability", "success", "replans", "reason"}


def test_eval_rejects_plan_for_other_scene(files, capsys):
    write, tmp = files
    a, b = write(hammer_scene(), "a.json"), write(hammer_scene(seed=9), "b.json")
    out = str(tmp / "p.json")
    assert main(["plan", a, "--out", out]) == 0
    assert main(["eval", b, out]) == 1
    assert "scene_hash" in capsys.readouterr().err


def test_eval_noise_seeded(files, capsys):
    write, tmp = files
    path = write(hammer_scene())
    out = str(tmp / "p.json")
    assert main(["plan", path, "--out", out]) == 0
    capsys.readouterr()
    runs = []
    for _ in range(2):
        assert main(["eval", path, out, "--noise", "0.01,0.2", "--seed", "2"]) == 0
        runs.append(capsys.readouterr().out)
    assert runs[0] == runs[1]


@pytest.mark.parametrize("noise", ["0.1", "a,b", "-0.1,0", "nan,0"])
def test_eval_bad_noise(files, noise):
    write, tmp = files
    path = write(hammer_scene())
    assert main(["eval", path, str(tmp / "missing.json"), "--noise", noise]) == 1


def test_render_frames(files, capsys):
    write, tmp = files
    scene = hammer_scene()
    path = write(scene)
    out = str(tmp / "p.json")
    assert main(["plan", path, "--out", out]) == 0
    result = load_plan(out, scene)
    frames = tmp / "frames"
    capsys.readouterr()
    assert main(["render", path, out, "--out", str(frames), "--stride", "7"]) == 0
    files_out = sorted(os.listdir(frames))
    assert len(files_out) == frame_count(len(result.trajectory), 7)
    assert json.loads(capsys.readouterr().out)["frames"] == len(files_out)
    for name in files_out[:3] + files_out[-1:]:
        root = ET.parse(frames / name).getroot()
        assert root.tag.endswith("svg")
    # the first frame draws the object at its start placement
    _assert_object_at(frames / files_out[0], scene, scene.start_placement)


def _points(el):
    return np.array([[float(v) for v in pair.split(",")] for pair in el.get("points").split()])


def _assert_object_at(svg_path, scene, pose):
    ns = "{http://www.w3.org/2000/svg}"
    polys = ET.parse(svg_path).getroot().findall(f"{ns}polygon")
    # recover the pixel map from the table, whose world corners are known
    table_px, table_w = _points(polys[0]), np.asarray(scene.table.polygon())
    sx = np.ptp(table_px[:, 0]) / np.ptp(table_w[:, 0])
    sy = -np.ptp(table_px[:, 1]) / np.ptp(table_w[:, 1])
    ox = table_px[:, 0].min() - sx * table_w[:, 0].min()
    oy = table_px[:, 1].max() - sy * table_w[:, 1].min()
    drawn = [_points(p) for p in polys if p.get("fill") == "#4a90d9"]
    expect = scene.target.world_parts(pose)
    assert len(drawn) == len(expect)
    for px, w in zip(drawn, expect):
        world = np.column_stack(((px[:, 0] - ox) / sx, (px[:, 1] - oy) / sy))
        np.testing.assert_allclose(world, w, atol=0.01 / abs(sx) + 1e-9)


def test_render_bad_stride(files):
    write, tmp = files
    path = write(hammer_scene())
    out = str(tmp / "p.json")
    assert main(["plan", path, "--out", out]) == 0
    assert main(["render", path, out, "--out", str(tmp / "f"), "--stride", "0"]) == 1


def test_bench_rows_subset_deterministic():
    a = bench_rows(0, planners=("baseline",), scenes=[7, 8])
    b = bench_rows(0, planners=("baseline",), scenes=[7, 8])
    assert a == b
    assert [r["scene"] for r in a] == [7, 8]
    text = rows_to_csv(a)
    lines = text.splitlines()
    assert lines[0].split(",") == CSV_HEADER
    wall = CSV_HEADER.index("wall_time_ms")
    assert all(line.split(",")[wall] == "" for line in lines[1:])


def test_bench_timing_column():
    rows = bench_rows(0, timing=True, planners=("baseline",), scenes=[7])
    assert rows[0]["wall_time_ms"] > 0


@pytest.mark.parametrize("argv", [[], ["fly"], ["plan"], ["bench", "--suite-seed", "x"]])
def test_bad_arguments(argv):
    assert main(argv) == 1


def test_module_help():
    out = subprocess.run([sys.executable, "-m", "regrasp_tamp", "--help"], capture_output=True, text=True)
    assert out.returncode == 0
    for cmd in ("plan", "eval", "bench", "render", "export-suite"):
        assert cmd in out.stdout


def test_documented_schemas_match_package():
    from importlib import resources
    docs = os.path.join(os.path.dirname(__file__), os.pardir, "docs")
    for name in ("scene.schema.json", "plan.schema.json"):
        shipped = resources.files("regrasp_tamp").joinpath("schemas", name).read_text()
        with open(os.path.join(docs, name), encoding="utf-8") as fh:
            assert json.loads(fh.read()) == json.loads(shipped)
