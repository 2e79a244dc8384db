"""Command-line surface: every subcommand over real files."""

import json
import random

import numpy as np
import pytest

from courtscene.calibration import PinholeCamera, project_point
from courtscene.cli import build_parser, main
from courtscene.court import court_spec
from courtscene.qa import read_items_jsonl
from courtscene.scene import write_scenes_jsonl
from courtscene.store import AnnotationStore, new_document
from courtscene.synthetic import make_broadcast_camera, sample_scene

CLICK_NAMES = (
    "far_left_corner",
    "far_right_corner",
    "near_right_corner",
    "near_left_corner",
    "net_left_top",
    "net_right_top",
)

SUBCOMMANDS = (
    "calibrate",
    "lift-ball",
    "fit-trajectory",
    "realign",
    "gen-qa",
    "eval",
    "report",
    "validate",
    "serve",
)


def run(capsys, argv) -> tuple[int, str, str]:
    code = main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


@pytest.fixture()
def seeded_store(tmp_path):
    """Store with one tennis scene: clicks, ball pixels, trajectory frames."""
    camera = make_broadcast_camera(court_spec("tennis"), random.Random(11))
    store = AnnotationStore(tmp_path / "store")
    doc = new_document("match-1", "tennis")
    spec = court_spec("tennis")

    clicks = []
    for name in CLICK_NAMES:
        u, v = project_point(camera, spec.keypoint(name))
        clicks.append({"name": name, "u": u, "v": v})

    ball_world = np.array([17.0, 5.5, 1.1])
    bu, bv = project_point(camera, ball_world)
    gu, gv = project_point(camera, np.array([17.0, 5.5, 0.0]))
    doc["frames"]["000010"] = {
        "image_size": list(camera.image_size),
        "court_clicks": clicks,
        "ball": {"pixel": [bu, bv], "ground_pixel": [gu, gv]},
    }

    # Three ball positions on one constant-acceleration arc, frame ids 0/3/6
    # at 30 fps so the times come out as 0.0, 0.1, 0.2 s.
    p0, v0, a = (
        np.array([6.0, 3.0, 2.0]),
        np.array([4.0, 0.5, 2.5]),
        np.array([0.0, 0.0, -9.8]),
    )
    for frame_id, t in (("0", 0.0), ("3", 0.1), ("6", 0.2)):
        pos = p0 + v0 * t + 0.5 * a * t * t
        doc["frames"][frame_id] = {
            "image_size": list(camera.image_size),
            "ball": {"position": pos.tolist()},
        }
    store.save("match-1", doc, base_version=0)
    return store, camera, ball_world


class TestUsageErrors:
    def test_no_subcommand_exits_2(self, capsys):
        with pytest.raises(SystemExit) as e:
            main([])
        assert e.value.code == 2

    def test_unknown_flag_exits_2(self, capsys):
        with pytest.raises(SystemExit) as e:
            main(["calibrate", "--scene", "s", "--frame", "f", "--bogus"])
        assert e.value.code == 2

    @pytest.mark.parametrize("command", SUBCOMMANDS)
    def test_help_documents_flags(self, capsys, command):
        with pytest.raises(SystemExit) as e:
            main([command, "--help"])
        assert e.value.code == 0
        out = capsys.readouterr().out
        parser = build_parser()
        sub_actions = next(
            a for a in parser._actions if isinstance(a, type(parser._subparsers._group_actions[0]))
        )
        for action in sub_actions.choices[command]._actions:
            for flag in action.option_strings:
                if flag.startswith("--"):
                    assert flag in out

    def test_operation_failure_exits_1(self, capsys, tmp_path):
        code, _, err = run(
            capsys,
            ["calibrate", "--scene", "ghost", "--frame", "f", "--store", str(tmp_path)],
        )
        assert code == 1
        assert "courtscene calibrate:" in err


class TestAnnotationCommands:
    def test_calibrate_writes_camera_and_prints_rmse(self, capsys, seeded_store):
        store, camera, _ = seeded_store
        code, out, _ = run(
            capsys,
            ["calibrate", "--scene", "match-1", "--frame", "000010", "--store", str(store.root)],
        )
        assert code == 0
        assert "rmse_px=" in out

        doc = store.load("match-1")
        frame = doc["frames"]["000010"]
        solved = PinholeCamera.from_dict(frame["camera"])
        assert abs(solved.fx - camera.fx) / camera.fx < 1e-3
        assert abs(solved.fy - camera.fy) / camera.fy < 1e-3
        assert frame["calibration"]["rmse_px"] < 1e-6
        assert doc["version"] == 2

    def test_store_root_from_environment(self, capsys, seeded_store, monkeypatch):
        store, _, _ = seeded_store
        monkeypatch.setenv("COURTSCENE_STORE", str(store.root))
        code, _, _ = run(capsys, ["calibrate", "--scene", "match-1", "--frame", "000010"])
        assert code == 0
        assert "camera" in store.load("match-1")["frames"]["000010"]

    def test_lift_ball_reproduces_position(self, capsys, seeded_store):
        store, _, ball_world = seeded_store
        root = str(store.root)
        assert run(capsys, ["calibrate", "--scene", "match-1", "--frame", "000010", "--store", root])[0] == 0
        code, out, _ = run(
            capsys, ["lift-ball", "--scene", "match-1", "--frame", "000010", "--store", root]
        )
        assert code == 0
        assert "ball at" in out
        ball = store.load("match-1")["frames"]["000010"]["ball"]
        assert np.allclose(ball["position"], ball_world, atol=1e-4)
        assert ball["inconsistent_click"] is False

    def test_lift_ball_requires_camera(self, capsys, seeded_store):
        store, _, _ = seeded_store
        code, _, err = run(
            capsys,
            ["lift-ball", "--scene", "match-1", "--frame", "000010", "--store", str(store.root)],
        )
        assert code == 1
        assert "calibrate" in err

    def test_fit_trajectory_stores_segment(self, capsys, seeded_store):
        store, _, _ = seeded_store
        code, out, _ = run(
            capsys,
            [
                "fit-trajectory",
                "--scene", "match-1",
                "--frames", "0", "3", "6",
                "--store", str(store.root),
            ],
        )
        assert code == 0
        assert "v0=" in out
        entry = store.load("match-1")["trajectories"][0]
        assert entry["frames"] == ["0", "3", "6"]
        assert np.allclose(entry["segment"]["v0"], [4.0, 0.5, 2.5], atol=1e-9)
        assert np.allclose(entry["segment"]["a"], [0.0, 0.0, -9.8], atol=1e-8)

    def test_fit_trajectory_replaces_same_frames(self, capsys, seeded_store):
        store, _, _ = seeded_store
        argv = [
            "fit-trajectory", "--scene", "match-1",
            "--frames", "0", "3", "6", "--store", str(store.root),
        ]
        assert run(capsys, argv)[0] == 0
        assert run(capsys, argv)[0] == 0
        assert len(store.load("match-1")["trajectories"]) == 1

    def test_realign_stores_player_summary(self, capsys, seeded_store, tmp_path):
        store, camera, _ = seeded_store
        root = str(store.root)
        assert run(capsys, ["calibrate", "--scene", "match-1", "--frame", "000010", "--store", root])[0] == 0
        camera = PinholeCamera.from_dict(
            store.load("match-1")["frames"]["000010"]["camera"]
        )

        rng = np.random.default_rng(5)
        base = np.array([16.0, 5.0, 0.0])
        vertices_w = base + rng.uniform([-0.4, -0.4, 0.15], [0.4, 0.4, 1.9], size=(30, 3))
        center = vertices_w.mean(axis=0)
        joints_w = {
            "pelvis": center,
            "left_hip": center + np.array([0.0, 0.1, 0.0]),
            "right_hip": center - np.array([0.0, 0.1, 0.0]),
        }
        mesh_path = tmp_path / "mesh.json"
        mesh_path.write_text(
            json.dumps(
                {
                    "player_id": "p7",
                    "frame": "camera",
                    "vertices": (vertices_w @ camera.R.T + camera.t).tolist(),
                    "joints": {k: (camera.R @ v + camera.t).tolist() for k, v in joints_w.items()},
                }
            )
        )
        out_path = tmp_path / "realigned.json"
        code, out, _ = run(
            capsys,
            [
                "realign",
                "--scene", "match-1", "--frame", "000010",
                "--mesh", str(mesh_path),
                "--height", "0.0",
                "--out", str(out_path),
                "--store", root,
            ],
        )
        assert code == 0
        assert "scale=" in out
        player = store.load("match-1")["frames"]["000010"]["players"]["p7"]
        assert player["lowest_point"][2] == pytest.approx(0.0, abs=1e-6)
        realigned = json.loads(out_path.read_text())
        assert min(v[2] for v in realigned["vertices"]) == pytest.approx(0.0, abs=1e-6)


def write_scene_pool(path, n_per_sport=3):
    scenes = []
    for sport in ("tennis", "badminton"):
        spec = court_spec(sport)
        for i in range(n_per_sport):
            rng = random.Random(1000 + i)
            scenes.append(
                sample_scene(
                    spec, rng,
                    scene_id=f"{sport}-{i}", frame_id="0",
                    n_players=2, ball_mode="visible",
                )
            )
    write_scenes_jsonl(scenes, path)
    return scenes


class TestDatasetCommands:
    def test_gen_qa_deterministic(self, capsys, tmp_path):
        scenes_path = tmp_path / "scenes.jsonl"
        write_scene_pool(scenes_path)
        targets_path = tmp_path / "targets.json"
        targets_path.write_text(json.dumps({"camera_object": 6, "localization": 4}))

        argv = lambda out: [
            "gen-qa",
            "--scenes", str(scenes_path),
            "--out", str(out),
            "--targets", str(targets_path),
            "--seed", "7",
        ]
        assert run(capsys, argv(tmp_path / "a.jsonl"))[0] == 0
        assert run(capsys, argv(tmp_path / "b.jsonl"))[0] == 0
        assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()
        assert (
            (tmp_path / "a.jsonl.manifest.json").read_bytes()
            == (tmp_path / "b.jsonl.manifest.json").read_bytes()
        )

        manifest = json.loads((tmp_path / "a.jsonl.manifest.json").read_text())
        assert manifest["achieved"] == {"camera_object": 6, "localization": 4}
        items = read_items_jsonl(tmp_path / "a.jsonl")
        assert len(items) == 10

    def test_gen_qa_split_holds_out_scenes(self, capsys, tmp_path):
        scenes_path = tmp_path / "scenes.jsonl"
        write_scene_pool(scenes_path)
        targets_path = tmp_path / "targets.json"
        targets_path.write_text(json.dumps({"camera_object": 4}))
        out = tmp_path / "qa.jsonl"
        code, _, _ = run(
            capsys,
            [
                "gen-qa",
                "--scenes", str(scenes_path),
                "--out", str(out),
                "--targets", str(targets_path),
                "--split",
                "--seed", "3",
            ],
        )
        assert code == 0
        manifest = json.loads((tmp_path / "qa.jsonl.manifest.json").read_text())
        split = manifest["split"]
        assert set(split["train"]).isdisjoint(split["bench"])
        bench = set(split["bench"])
        for item in read_items_jsonl(out):
            assert item.scene_id in bench

    def test_eval_perfect_predictions(self, capsys, tmp_path):
        scenes_path = tmp_path / "scenes.jsonl"
        write_scene_pool(scenes_path)
        targets_path = tmp_path / "targets.json"
        targets_path.write_text(
            json.dumps({"camera_object": 4, "localization": 3, "player_zone": 3})
        )
        qa_path = tmp_path / "qa.jsonl"
        assert run(
            capsys,
            [
                "gen-qa",
                "--scenes", str(scenes_path),
                "--out", str(qa_path),
                "--targets", str(targets_path),
                "--seed", "2",
            ],
        )[0] == 0

        items = read_items_jsonl(qa_path)
        assert items
        pred_path = tmp_path / "preds.jsonl"
        with open(pred_path, "w") as fh:
            for item in items:
                gt = item.ground_truth
                if item.answer_type == "coordinate_3d":
                    text = f"({gt[0]:.4f}, {gt[1]:.4f}, {gt[2]:.4f})"
                elif item.answer_type == "float_meters":
                    text = f"{gt:.4f}"
                else:
                    text = str(gt)
                fh.write(json.dumps({"item_id": item.id, "text": text}) + "\n")

        report_path = tmp_path / "report.json"
        code, out, _ = run(
            capsys,
            [
                "eval",
                "--qa", str(qa_path),
                "--pred", str(pred_path),
                "--out", str(report_path),
            ],
        )
        assert code == 0
        assert "Overall" in out
        report = json.loads(report_path.read_text())
        assert report["overall"] == pytest.approx(1.0)
        assert report["unparsed"] == 0

    def test_eval_missing_prediction_file(self, capsys, tmp_path):
        qa_path = tmp_path / "qa.jsonl"
        qa_path.write_text("")
        code, _, err = run(
            capsys, ["eval", "--qa", str(qa_path), "--pred", str(tmp_path / "nope.jsonl")]
        )
        assert code == 1
        assert "eval" in err


class TestValidationCommands:
    def two_cameras(self):
        spec = court_spec("tennis")
        return (
            make_broadcast_camera(spec, random.Random(21)),
            make_broadcast_camera(spec, random.Random(22)),
        )

    def test_report_identity_records(self, capsys, tmp_path):
        cam_a, _ = self.two_cameras()
        records_path = tmp_path / "records.jsonl"
        record = {
            "sport": "tennis",
            "pred_camera": cam_a.to_dict(),
            "gt_camera": cam_a.to_dict(),
            "ball_pred": [10.0, 4.0, 1.0],
            "ball_gt": [10.0, 4.0, 1.0],
            "pelvis_pairs": [[[8.0, 3.0, 0.9], [8.0, 3.0, 0.9]]],
        }
        records_path.write_text(json.dumps(record) + "\n")
        json_path = tmp_path / "stats.json"
        code, out, _ = run(
            capsys,
            ["report", "--records", str(records_path), "--json-out", str(json_path)],
        )
        assert code == 0
        assert "All" in out
        stats = json.loads(json_path.read_text())
        assert stats["overall"]["e_fx_pct"]["mean"] == pytest.approx(0.0, abs=1e-12)
        assert stats["overall"]["ball_x_cm"]["mean"] == pytest.approx(0.0, abs=1e-12)

    def test_validate_triangulates_multiview_file(self, capsys, tmp_path):
        cam_a, cam_b = self.two_cameras()
        points = {"ball": [12.0, 5.0, 1.5], "pelvis_p1": [8.0, 3.0, 0.95]}
        frame = {"frame_id": "f0", "views": []}
        for cam in (cam_a, cam_b):
            frame["views"].append(
                {
                    "camera": cam.to_dict(),
                    "keypoints": {
                        name: list(project_point(cam, np.array(p)))
                        for name, p in points.items()
                    },
                }
            )
        mv_path = tmp_path / "multiview.jsonl"
        mv_path.write_text(json.dumps(frame) + "\n")

        out_path = tmp_path / "points.jsonl"
        code, out, _ = run(
            capsys, ["validate", "--multiview", str(mv_path), "--out", str(out_path)]
        )
        assert code == 0
        assert "2 triangulated points" in out
        row = json.loads(out_path.read_text().strip())
        assert row["frame_id"] == "f0"
        for name, want in points.items():
            got = row["points"][name]
            assert np.allclose(got["point"], want, atol=1e-6)
            assert got["residual_m"] < 1e-6
            assert got["ill_conditioned"] is False
