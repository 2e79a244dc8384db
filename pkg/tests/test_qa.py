"""QA generation tests: template manifest, answer oracle, dataset assembly.

The centerpiece is an independent brute-force oracle that re-derives every
item's ground truth from raw scene state using its own projection, zone,
and side logic (no imports from the answer-derivation module), then demands
exact agreement.
"""

import json
import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from courtscene.court import court_spec
from courtscene.qa import (
    BENCH_TARGETS,
    GenerationError,
    MissingEntityError,
    QAItem,
    ambiguity_ratio,
    default_manifest,
    enumerate_bindings,
    filter_ambiguous,
    generate_dataset,
    instantiate,
    read_items_jsonl,
    split_scenes,
    write_items_jsonl,
)
from courtscene.qa.templates import SUBCATEGORY_ORDER, load_manifest
from courtscene.synthetic import make_broadcast_camera, sample_scene

SPORTS = ("badminton", "tennis", "table_tennis", "pickleball")


def make_scenes(n, seed=0, sports=SPORTS, **kwargs):
    rng = random.Random(seed)
    out = []
    for i in range(n):
        spec = court_spec(sports[i % len(sports)])
        out.append(sample_scene(spec, rng, scene_id=f"s{i:04d}", frame_id=f"f{i}", **kwargs))
    return out


# ── template manifest ───────────────────────────────────────────────────────


class TestManifest:
    def test_inventory_size(self):
        m = default_manifest()
        assert len(m.templates) == 94
        assert len(m.qtypes()) == 21

    def test_every_subcategory_covered(self):
        m = default_manifest()
        covered = {t.subcategory for t in m.templates}
        assert covered == set(SUBCATEGORY_ORDER)

    def test_prompt_fixed_strings(self):
        m = default_manifest()
        assert m.pre_prompt.startswith("This is a snapshot from a {sport_name} match")
        assert "'near court'" in m.pre_prompt
        assert "anatomical perspective" in m.pre_prompt
        assert m.post_prompts["float_meters"].endswith("Example: 2.54")
        assert m.post_prompts["coordinate_3d"].endswith("Example: (1.2, 3.4, 0.0)")
        assert m.post_prompts["integer"].endswith("Example: 3")
        assert m.post_prompts["mcq"].endswith("Example: B")
        assert "origin (0,0,0)" in m.localization_preamble
        assert "Z-axis is vertical" in m.localization_preamble

    def test_printed_question_forms_present(self):
        questions = {t.question for t in default_manifest().templates}
        expected = [
            "How far apart are the camera and {object} in 3D space?",
            "What is the distance between {object1} and {object2} in meters?",
            "What is the perpendicular distance from {object} to {line}?",
            "What is the height of {object} in meters at this moment?",
            "How many players are visible on the court in this image?",
            "Can you see {ball} in the snapshot?",
            "What is the 3D coordinate (x, y, z) of {object} in meters?",
            "Measuring from the pelvis of each player, which of these players is closest to {player}?",
            "In which longitudinal zone of the court is {ball} currently located?",
            "Is {ball} on the left or right side of the table center line?",
            "From the ego-centric view of {player}, which side is the camera on?",
        ]
        for q in expected:
            assert q in questions

    def test_mcq_option_counts(self):
        for t in default_manifest().templates:
            if t.answer_type == "mcq" and t.options is not None:
                assert 2 <= len(t.options) <= 4

    def test_table_only_templates_marked(self):
        m = default_manifest()
        for t in m.by_qtype("ball_table_side"):
            assert t.sports == ("table_tennis",)
        for t in m.by_qtype("player_zone_classify"):
            assert "table_tennis" not in t.sports
        for t in m.by_qtype("ball_zone_longitudinal"):
            assert "table_tennis" not in t.sports

    def test_manifest_is_editable(self, tmp_path):
        from importlib import resources

        raw = json.loads(
            resources.files("courtscene.qa").joinpath("templates.json").read_text("utf-8")
        )
        raw["templates"] = [t for t in raw["templates"] if t["qtype"] == "count_players"]
        path = tmp_path / "custom.json"
        path.write_text(json.dumps(raw))
        m = load_manifest(path)
        assert len(m.templates) == 5
        assert m.qtypes() == ["count_players"]


# ── brute-force oracle ──────────────────────────────────────────────────────

# Zone-boundary offset from each baseline, meters, from the published court
# dimensions: badminton short service line sits 1.98 m from the net, tennis
# service line 5.485 m from the baseline, pickleball non-volley line 7.0 ft
# from the net. Sports without a service line split the half court evenly.
SERVICE_OFFSET = {
    "badminton": 13.40 / 2 - 1.98,
    "tennis": 5.485,
    "pickleball": 13.4112 / 2 - 2.1336,
}

AMBIG = {
    "badminton": (0.15, 0.15),
    "tennis": (0.15, 0.15),
    "table_tennis": (0.05, 0.05),
    "pickleball": (0.15, 0.15),
}

DIMS = {
    "badminton": (13.40, 6.10),
    "tennis": (23.77, 10.97),
    "table_tennis": (2.74, 1.525),
    "pickleball": (13.4112, 6.096),
}

NET_CENTER = {"badminton": 1.524, "tennis": 0.914, "table_tennis": 0.1525, "pickleball": 0.8636}
SURFACE = {"badminton": 0.0, "tennis": 0.0, "table_tennis": 0.76, "pickleball": 0.0}


def oracle_pixel(camera, point):
    cam = camera.R @ np.asarray(point, float) + camera.t
    if cam[2] <= 0:
        return None
    return (
        camera.fx * cam[0] / cam[2] + camera.cx,
        camera.fy * cam[1] / cam[2] + camera.cy,
    )


def oracle_position(scene, ref):
    if ref == "ball":
        return np.asarray(scene.ball.position, float)
    if ref == "camera":
        return -scene.camera.R.T @ scene.camera.t
    label = int(ref.split(":")[1])
    return np.asarray(scene.player_by_label(label).pelvis, float)


def oracle_zone_index(point, sport):
    """0 forecourt, 1 midcourt, 2 backcourt; boundary offsets from scratch."""
    length, _ = DIMS[sport]
    half = length / 2
    boundary = SERVICE_OFFSET.get(sport, half / 2)
    x = float(point[0])
    off = x if x < half else length - x
    if off < 0:
        return 2
    # exact boundary hits resolve toward the net side
    return 0 if off >= boundary else 1


def oracle_seg_dist(p, a, b):
    p, a, b = (np.asarray(v, float) for v in (p, a, b))
    d = b - a
    t = float(np.dot(p - a, d) / np.dot(d, d))
    t = max(0.0, min(1.0, t))
    return float(np.linalg.norm(p - (a + t * d)))


def oracle_line_distance(point, line_name, court):
    # perpendicular-foot construction, independent of the cross-product form
    (ax, ay), (bx, by) = court.lines[line_name]
    p = np.array([float(point[0]), float(point[1])])
    a = np.array([ax, ay])
    d = np.array([bx - ax, by - ay])
    t = float(np.dot(p - a, d) / np.dot(d, d))
    foot = a + t * d
    return float(np.hypot(*(p - foot)))


def oracle_answer(item: QAItem, scene, court):
    """Recompute the ground truth from raw state; returns the typed answer."""
    sport = scene.sport
    meta = item.meta
    params = meta["params"]
    qtype = meta["qtype"]
    lateral, depth = AMBIG[sport]

    def letter_for_entity(entity):
        for o in item.options:
            if o.get("entity") == entity:
                return o["letter"]
        raise AssertionError(f"entity {entity} not among options of {item.id}")

    def letter_for_index(idx):
        return item.options[idx]["letter"]

    if qtype == "camera_object_distance":
        c = oracle_position(scene, "camera")
        return float(np.linalg.norm(oracle_position(scene, params["object"]) - c))
    if qtype == "object_object_distance":
        return float(
            np.linalg.norm(
                oracle_position(scene, params["object1"])
                - oracle_position(scene, params["object2"])
            )
        )
    if qtype == "object_line_distance":
        return oracle_line_distance(
            oracle_position(scene, params["object"]), params["line"], court
        )
    if qtype == "height_above_surface":
        return float(oracle_position(scene, params["object"])[2]) - SURFACE[sport]
    if qtype == "count_players":
        w, h = scene.camera.image_size
        n = 0
        for p in scene.players:
            pix = oracle_pixel(scene.camera, p.pelvis)
            if pix is not None and 0 <= pix[0] <= w and 0 <= pix[1] <= h:
                n += 1
        return n
    if qtype == "ball_visibility":
        visible = scene.ball is not None and scene.ball.visible
        return letter_for_index(0 if visible else 1)
    if qtype == "localize_object":
        return tuple(float(x) for x in oracle_position(scene, params["object"]))

    if qtype in ("player_player_nearest", "ball_player_nearest", "camera_player_nearest"):
        if qtype == "player_player_nearest":
            anchor = oracle_position(scene, params["player"])
            pool = [p for p in scene.players if f"player:{p.label}" != params["player"]]
        elif qtype == "ball_player_nearest":
            anchor = oracle_position(scene, "ball")
            pool = list(scene.players)
        else:
            anchor = oracle_position(scene, "camera")
            pool = list(scene.players)
        best, best_d = None, math.inf
        for p in pool:
            d = math.dist(tuple(p.pelvis), tuple(anchor))
            if d < best_d:
                best, best_d = p, d
        return letter_for_entity(f"player:{best.label}")

    if qtype == "player_line_nearest":
        best, best_d = None, math.inf
        for p in scene.players:
            d = oracle_line_distance(p.pelvis, params["line"], court)
            if d < best_d:
                best, best_d = p, d
        return letter_for_entity(f"player:{best.label}")

    if qtype.endswith("ego_side"):
        if qtype == "player_player_ego_side":
            obs = scene.player_by_label(int(params["observer"].split(":")[1]))
            target = oracle_position(scene, params["target"])
        elif qtype == "ball_player_ego_side":
            obs = scene.player_by_label(int(params["player"].split(":")[1]))
            target = oracle_position(scene, "ball")
        else:
            obs = scene.player_by_label(int(params["player"].split(":")[1]))
            target = oracle_position(scene, "camera")
        dx, dy = float(target[0] - obs.pelvis[0]), float(target[1] - obs.pelvis[1])
        fx, fy = float(obs.facing[0]), float(obs.facing[1])
        cross = fx * dy - fy * dx
        return letter_for_index(0 if cross > 0 else 1)

    if qtype.endswith("camera_side"):
        if qtype == "player_player_camera_side":
            u_s = oracle_pixel(scene.camera, oracle_position(scene, params["player_a"]))[0]
            u_r = oracle_pixel(scene.camera, oracle_position(scene, params["player_b"]))[0]
        elif qtype == "ball_player_camera_side":
            u_s = oracle_pixel(scene.camera, oracle_position(scene, params["player"]))[0]
            u_r = oracle_pixel(scene.camera, oracle_position(scene, "ball"))[0]
        else:
            u_s = oracle_pixel(scene.camera, oracle_position(scene, params["player"]))[0]
            u_r = scene.camera.cx
        if abs(u_s - u_r) < 8.0:
            return letter_for_index(2)
        return letter_for_index(0 if u_s < u_r else 1)

    if qtype == "ball_zone_longitudinal":
        return letter_for_index(oracle_zone_index(oracle_position(scene, "ball"), sport))
    if qtype == "player_zone_classify":
        p = scene.player_by_label(int(params["player"].split(":")[1]))
        return letter_for_index(oracle_zone_index(p.lowest_point, sport))
    if qtype == "ball_net_above_below":
        z = float(oracle_position(scene, "ball")[2])
        return letter_for_index(0 if z > SURFACE[sport] + NET_CENTER[sport] else 1)
    if qtype == "ball_table_side":
        y = float(oracle_position(scene, "ball")[1])
        off = y - DIMS[sport][1] / 2
        if abs(off) < lateral:
            return letter_for_index(2)
        return letter_for_index(1 if off > 0 else 0)

    raise AssertionError(f"oracle has no rule for {qtype}")


def check_items_against_oracle(items, scene_index):
    mismatches = []
    for item in items:
        scene = scene_index[item.scene_id]
        court = court_spec(item.sport)
        expected = oracle_answer(item, scene, court)
        actual = item.ground_truth
        if isinstance(expected, float):
            ok = math.isclose(expected, actual, rel_tol=1e-9, abs_tol=1e-7)
        elif isinstance(expected, tuple):
            ok = all(
                math.isclose(e, a, rel_tol=1e-9, abs_tol=1e-9)
                for e, a in zip(expected, actual)
            )
        else:
            ok = expected == actual
        if not ok:
            mismatches.append((item.id, expected, actual))
    return mismatches


class TestOracleEquivalence:
    def test_exhaustive_small_pool(self):
        scenes = make_scenes(60, seed=11)
        index = {s.scene_id: s for s in scenes}
        items, _ = generate_dataset(
            scenes, {k: 40 for k in SUBCATEGORY_ORDER}, seed=3, keep_ambiguous=True
        )
        assert len(items) > 300
        mismatches = check_items_against_oracle(items, index)
        assert mismatches == [], mismatches[:5]

    def test_filtered_pool_agrees_too(self):
        scenes = make_scenes(40, seed=23, ball_mode="visible")
        index = {s.scene_id: s for s in scenes}
        items, _ = generate_dataset(scenes, {k: 25 for k in SUBCATEGORY_ORDER}, seed=9)
        mismatches = check_items_against_oracle(items, index)
        assert mismatches == [], mismatches[:5]


# ── instantiation behavior ──────────────────────────────────────────────────


class TestInstantiate:
    def setup_method(self):
        self.scenes = make_scenes(8, seed=5, n_players=4, ball_mode="visible")

    def test_deterministic(self):
        a = instantiate("object_object_distance_01", self.scenes[0], 99)
        b = instantiate("object_object_distance_01", self.scenes[0], 99)
        assert a.to_dict() == b.to_dict()

    def test_prompt_shape(self):
        item = instantiate("height_above_surface_01", self.scenes[0], 1)
        lines = item.question_text.split("\n")
        assert lines[0].startswith("This is a snapshot from a badminton match")
        assert "What is the height of" in lines[1]
        assert lines[-1] == "Answer with a single float number representing meters. Example: 2.54"

    def test_mcq_options_letters(self):
        item = instantiate("ball_player_nearest_01", self.scenes[0], 7)
        letters = [o["letter"] for o in item.options]
        assert letters == ["A", "B", "C", "D"]
        assert item.ground_truth in letters
        assert item.meta["answer_text"].startswith("Player ")

    def test_reshuffle_changes_letter_not_entity(self):
        entities = set()
        letters = set()
        for seed in range(40):
            item = instantiate(
                "ball_player_nearest_01",
                self.scenes[1],
                seed,
                params={},
            )
            entities.add(item.meta["answer_entity"])
            letters.add(item.ground_truth)
        assert len(entities) == 1
        assert len(letters) > 1

    def test_missing_entity_raises(self):
        scene = make_scenes(1, seed=2, n_players=0, ball_mode="absent")[0]
        with pytest.raises(MissingEntityError):
            instantiate("camera_object_distance_01", scene, 0)

    def test_sport_restriction_enforced(self):
        with pytest.raises(GenerationError):
            instantiate("ball_table_side_01", self.scenes[0], 0)  # badminton scene

    def test_localization_preamble_prepended(self):
        item = instantiate("localize_object_01", self.scenes[0], 3)
        assert "origin (0,0,0) is at the far-left corner of the court" in item.question_text
        tt_scene = make_scenes(3, seed=6, n_players=2, ball_mode="visible")[2]
        assert tt_scene.sport == "table_tennis"
        tt_item = instantiate("localize_object_01", tt_scene, 3)
        assert "far-left corner of the table" in tt_item.question_text
        assert "the far end line" in tt_item.question_text

    def test_jsonl_round_trip(self, tmp_path):
        items = [
            instantiate("camera_object_distance_01", self.scenes[0], 1),
            instantiate("ball_player_nearest_01", self.scenes[0], 2),
            instantiate("localize_object_02", self.scenes[1], 3),
        ]
        path = tmp_path / "items.jsonl"
        write_items_jsonl(items, path)
        back = read_items_jsonl(path)
        assert [i.to_dict() for i in back] == [i.to_dict() for i in items]


# ── invariance properties ───────────────────────────────────────────────────


def _rotate_scene_about_z(scene, angle, pivot):
    """Rigidly rotate all world entities about a vertical axis through pivot."""
    c, s = math.cos(angle), math.sin(angle)
    Rz = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])

    def rot(p):
        return Rz @ (np.asarray(p, float) - pivot) + pivot

    from courtscene.calibration import PinholeCamera
    from courtscene.scene import BallState, PlayerState, SceneState

    cam = scene.camera
    new_cam = PinholeCamera(
        fx=cam.fx, fy=cam.fy, cx=cam.cx, cy=cam.cy,
        R=cam.R @ Rz.T, t=cam.t + cam.R @ Rz.T @ (Rz @ pivot - pivot),
        image_size=cam.image_size,
    )
    players = [
        PlayerState(
            player_id=p.player_id, label=p.label, bbox=p.bbox,
            pelvis=rot(p.pelvis),
            facing=(Rz[:2, :2] @ p.facing),
            lowest_point=rot(p.lowest_point),
            joints={k: rot(v) for k, v in p.joints.items()},
        )
        for p in scene.players
    ]
    ball = None
    if scene.ball is not None:
        pos = None if scene.ball.position is None else rot(scene.ball.position)
        ball = BallState(position=pos, visible=scene.ball.visible)
    return SceneState(
        scene_id=scene.scene_id, frame_id=scene.frame_id, sport=scene.sport,
        camera=new_cam, ball=ball, players=players,
    )


class TestInvariances:
    @given(st.integers(0, 10_000), st.floats(-math.pi, math.pi))
    @settings(max_examples=60, deadline=None)
    def test_ego_side_invariant_under_z_rotation(self, seed, angle):
        scene = make_scenes(1, seed=seed, n_players=3, ball_mode="visible")[0]
        item = instantiate("ball_player_ego_side_01", scene, 0, params={"player": "player:1"})
        rotated = _rotate_scene_about_z(scene, angle, np.array([5.0, 2.0, 0.0]))
        item_r = instantiate("ball_player_ego_side_01", rotated, 0, params={"player": "player:1"})
        if not item.meta["ambiguous"] and not item_r.meta["ambiguous"]:
            assert item.ground_truth == item_r.ground_truth

    @given(st.integers(0, 10_000), st.floats(0.2, 5.0))
    @settings(max_examples=60, deadline=None)
    def test_ego_side_invariant_under_scaling_about_observer(self, seed, scale):
        scene = make_scenes(1, seed=seed, n_players=2, ball_mode="visible")[0]
        obs = scene.player_by_label(1)
        item = instantiate(
            "player_player_ego_side_01", scene, 0,
            params={"observer": "player:1", "target": "player:2"},
        )
        target = scene.player_by_label(2)
        target.pelvis = obs.pelvis + scale * (target.pelvis - obs.pelvis)
        item_s = instantiate(
            "player_player_ego_side_01", scene, 0,
            params={"observer": "player:1", "target": "player:2"},
        )
        assert item.ground_truth == item_s.ground_truth
        assert item.meta["ambiguous"] == item_s.meta["ambiguous"]

    @given(st.integers(0, 10_000), st.floats(-math.pi, math.pi),
           st.floats(-3, 3), st.floats(-3, 3))
    @settings(max_examples=60, deadline=None)
    def test_nearest_invariant_under_rigid_motion(self, seed, angle, tx, ty):
        scene = make_scenes(1, seed=seed, n_players=4, ball_mode="visible")[0]
        item = instantiate("ball_player_nearest_01", scene, 0, params={})
        moved = _rotate_scene_about_z(scene, angle, np.array([tx, ty, 0.0]))
        item_m = instantiate("ball_player_nearest_01", moved, 0, params={})
        assert item.meta["answer_entity"] == item_m.meta["answer_entity"]

    def test_filter_never_changes_surviving_answers(self):
        scenes = make_scenes(30, seed=77)
        with_flags, _ = generate_dataset(
            scenes, {k: 30 for k in SUBCATEGORY_ORDER}, seed=1, keep_ambiguous=True
        )
        survivors = filter_ambiguous(with_flags)
        by_id = {i.id: i for i in with_flags}
        for item in survivors:
            assert by_id[item.id].ground_truth == item.ground_truth
        dropped = [i for i in with_flags if i.meta["ambiguous"]]
        for item in dropped:
            assert item.meta["margin"] < item.meta["threshold"]


# ── dataset assembly ────────────────────────────────────────────────────────


class TestGenerateDataset:
    def test_targets_hit_and_manifest_consistent(self):
        scenes = make_scenes(48, seed=19, n_players=4, ball_mode="visible")
        targets = {k: 12 for k in SUBCATEGORY_ORDER}
        items, man = generate_dataset(scenes, targets, seed=4)
        assert man["total"] == len(items) == 12 * 13
        assert man["achieved"] == targets
        assert man["shortfalls"] == {}
        for sub, counts in man["by_sport"].items():
            assert sum(counts.values()) == man["achieved"][sub]

    def test_table_tennis_never_in_player_zone(self):
        scenes = make_scenes(48, seed=19, n_players=4, ball_mode="visible")
        items, man = generate_dataset(scenes, {"player_zone": 40}, seed=4)
        assert man["by_sport"]["player_zone"].get("table_tennis", 0) == 0
        assert all(i.sport != "table_tennis" for i in items)

    def test_shortfall_reported_not_absorbed(self):
        scenes = make_scenes(2, seed=3, n_players=0, ball_mode="visible")
        items, man = generate_dataset(scenes, {"count_player": 50}, seed=0)
        assert man["achieved"]["count_player"] == len(items) < 50
        assert man["shortfalls"]["count_player"] == 50 - len(items)

    def test_same_seed_same_ids(self):
        scenes = make_scenes(20, seed=31)
        a, _ = generate_dataset(scenes, {k: 10 for k in SUBCATEGORY_ORDER}, seed=8)
        b, _ = generate_dataset(scenes, {k: 10 for k in SUBCATEGORY_ORDER}, seed=8)
        assert [i.id for i in a] == [i.id for i in b]

    def test_scene_order_does_not_matter(self):
        scenes = make_scenes(20, seed=31)
        a, _ = generate_dataset(scenes, {k: 6 for k in SUBCATEGORY_ORDER}, seed=8)
        b, _ = generate_dataset(list(reversed(scenes)), {k: 6 for k in SUBCATEGORY_ORDER}, seed=8)
        assert sorted(i.id for i in a) == sorted(i.id for i in b)

    def test_empty_pool_rejected(self):
        with pytest.raises(GenerationError):
            generate_dataset([], {"height": 5}, seed=0)

    def test_split_samples_only_bench_scenes(self):
        scenes = make_scenes(20, seed=31)
        split = split_scenes([s.scene_id for s in scenes], bench_fraction=0.4, seed=1)
        items, man = generate_dataset(
            scenes, {"camera_object": 15}, seed=8, split=split
        )
        assert items
        bench = set(split.bench)
        assert all(item.scene_id in bench for item in items)
        assert man["split"] == split.to_dict()
        assert sorted(man["scene_pool"]) == sorted(s.scene_id for s in scenes)

    def test_split_must_cover_pool(self):
        scenes = make_scenes(6, seed=31)
        split = split_scenes([s.scene_id for s in scenes[:-1]], bench_fraction=0.5, seed=1)
        with pytest.raises(GenerationError, match="missing from the split"):
            generate_dataset(scenes, {"camera_object": 5}, seed=8, split=split)

    def test_bench_targets_sum(self):
        assert sum(BENCH_TARGETS.values()) == 3686


class TestSplitScenes:
    @given(st.integers(1, 200), st.integers(0, 2**31), st.floats(0.0, 1.0))
    @settings(max_examples=50, deadline=None)
    def test_disjoint_and_covering(self, n, seed, frac):
        ids = [f"scene-{i}" for i in range(n)]
        split = split_scenes(ids, bench_fraction=frac, seed=seed)
        assert set(split.train) | set(split.bench) == set(ids)
        assert set(split.train) & set(split.bench) == set()

    def test_duplicate_ids_rejected(self):
        with pytest.raises(GenerationError):
            split_scenes(["a", "a", "b"])


class TestAmbiguityRatio:
    def test_simple_division(self):
        scenes = make_scenes(6, seed=13, n_players=3, ball_mode="visible")
        items, _ = generate_dataset(scenes, {"object_object": 10}, seed=2)
        for item in items:
            scene = next(s for s in scenes if s.scene_id == item.scene_id)
            ratio = ambiguity_ratio(item, scene)
            assert ratio == pytest.approx(item.meta["ratio_3d_2d"])
            assert ratio > 0

    def test_axis_aligned_pair_compresses_more(self):
        # Same 4 m separation: along the optical axis it spans fewer pixels
        # than across it, so meters-per-pixel must come out larger.
        import courtscene.scene as sc

        spec = court_spec("tennis")
        rng = random.Random(4)
        camera = make_broadcast_camera(spec, rng)
        c = camera.center
        mid = np.array([spec.length_m / 2, spec.width_m / 2, spec.surface_height_m + 1.0])
        axis = mid - c
        axis = axis / np.linalg.norm(axis)
        along = [mid - 2.0 * axis, mid + 2.0 * axis]
        lateral_dir = np.array([-axis[1], axis[0], 0.0])
        lateral_dir /= np.linalg.norm(lateral_dir)
        across = [mid - 2.0 * lateral_dir, mid + 2.0 * lateral_dir]

        def scene_with_pair(pair, sid):
            players = [
                sc.PlayerState(
                    player_id=f"p{i}", label=i + 1, bbox=(10.0 * i, 0, 10.0 * i + 5, 5),
                    pelvis=pos, facing=np.array([1.0, 0.0]),
                    lowest_point=np.array([pos[0], pos[1], spec.surface_height_m]),
                )
                for i, pos in enumerate(pair)
            ]
            return sc.SceneState(
                scene_id=sid, frame_id="f", sport="tennis",
                camera=camera, ball=None, players=players,
            )

        params = {"object1": "player:1", "object2": "player:2"}
        item_along = instantiate(
            "object_object_distance_01", scene_with_pair(along, "a"), 0, params=params
        )
        item_across = instantiate(
            "object_object_distance_01", scene_with_pair(across, "b"), 0, params=params
        )
        r_along = ambiguity_ratio(item_along, scene_with_pair(along, "a"))
        r_across = ambiguity_ratio(item_across, scene_with_pair(across, "b"))
        assert r_along > r_across

    def test_coincident_projection_flagged_infinite(self):
        import courtscene.scene as sc

        spec = court_spec("tennis")
        rng = random.Random(4)
        camera = make_broadcast_camera(spec, rng)
        c = camera.center
        mid = np.array([spec.length_m / 2, spec.width_m / 2, spec.surface_height_m + 1.0])
        axis = (mid - c) / np.linalg.norm(mid - c)
        players = [
            sc.PlayerState(
                player_id=f"p{i}", label=i + 1, bbox=(10.0 * i, 0, 10.0 * i + 5, 5),
                pelvis=mid + off * axis, facing=np.array([1.0, 0.0]),
                lowest_point=np.array([mid[0], mid[1], spec.surface_height_m]),
            )
            for i, off in enumerate((0.0, 2.0))
        ]
        scene = sc.SceneState(
            scene_id="z", frame_id="f", sport="tennis", camera=camera, ball=None,
            players=players,
        )
        item = instantiate(
            "object_object_distance_01", scene, 0,
            params={"object1": "player:1", "object2": "player:2"},
        )
        assert ambiguity_ratio(item, scene) == math.inf

    def test_wrong_subcategory_rejected(self):
        scenes = make_scenes(4, seed=13, n_players=3, ball_mode="visible")
        items, _ = generate_dataset(scenes, {"height": 4}, seed=2)
        with pytest.raises(GenerationError):
            ambiguity_ratio(items[0], scenes[0])
