"""QA item assembly: template instantiation, dataset sampling, manifests.

An item is built from (scene, template, entity binding, seed). Bindings
are enumerated exhaustively per question type; instantiation derives the
ground truth, fills the template, and assembles the final prompt as
pre-prompt + question (+ options) + post-prompt. Dataset generation then
samples items per reporting subcategory to hit requested counts, balancing
across sports, and emits a manifest with achieved counts and shortfalls.

Determinism: every item's RNG seed derives from (global seed, scene id,
template id, binding), so output is reproducible and independent of both
scheduling and scene order.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import math
import random
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..calibration import InvalidCameraError, project_point
from ..court import CourtSpec, OutOfPlayError, court_spec, line_distance, zone_of
from ..scene import SceneState
from .answers import (
    AnswerError,
    DerivedAnswer,
    MissingEntityError,
    derive_answer,
    entity_name,
    entity_position,
    player_entity,
)
from .templates import (
    SUBCATEGORY_ORDER,
    Template,
    TemplateManifest,
    default_manifest,
)

LETTERS = "ABCD"


class GenerationError(ValueError):
    pass


@dataclass
class QAItem:
    id: str
    scene_id: str
    frame_id: str
    sport: str
    category: str
    subcategory: str
    question_text: str
    answer_type: str
    ground_truth: float | int | str | tuple[float, float, float]
    options: list[dict] | None = None
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        gt = self.ground_truth
        if isinstance(gt, tuple):
            gt = list(gt)
        return {
            "id": self.id,
            "scene_id": self.scene_id,
            "frame_id": self.frame_id,
            "sport": self.sport,
            "category": self.category,
            "subcategory": self.subcategory,
            "question_text": self.question_text,
            "answer_type": self.answer_type,
            "ground_truth": gt,
            "options": self.options,
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "QAItem":
        gt = d["ground_truth"]
        if d["answer_type"] == "coordinate_3d":
            gt = tuple(float(x) for x in gt)
        return cls(
            id=d["id"],
            scene_id=d["scene_id"],
            frame_id=d["frame_id"],
            sport=d["sport"],
            category=d["category"],
            subcategory=d["subcategory"],
            question_text=d["question_text"],
            answer_type=d["answer_type"],
            ground_truth=gt,
            options=d.get("options"),
            meta=d.get("meta", {}),
        )


def write_items_jsonl(items, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for item in items:
            fh.write(json.dumps(item.to_dict(), sort_keys=True) + "\n")


def read_items_jsonl(path: str | Path) -> list[QAItem]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(QAItem.from_dict(json.loads(line)))
    return out


# ── prompt assembly ─────────────────────────────────────────────────────────

def sport_display_name(sport: str) -> str:
    return sport.replace("_", " ")


def _surface_phrase(court: CourtSpec) -> str:
    return "the table plane" if court.sport == "table_tennis" else "the court plane"


def _surface_noun(court: CourtSpec) -> str:
    return "table" if court.sport == "table_tennis" else "court"


def _localization_preamble(manifest: TemplateManifest, court: CourtSpec) -> str:
    noun = _surface_noun(court)
    far_line = "end line" if court.sport == "table_tennis" else "baseline"
    return manifest.localization_preamble.format(
        origin_desc=f"at the far-left corner of the {noun}",
        y_axis_desc=f"the far {far_line}",
    )


def item_seed(global_seed: int, scene_id: str, template_id: str, signature: str) -> int:
    digest = hashlib.sha256(
        f"{global_seed}|{scene_id}|{template_id}|{signature}".encode()
    ).digest()
    return int.from_bytes(digest[:8], "big")


def binding_signature(params: dict) -> str:
    if not params:
        return "none"
    return ",".join(f"{k}={v}" for k, v in sorted(params.items()))


# ── binding enumeration ─────────────────────────────────────────────────────

def _object_refs(scene: SceneState) -> list[str]:
    """Question-able entities: the ball (when annotated visible) and players."""
    refs = []
    if scene.ball is not None and scene.ball.visible and scene.ball.position is not None:
        refs.append("ball")
    refs.extend(player_entity(p) for p in sorted(scene.players, key=lambda p: p.label))
    return refs


def _player_refs(scene: SceneState) -> list[str]:
    return [player_entity(p) for p in sorted(scene.players, key=lambda p: p.label)]


def _in_play(point, court: CourtSpec) -> bool:
    try:
        zone_of(point, court)
        return True
    except OutOfPlayError:
        return False


def enumerate_bindings(template: Template, scene: SceneState, court: CourtSpec) -> list[dict]:
    """All concrete entity bindings for this template on this scene.

    Bindings are deterministic: entities are walked in label order. A scene
    failing the template's eligibility screen yields no bindings.
    """
    if not template.eligible(scene):
        return []
    qtype = template.qtype
    objects = _object_refs(scene)
    players = _player_refs(scene)

    if qtype in ("camera_object_distance", "height_above_surface", "localize_object"):
        return [{"object": ref} for ref in objects]
    if qtype == "object_object_distance":
        return [{"object1": a, "object2": b} for a, b in itertools.combinations(objects, 2)]
    if qtype == "object_line_distance":
        return [
            {"object": ref, "line": line}
            for ref in objects
            for line in sorted(court.lines)
        ]
    if qtype in ("count_players", "ball_visibility"):
        return [{}]
    if qtype == "player_player_nearest":
        return [{"player": ref} for ref in players]
    if qtype == "player_player_ego_side":
        return [
            {"observer": a, "target": b}
            for a, b in itertools.permutations(players, 2)
        ]
    if qtype == "player_player_camera_side":
        return [
            {"player_a": a, "player_b": b}
            for a, b in itertools.permutations(players, 2)
        ]
    if qtype in ("ball_player_nearest", "camera_player_nearest"):
        return [{}]
    if qtype in ("ball_player_ego_side", "ball_player_camera_side",
                 "camera_player_ego_side", "camera_player_camera_side"):
        return [{"player": ref} for ref in players]
    if qtype == "ball_zone_longitudinal":
        return [{}] if _in_play(scene.ball.position, court) else []
    if qtype == "ball_net_above_below":
        return [{}]
    if qtype == "ball_table_side":
        return [{}]
    if qtype == "player_zone_classify":
        return [
            {"player": player_entity(p)}
            for p in sorted(scene.players, key=lambda p: p.label)
            if _in_play(p.lowest_point, court)
        ]
    if qtype == "player_line_nearest":
        return [{"line": line} for line in sorted(court.lines)]
    raise GenerationError(f"no binding rule for question type {qtype!r}")


# ── MCQ option assembly ─────────────────────────────────────────────────────

def _entity_option_pool(template: Template, scene: SceneState, params: dict) -> list[str]:
    players = _player_refs(scene)
    if template.qtype == "player_player_nearest":
        return [ref for ref in players if ref != params["player"]]
    return players


def _build_entity_options(
    template: Template,
    scene: SceneState,
    court: CourtSpec,
    params: dict,
    derived: DerivedAnswer,
    rng: random.Random,
) -> tuple[list[dict], str]:
    pool = _entity_option_pool(template, scene, params)
    correct = derived.value
    if correct not in pool:
        raise GenerationError(f"derived entity {correct!r} not in the option pool")
    distractors = [ref for ref in pool if ref != correct]
    if len(distractors) > len(LETTERS) - 1:
        distractors = rng.sample(distractors, len(LETTERS) - 1)
    chosen = [correct] + distractors
    rng.shuffle(chosen)
    options = [
        {"letter": LETTERS[i], "text": entity_name(scene, court, ref), "entity": ref}
        for i, ref in enumerate(chosen)
    ]
    answer_letter = LETTERS[chosen.index(correct)]
    return options, answer_letter


def _fixed_options(template: Template) -> list[dict]:
    return [
        {"letter": LETTERS[i], "text": text}
        for i, text in enumerate(template.options)
    ]


# ── instantiation ───────────────────────────────────────────────────────────

def _template_fills(
    scene: SceneState, court: CourtSpec, template: Template, params: dict
) -> dict:
    fills = {
        "ball": court.ball_name,
        "surface_name": _surface_phrase(court),
    }
    for key, value in params.items():
        if key == "line":
            fills["line"] = court.line_display_names[value]
        else:
            fills[key] = entity_name(scene, court, value)
    return fills


def instantiate(
    template: Template | str,
    scene: SceneState,
    rng_seed: int,
    *,
    params: dict | None = None,
    court: CourtSpec | None = None,
    thresholds=None,
    manifest: TemplateManifest | None = None,
) -> QAItem:
    """Build one QA item. Same (template, scene, params, seed) -> same item.

    With params=None a binding is picked with the seed's RNG from the
    enumerated candidates. Raises MissingEntityError when the template has
    no valid binding on this scene.
    """
    manifest = manifest if manifest is not None else default_manifest()
    if isinstance(template, str):
        template = manifest.template(template)
    court = court if court is not None else court_spec(scene.sport)
    if not template.allows_sport(scene.sport):
        raise GenerationError(f"template {template.id} does not cover {scene.sport}")

    if params is None:
        candidates = enumerate_bindings(template, scene, court)
        if not candidates:
            raise MissingEntityError(
                f"{scene.scene_id}: no valid binding for template {template.id}"
            )
        params = random.Random(rng_seed).choice(candidates)

    derived = derive_answer(scene, court, template.qtype, params, thresholds)
    rng = random.Random(rng_seed)

    options = None
    if template.answer_type == "mcq":
        if template.options_source == "players":
            options, answer_letter = _build_entity_options(
                template, scene, court, params, derived, rng
            )
        else:
            options = _fixed_options(template)
            answer_letter = LETTERS[derived.value]
        ground_truth: float | int | str | tuple = answer_letter
    else:
        ground_truth = derived.value

    body = template.question.format(**_template_fills(scene, court, template, params))
    if template.qtype == "localize_object":
        body = _localization_preamble(manifest, court) + " " + body
    if options is not None:
        body += "\n" + "\n".join(f"({o['letter']}){o['text']}" for o in options)
    pre = manifest.pre_prompt.format(sport_name=sport_display_name(scene.sport))
    question_text = f"{pre}\n{body}\n{manifest.post_prompts[template.answer_type]}"

    meta = {
        "template_id": template.id,
        "qtype": template.qtype,
        "rng_seed": rng_seed,
        "params": dict(sorted(params.items())),
        "ambiguous": derived.ambiguous,
    }
    if math.isfinite(derived.margin):
        meta["margin"] = derived.margin
        meta["threshold"] = derived.threshold
    if options is not None:
        answer_option = next(o for o in options if o["letter"] == ground_truth)
        meta["answer_text"] = answer_option["text"]
        if "entity" in answer_option:
            meta["answer_entity"] = answer_option["entity"]
    for key, value in derived.extras.items():
        meta.setdefault(key, value)

    sig = binding_signature(params)
    return QAItem(
        id=f"{scene.scene_id}/{template.id}/{sig}",
        scene_id=scene.scene_id,
        frame_id=scene.frame_id,
        sport=scene.sport,
        category=template.category,
        subcategory=template.subcategory,
        question_text=question_text,
        answer_type=template.answer_type,
        ground_truth=ground_truth,
        options=options,
        meta=meta,
    )


def filter_ambiguous(items) -> list[QAItem]:
    """Drop items whose decision margin fell below the sport threshold."""
    return [item for item in items if not item.meta.get("ambiguous", False)]


# ── perspective-compression ratio ───────────────────────────────────────────

def _point_segment_distance_2d(p, a, b) -> float:
    px, py = p
    ax, ay = a
    bx, by = b
    dx, dy = bx - ax, by - ay
    sq = dx * dx + dy * dy
    if sq < 1e-18:
        return math.hypot(px - ax, py - ay)
    t = max(0.0, min(1.0, ((px - ax) * dx + (py - ay) * dy) / sq))
    return math.hypot(px - (ax + t * dx), py - (ay + t * dy))


def ambiguity_ratio(item: QAItem, scene: SceneState, court: CourtSpec | None = None) -> float:
    """Meters of 3D separation per pixel of image separation for an item.

    Defined for the object-object and object-line subcategories. Degenerate
    projections (entity behind the camera, coincident pixels) return +inf.
    """
    court = court if court is not None else court_spec(scene.sport)
    params = item.meta["params"]

    if item.subcategory == "object_object":
        a = entity_position(scene, params["object1"])
        b = entity_position(scene, params["object2"])
        d3 = float(np.linalg.norm(a - b))
        try:
            pa = project_point(scene.camera, a)
            pb = project_point(scene.camera, b)
        except InvalidCameraError:
            return math.inf
        d2 = float(math.hypot(pa[0] - pb[0], pa[1] - pb[1]))
    elif item.subcategory == "object_line":
        pos = entity_position(scene, params["object"])
        d3 = line_distance(pos, params["line"], court)
        (ax, ay), (bx, by) = court.lines[params["line"]]
        zs = court.surface_height_m
        try:
            p_img = project_point(scene.camera, pos)
            a_img = project_point(scene.camera, np.array([ax, ay, zs]))
            b_img = project_point(scene.camera, np.array([bx, by, zs]))
        except InvalidCameraError:
            return math.inf
        d2 = _point_segment_distance_2d(p_img, a_img, b_img)
    else:
        raise GenerationError(
            f"ratio defined for object-object/object-line, not {item.subcategory}"
        )
    if d2 <= 1e-9:
        return math.inf
    return d3 / d2


# ── dataset assembly ────────────────────────────────────────────────────────

@dataclass(frozen=True)
class SceneSplit:
    train: tuple[str, ...]
    bench: tuple[str, ...]
    rule: str
    seed: int

    def to_dict(self) -> dict:
        return {
            "train": list(self.train),
            "bench": list(self.bench),
            "rule": self.rule,
            "seed": self.seed,
        }


def split_scenes(scene_ids, bench_fraction: float = 0.2, seed: int = 0) -> SceneSplit:
    """Disjoint scene-level train/bench split; no scene appears in both."""
    raw = list(scene_ids)
    ids = sorted(set(raw))
    if len(ids) != len(raw):
        raise GenerationError("duplicate scene ids in split input")
    if not 0.0 <= bench_fraction <= 1.0:
        raise GenerationError(f"bench fraction {bench_fraction} outside [0, 1]")
    rng = random.Random(seed)
    rng.shuffle(ids)
    k = round(bench_fraction * len(ids))
    return SceneSplit(
        train=tuple(sorted(ids[k:])),
        bench=tuple(sorted(ids[:k])),
        rule=f"seeded shuffle of scene ids, bench fraction {bench_fraction}",
        seed=seed,
    )


# Reference per-subcategory item counts for a full benchmark build.
BENCH_TARGETS = {
    "camera_object": 277,
    "height": 229,
    "object_line": 317,
    "object_object": 663,
    "count_ball": 28,
    "count_player": 34,
    "localization": 368,
    "ball_zone": 255,
    "ball_player": 297,
    "camera_player": 248,
    "player_zone": 82,
    "player_player": 393,
    "player_line": 495,
}


def _candidate_items(
    scenes,
    manifest: TemplateManifest,
    seed: int,
    thresholds,
    court_overrides: dict[str, CourtSpec] | None,
    keep_ambiguous: bool,
    wanted_subcategories: set[str],
) -> dict[str, dict[str, list[QAItem]]]:
    """Instantiate every (scene, template, binding); group by subcategory/sport."""
    pools: dict[str, dict[str, list[QAItem]]] = {}
    courts: dict[str, CourtSpec] = {}
    for scene in scenes:
        court = (court_overrides or {}).get(scene.sport)
        if court is None:
            court = courts.get(scene.sport)
            if court is None:
                court = court_spec(scene.sport)
                courts[scene.sport] = court
        bindings_by_qtype: dict[str, list[dict]] = {}
        for template in manifest.templates:
            if template.subcategory not in wanted_subcategories:
                continue
            if not template.eligible(scene):
                continue
            if template.qtype not in bindings_by_qtype:
                bindings_by_qtype[template.qtype] = enumerate_bindings(
                    template, scene, court
                )
            for params in bindings_by_qtype[template.qtype]:
                rng_seed = item_seed(
                    seed, scene.scene_id, template.id, binding_signature(params)
                )
                try:
                    item = instantiate(
                        template,
                        scene,
                        rng_seed,
                        params=params,
                        court=court,
                        thresholds=thresholds,
                        manifest=manifest,
                    )
                except (AnswerError, OutOfPlayError):
                    # Unanswerable binding (missing entity, behind-camera
                    # annotation, point outside play): not a candidate.
                    continue
                if item.meta["ambiguous"] and not keep_ambiguous:
                    continue
                if item.subcategory in ("object_object", "object_line"):
                    ratio = ambiguity_ratio(item, scene, court)
                    item.meta["ratio_3d_2d"] = None if math.isinf(ratio) else ratio
                    if math.isinf(ratio):
                        item.meta["ratio_degenerate"] = True
                pools.setdefault(item.subcategory, {}).setdefault(
                    item.sport, []
                ).append(item)
    return pools


def generate_dataset(
    scenes,
    targets: dict[str, int] | None = None,
    seed: int = 0,
    *,
    manifest: TemplateManifest | None = None,
    thresholds=None,
    court_overrides: dict[str, CourtSpec] | None = None,
    keep_ambiguous: bool = False,
    split: SceneSplit | None = None,
) -> tuple[list[QAItem], dict]:
    """Sample a balanced QA dataset from a scene pool.

    Per subcategory, candidates are sampled sport-by-sport in round-robin
    order until the target count is reached; a sport with no remaining
    candidates drops out of the cycle. Shortfalls against the targets are
    reported in the manifest, never silently absorbed.
    """
    scenes = list(scenes)
    if not scenes:
        raise GenerationError("empty scene pool")
    ids = [s.scene_id for s in scenes]
    if len(set(ids)) != len(ids):
        raise GenerationError("duplicate scene ids in pool")
    if split is not None:
        overlap = set(split.train) & set(split.bench)
        if overlap:
            raise GenerationError(f"split leaks scenes across sides: {sorted(overlap)}")
        stray = set(ids) - set(split.train) - set(split.bench)
        if stray:
            raise GenerationError(f"pool scenes missing from the split: {sorted(stray)}")
        # Items are drawn from the held-out side only; training scenes never
        # contribute questions, so the benchmark cannot leak scene content.
        bench_ids = set(split.bench)
        scenes = [s for s in scenes if s.scene_id in bench_ids]
        if not scenes:
            raise GenerationError("split leaves no bench scenes to sample from")
    manifest = manifest if manifest is not None else default_manifest()
    targets = dict(targets) if targets is not None else dict(BENCH_TARGETS)
    unknown = sorted(set(targets) - set(SUBCATEGORY_ORDER))
    if unknown:
        raise GenerationError(f"unknown subcategories in targets: {unknown}")

    pools = _candidate_items(
        scenes,
        manifest,
        seed,
        thresholds,
        court_overrides,
        keep_ambiguous,
        wanted_subcategories={s for s, n in targets.items() if n > 0},
    )

    rng = random.Random(seed)
    selected: list[QAItem] = []
    achieved: dict[str, int] = {}
    by_sport: dict[str, dict[str, int]] = {}
    shortfalls: dict[str, int] = {}
    for subcategory in SUBCATEGORY_ORDER:
        target = targets.get(subcategory, 0)
        if target <= 0:
            continue
        sport_pools = pools.get(subcategory, {})
        queues = {}
        for sport in sorted(sport_pools):
            queue = sorted(sport_pools[sport], key=lambda item: item.id)
            rng.shuffle(queue)
            queues[sport] = queue
        taken: list[QAItem] = []
        cycle = sorted(queues)
        while len(taken) < target and cycle:
            still = []
            for sport in cycle:
                if len(taken) >= target:
                    break
                queue = queues[sport]
                if queue:
                    taken.append(queue.pop())
                if queue:
                    still.append(sport)
            cycle = still
        achieved[subcategory] = len(taken)
        counts: dict[str, int] = {}
        for item in taken:
            counts[item.sport] = counts.get(item.sport, 0) + 1
        by_sport[subcategory] = dict(sorted(counts.items()))
        if len(taken) < target:
            shortfalls[subcategory] = target - len(taken)
        selected.extend(taken)

    dataset_manifest = {
        "seed": seed,
        "targets": {k: targets[k] for k in SUBCATEGORY_ORDER if k in targets},
        "achieved": achieved,
        "by_sport": by_sport,
        "shortfalls": shortfalls,
        "total": len(selected),
        "scene_pool": sorted(ids),
        "scenes_used": sorted({item.scene_id for item in selected}),
        "ambiguity_filter": not keep_ambiguous,
        "template_manifest_version": manifest.version,
    }
    if split is not None:
        dataset_manifest["split"] = split.to_dict()
    return selected, dataset_manifest
