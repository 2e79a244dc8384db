"""Question template manifest: loading, indexing, scene eligibility.

Templates live in an editable JSON manifest (templates.json next to this
module) rather than in code, so the question inventory can be revised or
extended without touching the generator. Each template contributes one
phrasing of one question type; several question types can share a reporting
subcategory (the relational columns bundle nearest/egocentric/camera-view
decision rules).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

MANIFEST_RESOURCE = "templates.json"

# Reporting subcategories in canonical column order. Grouped left to right:
# distance measurement, counting, localization, relational reasoning.
SUBCATEGORY_ORDER = (
    "camera_object",
    "height",
    "object_line",
    "object_object",
    "count_ball",
    "count_player",
    "localization",
    "ball_zone",
    "ball_player",
    "camera_player",
    "player_zone",
    "player_player",
    "player_line",
)

SUBCATEGORY_DISPLAY = {
    "camera_object": "Cam.-Obj.",
    "height": "Height",
    "object_line": "Obj.-Line",
    "object_object": "Obj.-Obj.",
    "count_ball": "Ball Cnt.",
    "count_player": "Player Cnt.",
    "localization": "Loc.",
    "ball_zone": "Ball-Zone",
    "ball_player": "Ball-Player",
    "camera_player": "Cam.-Player",
    "player_zone": "Player-Zone",
    "player_player": "Player-Player",
    "player_line": "Player-Line",
}

CATEGORIES = (
    "distance_measurement",
    "spatial_counting",
    "localization",
    "relational_reasoning",
)

ANSWER_TYPES = ("float_meters", "coordinate_3d", "integer", "mcq")


class TemplateError(ValueError):
    pass


@dataclass(frozen=True)
class Template:
    """One question phrasing plus the bookkeeping needed to instantiate it."""

    id: str
    qtype: str
    subcategory: str
    category: str
    answer_type: str
    question: str
    options: tuple[str, ...] | None = None   # fixed option texts, printed order
    options_source: str | None = None        # "players" -> options built per scene
    sports: tuple[str, ...] | None = None    # None -> all sports
    needs_ball: bool = False                 # question uses the ball's position
    min_players: int = 0
    objects: str | None = None               # entity inventory hint for binding

    def allows_sport(self, sport: str) -> bool:
        return self.sports is None or sport in self.sports

    def eligible(self, scene) -> bool:
        """Cheap per-scene screen; binding enumeration does the full check."""
        if not self.allows_sport(scene.sport):
            return False
        if self.needs_ball:
            if scene.ball is None or not scene.ball.visible or scene.ball.position is None:
                return False
        return len(scene.players) >= self.min_players


@dataclass(frozen=True)
class TemplateManifest:
    version: int
    pre_prompt: str
    post_prompts: dict[str, str]
    localization_preamble: str
    templates: tuple[Template, ...]
    by_id: dict[str, Template] = field(default_factory=dict)

    def __post_init__(self):
        self.by_id.update({t.id: t for t in self.templates})

    def template(self, template_id: str) -> Template:
        try:
            return self.by_id[template_id]
        except KeyError:
            raise TemplateError(f"unknown template id {template_id!r}") from None

    def by_qtype(self, qtype: str) -> list[Template]:
        out = [t for t in self.templates if t.qtype == qtype]
        if not out:
            raise TemplateError(f"no templates for question type {qtype!r}")
        return out

    def qtypes(self) -> list[str]:
        seen: dict[str, None] = {}
        for t in self.templates:
            seen.setdefault(t.qtype, None)
        return list(seen)


def _parse_template(raw: dict) -> Template:
    for key in ("id", "qtype", "subcategory", "category", "answer_type", "question"):
        if key not in raw:
            raise TemplateError(f"template missing {key!r}: {raw}")
    if raw["subcategory"] not in SUBCATEGORY_ORDER:
        raise TemplateError(f"{raw['id']}: unknown subcategory {raw['subcategory']!r}")
    if raw["category"] not in CATEGORIES:
        raise TemplateError(f"{raw['id']}: unknown category {raw['category']!r}")
    if raw["answer_type"] not in ANSWER_TYPES:
        raise TemplateError(f"{raw['id']}: unknown answer type {raw['answer_type']!r}")
    options = raw.get("options")
    options_source = raw.get("options_source")
    if raw["answer_type"] == "mcq":
        if options is None and options_source is None:
            raise TemplateError(f"{raw['id']}: mcq template needs options or a source")
        if options is not None and not 2 <= len(options) <= 4:
            raise TemplateError(f"{raw['id']}: mcq needs 2-4 options")
    elif options is not None or options_source is not None:
        raise TemplateError(f"{raw['id']}: options on a non-mcq template")
    sports = raw.get("sports")
    return Template(
        id=raw["id"],
        qtype=raw["qtype"],
        subcategory=raw["subcategory"],
        category=raw["category"],
        answer_type=raw["answer_type"],
        question=raw["question"],
        options=None if options is None else tuple(options),
        options_source=options_source,
        sports=None if sports is None else tuple(sports),
        needs_ball=bool(raw.get("needs_ball", False)),
        min_players=int(raw.get("min_players", 0)),
        objects=raw.get("objects"),
    )


def load_manifest(path: str | Path | None = None) -> TemplateManifest:
    """Load the template manifest; the packaged default when path is None."""
    if path is None:
        text = resources.files(__package__).joinpath(MANIFEST_RESOURCE).read_text("utf-8")
    else:
        text = Path(path).read_text("utf-8")
    raw = json.loads(text)
    for key in ("version", "pre_prompt", "post_prompts", "localization_preamble", "templates"):
        if key not in raw:
            raise TemplateError(f"manifest missing {key!r}")
    missing = [k for k in ANSWER_TYPES if k not in raw["post_prompts"]]
    if missing:
        raise TemplateError(f"manifest post_prompts missing {missing}")
    templates = tuple(_parse_template(t) for t in raw["templates"])
    ids = [t.id for t in templates]
    if len(set(ids)) != len(ids):
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        raise TemplateError(f"duplicate template ids: {dupes}")
    return TemplateManifest(
        version=int(raw["version"]),
        pre_prompt=raw["pre_prompt"],
        post_prompts=dict(raw["post_prompts"]),
        localization_preamble=raw["localization_preamble"],
        templates=templates,
    )


_DEFAULT: TemplateManifest | None = None


def default_manifest() -> TemplateManifest:
    global _DEFAULT
    if _DEFAULT is None:
        _DEFAULT = load_manifest()
    return _DEFAULT
