"""Scoring of model predictions against generated QA ground truth.

Answers arrive as free text. Parsing is rule-based with two modes: strict
accepts exactly the formats the post-prompts demand, lenient extracts the
last well-formed value of the expected type from the response. Scoring is
exact match for choices and counts, thresholded mean relative accuracy for
metric distances, and a 30 cm ball for 3D localization. Aggregation
reproduces the benchmark's column layout.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

from .qa.generate import QAItem
from .qa.templates import SUBCATEGORY_DISPLAY, SUBCATEGORY_ORDER

DISTANCE_THRESHOLD_M = 0.15     # slack subtracted from absolute metric error
LOCALIZATION_RADIUS_M = 0.30    # 3D hit radius; exceeds 0.15 * sqrt(3)

_FLOAT = r"[+-]?(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?"
_STRICT_FLOAT = re.compile(rf"{_FLOAT}$")
_STRICT_INT = re.compile(r"[+-]?\d+$")
_STRICT_LETTER = re.compile(r"[A-Z]$")
_STRICT_COORD = re.compile(rf"\(\s*({_FLOAT})\s*,\s*({_FLOAT})\s*,\s*({_FLOAT})\s*\)$")

_ANY_FLOAT = re.compile(_FLOAT)
_ANY_INT = re.compile(r"(?<![\d.])[+-]?\d+(?![\d.])")
_ANY_LETTER = re.compile(r"\b([A-Z])\b")
_ANY_COORD = re.compile(rf"\(\s*({_FLOAT})\s*,\s*({_FLOAT})\s*,\s*({_FLOAT})\s*\)")


class EvaluationError(ValueError):
    pass


@dataclass
class Prediction:
    item_id: str
    raw_text: str
    parsed: float | int | str | tuple[float, float, float] | None = None
    parse_mode: str = "none"  # strict | lenient | none


def _is_refusal(text: str) -> bool:
    return text.strip().strip("'\".!").lower() == "none"


def parse_answer(raw_text: str, answer_type: str, mode: str = "lenient"):
    """Extract a typed answer from free text; None when nothing matches.

    strict: the whole (stripped) text must be exactly one well-formed value.
    lenient: the last well-formed value of the expected type anywhere in the
    text, so responses that restate the answer at the end still parse.
    """
    if mode not in ("strict", "lenient"):
        raise EvaluationError(f"unknown parse mode {mode!r}")
    text = raw_text.strip()
    if not text or _is_refusal(text):
        return None

    if mode == "strict":
        if answer_type == "float_meters":
            m = _STRICT_FLOAT.match(text)
            return float(m.group(0)) if m else None
        if answer_type == "integer":
            m = _STRICT_INT.match(text)
            return int(m.group(0)) if m else None
        if answer_type == "mcq":
            m = _STRICT_LETTER.match(text)
            return m.group(0) if m else None
        if answer_type == "coordinate_3d":
            m = _STRICT_COORD.match(text)
            return tuple(float(g) for g in m.groups()) if m else None
        raise EvaluationError(f"unknown answer type {answer_type!r}")

    if answer_type == "float_meters":
        hits = _ANY_FLOAT.findall(text)
        return float(hits[-1]) if hits else None
    if answer_type == "integer":
        hits = _ANY_INT.findall(text)
        return int(hits[-1]) if hits else None
    if answer_type == "mcq":
        hits = _ANY_LETTER.findall(text)
        return hits[-1] if hits else None
    if answer_type == "coordinate_3d":
        hits = _ANY_COORD.findall(text)
        return tuple(float(g) for g in hits[-1]) if hits else None
    raise EvaluationError(f"unknown answer type {answer_type!r}")


def predict_from_text(item: QAItem, raw_text: str, mode: str = "auto") -> Prediction:
    """Parse a raw response for an item, preferring the strict format.

    mode "auto" tries strict then falls back to lenient; "strict" or
    "lenient" forces a single parser.
    """
    if mode not in ("auto", "strict", "lenient"):
        raise EvaluationError(f"unknown parse mode {mode!r}")
    for m in ("strict", "lenient") if mode == "auto" else (mode,):
        value = parse_answer(raw_text, item.answer_type, mode=m)
        if value is not None:
            return Prediction(item.id, raw_text, value, m)
    return Prediction(item.id, raw_text, None, "none")


# ── metrics ─────────────────────────────────────────────────────────────────

_THETAS = tuple(0.50 + 0.05 * i for i in range(10))


def t_mra(y: float, y_hat: float, threshold: float = DISTANCE_THRESHOLD_M) -> float:
    """Thresholded mean relative accuracy over confidence levels 0.50-0.95.

    Counts the fraction of levels theta at which the prediction's relative
    error, after forgiving `threshold` meters of absolute slack, stays below
    1 - theta.
    """
    if y <= 0:
        raise EvaluationError(f"reference distance must be positive, got {y}")
    excess = (abs(y_hat - y) - threshold) / y
    return sum(1 for theta in _THETAS if excess < 1.0 - theta) / len(_THETAS)


_EXPECTED_TYPE = {
    "float_meters": (float, int),
    "integer": (int,),
    "mcq": (str,),
    "coordinate_3d": (tuple,),
}


def _type_matches(answer_type: str, parsed) -> bool:
    ok = _EXPECTED_TYPE[answer_type]
    if answer_type == "integer" and isinstance(parsed, bool):
        return False
    if answer_type == "coordinate_3d":
        return isinstance(parsed, tuple) and len(parsed) == 3
    return isinstance(parsed, ok)


def score_item(item: QAItem, prediction: Prediction) -> float:
    """Score one prediction in [0, 1]; unparsed or mistyped answers get 0."""
    if prediction.item_id != item.id:
        raise EvaluationError(
            f"prediction for {prediction.item_id!r} scored against {item.id!r}"
        )
    parsed = prediction.parsed
    if parsed is None:
        return 0.0
    if not _type_matches(item.answer_type, parsed):
        return 0.0
    if item.answer_type == "mcq":
        return 1.0 if parsed == item.ground_truth else 0.0
    if item.answer_type == "integer":
        return 1.0 if int(parsed) == int(item.ground_truth) else 0.0
    if item.answer_type == "float_meters":
        return t_mra(float(item.ground_truth), float(parsed))
    if item.answer_type == "coordinate_3d":
        err = math.dist(tuple(item.ground_truth), tuple(parsed))
        return 1.0 if err < LOCALIZATION_RADIUS_M else 0.0
    raise EvaluationError(f"unknown answer type {item.answer_type!r}")


# ── aggregation ─────────────────────────────────────────────────────────────

# Table column grouping, left to right.
COLUMN_GROUPS = (
    ("Dist. Meas.", ("camera_object", "height", "object_line", "object_object")),
    ("Cnt.", ("count_ball", "count_player")),
    ("Loc.", ("localization",)),
    (
        "Rel. Reasoning",
        (
            "ball_zone",
            "ball_player",
            "camera_player",
            "player_zone",
            "player_player",
            "player_line",
        ),
    ),
)


@dataclass
class EvalReport:
    """Per-item scores plus the micro/macro roll-ups; fractions in [0, 1]."""

    per_item: dict[str, float]
    per_subcategory: dict[str, float]
    per_sport: dict[str, float]
    overall: float
    macro_overall: float
    counts: dict[str, int]
    unparsed: int
    flagged_type_mismatch: int = 0
    cells: dict[str, dict[str, float]] = field(default_factory=dict)
    sport_counts: dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "overall": self.overall,
            "macro_overall": self.macro_overall,
            "per_subcategory": self.per_subcategory,
            "per_sport": self.per_sport,
            "counts": self.counts,
            "sport_counts": self.sport_counts,
            "unparsed": self.unparsed,
            "flagged_type_mismatch": self.flagged_type_mismatch,
            "cells": self.cells,
            "per_item": self.per_item,
        }


def aggregate(items, predictions) -> EvalReport:
    """Score a full run. Missing predictions count as unparsed zeros.

    Overall is the item-weighted (micro) mean; a macro mean over the
    subcategory averages is reported alongside for transparency.
    """
    items = list(items)
    if not items:
        raise EvaluationError("no items to aggregate")
    by_id: dict[str, Prediction] = {}
    for pred in predictions:
        if pred.item_id in by_id:
            raise EvaluationError(f"duplicate prediction for item {pred.item_id!r}")
        by_id[pred.item_id] = pred

    per_item: dict[str, float] = {}
    unparsed = 0
    mismatched = 0
    sub_scores: dict[str, list[float]] = {}
    sport_scores: dict[str, list[float]] = {}
    cell_scores: dict[str, dict[str, list[float]]] = {}
    for item in items:
        pred = by_id.get(item.id)
        if pred is None:
            pred = Prediction(item.id, "", None, "none")
        if pred.parsed is None:
            unparsed += 1
        elif not _type_matches(item.answer_type, pred.parsed):
            mismatched += 1
        score = score_item(item, pred)
        per_item[item.id] = score
        sub_scores.setdefault(item.subcategory, []).append(score)
        sport_scores.setdefault(item.sport, []).append(score)
        cell_scores.setdefault(item.sport, {}).setdefault(item.subcategory, []).append(score)

    per_subcategory = {k: sum(v) / len(v) for k, v in sub_scores.items()}
    per_sport = {k: sum(v) / len(v) for k, v in sport_scores.items()}
    all_scores = list(per_item.values())
    overall = sum(all_scores) / len(all_scores)
    macro = sum(per_subcategory.values()) / len(per_subcategory)
    cells = {
        sport: {sub: sum(v) / len(v) for sub, v in subs.items()}
        for sport, subs in cell_scores.items()
    }
    return EvalReport(
        per_item=per_item,
        per_subcategory=per_subcategory,
        per_sport=per_sport,
        overall=overall,
        macro_overall=macro,
        counts={k: len(v) for k, v in sub_scores.items()},
        unparsed=unparsed,
        flagged_type_mismatch=mismatched,
        cells=cells,
        sport_counts={k: len(v) for k, v in sport_scores.items()},
    )


def format_report_table(report: EvalReport) -> str:
    """Fixed-width accuracy table: sports as rows, subcategories as columns.

    Cells are percentages with one decimal; "-" marks empty cells. Overall
    is the item-weighted (micro) average.
    """
    columns = [s for s in SUBCATEGORY_ORDER if s in report.counts]
    widths = {s: max(len(SUBCATEGORY_DISPLAY[s]), 5) for s in columns}
    sport_w = max([len("Sport"), len("All")] + [len(s) for s in report.per_sport])

    def fmt_cell(value, width):
        return ("-" if value is None else f"{100.0 * value:.1f}").rjust(width)

    group_line = ["Sport".ljust(sport_w)]
    header = ["Sport".ljust(sport_w)]
    for group_name, members in COLUMN_GROUPS:
        present = [s for s in members if s in widths]
        if not present:
            continue
        span = sum(widths[s] + 2 for s in present) - 2
        group_line.append(group_name.center(span))
        header.append("  ".join(SUBCATEGORY_DISPLAY[s].rjust(widths[s]) for s in present))
    overall_w = len("Overall")
    group_line.append(" " * overall_w)
    header.append("Overall")

    rows = []
    for sport in sorted(report.per_sport):
        cells = [sport.ljust(sport_w)]
        for _, members in COLUMN_GROUPS:
            present = [s for s in members if s in widths]
            if not present:
                continue
            cells.append(
                "  ".join(
                    fmt_cell(report.cells.get(sport, {}).get(s), widths[s])
                    for s in present
                )
            )
        cells.append(fmt_cell(report.per_sport[sport], overall_w))
        rows.append(" | ".join(cells))

    total = ["All".ljust(sport_w)]
    for _, members in COLUMN_GROUPS:
        present = [s for s in members if s in widths]
        if not present:
            continue
        total.append(
            "  ".join(fmt_cell(report.per_subcategory.get(s), widths[s]) for s in present)
        )
    total.append(fmt_cell(report.overall, overall_w))
    rows.append(" | ".join(total))

    lines = [
        "Accuracy (%) per subcategory; Overall is the item-weighted (micro) average.",
        " | ".join(group_line),
        " | ".join(header),
    ]
    lines.extend(rows)
    return "\n".join(lines)


def ambiguity_curve(items, predictions, percent_grid=(10, 20, 30, 40, 50, 60, 70, 80, 90, 100)):
    """Accuracy over the hardest top-k% of perspective-compressed items.

    Eligible items are the object-object and object-line subcategories that
    carry a finite meters-per-pixel ratio; they are ranked by descending
    ratio (most compressed first) and scored cumulatively.
    """
    items = list(items)
    eligible = [
        item
        for item in items
        if item.subcategory in ("object_object", "object_line")
        and item.meta.get("ratio_3d_2d") is not None
    ]
    if not eligible:
        raise EvaluationError("no items carry a perspective ratio")
    report = aggregate(eligible, [p for p in predictions if p.item_id in {i.id for i in eligible}])
    ranked = sorted(eligible, key=lambda i: (-i.meta["ratio_3d_2d"], i.id))
    out = []
    for pct in percent_grid:
        if not 0 < pct <= 100:
            raise EvaluationError(f"percentage {pct} outside (0, 100]")
        n = max(1, round(len(ranked) * pct / 100))
        subset = ranked[:n]
        acc = sum(report.per_item[i.id] for i in subset) / n
        out.append({"percent": pct, "count": n, "accuracy": acc})
    return out


__all__ = [
    "DISTANCE_THRESHOLD_M",
    "LOCALIZATION_RADIUS_M",
    "EvalReport",
    "EvaluationError",
    "Prediction",
    "aggregate",
    "ambiguity_curve",
    "format_report_table",
    "parse_answer",
    "predict_from_text",
    "score_item",
    "t_mra",
]
