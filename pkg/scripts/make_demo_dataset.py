#!/usr/bin/env python3
"""End-to-end dataset demo on synthetic scenes.

Synthesizes a scene pool across all four sports, samples a QA dataset with
a scene-level holdout split, fakes a noisy "model" that answers from
perturbed ground truth, scores it, and prints the accuracy table. Artifacts
(scenes, QA, manifest, predictions, report) land in --out-dir.
"""

import argparse
import json
import random
import sys
from pathlib import Path

from courtscene.court import court_spec
from courtscene.evaluation import aggregate, format_report_table, predict_from_text
from courtscene.qa import (
    generate_dataset,
    read_items_jsonl,
    split_scenes,
    write_items_jsonl,
)
from courtscene.scene import write_scenes_jsonl
from courtscene.synthetic import sample_scene

SPORTS = ("badminton", "tennis", "table_tennis", "pickleball")


def fake_model_answer(item, rng: random.Random, skill: float) -> str:
    """Answer from perturbed ground truth; `skill` in [0,1] scales the noise down."""
    gt = item.ground_truth
    if item.answer_type == "float_meters":
        value = gt * (1.0 + rng.gauss(0.0, 0.35 * (1.0 - skill)))
        return f"I estimate the distance is about {max(value, 0.01):.2f} meters. {max(value, 0.01):.2f}"
    if item.answer_type == "coordinate_3d":
        x, y, z = (v + rng.gauss(0.0, 0.5 * (1.0 - skill)) for v in gt)
        return f"({x:.2f}, {y:.2f}, {z:.2f})"
    if item.answer_type == "integer":
        value = gt if rng.random() < skill else max(0, gt + rng.choice((-1, 1)))
        return f"There appear to be {value} players. {value}"
    letters = [o["letter"] for o in item.options] if item.options else ["A", "B"]
    if rng.random() < skill and any(o["letter"] == gt for o in item.options or []):
        return f"The answer is {gt}"
    return f"The answer is {rng.choice(letters)}"


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out-dir", default="demo_out", help="artifact directory")
    parser.add_argument("--scenes-per-sport", type=int, default=40)
    parser.add_argument("--per-subcategory", type=int, default=25, help="target per column")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--skill", type=float, default=0.7, help="fake model skill in [0,1]")
    args = parser.parse_args(argv)

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = random.Random(args.seed)

    scenes = []
    for sport in SPORTS:
        spec = court_spec(sport)
        for i in range(args.scenes_per_sport):
            scenes.append(
                sample_scene(spec, rng, scene_id=f"{sport}-{i:03d}", frame_id="000000")
            )
    scenes_path = out_dir / "scenes.jsonl"
    write_scenes_jsonl(scenes, scenes_path)

    split = split_scenes([s.scene_id for s in scenes], bench_fraction=0.3, seed=args.seed)
    from courtscene.qa import SUBCATEGORY_ORDER

    targets = {k: args.per_subcategory for k in SUBCATEGORY_ORDER}
    items, manifest = generate_dataset(scenes, targets, seed=args.seed, split=split)
    qa_path = out_dir / "qa.jsonl"
    write_items_jsonl(items, qa_path)
    (out_dir / "qa.manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    )
    print(f"{len(scenes)} scenes -> {len(items)} QA items (bench scenes: {len(split.bench)})")
    if manifest["shortfalls"]:
        print(f"shortfalls: {manifest['shortfalls']}")

    preds_path = out_dir / "predictions.jsonl"
    answer_rng = random.Random(args.seed + 1)
    with open(preds_path, "w", encoding="utf-8") as fh:
        for item in read_items_jsonl(qa_path):
            text = fake_model_answer(item, answer_rng, args.skill)
            fh.write(json.dumps({"item_id": item.id, "text": text}) + "\n")

    items = read_items_jsonl(qa_path)
    with open(preds_path, encoding="utf-8") as fh:
        texts = {row["item_id"]: row["text"] for row in map(json.loads, fh)}
    predictions = [predict_from_text(item, texts[item.id]) for item in items]
    report = aggregate(items, predictions)
    (out_dir / "report.json").write_text(
        json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"
    )
    print()
    print(format_report_table(report))
    print(f"\nartifacts in {out_dir}/")
    return 0


if __name__ == "__main__":
    sys.exit(main())
