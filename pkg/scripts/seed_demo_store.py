#!/usr/bin/env python3
"""Seed an annotation store (and image stubs) for driving the panel locally.

Creates a few scenes whose frames carry synthetic court clicks and ball
clicks derived from known ground-truth cameras, plus flat placeholder PNGs,
then prints the serve command. Running `courtscene calibrate` / `lift-ball`
on the seeded documents reproduces the ground truth.
"""

import argparse
import random
import struct
import sys
import zlib
from pathlib import Path

import numpy as np

from courtscene.calibration import project_point
from courtscene.court import court_spec
from courtscene.store import AnnotationStore, new_document
from courtscene.synthetic import make_broadcast_camera

CLICK_NAMES = (
    "far_left_corner",
    "far_right_corner",
    "near_right_corner",
    "near_left_corner",
    "net_left_top",
    "net_right_top",
)


def flat_png(width: int, height: int, rgb=(34, 102, 51)) -> bytes:
    """Minimal single-color PNG without an image library."""
    row = b"\x00" + bytes(rgb) * width
    raw = row * height

    def chunk(tag: bytes, payload: bytes) -> bytes:
        return (
            struct.pack(">I", len(payload))
            + tag
            + payload
            + struct.pack(">I", zlib.crc32(tag + payload) & 0xFFFFFFFF)
        )

    ihdr = struct.pack(">IIBBBBB", width, height, 8, 2, 0, 0, 0)
    return (
        b"\x89PNG\r\n\x1a\n"
        + chunk(b"IHDR", ihdr)
        + chunk(b"IDAT", zlib.compress(raw, 6))
        + chunk(b"IEND", b"")
    )


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--store", default="demo_store", help="annotation store root")
    parser.add_argument("--images", default="demo_images", help="image root")
    parser.add_argument("--seed", type=int, default=3)
    parser.add_argument(
        "--sports", nargs="+", default=["tennis", "badminton"], help="one scene per sport"
    )
    args = parser.parse_args(argv)

    store = AnnotationStore(args.store)
    image_root = Path(args.images)

    for i, sport in enumerate(args.sports):
        spec = court_spec(sport)
        camera = make_broadcast_camera(spec, random.Random(args.seed + i))
        scene_id = f"demo-{sport}"
        doc = new_document(scene_id, sport)

        w, h = camera.image_size
        clicks = []
        for name in CLICK_NAMES:
            u, v = project_point(camera, spec.keypoint(name))
            clicks.append({"name": name, "u": round(u, 2), "v": round(v, 2)})

        # Ball on a gravity arc so the fitted trajectory has real dynamics.
        zs = spec.surface_height_m
        p0 = np.array([0.35 * spec.length_m, 0.6 * spec.width_m, zs + 0.8])
        v0 = np.array([0.25 * spec.length_m, -0.05 * spec.width_m, 2.2])
        g = np.array([0.0, 0.0, -9.8])

        frame_dir = image_root / scene_id
        frame_dir.mkdir(parents=True, exist_ok=True)
        for frame_no in (0, 3, 6):
            frame_id = f"{frame_no:06d}"
            t = frame_no / 30.0
            ball = p0 + v0 * t + 0.5 * g * t * t
            bu, bv = project_point(camera, ball)
            gu, gv = project_point(camera, np.array([ball[0], ball[1], zs]))
            (frame_dir / f"{frame_id}.png").write_bytes(flat_png(w, h))
            doc["frames"][frame_id] = {
                "image": f"{scene_id}/{frame_id}.png",
                "image_size": [w, h],
                "time_s": t,
                "court_clicks": clicks,
                "ball": {
                    "pixel": [round(bu, 2), round(bv, 2)],
                    "ground_pixel": [round(gu, 2), round(gv, 2)],
                },
            }
        store.save(scene_id, doc)
        print(f"seeded scene {scene_id} ({len(doc['frames'])} frames)")

    print(
        f"\nserve with:\n  courtscene serve --store {args.store} --images {args.images}"
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
