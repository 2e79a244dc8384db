"""Reconstructed per-frame scene state: camera, ball, players.

This is the hand-off format between the reconstruction side (calibration +
lifting) and the QA/evaluation side. Everything lives in the court world
frame; serialization is line-oriented JSON so scene corpora stream well.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .calibration import PinholeCamera


class SceneValidationError(ValueError):
    pass


@dataclass
class BallState:
    position: np.ndarray | None  # world meters, None when not annotated
    visible: bool = True

    def __post_init__(self):
        if self.position is not None:
            self.position = np.asarray(self.position, dtype=float).reshape(3)
        if self.visible and self.position is None:
            raise SceneValidationError("visible ball needs a position")


@dataclass
class PlayerState:
    player_id: str
    label: int                    # display index, e.g. 2 -> "Player 2"
    bbox: tuple[float, float, float, float]  # image box (x0, y0, x1, y1)
    pelvis: np.ndarray
    facing: np.ndarray            # unit 2-vector, playing plane
    lowest_point: np.ndarray      # standing position (lowest mesh vertex)
    joints: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        self.pelvis = np.asarray(self.pelvis, dtype=float).reshape(3)
        self.facing = np.asarray(self.facing, dtype=float).reshape(2)
        self.lowest_point = np.asarray(self.lowest_point, dtype=float).reshape(3)
        self.joints = {k: np.asarray(v, dtype=float).reshape(3) for k, v in self.joints.items()}
        n = float(np.linalg.norm(self.facing))
        if abs(n - 1.0) > 1e-6:
            if n < 1e-9:
                raise SceneValidationError(f"player {self.player_id}: facing has no direction")
            self.facing = self.facing / n

    @property
    def display_name(self) -> str:
        return f"Player {self.label}"


@dataclass
class SceneState:
    scene_id: str
    frame_id: str
    sport: str
    camera: PinholeCamera
    ball: BallState | None
    players: list[PlayerState]
    spec_ref: str = ""  # court config identifier, defaults to the sport name

    def __post_init__(self):
        if not self.spec_ref:
            self.spec_ref = self.sport
        ids = [p.player_id for p in self.players]
        if len(set(ids)) != len(ids):
            raise SceneValidationError(f"duplicate player ids in {self.scene_id}")
        labels = [p.label for p in self.players]
        if len(set(labels)) != len(labels):
            raise SceneValidationError(f"duplicate player labels in {self.scene_id}")

    def player_by_label(self, label: int) -> PlayerState:
        for p in self.players:
            if p.label == label:
                return p
        raise KeyError(f"no player labeled {label} in {self.scene_id}")

    def to_dict(self) -> dict:
        return {
            "scene_id": self.scene_id,
            "frame_id": self.frame_id,
            "sport": self.sport,
            "spec_ref": self.spec_ref,
            "camera": self.camera.to_dict(),
            "ball": None
            if self.ball is None
            else {
                "position": None
                if self.ball.position is None
                else [float(x) for x in self.ball.position],
                "visible": self.ball.visible,
            },
            "players": [
                {
                    "player_id": p.player_id,
                    "label": p.label,
                    "bbox": [float(x) for x in p.bbox],
                    "pelvis": [float(x) for x in p.pelvis],
                    "facing": [float(x) for x in p.facing],
                    "lowest_point": [float(x) for x in p.lowest_point],
                    "joints": {k: [float(x) for x in v] for k, v in sorted(p.joints.items())},
                }
                for p in self.players
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SceneState":
        ball = None
        if d.get("ball") is not None:
            b = d["ball"]
            ball = BallState(
                position=None if b.get("position") is None else np.array(b["position"]),
                visible=bool(b.get("visible", True)),
            )
        players = [
            PlayerState(
                player_id=p["player_id"],
                label=int(p["label"]),
                bbox=tuple(float(x) for x in p["bbox"]),
                pelvis=np.array(p["pelvis"]),
                facing=np.array(p["facing"]),
                lowest_point=np.array(p["lowest_point"]),
                joints={k: np.array(v) for k, v in p.get("joints", {}).items()},
            )
            for p in d.get("players", [])
        ]
        return cls(
            scene_id=d["scene_id"],
            frame_id=d["frame_id"],
            sport=d["sport"],
            camera=PinholeCamera.from_dict(d["camera"]),
            ball=ball,
            players=players,
            spec_ref=d.get("spec_ref", ""),
        )


def label_players_by_bbox(players: list[PlayerState]) -> list[PlayerState]:
    """Assign display labels 1..N ordered by ascending bbox left edge."""
    for i, p in enumerate(sorted(players, key=lambda p: p.bbox[0]), start=1):
        p.label = i
    return players


def write_scenes_jsonl(scenes, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for scene in scenes:
            fh.write(json.dumps(scene.to_dict(), sort_keys=True) + "\n")


def read_scenes_jsonl(path: str | Path) -> list[SceneState]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(SceneState.from_dict(json.loads(line)))
    return out
