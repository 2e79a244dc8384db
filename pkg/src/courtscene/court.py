"""Court layouts and the court-anchored metric world frame.

Every reconstruction in this package lives in a right-handed frame tied to
the playing area:

    origin  : far-left court corner (far baseline meets the left sideline,
              as seen from the broadcast camera)
    X axis  : along the court length, positive toward the camera
              (far baseline at X = 0, near baseline at X = length_m)
    Z axis  : perpendicular to the playing plane, up
    Y axis  : Z x X, which runs along the far baseline to the camera's right

The playing surface sits at Z = surface_height_m. Courts with the surface on
the floor (badminton, tennis, pickleball) use 0.0; the table-tennis playing
surface is the table top at 0.76 m.

Longitudinal zones, per court half, measured from that half's own baseline::

          far baseline                 net                near baseline
    X=0 ----+----------------+----------+----------------+---- X=L
     backcourt |  midcourt   | forecourt | forecourt |  midcourt   | backcourt
       (X<0)   +-------------+          (mirrored for the near half)   (X>L)
               ^ service line

Forecourt spans net to service line, midcourt spans service line to
baseline, and anything beyond the baseline (still within the out-of-play
margin) is backcourt. Points exactly on a band boundary belong to the band
nearer the net.

Dimensions are transcribed from the official rulebooks of each sport and are
exercised by self-check tests (corner rectangle, net midline, band tiling).
All values are meters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

Vec2 = tuple[float, float]
Vec3 = tuple[float, float, float]

SPORTS = ("badminton", "tennis", "table_tennis", "pickleball")

# Points farther than this from the court footprint are not part of the playing
# area in any meaningful sense; zone queries reject them.
DEFAULT_OUT_OF_PLAY_MARGIN_M = 5.0

COURT_CONFIG_FORMAT_VERSION = 1


class UnsupportedSportError(ValueError):
    """Sport name not in the registry and no config supplied."""


class UnknownLineError(KeyError):
    """Named court line does not exist for this sport."""


class OutOfPlayError(ValueError):
    """Point lies beyond the out-of-play margin around the court."""


class CourtConfigError(ValueError):
    """Court configuration file is malformed or incomplete."""


@dataclass(frozen=True)
class AmbiguityThresholds:
    """Per-sport meter thresholds below which relational answers are ambiguous.

    lateral_m guards Y-direction comparisons (center-line side), height
    comparisons against the net tape, and nearest-entity distance gaps.
    depth_m guards X-direction comparisons (zone band boundaries).
    """

    lateral_m: float = 0.15
    depth_m: float = 0.15


@dataclass(frozen=True)
class ZoneBand:
    """Longitudinal band, offsets measured from a half's own baseline toward the net."""

    name: str
    start_m: float
    end_m: float


@dataclass(frozen=True)
class WorldFrame:
    """Documentation record of the frame convention (see module docstring)."""

    origin: str = "far-left court corner"
    x_axis: str = "court length, positive toward the camera"
    y_axis: str = "Z x X, along the far baseline to the camera's right"
    z_axis: str = "playing-plane normal, up"
    handedness: str = "right"


@dataclass(frozen=True)
class CourtSpec:
    """Frozen geometric description of one sport's playing area."""

    sport: str
    length_m: float
    width_m: float
    net_height_post_m: float
    net_height_center_m: float
    surface_height_m: float
    # Offset of the forecourt/midcourt boundary from each half's baseline.
    # Real service line where the sport has one (has_service_line), otherwise
    # a fallback at half of the half-court for API completeness.
    zone_boundary_from_baseline_m: float
    has_service_line: bool
    keypoints: dict[str, Vec3]
    lines: dict[str, tuple[Vec2, Vec2]]
    line_display_names: dict[str, str]
    zones: tuple[ZoneBand, ...]
    center_line: tuple[Vec2, Vec2]
    ambiguity_thresholds: AmbiguityThresholds
    ball_name: str
    world_frame: WorldFrame = field(default_factory=WorldFrame)

    @property
    def net_x(self) -> float:
        return self.length_m / 2.0

    @property
    def half_length_m(self) -> float:
        return self.length_m / 2.0

    def keypoint(self, name: str) -> Vec3:
        try:
            return self.keypoints[name]
        except KeyError:
            raise UnknownLineError(f"unknown keypoint {name!r} for {self.sport}") from None


# One frozen table for all dimensional constants (rulebook values, meters).
#   length, width       : doubles court (badminton/tennis), full table (TT)
#   net_post/net_center : tape height above the playing surface
#   surface             : playing-surface height above the floor
#   service_from_baseline : forecourt/midcourt boundary offset, None = no service line
_SPORT_TABLE: dict[str, dict] = {
    "badminton": dict(
        length=13.40, width=6.10,
        net_post=1.55, net_center=1.524,
        surface=0.0,
        service_from_baseline=13.40 / 2 - 1.98,   # short service line, 1.98 m from net
        lateral=0.15, depth=0.15,
        ball="the shuttlecock",
    ),
    "tennis": dict(
        length=23.77, width=10.97,
        net_post=1.07, net_center=0.914,
        surface=0.0,
        service_from_baseline=23.77 / 2 - 6.40,   # service line, 6.40 m from net
        lateral=0.15, depth=0.15,
        ball="the tennis ball",
    ),
    "table_tennis": dict(
        length=2.74, width=1.525,
        net_post=0.1525, net_center=0.1525,
        surface=0.76,                             # table top above the floor
        service_from_baseline=None,
        lateral=0.05, depth=0.05,
        ball="the ping pong ball",
    ),
    "pickleball": dict(
        length=13.4112, width=6.096,              # 44 ft x 20 ft
        net_post=0.9144, net_center=0.8636,       # 36 in posts, 34 in center
        surface=0.0,
        service_from_baseline=13.4112 / 2 - 2.1336,  # non-volley line, 7 ft from net
        lateral=0.15, depth=0.15,
        ball="the pickleball",
    ),
}

# Display names used when a line is mentioned inside generated question text.
_LINE_DISPLAY: dict[str, str] = {
    "far_baseline": "the far baseline",
    "near_baseline": "the near baseline",
    "left_sideline": "the left sideline",
    "right_sideline": "the right sideline",
    "net_line": "the net",
    "far_service_line": "the far service line",
    "near_service_line": "the near service line",
    "center_line": "the center line",
}

# Table-tennis bounding lines are conventionally called end lines.
_LINE_DISPLAY_TT = dict(
    _LINE_DISPLAY,
    far_baseline="the far endline",
    near_baseline="the near endline",
)

_LINE_DISPLAY_PICKLEBALL = dict(
    _LINE_DISPLAY,
    far_service_line="the far non-volley line",
    near_service_line="the near non-volley line",
)


def _build_spec(
    sport: str,
    length: float,
    width: float,
    net_post: float,
    net_center: float,
    surface: float,
    service_from_baseline: float | None,
    lateral: float,
    depth: float,
    ball: str,
) -> CourtSpec:
    """Derive the full geometric registry from the dimensional constants."""
    zs = surface
    half = length / 2.0
    has_service_line = service_from_baseline is not None
    boundary = service_from_baseline if has_service_line else half / 2.0
    if not (0.0 < boundary < half):
        raise CourtConfigError(f"zone boundary {boundary} outside (0, {half})")

    keypoints: dict[str, Vec3] = {
        "far_left_corner": (0.0, 0.0, zs),
        "far_right_corner": (0.0, width, zs),
        "near_left_corner": (length, 0.0, zs),
        "near_right_corner": (length, width, zs),
        "net_left_top": (half, 0.0, zs + net_post),
        "net_right_top": (half, width, zs + net_post),
        "net_center_top": (half, width / 2.0, zs + net_center),
    }

    lines: dict[str, tuple[Vec2, Vec2]] = {
        "far_baseline": ((0.0, 0.0), (0.0, width)),
        "near_baseline": ((length, 0.0), (length, width)),
        "left_sideline": ((0.0, 0.0), (length, 0.0)),
        "right_sideline": ((0.0, width), (length, width)),
        "net_line": ((half, 0.0), (half, width)),
        "center_line": ((0.0, width / 2.0), (length, width / 2.0)),
    }
    if has_service_line:
        lines["far_service_line"] = ((boundary, 0.0), (boundary, width))
        lines["near_service_line"] = ((length - boundary, 0.0), (length - boundary, width))

    if sport == "table_tennis":
        display = {k: v for k, v in _LINE_DISPLAY_TT.items() if k in lines}
    elif sport == "pickleball":
        display = {k: v for k, v in _LINE_DISPLAY_PICKLEBALL.items() if k in lines}
    else:
        display = {k: v for k, v in _LINE_DISPLAY.items() if k in lines}

    zones = (
        ZoneBand("backcourt", -math.inf, 0.0),
        ZoneBand("midcourt", 0.0, boundary),
        ZoneBand("forecourt", boundary, half),
    )

    return CourtSpec(
        sport=sport,
        length_m=length,
        width_m=width,
        net_height_post_m=net_post,
        net_height_center_m=net_center,
        surface_height_m=zs,
        zone_boundary_from_baseline_m=boundary,
        has_service_line=has_service_line,
        keypoints=keypoints,
        lines=lines,
        line_display_names=display,
        zones=zones,
        center_line=lines["center_line"],
        ambiguity_thresholds=AmbiguityThresholds(lateral_m=lateral, depth_m=depth),
        ball_name=ball,
    )


_SPEC_CACHE: dict[str, CourtSpec] = {}


def court_spec(sport: str) -> CourtSpec:
    """Return the frozen CourtSpec for a supported sport (same object every call)."""
    try:
        row = _SPORT_TABLE[sport]
    except KeyError:
        raise UnsupportedSportError(
            f"unsupported sport {sport!r}; known: {', '.join(sorted(_SPORT_TABLE))}"
        ) from None
    if sport not in _SPEC_CACHE:
        _SPEC_CACHE[sport] = _build_spec(
            sport,
            row["length"], row["width"],
            row["net_post"], row["net_center"],
            row["surface"], row["service_from_baseline"],
            row["lateral"], row["depth"], row["ball"],
        )
    return _SPEC_CACHE[sport]


def zone_of(
    point,
    spec: CourtSpec,
    margin_m: float = DEFAULT_OUT_OF_PLAY_MARGIN_M,
) -> tuple[str, str]:
    """Classify a world point into (zone, half).

    Only X and Y matter: the zone is a longitudinal property and the half is
    decided by which side of the net plane the point is on. Points beyond a
    baseline (but within margin_m of the footprint) are backcourt; farther
    out raises OutOfPlayError. Boundary points go to the band nearer the net.
    """
    x, y = float(point[0]), float(point[1])
    if not (-margin_m <= x <= spec.length_m + margin_m):
        raise OutOfPlayError(f"X = {x:.3f} beyond the out-of-play margin")
    if not (-margin_m <= y <= spec.width_m + margin_m):
        raise OutOfPlayError(f"Y = {y:.3f} beyond the out-of-play margin")

    half = "far" if x < spec.net_x else "near"
    offset = x if half == "far" else spec.length_m - x
    # Walk bands net-side first so exact boundaries resolve toward the net.
    for band in reversed(spec.zones):
        if offset >= band.start_m:
            return band.name, half
    return spec.zones[0].name, half


def line_distance(point, line_name: str, spec: CourtSpec) -> float:
    """Perpendicular distance (meters) from a point to a named court line.

    Court lines live in the playing plane, so the measurement uses the X/Y
    footprint only and is independent of the point's height.
    """
    try:
        (ax, ay), (bx, by) = spec.lines[line_name]
    except KeyError:
        raise UnknownLineError(
            f"unknown line {line_name!r} for {spec.sport}; known: {', '.join(sorted(spec.lines))}"
        ) from None
    px, py = float(point[0]), float(point[1])
    dx, dy = bx - ax, by - ay
    length = math.hypot(dx, dy)
    return abs(dx * (py - ay) - dy * (px - ax)) / length


# ── court configuration files ──────────────────────────────────────────────
#
# Versioned key-value text format (meters). Only the dimensional constants
# are stored; keypoints, lines, and zones derive from them, which is what
# lets a new sport ship as a config file with no code changes.

_REQUIRED_CONFIG_KEYS = (
    "format_version", "sport", "length_m", "width_m",
    "net_height_post_m", "net_height_center_m", "surface_height_m",
)


def save_court_config(spec: CourtSpec, path: str | Path) -> None:
    boundary = (
        f"{spec.zone_boundary_from_baseline_m!r}" if spec.has_service_line else "none"
    )
    text = "\n".join(
        [
            f"format_version = {COURT_CONFIG_FORMAT_VERSION}",
            f"sport = {spec.sport}",
            f"length_m = {spec.length_m!r}",
            f"width_m = {spec.width_m!r}",
            f"net_height_post_m = {spec.net_height_post_m!r}",
            f"net_height_center_m = {spec.net_height_center_m!r}",
            f"surface_height_m = {spec.surface_height_m!r}",
            f"service_line_from_baseline_m = {boundary}",
            f"lateral_threshold_m = {spec.ambiguity_thresholds.lateral_m!r}",
            f"depth_threshold_m = {spec.ambiguity_thresholds.depth_m!r}",
            f"ball_name = {spec.ball_name}",
        ]
    )
    Path(path).write_text(text + "\n", encoding="utf-8")


def load_court_config(path: str | Path) -> CourtSpec:
    """Parse a court configuration file into a full CourtSpec."""
    entries: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise CourtConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        entries[key.strip()] = value.strip()

    missing = [k for k in _REQUIRED_CONFIG_KEYS if k not in entries]
    if missing:
        raise CourtConfigError(f"missing keys: {', '.join(missing)}")
    version = entries["format_version"]
    if version != str(COURT_CONFIG_FORMAT_VERSION):
        raise CourtConfigError(f"unsupported format_version {version!r}")

    def fnum(key: str) -> float:
        try:
            return float(entries[key])
        except ValueError:
            raise CourtConfigError(f"{key}: not a number: {entries[key]!r}") from None

    service_raw = entries.get("service_line_from_baseline_m", "none").lower()
    service = None if service_raw in ("none", "") else float(service_raw)

    return _build_spec(
        sport=entries["sport"],
        length=fnum("length_m"),
        width=fnum("width_m"),
        net_post=fnum("net_height_post_m"),
        net_center=fnum("net_height_center_m"),
        surface=fnum("surface_height_m"),
        service_from_baseline=service,
        lateral=float(entries.get("lateral_threshold_m", 0.15)),
        depth=float(entries.get("depth_threshold_m", 0.15)),
        ball=entries.get("ball_name", "the ball"),
    )


def resolve_court_spec(sport: str, config_path: str | Path | None = None) -> CourtSpec:
    """Config file wins when given; otherwise the built-in registry."""
    if config_path is not None:
        spec = load_court_config(config_path)
        if spec.sport != sport:
            raise CourtConfigError(
                f"config is for {spec.sport!r}, requested {sport!r}"
            )
        return spec
    return court_spec(sport)
