"""Court registry, zone classification, and line distances.

Expected values here are frozen from official rulebook dimensions or from
independent oracle computations (dense parametric scans), never from the
implementation under test.
"""

import math

import pytest
from hypothesis import given, strategies as st

from courtscene.court import (
    DEFAULT_OUT_OF_PLAY_MARGIN_M,
    CourtConfigError,
    OutOfPlayError,
    SPORTS,
    UnknownLineError,
    UnsupportedSportError,
    court_spec,
    line_distance,
    load_court_config,
    resolve_court_spec,
    save_court_config,
    zone_of,
)

# Rulebook dimensions, frozen independently of the module's own table.
RULEBOOK = {
    "badminton": dict(length=13.40, width=6.10, net_post=1.55, net_center=1.524, surface=0.0),
    "tennis": dict(length=23.77, width=10.97, net_post=1.07, net_center=0.914, surface=0.0),
    "table_tennis": dict(length=2.74, width=1.525, net_post=0.1525, net_center=0.1525, surface=0.76),
    "pickleball": dict(length=13.4112, width=6.096, net_post=0.9144, net_center=0.8636, surface=0.0),
}

CORNERS = ("far_left_corner", "far_right_corner", "near_left_corner", "near_right_corner")


def oracle_line_distance(point, seg):
    """Min distance from (x, y) to the infinite line through seg.

    Dense parametric scan over a wide t range followed by parabolic
    refinement on the best bracketing triple. Independent of the formula
    under test.
    """
    (ax, ay), (bx, by) = seg
    px, py = point[0], point[1]

    def d2(t):
        qx, qy = ax + t * (bx - ax), ay + t * (by - ay)
        return (qx - px) ** 2 + (qy - py) ** 2

    ts = [(-50.0 + 100.0 * i / 20000) for i in range(20001)]
    best = min(range(len(ts)), key=lambda i: d2(ts[i]))
    lo = max(best - 1, 0)
    hi = min(best + 1, len(ts) - 1)
    t0, t1, t2 = ts[lo], ts[best], ts[hi]
    # d2 is an exact quadratic in t, so one parabolic step lands on the vertex.
    f0, f1, f2 = d2(t0), d2(t1), d2(t2)
    denom = (t1 - t0) * (f1 - f2) - (t1 - t2) * (f1 - f0)
    if abs(denom) > 1e-30:
        t_star = t1 - 0.5 * ((t1 - t0) ** 2 * (f1 - f2) - (t1 - t2) ** 2 * (f1 - f0)) / denom
    else:
        t_star = t1
    return math.sqrt(min(d2(t_star), f1))


class TestRegistry:
    def test_all_sports_present(self):
        for sport in SPORTS:
            assert court_spec(sport).sport == sport

    def test_unknown_sport(self):
        with pytest.raises(UnsupportedSportError):
            court_spec("squash")

    @pytest.mark.parametrize("sport", SPORTS)
    def test_corners_span_rulebook_rectangle(self, sport):
        spec = court_spec(sport)
        dims = RULEBOOK[sport]
        L, W, zs = dims["length"], dims["width"], dims["surface"]
        assert spec.keypoints["far_left_corner"] == (0.0, 0.0, zs)
        assert spec.keypoints["far_right_corner"] == (0.0, W, zs)
        assert spec.keypoints["near_left_corner"] == (L, 0.0, zs)
        assert spec.keypoints["near_right_corner"] == (L, W, zs)

    @pytest.mark.parametrize("sport", SPORTS)
    def test_corner_pairwise_distances_are_rectangle(self, sport):
        # A rectangle is fully pinned by its pairwise distance multiset:
        # 2 lengths, 2 widths, 2 equal diagonals.
        spec = court_spec(sport)
        dims = RULEBOOK[sport]
        pts = [spec.keypoints[name] for name in CORNERS]
        dists = sorted(
            math.dist(pts[i], pts[j]) for i in range(4) for j in range(i + 1, 4)
        )
        diag = math.hypot(dims["length"], dims["width"])
        expected = sorted([dims["width"], dims["width"], dims["length"], dims["length"], diag, diag])
        assert dists == pytest.approx(expected, abs=1e-12)

    @pytest.mark.parametrize("sport", SPORTS)
    def test_net_keypoints(self, sport):
        spec = court_spec(sport)
        dims = RULEBOOK[sport]
        mid = dims["length"] / 2.0
        assert spec.keypoints["net_left_top"] == (mid, 0.0, dims["surface"] + dims["net_post"])
        assert spec.keypoints["net_right_top"] == (mid, dims["width"], dims["surface"] + dims["net_post"])
        assert spec.keypoints["net_center_top"][2] == pytest.approx(
            dims["surface"] + dims["net_center"], abs=1e-12
        )
        assert spec.net_height_center_m <= spec.net_height_post_m

    def test_table_tennis_surface_raised(self):
        spec = court_spec("table_tennis")
        assert spec.surface_height_m == 0.76
        for name in CORNERS:
            assert spec.keypoints[name][2] == 0.76

    def test_zone_boundary_is_service_line(self):
        # Badminton short service line sits 1.98 m from the net.
        assert court_spec("badminton").zone_boundary_from_baseline_m == pytest.approx(6.70 - 1.98)
        # Tennis service line sits 6.40 m from the net.
        assert court_spec("tennis").zone_boundary_from_baseline_m == pytest.approx(11.885 - 6.40)
        assert not court_spec("table_tennis").has_service_line

    def test_spec_is_cached(self):
        assert court_spec("tennis") is court_spec("tennis")


class TestZones:
    def test_midway_net_to_service_line_is_far_forecourt(self):
        spec = court_spec("tennis")
        x = (spec.net_x + (spec.net_x - 6.40)) / 2.0  # between service line and net
        assert zone_of((x, 3.0, 0.0), spec) == ("forecourt", "far")

    def test_beyond_far_baseline_is_backcourt(self):
        spec = court_spec("badminton")
        assert zone_of((-0.5, 3.0, 0.0), spec) == ("backcourt", "far")

    def test_beyond_near_baseline_is_backcourt(self):
        spec = court_spec("badminton")
        assert zone_of((spec.length_m + 0.5, 3.0, 0.0), spec) == ("backcourt", "near")

    def test_boundary_goes_to_net_side_band(self):
        spec = court_spec("tennis")
        s = spec.zone_boundary_from_baseline_m
        assert zone_of((s, 1.0, 0.0), spec)[0] == "forecourt"
        assert zone_of((spec.length_m - s, 1.0, 0.0), spec)[0] == "forecourt"
        # On each baseline: midcourt (net side of the midcourt/backcourt edge).
        assert zone_of((0.0, 1.0, 0.0), spec)[0] == "midcourt"
        assert zone_of((spec.length_m, 1.0, 0.0), spec)[0] == "midcourt"

    def test_out_of_play(self):
        spec = court_spec("tennis")
        with pytest.raises(OutOfPlayError):
            zone_of((spec.length_m + DEFAULT_OUT_OF_PLAY_MARGIN_M + 0.01, 0.0, 0.0), spec)
        with pytest.raises(OutOfPlayError):
            zone_of((5.0, -DEFAULT_OUT_OF_PLAY_MARGIN_M - 0.01, 0.0), spec)

    @given(
        x=st.floats(min_value=-4.9, max_value=13.40 + 4.9),
        y=st.floats(min_value=-1.0, max_value=7.0),
        z=st.floats(min_value=0.0, max_value=10.0),
    )
    def test_partition_and_y_z_independence(self, x, y, z):
        spec = court_spec("badminton")
        zone, half = zone_of((x, y, z), spec)
        assert zone in ("forecourt", "midcourt", "backcourt")
        assert half in ("far", "near")
        # Y and Z never change the classification.
        assert zone_of((x, 3.05, 99.0), spec) == (zone, half)
        # Oracle: re-derive from first principles.
        off = x if x < 6.70 else 13.40 - x
        if off < 0:
            assert zone == "backcourt"
        elif off >= 6.70 - 1.98:
            assert zone == "forecourt"
        else:
            assert zone == "midcourt"

    @given(x=st.floats(min_value=0.0, max_value=13.40))
    def test_in_court_points_never_backcourt(self, x):
        spec = court_spec("badminton")
        zone, _ = zone_of((x, 3.0, 0.0), spec)
        assert zone in ("forecourt", "midcourt")


class TestLineDistance:
    def test_axis_aligned(self):
        spec = court_spec("tennis")
        assert line_distance((5.0, 2.0, 0.0), "far_baseline", spec) == pytest.approx(5.0)
        assert line_distance((5.0, 2.0, 1.3), "left_sideline", spec) == pytest.approx(2.0)
        assert line_distance((5.0, 2.0, 0.0), "net_line", spec) == pytest.approx(11.885 - 5.0)

    def test_point_on_line_is_zero(self):
        spec = court_spec("badminton")
        assert line_distance((6.70, 4.2, 0.0), "net_line", spec) == 0.0

    def test_unknown_line(self):
        with pytest.raises(UnknownLineError):
            line_distance((0.0, 0.0, 0.0), "tramline", court_spec("tennis"))

    def test_table_tennis_has_no_service_lines(self):
        spec = court_spec("table_tennis")
        assert "far_service_line" not in spec.lines
        with pytest.raises(UnknownLineError):
            line_distance((1.0, 0.5, 0.8), "far_service_line", spec)

    @given(
        px=st.floats(min_value=-10, max_value=35),
        py=st.floats(min_value=-10, max_value=20),
        pz=st.floats(min_value=0, max_value=6),
        line=st.sampled_from(
            ["far_baseline", "near_baseline", "left_sideline", "right_sideline",
             "net_line", "far_service_line", "near_service_line", "center_line"]
        ),
    )
    def test_matches_scan_oracle_and_ignores_height(self, px, py, pz, line):
        spec = court_spec("tennis")
        got = line_distance((px, py, pz), line, spec)
        want = oracle_line_distance((px, py), spec.lines[line])
        assert got == pytest.approx(want, abs=1e-9)
        assert got == line_distance((px, py, 0.0), line, spec)


class TestConfigFiles:
    def test_round_trip(self, tmp_path):
        for sport in SPORTS:
            spec = court_spec(sport)
            path = tmp_path / f"{sport}.court"
            save_court_config(spec, path)
            loaded = load_court_config(path)
            assert loaded == spec

    def test_new_sport_without_code_changes(self, tmp_path):
        path = tmp_path / "padel.court"
        path.write_text(
            "format_version = 1\n"
            "sport = padel\n"
            "length_m = 20.0\n"
            "width_m = 10.0\n"
            "net_height_post_m = 0.92\n"
            "net_height_center_m = 0.88\n"
            "surface_height_m = 0.0\n"
            "service_line_from_baseline_m = 3.05\n"
            "ball_name = the padel ball\n"
        )
        spec = load_court_config(path)
        assert spec.sport == "padel"
        assert spec.keypoints["near_right_corner"] == (20.0, 10.0, 0.0)
        assert zone_of((18.0, 5.0, 0.0), spec) == ("midcourt", "near")
        assert spec.line_display_names["net_line"] == "the net"

    def test_missing_key_rejected(self, tmp_path):
        path = tmp_path / "bad.court"
        path.write_text("format_version = 1\nsport = x\nlength_m = 10\n")
        with pytest.raises(CourtConfigError):
            load_court_config(path)

    def test_bad_version_rejected(self, tmp_path):
        path = tmp_path / "bad.court"
        save_court_config(court_spec("tennis"), path)
        text = path.read_text().replace("format_version = 1", "format_version = 99")
        path.write_text(text)
        with pytest.raises(CourtConfigError):
            load_court_config(path)

    def test_resolve_prefers_config(self, tmp_path):
        path = tmp_path / "tennis.court"
        save_court_config(court_spec("tennis"), path)
        assert resolve_court_spec("tennis", path) == court_spec("tennis")
        with pytest.raises(CourtConfigError):
            resolve_court_spec("badminton", path)
