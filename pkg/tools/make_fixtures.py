"""Regenerate the bundled map and corpus fixtures under src/crashsynth/data.

Run from the repository root:  python tools/make_fixtures.py
"""
from __future__ import annotations

import json
import sys
from pathlib import Path

from crashsynth import mapgen

DATA = Path(__file__).resolve().parents[1] / "src" / "crashsynth" / "data"

FIG3_LANES = {  # generated lane id -> the lane names used in the worked example
    "F3_s_in_l1": "l3", "F3_s_in_l2": "l4", "F3_n_in_l1": "l5", "F3_n_in_l2": "l6",
    "F3_w_out_l1": "l7", "F3_w_out_l2": "l8", "F3_e_in_l1": "l1", "F3_e_in_l2": "l2",
    "F3_e_out_l1": "l9", "F3_e_out_l2": "l10", "F3_n_out_l1": "l11", "F3_n_out_l2": "l12",
    "F3_s_out_l1": "l13", "F3_s_out_l2": "l14", "F3_w_in_l1": "l15", "F3_w_in_l2": "l16",
}


def fig3_map() -> dict:
    doc = mapgen.network_doc([mapgen.intersection("F3", lanes=2, width=3.5, length=50.0)])
    for road in doc["roads"]:
        for lane in road["lanes"]:
            lane["id"] = FIG3_LANES[lane["id"]]
    return doc


def grid_map() -> dict:
    parts = [
        mapgen.intersection("I1", lanes=2, width=3.5, center=(0, 0)),
        mapgen.intersection("I2", lanes=3, width=3.2, center=(200, 0)),
        mapgen.intersection("I3", lanes=2, width=3.7, center=(400, 0), rotation=8.0),
        mapgen.intersection("I4", lanes=2, width=3.0, center=(0, 200), length=40.0),
        mapgen.intersection("I5", lanes=(2, 1, 2, 1), width=3.5, center=(200, 200)),
        mapgen.intersection("I6", lanes=1, width=3.5, center=(400, 200)),
        mapgen.t_junction("T1", stem=270, lanes=2, width=3.5, center=(0, 400)),
        mapgen.t_junction("T2", stem=90, lanes=2, width=3.3, center=(200, 400)),
        mapgen.t_junction("T3", stem=0, lanes=1, width=3.5, center=(400, 400)),
        mapgen.t_junction("T4", stem=180, lanes=3, width=3.6, center=(0, 600)),
        mapgen.straight_site("S1", lanes=2, width=3.5, center=(200, 600)),
        mapgen.straight_site("S2", lanes=3, width=3.4, center=(400, 600), rotation=90.0),
    ]
    return mapgen.network_doc(parts)


JUNCTION_LENGTHS = {3.0: 40.0, 3.5: 60.0, 4.0: 80.0}
STRAIGHT_LENGTHS = {3.0: 100.0, 3.5: 140.0, 4.0: 180.0}


def srr_maps() -> dict[str, dict]:
    out = {}
    for w in (3.0, 3.5, 4.0):
        for factor, suffix in ((1, ""), (2, "_2w")):
            tag = f"w{int(w * 10)}{suffix}"
            width = w * factor
            out[f"intersection_{tag}"] = mapgen.network_doc(
                [mapgen.intersection(f"X_{tag}", lanes=3, width=width, length=JUNCTION_LENGTHS[w])])
            out[f"tjunction_{tag}"] = mapgen.network_doc(
                [mapgen.t_junction(f"T_{tag}", stem=270, lanes=3, width=width, length=JUNCTION_LENGTHS[w])])
            out[f"straight_{tag}"] = mapgen.network_doc(
                [mapgen.straight_site(f"S_{tag}", lanes=3, width=width, length=STRAIGHT_LENGTHS[w])])
    return out


def P(pid, role, direction, lane, actions, kind="Vehicle"):
    return {"id": pid, "kind": kind, "role": role, "driving_direction": direction, "running_lane": lane,
            "actions": actions}


def abstract(location, crash, parts, *, weather="Clear", lighting="Daylight", lanes=None, mph=None):
    road = {"collision_location": location,
            "lane_num": lanes or max(p["running_lane"] for p in parts)}
    if mph is not None:
        road["speed_limit_mph"] = mph
    return {"environment": {"weather": weather, "lighting": lighting}, "road": road,
            "dynamic": {"participants_number": len(parts), "participants": parts, "crash_type": crash}}


S, V = "Striker", "Victim"
CORPUS = {
    # intersections
    "i01_left_turn_head_on": abstract("Intersection", "Frontal", [
        P("P1", S, "North", 1, ["follow lane", "turn left"]), P("P2", V, "South", 1, ["follow lane", "vehicle cross"])],
        mph=30),
    "i02_left_turn_across_path": abstract("Intersection", "FrontToSide", [
        P("P1", S, "North", 1, ["turn left"]), P("P2", V, "South", 1, ["vehicle cross"])], weather="Rainy"),
    "i03_right_angle": abstract("Intersection", "FrontToSide", [
        P("P1", S, "East", 2, ["follow lane", "vehicle cross"]), P("P2", V, "North", 1, ["vehicle cross"])],
        lighting="Dark"),
    "i04_right_turn_pedestrian": abstract("Intersection", "FrontToSide", [
        P("P1", S, "North", 2, ["turn right"]),
        P("P2", V, "North", 1, ["pedestrian cross"], kind="Pedestrian")], lanes=2),
    "i05_queue_rear_end": abstract("Intersection", "RearEnd", [
        P("P1", S, "North", 1, ["follow lane"]), P("P2", V, "North", 1, ["stop"])], weather="Foggy"),
    "i06_u_turn": abstract("Intersection", "FrontToSide", [
        P("P1", S, "West", 1, ["u-turn"]), P("P2", V, "East", 1, ["vehicle cross"])], lighting="DarkLighted"),
    "i07_left_turn_queue": abstract("Intersection", "RearEnd", [
        P("P1", S, "South", 1, ["follow lane", "turn left"]), P("P2", V, "South", 1, ["turn left"])]),
    "i08_wrong_way": abstract("Intersection", "Frontal", [
        P("P1", S, "East", 1, ["retrograde"]), P("P2", V, "West", 1, ["vehicle cross"])], lighting="Dark"),
    "i09_lane_change_approach": abstract("Intersection", "RearEnd", [
        P("P1", S, "North", 1, ["follow lane", "change lane"]), P("P2", V, "North", 2, ["follow lane"])]),
    "i10_right_turn_cross_traffic": abstract("Intersection", "FrontToSide", [
        P("P1", S, "East", 1, ["turn right"]), P("P2", V, "North", 1, ["vehicle cross"])], weather="Snowy"),
    "i11_off_road_pedestrian": abstract("Intersection", "RearEnd", [
        P("P1", S, "North", 2, ["follow lane", "drive off road"]),
        P("P2", V, "North", 1, ["pedestrian walk"], kind="Pedestrian")], lanes=2),
    "i12_through_right_angle": abstract("Intersection", "FrontToSide", [
        P("P1", S, "South", 1, ["vehicle cross"]), P("P2", V, "West", 2, ["follow lane", "vehicle cross"])],
        weather="Cloudy"),
    # T-junctions (stem leg approached northbound)
    "t01_stem_left_turn": abstract("TJunction", "FrontToSide", [
        P("P1", S, "North", 1, ["turn left"]), P("P2", V, "West", 1, ["follow lane", "vehicle cross"])]),
    "t02_stem_right_turn": abstract("TJunction", "FrontToSide", [
        P("P1", S, "North", 1, ["turn right"]), P("P2", V, "West", 1, ["vehicle cross"])], weather="Rainy"),
    "t03_turn_into_stem": abstract("TJunction", "FrontToSide", [
        P("P1", S, "East", 1, ["turn right"]), P("P2", V, "North", 1, ["turn left"])]),
    "t04_through_left_turn": abstract("TJunction", "FrontToSide", [
        P("P1", S, "West", 1, ["follow lane", "turn left"]), P("P2", V, "East", 1, ["vehicle cross"])],
        lighting="Dark"),
    "t05_through_rear_end": abstract("TJunction", "RearEnd", [
        P("P1", S, "East", 1, ["follow lane"]), P("P2", V, "East", 1, ["stop"])]),
    "t06_through_u_turn": abstract("TJunction", "FrontToSide", [
        P("P1", S, "West", 1, ["u-turn"]), P("P2", V, "East", 1, ["vehicle cross"])], weather="Cloudy"),
    "t07_left_turn_pedestrian": abstract("TJunction", "FrontToSide", [
        P("P1", S, "North", 1, ["turn left"]),
        P("P2", V, "North", 1, ["pedestrian cross"], kind="Pedestrian")]),
    "t08_through_lane_change": abstract("TJunction", "RearEnd", [
        P("P1", S, "East", 1, ["follow lane", "change lane"]), P("P2", V, "East", 2, ["follow lane"])]),
    "t09_through_hits_turner": abstract("TJunction", "FrontToSide", [
        P("P1", S, "West", 1, ["vehicle cross"]), P("P2", V, "North", 1, ["turn left"])], lighting="DarkLighted"),
    # straight roads
    "s01_stopped_vehicle": abstract("StraightRoad", "RearEnd", [
        P("P1", S, "East", 1, ["follow lane"]), P("P2", V, "East", 1, ["stop"])], mph=45),
    "s02_lane_change_rear_end": abstract("StraightRoad", "RearEnd", [
        P("P1", S, "East", 1, ["follow lane", "change lane"]), P("P2", V, "East", 2, ["follow lane"])]),
    "s03_wrong_way_head_on": abstract("StraightRoad", "Frontal", [
        P("P1", S, "East", 1, ["retrograde"]), P("P2", V, "West", 1, ["follow lane"])], lighting="Dark"),
    "s04_mid_block_u_turn": abstract("StraightRoad", "FrontToSide", [
        P("P1", S, "East", 1, ["u-turn"]), P("P2", V, "West", 1, ["follow lane"])]),
    "s05_entering_from_shoulder": abstract("StraightRoad", "RearEnd", [
        P("P1", S, "East", 2, ["drive into roads"]), P("P2", V, "East", 2, ["follow lane"])], weather="Rainy"),
    "s06_shoulder_pedestrian": abstract("StraightRoad", "RearEnd", [
        P("P1", S, "East", 2, ["follow lane", "drive off road"]),
        P("P2", V, "East", 1, ["pedestrian walk"], kind="Pedestrian")], lighting="Dark"),
    "s07_mid_block_pedestrian": abstract("StraightRoad", "FrontToSide", [
        P("P1", S, "East", 1, ["follow lane"]), P("P2", V, "North", 1, ["pedestrian cross"], kind="Pedestrian")]),
    "s08_braking_rear_end": abstract("StraightRoad", "RearEnd", [
        P("P1", S, "West", 2, ["follow lane"]), P("P2", V, "West", 2, ["follow lane", "stop"])], weather="Snowy"),
    "s09_sideswipe_right": abstract("StraightRoad", "RearEnd", [
        P("P1", S, "East", 2, ["change lane"]), P("P2", V, "East", 3, ["follow lane"])]),
    "s10_overtaking_head_on": abstract("StraightRoad", "Frontal", [
        P("P1", S, "West", 1, ["follow lane", "retrograde"]), P("P2", V, "East", 1, ["follow lane"])], mph=55),
    "s11_pedestrian_from_left": abstract("StraightRoad", "FrontToSide", [
        P("P1", S, "East", 1, ["follow lane"]), P("P2", V, "South", 1, ["pedestrian cross"], kind="Pedestrian")],
        weather="Cloudy"),
}

NEGATIVES = {
    # four travel directions cannot all be found on a three-leg junction
    "tjunction_four_directions": abstract("TJunction", "FrontToSide", [
        P("P1", S, "North", 1, ["vehicle cross"]), P("P2", V, "South", 1, ["follow lane"]),
        P("P3", V, "East", 1, ["follow lane"]), P("P4", V, "West", 1, ["follow lane"])]),
}


def write(path: Path, doc) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")


def main() -> int:
    write(DATA / "maps" / "fig3_intersection.json", fig3_map())
    write(DATA / "maps" / "sf_grid.json", grid_map())
    for name, doc in srr_maps().items():
        write(DATA / "maps" / f"{name}.json", doc)
    for name, doc in CORPUS.items():
        write(DATA / "corpus" / f"{name}.json", doc)
    for name, doc in NEGATIVES.items():
        write(DATA / "negative" / f"{name}.json", doc)
    return 0


if __name__ == "__main__":
    sys.exit(main())
