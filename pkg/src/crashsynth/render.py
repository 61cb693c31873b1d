"""SVG rendering of a reconstructed scenario: lanes, junction, collision area, trajectories."""
from __future__ import annotations

import xml.etree.ElementTree as ET

SVG_NS = "http://www.w3.org/2000/svg"
PALETTE = ("#1f5fbf", "#2e9e44", "#c77c02", "#8a2be2", "#444444")
MARGIN_M = 8.0


def _points(poly, flip) -> str:
    return " ".join(f"{x:.3f},{flip(y):.3f}" for x, y in poly)


def render_svg(scenario, *, scale: float = 6.0) -> str:
    """Return the scenario drawn as a standalone SVG document.

    Each action becomes one ``polyline``; waypoints are labelled with their
    participant and index, e.g. ``P1 s3``.
    """
    site = scenario.site
    lane_polys = [lane.rect() for road in site.approach_roads for lane in road.lanes]
    traj_pts = [w.pos for plan in scenario.plans.values() for t in plan.trajectories for w in t.waypoints]
    everything = [p for poly in lane_polys for p in poly] + traj_pts + list(scenario.collision_area.polygon)
    xs = [p[0] for p in everything]
    ys = [p[1] for p in everything]
    x0, y0 = min(xs) - MARGIN_M, min(ys) - MARGIN_M
    x1, y1 = max(xs) + MARGIN_M, max(ys) + MARGIN_M
    flip = lambda y: y0 + y1 - y  # noqa: E731  (SVG y grows downwards)

    ET.register_namespace("", SVG_NS)
    svg = ET.Element(f"{{{SVG_NS}}}svg", {
        "width": f"{(x1 - x0) * scale:.0f}", "height": f"{(y1 - y0) * scale:.0f}",
        "viewBox": f"{x0:.3f} {y0:.3f} {x1 - x0:.3f} {y1 - y0:.3f}",
    })
    ET.SubElement(svg, f"{{{SVG_NS}}}title").text = f"site {site.id}"
    lanes = ET.SubElement(svg, f"{{{SVG_NS}}}g", {"id": "lanes"})
    for road in site.approach_roads:
        for lane in road.lanes:
            ET.SubElement(lanes, f"{{{SVG_NS}}}polygon", {
                "points": _points(lane.rect(), flip), "fill": "#d9d9d9", "stroke": "#ffffff",
                "stroke-width": "0.15", "data-lane": lane.id})
    if site.junction_polygon:
        ET.SubElement(svg, f"{{{SVG_NS}}}polygon", {
            "id": "junction", "points": _points(site.junction_polygon, flip), "fill": "#cfcfcf"})
    ET.SubElement(svg, f"{{{SVG_NS}}}polygon", {
        "id": "collision-area", "points": _points(scenario.collision_area.polygon, flip),
        "fill": "#e02020", "fill-opacity": "0.3", "stroke": "#e02020", "stroke-width": "0.2"})
    paths = ET.SubElement(svg, f"{{{SVG_NS}}}g", {"id": "trajectories"})
    for n, (pid, plan) in enumerate(scenario.plans.items()):
        colour = PALETTE[n % len(PALETTE)]
        index = 0
        for k, traj in enumerate(plan.trajectories):
            pts = [w.pos for w in traj.waypoints]
            ET.SubElement(paths, f"{{{SVG_NS}}}polyline", {
                "points": _points(pts, flip), "fill": "none", "stroke": colour, "stroke-width": "0.35",
                "data-participant": pid, "data-action": traj.action.value, "data-index": str(k)})
            for i, (x, y) in enumerate(pts):
                if k > 0 and i == 0:
                    continue  # shared with the previous action's last waypoint
                ET.SubElement(paths, f"{{{SVG_NS}}}circle", {
                    "cx": f"{x:.3f}", "cy": f"{flip(y):.3f}", "r": "0.4", "fill": colour})
                label = ET.SubElement(paths, f"{{{SVG_NS}}}text", {
                    "x": f"{x + 0.6:.3f}", "y": f"{flip(y) - 0.6:.3f}", "font-size": "1.2", "fill": colour})
                label.text = f"{pid} s{index}"
                index += 1
    return ET.tostring(svg, encoding="unicode", xml_declaration=False) + "\n"

