"""SVG overlay of a reference path and an executed episode."""
from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np


def overlay_svg(log, traj, size: int = 600, margin: float = 0.3) -> str:
    """Reference (red, dotted), executed path (blue), start/goal markers and
    one yellow ``update-marker`` circle per granted active update."""
    ref = traj.waypoints
    pos = log.positions()
    pts = np.vstack([ref, pos]) if len(pos) else ref
    lo = pts.min(axis=0) - margin
    span = max(float(np.max(pts.max(axis=0) + margin - lo)), 1e-6)
    scale = size / span

    def xy(p):
        return (p[0] - lo[0]) * scale, size - (p[1] - lo[1]) * scale

    def poly(points):
        return " ".join(f"{x:.2f},{y:.2f}" for x, y in map(xy, points))

    title = escape(f"{log.method} on {log.task} (seed {log.seed}, updates {log.updates_used}/{log.budget})")
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">',
        f"<title>{title}</title>",
        '<rect width="100%" height="100%" fill="white"/>',
        f'<polyline class="reference" points="{poly(ref)}" fill="none" stroke="red" stroke-width="2" stroke-dasharray="4,4"/>',
    ]
    if len(pos):
        out.append(f'<polyline class="executed" points="{poly(pos)}" fill="none" stroke="blue" stroke-width="2"/>')
    for cls, p, color in (("start", ref[0], "green"), ("goal", ref[-1], "purple")):
        x, y = xy(p)
        out.append(f'<circle class="{cls}" cx="{x:.2f}" cy="{y:.2f}" r="7" fill="{color}"/>')
    for r in log.records:
        if r["granted"]:
            x, y = xy((r["x"], r["y"]))
            out.append(f'<circle class="update-marker" cx="{x:.2f}" cy="{y:.2f}" r="5" fill="yellow" stroke="black"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_overlay(log, traj, path) -> None:
    with open(path, "w") as fh:
        fh.write(overlay_svg(log, traj))
