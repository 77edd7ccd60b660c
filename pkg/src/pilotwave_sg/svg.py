"""Static SVG diagrams of trajectories through one device.

Output is hand-written markup with coordinates rounded to three decimals,
so identical input always yields identical bytes.
"""
from __future__ import annotations

from collections.abc import Sequence

from .trajectory import Branch, TrajectoryRecord
from .wavefield import DeviceConfig

WIDTH, HEIGHT, MARGIN = 800, 400, 20
COLORS = {Branch.UPPER: "#1f77b4", Branch.LOWER: "#d62728"}
CRITICAL_COLOR = "#2ca02c"


class _Frame:
    """Maps (y, z) to canvas pixels with z pointing up."""

    def __init__(self, y_min, y_max, z_min, z_max):
        self.y_min, self.z_max = y_min, z_max
        self.sy = (WIDTH - 2 * MARGIN) / (y_max - y_min)
        self.sz = (HEIGHT - 2 * MARGIN) / (z_max - z_min)

    def point(self, y, z) -> str:
        px = MARGIN + (y - self.y_min) * self.sy
        pz = MARGIN + (self.z_max - z) * self.sz
        return f"{px:.3f},{pz:.3f}"

    def line(self, y0, z0, y1, z1, style) -> str:
        a, b = self.point(y0, z0).split(","), self.point(y1, z1).split(",")
        return f'<line x1="{a[0]}" y1="{a[1]}" x2="{b[0]}" y2="{b[1]}" {style}/>'


def emit_svg(
    records: Sequence[TrajectoryRecord],
    device: DeviceConfig,
    span: tuple[float, float],
    critical: TrajectoryRecord | None = None,
) -> str:
    """Beam envelopes, the overlap triangle and one polyline per trajectory.

    ``critical`` is drawn last, in its own colour and heavier.  An empty
    ``records`` still produces the geometry.
    """
    y_min, y_max = span
    half, r = 0.5 * device.w, device.edge_slope
    reach = half + r * y_max
    frame = _Frame(y_min, y_max, -1.05 * reach, 1.05 * reach)
    edge = 'stroke="#555555" stroke-width="1"'

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>',
    ]
    apex = frame.point(device.delta_y, 0.0)
    out.append(
        f'<polygon points="{frame.point(0.0, -half)} {frame.point(0.0, half)} {apex}" '
        'fill="#fff2cc" stroke="none"/>'
    )
    for z in (-half, half):
        out.append(frame.line(y_min, z, 0.0, z, edge))
        for sign in (1.0, -1.0):
            out.append(frame.line(0.0, z, y_max, z + sign * r * y_max, edge))
    out.append(frame.line(0.0, -reach, 0.0, reach, 'stroke="#999999" stroke-width="1" stroke-dasharray="4 4"'))

    def polyline(rec: TrajectoryRecord, color: str, width: float) -> str:
        pts = " ".join(frame.point(y, z) for _, y, z in rec.path)
        return f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="{width}"/>'

    for rec in records:
        out.append(polyline(rec, COLORS[rec.exit_branch], 1.0))
    if critical is not None:
        out.append(polyline(critical, CRITICAL_COLOR, 2.5))
    out.append("</svg>")
    return "\n".join(out) + "\n"
