"""SVG drawing of grasp rectangles.

Edges along the angle direction (length w, the plates' travel) are thin red
lines; the plate edges closing off either end of w are thicker blue lines.
"""
from __future__ import annotations

from typing import Optional, Sequence
from xml.sax.saxutils import escape

from .geometry import OrientedRect, vertices

PLATE_STYLE = 'stroke="#1f4fd1" stroke-width="3"'
SIDE_STYLE = 'stroke="#d62728" stroke-width="1.5"'


def _line(p, q, style):
    return f'<line x1="{p[0]:.3f}" y1="{p[1]:.3f}" x2="{q[0]:.3f}" y2="{q[1]:.3f}" {style}/>'


def rect_elements(rect: OrientedRect, label: Optional[str] = None) -> list[str]:
    v = vertices(rect)
    out = [
        _line(v[0], v[1], SIDE_STYLE),
        _line(v[1], v[2], PLATE_STYLE),
        _line(v[2], v[3], SIDE_STYLE),
        _line(v[3], v[0], PLATE_STYLE),
        f'<circle cx="{rect.x:.3f}" cy="{rect.y:.3f}" r="2" fill="#2ca02c"/>',
    ]
    if label:
        out.append(f'<text x="{rect.x + 4:.3f}" y="{rect.y - 4:.3f}" font-size="10">{escape(label)}</text>')
    return out


def render_svg(rects: Sequence[OrientedRect], size=(320, 320), labels: Optional[Sequence[str]] = None,
               title: Optional[str] = None) -> str:
    w, h = size
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">',
        f'<rect x="0" y="0" width="{w}" height="{h}" fill="white" stroke="#999999"/>',
    ]
    if title:
        parts.append(f"<title>{escape(title)}</title>")
    for i, r in enumerate(rects):
        parts.extend(rect_elements(r, labels[i] if labels else None))
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
