"""SVG rendering of disc-model configurations.

Edges are drawn as hyperbolic geodesics: straight chords through the centre,
circular arcs orthogonal to the unit circle otherwise.  The boundary circle
element carries the pixel centre/radius, so emitted coordinates can be mapped
back to disc coordinates exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .clusters import components_of_config
from .sampling import Configuration

# chords this close to a diameter are drawn straight: the orthogonal circle
# through them is numerically enormous
_COLLINEAR_TOL = 1e-9


@dataclass
class RenderSpec:
    point_radius_px: float = 2.5
    edge_stroke: str = "#2f6f8f"
    edge_width_px: float = 0.8
    disc_size_px: int = 640
    highlight_largest: bool = False
    highlight_color: str = "#c03020"
    point_color: str = "#202020"

    def __post_init__(self):
        if self.disc_size_px <= 0:
            raise ValueError("disc size must be positive")


def geodesic_arc(p: np.ndarray, q: np.ndarray) -> tuple[np.ndarray, float] | None:
    """Centre and radius of the circle through p, q orthogonal to the unit
    circle, or None when the geodesic is a diameter (straight segment).

    Orthogonality: |c|^2 = r^2 + 1."""
    cross = p[0] * q[1] - p[1] * q[0]
    if abs(cross) < _COLLINEAR_TOL:
        return None
    b = np.array([(1.0 + float(p @ p)) / 2.0, (1.0 + float(q @ q)) / 2.0])
    A = np.array([[p[0], p[1]], [q[0], q[1]]])
    c = np.linalg.solve(A, b)
    r = math.sqrt(float(c @ c) - 1.0)
    return c, r


def render_svg(config: Configuration, spec: RenderSpec | None = None) -> str:
    """Render a 2-d configuration to an SVG 1.1 document string."""
    spec = spec or RenderSpec()
    if config.dim != 2:
        raise ValueError("rendering is implemented for d=2 only")
    size = spec.disc_size_px
    half = size / 2.0
    scale = half - 4.0

    def px(p) -> tuple[float, float]:
        return half + p[0] * scale, half - p[1] * scale

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{size}" height="{size}" viewBox="0 0 {size} {size}">',
        f'  <circle id="boundary" cx="{half:.10f}" cy="{half:.10f}" r="{scale:.10f}" '
        'fill="none" stroke="#000000" stroke-width="1"/>',
    ]

    pts = config.points
    if pts.shape[0]:
        highlight = np.zeros(pts.shape[0], dtype=bool)
        if spec.highlight_largest and pts.shape[0] > 1:
            labels = components_of_config(config)
            _, counts = np.unique(labels, return_counts=True)
            biggest = np.unique(labels)[np.argmax(counts)]
            highlight = labels == biggest

        if config.edges.size:
            out.append(f'  <g id="edges" fill="none" stroke="{spec.edge_stroke}" '
                       f'stroke-width="{spec.edge_width_px}">')
            for i, j in config.edges:
                out.append("    " + _edge_path(pts[i], pts[j], px, scale))
            out.append("  </g>")

        out.append(f'  <g id="points">')
        for k in range(pts.shape[0]):
            x, y = px(pts[k])
            colour = spec.highlight_color if highlight[k] else spec.point_color
            out.append(f'    <circle cx="{x:.10f}" cy="{y:.10f}" '
                       f'r="{spec.point_radius_px}" fill="{colour}"/>')
        out.append("  </g>")

    out.append("</svg>")
    return "\n".join(out) + "\n"


def _edge_path(p: np.ndarray, q: np.ndarray, px, scale: float) -> str:
    x1, y1 = px(p)
    x2, y2 = px(q)
    arc = geodesic_arc(p, q)
    if arc is None:
        return f'<path d="M {x1:.10f} {y1:.10f} L {x2:.10f} {y2:.10f}"/>'
    c, r = arc
    # minor arc; svg sweep=1 walks clockwise in maths orientation (y is
    # flipped on screen), which is the short way when cross((p-c),(q-c)) < 0
    cross = (p[0] - c[0]) * (q[1] - c[1]) - (p[1] - c[1]) * (q[0] - c[0])
    sweep = 0 if cross > 0 else 1
    r_px = r * scale
    return (f'<path d="M {x1:.10f} {y1:.10f} '
            f'A {r_px:.10f} {r_px:.10f} 0 0 {sweep} {x2:.10f} {y2:.10f}"/>')


def render_to_file(config: Configuration, path: str, spec: RenderSpec | None = None) -> None:
    with open(path, "w") as fh:
        fh.write(render_svg(config, spec))
