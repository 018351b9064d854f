"""Standalone SVG rendering of a recorded engagement.

Two panels: a top-down east/north ground track and an altitude-over-time
profile.  Red and blue traces are separate ``<polyline>`` elements (one per
craft per panel, omitted for single-point trajectories); episode starts are
circle markers and the outcome is annotated as text.
"""

from __future__ import annotations

from dataclasses import dataclass

PANEL_W = 420.0
PANEL_H = 420.0
MARGIN = 56.0
GAP = 60.0

RED = "#c0392b"
BLUE = "#2e6da4"


@dataclass(frozen=True)
class _Axis:
    lo: float
    hi: float
    px0: float
    px1: float

    def map(self, v: float) -> float:
        span = self.hi - self.lo
        if span == 0.0:
            return (self.px0 + self.px1) / 2.0
        return self.px0 + (v - self.lo) / span * (self.px1 - self.px0)


def _bounds(values, pad_frac: float = 0.06):
    lo, hi = min(values), max(values)
    pad = (hi - lo) * pad_frac or 1.0
    return lo - pad, hi + pad


def _polyline(points, color: str, css: str) -> str:
    pts = " ".join(f"{x:.2f},{y:.2f}" for x, y in points)
    return (
        f'<polyline class="{css}" fill="none" stroke="{color}" '
        f'stroke-width="1.6" points="{pts}"/>'
    )


def _panel_frame(x0: float, title: str, xlabel: str, ylabel: str,
                 xaxis: _Axis, yaxis: _Axis) -> list[str]:
    top, bottom = MARGIN, MARGIN + PANEL_H
    parts = [
        f'<rect x="{x0:.1f}" y="{top:.1f}" width="{PANEL_W:.1f}" '
        f'height="{PANEL_H:.1f}" fill="none" stroke="#444" stroke-width="1"/>',
        f'<text x="{x0 + PANEL_W / 2:.1f}" y="{top - 14:.1f}" '
        f'text-anchor="middle" font-size="14">{title}</text>',
        f'<text x="{x0 + PANEL_W / 2:.1f}" y="{bottom + 34:.1f}" '
        f'text-anchor="middle" font-size="11">{xlabel}</text>',
        f'<text x="{x0 - 42:.1f}" y="{top + PANEL_H / 2:.1f}" font-size="11" '
        f'text-anchor="middle" '
        f'transform="rotate(-90 {x0 - 42:.1f} {top + PANEL_H / 2:.1f})">{ylabel}</text>',
    ]
    for frac in (0.0, 1.0):
        xv = xaxis.lo + frac * (xaxis.hi - xaxis.lo)
        yv = yaxis.lo + frac * (yaxis.hi - yaxis.lo)
        parts.append(
            f'<text x="{xaxis.map(xv):.1f}" y="{bottom + 16:.1f}" '
            f'text-anchor="middle" font-size="10">{xv:.0f}</text>'
        )
        parts.append(
            f'<text x="{x0 - 6:.1f}" y="{yaxis.map(yv) + 3:.1f}" '
            f'text-anchor="end" font-size="10">{yv:.0f}</text>'
        )
    return parts


def render_episode_svg(rows: list[dict], outcome: str = "") -> str:
    """Render parsed trajectory CSV rows (see persist.CSV_COLUMNS) to SVG text."""
    width = 2 * MARGIN + 2 * PANEL_W + GAP
    height = 2 * MARGIN + PANEL_H + 20
    x_all = [r["x_r"] for r in rows] + [r["x_b"] for r in rows]
    y_all = [r["y_r"] for r in rows] + [r["y_b"] for r in rows]
    t_all = [r["t_s"] for r in rows]
    z_all = [r["z_r"] for r in rows] + [r["z_b"] for r in rows]

    # Top-down panel: east on the horizontal axis, north up.
    gx0 = MARGIN
    gx = _Axis(*_bounds(x_all), gx0, gx0 + PANEL_W)
    gy = _Axis(*_bounds(y_all), MARGIN + PANEL_H, MARGIN)
    # Altitude panel.
    ax0 = MARGIN + PANEL_W + GAP
    at = _Axis(*_bounds(t_all), ax0, ax0 + PANEL_W)
    az = _Axis(*_bounds(z_all), MARGIN + PANEL_H, MARGIN)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0f}" '
        f'height="{height:.0f}" viewBox="0 0 {width:.0f} {height:.0f}">',
        f'<rect width="{width:.0f}" height="{height:.0f}" fill="white"/>',
    ]
    parts += _panel_frame(gx0, "ground track", "east x [m]", "north y [m]", gx, gy)
    parts += _panel_frame(ax0, "altitude profile", "time [s]", "altitude z [m]", at, az)

    for side, color in (("r", RED), ("b", BLUE)):
        ground = [(gx.map(r[f"x_{side}"]), gy.map(r[f"y_{side}"])) for r in rows]
        alt = [(at.map(r["t_s"]), az.map(r[f"z_{side}"])) for r in rows]
        if len(rows) > 1:
            parts.append(_polyline(ground, color, f"trace trace-{side} trace-ground"))
            parts.append(_polyline(alt, color, f"trace trace-{side} trace-alt"))
        parts.append(
            f'<circle class="start start-{side}" cx="{ground[0][0]:.2f}" '
            f'cy="{ground[0][1]:.2f}" r="4" fill="{color}"/>'
        )
        parts.append(
            f'<circle class="start start-{side}" cx="{alt[0][0]:.2f}" '
            f'cy="{alt[0][1]:.2f}" r="4" fill="{color}"/>'
        )
    label = f"outcome: {outcome}" if outcome else "outcome: unknown"
    parts.append(
        f'<text class="outcome" x="{width / 2:.1f}" y="{MARGIN - 34:.1f}" '
        f'text-anchor="middle" font-size="15">{label}</text>'
    )
    legend_y = MARGIN - 34
    parts.append(
        f'<text x="{MARGIN:.1f}" y="{legend_y:.1f}" font-size="12" '
        f'fill="{RED}">red</text>'
    )
    parts.append(
        f'<text x="{MARGIN + 36:.1f}" y="{legend_y:.1f}" font-size="12" '
        f'fill="{BLUE}">blue</text>'
    )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
