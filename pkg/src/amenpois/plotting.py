"""Self-contained SVG charts of TV estimates and bound totals versus n."""

from __future__ import annotations

import math
from pathlib import Path

from amenpois.errors import DomainError

WIDTH, HEIGHT = 640, 400
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 70, 20, 30, 50
FLOOR = 1e-12


def _series(rows, key):
    pts = []
    for row in rows:
        y = row.get(key)
        if key == "bound":
            y = (y or {}).get("total") if isinstance(y, dict) else y
        if y is None:
            continue
        y = float(y)
        if math.isfinite(y):
            pts.append((row["n"], max(y, FLOOR)))
    return pts


def _scale(pts_all):
    xs = [x for x, _ in pts_all]
    ys = [y for _, y in pts_all]
    x_lo, x_hi = min(xs), max(xs)
    if x_lo == x_hi:
        x_lo, x_hi = x_lo - 1, x_hi + 1
    y_lo = math.floor(math.log10(min(ys)))
    y_hi = math.ceil(math.log10(max(ys)))
    if y_lo == y_hi:
        y_hi += 1

    def to_xy(x, y):
        px = MARGIN_L + (x - x_lo) / (x_hi - x_lo) * (WIDTH - MARGIN_L - MARGIN_R)
        ly = math.log10(y)
        py = HEIGHT - MARGIN_B - (ly - y_lo) / (y_hi - y_lo) * (HEIGHT - MARGIN_T - MARGIN_B)
        return px, py

    return to_xy, (x_lo, x_hi, y_lo, y_hi)


def _polyline(pts, to_xy, color):
    coords = " ".join(f"{to_xy(x, y)[0]:.2f},{to_xy(x, y)[1]:.2f}" for x, y in pts)
    line = f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{coords}" />'
    dots = "".join(
        f'<circle cx="{to_xy(x, y)[0]:.2f}" cy="{to_xy(x, y)[1]:.2f}" r="3" fill="{color}" />'
        for x, y in pts
    )
    return line + dots


def render_svg(result: dict) -> str:
    """Line chart (log-scaled y) of the TV column and, when present, the
    bound total, from a result-JSON dictionary."""
    rows = result.get("rows") or []
    if not rows:
        raise DomainError("cannot plot an empty result")
    tv_pts = _series(rows, "tv")
    bound_pts = _series(rows, "bound")
    if not tv_pts:
        raise DomainError("result has no finite TV values")
    to_xy, (x_lo, x_hi, y_lo, y_hi) = _scale(tv_pts + bound_pts)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f"<!-- config_hash={result.get('config_hash')} master_seed={result.get('master_seed')} -->",
        f'<metadata>config_hash={result.get("config_hash")} '
        f'master_seed={result.get("master_seed")}</metadata>',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white" />',
        # axes
        f'<line x1="{MARGIN_L}" y1="{HEIGHT - MARGIN_B}" x2="{WIDTH - MARGIN_R}" '
        f'y2="{HEIGHT - MARGIN_B}" stroke="black" />',
        f'<line x1="{MARGIN_L}" y1="{MARGIN_T}" x2="{MARGIN_L}" '
        f'y2="{HEIGHT - MARGIN_B}" stroke="black" />',
        f'<text x="{WIDTH // 2}" y="{HEIGHT - 12}" text-anchor="middle" '
        f'font-size="13">window index n</text>',
        f'<text x="18" y="{HEIGHT // 2}" text-anchor="middle" font-size="13" '
        f'transform="rotate(-90 18 {HEIGHT // 2})">total variation (log scale)</text>',
    ]
    for exp in range(y_lo, y_hi + 1):
        _, py = to_xy(x_lo, 10.0**exp)
        parts.append(
            f'<text x="{MARGIN_L - 8}" y="{py + 4:.2f}" text-anchor="end" font-size="11">'
            f"1e{exp}</text>"
        )
    for x, _ in tv_pts:
        px, _ = to_xy(x, 10.0**y_lo)
        parts.append(
            f'<text x="{px:.2f}" y="{HEIGHT - MARGIN_B + 16}" text-anchor="middle" '
            f'font-size="11">{x}</text>'
        )
    parts.append(_polyline(tv_pts, to_xy, "#1f77b4"))
    parts.append(
        f'<text x="{WIDTH - MARGIN_R - 10}" y="{MARGIN_T + 12}" text-anchor="end" '
        f'font-size="12" fill="#1f77b4">TV estimate</text>'
    )
    if bound_pts:
        parts.append(_polyline(bound_pts, to_xy, "#d62728"))
        parts.append(
            f'<text x="{WIDTH - MARGIN_R - 10}" y="{MARGIN_T + 28}" text-anchor="end" '
            f'font-size="12" fill="#d62728">bound total</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts)


def plot(result: dict, out_path) -> Path:
    """Write the SVG chart for a result dictionary (see runner.result_json)."""
    svg = render_svg(result)
    out = Path(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(svg, encoding="utf-8")
    return out
