"""Minimal SVG line plots, written directly.

Just enough for a mean curve with a shaded confidence band per
convention: lines, polygons, and text. No plotting dependency, and the
output bytes depend only on the input points.
"""

WIDTH = 640
HEIGHT = 420
MARGIN_LEFT = 64
MARGIN_RIGHT = 24
MARGIN_TOP = 48
MARGIN_BOTTOM = 56

SERIES_COLORS = {"with": "#2166ac", "without": "#b2182b"}
SERIES_LABELS = {
    "with": "background slices removed",
    "without": "all slices",
}


def _fmt(value):
    return f"{value:.1f}"


class _Frame:
    def __init__(self, x_max):
        self.x_max = x_max
        self.plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT
        self.plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM

    def x(self, k):
        # x axis runs 1..x_max
        frac = (k - 1) / (self.x_max - 1) if self.x_max > 1 else 0.5
        return MARGIN_LEFT + frac * self.plot_w

    def y(self, dice):
        return MARGIN_TOP + (1.0 - dice) * self.plot_h


def curve_svg(title, series_by_convention):
    """Render curves to an SVG string.

    series_by_convention maps "with"/"without" to CurvePoint lists.
    """
    x_max = max(len(pts) for pts in series_by_convention.values())
    frame = _Frame(x_max)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" '
        f'height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH // 2}" y="28" text-anchor="middle" '
        f'font-family="sans-serif" font-size="16">{title}</text>',
    ]

    axis = 'stroke="#333" stroke-width="1"'
    x0, y0 = frame.x(1), frame.y(0.0)
    x1, y1 = frame.x(x_max), frame.y(1.0)
    parts.append(f'<line x1="{_fmt(x0)}" y1="{_fmt(y0)}" x2="{_fmt(x1)}" '
                 f'y2="{_fmt(y0)}" {axis}/>')
    parts.append(f'<line x1="{_fmt(x0)}" y1="{_fmt(y0)}" x2="{_fmt(x0)}" '
                 f'y2="{_fmt(y1)}" {axis}/>')

    for k in range(1, x_max + 1):
        xk = frame.x(k)
        parts.append(f'<line x1="{_fmt(xk)}" y1="{_fmt(y0)}" x2="{_fmt(xk)}" '
                     f'y2="{_fmt(y0 + 5)}" {axis}/>')
        parts.append(f'<text x="{_fmt(xk)}" y="{_fmt(y0 + 20)}" '
                     f'text-anchor="middle" font-family="sans-serif" '
                     f'font-size="12">{k}</text>')
    for tick in (0.0, 0.2, 0.4, 0.6, 0.8, 1.0):
        yt = frame.y(tick)
        parts.append(f'<line x1="{_fmt(x0 - 5)}" y1="{_fmt(yt)}" '
                     f'x2="{_fmt(x0)}" y2="{_fmt(yt)}" {axis}/>')
        parts.append(f'<text x="{_fmt(x0 - 9)}" y="{_fmt(yt + 4)}" '
                     f'text-anchor="end" font-family="sans-serif" '
                     f'font-size="12">{tick:.1f}</text>')

    parts.append(f'<text x="{WIDTH // 2}" y="{HEIGHT - 14}" '
                 f'text-anchor="middle" font-family="sans-serif" '
                 f'font-size="13">annotated slices</text>')
    parts.append(f'<text x="18" y="{HEIGHT // 2}" text-anchor="middle" '
                 f'font-family="sans-serif" font-size="13" '
                 f'transform="rotate(-90 18 {HEIGHT // 2})">dice</text>')

    legend_y = MARGIN_TOP + 8
    for convention, points in sorted(series_by_convention.items()):
        color = SERIES_COLORS.get(convention, "#444")
        band = []
        for p in points:
            band.append(f"{_fmt(frame.x(p.annotated_slices))},"
                        f"{_fmt(frame.y(min(1.0, p.ci_high)))}")
        for p in reversed(points):
            band.append(f"{_fmt(frame.x(p.annotated_slices))},"
                        f"{_fmt(frame.y(max(0.0, p.ci_low)))}")
        parts.append(f'<polygon points="{" ".join(band)}" fill="{color}" '
                     f'fill-opacity="0.18" stroke="none"/>')
        line = " ".join(
            f"{_fmt(frame.x(p.annotated_slices))},{_fmt(frame.y(p.mean))}"
            for p in points)
        parts.append(f'<polyline points="{line}" fill="none" '
                     f'stroke="{color}" stroke-width="2"/>')
        for p in points:
            parts.append(f'<circle cx="{_fmt(frame.x(p.annotated_slices))}" '
                         f'cy="{_fmt(frame.y(p.mean))}" r="2.5" '
                         f'fill="{color}"/>')
        label = SERIES_LABELS.get(convention, convention)
        parts.append(f'<line x1="{MARGIN_LEFT + 12}" y1="{legend_y}" '
                     f'x2="{MARGIN_LEFT + 40}" y2="{legend_y}" '
                     f'stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{MARGIN_LEFT + 46}" y="{legend_y + 4}" '
                     f'font-family="sans-serif" font-size="12">{label}</text>')
        legend_y += 18

    parts.append("</svg>")
    return "\n".join(parts) + "\n"
