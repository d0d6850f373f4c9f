"""Minimal deterministic SVG line charts (no plotting library needed)."""
import math
from xml.sax.saxutils import escape

from .csvio import CsvFormatError, read_csv

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd")
WIDTH, PANEL_H = 720, 240
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 70, 20, 30, 45

KINDS = {
    # kind: (accepted csv schemas, x column, panels of (title, [columns]))
    "training": (("training", "training_legs"), None, None),
    "trajectory": (("trajectory",), "t", [("Position (m)", ["x", "y", "z"]),
                                          ("Position error (m)", ["pe"])]),
    "gains": (("gains", "trajectory"), "t", [("PID gains", ["kp", "ki", "kd"])]),
}

TRAINING_PANELS = [
    ("Effective speed (m/s)", "effective_speed", "mean_leg_effective_speed"),
    ("Settling time (s)", "settling_time_s", "settling_time_s"),
    ("Overshoot (m)", "overshoot_m", "overshoot_m"),
]


def _num(v):
    return f"{v:.6g}"


def _ticks(lo, hi, n=5):
    if hi == lo:
        return [lo]
    return [lo + (hi - lo) * i / (n - 1) for i in range(n)]


def _panel(out, top, title, xlabel, xs, series):
    """Append one panel's SVG elements; ``series`` is [(name, ys)]."""
    x0, x1 = MARGIN_L, WIDTH - MARGIN_R
    y0, y1 = top + PANEL_H - MARGIN_B, top + MARGIN_T
    finite = [(x, y) for _, ys in series for x, y in zip(xs, ys) if y is not None and math.isfinite(y)]
    if finite:
        xmin, xmax = min(p[0] for p in finite), max(p[0] for p in finite)
        ymin, ymax = min(p[1] for p in finite), max(p[1] for p in finite)
    else:
        xmin, xmax, ymin, ymax = 0.0, 1.0, 0.0, 1.0
    if xmax == xmin:
        xmax = xmin + 1.0
    if ymax == ymin:
        ymin, ymax = ymin - 0.5, ymax + 0.5

    def sx(x):
        return x0 + (x - xmin) / (xmax - xmin) * (x1 - x0)

    def sy(y):
        return y0 - (y - ymin) / (ymax - ymin) * (y0 - y1)

    out.append(f'<text x="{WIDTH / 2}" y="{top + 18}" text-anchor="middle" font-size="14">{escape(title)}</text>')
    out.append(f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>')
    out.append(f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>')
    for t in _ticks(xmin, xmax):
        out.append(f'<text x="{_num(sx(t))}" y="{y0 + 16}" text-anchor="middle" font-size="10">{_num(t)}</text>')
    for t in _ticks(ymin, ymax):
        out.append(f'<text x="{x0 - 6}" y="{_num(sy(t) + 3)}" text-anchor="end" font-size="10">{_num(t)}</text>')
    out.append(f'<text x="{WIDTH / 2}" y="{y0 + 34}" text-anchor="middle" font-size="11">{escape(xlabel)}</text>')

    for i, (name, ys) in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        # break the line at missing values
        runs, cur = [], []
        for x, y in zip(xs, ys):
            if y is None or not math.isfinite(y):
                if cur:
                    runs.append(cur)
                cur = []
            else:
                cur.append(f"{_num(sx(x))},{_num(sy(y))}")
        if cur:
            runs.append(cur)
        for r in runs:
            if len(r) == 1:
                cx, cy = r[0].split(",")
                out.append(f'<circle cx="{cx}" cy="{cy}" r="2" fill="{color}"/>')
            else:
                out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{" ".join(r)}"/>')
        lx = x1 - 110
        ly = y1 + 4 + 14 * i
        out.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 18}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{lx + 22}" y="{ly + 4}" font-size="11">{escape(name)}</text>')


def render(panels, xlabel):
    """``panels`` is [(title, xs, [(name, ys)])]; returns SVG text."""
    height = PANEL_H * len(panels)
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" '
           f'viewBox="0 0 {WIDTH} {height}">',
           f'<rect width="{WIDTH}" height="{height}" fill="white"/>']
    for i, (title, xs, series) in enumerate(panels):
        _panel(out, i * PANEL_H, title, xlabel, xs, series)
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _column(header, rows, name):
    i = header.index(name)
    return [r[i] for r in rows]


def plot_csv(path, kind):
    """Build the SVG for a CSV of the given plot ``kind``."""
    if kind not in KINDS:
        raise CsvFormatError(f"unknown plot kind {kind!r}")
    schema, header, rows = read_csv(path)
    accepted, xcol, panels = KINDS[kind]
    if schema not in accepted:
        raise CsvFormatError(f"{path}: a {kind} plot needs one of {accepted}, got {schema}")
    if not rows:
        raise CsvFormatError(f"{path}: no data rows")
    for lineno, r in enumerate(rows, start=3):
        if any(v is None for v in r[:1]):
            raise CsvFormatError(f"{path}: row {lineno} has an empty first column")

    if kind == "training":
        xs = _column(header, rows, "timestep")
        out = []
        for title, leg_col, iter_col in TRAINING_PANELS:
            col = leg_col if schema == "training_legs" else iter_col
            out.append((title, xs, [(col, _column(header, rows, col))]))
        return render(out, "Training timestep")

    xs = _column(header, rows, xcol)
    built = [(title, xs, [(c, _column(header, rows, c)) for c in cols]) for title, cols in panels]
    return render(built, "Time (s)")
