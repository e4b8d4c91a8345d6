"""Minimal deterministic SVG charts (no timestamps, fixed number formatting)."""
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf")


def _scale(values, lo, hi):
    values = np.asarray(values, dtype=float)
    vmin, vmax = float(values.min()), float(values.max())
    span = vmax - vmin or 1.0
    return lo + (values - vmin) / span * (hi - lo)


def scatter_svg(points, labels=None, title="", width=480, height=480):
    """Scatter of the first two columns of ``points`` coloured by label.

    A third column, when present, sets marker radius so depth stays visible.
    """
    points = np.asarray(points, dtype=float)
    if points.ndim != 2 or points.shape[1] < 1:
        raise ValueError("points must be (N, K)")
    if points.shape[1] == 1:
        points = np.column_stack([points[:, 0], np.zeros(len(points))])
    labels = list(labels) if labels is not None else [0] * len(points)
    classes = sorted(set(labels), key=str)
    color = {c: PALETTE[i % len(PALETTE)] for i, c in enumerate(classes)}
    pad = 40
    xs = _scale(points[:, 0], pad, width - pad)
    ys = _scale(-points[:, 1], pad, height - pad)
    rs = _scale(points[:, 2], 2.5, 6.0) if points.shape[1] > 2 else np.full(len(points), 4.0)
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<text x="{width / 2:.1f}" y="{height - 8}" text-anchor="middle" font-size="12">k1</text>',
        f'<text x="12" y="{height / 2:.1f}" font-size="12">k2</text>',
    ]
    for x, y, r, l in zip(xs, ys, rs, labels):
        out.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="{r:.2f}" fill="{color[l]}" fill-opacity="0.75"/>')
    for i, c in enumerate(classes):
        y = 40 + 16 * i
        out.append(f'<circle cx="{width - 90}" cy="{y}" r="4" fill="{color[c]}"/>')
        out.append(f'<text x="{width - 80}" y="{y + 4}" font-size="11">{escape(str(c))}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def line_svg(x, series, title="", width=480, height=360):
    """Polyline chart; ``series`` maps a name to y values (optionally with errors).

    Values may be ``ys`` or ``(ys, errs)``.
    """
    x = np.asarray(x, dtype=float)
    pad = 40
    all_y = []
    for v in series.values():
        ys, errs = (v if isinstance(v, tuple) else (v, None))
        ys = np.asarray(ys, dtype=float)
        errs = np.zeros_like(ys) if errs is None else np.asarray(errs, dtype=float)
        all_y.extend([ys - errs, ys + errs])
    all_y = np.concatenate(all_y)
    ylo, yhi = float(all_y.min()), float(all_y.max())
    yspan = yhi - ylo or 1.0
    px = _scale(x, pad, width - pad)

    def py(v):
        return height - pad - (np.asarray(v) - ylo) / yspan * (height - 2 * pad)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>',
    ]
    for i, (name, v) in enumerate(series.items()):
        ys, errs = (v if isinstance(v, tuple) else (v, None))
        col = PALETTE[i % len(PALETTE)]
        pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(px, py(ys)))
        out.append(f'<polyline points="{pts}" fill="none" stroke="{col}" stroke-width="1.5"/>')
        if errs is not None:
            for a, yv, e in zip(px, ys, errs):
                out.append(f'<line x1="{a:.2f}" x2="{a:.2f}" y1="{py(yv - e):.2f}" y2="{py(yv + e):.2f}" stroke="{col}"/>')
        out.append(f'<text x="{pad + 4}" y="{36 + 14 * i}" font-size="11" fill="{col}">{escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
