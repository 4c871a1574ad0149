"""Dependency-free SVG figures: correlation heatmaps, ROC curves, replicability panel."""
from xml.sax.saxutils import escape

import numpy as np

from .exceptions import DimensionError
from .io import atomic_write

__all__ = ["diverging_color", "heatmap_svg", "render_heatmap", "roc_svg", "render_roc",
           "venn_panel_svg", "render_venn_panel"]

NEGATIVE = (33, 102, 172)
NEUTRAL = (255, 255, 255)
POSITIVE = (178, 24, 43)
MAX_HEATMAP_CELLS = 300
_PALETTE = ("#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e")


def diverging_color(v):
    """Hex colour for ``v`` on a fixed [-1, 1] blue-white-red scale."""
    if not np.isfinite(v):
        return "#808080"
    v = min(1.0, max(-1.0, float(v)))
    end = POSITIVE if v >= 0 else NEGATIVE
    t = abs(v)
    rgb = [round(a + (b - a) * t) for a, b in zip(NEUTRAL, end)]
    return "#{:02x}{:02x}{:02x}".format(*rgb)


def _downsample(M, cap):
    d = M.shape[0]
    if d <= cap:
        return M
    edges = np.linspace(0, d, cap + 1).round().astype(int)
    out = np.empty((cap, cap))
    for i in range(cap):
        for j in range(cap):
            out[i, j] = M[edges[i]:edges[i + 1], edges[j]:edges[j + 1]].mean()
    return out


def heatmap_svg(matrix, permutation=None, title="", cell=None, max_cells=MAX_HEATMAP_CELLS):
    """SVG text for a square matrix, optionally reindexed by ``permutation``.

    Matrices larger than ``max_cells`` are block-averaged down to that size.
    """
    M = np.asarray(matrix, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] < 2:
        raise DimensionError(f"heatmap needs a square matrix of size >= 2, got {M.shape}")
    if permutation is not None:
        perm = np.asarray(permutation, dtype=int)
        if sorted(perm.tolist()) != list(range(M.shape[0])):
            raise DimensionError("permutation must reorder 0..p-1")
        M = M[np.ix_(perm, perm)]
    M = _downsample(M, max_cells)
    d = M.shape[0]
    cell = cell or max(1, 600 // d)
    top = 30 if title else 0
    size = d * cell
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size + top}" '
             f'viewBox="0 0 {size} {size + top}">']
    if title:
        parts.append(f'<text x="4" y="20" font-family="sans-serif" font-size="14">'
                     f'{escape(title)}</text>')
    parts.append(f'<g transform="translate(0,{top})" shape-rendering="crispEdges">')
    for i in range(d):
        for j in range(d):
            parts.append(f'<rect x="{j * cell}" y="{i * cell}" width="{cell}" height="{cell}" '
                         f'fill="{diverging_color(M[i, j])}"/>')
    parts.append("</g></svg>\n")
    return "\n".join(parts)


def render_heatmap(matrix, path, permutation=None, title="", max_cells=MAX_HEATMAP_CELLS):
    atomic_write(path, heatmap_svg(matrix, permutation, title, max_cells=max_cells))


def roc_svg(curves, title="ROC"):
    """ROC polylines for ``{name: (fpr, tpr)}`` with axis ticks every 0.1."""
    W, H, pad = 420, 420, 50
    span = W - 2 * pad

    def xy(f, t):
        return pad + f * span, H - pad - t * span

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
             f'viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="10">',
             f'<text x="{pad}" y="20" font-size="14">{escape(title)}</text>',
             f'<rect x="{pad}" y="{pad}" width="{span}" height="{span}" fill="none" '
             f'stroke="black"/>']
    for k in range(11):
        v = k / 10
        x, y = xy(v, v)
        parts.append(f'<line x1="{x:.1f}" y1="{H - pad}" x2="{x:.1f}" y2="{H - pad + 5}" '
                     f'stroke="black"/>')
        parts.append(f'<text x="{x:.1f}" y="{H - pad + 16}" text-anchor="middle">{v:.1f}</text>')
        parts.append(f'<line x1="{pad - 5}" y1="{y:.1f}" x2="{pad}" y2="{y:.1f}" stroke="black"/>')
        parts.append(f'<text x="{pad - 8}" y="{y + 3:.1f}" text-anchor="end">{v:.1f}</text>')
    parts.append(f'<text x="{W / 2}" y="{H - 12}" text-anchor="middle">false positive rate</text>')
    parts.append(f'<text x="14" y="{H / 2}" text-anchor="middle" '
                 f'transform="rotate(-90 14 {H / 2})">true positive rate</text>')
    x0, y0 = xy(0, 0)
    x1, y1 = xy(1, 1)
    parts.append(f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y1}" stroke="#bbbbbb" '
                 f'stroke-dasharray="4 3"/>')
    for c, (name, (fpr, tpr)) in enumerate(curves.items()):
        color = _PALETTE[c % len(_PALETTE)]
        pts = " ".join("{:.2f},{:.2f}".format(*xy(f, t)) for f, t in zip(fpr, tpr))
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="2"/>')
        ly = pad + 16 + 14 * c
        parts.append(f'<line x1="{W - pad - 90}" y1="{ly}" x2="{W - pad - 70}" y2="{ly}" '
                     f'stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{W - pad - 65}" y="{ly + 3}">{escape(name)}</text>')
    parts.append("</svg>\n")
    return "\n".join(parts)


def render_roc(curves, path, title="ROC"):
    atomic_write(path, roc_svg(curves, title))


def venn_panel_svg(summary, title="Replicated true positives"):
    """Three-column count panel: only arm 1, both arms, only arm 2, one row per method.

    ``summary`` maps method name to the dict produced by the replicability harness.
    """
    cols = (("only_arm1", "only arm 1"), ("intersection", "both arms"),
            ("only_arm2", "only arm 2"))
    cw, rh, left, top = 130, 46, 110, 60
    W = left + cw * 3 + 20
    H = top + rh * len(summary) + 20
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
             f'viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">',
             f'<text x="10" y="20" font-size="14">{escape(title)}</text>']
    for k, (_, label) in enumerate(cols):
        parts.append(f'<text x="{left + cw * k + cw / 2}" y="{top - 10}" '
                     f'text-anchor="middle">{label}</text>')
    for r, (method, s) in enumerate(summary.items()):
        y = top + rh * r
        parts.append(f'<text x="10" y="{y + rh / 2 + 4}">{escape(method)}</text>')
        for k, (key, _) in enumerate(cols):
            x = left + cw * k
            share = s["proportions"][key]
            fill = diverging_color(share if key == "intersection" else -share)
            parts.append(f'<rect x="{x}" y="{y}" width="{cw - 4}" height="{rh - 4}" '
                         f'fill="{fill}" stroke="black"/>')
            parts.append(f'<text x="{x + (cw - 4) / 2}" y="{y + rh / 2 + 2}" '
                         f'text-anchor="middle">{s[key]:.1f} ({100 * share:.1f}%)</text>')
    parts.append("</svg>\n")
    return "\n".join(parts)


def render_venn_panel(summary, path, title="Replicated true positives"):
    atomic_write(path, venn_panel_svg(summary, title))
