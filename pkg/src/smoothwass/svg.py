"""Minimal static SVG plots: log-log lines with error bars, scatters, curves."""

from __future__ import annotations

from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

W, H = 480, 360
LEFT, RIGHT, TOP, BOTTOM = 60, 20, 30, 50
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


class _Axes:
    def __init__(self, xs, ys, logx=False, logy=False):
        self.logx, self.logy = logx, logy
        x = self._tx(np.asarray(xs, dtype=float))
        y = self._ty(np.asarray(ys, dtype=float))
        self.x0, self.x1 = _padded(x)
        self.y0, self.y1 = _padded(y)

    def _tx(self, x):
        return np.log10(x) if self.logx else x

    def _ty(self, y):
        return np.log10(y) if self.logy else y

    def px(self, x):
        t = (self._tx(np.asarray(x, dtype=float)) - self.x0) / (self.x1 - self.x0)
        return LEFT + t * (W - LEFT - RIGHT)

    def py(self, y):
        t = (self._ty(np.asarray(y, dtype=float)) - self.y0) / (self.y1 - self.y0)
        return H - BOTTOM - t * (H - TOP - BOTTOM)


def _padded(v):
    v = v[np.isfinite(v)]
    lo, hi = (float(v.min()), float(v.max())) if v.size else (0.0, 1.0)
    if hi == lo:
        lo, hi = lo - 0.5, hi + 0.5
    pad = 0.05 * (hi - lo)
    return lo - pad, hi + pad


def _fmt(v):
    return f"{v:.2f}"


def _frame(ax: _Axes, title, xlabel, ylabel):
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
        f'<rect width="{W}" height="{H}" fill="white"/>',
        f'<rect x="{LEFT}" y="{TOP}" width="{W - LEFT - RIGHT}" height="{H - TOP - BOTTOM}" '
        'fill="none" stroke="black"/>',
        f'<text x="{W / 2}" y="{TOP - 10}" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<text x="{W / 2}" y="{H - 10}" text-anchor="middle" font-size="12">{escape(xlabel)}</text>',
        f'<text x="15" y="{H / 2}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 15 {H / 2})">{escape(ylabel)}</text>',
    ]
    for lo, hi, log, horizontal in ((ax.x0, ax.x1, ax.logx, True), (ax.y0, ax.y1, ax.logy, False)):
        for k in range(5):
            v = lo + (hi - lo) * (k + 0.5) / 5
            label = f"{10 ** v:.3g}" if log else f"{v:.3g}"
            if horizontal:
                p = LEFT + (v - lo) / (hi - lo) * (W - LEFT - RIGHT)
                parts.append(f'<text x="{_fmt(p)}" y="{H - BOTTOM + 15}" text-anchor="middle" font-size="10">{label}</text>')
            else:
                p = H - BOTTOM - (v - lo) / (hi - lo) * (H - TOP - BOTTOM)
                parts.append(f'<text x="{LEFT - 5}" y="{_fmt(p + 3)}" text-anchor="end" font-size="10">{label}</text>')
    return parts


def _legend(parts, labels):
    for i, label in enumerate(labels):
        y = TOP + 15 + 14 * i
        c = COLORS[i % len(COLORS)]
        parts.append(f'<rect x="{W - RIGHT - 110}" y="{y - 8}" width="10" height="10" fill="{c}"/>')
        parts.append(f'<text x="{W - RIGHT - 95}" y="{y + 1}" font-size="10">{escape(str(label))}</text>')


def _save(path, parts):
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n", encoding="utf-8")
    return Path(path)


def loglog_plot(path, series, title="", xlabel="n", ylabel="mean SWD"):
    """``series`` is a list of (label, xs, ys, errs); error bars span ys +- errs."""
    xs = np.concatenate([np.asarray(s[1], dtype=float) for s in series])
    ys = np.concatenate([np.asarray(s[2], dtype=float) for s in series])
    ax = _Axes(xs, ys[ys > 0], logx=True, logy=True)
    parts = _frame(ax, title, xlabel, ylabel)
    for i, (_, x, y, err) in enumerate(series):
        c = COLORS[i % len(COLORS)]
        px, py = ax.px(x), ax.py(y)
        pts = " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in zip(px, py))
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{c}"/>')
        for xv, yv, ev, a, b in zip(x, y, err, px, py):
            lo = ax.py(max(yv - ev, yv * 1e-3))
            hi = ax.py(yv + ev)
            parts.append(f'<line x1="{_fmt(a)}" y1="{_fmt(lo)}" x2="{_fmt(a)}" y2="{_fmt(hi)}" stroke="{c}"/>')
            parts.append(f'<circle cx="{_fmt(a)}" cy="{_fmt(b)}" r="2.5" fill="{c}"/>')
    _legend(parts, [s[0] for s in series])
    return _save(path, parts)


def scatter_plot(path, clouds, title="", xlabel="", ylabel=""):
    """``clouds`` is a list of (label, xs, ys)."""
    xs = np.concatenate([np.asarray(c[1], dtype=float) for c in clouds])
    ys = np.concatenate([np.asarray(c[2], dtype=float) for c in clouds])
    ax = _Axes(xs, ys)
    parts = _frame(ax, title, xlabel, ylabel)
    for i, (_, x, y) in enumerate(clouds):
        c = COLORS[i % len(COLORS)]
        for a, b in zip(ax.px(x), ax.py(y)):
            parts.append(f'<circle cx="{_fmt(a)}" cy="{_fmt(b)}" r="2" fill="{c}" fill-opacity="0.6"/>')
    _legend(parts, [c[0] for c in clouds])
    return _save(path, parts)


def curve_plot(path, curves, title="", xlabel="", ylabel="density"):
    """``curves`` is a list of (label, xs, ys) drawn as polylines."""
    xs = np.concatenate([np.asarray(c[1], dtype=float) for c in curves])
    ys = np.concatenate([np.asarray(c[2], dtype=float) for c in curves])
    ax = _Axes(xs, ys)
    parts = _frame(ax, title, xlabel, ylabel)
    for i, (_, x, y) in enumerate(curves):
        c = COLORS[i % len(COLORS)]
        pts = " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in zip(ax.px(x), ax.py(y)))
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{c}"/>')
    _legend(parts, [c[0] for c in curves])
    return _save(path, parts)

