"""Minimal SVG charts written by hand, so the package needs no plotting library."""
from __future__ import annotations

from xml.sax.saxutils import escape

W, H = 640, 400
ML, MR, MT, MB = 70, 150, 40, 55
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")


def _fmt(v: float) -> str:
    return f"{v:.2f}".rstrip("0").rstrip(".") if abs(v) < 1e4 else f"{v:.3g}"


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    step = (hi - lo) / (n - 1)
    return [lo + i * step for i in range(n)]


class _Canvas:
    def __init__(self, title: str, xlabel: str, ylabel: str, xlim, ylim):
        self.x0, self.x1 = xlim
        self.y0, self.y1 = ylim
        if self.x1 <= self.x0:
            self.x1 = self.x0 + 1.0
        if self.y1 <= self.y0:
            self.y1 = self.y0 + 1.0
        self.parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
            f'viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">',
            f'<rect width="{W}" height="{H}" fill="white"/>',
            f'<text x="{(ML + W - MR) / 2:.1f}" y="22" text-anchor="middle" font-size="14">'
            f'{escape(title)}</text>',
            f'<text x="{(ML + W - MR) / 2:.1f}" y="{H - 12}" text-anchor="middle">{escape(xlabel)}</text>',
            f'<text x="16" y="{(MT + H - MB) / 2:.1f}" text-anchor="middle" '
            f'transform="rotate(-90 16 {(MT + H - MB) / 2:.1f})">{escape(ylabel)}</text>',
        ]
        self._axes()

    def sx(self, x: float) -> float:
        return ML + (x - self.x0) / (self.x1 - self.x0) * (W - ML - MR)

    def sy(self, y: float) -> float:
        return H - MB - (y - self.y0) / (self.y1 - self.y0) * (H - MT - MB)

    def _axes(self):
        p = self.parts
        p.append(f'<line x1="{ML}" y1="{H - MB}" x2="{W - MR}" y2="{H - MB}" stroke="black"/>')
        p.append(f'<line x1="{ML}" y1="{MT}" x2="{ML}" y2="{H - MB}" stroke="black"/>')
        for t in _ticks(self.y0, self.y1):
            y = self.sy(t)
            p.append(f'<line x1="{ML - 4}" y1="{y:.1f}" x2="{W - MR}" y2="{y:.1f}" stroke="#ddd"/>')
            p.append(f'<text x="{ML - 7}" y="{y + 4:.1f}" text-anchor="end">{_fmt(t)}</text>')

    def xtick(self, x: float, label: str):
        sx = self.sx(x)
        self.parts.append(f'<line x1="{sx:.1f}" y1="{H - MB}" x2="{sx:.1f}" y2="{H - MB + 4}" stroke="black"/>')
        self.parts.append(f'<text x="{sx:.1f}" y="{H - MB + 18}" text-anchor="middle">{escape(label)}</text>')

    def legend(self, i: int, name: str, color: str):
        y = MT + 10 + 20 * i
        x = W - MR + 15
        self.parts.append(f'<rect x="{x}" y="{y - 9}" width="14" height="10" fill="{color}"/>')
        self.parts.append(f'<text x="{x + 20}" y="{y}">{escape(name)}</text>')

    def render(self) -> str:
        return "\n".join(self.parts + ["</svg>"]) + "\n"


def line_chart(series: dict[str, list[tuple[float, float | None]]], title: str,
               xlabel: str, ylabel: str) -> str:
    """One polyline per series; ``None`` values break the line (no feasible point)."""
    xs = sorted({x for pts in series.values() for x, _ in pts})
    ys = [y for pts in series.values() for _, y in pts if y is not None]
    ylim = (0.0, max(ys) * 1.1 if ys else 1.0)
    xlim = (min(xs), max(xs)) if xs else (0.0, 1.0)
    if xlim[0] == xlim[1]:
        xlim = (xlim[0] - 0.5, xlim[1] + 0.5)
    c = _Canvas(title, xlabel, ylabel, xlim, ylim)
    for x in xs:
        c.xtick(x, _fmt(x))
    for i, (name, pts) in enumerate(series.items()):
        color = PALETTE[i % len(PALETTE)]
        c.legend(i, name, color)
        run: list[str] = []
        for x, y in sorted(pts) + [(None, None)]:
            if y is None:
                if len(run) > 1:
                    c.parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="2" '
                                   f'points="{" ".join(run)}"/>')
                run = []
                continue
            run.append(f"{c.sx(x):.1f},{c.sy(y):.1f}")
            c.parts.append(f'<circle cx="{c.sx(x):.1f}" cy="{c.sy(y):.1f}" r="3" fill="{color}"/>')
    return c.render()


def stacked_bars(categories: list[float], stacks: dict[str, list[float]], title: str,
                 xlabel: str, ylabel: str) -> str:
    n = len(categories)
    c = _Canvas(title, xlabel, ylabel, (-0.5, n - 0.5), (0.0, 1.0))
    bw = 0.6 * (W - ML - MR) / max(n, 1)
    base = [0.0] * n
    for i, (name, vals) in enumerate(stacks.items()):
        color = PALETTE[i % len(PALETTE)]
        c.legend(i, name, color)
        for k, v in enumerate(vals):
            top, bot = c.sy(base[k] + v), c.sy(base[k])
            c.parts.append(f'<rect x="{c.sx(k) - bw / 2:.1f}" y="{top:.1f}" width="{bw:.1f}" '
                           f'height="{max(bot - top, 0.0):.1f}" fill="{color}"/>')
            base[k] += v
    for k, cat in enumerate(categories):
        c.xtick(k, _fmt(cat))
    return c.render()
