"""Static SVG charts: correlation heatmap and cumulative-return lines."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

from .backtest import BacktestResult, PortfolioTrack, cluster_label
from .market_data import DescriptiveStats

COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf")
BENCHMARK_COLOR = "#444444"
FONT = 'font-family="Helvetica, Arial, sans-serif"'

HEATMAP_FILE = "correlation_heatmap.svg"
CLUSTERS_FILE = "clusters_vs_benchmark.svg"
BEST_FILE = "best_cluster_vs_benchmark.svg"


def _heat_color(v: float) -> str:
    # diverging blue (-1) / white (0) / red (+1)
    v = max(-1.0, min(1.0, v))
    if v >= 0:
        r, g, b = 255, round(255 * (1 - v)), round(255 * (1 - v))
    else:
        r, g, b = round(255 * (1 + v)), round(255 * (1 + v)), 255
    return f"#{r:02x}{g:02x}{b:02x}"


def correlation_heatmap_svg(tickers: Sequence[str], corr: np.ndarray, title: str = "Correlation of log returns") -> str:
    n = len(tickers)
    cell = 48
    left, top = 80, 60
    width = left + n * cell + 20
    height = top + n * cell + 20
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="#ffffff"/>',
        f'<text x="{width / 2:.1f}" y="24" text-anchor="middle" font-size="16" {FONT}>{escape(title)}</text>',
    ]
    for j, t in enumerate(tickers):
        x = left + j * cell + cell / 2
        out.append(f'<text x="{x:.1f}" y="{top - 8}" text-anchor="middle" font-size="11" {FONT}>{escape(t)}</text>')
    for i, t in enumerate(tickers):
        y = top + i * cell
        out.append(
            f'<text x="{left - 6}" y="{y + cell / 2 + 4:.1f}" text-anchor="end" font-size="11" {FONT}>{escape(t)}</text>'
        )
        for j in range(n):
            v = float(corr[i][j])
            x = left + j * cell
            ink = "#ffffff" if abs(v) > 0.6 else "#000000"
            out.append(
                f'<rect class="cell" x="{x}" y="{y}" width="{cell}" height="{cell}" '
                f'fill="{_heat_color(v)}" stroke="#ffffff"/>'
            )
            out.append(
                f'<text x="{x + cell / 2:.1f}" y="{y + cell / 2 + 4:.1f}" text-anchor="middle" '
                f'font-size="11" fill="{ink}" {FONT}>{v:.2f}</text>'
            )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def line_chart_svg(tracks: Sequence[PortfolioTrack], title: str, colors: Sequence[str] | None = None) -> str:
    """One polyline per track of cumulative return (in percent) against trading-day index."""
    width, height = 900, 480
    left, right, top, bottom = 70, 170, 50, 60
    pw, ph = width - left - right, height - top - bottom
    colors = colors or [COLORS[i % len(COLORS)] for i in range(len(tracks))]

    lengths = [len(t.cumulative) for t in tracks]
    n = max(lengths)
    ys = np.concatenate([np.asarray(t.cumulative) * 100 for t in tracks])
    lo, hi = min(0.0, float(ys.min())), max(0.0, float(ys.max()))
    if hi - lo < 1e-9:
        hi = lo + 1.0
    pad = (hi - lo) * 0.05
    lo, hi = lo - pad, hi + pad

    def px(i: int) -> float:
        return left + (pw * i / (n - 1) if n > 1 else pw / 2)

    def py(v: float) -> float:
        return top + ph * (hi - v) / (hi - lo)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="#ffffff"/>',
        f'<text x="{left + pw / 2:.1f}" y="28" text-anchor="middle" font-size="16" {FONT}>{escape(title)}</text>',
    ]
    for k in range(6):
        v = lo + (hi - lo) * k / 5
        y = py(v)
        out.append(f'<line x1="{left}" y1="{y:.2f}" x2="{left + pw}" y2="{y:.2f}" stroke="#e0e0e0"/>')
        out.append(
            f'<text x="{left - 6}" y="{y + 4:.2f}" text-anchor="end" font-size="11" {FONT}>{v:.0f}%</text>'
        )
    out.append(f'<line x1="{left}" y1="{py(0):.2f}" x2="{left + pw}" y2="{py(0):.2f}" stroke="#999999"/>')
    out.append(f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}" stroke="#000000"/>')
    out.append(f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}" stroke="#000000"/>')

    dates = tracks[lengths.index(n)].dates
    for i in sorted({0, n // 2, n - 1}):
        out.append(
            f'<text x="{px(i):.2f}" y="{top + ph + 18}" text-anchor="middle" font-size="11" {FONT}>{dates[i]}</text>'
        )

    for idx, (track, color) in enumerate(zip(tracks, colors)):
        pts = " ".join(f"{px(i):.2f},{py(v * 100):.2f}" for i, v in enumerate(track.cumulative))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        ly = top + 16 + idx * 20
        lx = left + pw + 16
        out.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 22}" y2="{ly}" stroke="{color}" stroke-width="3"/>')
        out.append(
            f'<text x="{lx + 28}" y="{ly + 4}" font-size="12" {FONT}>{escape(track.label)}</text>'
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_charts(result: BacktestResult, stats: DescriptiveStats, out_dir: str | Path) -> list[Path]:
    out_dir = Path(out_dir)
    best = result.cluster_tracks[result.best_cluster]
    colors = [COLORS[j % len(COLORS)] for j in range(len(result.cluster_tracks))]
    docs = {
        HEATMAP_FILE: correlation_heatmap_svg(stats.tickers, stats.correlation),
        CLUSTERS_FILE: line_chart_svg(
            [*result.cluster_tracks, result.benchmark_track],
            "Cumulative returns: clusters vs benchmark",
            [*colors, BENCHMARK_COLOR],
        ),
        BEST_FILE: line_chart_svg(
            [best, result.benchmark_track],
            f"Cumulative returns: best cluster ({cluster_label(result.best_cluster)}) vs benchmark",
            [colors[result.best_cluster], BENCHMARK_COLOR],
        ),
    }
    paths = []
    for name, doc in docs.items():
        path = out_dir / name
        path.write_text(doc)
        paths.append(path)
    return paths
