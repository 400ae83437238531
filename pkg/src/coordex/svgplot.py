"""Minimal deterministic SVG line plots.

No plotting dependency: curves are written directly as SVG text. Data
curves are <polyline> elements (one per series, in input order);
uncertainty bands are filled <path> elements; axes, ticks and the frame
use <line> and <text> only. Coordinates are formatted %.2f so identical
input yields identical bytes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f")

_MARGIN_L, _MARGIN_R, _MARGIN_T, _MARGIN_B = 62.0, 16.0, 30.0, 46.0


@dataclass
class Series:
    """One curve; band (if given) is a symmetric half-width around y."""

    label: str
    x: np.ndarray
    y: np.ndarray
    band: np.ndarray | None = None

    def validate(self) -> "Series":
        self.x = np.asarray(self.x, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.float64)
        if self.x.ndim != 1 or self.x.shape != self.y.shape:
            raise ValueError(f"series {self.label!r}: x and y must be equal-length 1-d arrays")
        if self.x.shape[0] == 0:
            raise ValueError(f"series {self.label!r} is empty")
        if self.band is not None:
            self.band = np.asarray(self.band, dtype=np.float64)
            if self.band.shape != self.y.shape:
                raise ValueError(f"series {self.label!r}: band must match y")
        return self


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _ticks(lo: float, hi: float, n: int = 5) -> np.ndarray:
    return np.linspace(lo, hi, n)


def render_svg(
    series_list: list[Series],
    title: str = "",
    xlabel: str = "episode",
    ylabel: str = "reward (moving avg)",
    width: int = 900,
    height: int = 520,
) -> str:
    """Render the series to an SVG document string."""
    if not series_list:
        raise ValueError("nothing to plot: no series")
    series_list = [s.validate() for s in series_list]

    x_lo = min(float(s.x.min()) for s in series_list)
    x_hi = max(float(s.x.max()) for s in series_list)
    y_lo = min(float((s.y - (s.band if s.band is not None else 0.0)).min()) for s in series_list)
    y_hi = max(float((s.y + (s.band if s.band is not None else 0.0)).max()) for s in series_list)
    x_span = (x_hi - x_lo) or 1.0
    pad = 0.05 * ((y_hi - y_lo) or 1.0)
    y_lo, y_hi = y_lo - pad, y_hi + pad
    y_span = y_hi - y_lo

    plot_w = width - _MARGIN_L - _MARGIN_R
    plot_h = height - _MARGIN_T - _MARGIN_B

    def sx(x):
        return _MARGIN_L + (x - x_lo) / x_span * plot_w

    def sy(y):
        return _MARGIN_T + plot_h - (y - y_lo) / y_span * plot_h

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
    ]
    if title:
        out.append(
            f'<text x="{_fmt(width / 2)}" y="18" text-anchor="middle" font-size="14">{_escape(title)}</text>'
        )

    # frame
    x0, y0 = _fmt(_MARGIN_L), _fmt(_MARGIN_T + plot_h)
    x1, y1t = _fmt(_MARGIN_L + plot_w), _fmt(_MARGIN_T)
    out.append(f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>')
    out.append(f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1t}" stroke="black"/>')

    for tv in _ticks(x_lo, x_hi):
        px = _fmt(sx(tv))
        out.append(f'<line x1="{px}" y1="{y0}" x2="{px}" y2="{_fmt(_MARGIN_T + plot_h + 5)}" stroke="black"/>')
        out.append(
            f'<text x="{px}" y="{_fmt(_MARGIN_T + plot_h + 20)}" text-anchor="middle" font-size="11">{tv:.3g}</text>'
        )
    for tv in _ticks(y_lo, y_hi):
        py = _fmt(sy(tv))
        out.append(f'<line x1="{_fmt(_MARGIN_L - 5)}" y1="{py}" x2="{x0}" y2="{py}" stroke="black"/>')
        out.append(
            f'<text x="{_fmt(_MARGIN_L - 9)}" y="{_fmt(sy(tv) + 4)}" text-anchor="end" font-size="11">{tv:.3g}</text>'
        )
    out.append(
        f'<text x="{_fmt(_MARGIN_L + plot_w / 2)}" y="{_fmt(height - 8)}" text-anchor="middle" '
        f'font-size="12">{_escape(xlabel)}</text>'
    )
    out.append(
        f'<text x="14" y="{_fmt(_MARGIN_T + plot_h / 2)}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 14 {_fmt(_MARGIN_T + plot_h / 2)})">{_escape(ylabel)}</text>'
    )

    # bands first so curves draw on top
    for i, s in enumerate(series_list):
        if s.band is None:
            continue
        color = PALETTE[i % len(PALETTE)]
        top = [f"{_fmt(sx(x))},{_fmt(sy(y + b))}" for x, y, b in zip(s.x, s.y, s.band)]
        bot = [f"{_fmt(sx(x))},{_fmt(sy(y - b))}" for x, y, b in zip(s.x[::-1], s.y[::-1], s.band[::-1])]
        out.append(
            f'<path d="M {top[0]} L ' + " L ".join(top[1:] + bot) + f' Z" fill="{color}" '
            'fill-opacity="0.15" stroke="none"/>'
        )
    for i, s in enumerate(series_list):
        color = PALETTE[i % len(PALETTE)]
        pts = " ".join(f"{_fmt(sx(x))},{_fmt(sy(y))}" for x, y in zip(s.x, s.y))
        out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')

    # legend
    for i, s in enumerate(series_list):
        color = PALETTE[i % len(PALETTE)]
        ly = _MARGIN_T + 8 + 16 * i
        out.append(f'<rect x="{_fmt(_MARGIN_L + 8)}" y="{_fmt(ly - 8)}" width="14" height="8" fill="{color}"/>')
        out.append(
            f'<text x="{_fmt(_MARGIN_L + 26)}" y="{_fmt(ly)}" font-size="11">{_escape(s.label)}</text>'
        )

    out.append("</svg>")
    return "\n".join(out) + "\n"


def _escape(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def write_svg(path: str, series_list: list[Series], **kwargs) -> None:
    text = render_svg(series_list, **kwargs)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def series_from_runs(runs: list[dict], max_points: int = 1200) -> list[Series]:
    """Group metrics by config_id into mean +- std reward_ma curves.

    Runs sharing a config_id must share the episode axis; the band is the
    population std across seeds (absent for a single seed). Series come out
    sorted by config_id; curves are strided down to at most max_points.
    """
    if not runs:
        raise ValueError("nothing to plot: no metrics")
    by_config: dict[str, list[dict]] = {}
    for r in runs:
        by_config.setdefault(r["config_id"], []).append(r)
    series = []
    for config_id in sorted(by_config):
        group = sorted(by_config[config_id], key=lambda r: r["seed"])
        episode = group[0]["episode"]
        for r in group[1:]:
            if not np.array_equal(r["episode"], episode):
                raise ValueError(f"runs for {config_id!r} disagree on the episode axis")
        stack = np.stack([r["reward_ma"] for r in group])
        mean = stack.mean(axis=0)
        band = stack.std(axis=0) if len(group) > 1 else None
        stride = max(1, episode.shape[0] // max_points)
        series.append(Series(
            label=config_id,
            x=episode[::stride].astype(np.float64),
            y=mean[::stride],
            band=None if band is None else band[::stride],
        ))
    return series
