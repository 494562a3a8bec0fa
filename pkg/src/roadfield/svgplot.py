"""Self-contained SVG emission for fields, fronts, and check reports.

Heat maps embed a PNG raster (stdlib zlib, no image dependencies) with
the grid resampled at pixel centers, so graded grids render at their
true coordinates.  Contour overlays come from marching squares on the
grid cells.  A constant field degenerates to a single filled rectangle
instead of a raster.  Output is a pure function of the input arrays
and style, byte for byte.
"""

from __future__ import annotations

import base64
import struct
import zlib
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NonFiniteDataError

__all__ = ["SvgStyle", "field_svg", "front_svg", "report_svg", "emit_svg"]


@dataclass(frozen=True)
class SvgStyle:
    width: int = 720
    height: int = 480
    title: str = ""
    xlabel: str = "x"
    ylabel: str = "y"
    levels: tuple = ()
    vmin: float | None = None
    vmax: float | None = None

    def __post_init__(self):
        if self.width < 160 or self.height < 120:
            raise DomainError("figure smaller than 160x120 is unreadable")


# margins around the plot area, in pixels
_ML, _MR, _MT, _MB = 64, 20, 36, 48

# sampled anchors of a dark-to-light perceptual ramp
_CMAP = np.array([
    (68, 1, 84), (72, 40, 120), (62, 74, 137), (49, 104, 142),
    (38, 130, 142), (31, 158, 137), (53, 183, 121), (109, 205, 89),
    (180, 222, 44), (253, 231, 37),
], dtype=float)


def _colormap(t):
    """t in [0,1] (any shape) -> uint8 RGB via the anchor ramp."""
    t = np.clip(t, 0.0, 1.0) * (len(_CMAP) - 1)
    i = np.minimum(t.astype(int), len(_CMAP) - 2)
    frac = (t - i)[..., None]
    rgb = _CMAP[i] * (1.0 - frac) + _CMAP[i + 1] * frac
    return (rgb + 0.5).astype(np.uint8)


def _png(rgb):
    """Encode an (H, W, 3) uint8 array as PNG bytes."""

    def chunk(tag, data):
        body = tag + data
        return (struct.pack(">I", len(data)) + body
                + struct.pack(">I", zlib.crc32(body) & 0xFFFFFFFF))

    h, w, _ = rgb.shape
    ihdr = struct.pack(">IIBBBBB", w, h, 8, 2, 0, 0, 0)
    raw = b"".join(b"\x00" + rgb[j].tobytes() for j in range(h))
    return (b"\x89PNG\r\n\x1a\n" + chunk(b"IHDR", ihdr)
            + chunk(b"IDAT", zlib.compress(raw, 9)) + chunk(b"IEND", b""))


def _nice_ticks(lo, hi, target=6):
    span = hi - lo
    if span <= 0.0:
        return [lo]
    raw = span / target
    mag = 10.0 ** np.floor(np.log10(raw))
    for m in (1.0, 2.0, 5.0, 10.0):
        if m * mag >= raw:
            step = m * mag
            break
    first = np.ceil(lo / step) * step
    ticks = np.arange(first, hi + 0.5 * step, step)
    return [0.0 if abs(t) < 1e-12 * span else float(t) for t in ticks]


def _fmt(x):
    return f"{x:.2f}".rstrip("0").rstrip(".")


class _Frame:
    """Pixel transform and the axes/labels boilerplate."""

    def __init__(self, x0, x1, y0, y1, style):
        self.x0, self.x1, self.y0, self.y1 = x0, x1, y0, y1
        self.style = style
        self.pw = style.width - _ML - _MR
        self.ph = style.height - _MT - _MB

    def px(self, x):
        return _ML + (x - self.x0) / (self.x1 - self.x0) * self.pw

    def py(self, y):
        return _MT + (self.y1 - y) / (self.y1 - self.y0) * self.ph

    def open(self):
        s = self.style
        parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{s.width}" '
            f'height="{s.height}" viewBox="0 0 {s.width} {s.height}">',
            f'<rect width="{s.width}" height="{s.height}" fill="white"/>',
        ]
        if s.title:
            parts.append(
                f'<text x="{s.width / 2:.0f}" y="22" text-anchor="middle" '
                f'font-family="sans-serif" font-size="14">{_esc(s.title)}</text>'
            )
        return parts

    def axes(self):
        s = self.style
        parts = [
            f'<rect x="{_ML}" y="{_MT}" width="{self.pw}" height="{self.ph}" '
            'fill="none" stroke="black" stroke-width="1"/>'
        ]
        for t in _nice_ticks(self.x0, self.x1):
            if not (self.x0 - 1e-9 <= t <= self.x1 + 1e-9):
                continue
            p = self.px(t)
            parts.append(f'<line x1="{p:.2f}" y1="{_MT + self.ph}" '
                         f'x2="{p:.2f}" y2="{_MT + self.ph + 5}" '
                         'stroke="black" stroke-width="1"/>')
            parts.append(f'<text x="{p:.2f}" y="{_MT + self.ph + 18}" '
                         'text-anchor="middle" font-family="sans-serif" '
                         f'font-size="11">{_fmt(t)}</text>')
        for t in _nice_ticks(self.y0, self.y1):
            if not (self.y0 - 1e-9 <= t <= self.y1 + 1e-9):
                continue
            p = self.py(t)
            parts.append(f'<line x1="{_ML - 5}" y1="{p:.2f}" x2="{_ML}" '
                         f'y2="{p:.2f}" stroke="black" stroke-width="1"/>')
            parts.append(f'<text x="{_ML - 8}" y="{p + 4:.2f}" '
                         'text-anchor="end" font-family="sans-serif" '
                         f'font-size="11">{_fmt(t)}</text>')
        parts.append(f'<text x="{_ML + self.pw / 2:.0f}" '
                     f'y="{self.style.height - 10}" text-anchor="middle" '
                     f'font-family="sans-serif" font-size="12">'
                     f'{_esc(s.xlabel)}</text>')
        parts.append(f'<text x="16" y="{_MT + self.ph / 2:.0f}" '
                     'text-anchor="middle" font-family="sans-serif" '
                     f'font-size="12" transform="rotate(-90 16 '
                     f'{_MT + self.ph / 2:.0f})">{_esc(s.ylabel)}</text>')
        return parts


def _esc(text):
    return (str(text).replace("&", "&amp;").replace("<", "&lt;")
            .replace(">", "&gt;"))


def _check_finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise NonFiniteDataError("plot input contains non-finite values")


def _marching_squares(x_nodes, y_nodes, field, level):
    """Segment soup of the level curve, linear interpolation per edge.

    Returns an (n, 4) array of x1, y1, x2, y2 rows in row-major cell
    order, which keeps the output deterministic.
    """
    s = field - level
    segs = []

    def edge_point(xa, ya, va, xb, yb, vb):
        t = va / (va - vb)
        return xa + t * (xb - xa), ya + t * (yb - ya)

    ny, nx = field.shape
    for j in range(ny - 1):
        for i in range(nx - 1):
            corners = (
                (x_nodes[i], y_nodes[j], s[j, i]),
                (x_nodes[i + 1], y_nodes[j], s[j, i + 1]),
                (x_nodes[i + 1], y_nodes[j + 1], s[j + 1, i + 1]),
                (x_nodes[i], y_nodes[j + 1], s[j + 1, i]),
            )
            code = sum(1 << k for k in range(4) if corners[k][2] > 0.0)
            if code in (0, 15):
                continue
            pts = []
            for k in range(4):
                xa, ya, va = corners[k]
                xb, yb, vb = corners[(k + 1) % 4]
                if (va > 0.0) != (vb > 0.0):
                    pts.append(edge_point(xa, ya, va, xb, yb, vb))
            if len(pts) == 2:
                segs.append((*pts[0], *pts[1]))
            elif len(pts) == 4:
                # saddle: split by the cell-center sign
                center = 0.25 * (corners[0][2] + corners[1][2]
                                 + corners[2][2] + corners[3][2])
                if (center > 0.0) == (corners[0][2] > 0.0):
                    segs.append((*pts[0], *pts[3]))
                    segs.append((*pts[1], *pts[2]))
                else:
                    segs.append((*pts[0], *pts[1]))
                    segs.append((*pts[2], *pts[3]))
    return np.array(segs).reshape(-1, 4)


_CONTOUR_COLORS = ("white", "#ff5533", "#ffb000", "#33ddff")


def field_svg(x_nodes, y_nodes, field, style: SvgStyle | None = None) -> str:
    """Heat map of field (ny, nx) with optional level-curve overlays."""
    style = style or SvgStyle()
    x_nodes = np.asarray(x_nodes, dtype=float)
    y_nodes = np.asarray(y_nodes, dtype=float)
    field = np.asarray(field, dtype=float)
    _check_finite(x_nodes, y_nodes, field)
    if field.shape != (y_nodes.shape[0], x_nodes.shape[0]):
        raise DomainError(
            f"field shape {field.shape} does not match the axes "
            f"({y_nodes.shape[0]}, {x_nodes.shape[0]})"
        )
    fr = _Frame(float(x_nodes[0]), float(x_nodes[-1]),
                float(y_nodes[0]), float(y_nodes[-1]), style)
    parts = fr.open()

    vmin = float(field.min()) if style.vmin is None else style.vmin
    vmax = float(field.max()) if style.vmax is None else style.vmax
    if vmax - vmin <= 0.0:
        color = _colormap(np.array(0.5))
        parts.append(f'<rect x="{_ML}" y="{_MT}" width="{fr.pw}" '
                     f'height="{fr.ph}" fill="rgb({color[0]},{color[1]},'
                     f'{color[2]})"/>')
    else:
        # resample at pixel centers so graded grids land where they should
        pxc = fr.x0 + (np.arange(fr.pw) + 0.5) / fr.pw * (fr.x1 - fr.x0)
        pyc = fr.y1 - (np.arange(fr.ph) + 0.5) / fr.ph * (fr.y1 - fr.y0)
        ix = np.clip(np.searchsorted(0.5 * (x_nodes[:-1] + x_nodes[1:]), pxc),
                     0, x_nodes.shape[0] - 1)
        iy = np.clip(np.searchsorted(0.5 * (y_nodes[:-1] + y_nodes[1:]), pyc),
                     0, y_nodes.shape[0] - 1)
        t = (field[np.ix_(iy, ix)] - vmin) / (vmax - vmin)
        data = base64.b64encode(_png(_colormap(t))).decode("ascii")
        parts.append(f'<image x="{_ML}" y="{_MT}" width="{fr.pw}" '
                     f'height="{fr.ph}" preserveAspectRatio="none" '
                     f'href="data:image/png;base64,{data}"/>')

    for k, level in enumerate(style.levels):
        segs = _marching_squares(x_nodes, y_nodes, field, float(level))
        if segs.shape[0] == 0:
            continue
        d = " ".join(
            f"M {fr.px(a):.2f} {fr.py(b):.2f} L {fr.px(c):.2f} {fr.py(e):.2f}"
            for a, b, c, e in segs
        )
        color = _CONTOUR_COLORS[k % len(_CONTOUR_COLORS)]
        parts.append(f'<path d="{d}" fill="none" stroke="{color}" '
                     'stroke-width="1.5"/>')

    parts.extend(fr.axes())
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def front_svg(front_x, front_y, style: SvgStyle | None = None) -> str:
    """Polyline rendering of a traced free boundary, one path element."""
    style = style or SvgStyle()
    fx = np.asarray(front_x, dtype=float)
    fy = np.asarray(front_y, dtype=float)
    _check_finite(fx, fy)
    if fx.shape != fy.shape or fx.ndim != 1 or fx.shape[0] < 2:
        raise DomainError("front polyline needs matching 1D arrays, >= 2 points")
    pad_x = 0.05 * (fx.max() - fx.min() or 1.0)
    pad_y = 0.05 * (fy.max() - fy.min() or 1.0)
    fr = _Frame(float(fx.min() - pad_x), float(fx.max() + pad_x),
                float(fy.min() - pad_y), float(fy.max() + pad_y), style)
    parts = fr.open()
    d = "M " + " L ".join(f"{fr.px(a):.2f} {fr.py(b):.2f}"
                          for a, b in zip(fx, fy))
    parts.append(f'<path d="{d}" fill="none" stroke="#1161a8" '
                 'stroke-width="1.8"/>')
    parts.extend(fr.axes())
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def report_svg(reports, style: SvgStyle | None = None) -> str:
    """One row per check: a colored status dot, the name, and the note."""
    style = style or SvgStyle(title="verification checks")
    rows = list(reports)
    height = max(style.height, 60 + 24 * len(rows))
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{style.width}" '
        f'height="{height}" viewBox="0 0 {style.width} {height}">',
        f'<rect width="{style.width}" height="{height}" fill="white"/>',
    ]
    if style.title:
        parts.append(f'<text x="20" y="28" font-family="sans-serif" '
                     f'font-size="15">{_esc(style.title)}</text>')
    for k, rep in enumerate(rows):
        y = 56 + 24 * k
        color = "#2a9d3c" if rep.passed else "#d62828"
        word = "pass" if rep.passed else "FAIL"
        parts.append(f'<circle cx="28" cy="{y - 4}" r="6" fill="{color}"/>')
        parts.append(f'<text x="44" y="{y}" font-family="monospace" '
                     f'font-size="13">{word}  {_esc(rep.name)}'
                     f'{"  " + _esc(rep.note) if rep.note else ""}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def emit_svg(obj, style: SvgStyle | None = None) -> str:
    """Dispatch on the payload: (x, y, field) triple, Front, or reports."""
    if isinstance(obj, tuple) and len(obj) == 3:
        return field_svg(*obj, style=style)
    if hasattr(obj, "points"):
        return front_svg(obj.x, obj.y, style=style)
    if hasattr(obj, "__iter__"):
        return report_svg(obj, style=style)
    raise DomainError(f"no SVG rendering for {type(obj).__name__}")
