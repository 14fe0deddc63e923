"""SVG figures: lattice paths with shaded self-touchings, and the phase diagram.

Output is plain text built with ``xml.etree`` so it is deterministic and diff-able.
"""

from __future__ import annotations

import xml.etree.ElementTree as ET

from .lattice import LatticePath, StretchConfig, stretches_to_path

UNIT = 14
PAD = 10
TOUCH_COLOR = "#c8c8c8"
PATH_COLOR = "#1f3b73"
GRID_COLOR = "#eeeeee"


def _num(x: float) -> str:
    return f"{x:.6g}"


def self_touching_pairs(path: LatticePath) -> list[tuple[tuple[int, int], tuple[int, int]]]:
    """Vertex pairs ``(i, j)`` with ``j > i + 1`` at lattice distance one."""
    index = {v: i for i, v in enumerate(path.vertices)}
    pairs = []
    for i, (x, y) in enumerate(path.vertices):
        for nb in ((x + 1, y), (x, y + 1)):
            j = index.get(nb)
            if j is not None and abs(i - j) > 1:
                pairs.append(((x, y), nb))
    return pairs


def _panel(parent, path: LatticePath, x0: float, y0: float, title: str | None):
    xs = [v[0] for v in path.vertices]
    ys = [v[1] for v in path.vertices]
    xmin, xmax, ymin, ymax = min(xs), max(xs), min(ys), max(ys)
    w = (xmax - xmin) * UNIT + 2 * PAD
    h = (ymax - ymin) * UNIT + 2 * PAD + (16 if title else 0)
    g = ET.SubElement(parent, "g", transform=f"translate({_num(x0)},{_num(y0)})")
    top = 16 if title else 0
    if title:
        ET.SubElement(g, "text", x=_num(PAD), y="12", attrib={"font-size": "11", "font-family": "sans-serif"}).text = title

    def px(v):
        return PAD + (v[0] - xmin) * UNIT, top + PAD + (ymax - v[1]) * UNIT

    grid = ET.SubElement(g, "g", stroke=GRID_COLOR, attrib={"stroke-width": "0.5"})
    for x in range(xmin, xmax + 1):
        a, b = px((x, ymin)), px((x, ymax))
        ET.SubElement(grid, "line", x1=_num(a[0]), y1=_num(a[1]), x2=_num(b[0]), y2=_num(b[1]))
    for y in range(ymin, ymax + 1):
        a, b = px((xmin, y)), px((xmax, y))
        ET.SubElement(grid, "line", x1=_num(a[0]), y1=_num(a[1]), x2=_num(b[0]), y2=_num(b[1]))
    touch = ET.SubElement(g, "g", stroke=TOUCH_COLOR, attrib={"stroke-width": str(UNIT // 2), "class": "touchings"})
    for a, b in self_touching_pairs(path):
        pa, pb = px(a), px(b)
        ET.SubElement(touch, "line", x1=_num(pa[0]), y1=_num(pa[1]), x2=_num(pb[0]), y2=_num(pb[1]))
    pts = " ".join(f"{_num(p[0])},{_num(p[1])}" for p in map(px, path.vertices))
    ET.SubElement(g, "polyline", points=pts, fill="none", stroke=PATH_COLOR,
                  attrib={"stroke-width": "2", "stroke-linejoin": "round"})
    return w, h


def _document(width, height):
    return ET.Element("svg", xmlns="http://www.w3.org/2000/svg", width=_num(width), height=_num(height),
                      viewBox=f"0 0 {_num(width)} {_num(height)}")


def _serialize(root) -> str:
    ET.indent(root)
    return ET.tostring(root, encoding="unicode") + "\n"


def render_paths(configs, titles=None, columns: int = 2) -> str:
    """Grid of paths (``StretchConfig`` or ``LatticePath``), one panel each."""
    paths = [stretches_to_path(c) if isinstance(c, StretchConfig) else c for c in configs]
    if not paths:
        raise ValueError("nothing to render")
    titles = list(titles) if titles is not None else [None] * len(paths)
    # measure panels on a scratch element, then lay out row by row
    scratch = ET.Element("g")
    sizes = [_panel(scratch, p, 0, 0, t) for p, t in zip(paths, titles)]
    rows = [range(i, min(i + columns, len(paths))) for i in range(0, len(paths), columns)]
    row_h = [max(sizes[i][1] for i in r) for r in rows]
    width = max(sum(sizes[i][0] for i in r) for r in rows)
    root = _document(width, sum(row_h))
    ET.SubElement(root, "rect", width="100%", height="100%", fill="white")
    y = 0.0
    for r, rh in zip(rows, row_h):
        x = 0.0
        for i in r:
            _panel(root, paths[i], x, y, titles[i])
            x += sizes[i][0]
        y += rh
    return _serialize(root)


def render_phase_diagram(rows, width: int = 480, height: int = 320) -> str:
    """Excess free energy against beta, one polyline per model.

    ``rows`` are dicts with keys ``model``, ``beta``, ``f_excess`` (strings or
    numbers, as read back from the scan CSV).
    """
    series: dict[str, list[tuple[float, float]]] = {}
    for r in rows:
        series.setdefault(str(r["model"]), []).append((float(r["beta"]), float(r["f_excess"])))
    if not series:
        raise ValueError("nothing to render")
    bs = [b for s in series.values() for b, _ in s]
    fs = [f for s in series.values() for _, f in s]
    bmin, bmax = min(bs), max(bs)
    fmax = max(max(fs), 1e-12)
    left, right, top, bottom = 50, 20, 20, 40
    pw, ph = width - left - right, height - top - bottom

    def px(b, f):
        x = left + (b - bmin) / ((bmax - bmin) or 1) * pw
        return x, top + ph - f / fmax * ph

    root = _document(width, height)
    ET.SubElement(root, "rect", width="100%", height="100%", fill="white")
    axes = ET.SubElement(root, "g", stroke="black", attrib={"stroke-width": "1"})
    ET.SubElement(axes, "line", x1=str(left), y1=str(top + ph), x2=str(left + pw), y2=str(top + ph))
    ET.SubElement(axes, "line", x1=str(left), y1=str(top), x2=str(left), y2=str(top + ph))
    font = {"font-size": "11", "font-family": "sans-serif"}
    ET.SubElement(root, "text", x=_num(left + pw / 2), y=_num(height - 8), attrib=font).text = "beta"
    ET.SubElement(root, "text", x="4", y=_num(top + 10), attrib=font).text = "f_excess"
    for b in (bmin, bmax):
        ET.SubElement(root, "text", x=_num(px(b, 0)[0] - 8), y=_num(top + ph + 14), attrib=font).text = f"{b:.3g}"
    ET.SubElement(root, "text", x="4", y=_num(top + 4), attrib=font).text = f"{fmax:.3g}"
    colors = ["#1f3b73", "#b3412a", "#2a7b3b", "#7a4ea3"]
    for k, (model, pts) in enumerate(sorted(series.items())):
        pts = sorted(pts)
        color = colors[k % len(colors)]
        coords = " ".join(f"{_num(x)},{_num(y)}" for x, y in (px(b, f) for b, f in pts))
        ET.SubElement(root, "polyline", points=coords, fill="none", stroke=color,
                      attrib={"stroke-width": "1.5", "class": f"model-{model}"})
        ET.SubElement(root, "text", x=_num(left + pw - 60), y=_num(top + 14 * (k + 1)),
                      fill=color, attrib=font).text = model
    return _serialize(root)
