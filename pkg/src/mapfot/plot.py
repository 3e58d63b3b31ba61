"""Deterministic SVG rendering of instances, plans, shadows and metric series.

Numbers are written with fixed precision and elements in a fixed order, so
identical inputs give byte-identical files.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .instance import Instance
from .plan import TransportPlan

CELL = 24
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2")


def _f(x: float) -> str:
    return f"{x:.2f}"


@dataclass
class Svg:
    width: float
    height: float
    parts: list[str]

    def add(self, s: str) -> None:
        self.parts.append(s)

    def text(self) -> str:
        head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{_f(self.width)}" height="{_f(self.height)}" '
                f'viewBox="0 0 {_f(self.width)} {_f(self.height)}">')
        return "\n".join([head, *self.parts, "</svg>"]) + "\n"

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.text(), encoding="utf-8")


def _layout(inst: Instance) -> tuple[int, int]:
    if inst.width is not None and inst.height is not None:
        return inst.width, inst.height
    return inst.n_vertices, 1


def _center(inst: Instance, v: int) -> tuple[float, float]:
    w, _ = _layout(inst)
    r, c = divmod(int(v), w)
    return (c + 0.5) * CELL, (r + 0.5) * CELL


def _grid(inst: Instance) -> Svg:
    w, h = _layout(inst)
    svg = Svg(w * CELL, h * CELL, [])
    svg.add('<rect x="0" y="0" width="100%" height="100%" fill="#ffffff"/>')
    obstacles = set(inst.obstacles)
    for v in range(inst.n_vertices):
        r, c = divmod(v, w)
        fill = "#555555" if v in obstacles else "#f4f4f4"
        svg.add(f'<rect x="{_f(c * CELL)}" y="{_f(r * CELL)}" width="{CELL}" height="{CELL}" '
                f'fill="{fill}" stroke="#cccccc" stroke-width="0.5"/>')
    return svg


def _markers(svg: Svg, inst: Instance) -> None:
    for j in inst.targets:
        x, y = _center(inst, j)
        svg.add(f'<circle class="target" cx="{_f(x)}" cy="{_f(y)}" r="{_f(CELL * 0.18)}" fill="#2ca02c"/>')
    for i in inst.robots:
        x, y = _center(inst, i)
        s = CELL * 0.3
        pts = f"{_f(x)},{_f(y - s)} {_f(x - s)},{_f(y + s)} {_f(x + s)},{_f(y + s)}"
        svg.add(f'<polygon class="robot" points="{pts}" fill="#1f77b4"/>')


def _arrow_defs(svg: Svg) -> None:
    svg.add('<defs><marker id="head" markerWidth="6" markerHeight="6" refX="5" refY="3" orient="auto">'
            '<path d="M0,0 L6,3 L0,6 z" fill="#333333"/></marker></defs>')


def trajectories_svg(inst: Instance, plan: TransportPlan | None = None) -> Svg:
    """Grid, robots (triangles), targets (dots) and one arrow per unit move."""
    svg = _grid(inst)
    _arrow_defs(svg)
    _markers(svg, inst)
    if plan is not None:
        for t in range(1, plan.horizon + 1):
            color = PALETTE[(t - 1) % len(PALETTE)]
            for i, j in plan.arcs(t):
                if i == j:
                    continue
                x1, y1 = _center(inst, i)
                x2, y2 = _center(inst, j)
                svg.add(f'<line class="move" data-t="{t}" x1="{_f(x1)}" y1="{_f(y1)}" x2="{_f(x2)}" y2="{_f(y2)}" '
                        f'stroke="{color}" stroke-width="2" marker-end="url(#head)"/>')
    return svg


def shadow_opacities(inst: Instance, slices: np.ndarray) -> np.ndarray:
    """Per-edge opacity: time-summed shadow mass over its maximum among moves (waits get 0)."""
    mass = np.asarray(slices, dtype=np.float64).sum(axis=0)
    move = ~inst.loop_mask
    out = np.zeros(inst.n_edges)
    top = mass[move].max(initial=0.0)
    if top > 0:
        out[move] = mass[move] / top
    return out


def shadow_svg(inst: Instance, slices: np.ndarray) -> Svg:
    """Move arcs drawn with opacity proportional to their time-summed shadow mass."""
    svg = _grid(inst)
    op = shadow_opacities(inst, slices)
    for e in np.flatnonzero(op > 0):
        i, j = int(inst.src[e]), int(inst.dst[e])
        x1, y1 = _center(inst, i)
        x2, y2 = _center(inst, j)
        svg.add(f'<line class="shadow" data-edge="{e}" x1="{_f(x1)}" y1="{_f(y1)}" x2="{_f(x2)}" y2="{_f(y2)}" '
                f'stroke="#d62728" stroke-width="3" stroke-opacity="{op[e]:.4f}"/>')
    _markers(svg, inst)
    return svg


def metrics_svg(series: dict[str, tuple[Sequence[float], Sequence[float]]], xlabel: str = "", ylabel: str = "",
                title: str = "", logx: bool = False, logy: bool = False) -> Svg:
    """Line-and-marker plot of named ``(x, y)`` series, drawn in sorted name order."""
    W, H, m = 480.0, 320.0, 50.0
    svg = Svg(W, H, [])
    svg.add('<rect x="0" y="0" width="100%" height="100%" fill="#ffffff"/>')

    def tx(a, log):
        a = np.asarray(a, dtype=np.float64)
        return np.log10(np.maximum(a, 1e-300)) if log else a

    xs = [tx(x, logx) for x, _ in series.values() if len(x)]
    ys = [tx(y, logy) for _, y in series.values() if len(y)]
    if xs:
        x0, x1 = min(float(a.min()) for a in xs), max(float(a.max()) for a in xs)
        y0, y1 = min(float(a.min()) for a in ys), max(float(a.max()) for a in ys)
    else:
        x0, x1, y0, y1 = 0.0, 1.0, 0.0, 1.0
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0

    def px(x):
        return m + (x - x0) / (x1 - x0) * (W - 2 * m)

    def py(y):
        return H - m - (y - y0) / (y1 - y0) * (H - 2 * m)

    svg.add(f'<line x1="{_f(m)}" y1="{_f(H - m)}" x2="{_f(W - m)}" y2="{_f(H - m)}" stroke="#000000"/>')
    svg.add(f'<line x1="{_f(m)}" y1="{_f(m)}" x2="{_f(m)}" y2="{_f(H - m)}" stroke="#000000"/>')
    for k in range(5):
        fx = x0 + (x1 - x0) * k / 4
        fy = y0 + (y1 - y0) * k / 4
        lx = 10**fx if logx else fx
        ly = 10**fy if logy else fy
        svg.add(f'<text x="{_f(px(fx))}" y="{_f(H - m + 16)}" font-size="10" text-anchor="middle">{lx:.3g}</text>')
        svg.add(f'<text x="{_f(m - 6)}" y="{_f(py(fy) + 3)}" font-size="10" text-anchor="end">{ly:.3g}</text>')
    if title:
        svg.add(f'<text x="{_f(W / 2)}" y="20" font-size="13" text-anchor="middle">{title}</text>')
    if xlabel:
        svg.add(f'<text x="{_f(W / 2)}" y="{_f(H - 10)}" font-size="11" text-anchor="middle">{xlabel}</text>')
    if ylabel:
        svg.add(f'<text x="14" y="{_f(H / 2)}" font-size="11" text-anchor="middle" '
                f'transform="rotate(-90 14 {_f(H / 2)})">{ylabel}</text>')
    for n, name in enumerate(sorted(series)):
        x, y = series[name]
        if not len(x):
            continue
        color = PALETTE[n % len(PALETTE)]
        X, Y = tx(x, logx), tx(y, logy)
        order = np.argsort(X, kind="stable")
        pts = " ".join(f"{_f(px(X[k]))},{_f(py(Y[k]))}" for k in order)
        svg.add(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        for k in order:
            svg.add(f'<circle cx="{_f(px(X[k]))}" cy="{_f(py(Y[k]))}" r="2.5" fill="{color}"/>')
        svg.add(f'<text x="{_f(W - m + 4)}" y="{_f(m + 14 * n)}" font-size="10" fill="{color}">{name}</text>')
    return svg


def emit_plot(kind: str, path: str | Path, **data) -> Path:
    """Write a ``trajectories``, ``shadow`` or ``metrics`` SVG to ``path``."""
    if kind == "trajectories":
        svg = trajectories_svg(data["instance"], data.get("plan"))
    elif kind == "shadow":
        svg = shadow_svg(data["instance"], data["slices"])
    elif kind == "metrics":
        svg = metrics_svg(data["series"], data.get("xlabel", ""), data.get("ylabel", ""), data.get("title", ""),
                          data.get("logx", False), data.get("logy", False))
    else:
        raise ValueError(f"unknown plot kind {kind!r}")
    path = Path(path)
    svg.save(path)
    return path
