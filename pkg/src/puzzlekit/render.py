"""Hand-rolled SVG output for rays, puzzles, and nests.

No drawing library: the figures are simple enough that emitting SVG 1.1
directly keeps the output deterministic and dependency-free.  Pieces are
filled at 40% opacity and colored by depth; rays are stroked paths.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .dynamics import FixedPointInfo, Parameter, equipotential, trace_ray
from .errors import PuzzleError
from .geometry import Puzzle, PuzzlePiece
from .nests import NestRecord


def _fmt(x: float) -> str:
    # fixed short format keeps files small and output byte-stable
    s = f"{x:.5f}"
    return s.rstrip("0").rstrip(".") if "." in s else s


def _points_attr(pts: np.ndarray) -> str:
    return " ".join(f"{_fmt(z.real)},{_fmt(-z.imag)}" for z in pts)


def _path_d(pts: np.ndarray) -> str:
    head = f"M {_fmt(pts[0].real)} {_fmt(-pts[0].imag)}"
    rest = " ".join(f"L {_fmt(z.real)} {_fmt(-z.imag)}" for z in pts[1:])
    return f"{head} {rest}"


def depth_color(depth: int) -> str:
    return f"hsl({(47 + 67 * depth) % 360},70%,45%)"


class Scene:
    """Accumulates SVG elements and tracks the data bounding box."""

    def __init__(self) -> None:
        self.elements: list[str] = []
        self._lo = complex(math.inf, math.inf)
        self._hi = complex(-math.inf, -math.inf)

    def _grow(self, pts: np.ndarray) -> None:
        # the y flip happens at emit time, so track raw coordinates
        self._lo = complex(min(self._lo.real, pts.real.min()),
                           min(self._lo.imag, pts.imag.min()))
        self._hi = complex(max(self._hi.real, pts.real.max()),
                           max(self._hi.imag, pts.imag.max()))

    def _stroke_width(self) -> float:
        d = abs(self._hi - self._lo)
        return d / 500.0 if math.isfinite(d) and d > 0 else 0.01

    def polyline(self, pts: Sequence[complex] | np.ndarray, color: str,
                 width_scale: float = 1.0, dashed: bool = False) -> None:
        pts = np.asarray(pts, dtype=complex)
        if len(pts) < 2:
            return
        self._grow(pts)
        dash = ' stroke-dasharray="4"' if dashed else ""
        self.elements.append(
            f'<path d="{_path_d(pts)}" fill="none" stroke="{color}" '
            f'stroke-width="{width_scale}"{dash}/>'
        )

    def polygon(self, pts: Sequence[complex] | np.ndarray, fill: str,
                opacity: float = 0.4, title: str = "") -> None:
        pts = np.asarray(pts, dtype=complex)
        self._grow(pts)
        tt = f"<title>{title}</title>" if title else ""
        self.elements.append(
            f'<polygon points="{_points_attr(pts)}" fill="{fill}" '
            f'fill-opacity="{opacity}" stroke="{fill}" stroke-width="0.6">'
            f"{tt}</polygon>"
        )

    def dot(self, z: complex, color: str, label: str = "") -> None:
        self._grow(np.array([z], dtype=complex))
        tt = f"<title>{label}</title>" if label else ""
        self.elements.append(
            f'<circle cx="{_fmt(z.real)}" cy="{_fmt(-z.imag)}" r="1.2" '
            f'fill="{color}">{tt}</circle>'
        )

    def to_svg(self, pixel_size: int = 720) -> str:
        if not math.isfinite(self._lo.real):
            lo, hi = complex(-1, -1), complex(1, 1)
        else:
            lo, hi = self._lo, self._hi
        w = max(hi.real - lo.real, 1e-9)
        h = max(hi.imag - lo.imag, 1e-9)
        mx, my = 0.06 * w, 0.06 * h
        # the renderer already negated imaginary parts, so the viewBox
        # vertical range is [-max_imag, -min_imag]
        vb = (lo.real - mx, -(hi.imag + my), w + 2 * mx, h + 2 * my)
        scale = vb[2] / 500.0
        body = "\n".join(self.elements)
        return (
            '<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
            f'width="{pixel_size}" height="{round(pixel_size * vb[3] / vb[2])}" '
            f'viewBox="{_fmt(vb[0])} {_fmt(vb[1])} {_fmt(vb[2])} {_fmt(vb[3])}">\n'
            f'<g stroke-width="{_fmt(scale)}">\n{body}\n</g>\n</svg>\n'
        )


def _scaled(scene: Scene) -> str:
    return scene.to_svg()


def portrait_svg(param: Parameter, info: FixedPointInfo, h: float = 1.0) -> str:
    """Landing rays of the alpha portrait plus the truncating equipotential."""
    scene = Scene()
    eq = equipotential(param, h, n_points=512)
    scene.polyline(np.append(eq, eq[0]), "#888", width_scale=1.0)
    for t in info.landing_angles:
        tr = trace_ray(param, t, h_start=max(2.0, h), h_stop=1e-9,
                       require_landing=False)
        scene.polyline(tr.points, depth_color(0), width_scale=1.4)
    scene.dot(info.location, "#000", label="alpha")
    scene.dot(0j, "#c00", label="critical point")
    return _scaled(scene)


def puzzle_svg(puzzle: Puzzle, depth: int) -> str:
    """Every piece at one depth, filled and colored by depth."""
    scene = Scene()
    level = puzzle.level(depth)
    for piece in level.pieces:
        scene.polygon(piece.boundary, depth_color(depth),
                      title=str(piece.label))
    scene.dot(0j, "#c00", label="critical point")
    return _scaled(scene)


def nest_svg(puzzle: Puzzle, nest: NestRecord) -> str:
    """Overlay of the nest pieces, one color per level."""
    scene = Scene()
    drawn: list[tuple[PuzzlePiece, str, str]] = []
    for entry in nest.entries:
        for label, tag in ((entry.Q, f"Q^{entry.index}"),
                           (entry.P.child, f"P^{entry.index}")):
            try:
                piece = puzzle.piece(label)
            except PuzzleError:
                continue
            drawn.append((piece, depth_color(entry.index), tag))
    # paint outermost first so inner pieces stay visible
    for piece, color, tag in drawn:
        scene.polygon(piece.boundary, color,
                      title=f"{tag} = {piece.label}")
    scene.dot(0j, "#c00", label="critical point")
    return _scaled(scene)


def write_svg(path: str, text: str) -> None:
    with open(path, "w") as fh:
        fh.write(text)
