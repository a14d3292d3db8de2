"""Planar polyline predicates used by the puzzle geometry and the modulus lab.

Polylines are numpy arrays of complex vertices.  Closed curves carry an
explicit repeat of the first vertex at the end; every helper accepts either
form and closes the loop itself when needed.
"""
from __future__ import annotations

import numpy as np

__all__ = [
    "ensure_closed",
    "winding_number",
    "contains_point",
    "points_in_polygon",
    "min_boundary_distance",
    "directed_hausdorff",
    "bbox_diameter",
    "is_simple_closed",
]


def ensure_closed(poly: np.ndarray) -> np.ndarray:
    poly = np.asarray(poly, dtype=complex)
    if len(poly) < 3:
        raise ValueError("polyline needs at least 3 vertices")
    if poly[0] != poly[-1]:
        poly = np.concatenate([poly, poly[:1]])
    return poly


def winding_number(poly: np.ndarray, z: complex) -> float:
    """Total turning of poly around z, in turns.

    Undefined when z sits exactly on a vertex; those edges contribute 0 here,
    so callers that care must run a boundary-distance check first.
    """
    poly = ensure_closed(poly)
    rel = poly - z
    with np.errstate(divide="ignore", invalid="ignore"):
        ang = np.angle(rel[1:] / rel[:-1])
    return float(np.nansum(ang) / (2.0 * np.pi))


def contains_point(poly: np.ndarray, z: complex) -> bool:
    return abs(winding_number(poly, z)) > 0.5


def points_in_polygon(poly: np.ndarray, pts: np.ndarray,
                      chunk: int = 4096) -> np.ndarray:
    """Even-odd containment for many points at once.

    Points on or extremely near the boundary get an arbitrary side; callers
    that care run a distance check first.
    """
    poly = ensure_closed(poly)
    pts = np.asarray(pts, dtype=complex).ravel()
    x0, y0 = poly.real[:-1], poly.imag[:-1]
    x1, y1 = poly.real[1:], poly.imag[1:]
    out = np.zeros(pts.shape, dtype=bool)
    for s in range(0, len(pts), chunk):
        px = pts.real[s:s + chunk, None]
        py = pts.imag[s:s + chunk, None]
        cond = (y0[None, :] > py) != (y1[None, :] > py)
        with np.errstate(divide="ignore", invalid="ignore"):
            xs = x0[None, :] + (py - y0[None, :]) * (x1 - x0)[None, :] \
                / (y1 - y0)[None, :]
        hits = cond & (xs > px)
        out[s:s + chunk] = (hits.sum(axis=1) % 2).astype(bool)
    return out


def min_boundary_distance(poly: np.ndarray, pts, chunk: int = 2048) -> np.ndarray:
    """Distance from each point to the nearest polyline segment."""
    poly = ensure_closed(poly)
    a = poly[:-1]
    seg = poly[1:] - a
    seg2 = (seg * seg.conjugate()).real
    seg2 = np.where(seg2 == 0.0, 1.0, seg2)
    pts_arr = np.atleast_1d(np.asarray(pts, dtype=complex)).ravel()
    out = np.empty(pts_arr.shape, dtype=float)
    for s in range(0, len(pts_arr), chunk):
        w = pts_arr[s:s + chunk, None] - a[None, :]
        t = (w * seg.conjugate()[None, :]).real / seg2[None, :]
        t = np.clip(t, 0.0, 1.0)
        d = np.abs(w - t * seg[None, :])
        out[s:s + chunk] = d.min(axis=1)
    return out


def directed_hausdorff(a: np.ndarray, b: np.ndarray) -> float:
    """sup over points of a of the distance to polyline b."""
    a = np.asarray(a, dtype=complex).ravel()
    return float(min_boundary_distance(b, a).max())


def bbox_diameter(poly: np.ndarray) -> float:
    poly = np.asarray(poly, dtype=complex)
    w = poly.real.max() - poly.real.min()
    h = poly.imag.max() - poly.imag.min()
    return float(np.hypot(w, h))


def _orient(ax, ay, bx, by, cx, cy):
    return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)


def is_simple_closed(poly: np.ndarray, tol: float = 0.0) -> bool:
    """True if no two non-adjacent segments properly intersect.

    Quadratic with a bounding-box prefilter; meant for test-time checks on
    boundaries of a few thousand vertices.
    """
    poly = ensure_closed(poly)
    n = len(poly) - 1
    ax, ay = poly.real[:-1], poly.imag[:-1]
    bx, by = poly.real[1:], poly.imag[1:]
    lox, hix = np.minimum(ax, bx) - tol, np.maximum(ax, bx) + tol
    loy, hiy = np.minimum(ay, by) - tol, np.maximum(ay, by) + tol
    for i in range(n - 2):
        # segments j > i+1, excluding the closing segment's wrap neighbor
        j0 = i + 2
        j1 = n if i > 0 else n - 1
        if j0 >= j1:
            continue
        sl = slice(j0, j1)
        box = (lox[sl] <= hix[i]) & (hix[sl] >= lox[i]) \
            & (loy[sl] <= hiy[i]) & (hiy[sl] >= loy[i])
        if not box.any():
            continue
        idx = np.nonzero(box)[0] + j0
        d1 = _orient(ax[i], ay[i], bx[i], by[i], ax[idx], ay[idx])
        d2 = _orient(ax[i], ay[i], bx[i], by[i], bx[idx], by[idx])
        d3 = _orient(ax[idx], ay[idx], bx[idx], by[idx], ax[i], ay[i])
        d4 = _orient(ax[idx], ay[idx], bx[idx], by[idx], bx[i], by[i])
        if ((d1 * d2 < 0) & (d3 * d4 < 0)).any():
            return False
    return True
