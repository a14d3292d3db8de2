"""Geometric puzzle pieces: equipotential arcs joined by co-landing ray pairs.

A piece's identity is its symbolic label (depth + bounding arc system); this
module realizes labels as closed polylines.  Rays are traced once per angle
and shared between all pieces bordering them, so adjacent boundaries agree
exactly and point location is consistent on both sides of every ray.

Corners (ray landing points) converge like a power of the potential with
exponent log|multiplier| / (q log d), which is painfully slow near weakly
repelling points.  Rather than trace forever, the landing tail is
extrapolated: in a Koenigs chart the stride subsequence of ray points is an
exact power series in multiplier^-m, so iterated Aitken acceleration
converges fast and supplies its own error estimate.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .angles import (
    Arc,
    Combinatorics,
    Label,
    Portrait,
    arc_len,
    norm_angle,
    simplest_angle_between,
    times_d,
)
from .dynamics import (
    _FAR_POTENTIAL,
    _newton_to_target,
    Parameter,
    classify_alpha,
    green,
    trace_ray,
)
from .errors import (
    BudgetExhausted,
    CombinatoricsUndefined,
    LabelMismatch,
    OnBoundary,
    OutsideTruncation,
)
from .polygons import bbox_diameter, min_boundary_distance, winding_number

__all__ = [
    "PuzzlePiece",
    "PuzzleLevel",
    "RayStore",
    "Puzzle",
    "assemble_piece",
    "build_level0",
    "refine_to_depth",
    "locate",
    "infer_value_angle",
    "image_label",
]

ON_BOUNDARY_REL_TOL = 1e-7  # fraction of the piece diameter


@dataclass
class PuzzlePiece:
    """A closed Jordan polyline realizing one symbolic label."""

    label: Label
    boundary: np.ndarray  # complex vertices, first repeated at the end
    depth: int
    contains_critical_point: bool
    height: float  # equipotential potential of the outer arcs
    corner_truncated: bool = False
    _diameter: float | None = field(default=None, repr=False)

    @property
    def diameter(self) -> float:
        if self._diameter is None:
            self._diameter = bbox_diameter(self.boundary)
        return self._diameter

    def boundary_distance(self, z: complex) -> float:
        return float(min_boundary_distance(self.boundary, z)[0])

    def contains(self, z: complex) -> bool:
        return abs(winding_number(self.boundary, z)) > 0.5


@dataclass
class PuzzleLevel:
    depth: int
    pieces: list[PuzzlePiece]
    height: float
    parameter: Parameter

    def critical_piece(self) -> PuzzlePiece:
        for pc in self.pieces:
            if pc.contains_critical_point:
                return pc
        raise LabelMismatch(f"no critical piece at depth {self.depth}")


@dataclass
class _RayGeometry:
    angle: Fraction
    potentials: np.ndarray  # of the traced grid points only
    points: np.ndarray  # traced points + synthetic tail + corner (last)
    corner: complex
    corner_err: float
    reliable: bool  # corner pinned down to the accept tolerance


def _iterated_aitken(seq: list[complex]) -> tuple[complex, float]:
    """Accelerate a (power series in rho^m)-type sequence; (limit, err)."""
    cur = list(seq)
    rounds = [cur[-1]]
    while len(cur) >= 3 and len(rounds) < 6:
        nxt = []
        for i in range(len(cur) - 2):
            d2 = cur[i + 2] - 2.0 * cur[i + 1] + cur[i]
            if d2 == 0:
                nxt.append(cur[i + 2])
            else:
                nxt.append(cur[i + 2] - (cur[i + 2] - cur[i + 1]) ** 2 / d2)
        cur = nxt
        rounds.append(cur[-1])
    best = rounds[1] if len(rounds) > 1 else rounds[0]
    best_err = abs(rounds[1] - rounds[0]) if len(rounds) > 1 else math.inf
    for i in range(2, len(rounds)):
        err = abs(rounds[i] - rounds[i - 1])
        if err < best_err:
            best, best_err = rounds[i], err
    return best, best_err


class RayStore:
    """One deep trace per boundary angle, shared by every bordering piece."""

    def __init__(self, p: Parameter, h_top: float = 1.0, steps: int = 8,
                 stride_q: int = 1, landing_tol: float = 1e-8,
                 corner_tol: float = 1e-7):
        self.p = p
        self.h_top = h_top
        self.steps = steps
        self.stride = max(1, stride_q) * steps
        self.landing_tol = landing_tol
        self.corner_tol = corner_tol
        self._geoms: dict[Fraction, _RayGeometry] = {}

    def geometry(self, t) -> _RayGeometry:
        t = norm_angle(Fraction(t))
        geom = self._geoms.get(t)
        if geom is None:
            geom = self._build(t)
            self._geoms[t] = geom
        return geom

    def corner(self, t) -> tuple[complex, float, bool]:
        g = self.geometry(t)
        return g.corner, g.corner_err, g.reliable

    def descending(self, t, h: float) -> np.ndarray:
        """Ray polyline from potential h down to (and including) the corner."""
        g = self.geometry(t)
        if h < g.potentials[-1] * (1.0 - 1e-9):
            # the trace stopped early on its landing trigger, so every
            # lower potential sits inside the landing gap; the synthetic
            # tail is the best available stand-in for that stretch
            return g.points[len(g.potentials) - 1:]
        idx = int(np.argmin(np.abs(np.log(g.potentials) - math.log(h))))
        if abs(math.log(g.potentials[idx] / h)) > 1e-6:
            raise ValueError(f"potential {h:g} is not on the trace grid of "
                             f"ray {t}")
        return g.points[idx:]

    def _build(self, t: Fraction) -> _RayGeometry:
        # lift the start so the first-order Boettcher guess is trustworthy,
        # by an exact power of d so every h_top/d^k stays on the grid
        d = self.p.degree
        lift = 0
        while self.h_top * float(d) ** lift < 3.0:
            lift += 1
        h_start = self.h_top * float(d) ** lift
        tr = None
        corner = None
        err = math.inf
        for floor in (1e-60, 1e-120, 1e-240):
            tr = trace_ray(self.p, t, h_start=h_start, h_stop=floor,
                           steps_per_halving=self.steps,
                           landing_tol=self.landing_tol,
                           division_base=d)
            corner, err = self._corner_of(tr)
            if err < self.corner_tol:
                break
            if tr.landed:
                break  # deeper tracing would stop at the same trigger
        reliable = err < self.corner_tol
        pts = tr.points
        tail = self._synthetic_tail(pts, corner, err)
        full = np.concatenate([pts, tail, np.array([corner])])
        return _RayGeometry(angle=t, potentials=tr.potentials, points=full,
                            corner=corner, corner_err=err, reliable=reliable)

    def _corner_of(self, tr) -> tuple[complex, float]:
        pts = tr.points
        pots = tr.potentials
        # the grid's final height is clamped to h_stop; drop that point from
        # the extrapolation anchor so the stride subsequence stays uniform
        anchor = len(pts) - 1
        if anchor >= 1:
            shrink = float(self.p.degree) ** (-1.0 / self.steps)
            if abs(pots[anchor] / (pots[anchor - 1] * shrink) - 1.0) > 1e-9:
                anchor -= 1
        n_terms = min(24, anchor // self.stride + 1)
        if n_terms >= 4:
            tail = pts[anchor - self.stride * (n_terms - 1):anchor + 1:self.stride]
            corner, err = _iterated_aitken(list(tail))
            if tr.landed:
                # direct trigger is itself accurate; keep the better of the two
                direct_err = 10.0 * self.landing_tol
                if direct_err < err:
                    return complex(tr.landing_point), direct_err
            return corner, err
        if tr.landed:
            return complex(tr.landing_point), 10.0 * self.landing_tol
        return complex(pts[-1]), math.inf

    def _synthetic_tail(self, pts: np.ndarray, corner: complex,
                        err: float) -> np.ndarray:
        """Continue the tail toward the corner with the observed contraction.

        In the Koenigs chart the tail is asymptotically geometric point to
        point, so extending it by the measured complex ratio closes the gap
        between the last traced point and the corner without deeper solves.
        """
        gap = abs(pts[-1] - corner)
        if gap < max(5.0 * err, 1e-9):
            return np.empty(0, dtype=complex)
        if len(pts) < 3:
            return np.empty(0, dtype=complex)
        u, v = pts[-2] - corner, pts[-1] - corner
        if u == 0 or v == 0:
            return np.empty(0, dtype=complex)
        ratio = v / u
        if not (0.0 < abs(ratio) < 0.999999):
            return np.empty(0, dtype=complex)
        cut = max(3.0 * err, 1e-12, 1e-7 * gap)
        n = min(4000, int(math.log(cut / gap) / math.log(abs(ratio))) + 1)
        ks = np.arange(1, n + 1)
        return corner + v * ratio ** ks


def _sample_arc(p: Parameter, lo: Fraction, hi: Fraction, h: float,
                n_samples: int, z_lo: complex, z_hi: complex) -> np.ndarray:
    """Equipotential arc from z_lo to z_hi by Newton continuation.

    The Newton equation f^m(z) = target lives in the far field, where the
    angle advances d^m times faster than on the arc itself; continuation is
    therefore sub-stepped so each hop moves the far target at most a few
    hundredths of a turn, keeping the running guess inside the right basin.
    """
    d = p.degree
    hh = h
    m = 0
    while hh < _FAR_POTENTIAL:
        hh *= d
        m += 1
    dm = d ** m

    def solve(theta: Fraction, guess: complex) -> complex:
        a = norm_angle(theta * dm)
        target = cmath.exp(complex(hh, 2.0 * math.pi * float(a)))
        return _newton_to_target(p, guess, m, target, theta, h)

    pts = np.empty(n_samples + 1, dtype=complex)
    pts[0] = z_lo
    pts[-1] = z_hi
    span = hi - lo
    step = span / n_samples
    n_sub = max(1, math.ceil(float(step * dm) / 0.02))
    guess = z_lo
    for j in range(1, n_samples):
        theta_prev = lo + step * (j - 1)
        for i in range(1, n_sub):
            guess = solve(theta_prev + step * Fraction(i, n_sub), guess)
        theta = lo + step * j
        guess = solve(theta, guess)
        pts[j] = guess
    return pts


def assemble_piece(p: Parameter, rays: RayStore, label: Label, h: float,
                   resolution: int = 256) -> PuzzlePiece:
    """Realize a label as a closed polyline at truncation height h/d^depth."""
    d = p.degree
    hk = h / float(d) ** label.depth
    arcs = label.arcs
    verts: list[complex] = []
    truncated = False

    def push(arr) -> None:
        for z in np.atleast_1d(arr):
            if not verts or verts[-1] != z:
                verts.append(complex(z))

    for i, (lo, hi) in enumerate(arcs):
        lo_next = arcs[(i + 1) % len(arcs)][0]
        seg_down = rays.descending(hi, hk)
        seg_up = rays.descending(lo_next, hk)
        c_hi, e_hi, ok_hi = rays.corner(hi)
        c_lo, e_lo, ok_lo = rays.corner(lo_next)
        if ok_hi and ok_lo:
            gap = abs(c_hi - c_lo)
            # mislabeled rays land a feature-size apart, numerical jitter
            # orders of magnitude below it; gate on the local ray scale so
            # overconfident corner-error estimates cannot veto deep pieces
            scale = max(abs(seg_down[0] - c_hi), abs(seg_up[0] - c_lo))
            if gap > max(50.0 * (e_hi + e_lo), 1e-9, 0.05 * scale):
                raise LabelMismatch(
                    f"rays {hi} and {lo_next} of {label} do not co-land: "
                    f"corners differ by {gap:.2e}")
        else:
            truncated = True
        corner = 0.5 * (c_hi + c_lo)
        z_start = rays.descending(lo, hk)[0]
        n = max(8, math.ceil(resolution * float(arc_len((lo, hi)))))
        arc_pts = _sample_arc(p, lo, hi, hk, n, z_start, seg_down[0])
        push(arc_pts)
        push(seg_down[1:-1])
        push(corner)
        push(seg_up[:-1][::-1])
    push(verts[0])
    boundary = np.asarray(verts, dtype=complex)
    return PuzzlePiece(
        label=label,
        boundary=boundary,
        depth=label.depth,
        contains_critical_point=label.is_critical,
        height=hk,
        corner_truncated=truncated,
    )


def _level0_labels(portrait: Portrait) -> list[Label]:
    return [Label(0, (s,), is_critical=(i == 0))
            for i, s in enumerate(portrait.sectors())]


def build_level0(p: Parameter, portrait: Portrait, h: float = 1.0,
                 resolution: int = 256) -> PuzzleLevel:
    """The q depth-0 pieces cut by the portrait's co-landing ray cycle."""
    rays = RayStore(p, h_top=h, stride_q=portrait.q)
    pieces = [assemble_piece(p, rays, lab, h, resolution)
              for lab in _level0_labels(portrait)]
    return PuzzleLevel(0, pieces, h, p)


def _find_container(pieces: list[PuzzlePiece], z: complex) -> PuzzlePiece:
    hit = None
    dmin = math.inf
    for pc in pieces:
        dist = pc.boundary_distance(z)
        dmin = min(dmin, dist)
        if dist < ON_BOUNDARY_REL_TOL * pc.diameter:
            raise OnBoundary(f"point {z:.6g} within {dist:.2e} of the "
                             f"boundary of {pc.label}")
        if pc.contains(z):
            if hit is not None:
                raise LabelMismatch(f"point {z:.6g} claimed by both "
                                    f"{hit.label} and {pc.label}")
            hit = pc
    if hit is None:
        if pieces and dmin < 1e-3 * max(pc.diameter for pc in pieces):
            raise OnBoundary(f"point {z:.6g} in a boundary sliver "
                             f"({dmin:.2e} from the nearest edge)")
        raise LabelMismatch(f"no piece contains {z:.6g}")
    return hit


class Puzzle:
    """Lazy piece factory over a symbolic backbone.

    Pieces are assembled on demand and cached by label, so deep point
    location only ever realizes the chain of pieces it actually visits.
    """

    def __init__(self, p: Parameter, value_angle, *, portrait: Portrait | None = None,
                 h: float = 1.0, resolution: int = 256, ray_steps: int = 8,
                 q_max: int = 10):
        if portrait is None:
            info = classify_alpha(p, q_max=q_max)
            portrait = Portrait.from_angles(p.degree, info.landing_angles)
        self.p = p
        self.portrait = portrait
        self.h = h
        self.resolution = resolution
        self.comb = Combinatorics(portrait, value_angle)
        self.rays = RayStore(p, h_top=h, steps=ray_steps,
                             stride_q=portrait.q)
        self._pieces: dict[tuple, PuzzlePiece] = {}

    @property
    def value_angle(self) -> Fraction:
        return self.comb.value_angle

    def piece(self, label: Label) -> PuzzlePiece:
        key = label.key()
        pc = self._pieces.get(key)
        if pc is None:
            pc = assemble_piece(self.p, self.rays, label, self.h,
                                self.resolution)
            self._pieces[key] = pc
        return pc

    def critical_piece(self, depth: int) -> PuzzlePiece:
        return self.piece(self.comb.critical_label(depth))

    def value_piece(self, depth: int) -> PuzzlePiece:
        return self.piece(self.comb.value_label(depth))

    def level(self, depth: int, max_pieces: int = 4096) -> PuzzleLevel:
        labels = self.comb.labels_at_depth(depth)
        if len(labels) > max_pieces:
            raise BudgetExhausted(
                f"depth {depth} has {len(labels)} pieces, cap is {max_pieces}",
                budget=max_pieces, operation="level materialization")
        pieces = [self.piece(lab) for lab in labels]
        return PuzzleLevel(depth, pieces,
                           self.h / float(self.p.degree) ** depth, self.p)

    def locate(self, z: complex, depth: int) -> Label:
        """Label of the depth-`depth` piece containing z, descending lazily."""
        if green(self.p, z) > self.h * (1.0 + 1e-12):
            raise OutsideTruncation(f"G({z:.6g}) exceeds height {self.h:g}")
        current: Label | None = None
        for k in range(depth + 1):
            if k == 0:
                candidates = list(self.comb.labels_at_depth(0))
            else:
                candidates = self.comb.subpiece_labels_in(current, k)
            hit = _find_container([self.piece(lab) for lab in candidates], z)
            current = hit.label
        return current

    def levels(self, depth: int, max_pieces: int = 4096) -> list[PuzzleLevel]:
        return [self.level(k, max_pieces=max_pieces)
                for k in range(depth + 1)]


def refine_to_depth(p: Parameter, level0: PuzzleLevel, n: int, *,
                    value_angle=None, resolution: int = 256,
                    max_pieces: int = 4096) -> list[PuzzleLevel]:
    """Fully materialized levels 0..n (piece count grows like d^n).

    The piece partition below depth 0 depends on where the critical value
    sits, so a symbolic value angle is required; when none is given it is
    inferred by geometrically locating the critical value level by level.
    """
    angles = set()
    for pc in level0.pieces:
        angles.update(pc.label.boundary_angles)
    portrait = Portrait.from_angles(p.degree, angles)
    if value_angle is None:
        value_angle = infer_value_angle(p, n, portrait=portrait,
                                        h=level0.height,
                                        resolution=resolution)
    puz = Puzzle(p, value_angle, portrait=portrait, h=level0.height,
                 resolution=resolution)
    return [level0] + [puz.level(k, max_pieces=max_pieces)
                       for k in range(1, n + 1)]


def locate(levels: list[PuzzleLevel], z: complex) -> Label:
    """Deepest label containing z, scanning materialized levels in order."""
    if not levels:
        raise ValueError("no levels given")
    lv0 = levels[0]
    if green(lv0.parameter, z) > lv0.height * (1.0 + 1e-12):
        raise OutsideTruncation(f"G({z:.6g}) exceeds height {lv0.height:g}")
    label = None
    for lv in levels:
        label = _find_container(lv.pieces, z).label
    return label


def image_label(comb: Combinatorics, label: Label) -> Label:
    """Label of f(piece) one depth up; pieces map onto pieces for depth >= 1."""
    if label.depth < 1:
        raise ValueError("depth-0 pieces have no depth--1 image")
    lo, hi = label.arcs[0]
    mid = norm_angle(lo + (hi - lo) / 2)
    return comb.piece_label(times_d(comb.d, mid), label.depth - 1)


def _angle_candidates(arc: Arc, rounds: int = 3):
    """A few exact angles strictly inside arc, simplest denominators first."""
    lo, hi = arc
    tier = [(lo, hi)]
    seen = set()
    for _ in range(rounds):
        nxt = []
        for a, b in tier:
            mid = simplest_angle_between(a, b)
            if mid not in seen:
                seen.add(mid)
                yield mid
            nxt.extend([(a, mid), (mid, b)])
        tier = nxt


def _consistent_seed(portrait: Portrait, tau: Fraction,
                     chain: list[Label]) -> Combinatorics | None:
    """Combinatorics for tau if it reproduces the located label chain."""
    try:
        comb = Combinatorics(portrait, tau)
        comb.ensure_depth(len(chain) - 1)
    except (CombinatoricsUndefined, BudgetExhausted):
        return None
    for k, lab in enumerate(chain):
        if comb.value_label(k).key() != lab.key():
            return None
    return comb


def infer_value_angle(p: Parameter, depth: int, *,
                      portrait: Portrait | None = None, h: float = 1.0,
                      resolution: int = 128, q_max: int = 10) -> Fraction:
    """Exact angle whose symbolic itinerary matches the critical value's
    geometric location at every depth <= `depth`.

    Works level by level: locate f(0) among the current value piece's
    children, then re-seed with the simplest angle in the located arc
    whenever the running seed's symbolic chain falls out of step.
    """
    if portrait is None:
        info = classify_alpha(p, q_max=q_max)
        portrait = Portrait.from_angles(p.degree, info.landing_angles)
    cv = complex(p.c)
    rays = RayStore(p, h_top=h, stride_q=portrait.q)
    cache: dict[tuple, PuzzlePiece] = {}

    def piece_of(lab: Label) -> PuzzlePiece:
        key = lab.key()
        if key not in cache:
            cache[key] = assemble_piece(p, rays, lab, h, resolution)
        return cache[key]

    def reseed(chain: list[Label], located: Label):
        for arc in located.arcs:
            for cand in _angle_candidates(arc):
                comb = _consistent_seed(portrait, cand, chain)
                if comb is not None:
                    return cand, comb
        return None

    try:
        lab0 = _find_container([piece_of(l) for l in _level0_labels(portrait)],
                               cv)
    except OnBoundary as exc:
        raise CombinatoricsUndefined(0, str(exc)) from exc
    chain = [lab0.label]
    seeded = reseed(chain, lab0.label)
    if seeded is None:
        raise CombinatoricsUndefined(0, "no angle in the located sector "
                                        "yields defined combinatorics")
    tau, comb = seeded
    for k in range(1, depth + 1):
        cands = comb.subpiece_labels_in(chain[-1], k)
        try:
            hit = _find_container([piece_of(l) for l in cands], cv)
        except OnBoundary as exc:
            raise CombinatoricsUndefined(k, str(exc)) from exc
        chain.append(hit.label)
        if comb.value_label(k).key() == hit.label.key():
            continue
        seeded = reseed(chain, hit.label)
        if seeded is None:
            raise LabelMismatch(f"no seed angle reproduces the located "
                                f"value chain at depth {k}")
        tau, comb = seeded
    return tau
