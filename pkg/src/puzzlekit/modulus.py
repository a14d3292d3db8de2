"""Conformal modulus of annuli between puzzle pieces.

The modulus is computed as the reciprocal Dirichlet energy of the
harmonic potential with u = 0 on the inner boundary and u = 1 on the
outer one: for the round annulus r < |z| < R the potential is
log(|z|/r)/log(R/r), the energy is 2*pi/log(R/r), and the modulus
log(R/r)/(2*pi) is exactly 1/energy.

Discretization: uniform square cells, 5-point Laplacian, conjugate
gradients to residual 1e-10, energy summed over cell edges, Richardson
extrapolation over three grids. Thin or very eccentric annuli (deep
puzzle pieces around much deeper ones) under-resolve the inner curve on
a uniform plane grid, so when the radial extent spans more than a factor
e^2 the same solve runs in logarithmic coordinates w = log(z - z0),
where the annulus becomes a cylinder patch of moderate aspect and the
grid is periodic in Im w. The two charts are conformally equivalent, so
the modulus is unchanged; cells stay square (side 2*pi/n) because the
unweighted edge sum is the Dirichlet energy only on square cells.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import cg

from .angles import Combinatorics, Label
from .errors import (
    BudgetExhausted,
    DegenerateAnnulus,
    HypothesisNotMet,
    NonConvergence,
    OutsideTruncation,
    PuzzleError,
)
from .geometry import Puzzle, PuzzlePiece, min_boundary_distance
from .nests import ChildRecord, NestRecord, first_child, _strictly_inside

LOG_MODE_RATIO = math.exp(2.0)
CG_RESIDUAL = 1e-10


# -- annulus specification -----------------------------------------------------


def _closed(curve) -> np.ndarray:
    pts = np.asarray(curve, dtype=complex)
    if pts.ndim != 1 or len(pts) < 4:
        raise ValueError("boundary curve needs at least 3 distinct vertices")
    if pts[0] != pts[-1]:
        pts = np.append(pts, pts[0])
    return pts


def _winding_many(poly: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Winding number of the closed polyline around each query point.

    A query point sitting exactly on a vertex of the polyline comes out
    as 0, which downstream strictness tests read as "not inside".
    """
    out = np.empty(len(pts))
    for i in range(0, len(pts), 256):
        chunk = pts[i:i + 256]
        v = poly[None, :] - chunk[:, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            turns = np.angle(v[:, 1:] / v[:, :-1])
        out[i:i + 256] = np.nansum(turns, axis=1) / (2 * math.pi)
    return out


@dataclass(frozen=True)
class AnnulusSpec:
    """Region between two disjoint Jordan curves, inner strictly inside."""

    outer: np.ndarray
    inner: np.ndarray
    provenance: tuple[str, str] = ("", "")

    def __post_init__(self):
        object.__setattr__(self, "outer", _closed(self.outer))
        object.__setattr__(self, "inner", _closed(self.inner))
        w = _winding_many(self.outer, self.inner[:-1])
        if not (np.abs(w) > 0.5).all():
            raise DegenerateAnnulus(
                "inner curve is not strictly inside the outer curve")

    def scale_ratio(self) -> float:
        z0 = complex(np.mean(self.inner[:-1]))
        r_in = float(min_boundary_distance(self.inner, z0)[0])
        r_out = float(np.abs(self.outer - z0).max())
        if r_in <= 0:
            raise DegenerateAnnulus("inner curve passes through its centroid")
        return r_out / r_in


def annulus_between(outer: PuzzlePiece, inner: PuzzlePiece) -> AnnulusSpec:
    def tag(piece: PuzzlePiece) -> str:
        kind = "Y" if piece.label.is_critical else "piece"
        return f"{kind}^{piece.depth}"

    return AnnulusSpec(outer.boundary, inner.boundary,
                       provenance=(tag(outer), tag(inner)))


@dataclass
class ModulusEstimate:
    value: float
    grid_sizes: tuple[int, ...]
    richardson_error: float
    converged: bool
    mode: str = "plane"
    components_visited: int | None = None
    note: str = ""

    def __post_init__(self):
        if self.value < 0:
            raise ValueError("modulus is nonnegative")
        if len(self.grid_sizes) < 2:
            raise ValueError("richardson_error needs at least two grids")


@dataclass
class VerificationRow:
    check: str
    lhs: float
    rhs: float
    slack: float
    margin: float
    passed: bool
    context: str = ""


# -- rasterization -------------------------------------------------------------


def _grid_inside(xg: np.ndarray, yg: np.ndarray, poly: np.ndarray) -> np.ndarray:
    """Even-odd containment of a full raster grid, one sweep per row."""
    xs, ys = poly.real, poly.imag
    x1, y1, x2, y2 = xs[:-1], ys[:-1], xs[1:], ys[1:]
    keep = y1 != y2
    x1, y1, x2, y2 = x1[keep], y1[keep], x2[keep], y2[keep]
    out = np.zeros((len(yg), len(xg)), dtype=bool)
    for j, y in enumerate(yg):
        c = (y1 > y) != (y2 > y)
        if not c.any():
            continue
        xin = np.sort(x1[c] + (y - y1[c]) * (x2[c] - x1[c]) / (y2[c] - y1[c]))
        out[j] = np.searchsorted(xin, xg, side="right") % 2 == 1
    return out


def _radial_inside(re_centers: np.ndarray, thetas: np.ndarray,
                   poly: np.ndarray, z0: complex) -> np.ndarray:
    """Containment of the cells z0 + exp(re + i*theta), one sweep per ray.

    A point is inside iff the ray from it away from z0 crosses the curve
    an odd number of times; crossings are where the rotated polygon cuts
    the positive real axis.
    """
    out = np.zeros((len(re_centers), len(thetas)), dtype=bool)
    base = poly - z0
    for j, th in enumerate(thetas):
        p = base * np.exp(-1j * th)
        x, y = p.real, p.imag
        y1, y2 = y[:-1], y[1:]
        c = (y1 > 0) != (y2 > 0)
        if not c.any():
            continue
        xin = x[:-1][c] - y1[c] * (x[1:][c] - x[:-1][c]) / (y2[c] - y1[c])
        xin = xin[xin > 0]
        if len(xin) == 0:
            continue
        logs = np.sort(np.log(xin))
        beyond = len(logs) - np.searchsorted(logs, re_centers, side="right")
        out[:, j] = beyond % 2 == 1
    return out


def _check_not_touching(u0: np.ndarray, u1: np.ndarray, wrap: bool) -> None:
    # a grounded cell orthogonally adjacent to a driven cell means the
    # curves close within one cell: no interior left to carry the field
    for axis in (0, 1):
        a = u0.take(range(1, u0.shape[axis]), axis=axis)
        b = u1.take(range(0, u1.shape[axis] - 1), axis=axis)
        if (a & b).any():
            raise DegenerateAnnulus("curves touch within one grid cell")
        a = u1.take(range(1, u1.shape[axis]), axis=axis)
        b = u0.take(range(0, u0.shape[axis] - 1), axis=axis)
        if (a & b).any():
            raise DegenerateAnnulus("curves touch within one grid cell")
    if wrap:
        if (u0[:, 0] & u1[:, -1]).any() or (u1[:, 0] & u0[:, -1]).any():
            raise DegenerateAnnulus("curves touch within one grid cell")


def _masks(spec: AnnulusSpec, n: int, mode: str):
    """(unknown, u1, u0, wrap) cell masks for one grid resolution."""
    if mode == "plane":
        ox, oy = spec.outer.real, spec.outer.imag
        s = max(ox.max() - ox.min(), oy.max() - oy.min()) / n
        pad = 3 * s
        xg = np.arange(ox.min() - pad + s / 2, ox.max() + pad, s)
        yg = np.arange(oy.min() - pad + s / 2, oy.max() + pad, s)
        in_out = _grid_inside(xg, yg, spec.outer)
        in_in = _grid_inside(xg, yg, spec.inner)
        wrap = False
    else:
        z0 = complex(np.mean(spec.inner[:-1]))
        h = 2 * math.pi / n
        lo = math.log(float(min_boundary_distance(spec.inner, z0)[0])) - 3 * h
        hi = math.log(np.abs(spec.outer - z0).max()) + 3 * h
        m = int(math.ceil((hi - lo) / h))
        re = lo + (np.arange(m) + 0.5) * h
        th = (np.arange(n) + 0.5) * h
        in_out = _radial_inside(re, th, spec.outer, z0)
        in_in = _radial_inside(re, th, spec.inner, z0)
        wrap = True
    unknown = in_out & ~in_in
    u1 = ~in_out
    u0 = in_in
    if not unknown.any():
        raise DegenerateAnnulus("annulus thinner than one grid cell")
    # the interior must not reach the raster border: the 3-cell margin
    # keeps the border entirely in the Dirichlet region
    if unknown[0, :].any() or unknown[-1, :].any():
        raise DegenerateAnnulus("annulus leaks past the raster margin")
    if not wrap and (unknown[:, 0].any() or unknown[:, -1].any()):
        raise DegenerateAnnulus("annulus leaks past the raster margin")
    _check_not_touching(u0, u1, wrap)
    return unknown, u1, u0, wrap


# -- discrete Laplace solve ----------------------------------------------------


def _neighbor_views(arr: np.ndarray, wrap: bool):
    """Pairs (center_slice, neighbor_slice) for the four grid directions;
    the angular axis wraps in log mode via np.roll."""
    yield arr[1:, :], arr[:-1, :]
    yield arr[:-1, :], arr[1:, :]
    if wrap:
        yield arr, np.roll(arr, 1, axis=1)
        yield arr, np.roll(arr, -1, axis=1)
    else:
        yield arr[:, 1:], arr[:, :-1]
        yield arr[:, :-1], arr[:, 1:]


def _cg(A: sp.csr_matrix, b: np.ndarray) -> np.ndarray:
    precond = None
    try:
        import pyamg

        ml = pyamg.smoothed_aggregation_solver(A, max_coarse=400)
        precond = ml.aspreconditioner(cycle="V")
    except Exception:
        precond = None
    try:
        x, info = cg(A, b, rtol=CG_RESIDUAL, atol=0.0, maxiter=8000, M=precond)
    except TypeError:  # scipy < 1.12 spells the kwarg tol
        x, info = cg(A, b, tol=CG_RESIDUAL, atol=0.0, maxiter=8000, M=precond)
    if info != 0:
        raise NonConvergence(f"conjugate gradient stopped with info={info}")
    return x


def _solve_once(spec: AnnulusSpec, n: int, mode: str) -> float:
    unknown, u1, u0, wrap = _masks(spec, n, mode)
    k = int(unknown.sum())
    idx = np.full(unknown.shape, -1, dtype=np.int64)
    idx[unknown] = np.arange(k)
    vals = np.zeros(unknown.shape)
    vals[u1] = 1.0

    rows, cols, data = [], [], []
    b = np.zeros(k)
    diag = np.zeros(k)
    for ctr, nb in _neighbor_views(idx, wrap):
        ctr_unknown = ctr >= 0
        diag_idx = ctr[ctr_unknown]
        np.add.at(diag, diag_idx, 1.0)
        nb_here = nb[ctr_unknown]
        inner = nb_here >= 0
        rows.append(diag_idx[inner])
        cols.append(nb_here[inner])
        data.append(np.full(int(inner.sum()), -1.0))
    # Dirichlet neighbors move to the right-hand side
    for (ctr, nb), (_, vnb) in zip(_neighbor_views(idx, wrap),
                                   _neighbor_views(vals, wrap)):
        ctr_unknown = ctr >= 0
        dirich = ctr_unknown & (nb < 0)
        np.add.at(b, ctr[dirich], vnb[dirich])
    rows.append(np.arange(k))
    cols.append(np.arange(k))
    data.append(diag)
    A = sp.coo_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
        shape=(k, k)).tocsr()
    x = _cg(A, b)

    u = vals.copy()
    u[unknown] = x
    energy = float(np.sum(np.diff(u, axis=0) ** 2))
    energy += float(np.sum(np.diff(u, axis=1) ** 2))
    if wrap:
        energy += float(np.sum((u[:, 0] - u[:, -1]) ** 2))
    if energy <= 0:
        raise DegenerateAnnulus("zero field energy: curves coincide")
    return 1.0 / energy


def modulus(spec: AnnulusSpec, grid_n: int = 512) -> ModulusEstimate:
    """Conformal modulus with a Richardson error estimate over three
    grids {grid_n/4, grid_n/2, grid_n}."""
    if grid_n < 64:
        raise ValueError("grid_n below 64 leaves no room for extrapolation")
    mode = "log" if spec.scale_ratio() > LOG_MODE_RATIO else "plane"
    grids = (grid_n // 4, grid_n // 2, grid_n)
    v1, v2, v3 = (_solve_once(spec, g, mode) for g in grids)
    e1, e2 = v2 - v1, v3 - v2
    if e1 == 0.0 or e2 == 0.0:
        extr, err = v3, abs(e2)
    else:
        p = min(3.0, max(0.5, math.log2(abs(e1 / e2))))
        extr = v3 + (v3 - v2) / (2.0 ** p - 1.0)
        err = abs(extr - v3)
    extr = max(extr, 0.0)
    converged = err <= 0.02 * max(extr, 1e-12)
    return ModulusEstimate(value=extr, grid_sizes=grids,
                           richardson_error=err, converged=converged,
                           mode=mode)


# -- the quantity m(Q) ---------------------------------------------------------


def _sample_points(piece: PuzzlePiece, want: int) -> list[complex]:
    """Deterministic interior sampling: raster scan of the bounding box,
    refined until enough cells land inside."""
    bd = piece.boundary
    x0, x1 = bd.real.min(), bd.real.max()
    y0, y1 = bd.imag.min(), bd.imag.max()
    for n in (8, 16, 32, 64, 128):
        xs = np.linspace(x0, x1, n + 2)[1:-1]
        ys = np.linspace(y0, y1, n + 2)[1:-1]
        found = [complex(x, y) for y in ys for x in xs
                 if piece.contains(complex(x, y))]
        if len(found) >= want:
            return found[:want]
    if not found:
        raise DegenerateAnnulus("piece interior too thin to sample")
    return found


def _component_modulus(Qp: PuzzlePiece, Dp: PuzzlePiece,
                       grid: int) -> ModulusEstimate:
    """Modulus of Q minus one return component; a component touching the
    boundary of Q pinches the annulus, whose modulus is zero by
    convention (there is no essential curve family left)."""
    try:
        return modulus(annulus_between(Qp, Dp), grid)
    except DegenerateAnnulus:
        return ModulusEstimate(
            value=0.0, grid_sizes=(grid // 4, grid // 2, grid),
            richardson_error=0.0, converged=True,
            note=f"component {Dp.label.depth - Qp.label.depth} steps deeper "
                 "touches the outer boundary: pinched annulus")


def m_of_piece(puzzle: Puzzle, comb: Combinatorics, Q: Label, *,
               budget: int = 2000, grid: int = 256,
               samples: int = 36) -> ModulusEstimate:
    """Upper bound for m(Q) = inf mod(Q without D) over return-domain
    components D: the minimum over the components actually visited by a
    sampling set within an iteration budget, plus the central component,
    which is always a competitor."""
    qd = Q.depth
    Qp = puzzle.piece(Q)
    components: dict[tuple, Label] = {}
    try:
        rec = first_child(comb, Q)
        components[rec.child.key()] = rec.child
    except (PuzzleError, ValueError):
        pass
    truncated = False
    left = budget
    for z in _sample_points(Qp, samples):
        w = z
        t = 0
        while left > 0:
            w = puzzle.p(w)
            t += 1
            left -= 1
            if Qp.contains(w):
                try:
                    lab = puzzle.locate(z, qd + t)
                except (OutsideTruncation, PuzzleError):
                    break
                components[lab.key()] = lab
                break
            if abs(w) > puzzle.p.escape_bound():
                break
        else:
            truncated = True
        if left <= 0:
            truncated = True
            break
    if not components:
        raise BudgetExhausted(
            f"no return component of Y^{qd} found within {budget} iterates",
            budget=budget, operation="m-of-piece")
    best: ModulusEstimate | None = None
    for lab in components.values():
        est = _component_modulus(Qp, puzzle.piece(lab), grid)
        if best is None or est.value < best.value:
            best = est
    note = f"upper bound over {len(components)} visited components"
    if truncated:
        note += "; sampling truncated by budget"
    if best.note:
        note += "; " + best.note
    return replace(best, components_visited=len(components), note=note)


# -- inequality harnesses ------------------------------------------------------


def verify_children_lemma(puzzle: Puzzle, comb: Combinatorics, V: Label,
                          child: ChildRecord, *, budget: int = 2000,
                          grid: int = 256) -> VerificationRow:
    """Check m_hat(V') >= (1/d) mod(V without U) for a child V' of V,
    where U is the first child; 5% of the right side absorbs numerics.

    m_hat is a minimum over finitely many visited components, so it
    bounds the true infimum m from above and the check is implied by
    the theorem. When U touches the boundary of V the right side is a
    pinched annulus of modulus zero and the row passes trivially.
    """
    U = first_child(comb, V).child
    mod_vu = _component_modulus(puzzle.piece(V), puzzle.piece(U), grid)
    mhat = m_of_piece(puzzle, comb, child.child, budget=budget, grid=grid)
    d = comb.d
    rhs = mod_vu.value / d
    slack = 0.05 * rhs
    margin = mhat.value - rhs
    return VerificationRow(
        check="children-lemma", lhs=mhat.value, rhs=rhs, slack=slack,
        margin=margin, passed=margin >= -slack,
        context=(f"V=Y^{V.depth}, U=Y^{U.depth}, V'=Y^{child.child.depth}, "
                 f"d={d}, {mhat.note}"))


def verify_lemma_Y(puzzle: Puzzle, comb: Combinatorics, V: Label, Q: Label,
                   P: Label, Q2: Label, P2: Label, *, budget: int = 2000,
                   grid: int = 256) -> VerificationRow:
    """Check mod(Q' without P') >= (1/d^2) m_hat(V) on a nest fragment
    P' inside Q' inside P inside Q, where V's first child sits inside Q.

    Containments are gated strictly at the arc level: a shared boundary
    ray breaks the hypotheses, and such configurations are skipped via
    HypothesisNotMet rather than reported as failures.
    """
    U = first_child(comb, V).child
    if not _strictly_inside(U, Q):
        raise HypothesisNotMet("first child of V is not inside Q")
    for a, b, what in ((P2, Q2, "P' in Q'"), (Q2, P, "Q' in P"),
                       (P, Q, "P in Q")):
        if not _strictly_inside(a, b):
            raise HypothesisNotMet(f"fragment containment {what} fails")
    mod_qp = modulus(annulus_between(puzzle.piece(Q2), puzzle.piece(P2)), grid)
    mhat = m_of_piece(puzzle, comb, V, budget=budget, grid=grid)
    d = comb.d
    rhs = mhat.value / (d * d)
    slack = 0.05 * rhs
    margin = mod_qp.value - rhs
    return VerificationRow(
        check="lemma-Y", lhs=mod_qp.value, rhs=rhs, slack=slack,
        margin=margin, passed=margin >= -slack,
        context=(f"V=Y^{V.depth}, Q=Y^{Q.depth}, P=Y^{P.depth}, "
                 f"Q'=Y^{Q2.depth}, P'=Y^{P2.depth}, d={d}, {mhat.note}"))


# -- nest profiles -------------------------------------------------------------


@dataclass
class ModuliProfile:
    """Per-level annulus moduli of a favorite nest, with level errors
    annotated rather than fatal."""

    levels: list[int]
    estimates: list[ModulusEstimate | None]
    notes: list[str]

    def __iter__(self):
        return iter(self.estimates)

    def floor(self, start_level: int = 0) -> float | None:
        vals = [e.value for i, e in zip(self.levels, self.estimates)
                if e is not None and i >= start_level]
        return min(vals) if vals else None


def nest_moduli_profile(puzzle: Puzzle, comb: Combinatorics,
                        nest: NestRecord, *, grid: int = 256) -> ModuliProfile:
    """mod(Q^n without P^n) for each constructed nest level."""
    levels, ests, notes = [], [], []
    for i, entry in enumerate(nest.entries):
        levels.append(i)
        try:
            spec = annulus_between(puzzle.piece(entry.Q),
                                   puzzle.piece(entry.P.child))
            ests.append(modulus(spec, grid))
            notes.append("")
        except PuzzleError as exc:
            ests.append(None)
            notes.append(f"level {i}: {type(exc).__name__}: {exc}")
    return ModuliProfile(levels=levels, estimates=ests, notes=notes)
