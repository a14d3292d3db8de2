"""Iteration, Green's function, external rays, and fixed points of z^d + c.

Everything here works in plain double precision.  Rays are traced by the
usual pullback scheme: pick an iterate depth n so that the n-th image of the
target lies far out where the Boettcher coordinate is essentially the
identity, then Newton-correct f^n(z) against exp(potential + 2*pi*i*angle).
Angles are kept as exact fractions throughout so that repeated multiplication
by d never drifts.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .angles import enumerate_portraits, norm_angle
from .errors import (
    InMainComponent,
    NotLanded,
    PortraitNotFound,
    RayLost,
    RootFindingFailed,
)

# Beyond this potential the Boettcher coordinate of f^n differs from the
# identity by less than ~1e-10 for |c| of order 1.
_FAR_POTENTIAL = 25.0
# log-magnitude guard: orbits and derivatives past this are treated as a
# rejected Newton step rather than allowed to overflow
_LOG_GUARD = 600.0

__all__ = [
    "Parameter",
    "FixedPointInfo",
    "RayTrace",
    "apply_map",
    "green",
    "trace_ray",
    "fixed_points",
    "classify_alpha",
    "equipotential",
]


@dataclass(frozen=True)
class Parameter:
    """The unicritical polynomial f(z) = z**degree + c."""

    degree: int
    c: complex

    def __post_init__(self) -> None:
        if self.degree < 2:
            raise ValueError("degree must be >= 2")
        object.__setattr__(self, "c", complex(self.c))

    def __call__(self, z: complex) -> complex:
        return z ** self.degree + self.c

    def escape_bound(self) -> float:
        """Any |z| above this grows monotonically under iteration."""
        return max(2.0, abs(self.c) ** (1.0 / (self.degree - 1)) + 1.0)


@dataclass
class FixedPointInfo:
    location: complex
    multiplier: complex
    kind: str = "other"  # "alpha" | "beta" | "other"
    non_repelling: bool = False
    landing_angles: list[Fraction] = field(default_factory=list)

    @property
    def q(self) -> int:
        return len(self.landing_angles)


@dataclass
class RayTrace:
    """Polyline along an external ray, ordered by decreasing potential."""

    angle: Fraction
    points: np.ndarray
    potentials: np.ndarray
    landed: bool
    landing_point: complex | None


def apply_map(p: Parameter, z: complex) -> complex:
    return z ** p.degree + p.c


def green(p: Parameter, z: complex, max_iter: int = 512,
          escape_radius: float | None = None) -> float:
    """Escape-rate potential G(z); returns 0.0 when no escape is observed.

    G(z) = lim d^-n log|f^n(z)|.  At the first escape the limit is evaluated
    by re-expanding log|f(w)| = d log|w| + log|1 + c/w^d| along further
    iterates until the correction drops below double precision.
    """
    d, c = p.degree, p.c
    bound = p.escape_bound()
    if escape_radius is None:
        escape_radius = max(4.0, bound + 1.0)
    elif escape_radius <= bound:
        raise ValueError(f"escape_radius must exceed {bound}")

    w = complex(z)
    n = 0
    while abs(w) <= escape_radius:
        if n >= max_iter:
            return 0.0
        w = w ** d + c
        n += 1

    g = math.log(abs(w))
    zz = w
    for k in range(1, 64):
        if d * math.log(abs(zz)) > _LOG_GUARD:
            break
        zd = zz ** d
        term = math.log(abs(1.0 + c / zd)) / d ** k
        g += term
        zz = zd + c
        if abs(term) < 1e-18:
            break
    if n * math.log10(float(d)) < 280.0:
        return g / float(d) ** n
    return g * math.exp(-n * math.log(d))


def _orbit_and_deriv(d: int, c: complex, z: complex, n: int):
    """(f^n(z), (f^n)'(z)), or None if magnitudes blow past the guard."""
    w = z
    dw = 1.0 + 0.0j
    guard = math.exp(_LOG_GUARD / max(d, 2))
    for _ in range(n):
        aw = abs(w)
        if aw > guard or not (aw == aw):  # overflow or nan
            return None
        dw = d * w ** (d - 1) * dw
        w = w ** d + c
    if abs(w.real) > 1e300 or abs(w.imag) > 1e300:
        return None
    return w, dw


def _newton_to_target(p: Parameter, z0: complex, n: int, target: complex,
                      angle: Fraction, h: float) -> complex:
    """Solve f^n(z) = target by damped Newton from z0."""
    d, c = p.degree, p.c
    res_tol = 1e-13 * (1.0 + abs(target))
    z = z0
    out = _orbit_and_deriv(d, c, z, n)
    if out is None:
        raise RayLost(f"ray {angle}: initial guess escaped near h={h:g}")
    res = abs(out[0] - target)
    step = None
    failures = 0
    for _ in range(60):
        w, dw = out
        if dw == 0:
            raise RayLost(f"ray {angle}: zero derivative near h={h:g}")
        step = (target - w) / dw
        # For deep potentials the forward orbit's roundoff puts a floor under
        # the w-residual long before z stops improving, so convergence is
        # judged on the z-space step.
        if abs(step) < 1e-14 * (1.0 + abs(z)) or res < res_tol:
            return z
        lam = 1.0
        improved = False
        while lam >= 2.0 ** -20:
            cand = z + lam * step
            cand_out = _orbit_and_deriv(d, c, cand, n)
            if cand_out is not None:
                cand_res = abs(cand_out[0] - target)
                if cand_res < res:
                    z, out, res = cand, cand_out, cand_res
                    improved = True
                    break
            lam *= 0.5
        if not improved:
            if abs(step) < 1e-10 * (1.0 + abs(z)):
                return z  # residual at the noise floor, z already converged
            failures += 1
            if failures >= 2:
                raise RayLost(f"ray {angle}: corrector stalled near h={h:g}")
    if step is not None and abs(step) < 1e-9 * (1.0 + abs(z)):
        return z
    raise RayLost(f"ray {angle}: corrector did not converge near h={h:g}")


def trace_ray(p: Parameter, t, h_start: float = 2.0, h_stop: float = 1e-3,
              steps_per_halving: int = 8, landing_tol: float = 1e-7,
              require_landing: bool = False, division_base: int = 2) -> RayTrace:
    """Trace the external ray of angle t from potential h_start down to h_stop.

    Landing is declared when the last three points agree within landing_tol.
    Raises RayLost if the Newton corrector diverges; with require_landing the
    trace must land before h_stop or NotLanded is raised (otherwise the
    partial trace is returned with landed=False).  division_base sets the
    potential ratio spanned by steps_per_halving grid steps; leaving it at 2
    gives the literal halving grid, passing the map's degree makes every
    h_start/d^k an exact grid height.
    """
    if not (h_start > h_stop > 0.0):
        raise ValueError("need h_start > h_stop > 0")
    if steps_per_halving < 1:
        raise ValueError("steps_per_halving must be positive")
    t = norm_angle(Fraction(t))
    d, c = p.degree, p.c

    shrink = float(division_base) ** (-1.0 / steps_per_halving)
    heights = [h_start]
    j = 1
    while heights[-1] > h_stop * (1.0 + 1e-12):
        heights.append(max(h_start * shrink ** j, h_stop))
        j += 1

    # exact forward angles d^k t mod 1, extended on demand
    fwd_angles = [t]

    def angle_at(k: int) -> Fraction:
        while len(fwd_angles) <= k:
            fwd_angles.append(norm_angle(fwd_angles[-1] * d))
        return fwd_angles[k]

    points: list[complex] = []
    potentials: list[float] = []
    landed = False
    # first-order inverse Boettcher: B(z) ~ z + c/(d z^{d-1}) for large z
    w0 = cmath.exp(complex(h_start, 2.0 * math.pi * float(t)))
    z = w0 - c / (d * w0 ** (d - 1))
    for h in heights:
        n = 0
        hh = h
        while hh < _FAR_POTENTIAL:
            hh *= d
            n += 1
        target = cmath.exp(complex(hh, 2.0 * math.pi * float(angle_at(n))))
        z = _newton_to_target(p, z, n, target, t, h)
        points.append(z)
        potentials.append(h)
        if len(points) >= 3 and landing_tol > 0.0:
            a, b = points[-3], points[-2]
            if max(abs(a - z), abs(b - z), abs(a - b)) < landing_tol:
                landed = True
                break
    if require_landing and not landed:
        raise NotLanded(f"ray {t} still moving at h_stop={h_stop:g}")
    return RayTrace(
        angle=t,
        points=np.asarray(points, dtype=complex),
        potentials=np.asarray(potentials, dtype=float),
        landed=landed,
        landing_point=points[-1] if landed else None,
    )


def fixed_points(p: Parameter, tol: float = 1e-10, max_iter: int = 400) -> list[FixedPointInfo]:
    """All d solutions of f(z) = z, with multipliers, via Aberth iteration."""
    d, c = p.degree, p.c

    def poly(z: complex) -> complex:
        return z ** d - z + c

    def dpoly(z: complex) -> complex:
        return d * z ** (d - 1) - 1.0

    radius = 1.0 + max(1.0, abs(c))  # Cauchy bound for z^d - z + c
    zs = [radius * cmath.exp(2j * math.pi * ((j + 0.26) / d + 0.01 * j))
          for j in range(d)]
    for _ in range(max_iter):
        moved = 0.0
        for i in range(d):
            pi = poly(zs[i])
            dpi = dpoly(zs[i])
            if dpi == 0:
                dpi = 1e-300
            ni = pi / dpi
            s = sum(1.0 / (zs[i] - zs[j]) for j in range(d) if j != i)
            denom = 1.0 - ni * s
            if denom == 0:
                denom = 1e-300
            step = ni / denom
            zs[i] = zs[i] - step
            moved = max(moved, abs(step))
        if moved < 1e-15 * (1.0 + radius):
            break

    infos = []
    for z in zs:
        if abs(poly(z)) > tol * (1.0 + abs(z) ** d):
            raise RootFindingFailed(
                f"fixed-point residual {abs(poly(z)):.2e} at z={z:.6g}")
        mult = d * z ** (d - 1)
        infos.append(FixedPointInfo(
            location=z,
            multiplier=mult,
            kind="other",
            non_repelling=abs(mult) <= 1.0 + 1e-12,
        ))
    infos.sort(key=lambda fp: (fp.location.real, fp.location.imag))
    return infos


def classify_alpha(p: Parameter, q_max: int = 10, h_stop: float = 1e-160,
                   landing_tol: float = 1e-7) -> FixedPointInfo:
    """Find the repelling fixed point where a cycle of q >= 2 rays co-lands.

    Tries rotation numbers in order of increasing period; the first portrait
    whose rays all land at a common fixed point wins.  Raises InMainComponent
    when some fixed point is non-repelling (no dividing point exists) and
    PortraitNotFound when nothing lands within q_max.
    """
    fps = fixed_points(p)
    if any(fp.non_repelling for fp in fps):
        raise InMainComponent(f"non-repelling fixed point at c={p.c:.6g}")

    # ray endpoints carry O(100x landing_tol) slack on weakly repelling
    # points; fixed points themselves are O(1) apart, so 1e-4 discriminates
    match_tol = max(1e-4, 100.0 * landing_tol)
    for q in range(2, q_max + 1):
        for num in range(1, q):
            if math.gcd(num, q) != 1:
                continue
            for portrait in enumerate_portraits(p.degree, q, num):
                if not portrait.realizable():
                    continue
                landings = []
                try:
                    for a in portrait.angles:
                        tr = trace_ray(p, a, h_start=3.0, h_stop=h_stop,
                                       steps_per_halving=6,
                                       landing_tol=landing_tol)
                        if not tr.landed:
                            break
                        landings.append(tr.landing_point)
                except RayLost:
                    continue
                if len(landings) != q:
                    continue
                spread = max(abs(u - v) for u in landings for v in landings)
                if spread > match_tol:
                    continue
                center = sum(landings) / q
                best = min(fps, key=lambda fp: abs(fp.location - center))
                if abs(best.location - center) > match_tol or best.non_repelling:
                    continue
                return FixedPointInfo(
                    location=best.location,
                    multiplier=best.multiplier,
                    kind="alpha",
                    non_repelling=False,
                    landing_angles=list(portrait.angles),
                )
    raise PortraitNotFound(f"no ray cycle of period <= {q_max} lands at a "
                           f"fixed point for c={p.c:.6g}")


def equipotential(p: Parameter, h: float, n_points: int = 256) -> np.ndarray:
    """Closed polyline sampling {G = h} at n_points equally spaced angles."""
    if h <= 0:
        raise ValueError("h must be positive")
    h_start = max(2.0, 2.0 * h)
    pts = np.empty(n_points, dtype=complex)
    for j in range(n_points):
        tr = trace_ray(p, Fraction(j, n_points), h_start=h_start, h_stop=h,
                       steps_per_halving=4, landing_tol=0.0)
        pts[j] = tr.points[-1]
    return pts
