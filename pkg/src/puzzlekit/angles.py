"""Exact circle dynamics under t -> d*t (mod 1).

Everything here is symbolic: angles are `fractions.Fraction` values in [0, 1),
arcs are pairs (lo, hi) with 0 <= lo < 1 < hi allowed for a single wrap, and
puzzle labels are finite unions of such arcs.  Floating point never enters;
by depth ~50 the denominators exceed 2^100 and floats would scramble the
combinatorics.

The central object is `Combinatorics`: given a portrait at the dividing fixed
point and an external angle of the critical value, it maintains two chains of
arc systems, the critical pieces Y^k and the pieces V^k containing the
critical value, from which every query the nest machinery needs (membership
of orbit angles, arcs of an arbitrary piece, full label sets at modest depth)
is answered exactly.
"""
from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from .errors import (
    BudgetExhausted,
    CombinatoricsUndefined,
    DepthUnavailable,
    LabelMismatch,
    OnRay,
)

Arc = tuple[Fraction, Fraction]

# Full label sets have q*d^k arcs; above this count we refuse to materialize.
FULL_LEVEL_ARC_CAP = 800_000


# ---------------------------------------------------------------------------
# elementary angle arithmetic


def norm_angle(t) -> Fraction:
    """Reduce to the canonical representative in [0, 1)."""
    t = Fraction(t)
    return t - (t.numerator // t.denominator)


def times_d(d: int, t) -> Fraction:
    return norm_angle(Fraction(t) * d)


def preimages(d: int, t) -> tuple[Fraction, ...]:
    t = norm_angle(t)
    return tuple((t + k) / d for k in range(d))


def arc_len(a: Arc) -> Fraction:
    return a[1] - a[0]


def angle_pos_in_arc(t: Fraction, a: Arc) -> Fraction:
    """Offset of t from the left endpoint, lifted into [0, 1)."""
    return norm_angle(t - a[0])


def angle_in_arc(t: Fraction, a: Arc, *, closed: bool = False) -> bool:
    pos = angle_pos_in_arc(t, a)
    if closed:
        return pos <= arc_len(a)
    return 0 < pos < arc_len(a)


def arc_contains_arc(outer: Arc, inner: Arc) -> bool:
    pos = angle_pos_in_arc(inner[0], outer)
    return pos + arc_len(inner) <= arc_len(outer)


def _canonical_arc(lo: Fraction, length: Fraction) -> Arc:
    lo = norm_angle(lo)
    return (lo, lo + length)


def simplest_angle_between(lo: Fraction, hi: Fraction) -> Fraction:
    """Smallest-denominator rational strictly inside the open interval.

    Classic continued-fraction descent; deterministic, so inferred value
    angles are reproducible run to run.
    """
    lo, hi = Fraction(lo), Fraction(hi)
    if not lo < hi:
        raise ValueError("empty interval")

    def rec(a: Fraction, b: Fraction) -> Fraction:
        n = a.numerator // a.denominator + 1  # floor(a) + 1
        if n < b:
            return Fraction(n)
        fa = a - (n - 1)
        fb = b - (n - 1)
        if fa == 0:  # interval starts at an integer: smallest unit fraction wins
            return (n - 1) + Fraction(1, math.floor(1 / fb) + 1)
        return (n - 1) + 1 / rec(1 / fb, 1 / fa)

    return rec(lo, hi)


# ---------------------------------------------------------------------------
# portraits


@dataclass(frozen=True)
class Portrait:
    """A cycle of q >= 2 angles permuted by t -> d*t as a circular rotation."""

    degree: int
    angles: tuple[Fraction, ...]
    rotation: Fraction

    def __post_init__(self):
        object.__setattr__(self, "angles", tuple(sorted(norm_angle(a) for a in self.angles)))

    @property
    def q(self) -> int:
        return self.rotation.denominator

    @classmethod
    def from_angles(cls, degree: int, angles: Iterable[Fraction]) -> "Portrait":
        angles = tuple(sorted(norm_angle(a) for a in angles))
        rot = rotation_number(degree, angles)
        if rot is None:
            raise ValueError(f"angles {angles} are not a rotation cycle under x{degree}")
        return cls(degree, angles, rot)

    def realizable(self) -> bool:
        """Can this cycle occur at a dividing fixed point?

        A realized portrait has a unique longest complementary arc of length
        above (d-1)/d: all other sectors map homeomorphically, so their
        lengths sum to less than 1/d.  Rotation cycles without such an arc
        (they exist for d >= 3, e.g. {1/4, 3/4} under tripling) bound no
        critical sector and never land as a cycle at one fixed point.
        """
        arcs = _cyclic_arcs(self.angles)
        longest = max(arc_len(a) for a in arcs)
        return (sum(1 for a in arcs if arc_len(a) == longest) == 1
                and longest > Fraction(self.degree - 1, self.degree))

    def sectors(self) -> tuple[Arc, ...]:
        """Complementary arcs, sector 0 first (see `critical_sector`)."""
        if not self.realizable():
            raise ValueError(f"portrait {self.angles} has no critical sector")
        arcs = _cyclic_arcs(self.angles)
        crit = max(arcs, key=arc_len)
        i = arcs.index(crit)
        return arcs[i:] + arcs[:i]

    def critical_sector(self) -> Arc:
        """The arc of ray angles bounding the piece that holds the critical
        point: always the unique longest one (its length exceeds (d-1)/d,
        since the remaining arcs map homeomorphically)."""
        return self.sectors()[0]

    def characteristic_sector(self) -> Arc:
        # shortest arc; the critical value's rays live here
        return min(self.sectors(), key=arc_len)


def _cyclic_arcs(angles: Sequence[Fraction]) -> list[Arc]:
    angles = sorted(angles)
    arcs = [(angles[i], angles[i + 1]) for i in range(len(angles) - 1)]
    arcs.append((angles[-1], angles[0] + 1))
    return arcs


def rotation_number(d: int, angles: Sequence[Fraction]) -> Fraction | None:
    """Rotation p/q if x d acts on the sorted tuple as a circular shift."""
    angles = sorted(norm_angle(a) for a in angles)
    q = len(angles)
    index = {a: i for i, a in enumerate(angles)}
    shifts = set()
    for i, a in enumerate(angles):
        j = index.get(times_d(d, a))
        if j is None:
            return None
        shifts.add((j - i) % q)
    if len(shifts) != 1:
        return None
    p = shifts.pop()
    if math.gcd(p, q) != 1:
        return None
    return Fraction(p, q)


def enumerate_portraits(d: int, q: int, p: int) -> list[Portrait]:
    """All period-q cycles of t -> d*t with circular rotation number p/q.

    Brute force over the invariant grid k/(d^q - 1), which contains every
    periodic angle of period dividing q.
    """
    if q < 2 or math.gcd(p, q) != 1 or not 0 < p < q:
        raise ValueError("need q >= 2 and p/q a reduced fraction in (0,1)")
    den = d**q - 1
    seen: set[int] = set()
    out: list[Portrait] = []
    for k in range(1, den):
        if k in seen:
            continue
        orbit = [k]
        x = k * d % den
        while x != k and len(orbit) <= q:
            orbit.append(x)
            x = x * d % den
        seen.update(orbit)
        if x != k or len(orbit) != q:
            continue
        angles = tuple(Fraction(m, den) for m in orbit)
        rot = rotation_number(d, angles)
        if rot == Fraction(p, q):
            out.append(Portrait(d, angles, rot))
    out.sort(key=lambda pt: pt.angles)
    return out


def sector_index(portrait: Portrait, t) -> int:
    """Index of the sector arc containing t; 0 is the critical sector."""
    t = norm_angle(t)
    for i, arc in enumerate(portrait.sectors()):
        if angle_in_arc(t, arc):
            return i
    raise OnRay(f"angle {t} is a portrait angle")


# ---------------------------------------------------------------------------
# labels


@dataclass(frozen=True)
class Label:
    """Identity of a puzzle piece: its depth and bounding-ray arc system."""

    depth: int
    arcs: tuple[Arc, ...]
    is_critical: bool = False

    def __post_init__(self):
        object.__setattr__(self, "arcs", tuple(sorted(self.arcs)))

    @property
    def boundary_angles(self) -> tuple[Fraction, ...]:
        out = set()
        for lo, hi in self.arcs:
            out.add(norm_angle(lo))
            out.add(norm_angle(hi))
        return tuple(sorted(out))

    @property
    def sector_id(self) -> Fraction:
        return min(self.boundary_angles)

    def contains_angle(self, t, *, closed: bool = False) -> bool:
        return any(angle_in_arc(norm_angle(t), a, closed=closed) for a in self.arcs)

    def span(self) -> Fraction:
        return sum((arc_len(a) for a in self.arcs), Fraction(0))

    def key(self) -> tuple:
        return (self.depth, self.arcs)

    def __str__(self):
        inner = ", ".join(f"({lo},{hi})" for lo, hi in self.arcs)
        mark = "*" if self.is_critical else ""
        return f"Y^{self.depth}{mark}[{inner}]"


class _ArcFamily:
    """Sorted, disjoint arcs with O(log n) membership queries."""

    def __init__(self, arcs: Sequence[Arc]):
        self.arcs = tuple(sorted(arcs))
        self._los = [a[0] for a in self.arcs]

    def locate(self, t: Fraction) -> tuple[int, str]:
        """(index, kind) with kind 'in' | 'edge' | 'out' for the arc hit."""
        t = norm_angle(t)
        i = bisect_right(self._los, t) - 1
        for j in (i, len(self.arcs) - 1):  # last arc may wrap past 1
            if j < 0:
                continue
            pos = angle_pos_in_arc(t, self.arcs[j])
            ln = arc_len(self.arcs[j])
            if pos == 0 or pos == ln:
                return j, "edge"
            if pos < ln:
                return j, "in"
        return -1, "out"

    def __iter__(self):
        return iter(self.arcs)

    def __len__(self):
        return len(self.arcs)


def _complement_gaps(arcs: Sequence[Arc]) -> list[Arc]:
    arcs = sorted(arcs)
    gaps = []
    for i in range(len(arcs)):
        hi = arcs[i][1]
        nxt = arcs[(i + 1) % len(arcs)][0]
        length = norm_angle(nxt - hi)
        if length == 0 and len(arcs) > 1:
            continue  # adjacent arcs sharing an endpoint
        if len(arcs) == 1:
            length = 1 - arc_len(arcs[0])
            if length == 0:
                return []
        gaps.append(_canonical_arc(hi, length))
    return sorted(gaps)


# ---------------------------------------------------------------------------
# the sparse combinatorics engine


class Combinatorics:
    """Per-depth symbolic state for one map within one parabolic wake.

    value_angle is an external angle of a ray landing at (or marking) the
    critical value.  It may be exact knowledge (Misiurewicz parameters) or a
    geometric inference, in which case `ceiling` bounds the depth to which
    the chain reflects the actual map; queries past it raise BudgetExhausted.
    """

    def __init__(self, portrait: Portrait, value_angle, *, ceiling: int | None = None):
        self.portrait = portrait
        self.d = portrait.degree
        self.value_angle = norm_angle(value_angle)
        self.ceiling = ceiling
        self._undefined_at: int | None = None

        sectors = portrait.sectors()
        crit0 = sectors[0]
        self._crit: list[_ArcFamily] = [_ArcFamily([crit0])]
        self._gaps: list[_ArcFamily] = [_ArcFamily([a for a in sectors if a != crit0])]
        try:
            v0 = self._piece_arcs_at(self.value_angle, 0)
        except OnRay:
            self._undefined_at = 0
            raise CombinatoricsUndefined(0, f"value angle {self.value_angle} is a portrait angle")
        self._value: list[tuple[Arc, ...]] = [v0]
        self._orbit: list[Fraction] = [self.value_angle]  # index t-1 holds angle of f^t(0)

    # -- depth bookkeeping ----------------------------------------------

    @property
    def q(self) -> int:
        return self.portrait.q

    @property
    def depth_built(self) -> int:
        return len(self._crit) - 1

    def ensure_depth(self, n: int) -> None:
        if self.ceiling is not None and n > self.ceiling:
            raise BudgetExhausted(
                f"depth {n} exceeds the validity ceiling {self.ceiling} "
                "of the inferred value angle", budget=self.ceiling,
                operation="ensure_depth")
        if self._undefined_at is not None and n >= self._undefined_at:
            raise CombinatoricsUndefined(self._undefined_at)
        while self.depth_built < n:
            self._extend_one()

    def _extend_one(self) -> None:
        m = self.depth_built + 1
        # the value angle must stay off the depth-m ray set: tau lies in
        # Theta_m exactly when d^m tau is a portrait angle
        if times_d(self.d, self.orbit_angle(m)) in set(self.portrait.angles):
            self._undefined_at = m
            raise CombinatoricsUndefined(m)
        prev_value = self._value[m - 1]
        crit = []
        for lo, hi in prev_value:
            ln = (hi - lo) / self.d
            for k in range(self.d):
                crit.append(_canonical_arc((lo + k) / self.d, ln))
        fam = _ArcFamily(crit)
        self._crit.append(fam)
        self._gaps.append(_ArcFamily(_complement_gaps(fam.arcs)))
        self._value.append(self._piece_arcs_at(self.value_angle, m))

    def orbit_angle(self, t: int) -> Fraction:
        """External angle marking f^t(0), t >= 1 (that is, d^(t-1) * value_angle)."""
        if t < 1:
            raise ValueError("orbit angles start at t = 1")
        while len(self._orbit) < t:
            self._orbit.append(times_d(self.d, self._orbit[-1]))
        return self._orbit[t - 1]

    # -- piece queries ----------------------------------------------------

    def crit_arcs(self, k: int) -> tuple[Arc, ...]:
        self.ensure_depth(k)
        return self._crit[k].arcs

    def value_arcs(self, k: int) -> tuple[Arc, ...]:
        self.ensure_depth(k)
        return self._value[k]

    def critical_label(self, k: int) -> Label:
        return Label(k, self.crit_arcs(k), is_critical=True)

    def value_label(self, k: int) -> Label:
        arcs = self.value_arcs(k)
        return Label(k, arcs, is_critical=(arcs == self.crit_arcs(k)))

    def in_critical(self, t: Fraction, k: int) -> bool:
        """Is the angle strictly inside the arc system of Y^k?"""
        self.ensure_depth(k)
        idx, kind = self._crit[k].locate(norm_angle(t))
        if kind == "edge":
            raise OnRay(f"angle {t} lies on the boundary of the depth-{k} critical piece")
        return kind == "in"

    def _check_marker_span(self, t: int, k: int) -> None:
        # the piece of f^t(0) at depth k is determined by the value chain
        # down to depth k + t - 1; past the ceiling the answer is guesswork
        if self.ceiling is not None and k + t - 1 > self.ceiling:
            raise BudgetExhausted(
                f"locating f^{t}(0) at depth {k} needs the value chain to "
                f"depth {k + t - 1}, past the validity ceiling {self.ceiling}",
                budget=self.ceiling, operation="marker-ceiling")

    def orbit_in_critical(self, t: int, k: int) -> bool:
        """Does f^t(0) lie in the interior of Y^k?  Exact, via ray angles."""
        self._check_marker_span(t, k)
        return self.in_critical(self.orbit_angle(t), k)

    def _piece_arcs_at(self, t: Fraction, k: int) -> tuple[Arc, ...]:
        t = norm_angle(t)
        if k == 0:
            for arc in self.portrait.sectors():
                if angle_in_arc(t, arc):
                    return (arc,)
            raise OnRay(f"angle {t} is a portrait angle")
        idx, kind = self._crit[k].locate(t)
        if kind == "edge":
            raise OnRay(f"angle {t} lies on a depth-{k} ray")
        if kind == "in":
            return self._crit[k].arcs
        gi, gkind = self._gaps[k].locate(t)
        if gkind != "in":
            raise OnRay(f"angle {t} lies on a depth-{k} ray")
        gap = self._gaps[k].arcs[gi]
        image = self._piece_arcs_at(times_d(self.d, t), k - 1)
        return tuple(self._pull_arc_into_gap(a, gap) for a in image)

    def _pull_arc_into_gap(self, arc: Arc, gap: Arc) -> Arc:
        # f maps the gap region univalently; invert t -> d*t on the gap
        s = gap[0]
        offset = norm_angle(arc[0] - times_d(self.d, s))
        lo = s + offset / self.d
        length = arc_len(arc) / self.d
        if offset / self.d + length > arc_len(gap):
            raise LabelMismatch(
                f"pullback arc {arc} does not fit in gap {gap}; "
                "the arc chain is inconsistent")
        return _canonical_arc(lo, length)

    def piece_label(self, t, k: int) -> Label:
        """Label of the depth-k piece whose closure the angle-t ray meets."""
        self.ensure_depth(k)
        arcs = self._piece_arcs_at(norm_angle(t), k)
        return Label(k, arcs, is_critical=(k > 0 and arcs == self._crit[k].arcs)
                     or (k == 0 and arcs == (self.portrait.critical_sector(),)))

    def orbit_label(self, t: int, k: int) -> Label:
        """Label of the depth-k piece containing f^t(0)."""
        self._check_marker_span(t, k)
        return self.piece_label(self.orbit_angle(t), k)

    # -- enumeration helpers (geometry needs these) -----------------------

    def level_angles_in_arc(self, k: int, arc: Arc) -> list[Fraction]:
        """All depth-k ray angles strictly inside the arc, sorted.

        Depth-k angles over denominator D = (d^q - 1) d^k are exactly the
        m/D with m congruent to a portrait numerator mod d^q - 1; the grid
        depends on the portrait alone, so no chain extension is needed.
        """
        base = self.d**self.q - 1
        D = base * self.d**k
        residues = sorted({a.numerator * (base // a.denominator) % base
                           for a in self.portrait.angles})
        lo, hi = arc
        out = []
        m_lo = math.floor(lo * D)
        m_hi = math.ceil(hi * D)
        for r in residues:
            start = m_lo + (r - m_lo) % base
            for m in range(start, m_hi + 1, base):
                t = Fraction(m, D)
                # keep window coordinates: for arcs wrapping past 1 the cut
                # angles must stay ordered within (lo, hi), not mod 1
                if lo < t < hi:
                    out.append(t)
        return sorted(set(out))

    def arc_of_angle(self, t, k: int) -> Arc:
        """The depth-k elementary arc (consecutive depth-k angles) around t."""
        t = norm_angle(t)
        base = self.d**self.q - 1
        D = base * self.d**k
        residues = sorted({a.numerator * (base // a.denominator) % base
                           for a in self.portrait.angles})
        m0 = t * D
        lo_best = None
        hi_best = None
        for r in residues:
            f = math.floor(m0)
            lo_m = f - (f - r) % base
            if Fraction(lo_m, D) == t:
                raise OnRay(f"angle {t} is a depth-{k} ray angle")
            hi_m = lo_m + base
            if Fraction(hi_m, D) <= t:  # t between lo_m+base steps
                lo_m += base
                hi_m += base
            if lo_best is None or Fraction(lo_m, D) > lo_best:
                lo_best = Fraction(lo_m, D)
            if hi_best is None or Fraction(hi_m, D) < hi_best:
                hi_best = Fraction(hi_m, D)
        if lo_best < 0:  # wrapped below zero; shift to the canonical window
            lo_best += 1
            hi_best += 1
        return (lo_best, hi_best)

    def subpiece_labels_in(self, label: Label, k: int) -> list[Label]:
        """Distinct depth-k piece labels whose arcs sit inside `label`'s arcs.

        Used to descend one level during geometric point location: candidates
        for k = label.depth + 1 are the pieces refining `label`.
        """
        self.ensure_depth(k)
        seen: dict[tuple, Label] = {}
        for arc in label.arcs:
            cuts = self.level_angles_in_arc(k, arc)
            pts = [arc[0]] + cuts + [arc[1]]
            for i in range(len(pts) - 1):
                mid = (pts[i] + pts[i + 1]) / 2
                lab = self.piece_label(mid, k)
                seen.setdefault(lab.key(), lab)
        return sorted(seen.values(), key=lambda l: l.sector_id)

    # -- full level materialization ---------------------------------------

    def labels_at_depth(self, k: int) -> tuple[Label, ...]:
        """Every depth-k label.  Exponential in k; guarded by an arc cap."""
        self.ensure_depth(k)
        return self._full_level(k)

    def _full_level(self, k: int) -> tuple[Label, ...]:
        cache = getattr(self, "_levels", None)
        if cache is None:
            cache = self._levels = {}
        if k in cache:
            return cache[k]
        n_arcs = self.q * self.d**k
        if n_arcs > FULL_LEVEL_ARC_CAP:
            raise BudgetExhausted(
                f"full depth-{k} level has {n_arcs} arcs (cap {FULL_LEVEL_ARC_CAP})",
                operation="labels_at_depth")
        if k == 0:
            crit = self.portrait.critical_sector()
            labs = tuple(Label(0, (a,), is_critical=(a == crit))
                         for a in self.portrait.sectors())
            cache[0] = tuple(sorted(labs, key=lambda l: l.sector_id))
            return cache[0]
        parent = self._full_level(k - 1)
        parent_of_arc: dict[Arc, int] = {}
        for pi, lab in enumerate(parent):
            for a in lab.arcs:
                parent_of_arc[a] = pi
        base = self.d**self.q - 1
        D = base * self.d**k
        residues = sorted({a.numerator * (base // a.denominator) % base
                           for a in self.portrait.angles})
        nums = []
        for r in residues:
            nums.extend(range(r, D, base))
        nums.sort()
        groups: dict[tuple, list[Arc]] = {}
        crit_set = set(self._crit[k].arcs)
        for i in range(len(nums)):
            lo = Fraction(nums[i], D)
            hi = Fraction(nums[(i + 1) % len(nums)], D) + (1 if i + 1 == len(nums) else 0)
            arc = (lo, hi)
            if arc in crit_set:
                key = ("crit",)
            else:
                gi, gkind = self._gaps[k].locate(norm_angle((lo + hi) / 2))
                if gkind != "in":
                    raise LabelMismatch(f"arc {arc} midpoint not interior to a gap")
                img = _canonical_arc(times_d(self.d, lo), arc_len(arc) * self.d)
                pi = parent_of_arc.get(img)
                if pi is None:
                    raise LabelMismatch(f"image arc {img} is not a depth-{k-1} arc")
                key = (gi, pi)
            groups.setdefault(key, []).append(arc)
        labs = []
        for key, arcs in groups.items():
            labs.append(Label(k, tuple(arcs), is_critical=(key == ("crit",))))
        out = tuple(sorted(labs, key=lambda l: l.sector_id))
        cache[k] = out
        return out


# ---------------------------------------------------------------------------
# the module-level operations


def pullback_labels(d: int, labels: Sequence[Label],
                    value_label: Label | None = None) -> tuple[Label, ...]:
    """Refine a full depth-n label set to depth n+1.

    The grouping of new arcs into labels is governed by which depth-n piece
    contains the critical value: its preimage arcs bound the new critical
    piece, and the remaining arcs group by (gap, image piece).  At depth 0
    the value piece defaults to the characteristic sector, which always holds
    the critical value; beyond depth 0 the caller must supply it.
    """
    labels = tuple(labels)
    depth = labels[0].depth
    if any(l.depth != depth for l in labels):
        raise ValueError("labels must share one depth")
    if value_label is None:
        if depth != 0:
            raise ValueError("value_label required beyond depth 0")
        short = min((a for l in labels for a in l.arcs), key=arc_len)
        value_label = next(l for l in labels if short in l.arcs)

    crit_arcs = []
    for lo, hi in value_label.arcs:
        ln = (hi - lo) / d
        for k in range(d):
            crit_arcs.append(_canonical_arc((lo + k) / d, ln))
    crit_fam = _ArcFamily(crit_arcs)
    gaps = _ArcFamily(_complement_gaps(crit_fam.arcs))

    parent_of_arc: dict[Arc, int] = {}
    for pi, lab in enumerate(labels):
        for a in lab.arcs:
            parent_of_arc[a] = pi

    new_angles = sorted({norm_angle((norm_angle(b) + k) / d)
                         for l in labels for b in l.boundary_angles for k in range(d)})
    crit_set = set(crit_fam.arcs)
    groups: dict[tuple, list[Arc]] = {}
    for i in range(len(new_angles)):
        lo = new_angles[i]
        hi = new_angles[(i + 1) % len(new_angles)] + (1 if i + 1 == len(new_angles) else 0)
        arc = (lo, hi)
        if arc in crit_set:
            key = ("crit",)
        else:
            gi, gkind = gaps.locate(norm_angle((lo + hi) / 2))
            if gkind != "in":
                raise LabelMismatch(f"arc {arc} not interior to any gap")
            img = _canonical_arc(times_d(d, lo), arc_len(arc) * d)
            pi = parent_of_arc.get(img)
            if pi is None:
                raise LabelMismatch(f"image arc {img} missing at depth {depth}")
            key = (gi, pi)
        groups.setdefault(key, []).append(arc)
    labs = [Label(depth + 1, tuple(arcs), is_critical=(key == ("crit",)))
            for key, arcs in groups.items()]
    return tuple(sorted(labs, key=lambda l: l.sector_id))


def critical_value_labels(portrait: Portrait, value_angle, n: int) -> dict[int, Label]:
    """Per-depth label of the piece containing the critical value.

    Raises CombinatoricsUndefined as soon as the forward orbit of the value
    angle hits a portrait angle at or before the requested depth.
    """
    comb = Combinatorics(portrait, value_angle)
    return {k: comb.value_label(k) for k in range(n + 1)}


def same_combinatorics(a: Combinatorics, b: Combinatorics, n: int,
                       *, full_check_depth: int = 8) -> bool:
    """Do two maps share portraits and label sets at every depth <= n?

    The full depth-k label partition is determined by the portrait together
    with the chain of value-piece arc systems (the value piece dictates the
    critical arcs at depth k+1, and grouping is inherited downward), so
    comparing those chains suffices.  Shallow depths are additionally
    compared label-set against label-set as a belt-and-braces check.
    """
    for comb in (a, b):
        try:
            comb.ensure_depth(n)
        except (CombinatoricsUndefined, BudgetExhausted) as e:
            raise DepthUnavailable(f"combinatorics not available to depth {n}: {e}")
    if a.portrait.degree != b.portrait.degree or a.portrait.angles != b.portrait.angles:
        return False
    for k in range(n + 1):
        if a.value_arcs(k) != b.value_arcs(k):
            return False
    for k in range(min(n, full_check_depth) + 1):
        if a.labels_at_depth(k) != b.labels_at_depth(k):
            # matching value chains force matching label sets; reaching this
            # line means the engine itself is inconsistent
            raise LabelMismatch(f"value chains agree but depth-{k} labels differ")
    return True


def first_divergence_depth(a: Combinatorics, b: Combinatorics, n: int) -> int | None:
    """Smallest depth <= n where combinatorics (labels + addresses) differ.

    Divergence at depth k means either the depth-k label sets differ or the
    critical-value address does; both reduce to the value-piece arc chain.
    Returns None when the maps agree through depth n.
    """
    if a.portrait.degree != b.portrait.degree or a.portrait.angles != b.portrait.angles:
        return 0
    for k in range(n + 1):
        try:
            a_arcs, b_arcs = a.value_arcs(k), b.value_arcs(k)
        except (CombinatoricsUndefined, BudgetExhausted) as e:
            raise DepthUnavailable(str(e))
        if a_arcs != b_arcs:
            return k
    return None
