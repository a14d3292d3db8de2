"""Children, return maps, and nests of critical puzzle pieces.

Everything here is symbolic: pieces are Labels, membership tests compare
exact rational angles, and no floating-point geometry is touched.  The
critical piece at depth n is written Y^n; a *child* of a critical piece Q
is a critical piece V' = Y^(depth(Q)+t) such that f^t maps V' onto Q as a
branched cover of degree exactly d.  Children are ordered by inclusion,
oldest (largest) first, which is the same as ordering by t.

Because the marker angle is rational its orbit under multiplication by d
is eventually periodic.  Scans exploit this: once the angle orbit closes a
cycle that provably cannot contain the awaited event, the scan stops with
an exact verdict (NotRecurrent / NeverEscapes) instead of burning through
the iterate budget.

Budgets: orbit scans give up after `budget` iterates of f (default 10^5)
and any query that would need puzzle depth beyond `depth_budget` (default
200) stops with BudgetExhausted.  Both outcomes are inconclusive, never a
claim of absence.  For an inferred marker angle the Combinatorics ceiling
additionally bounds how far the symbolic answers are certified against
the actual map; queries past it also raise BudgetExhausted.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Iterator

from .angles import Combinatorics, Label, angle_pos_in_arc, arc_len
from .errors import (
    BudgetExhausted,
    CombinatoricsUndefined,
    LabelMismatch,
    NeverEscapes,
    NotRecurrent,
    OnRay,
)

__all__ = [
    "ORBIT_BUDGET",
    "DEPTH_BUDGET",
    "ReturnEvent",
    "ChildRecord",
    "NestEntry",
    "NestRecord",
    "PrincipalStep",
    "first_return_time",
    "return_events",
    "first_child",
    "children_of",
    "classify_child",
    "favorite_child",
    "modified_principal_nest",
    "favorite_nest",
]

ORBIT_BUDGET = 100_000
DEPTH_BUDGET = 200

KINDS = ("first", "good", "spoiled", "favorite", "plain")


@dataclass(frozen=True)
class ReturnEvent:
    """One return of the critical orbit to the interior of a critical piece.

    `t` is the f-iterate count, `to_label` the piece returned to, and
    `from_label` the piece containing f^t(0) at the depth of the first
    child, so `is_central` holds exactly when `from_label` is critical.
    """

    t: int
    from_label: Label
    to_label: Label
    is_central: bool


@dataclass(frozen=True)
class ChildRecord:
    """A child piece together with the covering time back to its parent.

    kind is one of "first", "good", "spoiled", "favorite", "plain":
    spoiled means first and good (a central first return), favorite is
    the oldest good unspoiled child.
    """

    child: Label
    parent: Label
    t: int
    kind: str

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown child kind {self.kind!r}")
        if self.child.depth != self.parent.depth + self.t:
            raise LabelMismatch(
                f"child depth {self.child.depth} is not parent depth "
                f"{self.parent.depth} + t {self.t}")

    @property
    def is_first(self) -> bool:
        return self.kind in ("first", "spoiled")

    @property
    def good(self) -> bool:
        return self.kind in ("good", "spoiled", "favorite")

    @property
    def spoiled(self) -> bool:
        return self.kind == "spoiled"


@dataclass(frozen=True)
class NestEntry:
    """One level of a favorite nest: Q^i, its first child P^i, and the
    return data that produced Q^(i+1) (None on a truncated last level).

    `return_moments` lists the f-iterate counts of the first k+l returns
    to Q^i; the last one is the covering time of the favorite child.
    """

    index: int
    Q: Label
    P: ChildRecord
    favorite: ChildRecord | None = None
    k: int | None = None
    l: int | None = None
    return_moments: tuple[int, ...] = ()


@dataclass(frozen=True)
class NestRecord:
    """A favorite nest Q^0 > P^0 > Q^1 > P^1 > ... with its seed data."""

    seed_l: int
    seed_q: int
    entries: tuple[NestEntry, ...]
    stop_reason: str | None = None

    def depths(self) -> list[tuple[int, int]]:
        """(depth Q^i, depth P^i) per level."""
        return [(e.Q.depth, e.P.child.depth) for e in self.entries]

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class PrincipalStep:
    """One level of the modified principal nest: V^i, W^i = first child
    of V^i, whether the first return to W^i was central, and V^(i+1)."""

    V: Label
    W: ChildRecord
    central: bool
    V_next: ChildRecord


# -- membership primitives ----------------------------------------------------


def _orbit_in(comb: Combinatorics, t: int, k: int, depth_budget: int) -> bool:
    """Is f^t(0) strictly inside Y^k?  Exact; boundary hits are fatal."""
    if k > depth_budget:
        raise BudgetExhausted(
            f"membership of f^{t}(0) needs puzzle depth {k}",
            budget=depth_budget, operation="depth-budget")
    try:
        return comb.orbit_in_critical(t, k)
    except OnRay as exc:
        raise CombinatoricsUndefined(
            k, f"the marker angle of f^{t}(0) lies on a depth-{k} ray") from exc


def _require_critical(comb: Combinatorics, Y: Label) -> None:
    if not Y.is_critical:
        raise ValueError(f"{Y} does not contain the critical point")
    if comb.critical_label(Y.depth).key() != Y.key():
        raise LabelMismatch(
            f"{Y} is not the critical piece of this combinatorics at "
            f"depth {Y.depth}")


def _return_moments(comb: Combinatorics, depth: int, budget: int,
                    depth_budget: int) -> Iterator[int]:
    """Global moments t with f^t(0) inside int Y^depth, increasing.

    The marker orbit is eventually periodic, so if the angle orbit closes
    a full cycle containing no return the scan raises NotRecurrent: that
    is a proof of absence within the symbolic system, not a timeout.
    """
    first_seen: dict[Fraction, int] = {}
    last_hit = 0
    t = 0
    while t < budget:
        t += 1
        ang = comb.orbit_angle(t)
        prior = first_seen.get(ang)
        if prior is not None and last_hit < prior:
            # angle orbit looped with no return inside the loop: there
            # will never be another one
            raise NotRecurrent(depth, t)
        if prior is None:
            first_seen[ang] = t
        if _orbit_in(comb, t, depth, depth_budget):
            last_hit = t
            yield t
    raise BudgetExhausted(
        f"no return to Y^{depth} within {budget} iterates",
        budget=budget, operation="orbit-scan")


# -- returns and children ------------------------------------------------------


def first_return_time(comb: Combinatorics, Y: Label, *,
                      budget: int = ORBIT_BUDGET,
                      depth_budget: int = DEPTH_BUDGET) -> int:
    """Minimal t >= 1 with f^t(0) in the interior of Y.

    Raises NotRecurrent if the marker orbit provably never enters Y,
    BudgetExhausted if the scan is inconclusive, CombinatoricsUndefined
    if the orbit hits a boundary ray.
    """
    _require_critical(comb, Y)
    return next(_return_moments(comb, Y.depth, budget, depth_budget))


def return_events(comb: Combinatorics, Y: Label, count: int, *,
                  budget: int = ORBIT_BUDGET,
                  depth_budget: int = DEPTH_BUDGET) -> list[ReturnEvent]:
    """The first `count` returns to int Y, classified against the first child."""
    _require_critical(comb, Y)
    out: list[ReturnEvent] = []
    child_depth = None
    for t in _return_moments(comb, Y.depth, budget, depth_budget):
        if child_depth is None:
            child_depth = Y.depth + t
        if child_depth > depth_budget:
            raise BudgetExhausted(
                f"return events at depth {child_depth}",
                budget=depth_budget, operation="depth-budget")
        landed = comb.orbit_label(t, child_depth)
        out.append(ReturnEvent(t=t, from_label=landed, to_label=Y,
                               is_central=landed.is_critical))
        if len(out) >= count:
            break
    return out


def _children(comb: Combinatorics, Q: Label, budget: int,
              depth_budget: int) -> Iterator[tuple[ChildRecord, list[int]]]:
    """Children of Q oldest-first, each with the return moments so far.

    A return moment t yields a child exactly when no earlier return moment
    T has f^T(0) inside Y^(depth(Q)+t-T): that condition makes the pullback
    of Q along the orbit pass the critical point once, so the covering
    degree is exactly d.
    """
    _require_critical(comb, Q)
    q = Q.depth
    moments: list[int] = []
    for t in _return_moments(comb, q, budget, depth_budget):
        # scan recent moments first: their stage depths are shallow, so a
        # definite disproof is found before any deep query can run out
        is_child = all(
            not _orbit_in(comb, T, q + t - T, depth_budget)
            for T in reversed(moments))
        moments.append(t)
        if not is_child:
            continue
        if q + t > depth_budget:
            raise BudgetExhausted(
                f"child of Y^{q} would sit at depth {q + t}",
                budget=depth_budget, operation="depth-budget")
        rec = ChildRecord(child=comb.critical_label(q + t), parent=Q,
                          t=t, kind="plain")
        yield rec, list(moments)


def _kinded(comb: Combinatorics, rec: ChildRecord, t_first: int,
            depth_budget: int) -> ChildRecord:
    good = _orbit_in(comb, rec.t, rec.parent.depth + t_first, depth_budget)
    if rec.t == t_first:
        kind = "spoiled" if good else "first"
    else:
        kind = "good" if good else "plain"
    return replace(rec, kind=kind)


def first_child(comb: Combinatorics, V: Label, *,
                budget: int = ORBIT_BUDGET,
                depth_budget: int = DEPTH_BUDGET) -> ChildRecord:
    """The oldest child of V: the pullback of V along the first return.

    kind is "spoiled" when the first return is central (lands back in the
    child itself), "first" otherwise.
    """
    for rec, _ in _children(comb, V, budget, depth_budget):
        return _kinded(comb, rec, rec.t, depth_budget)
    raise AssertionError("unreachable: the scan raises before exhausting")


def children_of(comb: Combinatorics, Q: Label, count: int, *,
                budget: int = ORBIT_BUDGET,
                depth_budget: int = DEPTH_BUDGET) -> list[ChildRecord]:
    """The first `count` children of Q, oldest first, kinds classified.

    Kinds are first/spoiled/good/plain; the favorite flag needs the k-l
    escape analysis and is only assigned by favorite_child.
    """
    out: list[ChildRecord] = []
    t_first = None
    for rec, _ in _children(comb, Q, budget, depth_budget):
        if t_first is None:
            t_first = rec.t
        out.append(_kinded(comb, rec, t_first, depth_budget))
        if len(out) >= count:
            break
    return out


def classify_child(comb: Combinatorics, rec: ChildRecord, *,
                   budget: int = ORBIT_BUDGET,
                   depth_budget: int = DEPTH_BUDGET) -> ChildRecord:
    """Re-derive the kind of a child record against its parent."""
    t_first = first_return_time(comb, rec.parent, budget=budget,
                                depth_budget=depth_budget)
    return _kinded(comb, rec, t_first, depth_budget)


# -- the favorite child ---------------------------------------------------------


def _favorite_data(comb: Combinatorics, Q: Label, budget: int,
                   depth_budget: int) -> tuple[ChildRecord, int, int, tuple[int, ...]]:
    """favorite_child plus its escape data (k, l, return moments).

    Writing R for the first-return map to Q and P for the first child:
    k > 0 is the first R-iterate with R^k(0) outside P, l > 0 the first
    with R^(k+l)(0) back inside P, and the favorite is the pullback of Q
    under R^(k+l), i.e. the child at the global moment of return k+l.
    """
    _require_critical(comb, Q)
    q = Q.depth
    t1 = first_return_time(comb, Q, budget=budget, depth_budget=depth_budget)
    p_depth = q + t1
    moments: list[int] = []
    k = None
    central_seen: set[Fraction] = set()
    escape_seen: set[Fraction] = set()
    t_fav = None
    try:
        for t in _return_moments(comb, q, budget, depth_budget):
            moments.append(t)
            ang = comb.orbit_angle(t)
            if k is None and ang in central_seen:
                raise NeverEscapes(
                    f"returns to Y^{q} stay central: the marker orbit closed "
                    f"a cycle of central returns by iterate {t}", depth=p_depth)
            if k is not None and ang in escape_seen:
                # a full loop of non-central returns: R^n(0) never re-enters P
                raise NotRecurrent(p_depth, t)
            central = _orbit_in(comb, t, p_depth, depth_budget)
            if k is None:
                if central:
                    central_seen.add(ang)
                    continue
                k = len(moments)
                escape_seen.add(ang)
                continue
            if not central:
                escape_seen.add(ang)
                continue
            t_fav = t
            break
    except BudgetExhausted:
        if k is None:
            raise NeverEscapes(
                f"every return to Y^{q} seen within budget was central",
                depth=p_depth) from None
        raise
    if t_fav is None:  # pragma: no cover - the scan always raises first
        raise BudgetExhausted("favorite-child scan fell through",
                              budget=budget, operation="orbit-scan")
    l = len(moments) - k
    # the pullback under R^(k+l) has degree d: no earlier stage may contain 0
    for T in moments[:-1]:
        if _orbit_in(comb, T, q + t_fav - T, depth_budget):
            raise LabelMismatch(
                f"favorite pullback of Y^{q} at t={t_fav} passes the critical "
                f"point again at stage {T}")
    # oldest good unspoiled: no older non-first child may test good
    earlier: list[int] = []
    for n, t in enumerate(moments[:-1], start=1):
        is_child = all(
            not _orbit_in(comb, T, q + t - T, depth_budget)
            for T in reversed(earlier))
        earlier.append(t)
        if not is_child or t == t1:
            continue
        if _orbit_in(comb, t, p_depth, depth_budget):
            raise LabelMismatch(
                f"child of Y^{q} at t={t} is good, unspoiled and older than "
                f"the favorite at t={t_fav}")
    if q + t_fav > depth_budget:
        raise BudgetExhausted(
            f"favorite child of Y^{q} would sit at depth {q + t_fav}",
            budget=depth_budget, operation="depth-budget")
    rec = ChildRecord(child=comb.critical_label(q + t_fav), parent=Q,
                      t=t_fav, kind="favorite")
    return rec, k, l, tuple(moments)


def favorite_child(comb: Combinatorics, Q: Label, *,
                   budget: int = ORBIT_BUDGET,
                   depth_budget: int = DEPTH_BUDGET) -> ChildRecord:
    """The oldest good unspoiled child of Q.

    Raises NeverEscapes when the returns to Q form a central cascade (the
    orbit never leaves the first child as far as the scan can certify),
    NotRecurrent when the orbit provably stops returning, BudgetExhausted
    when inconclusive.
    """
    rec, _, _, _ = _favorite_data(comb, Q, budget, depth_budget)
    return rec


# -- nests ----------------------------------------------------------------------


def modified_principal_nest(comb: Combinatorics, V0: Label, levels: int, *,
                            budget: int = ORBIT_BUDGET,
                            depth_budget: int = DEPTH_BUDGET) -> list[PrincipalStep]:
    """V^(i+1) is the first child of W^i = first child of V^i, unless the
    first return to W^i is central, in which case the second child.

    Children are strictly nested, so "second" is unambiguous; the covering
    times recorded on the ChildRecords compose to f-iterate counts.
    """
    steps: list[PrincipalStep] = []
    V = V0
    for _ in range(levels):
        W = first_child(comb, V, budget=budget, depth_budget=depth_budget)
        kids = children_of(comb, W.child, 2, budget=budget,
                           depth_budget=depth_budget)
        central = kids[0].spoiled
        V_next = kids[1] if central else kids[0]
        if len(kids) > 1 and kids[1].t <= kids[0].t:
            raise LabelMismatch("children of a piece must be strictly nested")
        steps.append(PrincipalStep(V=V, W=W, central=central, V_next=V_next))
        V = V_next.child
    return steps


def _strictly_inside(inner: Label, outer: Label) -> bool:
    """Arc-level test that inner sits in the interior of outer.

    Necessary for geometric interior containment (shared boundary rays are
    detected); shared corners between distinct ray pairs are not visible
    at this level and are checked geometrically in the test suite.
    """
    for lo, hi in inner.arcs:
        ok = False
        for a in outer.arcs:
            pos = angle_pos_in_arc(lo, a)
            if 0 < pos and pos + (hi - lo) < arc_len(a):
                ok = True
                break
        if not ok:
            return False
    return True


def favorite_nest(comb: Combinatorics, m: int, *,
                  budget: int = ORBIT_BUDGET,
                  depth_budget: int = DEPTH_BUDGET) -> NestRecord:
    """The favorite nest Q^0 > P^0 > Q^1 > ... with m levels if possible.

    Seed: with q the portrait period, Q^0 = Y^(l q) for the minimal l > 0
    with f^(l q)(0) outside Y^1; then P^i is the first child of Q^i and
    Q^(i+1) the favorite child of Q^i.

    If a level cannot be built the record is truncated with stop_reason
    set; a failure before the first level is raised instead (NotRecurrent,
    NeverEscapes, BudgetExhausted, or CombinatoricsUndefined).
    """
    if m < 1:
        raise ValueError("a nest needs at least one level")
    q = comb.q
    seed_seen: set[Fraction] = set()
    seed_l = None
    l = 0
    while (l + 1) * q <= budget:
        l += 1
        ang = comb.orbit_angle(l * q)
        if ang in seed_seen:
            raise NeverEscapes(
                f"f^(l*{q})(0) stays in Y^1 for every l: the marker orbit "
                f"closed a cycle by l={l}", depth=1)
        seed_seen.add(ang)
        if not _orbit_in(comb, l * q, 1, depth_budget):
            seed_l = l
            break
    if seed_l is None:
        raise NeverEscapes(
            f"f^(l*{q})(0) stayed in Y^1 for every l*{q} <= {budget}", depth=1)

    entries: list[NestEntry] = []
    stop_reason = None
    Q = comb.critical_label(seed_l * q)
    while len(entries) < m:
        i = len(entries)
        try:
            P = first_child(comb, Q, budget=budget, depth_budget=depth_budget)
        except (NotRecurrent, NeverEscapes, BudgetExhausted) as exc:
            if not entries:
                raise
            stop_reason = f"no first child at level {i}: {exc}"
            break
        if i == 0 and not _strictly_inside(P.child, Q):
            raise LabelMismatch(
                f"the first child of the seed {Q} shares boundary rays "
                "with it")
        try:
            fav, k, esc_l, moments = _favorite_data(
                comb, Q, budget, depth_budget)
        except (NotRecurrent, NeverEscapes, BudgetExhausted) as exc:
            entries.append(NestEntry(index=i, Q=Q, P=P))
            stop_reason = f"no favorite child at level {i}: {exc}"
            break
        if fav.t <= P.t:
            raise LabelMismatch(
                "favorite child must be strictly deeper than the first child")
        entries.append(NestEntry(index=i, Q=Q, P=P, favorite=fav, k=k,
                                 l=esc_l, return_moments=moments))
        Q = fav.child
    return NestRecord(seed_l=seed_l, seed_q=q, entries=tuple(entries),
                      stop_reason=stop_reason)
