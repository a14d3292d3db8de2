"""Survey of dendrite-region parameters with recurrent combinatorics.

The deeper machinery (nest verification, moduli profiles, symbolic vs
geometric cross-checks) needs parameters whose critical orbit recurs
combinatorially to substantial depth. Such parameters are found, not
chosen: a cheap float prescreen rejects escapers and attracting windows,
then the full pipeline (alpha portrait, value-angle inference, favorite
nest) promotes the survivors. The inferred value angle is exact only to
the inference depth, so every qualified record carries the ceiling and
all downstream combinatorics respects it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .angles import Combinatorics, Portrait
from .dynamics import Parameter, classify_alpha
from .errors import PuzzleError
from .geometry import Puzzle, infer_value_angle
from .nests import NestRecord, favorite_nest

ESCAPE_RADIUS = 4.0


@dataclass(frozen=True)
class OrbitScreen:
    """Float-precision orbit diagnostics used by the prescreen."""

    c: complex
    min_return: float  # closest approach of the late orbit to 0
    expansion: float   # time-averaged log |f'| along the late orbit

    @property
    def plausibly_recurrent(self) -> bool:
        return self.min_return < 0.25 and self.expansion > 0.05


def screen_orbit(c: complex, warmup: int = 100,
                 window: int = 400) -> OrbitScreen | None:
    """None if the orbit escapes; otherwise recurrence/expansion stats.

    An attracting or superattracting cycle drags the averaged expansion
    negative, so requiring positive expansion rejects hyperbolic windows
    without root-finding.
    """
    z = 0j
    min_ret = math.inf
    log_sum = 0.0
    for t in range(warmup + window):
        z = z * z + c
        if abs(z) > ESCAPE_RADIUS:
            return None
        if t >= warmup:
            min_ret = min(min_ret, abs(z))
            log_sum += math.log(abs(2.0 * z) + 1e-300)
    return OrbitScreen(c=c, min_return=min_ret, expansion=log_sum / window)


def prescreen(candidates, limit: int | None = None) -> list[OrbitScreen]:
    """Plausibly recurrent candidates, closest returns first."""
    kept = []
    for c in candidates:
        s = screen_orbit(complex(c))
        if s is not None and s.plausibly_recurrent:
            kept.append(s)
    kept.sort(key=lambda s: s.min_return)
    return kept if limit is None else kept[:limit]


def real_window(n: int, lo: float = -2.0, hi: float = -1.5):
    """Real candidates across the chaotic window, endpoints excluded."""
    return [complex(x) for x in np.linspace(lo, hi, n + 2)[1:-1]]


def limb_vein(n: int, start: complex = -0.1226 + 0.7449j,
              end: complex = -0.2282 + 1.1151j):
    """Candidates along the vein of the 1/3-limb, from just past the
    period-3 center out to the antenna tip."""
    ts = np.linspace(0.15, 0.98, n)
    return [complex(start + t * (end - start)) for t in ts]


@dataclass(frozen=True)
class SampledParameter:
    """A parameter promoted by the full pipeline, with everything needed
    to rebuild its combinatorics and puzzle."""

    c: complex
    tau: Fraction
    portrait_angles: tuple[Fraction, ...]
    ceiling: int
    alpha_multiplier: complex
    nest_levels: int
    nest_depths: tuple[tuple[int, int], ...]  # (Q depth, P depth) per level
    stop_reason: str

    @property
    def q(self) -> int:
        return len(self.portrait_angles)

    def parameter(self) -> Parameter:
        return Parameter(2, self.c)

    def portrait(self) -> Portrait:
        return Portrait.from_angles(2, list(self.portrait_angles))

    def combinatorics(self) -> Combinatorics:
        return Combinatorics(self.portrait(), self.tau, ceiling=self.ceiling)

    def puzzle(self, resolution: int = 96, h: float = 1.0) -> Puzzle:
        return Puzzle(self.parameter(), self.tau, portrait=self.portrait(),
                      resolution=resolution, h=h)


def qualify(c: complex, *, infer_depth: int = 18, nest_levels: int = 3,
            resolution: int = 96, budget: int = 4000,
            q_max: int = 6) -> SampledParameter | None:
    """Run the full pipeline on one candidate; None when any stage
    disqualifies it (escape, main component, undefined combinatorics,
    no recurrence)."""
    p = Parameter(2, complex(c))
    try:
        info = classify_alpha(p, q_max=q_max)
        portrait = Portrait.from_angles(p.degree, info.landing_angles)
        tau = infer_value_angle(p, infer_depth, portrait=portrait,
                                resolution=resolution)
    except PuzzleError:
        return None
    comb = Combinatorics(portrait, tau, ceiling=infer_depth)
    try:
        nest = favorite_nest(comb, nest_levels, budget=budget,
                             depth_budget=infer_depth)
    except PuzzleError:
        return None
    return SampledParameter(
        c=complex(c), tau=tau, portrait_angles=tuple(portrait.angles),
        ceiling=infer_depth, alpha_multiplier=info.multiplier,
        nest_levels=len(nest.entries),
        nest_depths=tuple((e.Q.depth, e.P.child.depth) for e in nest.entries),
        stop_reason=nest.stop_reason or "")


def nest_of(sp: SampledParameter, levels: int | None = None,
            budget: int = 4000) -> NestRecord:
    """Rebuild the favorite nest recorded on a sampled parameter."""
    want = levels if levels is not None else max(sp.nest_levels, 1)
    return favorite_nest(sp.combinatorics(), want, budget=budget,
                         depth_budget=sp.ceiling)
