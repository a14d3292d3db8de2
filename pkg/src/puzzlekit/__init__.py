"""puzzlekit: Yoccoz puzzles, child nests, and conformal moduli for z^d + c."""
from __future__ import annotations

__version__ = "0.1.0"

from . import errors
from .angles import (
    Combinatorics,
    Label,
    Portrait,
    critical_value_labels,
    enumerate_portraits,
    norm_angle,
    pullback_labels,
    same_combinatorics,
    sector_index,
    times_d,
)
from .dynamics import (
    Parameter,
    classify_alpha,
    equipotential,
    fixed_points,
    green,
    trace_ray,
)
from .geometry import (
    Puzzle,
    PuzzleLevel,
    PuzzlePiece,
    build_level0,
    infer_value_angle,
    locate,
    refine_to_depth,
)
from .modulus import (
    AnnulusSpec,
    ModuliProfile,
    ModulusEstimate,
    VerificationRow,
    annulus_between,
    m_of_piece,
    modulus,
    nest_moduli_profile,
    verify_children_lemma,
    verify_lemma_Y,
)
from .nests import (
    ChildRecord,
    NestRecord,
    PrincipalStep,
    ReturnEvent,
    NestEntry,
    children_of,
    classify_child,
    favorite_child,
    favorite_nest,
    first_child,
    first_return_time,
    modified_principal_nest,
    return_events,
)
from .sampling import (
    OrbitScreen,
    SampledParameter,
    nest_of,
    prescreen,
    qualify,
    real_window,
    screen_orbit,
)

__all__ = [
    "errors",
    "Combinatorics",
    "Label",
    "Portrait",
    "critical_value_labels",
    "enumerate_portraits",
    "norm_angle",
    "pullback_labels",
    "same_combinatorics",
    "sector_index",
    "times_d",
    "Parameter",
    "classify_alpha",
    "equipotential",
    "fixed_points",
    "green",
    "trace_ray",
    "Puzzle",
    "PuzzleLevel",
    "PuzzlePiece",
    "build_level0",
    "infer_value_angle",
    "locate",
    "refine_to_depth",
    "AnnulusSpec",
    "ModuliProfile",
    "ModulusEstimate",
    "VerificationRow",
    "annulus_between",
    "m_of_piece",
    "modulus",
    "nest_moduli_profile",
    "verify_children_lemma",
    "verify_lemma_Y",
    "ChildRecord",
    "NestRecord",
    "PrincipalStep",
    "ReturnEvent",
    "NestEntry",
    "children_of",
    "classify_child",
    "favorite_child",
    "favorite_nest",
    "first_child",
    "first_return_time",
    "modified_principal_nest",
    "return_events",
    "OrbitScreen",
    "SampledParameter",
    "nest_of",
    "prescreen",
    "qualify",
    "real_window",
    "screen_orbit",
    "__version__",
]
