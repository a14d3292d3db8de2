"""Canonical JSON report emission.

Reports are deterministic: identical inputs serialize to byte-identical
output.  Floats are rounded to 12 significant digits first, complex
numbers become ``[re, im]`` pairs, exact angles become ``"num/den"``
strings (exactness survives the round trip), and keys are sorted.
"""

from __future__ import annotations

import dataclasses
import json
import math
import os
import tempfile
from fractions import Fraction
from typing import Any

import numpy as np

from .angles import Label, Portrait
from .dynamics import FixedPointInfo
from .errors import PuzzleError
from .modulus import ModuliProfile, ModulusEstimate, VerificationRow
from .nests import ChildRecord, NestRecord

SCHEMA = "puzzlekit-report/1"


def round12(x: float) -> float:
    """Round to 12 significant digits."""
    if x == 0.0 or not math.isfinite(x):
        return float(x)
    return round(x, 11 - int(math.floor(math.log10(abs(x)))))


def canonical(obj: Any) -> Any:
    """Recursively convert to JSON-serializable canonical form."""
    if obj is None or isinstance(obj, (bool, int, str)):
        return obj
    if isinstance(obj, float):
        return round12(obj)
    if isinstance(obj, complex):
        return [round12(obj.real), round12(obj.imag)]
    if isinstance(obj, Fraction):
        return f"{obj.numerator}/{obj.denominator}"
    if isinstance(obj, np.ndarray):
        return [canonical(v) for v in obj.tolist()]
    if isinstance(obj, np.generic):
        return canonical(obj.item())
    if isinstance(obj, dict):
        return {str(k): canonical(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [canonical(v) for v in obj]
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: canonical(getattr(obj, f.name))
                for f in dataclasses.fields(obj)}
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(payload: dict) -> str:
    return json.dumps(canonical(payload), sort_keys=True, indent=2,
                      ensure_ascii=False) + "\n"


def write_report(path: str, payload: dict) -> None:
    """Serialize and write atomically (no partial reports on disk)."""
    text = dumps(payload)
    d = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.chmod(tmp, 0o644)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# -- encoders for the domain types -------------------------------------------

def encode_label(label: Label) -> dict:
    return {
        "depth": label.depth,
        "arcs": [[lo, hi] for lo, hi in label.arcs],
        "is_critical": label.is_critical,
        "name": str(label),
    }


def encode_portrait(portrait: Portrait, info: FixedPointInfo | None = None) -> dict:
    out: dict[str, Any] = {
        "degree": portrait.degree,
        "angles": list(portrait.angles),
        "rotation": portrait.rotation,
        "q": len(portrait.angles),
    }
    if info is not None:
        out["alpha"] = {
            "location": info.location,
            "multiplier": info.multiplier,
            "kind": info.kind,
            "non_repelling": info.non_repelling,
        }
    return out


def encode_child(rec: ChildRecord) -> dict:
    return {
        "label": encode_label(rec.child),
        "parent": encode_label(rec.parent),
        "t": rec.t,
        "kind": rec.kind,
    }


def encode_nest(nest: NestRecord) -> dict:
    entries = []
    for e in nest.entries:
        entries.append({
            "index": e.index,
            "Q": encode_label(e.Q),
            "P": encode_child(e.P),
            "favorite": None if e.favorite is None else encode_child(e.favorite),
            "k": e.k,
            "l": e.l,
            "return_moments": list(e.return_moments),
        })
    return {
        "seed": {"l": nest.seed_l, "q": nest.seed_q},
        "entries": entries,
        "depths": [list(pair) for pair in nest.depths()],
        "stop_reason": nest.stop_reason,
    }


def encode_estimate(est: ModulusEstimate) -> dict:
    out = {
        "value": est.value,
        "grid_sizes": list(est.grid_sizes),
        "richardson_error": est.richardson_error,
        "converged": est.converged,
        "mode": est.mode,
    }
    if est.components_visited is not None:
        out["components_visited"] = est.components_visited
    if est.note:
        out["note"] = est.note
    return out


def encode_row(row: VerificationRow) -> dict:
    return {
        "check": row.check,
        "lhs": row.lhs,
        "rhs": row.rhs,
        "slack": row.slack,
        "margin": row.margin,
        "passed": row.passed,
        "context": row.context,
    }


def encode_profile(profile: ModuliProfile) -> dict:
    return {
        "levels": profile.levels,
        "estimates": [None if e is None else encode_estimate(e)
                      for e in profile.estimates],
        "notes": list(profile.notes),
        "floor": profile.floor(),
        "floor_from_level_2": profile.floor(start_level=2),
    }


def warning_entry(exc: PuzzleError) -> dict:
    """One warnings-list entry; budget errors carry their provenance."""
    return {
        "type": type(exc).__name__,
        "message": str(exc),
        "operation": getattr(exc, "operation", "") or "",
        "budget": getattr(exc, "budget", None),
    }
