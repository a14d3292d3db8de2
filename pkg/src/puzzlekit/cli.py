"""Command-line interface.

Subcommands: ``portrait``, ``puzzle``, ``nest``, ``compare``, ``verify``.
Each one writes ``report.json`` (and optional SVG figures) into ``--out``
and prints a one-line summary.

Exit codes: 0 success; 1 a theorem-backed check failed, which indicates
a bug; 2 precondition or domain error; 3 a budget ran out before any
conclusion was reached.  Reports are deterministic: rerunning the same
configuration produces byte-identical JSON.
"""

from __future__ import annotations

import argparse
import os
import sys
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Callable

from . import render
from . import report as rp
from .angles import Combinatorics, Portrait, critical_value_labels
from .dynamics import Parameter, classify_alpha
from .errors import BudgetError, HypothesisNotMet, PuzzleError
from .geometry import Puzzle, infer_value_angle
from .modulus import nest_moduli_profile, verify_children_lemma, verify_lemma_Y
from .nests import children_of, favorite_nest


@dataclass
class RunConfig:
    degree: int = 2
    c: complex = 0j
    depth: int = 12
    orbit_budget: int = 2000
    height: float = 1.0
    grid: int = 256
    resolution: int = 96
    out: str = "."
    svg: bool = False
    seed_angle: Fraction | None = None
    threads: int = 1

    def __post_init__(self) -> None:
        if self.degree < 2:
            raise ValueError("degree must be at least 2")
        if self.depth < 1 or self.orbit_budget < 1:
            raise ValueError("budgets must be positive")
        if self.height <= 0:
            raise ValueError("equipotential height must be positive")
        if self.grid < 64:
            raise ValueError("grid must be at least 64")
        if self.threads < 1:
            raise ValueError("threads must be positive")

    def echo(self) -> dict:
        return {
            "degree": self.degree,
            "c": self.c,
            "depth": self.depth,
            "orbit_budget": self.orbit_budget,
            "height": self.height,
            "grid": self.grid,
            "resolution": self.resolution,
            "seed_angle": self.seed_angle,
            "threads": self.threads,
        }


@dataclass
class Pipeline:
    """Everything downstream commands need, built once per parameter."""

    param: Parameter
    portrait: Portrait
    tau: Fraction
    ceiling: int | None
    comb: Combinatorics
    _puzzle: Puzzle | None = None

    def puzzle(self, cfg: RunConfig) -> Puzzle:
        if self._puzzle is None:
            self._puzzle = Puzzle(self.param, self.tau, portrait=self.portrait,
                                  resolution=cfg.resolution, h=cfg.height)
        return self._puzzle


def build_pipeline(cfg: RunConfig) -> Pipeline:
    param = Parameter(cfg.degree, cfg.c)
    info = classify_alpha(param)
    portrait = Portrait.from_angles(cfg.degree, info.landing_angles)
    if cfg.seed_angle is not None:
        tau: Fraction = cfg.seed_angle
        ceiling = None
    else:
        tau = infer_value_angle(param, cfg.depth, portrait=portrait,
                                h=cfg.height, resolution=cfg.resolution)
        ceiling = cfg.depth
    comb = Combinatorics(portrait, tau, ceiling=ceiling)
    return Pipeline(param, portrait, tau, ceiling, comb)


# -- commands -----------------------------------------------------------------

def cmd_portrait(cfg: RunConfig) -> tuple[dict, dict[str, str], int]:
    param = Parameter(cfg.degree, cfg.c)
    info = classify_alpha(param)
    portrait = Portrait.from_angles(cfg.degree, info.landing_angles)
    payload = {"portrait": rp.encode_portrait(portrait, info)}
    svgs = {}
    if cfg.svg:
        svgs["portrait.svg"] = render.portrait_svg(param, info, h=cfg.height)
    return payload, svgs, 0


def cmd_puzzle(cfg: RunConfig) -> tuple[dict, dict[str, str], int]:
    pipe = build_pipeline(cfg)
    puzzle = pipe.puzzle(cfg)
    counts = []
    for k in range(cfg.depth + 1):
        counts.append([k, len(puzzle.level(k).pieces)])
    labels = critical_value_labels(pipe.portrait, pipe.tau, cfg.depth)
    payload = {
        "portrait": rp.encode_portrait(pipe.portrait),
        "value_angle": pipe.tau,
        "inference_ceiling": pipe.ceiling,
        "piece_counts": counts,
        "critical_value_itinerary": [[k, str(labels[k])]
                                     for k in sorted(labels)],
    }
    svgs = {}
    if cfg.svg:
        svgs["puzzle.svg"] = render.puzzle_svg(puzzle, cfg.depth)
    return payload, svgs, 0


def _nest_for(pipe: Pipeline, cfg: RunConfig, levels: int):
    return favorite_nest(pipe.comb, levels, budget=cfg.orbit_budget,
                         depth_budget=cfg.depth)


def cmd_nest(cfg: RunConfig, levels: int | None = None) -> tuple[dict, dict[str, str], int]:
    pipe = build_pipeline(cfg)
    nest = _nest_for(pipe, cfg, levels if levels is not None else cfg.depth)
    warnings: list[dict] = []
    code = 0
    if not nest.entries:
        code = 3
        warnings.append({"type": "BudgetExhausted", "message": nest.stop_reason,
                         "operation": "favorite-nest",
                         "budget": cfg.orbit_budget})
    depths = nest.depths()
    increasing = all(q < p for q, p in depths) and \
        all(depths[i][1] < depths[i + 1][0] for i in range(len(depths) - 1))
    payload: dict[str, Any] = {
        "value_angle": pipe.tau,
        "nest": rp.encode_nest(nest),
        "nesting_invariant": {"checked": True, "depths_strictly_increase": increasing},
        "warnings": warnings,
    }
    if nest.entries:
        puzzle = pipe.puzzle(cfg)
        profile = nest_moduli_profile(puzzle, pipe.comb, nest, grid=cfg.grid)
        payload["moduli_profile"] = rp.encode_profile(profile)
        if cfg.svg:
            return payload, {"nest.svg": render.nest_svg(puzzle, nest)}, code
    return payload, {}, code


def cmd_compare(cfg_a: RunConfig, cfg_b: RunConfig, n: int) -> tuple[dict, dict[str, str], int]:
    pa, pb = build_pipeline(cfg_a), build_pipeline(cfg_b)
    limit = n
    for pipe in (pa, pb):
        if pipe.ceiling is not None:
            limit = min(limit, pipe.ceiling)
    if pa.portrait != pb.portrait:
        deepest, divergence = -1, 0
    else:
        la = critical_value_labels(pa.portrait, pa.tau, limit)
        lb = critical_value_labels(pb.portrait, pb.tau, limit)
        deepest, divergence = limit, None
        for k in sorted(la):
            if la[k] != lb[k]:
                deepest, divergence = k - 1, k
                break
    floors: list[float | None] = []
    warnings: list[dict] = []
    for cfg, pipe in ((cfg_a, pa), (cfg_b, pb)):
        # floors are a side-by-side extra; a budget wall on one side
        # must not lose the agreement-depth headline
        try:
            nest = _nest_for(pipe, cfg, cfg.depth)
            if nest.entries:
                profile = nest_moduli_profile(pipe.puzzle(cfg), pipe.comb,
                                              nest, grid=cfg.grid)
                floors.append(profile.floor())
            else:
                floors.append(None)
        except BudgetError as exc:
            floors.append(None)
            warnings.append(rp.warning_entry(exc))
    payload = {
        "config_b": cfg_b.echo(),
        "compared_to_depth": limit,
        "requested_depth": n,
        "same_portrait": pa.portrait == pb.portrait,
        "deepest_agreement": deepest,
        "first_divergence": divergence,
        "value_angles": [pa.tau, pb.tau],
        "moduli_floors": floors,
    }
    return payload, {}, 0


def _verify_row_tasks(
    cfg: RunConfig, pipe: Pipeline, nest
) -> tuple[list[tuple[str, Callable]], list[dict]]:
    """Build one callable per verification row.

    Each callable gets its own pipeline when running threaded, because
    puzzle construction caches pieces and is not synchronized.
    """
    local = threading.local()

    def own() -> tuple[Puzzle, Combinatorics]:
        if cfg.threads <= 1:
            return pipe.puzzle(cfg), pipe.comb
        if not hasattr(local, "pipe"):
            local.pipe = build_pipeline(cfg)
        return local.pipe.puzzle(cfg), local.pipe.comb

    tasks: list[tuple[str, Callable]] = []
    warnings: list[dict] = []
    entries = nest.entries

    def add_child_row(V, rec) -> None:
        def run_child(V=V, rec=rec):
            puzzle, comb = own()
            return verify_children_lemma(puzzle, comb, V, rec,
                                         budget=cfg.orbit_budget,
                                         grid=cfg.grid)
        tasks.append((f"children-lemma[{V}>{rec.child}]", run_child))

    for e in entries:
        seen = {e.P.child.key()}
        add_child_row(e.Q, e.P)
        if e.favorite is not None and e.favorite.child.key() not in seen:
            seen.add(e.favorite.child.key())
            add_child_row(e.Q, e.favorite)
        try:
            kids = children_of(pipe.comb, e.Q, 2, budget=cfg.orbit_budget,
                               depth_budget=cfg.depth)
        except PuzzleError as exc:
            warnings.append(rp.warning_entry(exc))
            continue
        for rec in kids:
            if rec.child.key() not in seen:
                seen.add(rec.child.key())
                add_child_row(e.Q, rec)

    for lo, hi in zip(entries, entries[1:]):
        def run_y(lo=lo, hi=hi):
            puzzle, comb = own()
            return verify_lemma_Y(puzzle, comb, lo.Q, lo.Q, lo.P.child,
                                  hi.Q, hi.P.child,
                                  budget=cfg.orbit_budget, grid=cfg.grid)
        tasks.append((f"lemma-Y[level {lo.index}->{hi.index}]", run_y))
    return tasks, warnings


def cmd_verify(cfg: RunConfig) -> tuple[dict, dict[str, str], int]:
    pipe = build_pipeline(cfg)
    nest = _nest_for(pipe, cfg, cfg.depth)
    rows: list[dict] = []
    skipped: list[dict] = []

    tasks, warnings = _verify_row_tasks(cfg, pipe, nest)

    def attempt(name: str, fn: Callable) -> tuple[str, Any]:
        try:
            return "row", fn()
        except HypothesisNotMet as exc:
            return "skip", {"task": name, "reason": str(exc)}
        except BudgetError as exc:
            return "budget", rp.warning_entry(exc)

    if cfg.threads > 1 and len(tasks) > 1:
        with ThreadPoolExecutor(max_workers=min(cfg.threads, len(tasks))) as pool:
            futures = [(name, pool.submit(attempt, name, fn))
                       for name, fn in tasks]
            outcomes = [(name, fut.result()) for name, fut in futures]
    else:
        outcomes = [(name, attempt(name, fn)) for name, fn in tasks]

    for _, (kind, value) in outcomes:
        if kind == "row":
            rows.append(rp.encode_row(value))
        elif kind == "skip":
            skipped.append(value)
        else:
            warnings.append(value)

    if not nest.entries:
        warnings.append({"type": "BudgetExhausted", "message": nest.stop_reason,
                         "operation": "favorite-nest",
                         "budget": cfg.orbit_budget})

    failed = [r for r in rows if not r["passed"]]
    if failed:
        code = 1
    elif not rows and warnings:
        code = 3
    else:
        code = 0
    payload = {
        "value_angle": pipe.tau,
        "nest": rp.encode_nest(nest),
        "rows": rows,
        "skipped": skipped,
        "warnings": warnings,
        "summary": {"verified": len(rows), "failed": len(failed),
                    "skipped": len(skipped)},
    }
    return payload, {}, code


# -- argument handling ---------------------------------------------------------

def parse_complex(text: str) -> complex:
    parts = text.split(",")
    if len(parts) == 1:
        return complex(float(parts[0]), 0.0)
    if len(parts) == 2:
        return complex(float(parts[0]), float(parts[1]))
    raise ValueError(f"cannot parse complex number from {text!r}")


def parse_angle(text: str) -> Fraction:
    f = Fraction(text)
    if not 0 <= f < 1:
        raise ValueError("angle must lie in [0, 1)")
    return f


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--degree", type=int, default=2)
    sub.add_argument("--c", required=True,
                     help="parameter as re,im (e.g. -1.75,0.0)")
    sub.add_argument("--depth", type=int, default=12)
    sub.add_argument("--orbit-budget", type=int, default=2000)
    sub.add_argument("--height", type=float, default=1.0)
    sub.add_argument("--grid", type=int, default=256)
    sub.add_argument("--resolution", type=int, default=96)
    sub.add_argument("--out", default=".")
    sub.add_argument("--svg", action="store_true")
    sub.add_argument("--seed-angle", default=None,
                     help="symbolic value angle num/den; skips inference")


def _config(ns: argparse.Namespace, suffix: str = "") -> RunConfig:
    threads = int(os.environ.get("PUZZLEKIT_THREADS", "1"))
    return RunConfig(
        degree=ns.degree,
        c=parse_complex(getattr(ns, "c" + suffix)),
        depth=ns.depth,
        orbit_budget=ns.orbit_budget,
        height=ns.height,
        grid=ns.grid,
        resolution=ns.resolution,
        out=ns.out,
        svg=ns.svg,
        seed_angle=None if getattr(ns, "seed_angle" + suffix) is None
        else parse_angle(getattr(ns, "seed_angle" + suffix)),
        threads=threads,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="puzzlekit",
        description="Yoccoz puzzles, child nests, and conformal moduli "
                    "for unicritical polynomials",
    )
    subs = parser.add_subparsers(dest="command", required=True)
    for name in ("portrait", "puzzle", "nest", "verify"):
        _add_common(subs.add_parser(name))
    comp = subs.add_parser("compare")
    _add_common(comp)
    comp.add_argument("--c2", required=True,
                      help="second parameter as re,im")
    comp.add_argument("--seed-angle2", default=None)
    return parser


def _emit(cfg_out: str, command: str, cfg_echo: dict, payload: dict,
          svgs: dict[str, str]) -> str:
    os.makedirs(cfg_out, exist_ok=True)
    full = {"schema": rp.SCHEMA, "command": command, "config": cfg_echo}
    full.update(payload)
    path = os.path.join(cfg_out, "report.json")
    rp.write_report(path, full)
    for name, text in svgs.items():
        render.write_svg(os.path.join(cfg_out, name), text)
    return path


def _fold_values(argv: list[str]) -> list[str]:
    # join "--c -1,0" into "--c=-1,0" so negative reals survive argparse
    out: list[str] = []
    i = 0
    while i < len(argv):
        tok = argv[i]
        if tok in ("--c", "--c2", "--seed-angle", "--seed-angle2") and i + 1 < len(argv):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
        else:
            out.append(tok)
            i += 1
    return out


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    ns = parser.parse_args(_fold_values(sys.argv[1:] if argv is None else list(argv)))
    try:
        cfg = _config(ns)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    try:
        if ns.command == "portrait":
            payload, svgs, code = cmd_portrait(cfg)
        elif ns.command == "puzzle":
            payload, svgs, code = cmd_puzzle(cfg)
        elif ns.command == "nest":
            payload, svgs, code = cmd_nest(cfg)
        elif ns.command == "verify":
            payload, svgs, code = cmd_verify(cfg)
        else:
            cfg_b = _config(ns, suffix="2")
            payload, svgs, code = cmd_compare(cfg, cfg_b, ns.depth)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except PuzzleError as exc:
        path = _emit(cfg.out, ns.command, cfg.echo(),
                     {"error": rp.warning_entry(exc)}, {})
        print(f"{ns.command}: {type(exc).__name__}: {exc} [{path}]",
              file=sys.stderr)
        return exc.exit_code

    path = _emit(cfg.out, ns.command, cfg.echo(), payload, svgs)
    print(f"{ns.command}: exit {code}, report at {path}")
    return code


if __name__ == "__main__":
    sys.exit(main())
