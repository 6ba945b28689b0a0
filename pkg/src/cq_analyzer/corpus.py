"""Bundled example problems with golden verdicts and hand-computed ranks.

Each case records which analyses constitute its golden verdict and the
expected outcomes; ``run_case`` re-analyzes the bundled file and compares.
The ``hand_ranks`` strings document the exact ranks computed by hand that
serve as the oracle for the rank-analysis acceptance checks.
"""

from __future__ import annotations

import importlib.resources
from dataclasses import dataclass
from typing import Optional

from . import __version__
from .analysis import run_analyses
from .config import ToolConfig
from .dependence import witness_check
from .expr import parse
from .problem import ProblemFile, load_problem_file
from .rank import NeighborhoodSampler

__all__ = ["CORPUS", "CorpusCase", "corpus_path", "load_case", "run_case", "run_all"]


@dataclass(frozen=True)
class CorpusCase:
    name: str
    filename: str
    description: str
    analyses: tuple[str, ...]
    expected: dict
    hand_ranks: str
    witness_relation: Optional[str] = None  # over y1..yk, composed with the equalities


CORPUS: dict[str, CorpusCase] = {
    case.name: case
    for case in (
        CorpusCase(
            name="coordinate-projections",
            filename="coordinate-projections.json",
            description="f = (x1, x2) on the plane: independent coordinates at 0",
            analyses=("rcrcq", "abadie", "dependence"),
            expected={
                "rcrcq": "certified-by-sampling",
                "abadie": "consistent",
                "dependence": "independent",
                "rank_k": 2,
                "laszlo": False,
            },
            hand_ranks="rows (1,0) and (0,1): rank 2 at every point (constant)",
        ),
        CorpusCase(
            name="axis-squares",
            filename="axis-squares.json",
            description="f = (x1^2, x2^2) at the origin: constant rank fails",
            analyses=("rcrcq", "abadie", "dependence"),
            expected={
                "rcrcq": "refuted",
                "abadie": "violated",
                "dependence": "crc-failed-inconclusive",
                "rank_k": 0,
                "laszlo": True,
            },
            hand_ranks=(
                "rows (2x1,0) and (0,2x2): rank 0 at the origin, rank 2 at "
                "generic nearby points"
            ),
        ),
        CorpusCase(
            name="cusp-powers",
            filename="cusp-powers.json",
            description="f = (t^3, t^2) at 0 with the explicit relation y1^2 = y2^3",
            analyses=("rcrcq", "abadie", "dependence"),
            expected={
                "rcrcq": "refuted",
                "abadie": "violated",
                "dependence": "crc-failed-inconclusive",
                "rank_k": 0,
                "laszlo": True,
                "witness_residual_max": 1e-14,
            },
            hand_ranks="rows (3t^2) and (2t): rank 0 at t=0, rank 1 for t != 0",
            # Orientation matters: y1^2 - y2^3 composed with (t^3, t^2) is
            # t^6 - t^6 = 0 identically, whereas y1^3 - y2^2 composed in the
            # same order gives t^9 - t^4, which is not identically zero.
            witness_relation="y1^2 - y2^3",
        ),
        CorpusCase(
            name="tornado-curve",
            filename="tornado-curve.json",
            description=(
                "spiral curve (x^3 sin(1/x), x^3 cos(1/x), x^3): rank-deficient "
                "at 0 with a one-dimensional image"
            ),
            analyses=("dependence",),
            expected={
                "dependence": "crc-failed-inconclusive",
                "laszlo": True,
                "image_dimension": 1,
            },
            hand_ranks=(
                "all three derivatives vanish at 0 (rank 0); three functions "
                "of one variable have gradient rank <= 1 < 3 everywhere"
            ),
        ),
        CorpusCase(
            name="x-squared-leq-zero",
            filename="x-squared-leq-zero.json",
            description="{x : x^2 <= 0} = {0}: linearized cone R, tangent cone {0}",
            analyses=("rcrcq", "abadie"),
            expected={"rcrcq": "refuted", "abadie": "violated"},
            hand_ranks=(
                "row (2x): rank 0 at 0 and rank 1 for x != 0; subset J={} has "
                "constant rank 0, subset J={1} has non-constant rank"
            ),
        ),
        CorpusCase(
            name="parallel-equalities",
            filename="parallel-equalities.json",
            description="x1 + x2 = 0 duplicated: constant rank 1, Abadie holds",
            analyses=("rcrcq", "abadie", "kkt"),
            expected={
                "rcrcq": "certified-by-sampling",
                "abadie": "consistent",
                "kkt": "multipliers-exist",
                "multipliers": {1: 0.0, 2: 0.0},
                "minimal_norm_selected": True,
            },
            hand_ranks="rows (1,1) and (2,2): rank 1 at every point (constant)",
        ),
        CorpusCase(
            name="circle-point",
            filename="circle-point.json",
            description="unit circle at (1,0): full-rank equality, slope-2 corrector",
            analyses=("rcrcq", "abadie", "kkt"),
            expected={
                "rcrcq": "certified-by-sampling",
                "abadie": "consistent",
                "kkt": "multipliers-exist",
                "multipliers": {1: 0.5},
                "minimal_norm_selected": False,
                "slope_range": (1.8, 2.2),
            },
            hand_ranks="row (2x1, 2x2): rank 1 everywhere near (1,0)",
        ),
        CorpusCase(
            name="duplicate-bounds",
            filename="duplicate-bounds.json",
            description="min x1 over {-x1 <= 0, -2x1 <= 0}: multiplier polytope",
            analyses=("rcrcq", "abadie", "kkt"),
            expected={
                "rcrcq": "certified-by-sampling",
                "abadie": "consistent",
                "kkt": "multipliers-exist",
                "multipliers": {1: 0.2, 2: 0.4},
                "minimal_norm_selected": True,
            },
            hand_ranks=(
                "rows (-1) and (-2): rank 1 everywhere; every subset of the "
                "two active constraints has constant rank (0 or 1)"
            ),
        ),
        CorpusCase(
            name="sign-obstructed",
            filename="sign-obstructed.json",
            description="min x1 over {x1 <= 0}: dual infeasible at the origin",
            analyses=("rcrcq", "abadie", "kkt"),
            expected={
                "rcrcq": "certified-by-sampling",
                "abadie": "consistent",
                "kkt": "dual-infeasible",
                "primal": "unbounded-below",
            },
            hand_ranks="row (1): rank 1 everywhere (constant)",
        ),
    )
}


def corpus_path(filename: str):
    return importlib.resources.files("cq_analyzer") / "corpus" / filename


def load_case(name: str) -> tuple[CorpusCase, ProblemFile]:
    if name not in CORPUS:
        raise KeyError(
            f"unknown corpus case '{name}'; known: {', '.join(sorted(CORPUS))}"
        )
    case = CORPUS[name]
    with importlib.resources.as_file(corpus_path(case.filename)) as path:
        return case, load_problem_file(path)


def _approx(a: float, b: float, tol: float = 1e-8) -> bool:
    return abs(a - b) <= tol


def _check(checks: list, label: str, expected, actual) -> None:
    checks.append(
        {
            "label": label,
            "expected": str(expected),
            "actual": str(actual),
            "pass": expected == actual,
        }
    )


def run_case(name: str, base_cfg: ToolConfig | None = None) -> dict:
    """Re-analyze one bundled case and compare against its golden verdicts."""
    case, pf = load_case(name)
    cfg = pf.config(base_cfg or ToolConfig())
    sections = run_analyses(pf.to_system(), pf.x0, cfg, which=case.analyses)

    if case.witness_relation is not None:
        system = pf.to_system()
        functions = list(system.all_constraints)
        relation = parse(
            case.witness_relation, [f"y{i}" for i in range(1, len(functions) + 1)]
        )
        sampler = NeighborhoodSampler(
            center=tuple(pf.x0), radii=cfg.radii,
            samples_per_radius=cfg.samples_per_radius, seed=cfg.seed,
        )
        residual = witness_check(relation, functions, sampler)
        dep = sections.get("dependence")
        if dep is not None and "error" not in dep:
            dep["witness_relation"] = case.witness_relation
            dep["witness_residual"] = residual

    checks: list[dict] = []
    expected = case.expected
    if "rcrcq" in expected:
        _check(checks, "rcrcq verdict", expected["rcrcq"], sections["rcrcq"].get("verdict"))
    if "abadie" in expected:
        _check(checks, "abadie verdict", expected["abadie"], sections["abadie"].get("verdict"))
    if "dependence" in expected:
        _check(
            checks, "dependence sense", expected["dependence"],
            sections["dependence"].get("sense"),
        )
    if "rank_k" in expected:
        _check(checks, "rank at center", expected["rank_k"], sections["dependence"].get("rank_k"))
    if "laszlo" in expected:
        _check(
            checks, "rank-deficient at point", expected["laszlo"],
            sections["dependence"].get("laszlo_at_point"),
        )
    if "image_dimension" in expected:
        _check(
            checks, "image dimension", expected["image_dimension"],
            sections["dependence"].get("image_dimension"),
        )
    if "witness_residual_max" in expected:
        residual = sections["dependence"].get("witness_residual")
        checks.append(
            {
                "label": "witness residual",
                "expected": f"<= {expected['witness_residual_max']:.1e}",
                "actual": "none" if residual is None else f"{residual:.3e}",
                "pass": residual is not None
                and residual <= expected["witness_residual_max"],
            }
        )
    if "kkt" in expected:
        kkt = sections["kkt"]
        actual = (
            "error" if "error" in kkt
            else ("multipliers-exist" if kkt["dual_feasible"] else "dual-infeasible")
        )
        _check(checks, "kkt", expected["kkt"], actual)
    if "primal" in expected:
        _check(checks, "primal value", expected["primal"], sections["kkt"].get("primal_value"))
    if "multipliers" in expected:
        lam = sections["kkt"].get("multipliers") or {}
        ok = all(
            str(i) in lam and _approx(lam[str(i)], v)
            for i, v in expected["multipliers"].items()
        )
        checks.append(
            {
                "label": "multipliers",
                "expected": str(expected["multipliers"]),
                "actual": str(lam),
                "pass": ok,
            }
        )
    if "minimal_norm_selected" in expected:
        _check(
            checks, "minimal-norm flag", expected["minimal_norm_selected"],
            sections["kkt"].get("minimal_norm_selected"),
        )
    if "slope_range" in expected:
        lo, hi = expected["slope_range"]
        slopes = [
            p["trace"]["decay_slope"]
            for p in sections["abadie"].get("gamma_in_T_evidence", [])
            if p["trace"]["decay_slope"] is not None
        ]
        checks.append(
            {
                "label": "corrector decay slope",
                "expected": f"in [{lo}, {hi}]",
                "actual": str([round(s, 4) for s in slopes]),
                "pass": bool(slopes) and all(lo <= s <= hi for s in slopes),
            }
        )

    return {
        "problem": {"name": case.name, "file": case.filename},
        "description": case.description,
        "hand_ranks": case.hand_ranks,
        "config": cfg.to_dict(),
        "analyses": sections,
        "checks": checks,
        "pass": all(c["pass"] for c in checks),
    }


def run_all(base_cfg: ToolConfig | None = None) -> dict:
    """Run every bundled case; the report is byte-stable across identical runs."""
    cases = {name: run_case(name, base_cfg) for name in sorted(CORPUS)}
    return {
        "report_version": 1,
        "tool": {"name": "cq-analyzer", "version": __version__},
        "cases": cases,
        "all_pass": all(c["pass"] for c in cases.values()),
    }
